#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace phi4 {

/// Pairwise (cascade) summation of f(0..count-1). Error grows like log(count)
/// instead of count, which matters for lattice sums up to L = 2^16.
template <typename F>
double pairwise_sum(std::size_t count, F&& f) {
    std::function<double(std::size_t, std::size_t)> rec =
        [&](std::size_t lo, std::size_t hi) -> double {
        const std::size_t n = hi - lo;
        if (n <= 8) {
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += f(i);
            return s;
        }
        const std::size_t mid = lo + n / 2;
        return rec(lo, mid) + rec(mid, hi);
    };
    return count == 0 ? 0.0 : rec(0, count);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.size(), [&](std::size_t i) { return v[i]; });
}

/// Deterministic seed derivation: one master seed, many independent streams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded generator with platform-independent uniform/normal mappings.
/// std::uniform_real_distribution and friends are implementation-defined,
/// which would break the byte-identical-output contract.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform01(); } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct NelderMeadOptions {
    int max_iters = 4000;
    double x_tol = 1e-10;
    double f_tol = 1e-14;
    double init_step = 0.05;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opt = {});

}  // namespace phi4
