#include "phi4/gep.hpp"

#include <cmath>
#include <future>
#include <stdexcept>

#include "phi4/numerics.hpp"

namespace phi4::gep {

namespace {
constexpr double kPi = 3.14159265358979323846;

double omega_k(double omega_mass, int sites, int k) {
    const double s = std::sin(kPi * k / sites);
    return std::sqrt(omega_mass * omega_mass + 4.0 * s * s);
}

void check_omega(double omega_mass) {
    if (!(omega_mass > 0.0)) throw std::invalid_argument("mass parameter must be positive");
}

void check_sites(int sites) {
    if (sites < 2 || sites % 2 != 0)
        throw std::invalid_argument("lattice size must be even and >= 2");
}
}  // namespace

void LatticeSpec::validate() const {
    check_sites(sites);
    if (!(mass > 0.0)) throw std::invalid_argument("renormalized mass must be positive");
    if (coupling < 0.0) throw std::invalid_argument("coupling must be non-negative");
}

std::vector<double> dispersion(double omega_mass, int sites) {
    check_omega(omega_mass);
    check_sites(sites);
    std::vector<double> w(sites);
    for (int k = 0; k < sites; ++k) w[k] = omega_k(omega_mass, sites, k);
    return w;
}

ModeSums mode_sums(double omega_mass, int sites) {
    check_omega(omega_mass);
    check_sites(sites);
    const double inv2l = 1.0 / (2.0 * sites);
    ModeSums s;
    s.i0 = inv2l * pairwise_sum(sites, [&](std::size_t k) {
               return 1.0 / omega_k(omega_mass, sites, static_cast<int>(k));
           });
    s.i1 = inv2l * pairwise_sum(sites, [&](std::size_t k) {
               return omega_k(omega_mass, sites, static_cast<int>(k));
           });
    return s;
}

double bare_mass_squared(double mass, double coupling, int sites) {
    check_omega(mass);
    return mass * mass - 0.5 * coupling * mode_sums(mass, sites).i0;
}

double gep_value(double phi_c, double omega_mass, const LatticeSpec& spec) {
    spec.validate();
    check_omega(omega_mass);
    const double m0sq = bare_mass_squared(spec.mass, spec.coupling, spec.sites);
    const ModeSums s = mode_sums(omega_mass, spec.sites);
    const double pc2 = phi_c * phi_c;
    return 0.5 * m0sq * pc2 + spec.coupling / 24.0 * (pc2 + 6.0 * s.i0) * pc2 + s.i1 +
           0.5 * (m0sq - omega_mass * omega_mass) * s.i0 +
           spec.coupling / 8.0 * s.i0 * s.i0;
}

GepEvaluation gep_of_omega(double omega_mass, const LatticeSpec& spec) {
    spec.validate();
    if (!(spec.coupling > 0.0))
        throw std::invalid_argument("gep_of_omega requires lambda > 0 (free theory has no branch)");
    if (!(omega_mass >= spec.mass))
        throw std::invalid_argument("branch is defined for Omega >= m");
    const double m0sq = bare_mass_squared(spec.mass, spec.coupling, spec.sites);
    const ModeSums s = mode_sums(omega_mass, spec.sites);
    GepEvaluation out;
    out.omega_mass = omega_mass;
    out.phi_c_sq = 2.0 * (omega_mass * omega_mass - m0sq) / spec.coupling - s.i0;
    out.value = 0.5 * m0sq * out.phi_c_sq +
                spec.coupling / 24.0 * out.phi_c_sq * out.phi_c_sq + s.i1 -
                spec.coupling / 8.0 * s.i0 * s.i0;
    return out;
}

double gep_gradient(double omega_mass, const LatticeSpec& spec) {
    spec.validate();
    if (!(spec.coupling > 0.0)) throw std::invalid_argument("gradient requires lambda > 0");
    check_omega(omega_mass);
    const int sites = spec.sites;
    // dI0/dOmega^2 = -(1/4L) sum 1/omega^3
    const double di0 = -pairwise_sum(sites, [&](std::size_t k) {
        const double w = omega_k(omega_mass, sites, static_cast<int>(k));
        return 1.0 / (w * w * w);
    }) / (4.0 * sites);
    const double i0 = mode_sums(omega_mass, sites).i0;
    const double i0_ref = mode_sums(spec.mass, sites).i0;
    const double lam = spec.coupling;
    const double m2 = spec.mass * spec.mass;
    return (1.0 - 0.5 * lam * di0) *
           (omega_mass * omega_mass + 2.0 * m2 + lam * i0 - lam * i0_ref) / (3.0 * lam);
}

double delta_vg(double omega1, double mass, int sites) {
    check_omega(omega1);
    check_omega(mass);
    check_sites(sites);
    const double o2 = omega1 * omega1, m2 = mass * mass;
    const double denom = o2 + 2.0 * m2;
    const ModeSums s1 = mode_sums(omega1, sites);
    const ModeSums s0 = mode_sums(mass, sites);
    const double num = (-o2 * o2 - 4.0 * o2 * m2 + 2.0 * m2 * m2) * s1.i0 +
                       (-o2 * o2 + 2.0 * o2 * m2 + 2.0 * m2 * m2) * s0.i0 +
                       4.0 * denom * (s1.i1 - s0.i1);
    return num / (4.0 * denom);
}

std::optional<CriticalPoint> critical_point(double mass, int sites, double delta_tol) {
    check_omega(mass);
    check_sites(sites);
    // geometric scan Omega in m * [1.01, 1000]; the trivial zero sits at
    // Omega = m, so look for the + -> - crossing above it
    const int n_scan = 600;
    const double lo_f = 1.01, hi_f = 1000.0;
    double prev_x = mass * lo_f;
    double prev_v = delta_vg(prev_x, mass, sites);
    double blo = 0.0, bhi = 0.0;
    for (int i = 1; i <= n_scan; ++i) {
        const double x = mass * lo_f * std::pow(hi_f / lo_f, static_cast<double>(i) / n_scan);
        const double v = delta_vg(x, mass, sites);
        if (prev_v > 0.0 && v <= 0.0) { blo = prev_x; bhi = x; break; }
        prev_x = x;
        prev_v = v;
    }
    if (bhi == 0.0) return std::nullopt;
    double mid = 0.5 * (blo + bhi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (blo + bhi);
        const double v = delta_vg(mid, mass, sites);
        if (std::abs(v) < delta_tol) break;
        if (v > 0.0) blo = mid;
        else bhi = mid;
        if (bhi - blo < 1e-16 * mid) break;
    }
    CriticalPoint cp;
    cp.sites = sites;
    cp.mass = mass;
    cp.omega_c = mid;
    const double i0_m = mode_sums(mass, sites).i0;
    const double i0_c = mode_sums(mid, sites).i0;
    cp.lambda_c = (mid * mid + 2.0 * mass * mass) / (i0_m - i0_c);
    return cp;
}

std::vector<std::optional<CriticalPoint>> critical_scan(double mass,
                                                        const std::vector<int>& sizes) {
    std::vector<std::future<std::optional<CriticalPoint>>> futs;
    futs.reserve(sizes.size());
    for (int L : sizes)
        futs.push_back(std::async(std::launch::async,
                                  [mass, L] { return critical_point(mass, L); }));
    std::vector<std::optional<CriticalPoint>> out;
    out.reserve(sizes.size());
    for (auto& f : futs) out.push_back(f.get());
    return out;
}

std::vector<double> duality_solutions(double lambda_over_m2) {
    if (!(lambda_over_m2 > 0.0))
        throw std::invalid_argument("lambda/m^2 must be positive");
    const auto g = [&](double x) {
        return std::log(x) / (4.0 * kPi) - (2.0 + x) / lambda_over_m2;
    };
    std::vector<double> roots;
    const int n_grid = 4000;
    const double xlo = 1e-8, xhi = 1e8;
    double px = xlo, pg = g(px);
    for (int i = 1; i <= n_grid; ++i) {
        const double x = xlo * std::pow(xhi / xlo, static_cast<double>(i) / n_grid);
        const double gx = g(x);
        if ((pg < 0.0) != (gx < 0.0)) {
            double lo = px, hi = x;
            for (int it = 0; it < 200; ++it) {
                const double mid = std::sqrt(lo * hi);
                if ((g(mid) < 0.0) == (g(lo) < 0.0)) lo = mid;
                else hi = mid;
                if (hi - lo < 1e-15 * hi) break;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        px = x;
        pg = gx;
    }
    return roots;
}

}  // namespace phi4::gep
