#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "phi4/fock.hpp"
#include "phi4/gep.hpp"
#include "phi4/hamiltonian.hpp"

namespace phi4::cv {

using ham::Est;

struct Backend {
    enum class Kind { Exact, Sampled };
    Kind kind = Kind::Exact;
    long shots = 0;
    std::uint64_t seed = 0;

    static Backend exact() { return {}; }
    static Backend sampled(long shots, std::uint64_t seed) {
        return {Kind::Sampled, shots, seed};
    }
    bool is_exact() const { return kind == Kind::Exact; }
};

struct AnsatzConfig {
    double omega_prime = 0.0;
    double phi_c = 0.0;
    std::vector<int> squeezed_modes;  // k in [0, L/2], ascending
    double shift_s = 0.0;             // CX shift; 0 selects the backend default
    Backend backend;
    int cutoff = 16;
    enum class PairCircuit { TwoModeSqueeze, SingleSqueezes };
    PairCircuit pair_circuit = PairCircuit::TwoModeSqueeze;

    double effective_shift() const {
        if (shift_s > 0.0) return shift_s;
        return backend.is_exact() ? 0.1 : 1.0;
    }
    bool is_squeezed(int k) const;
    void validate(const gep::LatticeSpec& spec) const;

    /// Mirror of the restricted-mode choices used in production runs:
    /// {0} up to L = 10, {0..3} up to L < 76, every mode beyond.
    static std::vector<int> default_squeezed_modes(int sites);
};

/// r(k) = (1/2) log(omega_m(k)/omega_Omega'(k)) for k = 0..L/2.
std::vector<double> squeeze_profile(double omega_prime, double mass, int sites);

/// Gaussian Ansatz states, one block per factorized subsystem: zero mode
/// (squeezed + displaced), pairs (two-mode squeezed or single squeezes r, -r),
/// half mode (squeezed). Unsqueezed modes stay in vacuum.
std::vector<fock::QumodeBlockState> prepare_blocks(const AnsatzConfig& config,
                                                   const gep::LatticeSpec& spec);

/// <q^2> of a single-mode block from the three-point CX combination of
/// <N_anc> at Gamma in {-s, 0, +s}. Calibrated prefactor 1/s^2.
Est moment_q2(const fock::QumodeBlockState& block, double s, const Backend& backend);

/// <q^4> from the five-point combination of <N_anc^2> at Gamma in
/// {-2s, -s, 0, s, 2s}. Calibrated prefactor 1/(6 s^4).
Est moment_q4(const fock::QumodeBlockState& block, double s, const Backend& backend);

/// All pair-block ingredients from photon-number data of the pair itself,
/// with the partner acting as the ancilla of the CX gate.
ham::PairBlockMoments pair_moments(const fock::QumodeBlockState& block, double s,
                                   const Backend& backend);

class EnergyResampler {
  public:
    virtual ~EnergyResampler() = default;
    virtual double resample(std::uint64_t seed) const = 0;
};

struct EnergyEstimate {
    double value = 0.0;
    double sigma = 0.0;  // 0 iff exact backend
    long shots_used = 0;
    bool leakage_flag = false;
    std::shared_ptr<const EnergyResampler> resampler;  // null on exact backend
};

/// <H> of the Ansatz state, assembled block by block.
EnergyEstimate energy(const AnsatzConfig& config, const gep::LatticeSpec& spec);

/// Delta<H> = energy - L * V_G(phi_c = 0, Omega = m); the reference term is
/// classical to keep sampling error out of it.
EnergyEstimate energy_difference(const AnsatzConfig& config, const gep::LatticeSpec& spec);

enum class SqueezeGradMethod { ParameterShift, HybridSnap };
enum class PhicGradMethod { DisplacementShift, Polynomial };

/// dE/dr(k) for k in squeezed_modes.
Est grad_squeeze(const AnsatzConfig& config, const gep::LatticeSpec& spec, int k,
                 SqueezeGradMethod method = SqueezeGradMethod::ParameterShift,
                 double t = 0.2);

/// dE/dphi_c.
Est grad_phic(const AnsatzConfig& config, const gep::LatticeSpec& spec,
              PhicGradMethod method = PhicGradMethod::Polynomial, double t = 0.05);

struct GradientEstimate {
    Est d_omega_prime;
    Est d_phi_c;
    std::vector<std::pair<int, Est>> d_r;  // per squeezed mode
};
GradientEstimate gradient(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                          SqueezeGradMethod method = SqueezeGradMethod::ParameterShift);

struct OptimizerOptions {
    enum class Method { GradientDescent, Simplex };
    Method method = Method::Simplex;
    int max_iters = 120;
    double learning_rate = 0.2;
    double min_learning_rate = 1e-4;
    long grad_shots = 2048;
    double shift_t = 0.2;
};

struct MinimizeResult {
    AnsatzConfig config;
    double energy = 0.0;
    std::vector<double> trajectory;
    int iterations = 0;
    bool converged = false;
};

/// Minimizes energy over (Omega', phi_c) at fixed coupling.
MinimizeResult minimize(const AnsatzConfig& init, const gep::LatticeSpec& spec,
                        const OptimizerOptions& opt);

}  // namespace phi4::cv
