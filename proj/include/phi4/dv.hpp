#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "phi4/gep.hpp"
#include "phi4/hamiltonian.hpp"
#include "phi4/qubit.hpp"

namespace phi4::dv {

using Mat4d = Eigen::Matrix4d;
using Vec4d = Eigen::Vector4d;

/// Two-qubit encodings of one block: single modes keep the even Fock levels
/// {0,2,4,6}, pairs the collective levels {|00>,|11>,|22>,|33>}.
struct ParityEncoding {
    enum class Kind { SingleMode, PairCollective };
    Kind kind = Kind::SingleMode;
    std::array<int, 4> levels{};
    int parent_cutoff = 0;

    static ParityEncoding single_mode();
    static ParityEncoding pair_collective();
};

/// Operator vocabulary on the encoded subspace. Quadratic operators are exact
/// restrictions of the parent matrices; quartic ones are products of the
/// restricted quadratics, matching what a two-qubit Pauli-algebra evaluation
/// measures. Odd powers of q restrict to the zero matrix (parity selection).
enum class SymbolicOp {
    Q, Q2, Q3, Q4, P2, N, N2, SqueezeGenerator,
    QPlus2, PMinus2, QMinus2, PPlus2, QPlus4, PMinus4, CrossQ2P2, NTotal,
};

Mat4d truncated_operator(SymbolicOp op, const ParityEncoding& enc);

/// exp(r * generator) |0_enc> : the encoded squeezed vacuum. Real amplitudes.
Vec4d encoded_squeezed_state(const ParityEncoding& enc, double r);

struct SchmidtParams {
    double theta = 0.0;
    qubit::Mat2 u = qubit::Mat2::Identity();
    qubit::Mat2 v = qubit::Mat2::Identity();
};

/// Singular-value decomposition of the 2x2 amplitude matrix; feeds the
/// single-CNOT Schmidt preparation circuit.
SchmidtParams schmidt_from_amplitudes(const Vec4d& amplitudes);

// ---------------------------------------------------------------------------
// Pauli machinery: real symmetric 4x4 operators live on the 10 real words.

enum class PauliWord { II, IX, IZ, XI, XX, XZ, ZI, ZX, ZZ, YY };
constexpr int kNumRealWords = 10;

Mat4d pauli_matrix(PauliWord w);

struct PauliTerm {
    PauliWord word = PauliWord::II;
    std::array<double, 5> coeff_poly{};  // coefficients of c^0..c^4

    double coeff_at(double c) const;
};

/// coefficients Tr(P M)/4 over the 10 real words; rejects non-symmetric input.
std::vector<PauliTerm> pauli_decompose(const Mat4d& m);
Mat4d pauli_reconstruct(const std::vector<PauliTerm>& terms, double c);

/// Five measurement circuits cover all ten words: {II,ZI,IZ,ZZ} as-is,
/// {XI,XZ} after H on qubit 0, {IX,ZX} after H on qubit 1, {XX} after H on
/// both, {YY} after the Y-basis change on both.
int measurement_group(PauliWord w);
std::vector<qubit::Gate> basis_change(int group);
/// Diagonal weight of the word on computational outcome j within its group.
double diag_weight(PauliWord w, int outcome);

/// Measurable operator for d<A>/dr on the encoded state: the commutator
/// [A, K] with the truncated squeeze generator K, built from explicit 4x4
/// matrices (canonical commutation relations do not survive the truncation).
Mat4d gradient_operator(const Mat4d& a, const ParityEncoding& enc);

// ---------------------------------------------------------------------------
// displaced Hamiltonian and the VQE loop

/// Per-block measurable operators as Pauli terms. The similarity transform
/// q(0) -> q(0) + c turns the zero-block coefficients into polynomials in c;
/// the parity-odd monomials vanish on the encoding but are kept so the
/// polynomial bookkeeping stays explicit.
struct DisplacedBlockTerms {
    bool is_pair = false;
    int k = 0;
    std::vector<PauliTerm> q2, q4, p2;                         // single blocks
    std::vector<PauliTerm> qp2, pm2, qm2, pp2, qp4, pm4, cross;  // pair blocks
};

std::vector<DisplacedBlockTerms> displace_hamiltonian(const gep::LatticeSpec& spec,
                                                      double phi_c);

struct DvParams {
    double omega_prime = 0.0;
    double phi_c = 0.0;
    std::vector<int> squeezed_modes;

    bool is_squeezed(int k) const;
};

enum class Mitigation { None, RO, RO_ZNE };

struct DvOptions {
    qubit::NoiseModel noise;
    long shots = 0;  // 0 = exact probability level
    std::uint64_t seed = 0;
    Mitigation mitigation = Mitigation::None;
    int zne_order = 1;
    std::vector<int> fold_levels = {0, 1, 2, 3, 4};  // CNOT counts 1,3,5,7,9
};

struct DvEnergyResult {
    double delta_h = 0.0;     // mitigated value (linear extrapolation when enabled)
    double sigma = 0.0;
    double delta_h_ne = 0.0;  // no-extrapolation value (physical fold level)
    double sigma_ne = 0.0;
    double energy = 0.0;      // absolute <H>, mitigated path
    std::vector<qubit::ZnePoint> zne_series;
};

/// Delta<H> of the encoded Ansatz with the classical phi_c = 0 reference,
/// evaluated through the five measurement circuits per block.
DvEnergyResult dv_energy(const DvParams& params, const gep::LatticeSpec& spec,
                         const DvOptions& opt);

/// dE/d(Omega') and dE/d(phi_c) from the commutator observables, read off the
/// same five circuits as the energy.
struct DvGradient {
    double d_omega_prime = 0.0;
    double d_phi_c = 0.0;
};
DvGradient dv_gradient(const DvParams& params, const gep::LatticeSpec& spec,
                       const DvOptions& opt);

struct DvMinimizeOptions {
    enum class Method { GradientDescent, Simplex };
    Method method = Method::GradientDescent;
    int max_iters = 120;
    double learning_rate = 0.2;
    double min_learning_rate = 1e-4;
    long grad_shots = 2048;
};

struct DvMinimizeResult {
    DvParams params;
    double delta_h = 0.0;
    std::vector<double> trajectory;
    int iterations = 0;
    bool converged = false;
};

/// Gradient descent at 2048-shot gradients without ZNE; the returned
/// parameters feed a final high-shot mitigated evaluation.
DvMinimizeResult dv_minimize(const DvParams& init, const gep::LatticeSpec& spec,
                             const DvOptions& opt, const DvMinimizeOptions& mopt);

}  // namespace phi4::dv
