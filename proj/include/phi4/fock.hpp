#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

namespace phi4::fock {

using Mat = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using Vec = Eigen::VectorXcd;
using complexd = std::complex<double>;

/// Fock levels retained per qumode. Powers of two are the common choice
/// (n = 16 or 32 in all production runs).
struct Cutoff {
    int levels = 0;
    explicit Cutoff(int n);
};

// Truncated ladder and quadrature matrices. a has sqrt(j) on the
// (j-1, j) superdiagonal; q = (a† + a)/sqrt(2), p = i(a† - a)/sqrt(2).
MatR annihilation(int n);
MatR creation(int n);
MatR position(int n);
Mat momentum(int n);
MatR number_op(int n);

enum class GateKind {
    Squeeze,            // exp((r/2)(a†² - a²)); maps q -> e^r q
    TwoModeSqueeze,     // exp(r(a†a'† - aa'))
    BeamSplitter5050,   // exp((π/4)(a†b - ab†))
    Displace,           // exp(α a† - α* a)
    CX,                 // exp(-iΓ p⊗q): shifts q of the first mode by Γ·q of the second
    Rotation,           // exp(iθ N)
    Snap,               // exp(-iθ Z⊗|level⟩⟨level|) on qubit ⊗ qumode
    ControlledBS,       // beam splitter applied when the control qubit is |1⟩
    ControlledRotation, // rotation applied when the control qubit is |1⟩
};

struct GateDescriptor {
    GateKind kind = GateKind::Squeeze;
    double param = 0.0;       // r, Γ or θ
    complexd alpha{0.0, 0.0}; // displacement amplitude
    int level = 0;            // SNAP Fock level

    static GateDescriptor squeeze(double r);
    static GateDescriptor two_mode_squeeze(double r);
    static GateDescriptor beam_splitter();
    static GateDescriptor displace(complexd alpha);
    static GateDescriptor cx(double gamma);
    static GateDescriptor rotation(double theta);
    static GateDescriptor snap(int level, double theta);
    static GateDescriptor controlled_bs(double theta);
    static GateDescriptor controlled_rotation(double theta);
};

/// Unitary on the gate's natural space: n for single-mode gates, n² for
/// two-mode gates, 2n for qubit⊗mode hybrids and 2n² for ControlledBS.
/// Gaussian gates exponentiate the truncated generator, so they are exactly
/// unitary on the retained space; truncation shows up as deviation from the
/// infinite-dimensional action, tracked via state leakage.
Mat gate_matrix(const GateDescriptor& desc, int cutoff);

/// Two-mode squeezed vacuum amplitudes restricted to the |jj⟩ sector.
/// The truncated generator preserves the sector, so this equals applying
/// the full n²-dimensional gate to |00⟩ (asserted in tests).
Eigen::VectorXd two_mode_squeezed_vacuum_diagonal(int cutoff, double r);

enum class BlockKind { ZeroMode, HalfMode, Pair };

/// State of one factorized block: tensor factors are listed in `dims`
/// (qubit factors first, then qumodes), amplitudes in row-major order with
/// the first factor most significant.
struct QumodeBlockState {
    BlockKind kind = BlockKind::ZeroMode;
    int k = 0;  // pair momentum index; 0 for zero/half blocks
    int cutoff = 0;
    int n_qubits = 0;  // qubit factors precede the qumode factors in dims
    std::vector<int> dims;
    Vec amp;
    double leakage = 0.0;  // max top-level qumode population seen so far
    bool leakage_warn = false;

    long dim() const;
    double norm_sq() const;
};

QumodeBlockState vacuum_block(BlockKind kind, int k, int cutoff, int n_modes,
                              int n_qubits = 0);

/// Appends a fresh vacuum qumode as the last tensor factor.
void attach_vacuum_mode(QumodeBlockState& state);

/// amp <- U · amp on `count` contiguous factors starting at `first`.
/// Updates leakage accounting for the targeted qumodes.
void apply(QumodeBlockState& state, const Mat& u, int first, int count);

/// ⟨state|op|state⟩ for op acting on contiguous factors [first, first+count).
/// The real-expectation path rejects non-Hermitian op.
double exact_moment(const QumodeBlockState& state, const Mat& op, int first, int count);
complexd exact_moment_complex(const QumodeBlockState& state, const Mat& op, int first,
                              int count);

/// Probabilities over the joint occupation basis; rejects zero-norm states
/// and renormalizes, recording residual leakage.
std::vector<double> number_distribution(const QumodeBlockState& state);

struct ShotCounts {
    std::map<long, long> counts;  // flat basis index -> count
    long total = 0;
    std::uint64_t seed = 0;
};

/// Inverse-CDF sampling with the project-wide deterministic generator.
ShotCounts sample(const std::vector<double>& probs, long shots, std::uint64_t seed);

std::vector<int> decode_index(long flat, const std::vector<int>& dims);

// Small qubit helpers for hybrid circuits.
Mat hadamard();
Mat qubit_swap();

}  // namespace phi4::fock
