#include "phi4/fock.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "phi4/numerics.hpp"

namespace phi4::fock {

namespace {
constexpr double kLeakageWarnThreshold = 1e-3;

Mat to_complex(const MatR& m) { return m.cast<complexd>(); }

MatR kron_r(const MatR& a, const MatR& b) {
    MatR out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Mat kron_c(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

void check_cutoff(int n) {
    if (n < 2) throw std::invalid_argument("cutoff must be >= 2");
}
}  // namespace

Cutoff::Cutoff(int n) : levels(n) { check_cutoff(n); }

MatR annihilation(int n) {
    check_cutoff(n);
    MatR a = MatR::Zero(n, n);
    for (int j = 1; j < n; ++j) a(j - 1, j) = std::sqrt(static_cast<double>(j));
    return a;
}

MatR creation(int n) { return annihilation(n).transpose(); }

MatR position(int n) {
    const MatR a = annihilation(n);
    return (a.transpose() + a) / std::sqrt(2.0);
}

Mat momentum(int n) {
    const MatR a = annihilation(n);
    return complexd(0.0, 1.0) / std::sqrt(2.0) * to_complex(MatR(a.transpose() - a));
}

MatR number_op(int n) {
    MatR nm = MatR::Zero(n, n);
    for (int j = 0; j < n; ++j) nm(j, j) = j;
    return nm;
}

GateDescriptor GateDescriptor::squeeze(double r) { return {GateKind::Squeeze, r, {}, 0}; }
GateDescriptor GateDescriptor::two_mode_squeeze(double r) { return {GateKind::TwoModeSqueeze, r, {}, 0}; }
GateDescriptor GateDescriptor::beam_splitter() { return {GateKind::BeamSplitter5050, 0.0, {}, 0}; }
GateDescriptor GateDescriptor::displace(complexd alpha) { return {GateKind::Displace, 0.0, alpha, 0}; }
GateDescriptor GateDescriptor::cx(double gamma) { return {GateKind::CX, gamma, {}, 0}; }
GateDescriptor GateDescriptor::rotation(double theta) { return {GateKind::Rotation, theta, {}, 0}; }
GateDescriptor GateDescriptor::snap(int level, double theta) { return {GateKind::Snap, theta, {}, level}; }
GateDescriptor GateDescriptor::controlled_bs(double theta) { return {GateKind::ControlledBS, theta, {}, 0}; }
GateDescriptor GateDescriptor::controlled_rotation(double theta) { return {GateKind::ControlledRotation, theta, {}, 0}; }

namespace {
MatR bs_generator(int n, double theta) {
    const MatR a = annihilation(n);
    const MatR ad = a.transpose();
    const MatR id = MatR::Identity(n, n);
    return theta * (kron_r(ad, id) * kron_r(id, a) - kron_r(a, id) * kron_r(id, ad));
}

Mat rotation_matrix(int n, double theta) {
    Mat u = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j) u(j, j) = std::exp(complexd(0.0, theta * j));
    return u;
}

Mat controlled(const Mat& u) {
    const auto d = u.rows();
    Mat out = Mat::Zero(2 * d, 2 * d);
    out.topLeftCorner(d, d) = Mat::Identity(d, d);
    out.bottomRightCorner(d, d) = u;
    return out;
}
}  // namespace

Mat gate_matrix(const GateDescriptor& desc, int cutoff) {
    check_cutoff(cutoff);
    const int n = cutoff;
    switch (desc.kind) {
        case GateKind::Squeeze: {
            const MatR a = annihilation(n);
            const MatR gen = 0.5 * desc.param * MatR(a.transpose() * a.transpose() - a * a);
            return to_complex(gen.exp());
        }
        case GateKind::TwoModeSqueeze: {
            const MatR a = annihilation(n);
            const MatR ad = a.transpose();
            const MatR gen = desc.param * (kron_r(ad, ad) - kron_r(a, a));
            return to_complex(gen.exp());
        }
        case GateKind::BeamSplitter5050:
            return to_complex(bs_generator(n, 3.14159265358979323846 / 4.0).exp());
        case GateKind::Displace: {
            if (desc.alpha.imag() == 0.0) {
                const MatR a = annihilation(n);
                const MatR gen = desc.alpha.real() * MatR(a.transpose() - a);
                return to_complex(gen.exp());
            }
            const Mat a = to_complex(annihilation(n));
            const Mat gen = desc.alpha * a.adjoint() - std::conj(desc.alpha) * a;
            return gen.exp();
        }
        case GateKind::CX: {
            // -iΓ p⊗q with p = i(a†-a)/sqrt(2) is a real antisymmetric generator
            const MatR a = annihilation(n);
            const MatR pr = MatR(a.transpose() - a) / std::sqrt(2.0);
            const MatR gen = desc.param * kron_r(pr, position(n));
            return to_complex(gen.exp());
        }
        case GateKind::Rotation:
            return rotation_matrix(n, desc.param);
        case GateKind::Snap: {
            if (desc.level >= n || desc.level < 0)
                throw std::invalid_argument("snap level outside the retained Fock space");
            Mat u = Mat::Identity(2 * n, 2 * n);
            u(desc.level, desc.level) = std::exp(complexd(0.0, -desc.param));
            u(n + desc.level, n + desc.level) = std::exp(complexd(0.0, desc.param));
            return u;
        }
        case GateKind::ControlledBS:
            return controlled(to_complex(bs_generator(n, desc.param).exp()));
        case GateKind::ControlledRotation:
            return controlled(rotation_matrix(n, desc.param));
    }
    throw std::logic_error("unknown gate kind");
}

Eigen::VectorXd two_mode_squeezed_vacuum_diagonal(int cutoff, double r) {
    check_cutoff(cutoff);
    // generator restricted to the |jj> sector: tridiagonal with (j+1) couplings
    MatR gen = MatR::Zero(cutoff, cutoff);
    for (int j = 0; j + 1 < cutoff; ++j) {
        gen(j + 1, j) = r * (j + 1);
        gen(j, j + 1) = -r * (j + 1);
    }
    const MatR u = gen.exp();
    return u.col(0);
}

long QumodeBlockState::dim() const {
    long d = 1;
    for (int x : dims) d *= x;
    return d;
}

double QumodeBlockState::norm_sq() const { return amp.squaredNorm(); }

QumodeBlockState vacuum_block(BlockKind kind, int k, int cutoff, int n_modes, int n_qubits) {
    check_cutoff(cutoff);
    QumodeBlockState s;
    s.kind = kind;
    s.k = k;
    s.cutoff = cutoff;
    s.n_qubits = n_qubits;
    for (int i = 0; i < n_qubits; ++i) s.dims.push_back(2);
    for (int i = 0; i < n_modes; ++i) s.dims.push_back(cutoff);
    s.amp = Vec::Zero(s.dim());
    s.amp(0) = 1.0;
    return s;
}

void attach_vacuum_mode(QumodeBlockState& state) {
    const long d = state.dim();
    Vec next = Vec::Zero(d * state.cutoff);
    for (long i = 0; i < d; ++i) next(i * state.cutoff) = state.amp(i);
    state.dims.push_back(state.cutoff);
    state.amp.swap(next);
}

namespace {
// population of the top retained level of a given qumode factor
double top_level_population(const QumodeBlockState& s, int factor) {
    const int d = s.dims[factor];
    long right = 1;
    for (std::size_t i = factor + 1; i < s.dims.size(); ++i) right *= s.dims[i];
    const long stride = right * d;
    double pop = 0.0;
    const long total = s.dim();
    for (long base = 0; base < total; base += stride)
        for (long r = 0; r < right; ++r) pop += std::norm(s.amp(base + (d - 1) * right + r));
    return pop;
}
}  // namespace

void apply(QumodeBlockState& state, const Mat& u, int first, int count) {
    if (first < 0 || count < 1 || first + count > static_cast<int>(state.dims.size()))
        throw std::invalid_argument("apply: factor range out of bounds");
    long sub = 1;
    for (int i = first; i < first + count; ++i) sub *= state.dims[i];
    if (u.rows() != sub || u.cols() != sub)
        throw std::invalid_argument("apply: gate dimension does not match targeted factors");
    long left = 1, right = 1;
    for (int i = 0; i < first; ++i) left *= state.dims[i];
    for (std::size_t i = first + count; i < state.dims.size(); ++i) right *= state.dims[i];

    Vec out = Vec::Zero(state.amp.size());
    // amp viewed as [left][sub][right]
    for (long l = 0; l < left; ++l) {
        for (long r = 0; r < right; ++r) {
            for (long i = 0; i < sub; ++i) {
                complexd acc(0.0, 0.0);
                for (long j = 0; j < sub; ++j)
                    acc += u(i, j) * state.amp((l * sub + j) * right + r);
                out((l * sub + i) * right + r) = acc;
            }
        }
    }
    state.amp.swap(out);

    for (int i = first; i < first + count; ++i) {
        if (i < state.n_qubits) continue;
        state.leakage = std::max(state.leakage, top_level_population(state, i));
    }
    if (state.leakage > kLeakageWarnThreshold) state.leakage_warn = true;
}

complexd exact_moment_complex(const QumodeBlockState& state, const Mat& op, int first,
                              int count) {
    QumodeBlockState tmp = state;
    apply(tmp, op, first, count);
    tmp.leakage = state.leakage;  // operator application is not a gate
    return state.amp.dot(tmp.amp);
}

double exact_moment(const QumodeBlockState& state, const Mat& op, int first, int count) {
    if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("exact_moment: operator is not Hermitian");
    return exact_moment_complex(state, op, first, count).real();
}

std::vector<double> number_distribution(const QumodeBlockState& state) {
    const double n2 = state.norm_sq();
    if (!(n2 > 1e-300)) throw std::invalid_argument("number_distribution: zero-norm state");
    std::vector<double> probs(state.amp.size());
    for (long i = 0; i < state.amp.size(); ++i) probs[i] = std::norm(state.amp(i)) / n2;
    return probs;
}

ShotCounts sample(const std::vector<double>& probs, long shots, std::uint64_t seed) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) { acc += probs[i]; cdf[i] = acc; }
    ShotCounts out;
    out.total = shots;
    out.seed = seed;
    Rng rng(seed);
    for (long s = 0; s < shots; ++s) {
        const double u = rng.uniform01() * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const long idx = std::min<long>(probs.size() - 1, it - cdf.begin());
        ++out.counts[idx];
    }
    return out;
}

std::vector<int> decode_index(long flat, const std::vector<int>& dims) {
    std::vector<int> out(dims.size());
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
        out[i] = static_cast<int>(flat % dims[i]);
        flat /= dims[i];
    }
    return out;
}

Mat hadamard() {
    Mat h(2, 2);
    const double s = 1.0 / std::sqrt(2.0);
    h << s, s, s, -s;
    return h;
}

Mat qubit_swap() {
    Mat u = Mat::Zero(4, 4);
    u(0, 0) = 1.0;
    u(1, 2) = 1.0;
    u(2, 1) = 1.0;
    u(3, 3) = 1.0;
    return u;
}

}  // namespace phi4::fock
