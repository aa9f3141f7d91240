#include "phi4/qubit.hpp"

#include <cmath>
#include <stdexcept>

#include "phi4/numerics.hpp"

namespace phi4::qubit {

namespace {
using complexd = std::complex<double>;

Mat4 embed_one_qubit(const Mat2& u, int target) {
    Mat4 out = Mat4::Zero();
    if (target == 0) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                out.block<2, 2>(2 * a, 2 * b) = u(a, b) * Mat2::Identity();
    } else {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                out.block<2, 2>(2 * a, 2 * b) = (a == b ? u : Mat2::Zero());
    }
    return out;
}

Mat4 cnot_matrix(int control, int target) {
    Mat4 u = Mat4::Zero();
    for (int i = 0; i < 4; ++i) {
        const int q0 = (i >> 1) & 1, q1 = i & 1;
        int o0 = q0, o1 = q1;
        const int c = control == 0 ? q0 : q1;
        if (c == 1) {
            if (target == 0) o0 ^= 1;
            else o1 ^= 1;
        }
        u(2 * o0 + o1, i) = 1.0;
    }
    return u;
}

bool is_unitary2(const Mat2& u) {
    return (u.adjoint() * u - Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-10;
}
}  // namespace

Gate Gate::one_qubit(int target, const Mat2& u) {
    if (!is_unitary2(u)) throw std::invalid_argument("single-qubit gate must be unitary");
    Gate g;
    g.kind = Kind::OneQubit;
    g.target = target;
    g.u = u;
    return g;
}

Gate Gate::cnot(int control, int target) {
    if (control == target) throw std::invalid_argument("CNOT needs distinct qubits");
    Gate g;
    g.kind = Kind::Cnot;
    g.control = control;
    g.target = target;
    return g;
}

int TwoQubitCircuit::cnot_count() const {
    int n = 0;
    for (const auto& g : gates)
        if (g.kind == Gate::Kind::Cnot) ++n;
    return n * (1 + 2 * cnot_fold_pairs);
}

Mat2 ry(double theta) {
    Mat2 u;
    u << std::cos(theta / 2), -std::sin(theta / 2), std::sin(theta / 2), std::cos(theta / 2);
    return u;
}

Mat2 hadamard2() {
    Mat2 u;
    const double s = 1.0 / std::sqrt(2.0);
    u << s, s, s, -s;
    return u;
}

Mat2 sdg() {
    Mat2 u = Mat2::Identity();
    u(1, 1) = complexd(0.0, -1.0);
    return u;
}

TwoQubitCircuit schmidt_circuit(double theta, const Mat2& u, const Mat2& v) {
    if (!is_unitary2(u) || !is_unitary2(v))
        throw std::invalid_argument("Schmidt preparation requires unitary U, V");
    TwoQubitCircuit c;
    c.gates.push_back(Gate::one_qubit(0, ry(theta)));
    c.gates.push_back(Gate::cnot(0, 1));
    c.gates.push_back(Gate::one_qubit(0, u));
    c.gates.push_back(Gate::one_qubit(1, v));
    return c;
}

Vec4 schmidt_prepare(double theta, const Mat2& u, const Mat2& v) {
    const auto circuit = schmidt_circuit(theta, u, v);
    Vec4 psi = Vec4::Zero();
    psi(0) = 1.0;
    for (const auto& g : circuit.gates) {
        const Mat4 m = g.kind == Gate::Kind::Cnot ? cnot_matrix(g.control, g.target)
                                                  : embed_one_qubit(g.u, g.target);
        psi = m * psi;
    }
    return psi;
}

bool NoiseModel::is_trivial_readout() const {
    return (ro_confusion[0] - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0 &&
           (ro_confusion[1] - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0;
}

void NoiseModel::validate() const {
    for (const auto& c : ro_confusion) {
        for (int j = 0; j < 2; ++j) {
            if (std::abs(c(0, j) + c(1, j) - 1.0) > 1e-12 || c(0, j) < 0.0 || c(1, j) < 0.0)
                throw std::invalid_argument("confusion matrix columns must be stochastic");
        }
    }
    if (cnot_depolarizing_p < 0.0 || cnot_depolarizing_p > 1.0)
        throw std::invalid_argument("depolarizing probability must lie in [0, 1]");
}

RunResult run(const TwoQubitCircuit& circuit, const NoiseModel& noise, long shots,
              std::uint64_t seed) {
    noise.validate();
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    rho(0, 0) = 1.0;
    const int reps = 1 + 2 * circuit.cnot_fold_pairs;
    for (const auto& g : circuit.gates) {
        if (g.kind == Gate::Kind::OneQubit) {
            const Mat4 u = embed_one_qubit(g.u, g.target);
            rho = u * rho * u.adjoint();
            continue;
        }
        const Mat4 u = cnot_matrix(g.control, g.target);
        for (int r = 0; r < reps; ++r) {
            rho = u * rho * u.adjoint();
            const double p = noise.cnot_depolarizing_p;
            if (p > 0.0)
                rho = (1.0 - p) * rho +
                      p * rho.trace() / 4.0 * Eigen::Matrix4cd::Identity();
        }
    }

    RunResult out;
    out.density = rho;
    Probs born;
    for (int i = 0; i < 4; ++i) born(i) = std::max(0.0, rho(i, i).real());
    born /= born.sum();
    const Eigen::Matrix4d confusion = calibration_matrix(noise);
    out.probs = confusion * born;

    if (shots > 0) {
        out.counts.total = shots;
        out.counts.seed = seed;
        Rng rng(seed);
        double cdf[4];
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) { acc += out.probs(i); cdf[i] = acc; }
        for (long s = 0; s < shots; ++s) {
            const double u = rng.uniform01() * acc;
            int idx = 0;
            while (idx < 3 && u > cdf[idx]) ++idx;
            ++out.counts.counts[idx];
        }
    }
    return out;
}

Eigen::Matrix4d calibration_matrix(const NoiseModel& noise) {
    noise.validate();
    Eigen::Matrix4d cal;
    for (int obs = 0; obs < 4; ++obs)
        for (int truth = 0; truth < 4; ++truth)
            cal(obs, truth) = noise.ro_confusion[0]((obs >> 1) & 1, (truth >> 1) & 1) *
                              noise.ro_confusion[1](obs & 1, truth & 1);
    return cal;
}

MitigatedDistribution mitigate_readout(const Probs& frequencies,
                                       const Eigen::Matrix4d& calibration) {
    Eigen::FullPivLU<Eigen::Matrix4d> lu(calibration);
    if (!lu.isInvertible())
        throw std::invalid_argument("singular readout calibration matrix");
    MitigatedDistribution out;
    out.quasi = lu.solve(frequencies);
    return out;
}

TwoQubitCircuit fold_cnots(const TwoQubitCircuit& circuit, int k_pairs) {
    if (k_pairs < 0) throw std::invalid_argument("fold pairs must be non-negative");
    TwoQubitCircuit out = circuit;
    out.cnot_fold_pairs = k_pairs;
    return out;
}

double zne_fit(const std::vector<ZnePoint>& points, int order) {
    if (order < 0 || static_cast<int>(points.size()) < order + 1)
        throw std::invalid_argument("zne_fit needs at least order + 1 points");
    const int n = static_cast<int>(points.size());
    Eigen::MatrixXd a(n, order + 1);
    Eigen::VectorXd y(n), w(n);
    double sigma_floor = 0.0;
    for (const auto& p : points) sigma_floor = std::max(sigma_floor, std::abs(p.value));
    sigma_floor = std::max(sigma_floor * 1e-12, 1e-300);
    for (int i = 0; i < n; ++i) {
        double xp = 1.0;
        for (int j = 0; j <= order; ++j) { a(i, j) = xp; xp *= points[i].cnot_count; }
        y(i) = points[i].value;
        const double s = std::max(points[i].sigma, sigma_floor);
        w(i) = 1.0 / (s * s);
    }
    const Eigen::MatrixXd aw = w.asDiagonal() * a;
    const Eigen::MatrixXd ata = a.transpose() * aw;
    const Eigen::VectorXd aty = a.transpose() * (w.asDiagonal() * y);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    if (!lu.isInvertible()) throw std::invalid_argument("degenerate ZNE design matrix");
    const Eigen::VectorXd coef = lu.solve(aty);
    return coef(0);  // polynomial evaluated at zero CNOTs
}

}  // namespace phi4::qubit
