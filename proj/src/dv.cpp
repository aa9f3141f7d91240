#include "phi4/dv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "phi4/fock.hpp"
#include "phi4/numerics.hpp"

namespace phi4::dv {

namespace {

using fock::complexd;

struct SingleParentOps {
    Mat4d q2, p2, n, gen;
};

struct PairParentOps {
    Mat4d qp2, pm2, qm2, pp2, n_tot, gen;
};

// Exact matrix elements of the parent operators between the encoded levels.
const SingleParentOps& single_parent() {
    static const SingleParentOps ops = [] {
        const int np = 16;
        const Eigen::MatrixXd a = fock::annihilation(np);
        const Eigen::MatrixXd q = fock::position(np);
        const Eigen::MatrixXd q2 = q * q;
        const Eigen::MatrixXcd p = fock::momentum(np);
        const Eigen::MatrixXcd p2 = p * p;
        const Eigen::MatrixXd gen = 0.5 * (a.transpose() * a.transpose() - a * a);
        const std::array<int, 4> lev = {0, 2, 4, 6};
        SingleParentOps o;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                o.q2(i, j) = q2(lev[i], lev[j]);
                o.p2(i, j) = p2(lev[i], lev[j]).real();
                o.n(i, j) = i == j ? lev[i] : 0.0;
                o.gen(i, j) = gen(lev[i], lev[j]);
            }
        return o;
    }();
    return ops;
}

const PairParentOps& pair_parent() {
    static const PairParentOps ops = [] {
        const int np = 8;
        const Eigen::MatrixXd a = fock::annihilation(np);
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(np, np);
        auto kron = [&](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
            Eigen::MatrixXcd out(np * np, np * np);
            for (int i = 0; i < np; ++i)
                for (int j = 0; j < np; ++j)
                    out.block(i * np, j * np, np, np) = x(i, j) * y;
            return out;
        };
        const Eigen::MatrixXcd q = fock::position(np).cast<complexd>();
        const Eigen::MatrixXcd p = fock::momentum(np);
        const Eigen::MatrixXcd idc = id.cast<complexd>();
        const Eigen::MatrixXcd qa = kron(q, idc), qb = kron(idc, q);
        const Eigen::MatrixXcd pa = kron(p, idc), pb = kron(idc, p);
        const Eigen::MatrixXcd nn =
            kron(fock::number_op(np).cast<complexd>(), idc) +
            kron(idc, fock::number_op(np).cast<complexd>());
        const Eigen::MatrixXcd qp = (qa + qb) / std::sqrt(2.0);
        const Eigen::MatrixXcd qm = (qa - qb) / std::sqrt(2.0);
        const Eigen::MatrixXcd pp = (pa + pb) / std::sqrt(2.0);
        const Eigen::MatrixXcd pm = (pa - pb) / std::sqrt(2.0);
        const Eigen::MatrixXcd gen =
            kron(a.transpose().cast<complexd>(), a.transpose().cast<complexd>()) -
            kron(a.cast<complexd>(), a.cast<complexd>());
        std::array<long, 4> lev;
        for (int j = 0; j < 4; ++j) lev[j] = static_cast<long>(j) * np + j;
        PairParentOps o;
        auto restrict4 = [&](const Eigen::MatrixXcd& m, Mat4d& out) {
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out(i, j) = m(lev[i], lev[j]).real();
        };
        restrict4(qp * qp, o.qp2);
        restrict4(qm * qm, o.qm2);
        restrict4(pp * pp, o.pp2);
        restrict4(pm * pm, o.pm2);
        restrict4(nn, o.n_tot);
        restrict4(gen, o.gen);
        return o;
    }();
    return ops;
}

Mat4d sym_product(const Mat4d& a, const Mat4d& b) { return 0.5 * (a * b + b * a); }

// r(k) = (1/2) log(omega_m(k)/omega_Omega'(k))
std::vector<double> squeeze_ratio_profile(double omega_prime, const gep::LatticeSpec& spec) {
    const auto wm = gep::dispersion(spec.mass, spec.sites);
    const auto wp = gep::dispersion(omega_prime, spec.sites);
    std::vector<double> r(spec.sites / 2 + 1);
    for (int k = 0; k <= spec.sites / 2; ++k) r[k] = 0.5 * std::log(wm[k] / wp[k]);
    return r;
}

}  // namespace

ParityEncoding ParityEncoding::single_mode() {
    return {Kind::SingleMode, {0, 2, 4, 6}, 16};
}

ParityEncoding ParityEncoding::pair_collective() {
    return {Kind::PairCollective, {0, 1, 2, 3}, 8};
}

Mat4d truncated_operator(SymbolicOp op, const ParityEncoding& enc) {
    if (enc.kind == ParityEncoding::Kind::SingleMode) {
        const auto& po = single_parent();
        switch (op) {
            case SymbolicOp::Q:
            case SymbolicOp::Q3:
                return Mat4d::Zero();  // odd parity: no matrix elements in the encoding
            case SymbolicOp::Q2: return po.q2;
            case SymbolicOp::Q4: return po.q2 * po.q2;
            case SymbolicOp::P2: return po.p2;
            case SymbolicOp::N: return po.n;
            case SymbolicOp::N2: return po.n * po.n;
            case SymbolicOp::SqueezeGenerator: return po.gen;
            default:
                throw std::invalid_argument("pair operator requested on a single-mode encoding");
        }
    }
    const auto& po = pair_parent();
    switch (op) {
        case SymbolicOp::QPlus2: return po.qp2;
        case SymbolicOp::PMinus2: return po.pm2;
        case SymbolicOp::QMinus2: return po.qm2;
        case SymbolicOp::PPlus2: return po.pp2;
        case SymbolicOp::QPlus4: return po.qp2 * po.qp2;
        case SymbolicOp::PMinus4: return po.pm2 * po.pm2;
        case SymbolicOp::CrossQ2P2: return sym_product(po.qp2, po.pm2);
        case SymbolicOp::NTotal: return po.n_tot;
        case SymbolicOp::N: return po.n_tot;
        case SymbolicOp::N2: return po.n_tot * po.n_tot;
        case SymbolicOp::SqueezeGenerator: return po.gen;
        default:
            throw std::invalid_argument("single-mode operator requested on a pair encoding");
    }
}

Vec4d encoded_squeezed_state(const ParityEncoding& enc, double r) {
    const Mat4d gen = truncated_operator(SymbolicOp::SqueezeGenerator, enc);
    const Mat4d u = Mat4d(r * gen).exp();
    return u.col(0);
}

SchmidtParams schmidt_from_amplitudes(const Vec4d& amplitudes) {
    Eigen::Matrix2d m;
    m << amplitudes(0), amplitudes(1), amplitudes(2), amplitudes(3);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    SchmidtParams out;
    const double s0 = svd.singularValues()(0), s1 = svd.singularValues()(1);
    out.theta = 2.0 * std::atan2(s1, s0);
    out.u = svd.matrixU().cast<complexd>();
    out.v = svd.matrixV().cast<complexd>();
    return out;
}

// ---------------------------------------------------------------------------
// Pauli words

Mat4d pauli_matrix(PauliWord w) {
    using M2 = Eigen::Matrix2cd;
    M2 i2 = M2::Identity();
    M2 x, y, z;
    x << 0, 1, 1, 0;
    y << 0, complexd(0, -1), complexd(0, 1), 0;
    z << 1, 0, 0, -1;
    auto kron = [](const M2& a, const M2& b) {
        Eigen::Matrix4cd out;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        return out;
    };
    Eigen::Matrix4cd m;
    switch (w) {
        case PauliWord::II: m = kron(i2, i2); break;
        case PauliWord::IX: m = kron(i2, x); break;
        case PauliWord::IZ: m = kron(i2, z); break;
        case PauliWord::XI: m = kron(x, i2); break;
        case PauliWord::XX: m = kron(x, x); break;
        case PauliWord::XZ: m = kron(x, z); break;
        case PauliWord::ZI: m = kron(z, i2); break;
        case PauliWord::ZX: m = kron(z, x); break;
        case PauliWord::ZZ: m = kron(z, z); break;
        case PauliWord::YY: m = kron(y, y); break;
    }
    return m.real();
}

double PauliTerm::coeff_at(double c) const {
    double acc = 0.0, cp = 1.0;
    for (double a : coeff_poly) { acc += a * cp; cp *= c; }
    return acc;
}

namespace {
const std::array<PauliWord, kNumRealWords>& all_words() {
    static const std::array<PauliWord, kNumRealWords> w = {
        PauliWord::II, PauliWord::IX, PauliWord::IZ, PauliWord::XI, PauliWord::XX,
        PauliWord::XZ, PauliWord::ZI, PauliWord::ZX, PauliWord::ZZ, PauliWord::YY};
    return w;
}
}  // namespace

std::vector<PauliTerm> pauli_decompose(const Mat4d& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("pauli_decompose expects a real symmetric matrix");
    std::vector<PauliTerm> terms;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    for (PauliWord w : all_words()) {
        const double coeff = (pauli_matrix(w) * m).trace() / 4.0;
        if (std::abs(coeff) < 1e-14 * scale) continue;
        PauliTerm t;
        t.word = w;
        t.coeff_poly[0] = coeff;
        terms.push_back(t);
    }
    return terms;
}

Mat4d pauli_reconstruct(const std::vector<PauliTerm>& terms, double c) {
    Mat4d m = Mat4d::Zero();
    for (const auto& t : terms) m += t.coeff_at(c) * pauli_matrix(t.word);
    return m;
}

int measurement_group(PauliWord w) {
    switch (w) {
        case PauliWord::II:
        case PauliWord::ZI:
        case PauliWord::IZ:
        case PauliWord::ZZ: return 0;
        case PauliWord::XI:
        case PauliWord::XZ: return 1;
        case PauliWord::IX:
        case PauliWord::ZX: return 2;
        case PauliWord::XX: return 3;
        case PauliWord::YY: return 4;
    }
    throw std::logic_error("unknown word");
}

std::vector<qubit::Gate> basis_change(int group) {
    using qubit::Gate;
    switch (group) {
        case 0: return {};
        case 1: return {Gate::one_qubit(0, qubit::hadamard2())};
        case 2: return {Gate::one_qubit(1, qubit::hadamard2())};
        case 3:
            return {Gate::one_qubit(0, qubit::hadamard2()),
                    Gate::one_qubit(1, qubit::hadamard2())};
        case 4:
            return {Gate::one_qubit(0, qubit::sdg()), Gate::one_qubit(0, qubit::hadamard2()),
                    Gate::one_qubit(1, qubit::sdg()), Gate::one_qubit(1, qubit::hadamard2())};
    }
    throw std::invalid_argument("measurement group out of range");
}

double diag_weight(PauliWord w, int outcome) {
    const double z0 = ((outcome >> 1) & 1) ? -1.0 : 1.0;
    const double z1 = (outcome & 1) ? -1.0 : 1.0;
    switch (w) {
        case PauliWord::II: return 1.0;
        case PauliWord::ZI:
        case PauliWord::XI: return z0;
        case PauliWord::IZ:
        case PauliWord::IX: return z1;
        case PauliWord::ZZ:
        case PauliWord::XZ:
        case PauliWord::ZX:
        case PauliWord::XX:
        case PauliWord::YY: return z0 * z1;
    }
    throw std::logic_error("unknown word");
}

Mat4d gradient_operator(const Mat4d& a, const ParityEncoding& enc) {
    const Mat4d k = truncated_operator(SymbolicOp::SqueezeGenerator, enc);
    return a * k - k * a;
}

// ---------------------------------------------------------------------------
// displaced Hamiltonian

namespace {

void add_terms(std::vector<PauliTerm>& dst, const Mat4d& m, int power, double weight) {
    for (const auto& t : pauli_decompose(Mat4d(weight * m))) {
        bool merged = false;
        for (auto& existing : dst) {
            if (existing.word == t.word) {
                existing.coeff_poly[power] += t.coeff_poly[0];
                merged = true;
                break;
            }
        }
        if (!merged) {
            PauliTerm nt;
            nt.word = t.word;
            nt.coeff_poly[power] = t.coeff_poly[0];
            dst.push_back(nt);
        }
    }
}

}  // namespace

std::vector<DisplacedBlockTerms> displace_hamiltonian(const gep::LatticeSpec& spec,
                                                      double /*phi_c*/) {
    spec.validate();
    const auto enc_s = ParityEncoding::single_mode();
    const auto enc_p = ParityEncoding::pair_collective();
    const Mat4d q2 = truncated_operator(SymbolicOp::Q2, enc_s);
    const Mat4d q4 = truncated_operator(SymbolicOp::Q4, enc_s);
    const Mat4d p2 = truncated_operator(SymbolicOp::P2, enc_s);
    const Mat4d id = Mat4d::Identity();

    std::vector<DisplacedBlockTerms> blocks;
    {
        // zero mode: q -> q + c. Odd powers of q vanish on the encoding, so the
        // surviving polynomial coefficients carry even powers of c only.
        DisplacedBlockTerms b;
        b.k = 0;
        add_terms(b.q2, q2, 0, 1.0);
        add_terms(b.q2, id, 2, 1.0);
        add_terms(b.q4, q4, 0, 1.0);
        add_terms(b.q4, q2, 2, 6.0);
        add_terms(b.q4, id, 4, 1.0);
        add_terms(b.p2, p2, 0, 1.0);
        blocks.push_back(std::move(b));
    }
    for (int k = 1; k < spec.sites / 2; ++k) {
        DisplacedBlockTerms b;
        b.is_pair = true;
        b.k = k;
        add_terms(b.qp2, truncated_operator(SymbolicOp::QPlus2, enc_p), 0, 1.0);
        add_terms(b.pm2, truncated_operator(SymbolicOp::PMinus2, enc_p), 0, 1.0);
        add_terms(b.qm2, truncated_operator(SymbolicOp::QMinus2, enc_p), 0, 1.0);
        add_terms(b.pp2, truncated_operator(SymbolicOp::PPlus2, enc_p), 0, 1.0);
        add_terms(b.qp4, truncated_operator(SymbolicOp::QPlus4, enc_p), 0, 1.0);
        add_terms(b.pm4, truncated_operator(SymbolicOp::PMinus4, enc_p), 0, 1.0);
        add_terms(b.cross, truncated_operator(SymbolicOp::CrossQ2P2, enc_p), 0, 1.0);
        blocks.push_back(std::move(b));
    }
    {
        DisplacedBlockTerms b;
        b.k = spec.sites / 2;
        add_terms(b.q2, q2, 0, 1.0);
        add_terms(b.q4, q4, 0, 1.0);
        add_terms(b.p2, p2, 0, 1.0);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

bool DvParams::is_squeezed(int k) const {
    return std::find(squeezed_modes.begin(), squeezed_modes.end(), k) !=
           squeezed_modes.end();
}

// ---------------------------------------------------------------------------
// measurement pipeline

namespace {

struct WordEst {
    std::array<ham::Est, kNumRealWords> by_word{};
};

int word_index(PauliWord w) { return static_cast<int>(w); }

// expectations of all ten words from the five measurement circuits of one
// encoded block state
WordEst measure_block_words(const Vec4d& amplitudes, const DvOptions& opt, int fold_pairs,
                            std::uint64_t seed) {
    const SchmidtParams sp = schmidt_from_amplitudes(amplitudes);
    WordEst out;
    const bool mitigate = opt.mitigation != Mitigation::None;
    const Eigen::Matrix4d cal = qubit::calibration_matrix(opt.noise);
    for (int g = 0; g < 5; ++g) {
        qubit::TwoQubitCircuit circ = qubit::schmidt_circuit(sp.theta, sp.u, sp.v);
        for (const auto& gate : basis_change(g)) circ.gates.push_back(gate);
        circ = qubit::fold_cnots(circ, fold_pairs);

        std::vector<Eigen::Vector4d> batch_probs;
        if (opt.shots <= 0) {
            const auto rr = qubit::run(circ, opt.noise, 0, 0);
            batch_probs.push_back(rr.probs);
        } else {
            const long nb = std::clamp<long>(opt.shots / 64, 4, 32);
            const long per = opt.shots / nb;
            for (long b = 0; b < nb; ++b) {
                const auto rr =
                    qubit::run(circ, opt.noise, per, split_seed(seed, 100 * g + b));
                Eigen::Vector4d freqs;
                for (int i = 0; i < 4; ++i)
                    freqs(i) = static_cast<double>(rr.counts.counts[i]) / per;
                batch_probs.push_back(freqs);
            }
        }
        if (mitigate)
            for (auto& pvec : batch_probs)
                pvec = qubit::mitigate_readout(pvec, cal).quasi;

        for (PauliWord w : all_words()) {
            if (measurement_group(w) != g) continue;
            std::vector<double> vals;
            vals.reserve(batch_probs.size());
            for (const auto& pvec : batch_probs) {
                double e = 0.0;
                for (int j = 0; j < 4; ++j) e += diag_weight(w, j) * pvec(j);
                vals.push_back(e);
            }
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= vals.size();
            double var = 0.0;
            if (vals.size() > 1) {
                for (double v : vals) var += (v - mean) * (v - mean);
                var = var / (vals.size() - 1) / vals.size();
            }
            out.by_word[word_index(w)] = {mean, std::sqrt(var)};
        }
    }
    return out;
}

ham::Est observable_from_words(const std::vector<PauliTerm>& terms, const WordEst& words,
                               double c) {
    ham::Est e;
    double var = 0.0;
    for (const auto& t : terms) {
        const double coeff = t.coeff_at(c);
        const auto& w = words.by_word[word_index(t.word)];
        e.value += coeff * w.value;
        var += coeff * coeff * w.sigma * w.sigma;
    }
    e.sigma = std::sqrt(var);
    return e;
}

double observable_on_state(const std::vector<PauliTerm>& terms, const Vec4d& psi, double c) {
    return psi.dot(pauli_reconstruct(terms, c) * psi);
}

struct FoldEvaluation {
    double value = 0.0;
    double sigma = 0.0;
};

FoldEvaluation evaluate_fold(const DvParams& params, const gep::LatticeSpec& spec,
                             const std::vector<DisplacedBlockTerms>& blocks,
                             const DvOptions& opt, int fold_pairs, std::uint64_t seed) {
    const ham::EnergyModel model(spec);
    const auto r = squeeze_ratio_profile(params.omega_prime, spec);
    const double c = std::sqrt(static_cast<double>(spec.sites) * spec.mass) * params.phi_c;
    const auto enc_s = ParityEncoding::single_mode();
    const auto enc_p = ParityEncoding::pair_collective();

    ham::SingleMoments zero, half;
    std::vector<ham::PairBlockMoments> pairs(model.pair_count());

    auto eval_single = [&](const DisplacedBlockTerms& terms, int k, double cc,
                           std::uint64_t s) -> ham::SingleMoments {
        ham::SingleMoments m;
        if (!params.is_squeezed(k)) {
            const Vec4d e0 = Vec4d::Unit(0);
            m.q2 = {observable_on_state(terms.q2, e0, cc), 0.0};
            m.q4 = {observable_on_state(terms.q4, e0, cc), 0.0};
            m.p2 = {observable_on_state(terms.p2, e0, cc), 0.0};
            return m;
        }
        const Vec4d psi = encoded_squeezed_state(enc_s, r[k]);
        const WordEst words = measure_block_words(psi, opt, fold_pairs, s);
        m.q2 = observable_from_words(terms.q2, words, cc);
        m.q4 = observable_from_words(terms.q4, words, cc);
        m.p2 = observable_from_words(terms.p2, words, cc);
        return m;
    };

    zero = eval_single(blocks.front(), 0, c, split_seed(seed, 1));
    for (int i = 0; i < model.pair_count(); ++i) {
        const int k = model.pair_k(i);
        const DisplacedBlockTerms& terms = blocks[1 + i];
        ham::PairBlockMoments& m = pairs[i];
        if (!params.is_squeezed(k)) {
            const Vec4d e0 = Vec4d::Unit(0);
            m.qp2 = {observable_on_state(terms.qp2, e0, 0.0), 0.0};
            m.pm2 = {observable_on_state(terms.pm2, e0, 0.0), 0.0};
            m.qm2 = {observable_on_state(terms.qm2, e0, 0.0), 0.0};
            m.pp2 = {observable_on_state(terms.pp2, e0, 0.0), 0.0};
            m.qp4 = {observable_on_state(terms.qp4, e0, 0.0), 0.0};
            m.pm4 = {observable_on_state(terms.pm4, e0, 0.0), 0.0};
            m.cross = {observable_on_state(terms.cross, e0, 0.0), 0.0};
            continue;
        }
        const Vec4d psi = encoded_squeezed_state(enc_p, r[k]);
        const WordEst words = measure_block_words(psi, opt, fold_pairs, split_seed(seed, 2 + i));
        m.qp2 = observable_from_words(terms.qp2, words, 0.0);
        m.pm2 = observable_from_words(terms.pm2, words, 0.0);
        m.qm2 = observable_from_words(terms.qm2, words, 0.0);
        m.pp2 = observable_from_words(terms.pp2, words, 0.0);
        m.qp4 = observable_from_words(terms.qp4, words, 0.0);
        m.pm4 = observable_from_words(terms.pm4, words, 0.0);
        m.cross = observable_from_words(terms.cross, words, 0.0);
    }
    half = eval_single(blocks.back(), spec.sites / 2, 0.0, split_seed(seed, 999));

    FoldEvaluation out;
    out.value = model.value(zero, half, pairs);
    out.sigma = std::sqrt(model.variance(zero, half, pairs));
    return out;
}

}  // namespace

DvEnergyResult dv_energy(const DvParams& params, const gep::LatticeSpec& spec,
                         const DvOptions& opt) {
    spec.validate();
    if (!(params.omega_prime > 0.0))
        throw std::invalid_argument("Omega' must be positive");
    const auto blocks = displace_hamiltonian(spec, params.phi_c);
    const double ref = spec.sites * gep::gep_value(0.0, spec.mass, spec);

    DvEnergyResult out;
    const bool zne = opt.mitigation == Mitigation::RO_ZNE;
    const std::vector<int> folds = zne ? opt.fold_levels : std::vector<int>{0};
    for (int f : folds) {
        const auto ev =
            evaluate_fold(params, spec, blocks, opt, f, split_seed(opt.seed, 40 + f));
        qubit::ZnePoint p;
        p.cnot_count = 1.0 + 2.0 * f;
        p.value = ev.value - ref;
        p.sigma = ev.sigma;
        out.zne_series.push_back(p);
    }
    out.delta_h_ne = out.zne_series.front().value;
    out.sigma_ne = out.zne_series.front().sigma;
    if (zne) {
        out.delta_h = qubit::zne_fit(out.zne_series, opt.zne_order);
        // intercept variance of the weighted fit
        const int n = static_cast<int>(out.zne_series.size());
        Eigen::MatrixXd a(n, opt.zne_order + 1);
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; ++i) {
            double xp = 1.0;
            for (int j = 0; j <= opt.zne_order; ++j) { a(i, j) = xp; xp *= out.zne_series[i].cnot_count; }
            const double s = std::max(out.zne_series[i].sigma, 1e-30);
            w(i) = 1.0 / (s * s);
        }
        const Eigen::MatrixXd cov = (a.transpose() * w.asDiagonal() * a).inverse();
        out.sigma = opt.shots > 0 ? std::sqrt(std::max(0.0, cov(0, 0))) : 0.0;
    } else {
        out.delta_h = out.delta_h_ne;
        out.sigma = out.sigma_ne;
    }
    out.energy = out.delta_h + ref;
    return out;
}

DvGradient dv_gradient(const DvParams& params, const gep::LatticeSpec& spec,
                       const DvOptions& opt) {
    spec.validate();
    const auto blocks = displace_hamiltonian(spec, params.phi_c);
    const ham::EnergyModel model(spec);
    const auto r = squeeze_ratio_profile(params.omega_prime, spec);
    const double c = std::sqrt(static_cast<double>(spec.sites) * spec.mass) * params.phi_c;
    const auto enc_s = ParityEncoding::single_mode();
    const auto enc_p = ParityEncoding::pair_collective();
    const auto wp = gep::dispersion(params.omega_prime, spec.sites);

    // base moments (and word tables for squeezed blocks) from one pass
    ham::SingleMoments zero, half;
    std::vector<ham::PairBlockMoments> pairs(model.pair_count());
    std::map<int, WordEst> word_tables;

    auto eval_single = [&](const DisplacedBlockTerms& terms, int k, double cc,
                           std::uint64_t s) -> ham::SingleMoments {
        ham::SingleMoments m;
        if (!params.is_squeezed(k)) {
            const Vec4d e0 = Vec4d::Unit(0);
            m.q2 = {observable_on_state(terms.q2, e0, cc), 0.0};
            m.q4 = {observable_on_state(terms.q4, e0, cc), 0.0};
            m.p2 = {observable_on_state(terms.p2, e0, cc), 0.0};
            return m;
        }
        const Vec4d psi = encoded_squeezed_state(enc_s, r[k]);
        const WordEst words = measure_block_words(psi, opt, 0, s);
        word_tables[k] = words;
        m.q2 = observable_from_words(terms.q2, words, cc);
        m.q4 = observable_from_words(terms.q4, words, cc);
        m.p2 = observable_from_words(terms.p2, words, cc);
        return m;
    };
    zero = eval_single(blocks.front(), 0, c, split_seed(opt.seed, 71));
    for (int i = 0; i < model.pair_count(); ++i) {
        const int k = model.pair_k(i);
        const DisplacedBlockTerms& terms = blocks[1 + i];
        ham::PairBlockMoments& m = pairs[i];
        if (!params.is_squeezed(k)) {
            const Vec4d e0 = Vec4d::Unit(0);
            m.qp2 = {observable_on_state(terms.qp2, e0, 0.0), 0.0};
            m.pm2 = {observable_on_state(terms.pm2, e0, 0.0), 0.0};
            m.qm2 = {observable_on_state(terms.qm2, e0, 0.0), 0.0};
            m.pp2 = {observable_on_state(terms.pp2, e0, 0.0), 0.0};
            m.qp4 = {observable_on_state(terms.qp4, e0, 0.0), 0.0};
            m.pm4 = {observable_on_state(terms.pm4, e0, 0.0), 0.0};
            m.cross = {observable_on_state(terms.cross, e0, 0.0), 0.0};
            continue;
        }
        const Vec4d psi = encoded_squeezed_state(enc_p, r[k]);
        const WordEst words = measure_block_words(psi, opt, 0, split_seed(opt.seed, 72 + i));
        word_tables[k] = words;
        m.qp2 = observable_from_words(terms.qp2, words, 0.0);
        m.pm2 = observable_from_words(terms.pm2, words, 0.0);
        m.qm2 = observable_from_words(terms.qm2, words, 0.0);
        m.pp2 = observable_from_words(terms.pp2, words, 0.0);
        m.qp4 = observable_from_words(terms.qp4, words, 0.0);
        m.pm4 = observable_from_words(terms.pm4, words, 0.0);
        m.cross = observable_from_words(terms.cross, words, 0.0);
    }
    half = eval_single(blocks.back(), spec.sites / 2, 0.0, split_seed(opt.seed, 73));

    DvGradient g;
    // d E / d r(k): commutator observables evaluated from the same counts
    auto grad_obs = [&](const std::vector<PauliTerm>& terms, const ParityEncoding& enc,
                        const WordEst& words, double cc) {
        const Mat4d a = pauli_reconstruct(terms, cc);
        const Mat4d go = gradient_operator(a, enc);
        double v = 0.0;
        for (const auto& t : pauli_decompose(go))
            v += t.coeff_poly[0] * words.by_word[word_index(t.word)].value;
        return v;
    };
    for (int k : params.squeezed_modes) {
        double de_dr = 0.0;
        if (k == 0 || k == spec.sites / 2) {
            const auto& terms = (k == 0) ? blocks.front() : blocks.back();
            const double cc = (k == 0) ? c : 0.0;
            const auto part = (k == 0) ? model.zero_partials(zero, half, pairs)
                                       : model.half_partials(zero, half, pairs);
            const WordEst& words = word_tables.at(k);
            de_dr += part.q2 * grad_obs(terms.q2, enc_s, words, cc);
            de_dr += part.q4 * grad_obs(terms.q4, enc_s, words, cc);
            de_dr += part.p2 * grad_obs(terms.p2, enc_s, words, cc);
        } else {
            int pi = -1;
            for (int i = 0; i < model.pair_count(); ++i)
                if (model.pair_k(i) == k) pi = i;
            const auto part = model.pair_partials(pi, zero, half, pairs);
            const auto& terms = blocks[1 + pi];
            const WordEst& words = word_tables.at(k);
            de_dr += part.qp2 * grad_obs(terms.qp2, enc_p, words, 0.0);
            de_dr += part.pm2 * grad_obs(terms.pm2, enc_p, words, 0.0);
            de_dr += part.qm2 * grad_obs(terms.qm2, enc_p, words, 0.0);
            de_dr += part.pp2 * grad_obs(terms.pp2, enc_p, words, 0.0);
            de_dr += part.qp4 * grad_obs(terms.qp4, enc_p, words, 0.0);
            de_dr += part.pm4 * grad_obs(terms.pm4, enc_p, words, 0.0);
            de_dr += part.cross * grad_obs(terms.cross, enc_p, words, 0.0);
        }
        g.d_omega_prime += de_dr * (-params.omega_prime / (2.0 * wp[k] * wp[k]));
    }

    // d E / d phi_c: the displacement lives in the coefficient polynomials
    {
        const auto part = model.zero_partials(zero, half, pairs);
        const double q2_undisp = zero.q2.value - c * c;
        const double dq2_dc = 2.0 * c;
        const double dq4_dc = 12.0 * c * q2_undisp + 4.0 * c * c * c;
        g.d_phi_c = (part.q2 * dq2_dc + part.q4 * dq4_dc) *
                    std::sqrt(static_cast<double>(spec.sites) * spec.mass);
    }
    return g;
}

DvMinimizeResult dv_minimize(const DvParams& init, const gep::LatticeSpec& spec,
                             const DvOptions& opt, const DvMinimizeOptions& mopt) {
    if (mopt.method == DvMinimizeOptions::Method::Simplex) {
        DvMinimizeResult res;
        DvOptions so = opt;
        so.shots = 0;  // simplex is the deterministic, noiseless-path optimizer
        so.mitigation = Mitigation::None;
        auto f = [&](const std::vector<double>& u) {
            if (u[0] <= 1e-3) return 1e100;
            DvParams p = init;
            p.omega_prime = u[0] * spec.mass;
            p.phi_c = u[1];
            const double e = dv_energy(p, spec, so).delta_h;
            res.trajectory.push_back(e);
            return e;
        };
        NelderMeadOptions nm;
        nm.max_iters = mopt.max_iters * 4;
        nm.x_tol = 1e-10;
        nm.f_tol = 1e-14;
        const auto r = nelder_mead(f, {init.omega_prime / spec.mass, init.phi_c}, nm);
        res.params = init;
        res.params.omega_prime = r.x[0] * spec.mass;
        res.params.phi_c = r.x[1];
        res.delta_h = r.f;
        res.iterations = r.evaluations;
        res.converged = r.converged;
        return res;
    }
    DvOptions gd_opt = opt;
    gd_opt.shots = opt.shots > 0 ? mopt.grad_shots : 0;
    if (gd_opt.mitigation == Mitigation::RO_ZNE) gd_opt.mitigation = Mitigation::RO;

    DvMinimizeResult res;
    DvParams cur = init;
    double lr = mopt.learning_rate;
    auto eval = [&](const DvParams& p, std::uint64_t stream) {
        DvOptions o = gd_opt;
        o.seed = split_seed(opt.seed, stream);
        return dv_energy(p, spec, o).delta_h;
    };
    double e_cur = eval(cur, 1);
    res.trajectory.push_back(e_cur);
    int it = 0;
    for (; it < mopt.max_iters && lr >= mopt.min_learning_rate; ++it) {
        DvOptions go = gd_opt;
        go.seed = split_seed(opt.seed, 1000 + it);
        const DvGradient g = dv_gradient(cur, spec, go);
        DvParams next = cur;
        next.omega_prime = std::max(1e-3 * spec.mass,
                                    cur.omega_prime - lr * spec.mass * spec.mass * g.d_omega_prime);
        next.phi_c = cur.phi_c - lr * g.d_phi_c;
        const double e_next = eval(next, 2000 + it);
        if (e_next < e_cur) {
            cur = next;
            e_cur = e_next;
        } else {
            lr *= 0.5;
        }
        res.trajectory.push_back(e_cur);
    }
    res.params = cur;
    res.delta_h = e_cur;
    res.iterations = it;
    res.converged = lr < mopt.min_learning_rate;
    return res;
}

}  // namespace phi4::dv
