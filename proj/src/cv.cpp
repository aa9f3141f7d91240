#include "phi4/cv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "phi4/numerics.hpp"

namespace phi4::cv {

using fock::Mat;
using fock::MatR;
using fock::QumodeBlockState;
using ham::PairBlockMoments;
using ham::SingleMoments;

namespace {

// ---------------------------------------------------------------------------
// config plumbing

double displacement_shift(const gep::LatticeSpec& spec, double phi_c) {
    return std::sqrt(static_cast<double>(spec.sites) * spec.mass) * phi_c;
}

}  // namespace

bool AnsatzConfig::is_squeezed(int k) const {
    return std::find(squeezed_modes.begin(), squeezed_modes.end(), k) !=
           squeezed_modes.end();
}

void AnsatzConfig::validate(const gep::LatticeSpec& spec) const {
    spec.validate();
    if (!(omega_prime > 0.0)) throw std::invalid_argument("Omega' must be positive");
    if (cutoff < 2) throw std::invalid_argument("cutoff must be >= 2");
    for (int k : squeezed_modes)
        if (k < 0 || k > spec.sites / 2)
            throw std::invalid_argument("squeezed mode index outside [0, L/2]");
    if (backend.kind == Backend::Kind::Sampled && backend.shots <= 0)
        throw std::invalid_argument("sampled backend requires a positive shot count");
}

std::vector<int> AnsatzConfig::default_squeezed_modes(int sites) {
    std::vector<int> out;
    if (sites <= 10) {
        out = {0};
    } else if (sites < 76) {
        for (int k = 0; k <= std::min(3, sites / 2); ++k) out.push_back(k);
    } else {
        for (int k = 0; k <= sites / 2; ++k) out.push_back(k);
    }
    return out;
}

std::vector<double> squeeze_profile(double omega_prime, double mass, int sites) {
    if (!(omega_prime > 0.0) || !(mass > 0.0))
        throw std::invalid_argument("masses must be positive");
    const auto wm = gep::dispersion(mass, sites);
    const auto wp = gep::dispersion(omega_prime, sites);
    std::vector<double> r(sites / 2 + 1);
    for (int k = 0; k <= sites / 2; ++k) r[k] = 0.5 * std::log(wm[k] / wp[k]);
    return r;
}

// ---------------------------------------------------------------------------
// state preparation

namespace {

QumodeBlockState make_single_block(fock::BlockKind kind, int k, int cutoff, double r,
                                   double q_shift) {
    QumodeBlockState s = fock::vacuum_block(kind, k, cutoff, 1);
    if (r != 0.0)
        fock::apply(s, fock::gate_matrix(fock::GateDescriptor::squeeze(r), cutoff), 0, 1);
    if (q_shift != 0.0) {
        const fock::complexd alpha(q_shift / std::sqrt(2.0), 0.0);
        fock::apply(s, fock::gate_matrix(fock::GateDescriptor::displace(alpha), cutoff), 0, 1);
    }
    return s;
}

QumodeBlockState make_pair_block(int k, int cutoff, double r,
                                 AnsatzConfig::PairCircuit form) {
    QumodeBlockState s = fock::vacuum_block(fock::BlockKind::Pair, k, cutoff, 2);
    if (r == 0.0) return s;
    if (form == AnsatzConfig::PairCircuit::SingleSqueezes) {
        const Mat sp = fock::gate_matrix(fock::GateDescriptor::squeeze(r), cutoff);
        const Mat sm = fock::gate_matrix(fock::GateDescriptor::squeeze(-r), cutoff);
        fock::apply(s, sp, 0, 1);
        fock::apply(s, sm, 1, 1);
        return s;
    }
    // two-mode squeeze: the truncated generator preserves the |jj> sector, so
    // the action on |00> is the sector expm scattered back into the grid
    const Eigen::VectorXd diag = fock::two_mode_squeezed_vacuum_diagonal(cutoff, r);
    s.amp.setZero();
    for (int j = 0; j < cutoff; ++j) s.amp(static_cast<long>(j) * cutoff + j) = diag(j);
    const double top = std::norm(s.amp(static_cast<long>(cutoff) * cutoff - 1));
    s.leakage = std::max(s.leakage, top);
    if (s.leakage > 1e-3) s.leakage_warn = true;
    return s;
}

}  // namespace

std::vector<QumodeBlockState> prepare_blocks(const AnsatzConfig& config,
                                             const gep::LatticeSpec& spec) {
    config.validate(spec);
    const int L = spec.sites;
    const int n = config.cutoff;
    const auto r = squeeze_profile(config.omega_prime, spec.mass, L);
    const double c = displacement_shift(spec, config.phi_c);

    std::vector<QumodeBlockState> blocks;
    blocks.push_back(make_single_block(fock::BlockKind::ZeroMode, 0, n,
                                       config.is_squeezed(0) ? r[0] : 0.0, c));
    for (int k = 1; k < L / 2; ++k)
        blocks.push_back(make_pair_block(k, n, config.is_squeezed(k) ? r[k] : 0.0,
                                         config.pair_circuit));
    blocks.push_back(make_single_block(fock::BlockKind::HalfMode, L / 2, n,
                                       config.is_squeezed(L / 2) ? r[L / 2] : 0.0, 0.0));
    return blocks;
}

// ---------------------------------------------------------------------------
// exact (statevector) moments

namespace {

void apply_mode_op(const QumodeBlockState& ref, fock::Vec& v, const Mat& op, int factor) {
    QumodeBlockState tmp = ref;
    tmp.amp = v;
    const double keep = tmp.leakage;
    fock::apply(tmp, op, factor, 1);
    tmp.leakage = keep;
    v = tmp.amp;
}

SingleMoments exact_single_moments(const QumodeBlockState& block) {
    const int n = block.cutoff;
    const Mat q = fock::position(n).cast<fock::complexd>();
    const Mat p = fock::momentum(n);
    fock::Vec q1 = block.amp;
    apply_mode_op(block, q1, q, 0);
    fock::Vec q2v = q1;
    apply_mode_op(block, q2v, q, 0);
    fock::Vec p1 = block.amp;
    apply_mode_op(block, p1, p, 0);
    const double nrm = block.norm_sq();
    SingleMoments m;
    m.q2 = {q1.squaredNorm() / nrm, 0.0};
    m.q4 = {q2v.squaredNorm() / nrm, 0.0};
    m.p2 = {p1.squaredNorm() / nrm, 0.0};
    return m;
}

PairBlockMoments exact_pair_moments(const QumodeBlockState& block) {
    const int n = block.cutoff;
    const Mat q = fock::position(n).cast<fock::complexd>();
    const Mat p = fock::momentum(n);
    const Mat nop = fock::number_op(n).cast<fock::complexd>();
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    const double nrm = block.norm_sq();

    auto combo = [&](const fock::Vec& v, const Mat& op, int factor, double sign,
                     fock::Vec& out) {
        fock::Vec a = v, b = v;
        apply_mode_op(block, a, op, 0);
        apply_mode_op(block, b, op, 1);
        (void)factor;
        out = inv_rt2 * (a + sign * b);
    };

    fock::Vec qp1, qm1, pp1, pm1;
    combo(block.amp, q, 0, +1.0, qp1);   // q+
    combo(block.amp, q, 0, -1.0, qm1);   // q-
    combo(block.amp, p, 0, +1.0, pp1);   // p+
    combo(block.amp, p, 0, -1.0, pm1);   // p-
    fock::Vec qp2v, pm2v;
    combo(qp1, q, 0, +1.0, qp2v);        // q+^2 |psi>
    combo(pm1, p, 0, -1.0, pm2v);        // p-^2 |psi>

    PairBlockMoments m;
    m.qp2 = {qp1.squaredNorm() / nrm, 0.0};
    m.qm2 = {qm1.squaredNorm() / nrm, 0.0};
    m.pp2 = {pp1.squaredNorm() / nrm, 0.0};
    m.pm2 = {pm1.squaredNorm() / nrm, 0.0};
    m.qp4 = {qp2v.squaredNorm() / nrm, 0.0};
    m.pm4 = {pm2v.squaredNorm() / nrm, 0.0};
    m.cross = {qp2v.dot(pm2v).real() / nrm, 0.0};
    fock::Vec na = block.amp, nb = block.amp;
    apply_mode_op(block, na, nop, 0);
    apply_mode_op(block, nb, nop, 1);
    m.n_tot = {(block.amp.dot(na) + block.amp.dot(nb)).real() / nrm, 0.0};
    return m;
}

// ---------------------------------------------------------------------------
// CX-ancilla measurement circuits
//
// The CX used for the moment extraction has the *second* tensor factor as the
// receiver: exp(-i Gamma p_recv ⊗ q_src) with src = factor 0, recv = factor 1.
// For single blocks the receiver is a fresh vacuum ancilla, for pairs the
// partner mode (they act as one another's ancilla).

const Mat& cx_second_receiver(int n, double gamma) {
    static std::map<std::pair<int, long long>, std::unique_ptr<Mat>> cache;
    static std::mutex mutex;
    long long key_bits;
    static_assert(sizeof(double) == sizeof(long long));
    std::memcpy(&key_bits, &gamma, sizeof(double));
    const auto key = std::make_pair(n, key_bits);
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    const MatR a = fock::annihilation(n);
    const MatR recv = MatR(a.transpose() - a) / std::sqrt(2.0);  // -i p
    MatR gen(n * n, n * n);
    const MatR qsrc = fock::position(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            gen.block(i * n, j * n, n, n) = gamma * qsrc(i, j) * recv;
    auto mat = std::make_unique<Mat>(MatR(gen.exp()).cast<fock::complexd>());
    return *cache.emplace(key, std::move(mat)).first->second;
}

struct FeatureEst {
    Est est;
    std::vector<double> batch_means;  // empty on the exact backend
};

// diagonal features of the joint occupation distribution after the CX
struct SettingFeatures {
    FeatureEst f_recv, f_recv2;        // N_recv, N_recv^2
    FeatureEst f_src, f_src2, f_prod;  // N_src, N_src^2, N_src*N_recv
};

long batch_count_for(long shots) {
    return std::clamp<long>(shots / 64, 4, 32);
}

SettingFeatures measure_setting(const QumodeBlockState& two_mode, const Backend& backend,
                                std::uint64_t seed, bool& leak_flag) {
    const int n = two_mode.cutoff;
    leak_flag = leak_flag || two_mode.leakage_warn;
    const auto probs = fock::number_distribution(two_mode);

    auto feature_value = [&](auto&& f) {
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] == 0.0) continue;
            const long src = static_cast<long>(i) / n;
            const long recv = static_cast<long>(i) % n;
            acc += probs[i] * f(src, recv);
        }
        return acc;
    };

    SettingFeatures out;
    if (backend.is_exact()) {
        out.f_recv.est = {feature_value([](long, long r) { return double(r); }), 0.0};
        out.f_recv2.est = {feature_value([](long, long r) { return double(r) * r; }), 0.0};
        out.f_src.est = {feature_value([](long s, long) { return double(s); }), 0.0};
        out.f_src2.est = {feature_value([](long s, long) { return double(s) * s; }), 0.0};
        out.f_prod.est = {feature_value([](long s, long r) { return double(s) * r; }), 0.0};
        return out;
    }

    const long nb = batch_count_for(backend.shots);
    const long per = backend.shots / nb;
    std::vector<FeatureEst*> fs = {&out.f_recv, &out.f_recv2, &out.f_src, &out.f_src2,
                                   &out.f_prod};
    for (auto* f : fs) f->batch_means.reserve(nb);
    for (long b = 0; b < nb; ++b) {
        const auto counts = fock::sample(probs, per, split_seed(seed, b));
        double recv_m = 0, recv2_m = 0, src_m = 0, src2_m = 0, prod_m = 0;
        for (const auto& [idx, cnt] : counts.counts) {
            const long src = idx / n, recv = idx % n;
            const double w = static_cast<double>(cnt) / per;
            recv_m += w * recv;
            recv2_m += w * recv * recv;
            src_m += w * src;
            src2_m += w * src * src;
            prod_m += w * src * recv;
        }
        out.f_recv.batch_means.push_back(recv_m);
        out.f_recv2.batch_means.push_back(recv2_m);
        out.f_src.batch_means.push_back(src_m);
        out.f_src2.batch_means.push_back(src2_m);
        out.f_prod.batch_means.push_back(prod_m);
    }
    for (auto* f : fs) {
        double mean = 0.0;
        for (double v : f->batch_means) mean += v;
        mean /= nb;
        double var = 0.0;
        for (double v : f->batch_means) var += (v - mean) * (v - mean);
        var = nb > 1 ? var / (nb - 1) / nb : 0.0;
        f->est = {mean, std::sqrt(var)};
    }
    return out;
}

constexpr int kGammaCount = 5;  // order: {0, +s, -s, +2s, -2s}

std::array<double, kGammaCount> gamma_values(double s) {
    return {0.0, s, -s, 2.0 * s, -2.0 * s};
}

std::array<SettingFeatures, kGammaCount> measure_block_settings(
    const QumodeBlockState& block, double s, const Backend& backend, std::uint64_t seed,
    bool& leak_flag, bool attach_ancilla) {
    std::array<SettingFeatures, kGammaCount> out;
    const auto gammas = gamma_values(s);
    for (int g = 0; g < kGammaCount; ++g) {
        QumodeBlockState st = block;
        if (attach_ancilla) fock::attach_vacuum_mode(st);
        if (gammas[g] != 0.0) fock::apply(st, cx_second_receiver(st.cutoff, gammas[g]), 0, 2);
        leak_flag = leak_flag || st.leakage_warn;
        out[g] = measure_setting(st, backend, split_seed(seed, 10 + g), leak_flag);
    }
    return out;
}

Est combo3(const Est& f0, const Est& fp, const Est& fm, double s) {
    Est e;
    e.value = (fp.value + fm.value - 2.0 * f0.value) / (s * s);
    e.sigma = std::sqrt(fp.sigma * fp.sigma + fm.sigma * fm.sigma +
                        4.0 * f0.sigma * f0.sigma) /
              (s * s);
    return e;
}

Est combo5(const Est& f0, const Est& fp, const Est& fm, const Est& fp2, const Est& fm2,
           double s) {
    const double d = 6.0 * s * s * s * s;
    Est e;
    e.value = (fp2.value + fm2.value - 4.0 * (fp.value + fm.value) + 6.0 * f0.value) / d;
    e.sigma = std::sqrt(fp2.sigma * fp2.sigma + fm2.sigma * fm2.sigma +
                        16.0 * (fp.sigma * fp.sigma + fm.sigma * fm.sigma) +
                        36.0 * f0.sigma * f0.sigma) /
              d;
    return e;
}

SingleMoments single_moments_from_settings(const std::array<SettingFeatures, kGammaCount>& f,
                                           double s) {
    SingleMoments m;
    m.q2 = combo3(f[0].f_recv.est, f[1].f_recv.est, f[2].f_recv.est, s);
    m.q4 = combo5(f[0].f_recv2.est, f[1].f_recv2.est, f[2].f_recv2.est, f[3].f_recv2.est,
                  f[4].f_recv2.est, s);
    // p^2 = 2<N> + 1 - q^2 with <N> read off the Gamma = 0 setting
    const Est& n0 = f[0].f_src.est;
    m.p2.value = 2.0 * n0.value + 1.0 - m.q2.value;
    m.p2.sigma = std::sqrt(4.0 * n0.sigma * n0.sigma + m.q2.sigma * m.q2.sigma);
    return m;
}

PairBlockMoments pair_moments_from_settings(const std::array<SettingFeatures, kGammaCount>& f,
                                            double s) {
    PairBlockMoments m;
    m.qp2 = combo3(f[0].f_recv.est, f[1].f_recv.est, f[2].f_recv.est, s);
    m.pm2 = combo3(f[0].f_src.est, f[1].f_src.est, f[2].f_src.est, s);
    m.qp4 = combo5(f[0].f_recv2.est, f[1].f_recv2.est, f[2].f_recv2.est, f[3].f_recv2.est,
                   f[4].f_recv2.est, s);
    m.pm4 = combo5(f[0].f_src2.est, f[1].f_src2.est, f[2].f_src2.est, f[3].f_src2.est,
                   f[4].f_src2.est, s);
    m.cross = combo5(f[0].f_prod.est, f[1].f_prod.est, f[2].f_prod.est, f[3].f_prod.est,
                     f[4].f_prod.est, s);
    const Est& na0 = f[0].f_src.est;   // N(k)
    const Est& nb0 = f[0].f_recv.est;  // N(L-k)
    m.n_tot = {na0.value + nb0.value,
               std::sqrt(na0.sigma * na0.sigma + nb0.sigma * nb0.sigma)};
    m.qm2.value = 2.0 * nb0.value + 1.0 - m.pm2.value;
    m.qm2.sigma = std::sqrt(4.0 * nb0.sigma * nb0.sigma + m.pm2.sigma * m.pm2.sigma);
    m.pp2.value = 2.0 * na0.value + 1.0 - m.qp2.value;
    m.pp2.sigma = std::sqrt(4.0 * na0.sigma * na0.sigma + m.qp2.sigma * m.qp2.sigma);
    return m;
}

}  // namespace

Est moment_q2(const QumodeBlockState& block, double s, const Backend& backend) {
    if (!(s > 0.0)) throw std::invalid_argument("shift s must be positive");
    bool leak = false;
    const auto f = measure_block_settings(block, s, backend, split_seed(backend.seed, 1),
                                          leak, /*attach_ancilla=*/true);
    return single_moments_from_settings(f, s).q2;
}

Est moment_q4(const QumodeBlockState& block, double s, const Backend& backend) {
    if (!(s > 0.0)) throw std::invalid_argument("shift s must be positive");
    bool leak = false;
    const auto f = measure_block_settings(block, s, backend, split_seed(backend.seed, 2),
                                          leak, /*attach_ancilla=*/true);
    return single_moments_from_settings(f, s).q4;
}

PairBlockMoments pair_moments(const QumodeBlockState& block, double s,
                              const Backend& backend) {
    if (block.dims.size() != 2) throw std::invalid_argument("pair block expected");
    if (!(s > 0.0)) throw std::invalid_argument("shift s must be positive");
    bool leak = false;
    const auto f = measure_block_settings(block, s, backend, split_seed(backend.seed, 3),
                                          leak, /*attach_ancilla=*/false);
    return pair_moments_from_settings(f, s);
}

// ---------------------------------------------------------------------------
// energy assembly

namespace {

struct BlockData {
    // measured features (sampled squeezed blocks); empty when fixed
    std::array<SettingFeatures, kGammaCount> settings;
    bool sampled = false;
    bool is_pair = false;
    SingleMoments fixed_single;
    PairBlockMoments fixed_pair;
};

struct EnergyWorkings {
    ham::EnergyModel model;
    double shift_s = 0.0;
    SingleMoments zero, half;
    std::vector<PairBlockMoments> pairs;
    std::vector<BlockData> data;  // zero, pairs..., half
    double reference = 0.0;       // subtracted constant (energy_difference)

    explicit EnergyWorkings(const gep::LatticeSpec& spec) : model(spec) {}
};

SingleMoments displaced_vacuum_single(double c) {
    SingleMoments m = ham::vacuum_single();
    m.q2.value += c * c;
    m.q4.value = c * c * c * c + 6.0 * c * c * 0.5 + 0.75;
    return m;
}

class SampledEnergyResampler final : public EnergyResampler {
  public:
    SampledEnergyResampler(std::shared_ptr<EnergyWorkings> w) : w_(std::move(w)) {}

    double resample(std::uint64_t seed) const override {
        Rng rng(seed);
        auto redraw = [&](const FeatureEst& f) -> Est {
            if (f.batch_means.empty()) return f.est;
            const std::size_t nb = f.batch_means.size();
            double mean = 0.0;
            for (std::size_t i = 0; i < nb; ++i) {
                const std::size_t pick =
                    std::min<std::size_t>(nb - 1, static_cast<std::size_t>(rng.uniform01() * nb));
                mean += f.batch_means[pick];
            }
            return {mean / nb, 0.0};
        };
        SingleMoments zero = w_->zero, half = w_->half;
        std::vector<PairBlockMoments> pairs = w_->pairs;
        const int np = w_->model.pair_count();
        for (int bi = 0; bi < static_cast<int>(w_->data.size()); ++bi) {
            const BlockData& d = w_->data[bi];
            if (!d.sampled) continue;
            std::array<SettingFeatures, kGammaCount> resampled = d.settings;
            for (auto& sf : resampled) {
                sf.f_recv.est = redraw(sf.f_recv);
                sf.f_recv2.est = redraw(sf.f_recv2);
                sf.f_src.est = redraw(sf.f_src);
                sf.f_src2.est = redraw(sf.f_src2);
                sf.f_prod.est = redraw(sf.f_prod);
            }
            if (bi == 0)
                zero = single_moments_from_settings(resampled, w_->shift_s);
            else if (bi <= np)
                pairs[bi - 1] = pair_moments_from_settings(resampled, w_->shift_s);
            else
                half = single_moments_from_settings(resampled, w_->shift_s);
        }
        return w_->model.value(zero, half, pairs) - w_->reference;
    }

  private:
    std::shared_ptr<EnergyWorkings> w_;
};

std::shared_ptr<EnergyWorkings> compute_workings(const AnsatzConfig& config,
                                                 const gep::LatticeSpec& spec,
                                                 bool& leak_flag, long& shots_used) {
    config.validate(spec);
    auto w = std::make_shared<EnergyWorkings>(spec);
    w->shift_s = config.effective_shift();
    const int L = spec.sites;
    const double c = displacement_shift(spec, config.phi_c);
    const auto blocks = prepare_blocks(config, spec);
    const int np = w->model.pair_count();
    w->pairs.resize(np);
    w->data.resize(np + 2);

    auto handle_single = [&](const QumodeBlockState& blk, int data_idx, bool squeezed,
                             bool displaced) -> SingleMoments {
        leak_flag = leak_flag || blk.leakage_warn;
        BlockData& d = w->data[data_idx];
        if (config.backend.is_exact()) {
            d.fixed_single = exact_single_moments(blk);
            return d.fixed_single;
        }
        if (!squeezed) {
            // classical vacuum substitution, as in the production runs
            d.fixed_single = displaced ? displaced_vacuum_single(c) : ham::vacuum_single();
            return d.fixed_single;
        }
        d.sampled = true;
        d.settings = measure_block_settings(blk, w->shift_s, config.backend,
                                            split_seed(config.backend.seed, 100 + data_idx),
                                            leak_flag, true);
        shots_used += kGammaCount * config.backend.shots;
        return single_moments_from_settings(d.settings, w->shift_s);
    };

    w->zero = handle_single(blocks.front(), 0, config.is_squeezed(0),
                            config.phi_c != 0.0);
    for (int i = 0; i < np; ++i) {
        const QumodeBlockState& blk = blocks[1 + i];
        leak_flag = leak_flag || blk.leakage_warn;
        BlockData& d = w->data[1 + i];
        d.is_pair = true;
        const int k = w->model.pair_k(i);
        if (config.backend.is_exact()) {
            d.fixed_pair = exact_pair_moments(blk);
        } else if (!config.is_squeezed(k)) {
            d.fixed_pair = ham::vacuum_pair();
        } else {
            d.sampled = true;
            d.settings = measure_block_settings(blk, w->shift_s, config.backend,
                                                split_seed(config.backend.seed, 100 + 1 + i),
                                                leak_flag, false);
            shots_used += kGammaCount * config.backend.shots;
            w->pairs[i] = pair_moments_from_settings(d.settings, w->shift_s);
            continue;
        }
        w->pairs[i] = d.fixed_pair;
    }
    w->half = handle_single(blocks.back(), np + 1, config.is_squeezed(L / 2), false);
    return w;
}

EnergyEstimate energy_impl(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                           double reference) {
    bool leak = false;
    long shots_used = 0;
    auto w = compute_workings(config, spec, leak, shots_used);
    w->reference = reference;
    EnergyEstimate out;
    out.value = w->model.value(w->zero, w->half, w->pairs) - reference;
    out.sigma = std::sqrt(w->model.variance(w->zero, w->half, w->pairs));
    out.shots_used = shots_used;
    out.leakage_flag = leak;
    if (!config.backend.is_exact())
        out.resampler = std::make_shared<SampledEnergyResampler>(w);
    return out;
}

}  // namespace

EnergyEstimate energy(const AnsatzConfig& config, const gep::LatticeSpec& spec) {
    return energy_impl(config, spec, 0.0);
}

EnergyEstimate energy_difference(const AnsatzConfig& config, const gep::LatticeSpec& spec) {
    const double ref = spec.sites * gep::gep_value(0.0, spec.mass, spec);
    return energy_impl(config, spec, ref);
}

// ---------------------------------------------------------------------------
// gradients

namespace {

struct MomentDerivs {
    // derivative of each block moment with respect to r(k)
    SingleMoments dsingle;
    PairBlockMoments dpair;
    bool is_pair = false;
};

Est rule_diff(const Est& plus, const Est& minus, double prefactor) {
    return {prefactor * (plus.value - minus.value),
            std::abs(prefactor) * std::sqrt(plus.sigma * plus.sigma + minus.sigma * minus.sigma)};
}

AnsatzConfig with_overrides(const AnsatzConfig& base, double omega_prime, double phi_c,
                            std::uint64_t seed) {
    AnsatzConfig c = base;
    c.omega_prime = omega_prime;
    c.phi_c = phi_c;
    c.backend.seed = seed;
    return c;
}

// Moments of block k with r(k) shifted by delta (other blocks untouched).
// The zero-mode displacement is rescaled by c_scale per the shift rules.
SingleMoments shifted_single_moments(const AnsatzConfig& config,
                                     const gep::LatticeSpec& spec, int k, double delta,
                                     double c_scale, std::uint64_t seed) {
    const auto r = squeeze_profile(config.omega_prime, spec.mass, spec.sites);
    const double c = displacement_shift(spec, config.phi_c) * c_scale;
    const auto blk = make_single_block(k == 0 ? fock::BlockKind::ZeroMode : fock::BlockKind::HalfMode,
                                       k, config.cutoff, r[k] + delta, k == 0 ? c : 0.0);
    bool leak = false;
    Backend b = config.backend;
    b.seed = seed;
    const auto f = measure_block_settings(blk, config.effective_shift(), b, seed, leak, true);
    return single_moments_from_settings(f, config.effective_shift());
}

PairBlockMoments shifted_pair_moments(const AnsatzConfig& config,
                                      const gep::LatticeSpec& spec, int k, double delta,
                                      std::uint64_t seed) {
    const auto r = squeeze_profile(config.omega_prime, spec.mass, spec.sites);
    const auto blk = make_pair_block(k, config.cutoff, r[k] + delta, config.pair_circuit);
    bool leak = false;
    Backend b = config.backend;
    b.seed = seed;
    const auto f = measure_block_settings(blk, config.effective_shift(), b, seed, leak, false);
    return pair_moments_from_settings(f, config.effective_shift());
}

// parameter-shift derivative of every moment of block k w.r.t. r(k):
// quadratic (photon-number linear) moments use shifts ±t/2 and 1/sinh t,
// quartic ones ±t/4 with the displacement rescaled by sqrt(cosh(t/2)) and
// prefactor 2/sinh t. Both verified against the exact derivative oracle.
MomentDerivs parameter_shift_derivs(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                                    int k, double t, std::uint64_t seed) {
    if (std::abs(std::sinh(t)) < 1e-6)
        throw std::invalid_argument("shift magnitude t is ill-conditioned");
    const double pre_lin = 1.0 / std::sinh(t);
    const double pre_quad = 2.0 / std::sinh(t);
    const double scale_lin = std::cosh(0.5 * t);
    const double scale_quad = std::sqrt(std::cosh(0.5 * t));
    MomentDerivs out;
    const int L = spec.sites;
    if (k == 0 || k == L / 2) {
        const auto mp = shifted_single_moments(config, spec, k, +0.5 * t, scale_lin,
                                               split_seed(seed, 1));
        const auto mm = shifted_single_moments(config, spec, k, -0.5 * t, scale_lin,
                                               split_seed(seed, 2));
        const auto qp = shifted_single_moments(config, spec, k, +0.25 * t, scale_quad,
                                               split_seed(seed, 3));
        const auto qm = shifted_single_moments(config, spec, k, -0.25 * t, scale_quad,
                                               split_seed(seed, 4));
        out.dsingle.q2 = rule_diff(mp.q2, mm.q2, pre_lin);
        out.dsingle.p2 = rule_diff(mp.p2, mm.p2, pre_lin);
        out.dsingle.q4 = rule_diff(qp.q4, qm.q4, pre_quad);
    } else {
        out.is_pair = true;
        const auto mp = shifted_pair_moments(config, spec, k, +0.5 * t, split_seed(seed, 1));
        const auto mm = shifted_pair_moments(config, spec, k, -0.5 * t, split_seed(seed, 2));
        const auto qp = shifted_pair_moments(config, spec, k, +0.25 * t, split_seed(seed, 3));
        const auto qm = shifted_pair_moments(config, spec, k, -0.25 * t, split_seed(seed, 4));
        out.dpair.qp2 = rule_diff(mp.qp2, mm.qp2, pre_lin);
        out.dpair.pm2 = rule_diff(mp.pm2, mm.pm2, pre_lin);
        out.dpair.qm2 = rule_diff(mp.qm2, mm.qm2, pre_lin);
        out.dpair.pp2 = rule_diff(mp.pp2, mm.pp2, pre_lin);
        out.dpair.n_tot = rule_diff(mp.n_tot, mm.n_tot, pre_lin);
        out.dpair.qp4 = rule_diff(qp.qp4, qm.qp4, pre_quad);
        out.dpair.pm4 = rule_diff(qp.pm4, qm.pm4, pre_quad);
        out.dpair.cross = rule_diff(qp.cross, qm.cross, pre_quad);
    }
    return out;
}

// hybrid SNAP/Hadamard-test derivative circuits (exact-expectation backend)
MomentDerivs hybrid_snap_derivs(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                                int k);

double chain_de_dr(const ham::EnergyModel& model, const SingleMoments& zero,
                   const SingleMoments& half, const std::vector<PairBlockMoments>& pairs,
                   int k, const MomentDerivs& d, int pair_index, double& var) {
    auto acc = [&](double partial, const Est& dm, double& value) {
        value += partial * dm.value;
        var += partial * partial * dm.sigma * dm.sigma;
    };
    double value = 0.0;
    if (!d.is_pair) {
        const auto part = (k == 0) ? model.zero_partials(zero, half, pairs)
                                   : model.half_partials(zero, half, pairs);
        acc(part.q2, d.dsingle.q2, value);
        acc(part.q4, d.dsingle.q4, value);
        acc(part.p2, d.dsingle.p2, value);
    } else {
        const auto part = model.pair_partials(pair_index, zero, half, pairs);
        acc(part.qp2, d.dpair.qp2, value);
        acc(part.pm2, d.dpair.pm2, value);
        acc(part.qm2, d.dpair.qm2, value);
        acc(part.pp2, d.dpair.pp2, value);
        acc(part.qp4, d.dpair.qp4, value);
        acc(part.pm4, d.dpair.pm4, value);
        acc(part.cross, d.dpair.cross, value);
    }
    return value;
}

}  // namespace

Est grad_squeeze(const AnsatzConfig& config, const gep::LatticeSpec& spec, int k,
                 SqueezeGradMethod method, double t) {
    config.validate(spec);
    if (!config.is_squeezed(k))
        throw std::invalid_argument("grad_squeeze: k is not a squeezed mode");
    bool leak = false;
    long shots = 0;
    auto w = compute_workings(config, spec, leak, shots);
    const MomentDerivs d =
        method == SqueezeGradMethod::ParameterShift
            ? parameter_shift_derivs(config, spec, k, t, split_seed(config.backend.seed, 7000 + k))
            : hybrid_snap_derivs(config, spec, k);
    int pair_index = -1;
    for (int i = 0; i < w->model.pair_count(); ++i)
        if (w->model.pair_k(i) == k) pair_index = i;
    double var = 0.0;
    const double value = chain_de_dr(w->model, w->zero, w->half, w->pairs, k, d, pair_index, var);
    return {value, std::sqrt(var)};
}

Est grad_phic(const AnsatzConfig& config, const gep::LatticeSpec& spec,
              PhicGradMethod method, double t) {
    config.validate(spec);
    const double root_lm = std::sqrt(static_cast<double>(spec.sites) * spec.mass);
    if (method == PhicGradMethod::Polynomial) {
        bool leak = false;
        long shots = 0;
        auto w = compute_workings(config, spec, leak, shots);
        const double c = displacement_shift(spec, config.phi_c);
        const auto part = w->model.zero_partials(w->zero, w->half, w->pairs);
        // d<q0^2>/dc = 2c ; d<q0^4>/dc = 12 c <q0^2> - 8 c^3
        const double dq2 = 2.0 * c;
        const double dq4 = 12.0 * c * w->zero.q2.value - 8.0 * c * c * c;
        const double value = (part.q2 * dq2 + part.q4 * dq4) * root_lm;
        const double sigma = std::abs(part.q4 * 12.0 * c * root_lm) * w->zero.q2.sigma;
        return {value, sigma};
    }
    // symmetric displacement stencil, exact for the quartic dependence on phi_c
    const auto eval = [&](double shift, std::uint64_t stream) {
        return energy(with_overrides(config, config.omega_prime, config.phi_c + shift,
                                     split_seed(config.backend.seed, stream)),
                      spec);
    };
    const auto ep = eval(t, 8001), em = eval(-t, 8002);
    const auto ep2 = eval(2.0 * t, 8003), em2 = eval(-2.0 * t, 8004);
    Est out;
    out.value = (8.0 * (ep.value - em.value) - (ep2.value - em2.value)) / (12.0 * t);
    out.sigma = std::sqrt(64.0 * (ep.sigma * ep.sigma + em.sigma * em.sigma) +
                          ep2.sigma * ep2.sigma + em2.sigma * em2.sigma) /
                (12.0 * t);
    return out;
}

GradientEstimate gradient(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                          SqueezeGradMethod method) {
    GradientEstimate g;
    const auto wp = gep::dispersion(config.omega_prime, spec.sites);
    double value = 0.0, var = 0.0;
    for (int k : config.squeezed_modes) {
        const Est dr = grad_squeeze(config, spec, k, method);
        g.d_r.emplace_back(k, dr);
        const double drdo = -config.omega_prime / (2.0 * wp[k] * wp[k]);
        value += dr.value * drdo;
        var += dr.sigma * dr.sigma * drdo * drdo;
    }
    g.d_omega_prime = {value, std::sqrt(var)};
    g.d_phi_c = grad_phic(config, spec);
    return g;
}

// ---------------------------------------------------------------------------
// hybrid SNAP derivative circuits (Hadamard-test extension)

namespace {

constexpr double kHalfPi = 1.5707963267948966;
constexpr double kSnapRefSqueeze = 0.5;

// photon-number parity labeling via SNAP gates, then Y0 (x) P1 (x) A readout.
// Projecting qubit 1 onto |1> keeps exactly two reference levels of the mode
// with a relative phase, turning the r-derivative into an off-diagonal matrix
// element normalized by the reference-state amplitudes.
double snap_derivative_single(int cutoff, double r, double q_shift, const Mat& observable) {
    const int n = cutoff;
    QumodeBlockState st = fock::vacuum_block(fock::BlockKind::ZeroMode, 0, n, 1, 2);
    const Mat h = fock::hadamard();
    fock::apply(st, h, 0, 1);
    fock::apply(st, h, 1, 1);
    const Mat sref = fock::gate_matrix(fock::GateDescriptor::squeeze(kSnapRefSqueeze), n);
    fock::apply(st, sref, 2, 1);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(0, kHalfPi), n), 1, 2);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(2, kHalfPi), n), 1, 2);
    fock::apply(st, fock::qubit_swap(), 0, 2);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(2, kHalfPi), n), 1, 2);
    fock::apply(st, fock::qubit_swap(), 0, 2);
    fock::apply(st, h, 1, 1);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::squeeze(r), n), 2, 1);
    if (q_shift != 0.0)
        fock::apply(st,
                    fock::gate_matrix(fock::GateDescriptor::displace(
                                          fock::complexd(q_shift / std::sqrt(2.0), 0.0)),
                                      n),
                    2, 1);
    // reference amplitudes <0|S(t)|0>, <2|S(t)|0> of the truncated squeezer
    QumodeBlockState ref = fock::vacuum_block(fock::BlockKind::ZeroMode, 0, n, 1);
    fock::apply(ref, sref, 0, 1);
    const double c0 = ref.amp(0).real();
    const double c2 = ref.amp(2).real();

    Mat y(2, 2);
    y << 0.0, fock::complexd(0.0, -1.0), fock::complexd(0.0, 1.0), 0.0;
    Mat p1 = Mat::Zero(2, 2);
    p1(1, 1) = 1.0;
    Mat full = Mat::Zero(4 * n, 4 * n);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d)
                    if (y(a, b) != fock::complexd(0, 0) && p1(c, d) != fock::complexd(0, 0))
                        full.block((a * 2 + c) * n, (b * 2 + d) * n, n, n) =
                            y(a, b) * p1(c, d) * observable;
    const double raw = fock::exact_moment(st, full, 0, 3);
    return raw / (std::sqrt(2.0) * c0 * c2);
}

double snap_derivative_pair(int cutoff, double r, const Mat& observable_two_mode) {
    const int n = cutoff;
    QumodeBlockState st = fock::vacuum_block(fock::BlockKind::Pair, 0, n, 2, 2);
    const Mat h = fock::hadamard();
    fock::apply(st, h, 0, 1);
    fock::apply(st, h, 1, 1);
    // reference two-mode squeeze stays in the |jj> sector
    const Mat s2ref = fock::gate_matrix(fock::GateDescriptor::two_mode_squeeze(kSnapRefSqueeze), n);
    fock::apply(st, s2ref, 2, 2);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(0, kHalfPi), n), 1, 2);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(1, kHalfPi), n), 1, 2);
    fock::apply(st, fock::qubit_swap(), 0, 2);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::snap(1, kHalfPi), n), 1, 2);
    fock::apply(st, fock::qubit_swap(), 0, 2);
    fock::apply(st, h, 1, 1);
    fock::apply(st, fock::gate_matrix(fock::GateDescriptor::two_mode_squeeze(r), n), 2, 2);

    const Eigen::VectorXd dref = fock::two_mode_squeezed_vacuum_diagonal(n, kSnapRefSqueeze);
    const double d0 = dref(0), d1 = dref(1);

    Mat y(2, 2);
    y << 0.0, fock::complexd(0.0, -1.0), fock::complexd(0.0, 1.0), 0.0;
    const long nn = static_cast<long>(n) * n;
    Mat full = Mat::Zero(4 * nn, 4 * nn);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            if (y(a, b) != fock::complexd(0, 0))
                full.block((a * 2 + 1) * nn, (b * 2 + 1) * nn, nn, nn) =
                    y(a, b) * observable_two_mode;
    const double raw = fock::exact_moment(st, full, 0, 4);
    return raw / (d0 * d1);  // d/dr = 2 Re<11|M|00>, raw = 2 d0 d1 Re<11|M|00>
}

Mat pair_quadrature_op(int n, bool momentum_side, int power, double sign) {
    // ((q_A ± q_B)/sqrt(2))^power or ((p_A ± p_B)/sqrt(2))^power
    const Mat base1 = momentum_side ? fock::momentum(n) : fock::position(n).cast<fock::complexd>();
    const Mat id = Mat::Identity(n, n);
    const long nn = static_cast<long>(n) * n;
    Mat op = Mat::Zero(nn, nn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (base1(i, j) != fock::complexd(0, 0))
                op.block(i * n, j * n, n, n) += base1(i, j) * id;
        }
    Mat opb = Mat::Zero(nn, nn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            opb.block(i * n, j * n, n, n) += id(i, j) * base1;
    Mat combo = (op + sign * opb) / std::sqrt(2.0);
    Mat out = Mat::Identity(nn, nn);
    for (int p = 0; p < power; ++p) out = combo * out;
    return out;
}

MomentDerivs hybrid_snap_derivs_impl(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                                     int k) {
    const int n = config.cutoff;
    const auto r = squeeze_profile(config.omega_prime, spec.mass, spec.sites);
    MomentDerivs out;
    if (k == 0 || k == spec.sites / 2) {
        const double c = k == 0 ? displacement_shift(spec, config.phi_c) : 0.0;
        const Mat q = fock::position(n).cast<fock::complexd>();
        const Mat p = fock::momentum(n);
        out.dsingle.q2 = {snap_derivative_single(n, r[k], c, q * q), 0.0};
        out.dsingle.q4 = {snap_derivative_single(n, r[k], c, Mat(q * q * q * q)), 0.0};
        out.dsingle.p2 = {snap_derivative_single(n, r[k], c, p * p), 0.0};
        return out;
    }
    out.is_pair = true;
    const Mat qp2 = pair_quadrature_op(n, false, 2, +1.0);
    const Mat pm2 = pair_quadrature_op(n, true, 2, -1.0);
    const Mat qm2 = pair_quadrature_op(n, false, 2, -1.0);
    const Mat pp2 = pair_quadrature_op(n, true, 2, +1.0);
    out.dpair.qp2 = {snap_derivative_pair(n, r[k], qp2), 0.0};
    out.dpair.pm2 = {snap_derivative_pair(n, r[k], pm2), 0.0};
    out.dpair.qm2 = {snap_derivative_pair(n, r[k], qm2), 0.0};
    out.dpair.pp2 = {snap_derivative_pair(n, r[k], pp2), 0.0};
    out.dpair.qp4 = {snap_derivative_pair(n, r[k], Mat(qp2 * qp2)), 0.0};
    out.dpair.pm4 = {snap_derivative_pair(n, r[k], Mat(pm2 * pm2)), 0.0};
    out.dpair.cross = {snap_derivative_pair(n, r[k], Mat(qp2 * pm2)), 0.0};
    return out;
}

MomentDerivs hybrid_snap_derivs(const AnsatzConfig& config, const gep::LatticeSpec& spec,
                                int k) {
    return hybrid_snap_derivs_impl(config, spec, k);
}

}  // namespace

// ---------------------------------------------------------------------------
// minimization

MinimizeResult minimize(const AnsatzConfig& init, const gep::LatticeSpec& spec,
                        const OptimizerOptions& opt) {
    init.validate(spec);
    MinimizeResult res;
    res.config = init;

    if (opt.method == OptimizerOptions::Method::Simplex) {
        std::vector<double>* traj = &res.trajectory;
        auto f = [&](const std::vector<double>& u) {
            if (u[0] <= 1e-3) return 1e100;
            AnsatzConfig c = init;
            c.omega_prime = u[0] * spec.mass;
            c.phi_c = u[1];
            const double e = energy(c, spec).value;
            traj->push_back(e);
            return e;
        };
        NelderMeadOptions nm;
        nm.max_iters = opt.max_iters;
        nm.x_tol = 1e-9;
        nm.f_tol = 1e-13;
        const auto r = nelder_mead(f, {init.omega_prime / spec.mass, init.phi_c}, nm);
        res.config.omega_prime = r.x[0] * spec.mass;
        res.config.phi_c = r.x[1];
        res.energy = r.f;
        res.iterations = r.evaluations;
        res.converged = r.converged;
        return res;
    }

    // gradient descent with halving on non-decrease; gradients use the
    // dedicated shot budget, comparisons reuse it
    double lr = opt.learning_rate;
    AnsatzConfig cur = init;
    Backend grad_backend = init.backend;
    if (!init.backend.is_exact()) grad_backend.shots = opt.grad_shots;
    auto eval = [&](const AnsatzConfig& c, std::uint64_t stream) {
        AnsatzConfig cc = c;
        cc.backend = grad_backend;
        cc.backend.seed = split_seed(init.backend.seed, stream);
        return energy(cc, spec).value;
    };
    double e_cur = eval(cur, 1);
    res.trajectory.push_back(e_cur);
    int it = 0;
    for (; it < opt.max_iters && lr >= opt.min_learning_rate; ++it) {
        AnsatzConfig gc = cur;
        gc.backend = grad_backend;
        gc.backend.seed = split_seed(init.backend.seed, 1000 + it);
        GradientEstimate g;
        g = gradient(gc, spec, SqueezeGradMethod::ParameterShift);
        AnsatzConfig next = cur;
        next.omega_prime = std::max(1e-3 * spec.mass,
                                    cur.omega_prime - lr * spec.mass * spec.mass * g.d_omega_prime.value);
        next.phi_c = cur.phi_c - lr * g.d_phi_c.value;
        const double e_next = eval(next, 2000 + it);
        if (e_next < e_cur) {
            cur = next;
            e_cur = e_next;
        } else {
            lr *= 0.5;
        }
        res.trajectory.push_back(e_cur);
    }
    res.config = cur;
    res.config.backend = init.backend;
    res.energy = e_cur;
    res.iterations = it;
    res.converged = lr < opt.min_learning_rate;
    return res;
}

}  // namespace phi4::cv
