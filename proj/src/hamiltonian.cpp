#include "phi4/hamiltonian.hpp"

namespace phi4::ham {

SingleMoments vacuum_single() { return {{0.5, 0.0}, {0.75, 0.0}, {0.5, 0.0}}; }

PairBlockMoments vacuum_pair() {
    PairBlockMoments p;
    p.qp2 = {0.5, 0.0};
    p.pm2 = {0.5, 0.0};
    p.qp4 = {0.75, 0.0};
    p.pm4 = {0.75, 0.0};
    p.cross = {0.25, 0.0};
    p.qm2 = {0.5, 0.0};
    p.pp2 = {0.5, 0.0};
    p.n_tot = {0.0, 0.0};
    return p;
}

EnergyModel::EnergyModel(const gep::LatticeSpec& spec) {
    spec.validate();
    sites_ = spec.sites;
    half_k_ = spec.sites / 2;
    omega_ = gep::dispersion(spec.mass, spec.sites);
    const double m0sq = gep::bare_mass_squared(spec.mass, spec.coupling, spec.sites);
    kappa_ = 0.5 * (m0sq - spec.mass * spec.mass);
    quart_ = spec.coupling / (24.0 * spec.sites);
    for (int k = 1; k < half_k_; ++k) pair_ks_.push_back(k);
}

double EnergyModel::value(const SingleMoments& zero, const SingleMoments& half,
                          const std::vector<PairBlockMoments>& pairs) const {
    const double w0 = omega_[0], wh = omega_[half_k_];
    double e = 0.0;
    e += 0.5 * w0 * (zero.q2.value + zero.p2.value) + kappa_ * zero.q2.value / w0 +
         quart_ * zero.q4.value / (w0 * w0);
    e += 0.5 * wh * (half.q2.value + half.p2.value) + kappa_ * half.q2.value / wh +
         quart_ * half.q4.value / (wh * wh);
    e += 6.0 * quart_ * zero.q2.value * half.q2.value / (w0 * wh);
    const double singles_sum = zero.q2.value / w0 + half.q2.value / wh;
    for (std::size_t i = 0; i < pair_ks_.size(); ++i) {
        const int k = pair_ks_[i];
        const double wk = omega_[k];
        const PairBlockMoments& p = pairs[i];
        const bool quarter = (4 * k == sites_);
        e += 0.5 * wk * (p.qp2.value + p.qm2.value + p.pp2.value + p.pm2.value) +
             kappa_ * (p.qp2.value + p.pm2.value) / wk;
        e += 6.0 * quart_ * singles_sum * (p.qp2.value + p.pm2.value) / wk;
        const double four = p.qp4.value + p.pm4.value;
        e += quart_ / (2.0 * wk * wk) *
             (quarter ? 4.0 * four : 3.0 * (four + 2.0 * p.cross.value));
    }
    for (std::size_t i = 0; i < pair_ks_.size(); ++i) {
        for (std::size_t j = i + 1; j < pair_ks_.size(); ++j) {
            const int k = pair_ks_[i], kp = pair_ks_[j];
            const double delta = (k + kp == half_k_) ? 1.0 : 0.0;
            const double si = pairs[i].qp2.value + pairs[i].pm2.value;
            const double sj = pairs[j].qp2.value + pairs[j].pm2.value;
            const double di = pairs[i].qp2.value - pairs[i].pm2.value;
            const double dj = pairs[j].qp2.value - pairs[j].pm2.value;
            e += 3.0 * quart_ / (omega_[k] * omega_[kp]) * (2.0 * si * sj + di * dj * delta);
        }
    }
    return e;
}

EnergyModel::SinglePartials EnergyModel::zero_partials(
    const SingleMoments&, const SingleMoments& half,
    const std::vector<PairBlockMoments>& pairs) const {
    const double w0 = omega_[0], wh = omega_[half_k_];
    SinglePartials d;
    d.q2 = 0.5 * w0 + kappa_ / w0 + 6.0 * quart_ * half.q2.value / (w0 * wh);
    for (std::size_t i = 0; i < pair_ks_.size(); ++i)
        d.q2 += 6.0 * quart_ * (pairs[i].qp2.value + pairs[i].pm2.value) /
                (w0 * omega_[pair_ks_[i]]);
    d.q4 = quart_ / (w0 * w0);
    d.p2 = 0.5 * w0;
    return d;
}

EnergyModel::SinglePartials EnergyModel::half_partials(
    const SingleMoments& zero, const SingleMoments&,
    const std::vector<PairBlockMoments>& pairs) const {
    const double w0 = omega_[0], wh = omega_[half_k_];
    SinglePartials d;
    d.q2 = 0.5 * wh + kappa_ / wh + 6.0 * quart_ * zero.q2.value / (w0 * wh);
    for (std::size_t i = 0; i < pair_ks_.size(); ++i)
        d.q2 += 6.0 * quart_ * (pairs[i].qp2.value + pairs[i].pm2.value) /
                (wh * omega_[pair_ks_[i]]);
    d.q4 = quart_ / (wh * wh);
    d.p2 = 0.5 * wh;
    return d;
}

EnergyModel::PairPartials EnergyModel::pair_partials(
    int pair_index, const SingleMoments& zero, const SingleMoments& half,
    const std::vector<PairBlockMoments>& pairs) const {
    const int k = pair_ks_[pair_index];
    const double wk = omega_[k];
    const double w0 = omega_[0], wh = omega_[half_k_];
    const bool quarter = (4 * k == sites_);
    const double singles_sum = zero.q2.value / w0 + half.q2.value / wh;
    PairPartials d;
    const double quad_common = 0.5 * wk + kappa_ / wk + 6.0 * quart_ * singles_sum / wk;
    d.qp2 = quad_common;
    d.pm2 = quad_common;
    for (std::size_t j = 0; j < pair_ks_.size(); ++j) {
        if (static_cast<int>(j) == pair_index) continue;
        const int kp = pair_ks_[j];
        const double delta = (k + kp == half_k_) ? 1.0 : 0.0;
        const double sj = pairs[j].qp2.value + pairs[j].pm2.value;
        const double dj = pairs[j].qp2.value - pairs[j].pm2.value;
        d.qp2 += 3.0 * quart_ / (wk * omega_[kp]) * (2.0 * sj + dj * delta);
        d.pm2 += 3.0 * quart_ / (wk * omega_[kp]) * (2.0 * sj - dj * delta);
    }
    d.qm2 = 0.5 * wk;
    d.pp2 = 0.5 * wk;
    const double c4 = quart_ / (2.0 * wk * wk);
    d.qp4 = quarter ? 4.0 * c4 : 3.0 * c4;
    d.pm4 = d.qp4;
    d.cross = quarter ? 0.0 : 6.0 * c4;
    return d;
}

double EnergyModel::variance(const SingleMoments& zero, const SingleMoments& half,
                             const std::vector<PairBlockMoments>& pairs) const {
    auto sq = [](double x) { return x * x; };
    double var = 0.0;
    const SinglePartials dz = zero_partials(zero, half, pairs);
    var += sq(dz.q2 * zero.q2.sigma) + sq(dz.q4 * zero.q4.sigma) + sq(dz.p2 * zero.p2.sigma);
    const SinglePartials dh = half_partials(zero, half, pairs);
    var += sq(dh.q2 * half.q2.sigma) + sq(dh.q4 * half.q4.sigma) + sq(dh.p2 * half.p2.sigma);
    for (std::size_t i = 0; i < pair_ks_.size(); ++i) {
        const PairPartials dp = pair_partials(static_cast<int>(i), zero, half, pairs);
        const PairBlockMoments& p = pairs[i];
        var += sq(dp.qp2 * p.qp2.sigma) + sq(dp.pm2 * p.pm2.sigma) +
               sq(dp.qp4 * p.qp4.sigma) + sq(dp.pm4 * p.pm4.sigma) +
               sq(dp.cross * p.cross.sigma) + sq(dp.qm2 * p.qm2.sigma) +
               sq(dp.pp2 * p.pp2.sigma);
    }
    return var;
}

}  // namespace phi4::ham
