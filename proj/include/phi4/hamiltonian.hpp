#pragma once

#include <vector>

#include "phi4/gep.hpp"

namespace phi4::ham {

/// Point estimate with statistical error; sigma = 0 on exact backends.
struct Est {
    double value = 0.0;
    double sigma = 0.0;
};

/// Moments of a single-mode block (zero or half mode). The zero-mode entries
/// include the field displacement.
struct SingleMoments {
    Est q2, q4, p2;
};

/// Moments of a (k, L-k) pair block in the beam-splitter-rotated quadratures
/// q± = (q(k) ± q(L-k))/sqrt(2), p± likewise.
struct PairBlockMoments {
    Est qp2, pm2;   // <q+^2>, <p-^2>
    Est qp4, pm4;   // <q+^4>, <p-^4>
    Est cross;      // <q+^2 p-^2>
    Est qm2, pp2;   // <q-^2>, <p+^2>
    Est n_tot;      // <N(k) + N(L-k)>
};

SingleMoments vacuum_single();
PairBlockMoments vacuum_pair();

/// Assembles <H> for the full lattice from per-block moments. The Hamiltonian
/// is expanded in the reference-mass (m) quadratures; the bare-mass
/// counterterm enters through kappa = (m0^2 - m^2)/2 and the quartic couples
/// blocks only through products of their expectations.
class EnergyModel {
  public:
    explicit EnergyModel(const gep::LatticeSpec& spec);

    int pair_count() const { return static_cast<int>(pair_ks_.size()); }
    int pair_k(int i) const { return pair_ks_[i]; }
    double omega(int k) const { return omega_[k]; }

    double value(const SingleMoments& zero, const SingleMoments& half,
                 const std::vector<PairBlockMoments>& pairs) const;

    /// Statistical variance of value() from first-order propagation,
    /// treating the individual moment estimates as independent.
    double variance(const SingleMoments& zero, const SingleMoments& half,
                    const std::vector<PairBlockMoments>& pairs) const;

    struct SinglePartials {
        double q2 = 0.0, q4 = 0.0, p2 = 0.0;
    };
    struct PairPartials {
        double qp2 = 0.0, pm2 = 0.0, qp4 = 0.0, pm4 = 0.0, cross = 0.0, qm2 = 0.0,
               pp2 = 0.0;
    };

    SinglePartials zero_partials(const SingleMoments& zero, const SingleMoments& half,
                                 const std::vector<PairBlockMoments>& pairs) const;
    SinglePartials half_partials(const SingleMoments& zero, const SingleMoments& half,
                                 const std::vector<PairBlockMoments>& pairs) const;
    PairPartials pair_partials(int pair_index, const SingleMoments& zero,
                               const SingleMoments& half,
                               const std::vector<PairBlockMoments>& pairs) const;

  private:
    int sites_ = 0;
    double kappa_ = 0.0;  // (m0^2 - m^2)/2
    double quart_ = 0.0;  // lambda / (24 L)
    std::vector<double> omega_;
    std::vector<int> pair_ks_;
    int half_k_ = 0;
};

}  // namespace phi4::ham
