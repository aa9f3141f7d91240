#pragma once

#include <optional>
#include <vector>

namespace phi4::gep {

/// Physical scenario: lattice size L (spacing a = 1), renormalized mass
/// m = Omega_0 and quartic coupling lambda (mass dimension two).
struct LatticeSpec {
    int sites = 0;          // L, even and >= 2
    double mass = 0.0;      // m > 0
    double coupling = 0.0;  // lambda >= 0

    double lambda_tilde() const { return coupling / (mass * mass); }
    void validate() const;
};

/// omega(k) = sqrt(Omega^2 + 4 sin^2(pi k / L)) for k = 0..L-1.
std::vector<double> dispersion(double omega_mass, int sites);

struct ModeSums {
    double i0 = 0.0;  // (1/2L) sum_k 1/omega(k)
    double i1 = 0.0;  // (1/2L) sum_k omega(k)
};
ModeSums mode_sums(double omega_mass, int sites);

/// m0^2 = m^2 - (lambda/2) I0(m). May be negative.
double bare_mass_squared(double mass, double coupling, int sites);

/// Gaussian effective potential per site at field shift phi_c and mass
/// parameter Omega.
double gep_value(double phi_c, double omega_mass, const LatticeSpec& spec);

struct GepEvaluation {
    double omega_mass = 0.0;
    double value = 0.0;     // V_G on the stationary branch
    double phi_c_sq = 0.0;  // may be negative (unphysical region)
};

/// V_G restricted to the stationary branch phi_c(Omega). Requires lambda > 0.
GepEvaluation gep_of_omega(double omega_mass, const LatticeSpec& spec);

/// dV_G/dOmega^2 along the stationary branch; sign changes bracket the
/// second minimum Omega_1.
double gep_gradient(double omega_mass, const LatticeSpec& spec);

/// V_G(Omega_1) - V_G(Omega_0) with the coupling eliminated through the
/// stationarity condition, as a function of the trial Omega_1 alone.
double delta_vg(double omega1, double mass, int sites);

struct CriticalPoint {
    int sites = 0;
    double mass = 0.0;
    double omega_c = 0.0;
    double lambda_c = 0.0;

    double omega_c_sq_over_m2() const { return omega_c * omega_c / (mass * mass); }
    double lambda_c_over_m2() const { return lambda_c / (mass * mass); }
};

/// Solves delta_vg = 0 for Omega_c > m by geometric bracketing and bisection,
/// then evaluates the critical coupling. Empty when no bracket exists.
std::optional<CriticalPoint> critical_point(double mass, int sites,
                                            double delta_tol = 1e-12);

/// critical_point mapped over lattice sizes; entries without a transition
/// stay empty. Parallelizes over sizes with deterministic output order.
std::vector<std::optional<CriticalPoint>> critical_scan(double mass,
                                                        const std::vector<int>& sizes);

/// Positive roots x = mu^2/m^2 of (2 + x)/lambda_tilde = ln(x)/(4 pi).
/// Zero, one or two roots; sorted ascending.
std::vector<double> duality_solutions(double lambda_over_m2);

}  // namespace phi4::gep
