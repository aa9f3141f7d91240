#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace phi4::fit {

struct CrossingPoint {
    double x = 0.0;      // lambda_tilde
    double y = 0.0;      // Delta<H>
    double sigma = 0.0;  // statistical error; 0 for exact points
    /// Optional shot-level resampler (counts bootstrap); when absent the
    /// bootstrap falls back to Gaussian perturbation with sigma.
    std::function<double(std::uint64_t)> resample;
};

struct CrossingFit {
    std::vector<double> coefficients;  // ascending powers, x centered at x_center
    double x_center = 0.0;
    int order = 1;
    double intercept = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // filled by bootstrap
    int bootstrap_resamples = 0;
    double ci_level = 0.0;
};

/// Weighted least-squares polynomial fit; intercept = real root of the fitted
/// polynomial nearest the data range (extended by 50%). Empty when no real
/// root lies in the extended range.
std::optional<double> fit_intercept(const std::vector<CrossingPoint>& points, int order);

CrossingFit fit_crossing(const std::vector<CrossingPoint>& points, int order);

/// Percentile bootstrap of the intercept: resamples each point (shot-level
/// when available, Gaussian otherwise), refits, and takes the percentile
/// interval at the requested level.
std::pair<double, double> bootstrap_ci(const std::vector<CrossingPoint>& points, int order,
                                       int resamples, double level, std::uint64_t seed);

}  // namespace phi4::fit
