#include "phi4/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phi4/numerics.hpp"

namespace phi4::fit {

namespace {

std::vector<double> wls_coefficients(const std::vector<CrossingPoint>& points,
                                     const std::vector<double>& ys, int order,
                                     double x_center) {
    const int n = static_cast<int>(points.size());
    if (n < order + 1) throw std::invalid_argument("need at least order+1 points");
    double ymax = 0.0;
    for (double y : ys) ymax = std::max(ymax, std::abs(y));
    const double sigma_floor = std::max(1e-12 * std::max(ymax, 1.0), 1e-300);
    Eigen::MatrixXd a(n, order + 1);
    Eigen::VectorXd y(n), w(n);
    for (int i = 0; i < n; ++i) {
        double xp = 1.0;
        const double xc = points[i].x - x_center;
        for (int j = 0; j <= order; ++j) { a(i, j) = xp; xp *= xc; }
        y(i) = ys[i];
        const double s = std::max(points[i].sigma, sigma_floor);
        w(i) = 1.0 / (s * s);
    }
    const Eigen::MatrixXd ata = a.transpose() * w.asDiagonal() * a;
    const Eigen::VectorXd aty = a.transpose() * (w.asDiagonal() * y);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    if (!lu.isInvertible()) throw std::invalid_argument("degenerate crossing design matrix");
    const Eigen::VectorXd c = lu.solve(aty);
    return std::vector<double>(c.data(), c.data() + c.size());
}

std::optional<double> nearest_real_root(const std::vector<double>& coeffs, double x_center,
                                        double range_lo, double range_hi) {
    const double span = std::max(range_hi - range_lo, 1e-12);
    const double lo = range_lo - 0.5 * span, hi = range_hi + 0.5 * span;
    std::vector<double> roots;
    if (coeffs.size() == 2) {
        if (coeffs[1] != 0.0) roots.push_back(-coeffs[0] / coeffs[1] + x_center);
    } else if (coeffs.size() == 3) {
        const double a = coeffs[2], b = coeffs[1], c = coeffs[0];
        if (a == 0.0) {
            if (b != 0.0) roots.push_back(-c / b + x_center);
        } else {
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                roots.push_back((-b + sq) / (2.0 * a) + x_center);
                roots.push_back((-b - sq) / (2.0 * a) + x_center);
            }
        }
    } else {
        throw std::invalid_argument("fit order must be 1 or 2");
    }
    std::optional<double> best;
    const double mid = 0.5 * (range_lo + range_hi);
    for (double r : roots) {
        if (r < lo || r > hi) continue;
        if (!best || std::abs(r - mid) < std::abs(*best - mid)) best = r;
    }
    return best;
}

}  // namespace

std::optional<double> fit_intercept(const std::vector<CrossingPoint>& points, int order) {
    if (order < 1 || order > 2) throw std::invalid_argument("fit order must be 1 or 2");
    double xlo = points.front().x, xhi = points.front().x, xsum = 0.0;
    std::vector<double> ys;
    ys.reserve(points.size());
    for (const auto& p : points) {
        if (!std::isfinite(p.sigma)) throw std::invalid_argument("points need finite sigma");
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        xsum += p.x;
        ys.push_back(p.y);
    }
    const double xc = xsum / points.size();
    const auto coeffs = wls_coefficients(points, ys, order, xc);
    return nearest_real_root(coeffs, xc, xlo, xhi);
}

CrossingFit fit_crossing(const std::vector<CrossingPoint>& points, int order) {
    CrossingFit out;
    out.order = order;
    double xlo = points.front().x, xhi = points.front().x, xsum = 0.0;
    std::vector<double> ys;
    for (const auto& p : points) {
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        xsum += p.x;
        ys.push_back(p.y);
    }
    out.x_center = xsum / points.size();
    out.coefficients = wls_coefficients(points, ys, order, out.x_center);
    const auto root = nearest_real_root(out.coefficients, out.x_center, xlo, xhi);
    if (!root)
        throw std::runtime_error("no real crossing within the extended grid range");
    out.intercept = *root;
    return out;
}

std::pair<double, double> bootstrap_ci(const std::vector<CrossingPoint>& points, int order,
                                       int resamples, double level, std::uint64_t seed) {
    if (resamples < 2) throw std::invalid_argument("need at least 2 bootstrap resamples");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0,1)");
    double xlo = points.front().x, xhi = points.front().x, xsum = 0.0;
    for (const auto& p : points) {
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        xsum += p.x;
    }
    const double xc = xsum / points.size();

    std::vector<double> intercepts;
    intercepts.reserve(resamples);
    for (int b = 0; b < resamples; ++b) {
        std::vector<double> ys(points.size());
        Rng rng(split_seed(seed, b));
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            if (p.resample)
                ys[i] = p.resample(split_seed(split_seed(seed, b), i));
            else
                ys[i] = p.y + p.sigma * rng.normal();
        }
        const auto coeffs = wls_coefficients(points, ys, order, xc);
        const auto root = nearest_real_root(coeffs, xc, xlo, xhi);
        if (root) intercepts.push_back(*root);
    }
    if (intercepts.size() < 2)
        throw std::runtime_error("bootstrap produced too few valid intercepts");
    std::sort(intercepts.begin(), intercepts.end());
    const double alpha = 0.5 * (1.0 - level);
    auto percentile = [&](double q) {
        const double pos = q * (intercepts.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - i;
        if (i + 1 >= intercepts.size()) return intercepts.back();
        return intercepts[i] * (1.0 - frac) + intercepts[i + 1] * frac;
    };
    return {percentile(alpha), percentile(1.0 - alpha)};
}

}  // namespace phi4::fit
