#include "phi4/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace phi4 {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        double step = opt.init_step * std::max(1.0, std::abs(x0[i]));
        simplex[i + 1][i] += step;
    }
    std::vector<double> fv(n + 1);
    int evals = 0;
    for (std::size_t i = 0; i <= n; ++i) { fv[i] = f(simplex[i]); ++evals; }

    NelderMeadResult res;
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        std::vector<std::size_t> order(n + 1);
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> sx(n + 1);
        std::vector<double> sf(n + 1);
        for (std::size_t i = 0; i <= n; ++i) { sx[i] = simplex[order[i]]; sf[i] = fv[order[i]]; }
        simplex = sx; fv = sf;

        double spread_x = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            spread_x = std::max(spread_x, std::abs(simplex[n][i] - simplex[0][i]));
        if (spread_x < opt.x_tol && std::abs(fv[n] - fv[0]) < opt.f_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t j = 0; j < n; ++j)
                x[j] = centroid[j] + t * (simplex[n][j] - centroid[j]);
            return x;
        };

        auto xr = blend(-1.0);
        double fr = f(xr); ++evals;
        if (fr < fv[0]) {
            auto xe = blend(-2.0);
            double fe = f(xe); ++evals;
            if (fe < fr) { simplex[n] = xe; fv[n] = fe; }
            else { simplex[n] = xr; fv[n] = fr; }
        } else if (fr < fv[n - 1]) {
            simplex[n] = xr; fv[n] = fr;
        } else {
            auto xc = blend(fr < fv[n] ? -0.5 : 0.5);
            double fc = f(xc); ++evals;
            if (fc < std::min(fr, fv[n])) {
                simplex[n] = xc; fv[n] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    fv[i] = f(simplex[i]); ++evals;
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = simplex[best];
    res.f = fv[best];
    res.evaluations = evals;
    return res;
}

}  // namespace phi4
