#pragma once

// Derivative-free simplex minimizer with the dimension-adaptive
// reflection/expansion/contraction/shrink coefficients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace qkdlab {

struct SimplexOptions {
    int max_iters = 2000;
    double tol = 1e-10;          // convergence tolerance on objective spread
    double initial_step = 0.5;
};

struct SimplexResult {
    std::vector<double> x;
    double fval = 0.0;
    int iterations = 0;
};

// Minimizes f starting from x0. When the simplex collapses (spread below
// tol) with iterations left, it is re-seeded around the incumbent with a
// smaller step and the search continues until the iteration cap.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> x0, const SimplexOptions& opts) {
    const std::size_t n = x0.size();
    const double dn = static_cast<double>(n);
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / dn;
    const double gamma = 0.75 - 1.0 / (2.0 * dn);
    const double delta = 1.0 - 1.0 / dn;

    std::vector<std::vector<double>> xs;
    std::vector<double> fs;

    const auto seed_simplex = [&](std::span<const double> center, double step) {
        xs.assign(n + 1, std::vector<double>(center.begin(), center.end()));
        fs.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += step;
        for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);
    };

    seed_simplex(x0, opts.initial_step);

    std::vector<std::size_t> order(n + 1);
    int iters = 0;
    double restart_step = opts.initial_step;

    while (iters < opts.max_iters) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order[0], worst = order[n], second_worst = order[n - 1];

        if (fs[best] <= 1e-14) break;
        if (fs[worst] - fs[best] <= opts.tol) {
            restart_step *= 0.25;
            if (restart_step < 1e-8) break;
            seed_simplex(xs[best], restart_step);
            ++iters;
            continue;
        }

        ++iters;
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += xs[i][d];
        }
        for (double& c : centroid) c /= dn;

        const auto blend = [&](double coeff) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + coeff * (centroid[d] - xs[worst][d]);
            return p;
        };

        std::vector<double> reflected = blend(alpha);
        const double fr = f(reflected);
        if (fr < fs[best]) {
            std::vector<double> expanded = blend(alpha * beta);
            const double fe = f(expanded);
            if (fe < fr) { xs[worst] = std::move(expanded); fs[worst] = fe; }
            else { xs[worst] = std::move(reflected); fs[worst] = fr; }
            continue;
        }
        if (fr < fs[second_worst]) {
            xs[worst] = std::move(reflected);
            fs[worst] = fr;
            continue;
        }
        std::vector<double> contracted =
            fr < fs[worst] ? blend(alpha * gamma) : blend(-gamma);
        const double fc = f(contracted);
        if (fc < std::min(fr, fs[worst])) {
            xs[worst] = std::move(contracted);
            fs[worst] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < n; ++d)
                xs[i][d] = xs[best][d] + delta * (xs[i][d] - xs[best][d]);
            fs[i] = f(xs[i]);
        }
    }

    const std::size_t best =
        static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    return SimplexResult{xs[best], fs[best], iters};
}

} // namespace qkdlab
