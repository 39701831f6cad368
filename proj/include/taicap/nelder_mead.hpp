#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>

namespace taicap {

template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x{};
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free Nelder-Mead minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
template <std::size_t N, class F>
SimplexResult<N> nelder_mead(F&& f, std::array<double, N> start, double step, double ftol,
                             double xtol, int max_evals) {
    using Point = std::array<double, N>;
    std::array<Point, N + 1> pts;
    std::array<double, N + 1> vals;
    pts[0] = start;
    for (std::size_t i = 0; i < N; ++i) {
        pts[i + 1] = start;
        pts[i + 1][i] += step;
    }
    int evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        const double v = f(p);
        return std::isfinite(v) ? v : HUGE_VAL;
    };
    for (std::size_t i = 0; i <= N; ++i) vals[i] = eval(pts[i]);

    std::array<std::size_t, N + 1> order;
    bool converged = false;
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[N - 1];

        double spread = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            for (std::size_t d = 0; d < N; ++d) spread = std::max(spread, std::abs(pts[i][d] - pts[best][d]));
        }
        if (std::abs(vals[worst] - vals[best]) <= ftol * (std::abs(vals[best]) + ftol) || spread < xtol) {
            converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < N; ++d) centroid[d] += pts[i][d] / static_cast<double>(N);
        }
        auto along = [&](double t) {
            Point p;
            for (std::size_t d = 0; d < N; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
            return p;
        };

        const Point reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < vals[best]) {
            const Point expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = reflected;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Point contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = contracted;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < N; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
            vals[i] = eval(pts[i]);
        }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    SimplexResult<N> out;
    out.x = pts[static_cast<std::size_t>(it - vals.begin())];
    out.value = *it;
    out.evaluations = evals;
    out.converged = converged;
    return out;
}

}  // namespace taicap
