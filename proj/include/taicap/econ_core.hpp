#pragma once

// Preferences, technology and factor prices of the growth economy, plus the
// wealth-based AI-labor allocation rule. Everything here is a pure function.

#include <cmath>
#include <numeric>
#include <span>
#include <string>

#include "taicap/errors.hpp"

namespace taicap {

struct ModelParams {
    double beta = 0.99;
    double eta = 1.0;
    double alpha = 0.36;
    double delta = 0.025;
    double g_sq = 0.018;
    double g_tai = 0.30;
    double lambda = 1.0;
    double labor = 1.0;
};

/// beta * (1+g)^(1-eta) < 1: discounted utility and wage-value sums stay finite.
inline bool convergence_condition_holds(double g, const ModelParams& p) {
    return p.beta * std::pow(1.0 + g, 1.0 - p.eta) < 1.0;
}

/// Throws ConfigError naming the first violated restriction.
inline void validate(const ModelParams& p) {
    if (!(p.beta > 0.0 && p.beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
    if (!(p.eta >= 0.0)) throw ConfigError("eta must be nonnegative");
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(p.delta >= 0.0 && p.delta <= 1.0)) throw ConfigError("delta must lie in [0,1]");
    if (!(p.labor > 0.0)) throw ConfigError("labor must be positive");
    if (!(p.g_sq > -1.0 && p.g_tai > -1.0)) throw ConfigError("growth rates must exceed -1");
    if (!std::isfinite(p.lambda)) throw ConfigError("lambda must be finite");
    for (double g : {p.g_sq, p.g_tai}) {
        if (!convergence_condition_holds(g, p)) {
            throw ConfigError("convergence condition beta*(1+g)^(1-eta) < 1 violated for g = " +
                              std::to_string(g));
        }
    }
}

/// CRRA utility; exact log at eta == 1.
inline double utility(double c, double eta) {
    if (!(c > 0.0)) throw DomainError("utility: consumption must be positive");
    if (eta == 1.0) return std::log(c);
    return (std::pow(c, 1.0 - eta) - 1.0) / (1.0 - eta);
}

inline double marginal_utility(double c, double eta) {
    if (!(c > 0.0)) throw DomainError("marginal_utility: consumption must be positive");
    if (eta == 1.0) return 1.0 / c;
    return std::pow(c, -eta);
}

/// Cobb-Douglas output K^alpha (A L)^(1-alpha).
inline double output(double k, double a, double l, double alpha) {
    if (k < 0.0 || !(a > 0.0) || !(l > 0.0)) throw DomainError("output: need k >= 0, a > 0, l > 0");
    if (k == 0.0) return 0.0;
    return std::pow(k, alpha) * std::pow(a * l, 1.0 - alpha);
}

/// Marginal product of capital net of depreciation.
inline double rental_rate(double k, double a, double l, const ModelParams& p) {
    if (!(k > 0.0)) throw DomainError("rental_rate: capital must be positive");
    return p.alpha * std::pow(a * l / k, 1.0 - p.alpha) - p.delta;
}

/// Wage per labor unit implied by a rental rate (inverts the capital FOC).
inline double wage(double r_k, double a, const ModelParams& p) {
    if (!(r_k + p.delta > 0.0)) throw DomainError("wage: r_k + delta must be positive");
    return (1.0 - p.alpha) * a * std::pow(p.alpha / (r_k + p.delta), p.alpha / (1.0 - p.alpha));
}

/// Gross stationary interest factor (1+g)^eta / beta.
inline double stationary_gross_rate(double g, const ModelParams& p) {
    return std::pow(1.0 + g, p.eta) / p.beta;
}

struct SteadyState {
    double k_hat = 0.0;
    double c_hat = 0.0;
    double y_hat = 0.0;
    double w_hat = 0.0;
    double r_k = 0.0;
    double r_gross = 0.0;
};

/// Detrended balanced-growth point for TFP growth g.
inline SteadyState stationary_state(double g, const ModelParams& p) {
    if (!convergence_condition_holds(g, p)) {
        throw ConfigError("stationary_state: convergence condition beta*(1+g)^(1-eta) < 1 violated");
    }
    SteadyState ss;
    ss.r_gross = stationary_gross_rate(g, p);
    const double r = ss.r_gross - 1.0;
    if (!(r + p.delta > 0.0)) throw ConfigError("stationary_state: r + delta must be positive");
    ss.k_hat = std::pow(p.alpha / (r + p.delta), 1.0 / (1.0 - p.alpha)) * p.labor;
    ss.y_hat = output(ss.k_hat, 1.0, p.labor, p.alpha);
    ss.r_k = rental_rate(ss.k_hat, 1.0, p.labor, p);
    ss.w_hat = (1.0 - p.alpha) * ss.y_hat / p.labor;
    ss.c_hat = ss.y_hat + (1.0 - p.delta) * ss.k_hat - (1.0 + g) * ss.k_hat;
    if (!(ss.c_hat > 0.0)) throw ConfigError("stationary_state: steady-state consumption is not positive");
    return ss;
}

// ---------------------------------------------------------------------------
// AI-labor allocation

/// One atom of a finite-mixture household population.
struct PopulationAtom {
    double mass = 0.0;
    double capital = 0.0;
};

namespace detail {
inline double relative_weight(double k_own, double k_agg, double lambda) {
    if (k_own < 0.0) throw DomainError("labor_share: capital must be nonnegative");
    if (k_own == 0.0) {
        if (lambda > 0.0) return 0.0;
        if (lambda == 0.0) return 1.0;
        throw DomainError("labor_share: zero capital with negative lambda");
    }
    return std::pow(k_own / k_agg, lambda);
}
}  // namespace detail

/// Share of AI labor for a measure-zero household holding k_own when every
/// other household holds the aggregate k_agg (the normalizing integral is 1).
inline double labor_share(double k_own, double k_agg, double lambda) {
    if (!(k_agg > 0.0)) throw DomainError("labor_share: aggregate capital must be positive");
    return detail::relative_weight(k_own, k_agg, lambda);
}

/// Share of AI labor for a household holding k_own inside a finite mixture.
/// Shares integrate to one over the population.
inline double labor_share(double k_own, std::span<const PopulationAtom> population, double lambda) {
    double mass = 0.0;
    double k_agg = 0.0;
    for (const auto& atom : population) {
        if (atom.mass < 0.0) throw DomainError("labor_share: negative population mass");
        mass += atom.mass;
        k_agg += atom.mass * atom.capital;
    }
    if (!(mass > 0.0)) throw DomainError("labor_share: empty population");
    k_agg /= mass;
    if (!(k_agg > 0.0)) throw DomainError("labor_share: aggregate capital must be positive");
    double norm = 0.0;
    for (const auto& atom : population) norm += atom.mass * detail::relative_weight(atom.capital, k_agg, lambda);
    norm /= mass;
    return detail::relative_weight(k_own, k_agg, lambda) / norm;
}

/// d(share)/d(own capital) at the symmetric point, aggregate held fixed.
inline double labor_share_gradient(double k_agg, double lambda) {
    if (!(k_agg > 0.0)) throw DomainError("labor_share_gradient: aggregate capital must be positive");
    return lambda / k_agg;
}

/// Fraction of output not consumed; negative when capital is run down.
inline double savings_rate(double y, double c) {
    if (!(y > 0.0)) throw DomainError("savings_rate: output must be positive");
    return (y - c) / y;
}

// ---------------------------------------------------------------------------
// Detrended technology (A = 1 in the current period).

struct DetrendedFactors {
    double y_hat;
    double w_hat;
    double r_k;
    double resources;    // y_hat + (1-delta) k_hat
    double d_resources;  // d resources / d k_hat = 1 + r_k
    double d_r_k;        // d r_k / d k_hat
};

inline DetrendedFactors detrended_factors(double k_hat, const ModelParams& p) {
    if (!(k_hat > 0.0)) throw DomainError("detrended_factors: capital must be positive");
    DetrendedFactors f{};
    f.y_hat = output(k_hat, 1.0, p.labor, p.alpha);
    const double mpk = p.alpha * f.y_hat / k_hat;
    f.r_k = mpk - p.delta;
    f.w_hat = (1.0 - p.alpha) * f.y_hat / p.labor;
    f.resources = f.y_hat + (1.0 - p.delta) * k_hat;
    f.d_resources = 1.0 + f.r_k;
    f.d_r_k = -(1.0 - p.alpha) * mpk / k_hat;
    return f;
}

}  // namespace taicap
