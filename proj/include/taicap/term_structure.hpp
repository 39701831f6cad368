#pragma once

// Bond rates, rental rates, savings and the strategic wedge read off a solved
// spine. Rates are level (not detrended) annual rates: growth factors between
// the pricing date and the payoff date are applied explicitly.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "taicap/econ_core.hpp"
#include "taicap/errors.hpp"
#include "taicap/timeline.hpp"
#include "taicap/transition.hpp"

namespace taicap {

/// Conditional probabilities, seen from year t, of each way the next h years
/// can unfold: arrival in year t+1..t+h, or no arrival through t+h.
struct HorizonWeights {
    std::vector<double> arrival;  // arrival[i] = P(arrival in t+1+i | none through t)
    double no_arrival = 0.0;

    double total() const {
        double s = no_arrival;
        for (double w : arrival) s += w;
        return s;
    }
};

inline BeliefState beliefs_at(const ArrivalDistribution& beliefs, int t) {
    BeliefState state{beliefs, 0};
    for (int i = 0; i < t; ++i) state = condition_on_no_arrival(state);
    return state;
}

inline HorizonWeights horizon_weights(int t, int h, const ArrivalDistribution& beliefs) {
    if (t < 0 || h < 1) throw DomainError("horizon_weights: need t >= 0 and h >= 1");
    const BeliefState state = beliefs_at(beliefs, t);
    HorizonWeights w;
    w.arrival.reserve(static_cast<std::size_t>(h));
    for (int s = t + 1; s <= t + h; ++s) w.arrival.push_back(conditional_hazard(state, s));
    w.no_arrival = beliefs.survival(t + h) / survival_mass(state);
    return w;
}

namespace detail {

inline void check_horizon(int t, int h, const SpinePath& spine) {
    if (t < 0 || h < 1 || t + h > spine.terminal_year()) {
        throw DomainError("rate query outside the solved horizon (t=" + std::to_string(t) + ", h=" +
                          std::to_string(h) + ", T=" + std::to_string(spine.terminal_year()) + ")");
    }
}

/// Detrended consumption in year t+h on the branch arriving in year s
/// (t < s <= t+h); past the branch horizon the path sits at the steady state.
inline double branch_consumption(const PostTaiPath& b, int offset, const ModelParams& p) {
    if (offset < static_cast<int>(b.c_hat.size())) return b.c_hat[static_cast<std::size_t>(offset)];
    return stationary_state(p.g_tai, p).c_hat;
}

inline double branch_rental(const PostTaiPath& b, int offset, const ModelParams& p) {
    if (offset < static_cast<int>(b.r_k.size())) return b.r_k[static_cast<std::size_t>(offset)];
    return stationary_state(p.g_tai, p).r_k;
}

/// E_t[u'(C_{t+h})] / A_t^-eta.
inline double expected_marginal_utility(int t, int h, const SpinePath& spine, const ArrivalDistribution& beliefs,
                                        const ModelParams& p) {
    const auto w = horizon_weights(t, h, beliefs);
    const double Gsq = 1.0 + p.g_sq;
    const double Gtai = 1.0 + p.g_tai;
    double e = w.no_arrival * std::pow(Gsq, -p.eta * h) * mu(spine.c_hat[static_cast<std::size_t>(t + h)], p.eta);
    for (int i = 0; i < h; ++i) {
        const double weight = w.arrival[static_cast<std::size_t>(i)];
        if (weight == 0.0) continue;
        const int s = t + 1 + i;
        const PostTaiPath* b = spine.branch(s);
        if (!b) throw DomainError("missing branch for arrival year " + std::to_string(s));
        const int offset = t + h - s;
        const double growth = std::pow(Gsq, s - t) * std::pow(Gtai, offset);
        e += weight * std::pow(growth, -p.eta) * mu(branch_consumption(*b, offset, p), p.eta);
    }
    return e;
}

}  // namespace detail

/// Annualized zero-coupon rate for a bond bought in year t maturing in t+h,
/// conditional on no arrival through t.
inline double horizon_rate(int t, int h, const SpinePath& spine, const ArrivalDistribution& beliefs,
                           const ModelParams& p) {
    detail::check_horizon(t, h, spine);
    const double e = detail::expected_marginal_utility(t, h, spine, beliefs, p);
    const double ratio = detail::mu(spine.c_hat[static_cast<std::size_t>(t)], p.eta) / (std::pow(p.beta, h) * e);
    return std::pow(ratio, 1.0 / h) - 1.0;
}

/// One-year bond rate set in year t (earned in t+1).
inline double one_year_rate(int t, const SpinePath& spine, const ArrivalDistribution& beliefs, const ModelParams& p) {
    return horizon_rate(t, 1, spine, beliefs, p);
}

/// The three terms of the bond/capital no-arbitrage condition at year t, in
/// A_t^-eta marginal-utility units:
///   bond_term - rental_term - premium_term = 0
/// with bond_term = r_b E[u'], rental_term = E[r_k u'], premium_term = premium / beta.
struct WedgeTerms {
    double bond_term = 0.0;
    double rental_term = 0.0;
    double premium_term = 0.0;
    double expected_mu = 0.0;
    double wedge = 0.0;  // premium_term / expected_mu, in rate units

    double residual() const { return bond_term - rental_term - premium_term; }
};

inline WedgeTerms wedge_decomposition(int t, const SpinePath& spine, const ArrivalDistribution& beliefs,
                                      const ModelParams& p) {
    detail::check_horizon(t, 1, spine);
    const auto w = horizon_weights(t, 1, beliefs);
    const double Geta = std::pow(1.0 + p.g_sq, -p.eta);
    const auto next = static_cast<std::size_t>(t + 1);

    WedgeTerms out;
    const double mu_sq = Geta * detail::mu(spine.c_hat[next], p.eta);
    out.expected_mu = w.no_arrival * mu_sq;
    out.rental_term = w.no_arrival * spine.r_k[next] * mu_sq;
    if (w.arrival[0] > 0.0) {
        const PostTaiPath* b = spine.branch(t + 1);
        if (!b) throw DomainError("missing branch for arrival year " + std::to_string(t + 1));
        const double mu_tai = Geta * detail::mu(b->c_hat[0], p.eta);
        out.expected_mu += w.arrival[0] * mu_tai;
        out.rental_term += w.arrival[0] * b->r_k[0] * mu_tai;
    }
    out.bond_term = one_year_rate(t, spine, beliefs, p) * out.expected_mu;
    out.premium_term = spine.premium[static_cast<std::size_t>(t)] / p.beta;
    out.wedge = out.premium_term / out.expected_mu;
    return out;
}

/// Relative residual of the h-year capital-holding condition at year t:
///   u'(C_t) = beta^h E_t[R_{t,t+h} u'(C_{t+h})]
///             + sum_{tau=t}^{t+h-1} beta^(tau-t) P(no arrival through tau) R_{t,tau} premium_tau
/// where R compounds gross rental returns along the realized path. It holds
/// exactly when every one-period capital Euler equation does.
inline double capital_horizon_residual(int t, int h, const SpinePath& spine, const ArrivalDistribution& beliefs,
                                       const ModelParams& p) {
    detail::check_horizon(t, h, spine);
    const auto w = horizon_weights(t, h, beliefs);
    const double Gsq = 1.0 + p.g_sq;
    const double Gtai = 1.0 + p.g_tai;
    const auto at = [](const std::vector<double>& v, int i) { return v[static_cast<std::size_t>(i)]; };

    // Compounded spine returns R_{t,t+m}, m = 0..h.
    std::vector<double> spine_gross(static_cast<std::size_t>(h) + 1, 1.0);
    for (int m = 1; m <= h; ++m) spine_gross[static_cast<std::size_t>(m)] = spine_gross[static_cast<std::size_t>(m - 1)] * (1.0 + at(spine.r_k, t + m));

    double rhs = w.no_arrival * std::pow(p.beta, h) * spine_gross.back() * std::pow(Gsq, -p.eta * h) *
                 detail::mu(at(spine.c_hat, t + h), p.eta);
    for (int i = 0; i < h; ++i) {
        const double weight = w.arrival[static_cast<std::size_t>(i)];
        if (weight == 0.0) continue;
        const int s = t + 1 + i;
        const PostTaiPath* b = spine.branch(s);
        if (!b) throw DomainError("missing branch for arrival year " + std::to_string(s));
        const int offset = t + h - s;
        double gross = spine_gross[static_cast<std::size_t>(s - t)];
        for (int j = 1; j <= offset; ++j) gross *= 1.0 + detail::branch_rental(*b, j, p);
        const double growth = std::pow(Gsq, s - t) * std::pow(Gtai, offset);
        rhs += weight * std::pow(p.beta, h) * gross * std::pow(growth, -p.eta) *
               detail::mu(detail::branch_consumption(*b, offset, p), p.eta);
    }
    const BeliefState state = beliefs_at(beliefs, t);
    for (int tau = t; tau < t + h; ++tau) {
        const double survive = beliefs.survival(tau) / survival_mass(state);
        rhs += std::pow(p.beta, tau - t) * survive * spine_gross[static_cast<std::size_t>(tau - t)] *
               std::pow(Gsq, -p.eta * (tau - t)) * at(spine.premium, tau);
    }
    const double lhs = detail::mu(at(spine.c_hat, t), p.eta);
    return (lhs - rhs) / lhs;
}

// ---------------------------------------------------------------------------

/// Reported quantities for a bond or capital bought in year t, labeled
/// year = t + 1 (year 1 is the first year beliefs are held), conditional on
/// no arrival through t.
struct RateRow {
    int year = 0;
    double k_hat = 0.0;
    double c_hat = 0.0;
    double y_hat = 0.0;
    double w_hat = 0.0;
    double rate_1y = 0.0;
    double rate_30y = 0.0;
    double rental = 0.0;   // r_k in year t+1 on capital chosen in year t
    double savings = 0.0;  // (Y - C) / Y in year t
    double wedge = 0.0;    // strategic premium in rate units; equals rate_1y - rental
    double hazard = 0.0;   // P(arrival in t+1 | none through t)
};

using RateTable = std::vector<RateRow>;

inline RateTable build_rate_table(const SpinePath& spine, const ArrivalDistribution& beliefs, const ModelParams& p,
                                  int reporting_horizon = 30, int long_horizon = 30) {
    RateTable table;
    for (int t = 0; t < reporting_horizon && t + long_horizon <= spine.terminal_year(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        RateRow row;
        row.year = t + 1;
        row.k_hat = spine.k_hat[i];
        row.c_hat = spine.c_hat[i];
        row.y_hat = spine.y_hat[i];
        row.w_hat = spine.w_hat[i];
        row.rate_1y = one_year_rate(t, spine, beliefs, p);
        row.rate_30y = horizon_rate(t, long_horizon, spine, beliefs, p);
        row.rental = spine.r_k[i + 1];
        row.savings = savings_rate(spine.y_hat[i], spine.c_hat[i]);
        row.wedge = wedge_decomposition(t, spine, beliefs, p).wedge;
        row.hazard = spine.hazards[i + 1];
        table.push_back(row);
    }
    return table;
}

}  // namespace taicap
