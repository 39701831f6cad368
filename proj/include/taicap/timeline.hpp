#pragma once

// Beliefs over the arrival year of transformative AI: a negative beta-binomial
// count of monthly trials, aggregated to years, truncated at a finite horizon
// with the residual mass assigned to "never", and updated passively as years
// pass without arrival.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "taicap/errors.hpp"
#include "taicap/nelder_mead.hpp"

namespace taicap {

inline constexpr double kConservationTol = 1e-12;

struct NbbSpec {
    std::vector<int> n_support{1};
    std::vector<double> n_weights{1.0};
    double a = 1.0;
    double b = 1.0;
    int months_per_year = 12;
    int horizon_years = 60;
    // Explicit probability that the breakthrough process never starts.
    double never_weight = 0.0;
};

inline void validate(const NbbSpec& spec) {
    if (spec.n_support.empty() || spec.n_support.size() != spec.n_weights.size()) {
        throw ConfigError("NbbSpec: n_support and n_weights must be nonempty and the same length");
    }
    for (std::size_t i = 0; i < spec.n_support.size(); ++i) {
        if (spec.n_support[i] < 1) throw ConfigError("NbbSpec: breakthrough counts must be >= 1");
        if (i > 0 && spec.n_support[i] <= spec.n_support[i - 1]) {
            throw ConfigError("NbbSpec: n_support must be sorted and distinct");
        }
        if (!(spec.n_weights[i] >= 0.0)) throw ConfigError("NbbSpec: n_weights must be nonnegative");
    }
    const double total = std::accumulate(spec.n_weights.begin(), spec.n_weights.end(), 0.0);
    if (std::abs(total - 1.0) > kConservationTol) throw ConfigError("NbbSpec: n_weights must sum to 1");
    if (!(spec.a > 0.0 && spec.b > 0.0)) throw ConfigError("NbbSpec: beta shapes must be positive");
    if (spec.months_per_year < 1 || spec.horizon_years < 1) {
        throw ConfigError("NbbSpec: months_per_year and horizon_years must be positive");
    }
    if (!(spec.never_weight >= 0.0 && spec.never_weight <= 1.0)) {
        throw ConfigError("NbbSpec: never_weight must lie in [0,1]");
    }
}

namespace detail {
inline double log_beta(double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); }

inline double log_choose(long n, long k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}
}  // namespace detail

/// P(the n-th success arrives on trial k) when the per-trial success
/// probability is Beta(a, b): C(k-1, n-1) B(a+n, b+k-n) / B(a, b).
inline double nbb_trial_pmf(int n, double a, double b, long k) {
    if (n < 1) throw DomainError("nbb_trial_pmf: n must be >= 1");
    if (!(a > 0.0 && b > 0.0)) throw DomainError("nbb_trial_pmf: beta shapes must be positive");
    if (k < n) return 0.0;
    const double log_p = detail::log_choose(k - 1, n - 1) + detail::log_beta(a + n, b + static_cast<double>(k - n)) -
                         detail::log_beta(a, b);
    return std::exp(log_p);
}

/// pmf on trials 1..max_trial, first nonzero term in log space and the rest by
/// the ratio pmf(k+1)/pmf(k) = k/(k-n+1) * (b+k-n)/(a+b+k).
inline std::vector<double> nbb_trial_pmf_series(int n, double a, double b, long max_trial) {
    std::vector<double> pmf(static_cast<std::size_t>(std::max(0L, max_trial)), 0.0);
    if (max_trial < n) return pmf;
    double p = nbb_trial_pmf(n, a, b, n);
    pmf[static_cast<std::size_t>(n - 1)] = p;
    for (long k = n; k < max_trial; ++k) {
        const double kd = static_cast<double>(k);
        p *= kd / (kd - n + 1.0) * (b + kd - n) / (a + b + kd);
        pmf[static_cast<std::size_t>(k)] = p;
    }
    return pmf;
}

/// Mixture over n of the monthly pmf, months 1..horizon*months_per_year.
inline std::vector<double> monthly_probs(const NbbSpec& spec) {
    validate(spec);
    const long months = static_cast<long>(spec.horizon_years) * spec.months_per_year;
    std::vector<double> out(static_cast<std::size_t>(months), 0.0);
    for (std::size_t i = 0; i < spec.n_support.size(); ++i) {
        if (spec.n_weights[i] == 0.0) continue;
        const auto series = nbb_trial_pmf_series(spec.n_support[i], spec.a, spec.b, months);
        for (std::size_t m = 0; m < out.size(); ++m) out[m] += spec.n_weights[i] * series[m];
    }
    for (double& m : out) m *= 1.0 - spec.never_weight;
    return out;
}

// ---------------------------------------------------------------------------

class ArrivalDistribution {
public:
    ArrivalDistribution() = default;

    /// Validates nonnegativity and sum(annual) + never == 1 within 1e-12.
    ArrivalDistribution(std::vector<double> annual_probs, double p_never, std::string source_label = {})
        : annual_(std::move(annual_probs)), p_never_(p_never), label_(std::move(source_label)) {
        if (!(p_never_ >= 0.0)) throw ConfigError("ArrivalDistribution: p_never must be nonnegative");
        double total = p_never_;
        for (double p : annual_) {
            if (!(p >= 0.0)) throw ConfigError("ArrivalDistribution: probabilities must be nonnegative");
            total += p;
        }
        if (std::abs(total - 1.0) > kConservationTol) {
            throw ConfigError("ArrivalDistribution: probabilities and never-mass must sum to 1");
        }
        tails_.assign(annual_.size() + 1, 0.0);
        tails_[annual_.size()] = p_never_;
        for (std::size_t i = annual_.size(); i-- > 0;) tails_[i] = tails_[i + 1] + annual_[i];
    }

    /// Zero arrival probability in every year.
    static ArrivalDistribution never(int horizon_years, std::string label = "never") {
        return ArrivalDistribution(std::vector<double>(static_cast<std::size_t>(horizon_years), 0.0), 1.0,
                                   std::move(label));
    }

    const std::vector<double>& annual_probs() const noexcept { return annual_; }
    double p_never() const noexcept { return p_never_; }
    const std::string& source_label() const noexcept { return label_; }
    void set_source_label(std::string label) { label_ = std::move(label); }
    int horizon() const noexcept { return static_cast<int>(annual_.size()); }

    /// Unconditional probability of arrival in year t (1-based); zero outside 1..S.
    double prob(int t) const noexcept {
        if (t < 1 || t > horizon()) return 0.0;
        return annual_[static_cast<std::size_t>(t - 1)];
    }

    /// P(no arrival in years 1..t), summed from the tail for accuracy.
    double survival(int t) const noexcept {
        if (t <= 0) return 1.0;
        if (t >= horizon()) return p_never_;
        return tails_[static_cast<std::size_t>(t)];
    }

    double cdf(int t) const noexcept { return 1.0 - survival(t); }

    /// Hazard of arrival in year t given none through t-1. Zero when nothing survives.
    double period_hazard(int t) const noexcept {
        const double s = survival(t - 1);
        return s > 0.0 ? prob(t) / s : 0.0;
    }

private:
    std::vector<double> annual_;
    double p_never_ = 1.0;
    std::string label_;
    std::vector<double> tails_{1.0};
};

/// Aggregate monthly trials to years; everything not landing inside the
/// horizon becomes never-mass.
inline ArrivalDistribution annualize(const NbbSpec& spec, std::string label = "nbb") {
    const auto months = monthly_probs(spec);
    std::vector<double> annual(static_cast<std::size_t>(spec.horizon_years), 0.0);
    for (std::size_t m = 0; m < months.size(); ++m) annual[m / static_cast<std::size_t>(spec.months_per_year)] += months[m];
    double inside = 0.0;
    for (double p : annual) inside += p;
    const double never = std::max(0.0, 1.0 - inside);
    return ArrivalDistribution(std::move(annual), never, std::move(label));
}

/// true when a's CDF is at least b's at every year: a is more front-loaded.
inline bool cdf_dominates(const ArrivalDistribution& a, const ArrivalDistribution& b) {
    const int years = std::max(a.horizon(), b.horizon());
    for (int t = 1; t <= years; ++t) {
        if (a.cdf(t) < b.cdf(t) - kConservationTol) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Passive updating

struct BeliefState {
    ArrivalDistribution base;
    int elapsed_years = 0;
};

inline double survival_mass(const BeliefState& belief) { return belief.base.survival(belief.elapsed_years); }

/// P(arrival in year t | no arrival through elapsed_years).
inline double conditional_hazard(const BeliefState& belief, int t) {
    if (t <= belief.elapsed_years) throw DomainError("conditional_hazard: year already elapsed");
    const double s = survival_mass(belief);
    if (!(s > 0.0)) throw DomainError("conditional_hazard: no survival mass left");
    return belief.base.prob(t) / s;
}

/// P(never | no arrival through elapsed_years).
inline double conditional_never(const BeliefState& belief) {
    const double s = survival_mass(belief);
    if (!(s > 0.0)) throw DomainError("conditional_never: no survival mass left");
    return belief.base.p_never() / s;
}

inline BeliefState condition_on_no_arrival(const BeliefState& belief) {
    BeliefState next{belief.base, belief.elapsed_years + 1};
    if (!(survival_mass(next) > 0.0)) {
        throw DomainError("condition_on_no_arrival: arrival was certain by year " +
                          std::to_string(next.elapsed_years));
    }
    return next;
}

/// Remaining arrival probabilities (years elapsed+1..S) and never-mass,
/// renormalized to the surviving mass.
inline ArrivalDistribution conditional_distribution(const BeliefState& belief) {
    const double s = survival_mass(belief);
    if (!(s > 0.0)) throw DomainError("conditional_distribution: no survival mass left");
    std::vector<double> rest;
    double total = 0.0;
    for (int t = belief.elapsed_years + 1; t <= belief.base.horizon(); ++t) {
        rest.push_back(belief.base.prob(t) / s);
        total += rest.back();
    }
    const double never = std::max(0.0, 1.0 - total);
    return ArrivalDistribution(std::move(rest), never, belief.base.source_label());
}

// ---------------------------------------------------------------------------
// Fitting to forecast anchors

struct Anchor {
    int year = 0;
    double cumulative = 0.0;
};

struct FitSettings {
    int n_max = 10;
    int max_range_width = 3;  // uniform supports {n..n+w} for w = 1..max_range_width
    int months_per_year = 12;
    int horizon_years = 60;
    int max_evals = 3000;
    double ftol = 1e-15;
    double xtol = 1e-9;
    double warn_loss = 1e-6;
};

struct FitResult {
    NbbSpec spec;
    double loss = 0.0;
    std::vector<double> anchor_errors;  // fitted cdf minus anchor
    bool converged = false;
    bool flagged = false;
    std::string warning;
};

/// Throws ConfigError if anchors are empty, out of range or not ordered.
inline void validate_anchors(const std::vector<Anchor>& anchors, int horizon_years) {
    if (anchors.empty()) throw ConfigError("fit: no anchors given");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const auto& an = anchors[i];
        if (an.year < 1 || an.year > horizon_years) {
            throw ConfigError("fit: anchor year " + std::to_string(an.year) + " outside 1.." +
                              std::to_string(horizon_years));
        }
        if (!(an.cumulative > 0.0 && an.cumulative < 1.0)) {
            throw ConfigError("fit: anchor probability at year " + std::to_string(an.year) + " must lie in (0,1)");
        }
        if (i > 0 && an.year <= anchors[i - 1].year) throw ConfigError("fit: anchor years must be strictly increasing");
        if (i > 0 && an.cumulative < anchors[i - 1].cumulative) {
            throw ConfigError("fit: anchor probabilities must be nondecreasing");
        }
    }
}

namespace detail {

struct SupportCandidate {
    std::vector<int> n_support;
    std::vector<double> n_weights;
};

inline std::vector<SupportCandidate> support_grid(const FitSettings& s) {
    std::vector<SupportCandidate> out;
    for (int n = 1; n <= s.n_max; ++n) out.push_back({{n}, {1.0}});
    for (int w = 1; w <= s.max_range_width; ++w) {
        for (int lo = 1; lo + w <= s.n_max; ++lo) {
            SupportCandidate c;
            for (int n = lo; n <= lo + w; ++n) {
                c.n_support.push_back(n);
                c.n_weights.push_back(1.0 / static_cast<double>(w + 1));
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

/// Squared error of the candidate's cumulative curve against the anchors.
inline double anchor_loss(const SupportCandidate& c, double a, double b, const std::vector<Anchor>& anchors,
                          int months_per_year, std::vector<double>* errors = nullptr) {
    const long months = static_cast<long>(anchors.back().year) * months_per_year;
    std::vector<double> cum(static_cast<std::size_t>(months), 0.0);
    for (std::size_t i = 0; i < c.n_support.size(); ++i) {
        const auto series = nbb_trial_pmf_series(c.n_support[i], a, b, months);
        for (std::size_t m = 0; m < cum.size(); ++m) cum[m] += c.n_weights[i] * series[m];
    }
    for (std::size_t m = 1; m < cum.size(); ++m) cum[m] += cum[m - 1];
    double loss = 0.0;
    if (errors) errors->clear();
    for (const auto& an : anchors) {
        const double e = cum[static_cast<std::size_t>(an.year * months_per_year - 1)] - an.cumulative;
        if (errors) errors->push_back(e);
        loss += e * e;
    }
    return loss;
}

}  // namespace detail

/// Least-squares fit of an NbbSpec to cumulative anchors: grid over breakthrough
/// supports, Nelder-Mead over (log a, log b) for each.
inline FitResult fit_to_anchors(const std::vector<Anchor>& anchors, const FitSettings& settings = {}) {
    validate_anchors(anchors, settings.horizon_years);

    const std::array<double, 4> starts_a{0.2, 0.7, 2.0, 6.0};
    const std::array<double, 5> starts_b{2.0, 10.0, 50.0, 250.0, 1500.0};

    FitResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (const auto& cand : detail::support_grid(settings)) {
        auto objective = [&](const std::array<double, 2>& x) {
            return detail::anchor_loss(cand, std::exp(x[0]), std::exp(x[1]), anchors, settings.months_per_year);
        };
        // Seed from the best point of a coarse shape grid.
        std::array<double, 2> seed{};
        double seed_val = std::numeric_limits<double>::infinity();
        for (double a0 : starts_a) {
            for (double b0 : starts_b) {
                const std::array<double, 2> x{std::log(a0), std::log(b0)};
                const double v = objective(x);
                if (v < seed_val) {
                    seed_val = v;
                    seed = x;
                }
            }
        }
        auto res = nelder_mead<2>(objective, seed, 0.5, settings.ftol, settings.xtol, settings.max_evals);
        // One restart from the optimum to shake off a collapsed simplex.
        res = nelder_mead<2>(objective, res.x, 0.1, settings.ftol, settings.xtol, settings.max_evals);
        if (res.value < best.loss) {
            best.loss = res.value;
            best.converged = res.converged;
            best.spec.n_support = cand.n_support;
            best.spec.n_weights = cand.n_weights;
            best.spec.a = std::exp(res.x[0]);
            best.spec.b = std::exp(res.x[1]);
        }
    }
    best.spec.months_per_year = settings.months_per_year;
    best.spec.horizon_years = settings.horizon_years;
    detail::anchor_loss({best.spec.n_support, best.spec.n_weights}, best.spec.a, best.spec.b, anchors,
                        settings.months_per_year, &best.anchor_errors);

    bool flat = false;
    for (std::size_t i = 1; i < anchors.size(); ++i) flat = flat || anchors[i].cumulative == anchors[i - 1].cumulative;
    if (flat) {
        best.flagged = true;
        best.warning = "anchors are not strictly increasing; no strictly increasing CDF can match them exactly";
    } else if (!best.converged) {
        best.flagged = true;
        best.warning = "simplex search hit its evaluation cap";
    } else if (best.loss > settings.warn_loss) {
        best.flagged = true;
        best.warning = "best fit loss exceeds warn_loss";
    }
    return best;
}

}  // namespace taicap
