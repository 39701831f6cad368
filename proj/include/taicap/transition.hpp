#pragma once

// Equilibrium transition paths in detrended units. The no-arrival spine and
// one deterministic post-arrival branch per possible arrival year are solved
// as stacked Euler-residual systems by damped Newton. Each spine Newton step
// uses the exact sensitivity of every branch to its arrival-year capital.
//
// Timing: TFP in the arrival year is inherited from the pre-arrival trend and
// g_tai governs growth from the arrival year onward, so capital and factor
// prices in the arrival year do not depend on whether TAI has arrived.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "taicap/econ_core.hpp"
#include "taicap/errors.hpp"
#include "taicap/parallel.hpp"
#include "taicap/timeline.hpp"
#include "taicap/tridiagonal.hpp"

namespace taicap {

struct SolverSettings {
    int terminal_year = 150;
    int branch_horizon = 120;
    double tol = 1e-8;
    int max_iter = 500;
    double damping = 0.5;  // backtracking factor of the Newton line search
    // Relative distance of the last free capital entry from its steady state
    // allowed on every path; set to infinity for deliberately short toys.
    double terminal_tol = 1e-6;
    bool include_premium = true;
    int threads = 0;  // 0 = hardware concurrency
};

inline void validate(const SolverSettings& s) {
    if (s.terminal_year < 2) throw ConfigError("terminal_year must be at least 2");
    if (s.branch_horizon < 1) throw ConfigError("branch_horizon must be at least 1");
    if (!(s.tol > 0.0)) throw ConfigError("tol must be positive");
    if (s.max_iter < 1) throw ConfigError("max_iter must be positive");
    if (!(s.damping > 0.0 && s.damping <= 1.0)) throw ConfigError("damping must lie in (0,1]");
    if (!(s.terminal_tol > 0.0)) throw ConfigError("terminal_tol must be positive");
}

struct PostTaiPath {
    int arrival_year = 0;
    // Index 0 is the arrival year; capital there is predetermined.
    std::vector<double> k_hat, c_hat, y_hat, w_hat, r_k;
    double k_terminal = 0.0;       // capital after the last period, pinned to the steady state
    std::vector<double> dk_dk0;    // d k_hat[j] / d k_hat[0]
    bool converged = false;
    int iterations = 0;
    double max_residual = 0.0;
    double terminal_gap = 0.0;     // |k_hat.back() - k_ss| / k_ss
};

struct SpinePath {
    std::vector<double> k_hat, c_hat, y_hat, w_hat, r_k;  // years 0..T
    // premium[t]: strategic term of the year-t capital Euler equation, in
    // year-t marginal-utility units (A_t^-eta normalization).
    std::vector<double> premium;
    std::vector<double> hazards;  // hazards[t] = P(arrival in t | none before t); hazards[0] = 0
    std::vector<PostTaiPath> branches;
    std::vector<int> branch_index;  // arrival year -> index into branches, -1 when none
    int iterations = 0;
    double max_residual = 0.0;
    double lambda = 0.0;

    int terminal_year() const noexcept { return static_cast<int>(k_hat.size()) - 1; }

    const PostTaiPath* branch(int arrival_year) const noexcept {
        if (arrival_year < 0 || arrival_year >= static_cast<int>(branch_index.size())) return nullptr;
        const int i = branch_index[static_cast<std::size_t>(arrival_year)];
        return i < 0 ? nullptr : &branches[static_cast<std::size_t>(i)];
    }
};

namespace detail {

inline double mu(double c, double eta) { return eta == 1.0 ? 1.0 / c : std::pow(c, -eta); }
inline double mu_prime(double c, double eta) { return -eta * mu(c, eta) / c; }

// Stand-in for an Euler residual when implied consumption is not positive.
inline constexpr double kInfeasibleResidual = 1e100;

template <class State>
struct NewtonOutcome {
    State state;
    std::vector<double> x;
    int iterations = 0;
    double max_residual = 0.0;
    int worst = -1;
    bool converged = false;
};

inline double max_abs(const std::vector<double>& v, int* where = nullptr) {
    double m = 0.0;
    int w = v.empty() ? -1 : 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > m) {
            m = std::abs(v[i]);
            w = static_cast<int>(i);
        }
    }
    if (where) *where = w;
    return m;
}

inline double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// Damped Newton with backtracking on a tridiagonal residual system. eval(x)
/// returns std::nullopt for infeasible points, otherwise a State exposing
/// `system` (residual in rhs, Jacobian in the bands).
template <class State, class Eval>
NewtonOutcome<State> damped_newton(std::vector<double> x, Eval&& eval, double tol, int max_iter, double damping) {
    std::optional<State> cur = eval(x);
    if (!cur) throw InfeasibleError("initial guess implies non-positive consumption or capital");
    NewtonOutcome<State> out{std::move(*cur), {}};
    double last_step = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        const double m = max_abs(out.state.system.rhs, &out.worst);
        out.max_residual = m;
        out.iterations = it;
        if (m <= tol && last_step <= tol) {
            out.converged = true;
            break;
        }
        if (it >= max_iter) break;
        if (x.empty()) {
            out.converged = m <= tol;
            break;
        }

        TridiagonalSystem lin = out.state.system;
        for (double& r : lin.rhs) r = -r;
        std::vector<double> step;
        try {
            step = solve_tridiagonal(std::move(lin));
        } catch (const DomainError&) {
            break;
        }

        const double merit = sum_sq(out.state.system.rhs);
        double theta = 1.0;
        bool accepted = false;
        const int max_backtracks = damping < 1.0 ? 60 : 1;
        for (int ls = 0; ls < max_backtracks; ++ls, theta *= damping) {
            std::vector<double> trial(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + theta * step[i];
            std::optional<State> next = eval(trial);
            if (!next) continue;
            const double trial_merit = sum_sq(next->system.rhs);
            if (trial_merit <= merit * (1.0 - 1e-4 * theta) || max_abs(next->system.rhs) <= tol ||
                (m <= tol && trial_merit <= merit)) {
                x = std::move(trial);
                out.state = std::move(*next);
                last_step = theta * max_abs(step);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Stalled at rounding level after reaching the residual tolerance.
            out.converged = m <= tol;
            break;
        }
    }
    out.x = std::move(x);
    return out;
}

// ---------------------------------------------------------------------------
// Post-arrival branch

struct BranchState {
    TridiagonalSystem system;
    std::vector<double> k;  // k_0..k_{H+1}
    std::vector<double> c;  // c_0..c_H
};

inline std::optional<BranchState> eval_branch(double k0, double k_end, const std::vector<double>& interior,
                                              const ModelParams& p) {
    const std::size_t H = interior.size();
    BranchState st;
    st.k.resize(H + 2);
    st.k[0] = k0;
    for (std::size_t j = 0; j < H; ++j) {
        if (!(interior[j] > 0.0) || !std::isfinite(interior[j])) return std::nullopt;
        st.k[j + 1] = interior[j];
    }
    st.k[H + 1] = k_end;

    const double G = 1.0 + p.g_tai;
    const double disc = p.beta * std::pow(G, -p.eta);
    std::vector<DetrendedFactors> f(H + 1);
    st.c.resize(H + 1);
    for (std::size_t j = 0; j <= H; ++j) {
        f[j] = detrended_factors(st.k[j], p);
        st.c[j] = f[j].resources - G * st.k[j + 1];
        if (!(st.c[j] > 0.0)) return std::nullopt;
    }
    st.system = TridiagonalSystem(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double mu0 = mu(st.c[j], p.eta);
        const double mu1 = mu(st.c[j + 1], p.eta);
        const double d0 = mu_prime(st.c[j], p.eta);
        const double d1 = mu_prime(st.c[j + 1], p.eta);
        const double gross = 1.0 + f[j + 1].r_k;
        st.system.rhs[j] = mu0 - disc * gross * mu1;
        st.system.sub[j] = d0 * f[j].d_resources;  // d/dk_j (unused for j = 0)
        st.system.diag[j] = -G * d0 - disc * (f[j + 1].d_r_k * mu1 + gross * d1 * f[j + 1].d_resources);
        st.system.sup[j] = disc * gross * d1 * G;  // d/dk_{j+2}
    }
    return st;
}

}  // namespace detail

/// Perfect-foresight path after arrival, starting from predetermined detrended
/// capital k0_hat and ending at the g_tai steady state after branch_horizon
/// periods. `warm` (a branch solved at nearby capital) seeds the guess.
inline PostTaiPath solve_post_tai_branch(double k0_hat, const ModelParams& p, const SolverSettings& s,
                                         const PostTaiPath* warm = nullptr) {
    if (!(k0_hat > 0.0)) throw DomainError("solve_post_tai_branch: arrival capital must be positive");
    if (!convergence_condition_holds(p.g_tai, p)) {
        throw ConfigError("solve_post_tai_branch: convergence condition beta*(1+g_tai)^(1-eta) < 1 violated");
    }
    const SteadyState ss = stationary_state(p.g_tai, p);
    const std::size_t H = static_cast<std::size_t>(s.branch_horizon);

    std::vector<double> guess(H);
    bool have_guess = false;
    if (warm && warm->k_hat.size() == H + 1 && warm->dk_dk0.size() == H + 1) {
        const double dk0 = k0_hat - warm->k_hat[0];
        for (std::size_t j = 0; j < H; ++j) guess[j] = warm->k_hat[j + 1] + warm->dk_dk0[j + 1] * dk0;
        have_guess = detail::eval_branch(k0_hat, ss.k_hat, guess, p).has_value();
    }
    for (double rho : {0.6, 0.3, 0.1}) {
        if (have_guess) break;
        double gap = k0_hat - ss.k_hat;
        for (std::size_t j = 0; j < H; ++j) {
            gap *= rho;
            guess[j] = ss.k_hat + gap;
        }
        have_guess = detail::eval_branch(k0_hat, ss.k_hat, guess, p).has_value();
    }
    if (!have_guess) throw InfeasibleError("solve_post_tai_branch: no feasible starting path");

    auto eval = [&](const std::vector<double>& x) { return detail::eval_branch(k0_hat, ss.k_hat, x, p); };
    auto res = detail::damped_newton<detail::BranchState>(guess, eval, s.tol, s.max_iter, s.damping);
    if (!res.converged) {
        throw ConvergenceError("post-TAI branch did not converge (largest residual " +
                                   std::to_string(res.max_residual) + " at offset " + std::to_string(res.worst) + ")",
                               res.max_residual, res.worst);
    }

    const auto& st = res.state;
    PostTaiPath out;
    out.k_hat.assign(st.k.begin(), st.k.begin() + static_cast<std::ptrdiff_t>(H + 1));
    out.k_terminal = st.k[H + 1];
    out.c_hat = st.c;
    out.y_hat.resize(H + 1);
    out.w_hat.resize(H + 1);
    out.r_k.resize(H + 1);
    for (std::size_t j = 0; j <= H; ++j) {
        const auto f = detrended_factors(out.k_hat[j], p);
        out.y_hat[j] = f.y_hat;
        out.w_hat[j] = f.w_hat;
        out.r_k[j] = f.r_k;
    }
    // Sensitivity to arrival capital: J dk = -dE/dk0, nonzero only in row 0.
    out.dk_dk0.assign(H + 1, 0.0);
    out.dk_dk0[0] = 1.0;
    if (H > 0) {
        TridiagonalSystem sens = st.system;
        std::fill(sens.rhs.begin(), sens.rhs.end(), 0.0);
        sens.rhs[0] = -st.system.sub[0];
        const auto dk = solve_tridiagonal(std::move(sens));
        for (std::size_t j = 0; j < H; ++j) out.dk_dk0[j + 1] = dk[j];
    }
    out.converged = true;
    out.iterations = res.iterations;
    out.max_residual = res.max_residual;
    out.terminal_gap = std::abs(out.k_hat.back() - ss.k_hat) / ss.k_hat;
    return out;
}

/// sum_{j>=0} beta^(j+1) (1+g_tai)^((1-eta) j) w_hat_j u'(c_hat_j) along the
/// branch, the tail past the horizon summed in closed form at the steady state.
/// This is the value of one extra unit of AI labor in arrival-year units.
inline double wage_value_sum(const PostTaiPath& branch, const ModelParams& p) {
    const double q = std::pow(1.0 + p.g_tai, 1.0 - p.eta);
    if (!(p.beta * q < 1.0)) {
        throw ConfigError("wage_value_sum: convergence condition beta*(1+g_tai)^(1-eta) < 1 violated");
    }
    double sum = 0.0;
    double weight = p.beta;
    for (std::size_t j = 0; j < branch.c_hat.size(); ++j) {
        sum += weight * branch.w_hat[j] * detail::mu(branch.c_hat[j], p.eta);
        weight *= p.beta * q;
    }
    const SteadyState ss = stationary_state(p.g_tai, p);
    sum += weight * ss.w_hat * detail::mu(ss.c_hat, p.eta) / (1.0 - p.beta * q);
    return sum;
}

namespace detail {

/// wage_value_sum and its derivative with respect to arrival capital.
inline std::pair<double, double> wage_value_with_derivative(const PostTaiPath& branch, const ModelParams& p) {
    const double G = 1.0 + p.g_tai;
    const double q = std::pow(G, 1.0 - p.eta);
    const std::size_t n = branch.c_hat.size();
    double deriv = 0.0;
    double weight = p.beta;
    for (std::size_t j = 0; j < n; ++j) {
        const auto f = detrended_factors(branch.k_hat[j], p);
        const double dw = p.alpha * f.w_hat / branch.k_hat[j];
        const double k_next_sens = j + 1 < n ? branch.dk_dk0[j + 1] : 0.0;
        const double dc = f.d_resources * branch.dk_dk0[j] - G * k_next_sens;
        deriv += weight * (dw * branch.dk_dk0[j] * mu(branch.c_hat[j], p.eta) +
                           branch.w_hat[j] * mu_prime(branch.c_hat[j], p.eta) * dc);
        weight *= p.beta * q;
    }
    return {wage_value_sum(branch, p), deriv};
}

}  // namespace detail

/// hazard * (lambda / k_next_hat) * wage_value_sum(branch): extra marginal value
/// of capital through its claim on AI labor, in arrival-year units.
inline double strategic_premium(const PostTaiPath& branch, double k_next_hat, double hazard, const ModelParams& p) {
    if (!(k_next_hat > 0.0)) throw DomainError("strategic_premium: capital must be positive");
    if (hazard == 0.0 || p.lambda == 0.0) return 0.0;
    return hazard * labor_share_gradient(k_next_hat, p.lambda) * wage_value_sum(branch, p);
}

/// Per-period hazards h_0..h_T implied by the beliefs, h_0 = 0.
inline std::vector<double> spine_hazards(const ArrivalDistribution& beliefs, int terminal_year) {
    std::vector<double> h(static_cast<std::size_t>(terminal_year) + 1, 0.0);
    for (int t = 1; t <= terminal_year && t <= beliefs.horizon(); ++t) {
        const BeliefState state{beliefs, t - 1};
        if (survival_mass(state) > 0.0) h[static_cast<std::size_t>(t)] = conditional_hazard(state, t);
    }
    return h;
}

namespace detail {

struct BranchSummary {
    double c0 = 0.0;         // arrival-year consumption
    double dc0 = 0.0;        // d c0 / d k0
    double value = 0.0;      // wage_value_sum
    double dvalue = 0.0;     // d value / d k0
};

inline BranchSummary summarize(const PostTaiPath& b, const ModelParams& p) {
    BranchSummary s;
    s.c0 = b.c_hat[0];
    const auto f = detrended_factors(b.k_hat[0], p);
    s.dc0 = f.d_resources - (1.0 + p.g_tai) * (b.dk_dk0.size() > 1 ? b.dk_dk0[1] : 0.0);
    std::tie(s.value, s.dvalue) = wage_value_with_derivative(b, p);
    return s;
}

struct EulerRow {
    double residual = 0.0;
    double d_k0 = 0.0;  // d/dk_t
    double d_k1 = 0.0;  // d/dk_{t+1}
    double d_k2 = 0.0;  // d/dk_{t+2}
};

/// Spine capital Euler equation at year t in A_t^-eta units:
///   u'(c_t) - beta G^-eta (1+r_{t+1}) [h u'(c^TAI_{t+1}) + (1-h) u'(c_{t+1})]
///           - G^-eta h (lambda / k_{t+1}) V_{t+1}
/// with G = 1 + g_sq. `branch` is needed only when h > 0.
inline EulerRow spine_euler_row(double k0, double k1, double k2, double h, const BranchSummary* branch,
                                const ModelParams& p, bool include_premium) {
    const double G = 1.0 + p.g_sq;
    const double Geta = std::pow(G, -p.eta);
    const auto f0 = detrended_factors(k0, p);
    const auto f1 = detrended_factors(k1, p);
    const double c0 = f0.resources - G * k1;
    const double c1 = f1.resources - G * k2;
    EulerRow row;
    if (!(c0 > 0.0)) {
        row.residual = kInfeasibleResidual;
        return row;
    }
    if (!(c1 > 0.0) && h < 1.0) {
        row.residual = -kInfeasibleResidual;
        return row;
    }
    if (h > 0.0 && !(branch && branch->c0 > 0.0)) {
        row.residual = -kInfeasibleResidual;
        return row;
    }
    const double gross = 1.0 + f1.r_k;
    const double mu_sq = h < 1.0 ? mu(c1, p.eta) : 0.0;
    const double dmu_sq = h < 1.0 ? mu_prime(c1, p.eta) : 0.0;
    const double mu_tai = h > 0.0 ? mu(branch->c0, p.eta) : 0.0;
    const double dmu_tai = h > 0.0 ? mu_prime(branch->c0, p.eta) : 0.0;
    const double expect = h * mu_tai + (1.0 - h) * mu_sq;
    const double d_expect = h * dmu_tai * (h > 0.0 ? branch->dc0 : 0.0) + (1.0 - h) * dmu_sq * f1.d_resources;

    double prem = 0.0, d_prem = 0.0;
    if (include_premium && h > 0.0 && p.lambda != 0.0) {
        prem = Geta * h * p.lambda * branch->value / k1;
        d_prem = Geta * h * p.lambda * (branch->dvalue / k1 - branch->value / (k1 * k1));
    }
    row.residual = mu(c0, p.eta) - p.beta * Geta * gross * expect - prem;
    row.d_k0 = mu_prime(c0, p.eta) * f0.d_resources;
    row.d_k1 = -G * mu_prime(c0, p.eta) - p.beta * Geta * (f1.d_r_k * expect + gross * d_expect) - d_prem;
    row.d_k2 = p.beta * Geta * gross * (1.0 - h) * dmu_sq * G;
    return row;
}

}  // namespace detail

/// Branch lookup used by pre_tai_euler_residual: arrival year -> path or null.
struct BranchSet {
    const std::vector<PostTaiPath>* paths = nullptr;
    const std::vector<int>* index = nullptr;

    const PostTaiPath* at(int year) const noexcept {
        if (!paths || !index || year < 0 || year >= static_cast<int>(index->size())) return nullptr;
        const int i = (*index)[static_cast<std::size_t>(year)];
        return i < 0 ? nullptr : &(*paths)[static_cast<std::size_t>(i)];
    }
};

/// Capital Euler residual of the no-arrival path at year t. k_path holds
/// years 0..T and hazards follows spine_hazards. Non-positive implied
/// consumption yields a +/-1e100 residual rather than an exception.
inline double pre_tai_euler_residual(int t, const std::vector<double>& k_path, const BranchSet& branches,
                                     const std::vector<double>& hazards, const ModelParams& p,
                                     bool include_premium = true) {
    if (t < 0 || t + 2 >= static_cast<int>(k_path.size())) throw DomainError("pre_tai_euler_residual: year out of range");
    const auto tt = static_cast<std::size_t>(t);
    const double h = tt + 1 < hazards.size() ? hazards[tt + 1] : 0.0;
    std::optional<detail::BranchSummary> summary;
    if (h > 0.0) {
        const PostTaiPath* b = branches.at(t + 1);
        if (!b) throw DomainError("pre_tai_euler_residual: missing branch for arrival year " + std::to_string(t + 1));
        summary = detail::summarize(*b, p);
    }
    return detail::spine_euler_row(k_path[tt], k_path[tt + 1], k_path[tt + 2], h, summary ? &*summary : nullptr, p,
                                   include_premium)
        .residual;
}

namespace detail {

struct SpineState {
    TridiagonalSystem system;
    std::vector<PostTaiPath> branches;  // per arrival year 1..S (empty where hazard is zero)
};

class SpineProblem {
public:
    SpineProblem(const ModelParams& p, const SolverSettings& s, std::vector<double> hazards)
        : p_(p), s_(s), hazards_(std::move(hazards)), ss_(stationary_state(p.g_sq, p)) {
        T_ = s.terminal_year;
        for (int t = 1; t <= T_; ++t) {
            if (hazards_[static_cast<std::size_t>(t)] > 0.0) last_arrival_ = t;
        }
        committed_.resize(static_cast<std::size_t>(last_arrival_) + 1);
    }

    double k_ss() const noexcept { return ss_.k_hat; }
    int terminal() const noexcept { return T_; }
    void set_reuse_threshold(double v) noexcept { reuse_threshold_ = v; }
    void commit(const SpineState& st) { committed_ = st.branches; }

    std::vector<double> full_path(const std::vector<double>& interior) const {
        std::vector<double> k(static_cast<std::size_t>(T_) + 1);
        k.front() = ss_.k_hat;
        k.back() = ss_.k_hat;
        std::copy(interior.begin(), interior.end(), k.begin() + 1);
        return k;
    }

    std::optional<SpineState> operator()(const std::vector<double>& interior) const {
        for (double v : interior) {
            if (!(v > 0.0) || !std::isfinite(v)) return std::nullopt;
        }
        const auto k = full_path(interior);
        SpineState st;
        st.branches.resize(committed_.size());
        bool failed = false;
        std::vector<char> ok(committed_.size(), 1);
        parallel_for(committed_.size(), s_.threads, [&](std::size_t s) {
            if (s == 0 || hazards_[s] <= 0.0) return;
            const PostTaiPath& old = committed_[s];
            const bool reusable = !old.k_hat.empty() && std::abs(old.k_hat[0] - k[s]) <= reuse_threshold_;
            if (reusable) {
                st.branches[s] = old;
                return;
            }
            // An unreachable branch rejects the trial point; non-convergence propagates.
            try {
                st.branches[s] = solve_post_tai_branch(k[s], p_, s_, old.k_hat.empty() ? nullptr : &old);
                st.branches[s].arrival_year = static_cast<int>(s);
            } catch (const InfeasibleError&) {
                ok[s] = 0;
            } catch (const DomainError&) {
                ok[s] = 0;
            }
        });
        for (char c : ok) failed = failed || !c;
        if (failed) return std::nullopt;

        const std::size_t n = interior.size();
        st.system = TridiagonalSystem(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double h = hazards_[t + 1];
            std::optional<BranchSummary> summary;
            if (h > 0.0) summary = summarize(st.branches[t + 1], p_);
            const auto row = spine_euler_row(k[t], k[t + 1], k[t + 2], h, summary ? &*summary : nullptr, p_,
                                             s_.include_premium);
            if (std::abs(row.residual) >= kInfeasibleResidual) return std::nullopt;
            st.system.rhs[t] = row.residual;
            st.system.sub[t] = row.d_k0;
            st.system.diag[t] = row.d_k1;
            st.system.sup[t] = row.d_k2;
        }
        return st;
    }

private:
    ModelParams p_;
    SolverSettings s_;
    std::vector<double> hazards_;
    SteadyState ss_;
    int T_ = 0;
    int last_arrival_ = 0;
    double reuse_threshold_ = 0.0;
    std::vector<PostTaiPath> committed_;
};

}  // namespace detail

/// Solves the no-arrival spine and all arrival branches jointly. Year 0 is the
/// year beliefs form; the economy starts and ends (year T) at the status-quo
/// steady state.
inline SpinePath solve_spine(const ModelParams& p, const ArrivalDistribution& beliefs, const SolverSettings& s,
                             const SpinePath* warm = nullptr) {
    validate(p);
    validate(s);
    if (s.terminal_year < beliefs.horizon()) {
        throw ConfigError("terminal_year must be at least the belief horizon");
    }
    auto hazards = spine_hazards(beliefs, s.terminal_year);
    detail::SpineProblem problem(p, s, hazards);
    const int T = s.terminal_year;

    std::vector<double> x(static_cast<std::size_t>(T) - 1, problem.k_ss());
    if (warm && warm->terminal_year() == T) {
        std::copy(warm->k_hat.begin() + 1, warm->k_hat.end() - 1, x.begin());
        if (!problem(x)) std::fill(x.begin(), x.end(), problem.k_ss());
    }

    // Branches are reused while their arrival capital moves by at most tol/10;
    // a second pass re-solves every branch at the exact final capital.
    auto eval = [&](const std::vector<double>& xi) {
        auto st = problem(xi);
        if (st) problem.commit(*st);
        return st;
    };
    detail::NewtonOutcome<detail::SpineState> res;
    int total_iterations = 0;
    for (double threshold : {s.tol / 10.0, 0.0}) {
        problem.set_reuse_threshold(threshold);
        res = detail::damped_newton<detail::SpineState>(x, eval, s.tol, s.max_iter - total_iterations, s.damping);
        total_iterations += res.iterations;
        if (!res.converged) {
            throw ConvergenceError("spine did not converge after " + std::to_string(total_iterations) +
                                       " iterations (largest residual " + std::to_string(res.max_residual) +
                                       " at year " + std::to_string(res.worst) + ")",
                                   res.max_residual, res.worst);
        }
        x = res.x;
    }

    SpinePath out;
    out.k_hat = problem.full_path(x);
    out.hazards = std::move(hazards);
    out.iterations = total_iterations;
    out.max_residual = res.max_residual;
    out.lambda = p.lambda;
    const double G = 1.0 + p.g_sq;
    const auto nT = static_cast<std::size_t>(T);
    out.c_hat.resize(nT + 1);
    out.y_hat.resize(nT + 1);
    out.w_hat.resize(nT + 1);
    out.r_k.resize(nT + 1);
    out.premium.assign(nT + 1, 0.0);
    for (std::size_t t = 0; t <= nT; ++t) {
        const auto f = detrended_factors(out.k_hat[t], p);
        const double k_next = t < nT ? out.k_hat[t + 1] : problem.k_ss();
        out.c_hat[t] = f.resources - G * k_next;
        out.y_hat[t] = f.y_hat;
        out.w_hat[t] = f.w_hat;
        out.r_k[t] = f.r_k;
        if (!(out.c_hat[t] > 0.0)) throw InfeasibleError("spine consumption is not positive at year " + std::to_string(t));
    }
    out.branch_index.assign(nT + 1, -1);
    for (std::size_t a = 1; a < res.state.branches.size(); ++a) {
        if (out.hazards[a] <= 0.0) continue;
        out.branch_index[a] = static_cast<int>(out.branches.size());
        out.branches.push_back(std::move(res.state.branches[a]));
    }
    const double G_eta = std::pow(G, -p.eta);
    for (std::size_t t = 0; t < nT; ++t) {
        const PostTaiPath* b = out.branch(static_cast<int>(t) + 1);
        if (b && s.include_premium) {
            out.premium[t] = G_eta * strategic_premium(*b, out.k_hat[t + 1], out.hazards[t + 1], p);
        }
    }

    // Branch horizons must be long enough to reach the post-arrival steady state.
    for (const auto& b : out.branches) {
        if (b.terminal_gap > s.terminal_tol) {
            throw ConfigError("branch_horizon too short: branch arriving in year " + std::to_string(b.arrival_year) +
                              " ends " + std::to_string(b.terminal_gap) + " (relative) away from its steady state");
        }
    }
    return out;
}

}  // namespace taicap
