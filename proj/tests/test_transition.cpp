#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "taicap/transition.hpp"

using namespace taicap;

namespace {

ArrivalDistribution flat_hazard(double h, int years) {
    std::vector<double> p;
    double alive = 1.0;
    for (int t = 0; t < years; ++t) {
        p.push_back(alive * h);
        alive -= p.back();
    }
    double inside = 0.0;
    for (double x : p) inside += x;
    return ArrivalDistribution(p, 1.0 - inside, "flat");
}

ModelParams with_lambda(double lambda) {
    ModelParams p;
    p.lambda = lambda;
    return p;
}

}  // namespace

TEST(PostTaiBranch, SteadyStateStartIsConstant) {
    const ModelParams p;
    const SolverSettings s;
    const auto ss = stationary_state(p.g_tai, p);
    const auto b = solve_post_tai_branch(ss.k_hat, p, s);
    ASSERT_TRUE(b.converged);
    for (std::size_t j = 0; j < b.k_hat.size(); ++j) {
        EXPECT_NEAR(b.k_hat[j], ss.k_hat, 1e-12);
        EXPECT_NEAR(b.c_hat[j], ss.c_hat, 1e-12);
    }
    EXPECT_LT(b.max_residual, 1e-12);
}

TEST(PostTaiBranch, ConvergesMonotonicallyFromAbove) {
    const ModelParams p;
    const SolverSettings s;
    const auto ss = stationary_state(p.g_tai, p);
    const auto b = solve_post_tai_branch(1.1 * ss.k_hat, p, s);
    for (std::size_t j = 1; j < b.k_hat.size(); ++j) {
        EXPECT_LE(b.k_hat[j], b.k_hat[j - 1]);
        EXPECT_GE(b.k_hat[j], ss.k_hat - 1e-12);
    }
    EXPECT_LT(b.terminal_gap, 1e-12);
}

TEST(PostTaiBranch, ConvergesFromFarAboveSteadyState) {
    const ModelParams p;
    const SolverSettings s;
    const auto b = solve_post_tai_branch(stationary_state(p.g_sq, p).k_hat * 1.5, p, s);
    EXPECT_TRUE(b.converged);
    EXPECT_LT(b.terminal_gap, s.terminal_tol);
}

TEST(PostTaiBranch, IdenticalAcrossLambda) {
    const SolverSettings s;
    const auto ref = solve_post_tai_branch(21.0, with_lambda(0.0), s);
    for (double lambda : {1.0, 2.0, 4.0}) {
        const auto b = solve_post_tai_branch(21.0, with_lambda(lambda), s);
        for (std::size_t j = 0; j < b.k_hat.size(); ++j) {
            EXPECT_NEAR(b.k_hat[j], ref.k_hat[j], 1e-10);
            EXPECT_NEAR(b.c_hat[j], ref.c_hat[j], 1e-10);
        }
    }
}

TEST(PostTaiBranch, SensitivityMatchesFiniteDifference) {
    const ModelParams p;
    SolverSettings s;
    s.tol = 1e-12;
    const double k0 = 20.0, h = 1e-4;
    const auto b = solve_post_tai_branch(k0, p, s);
    const auto up = solve_post_tai_branch(k0 + h, p, s);
    const auto dn = solve_post_tai_branch(k0 - h, p, s);
    for (std::size_t j = 0; j < b.k_hat.size(); j += 7) {
        EXPECT_NEAR(b.dk_dk0[j], (up.k_hat[j] - dn.k_hat[j]) / (2 * h), 1e-6);
    }
    const auto [v, dv] = detail::wage_value_with_derivative(b, p);
    EXPECT_NEAR(dv, (wage_value_sum(up, p) - wage_value_sum(dn, p)) / (2 * h), 1e-6 * std::abs(dv) + 1e-9);
    EXPECT_DOUBLE_EQ(v, wage_value_sum(b, p));
}

TEST(PostTaiBranch, RejectsNonPositiveCapital) {
    EXPECT_THROW(solve_post_tai_branch(0.0, ModelParams{}, SolverSettings{}), DomainError);
}

TEST(StrategicPremium, ZeroCases) {
    const ModelParams p;
    const auto b = solve_post_tai_branch(20.0, p, SolverSettings{});
    EXPECT_EQ(strategic_premium(b, 20.0, 0.0, p), 0.0);
    EXPECT_EQ(strategic_premium(b, 20.0, 0.3, with_lambda(0.0)), 0.0);
    EXPECT_GT(strategic_premium(b, 20.0, 0.3, p), 0.0);
}

TEST(StrategicPremium, SteadyStateClosedForm) {
    const ModelParams p;
    const auto ss = stationary_state(p.g_tai, p);
    const auto b = solve_post_tai_branch(ss.k_hat, p, SolverSettings{});
    const double h = 0.07, k_next = 19.0;
    const double closed = h * (p.lambda / k_next) * (p.beta / (1.0 - p.beta)) * (ss.w_hat / ss.c_hat);
    double partial = 0.0, weight = p.beta;
    for (int j = 0; j < 10000; ++j) {
        partial += weight * ss.w_hat / ss.c_hat;
        weight *= p.beta;
    }
    partial *= h * p.lambda / k_next;
    EXPECT_NEAR(strategic_premium(b, k_next, h, p), closed, 1e-10 * closed);
    EXPECT_NEAR(partial, closed, 1e-10 * closed);
}

TEST(StrategicPremium, DivergentTailIsConfigError) {
    ModelParams p;
    const auto b = solve_post_tai_branch(5.0, p, SolverSettings{});
    p.eta = 0.5;
    p.beta = 0.999;
    EXPECT_THROW(strategic_premium(b, 5.0, 0.1, p), ConfigError);
}

TEST(SpineEulerRow, DerivativesMatchFiniteDifferences) {
    const ModelParams p;
    const auto b = solve_post_tai_branch(20.0, p, SolverSettings{});
    const auto summary = detail::summarize(b, p);
    const double k0 = 19.8, k1 = 20.0, k2 = 20.3, h = 0.05, e = 1e-6;
    const auto row = detail::spine_euler_row(k0, k1, k2, h, &summary, p, true);
    auto r = [&](double a, double c, double d) { return detail::spine_euler_row(a, c, d, h, &summary, p, true).residual; };
    EXPECT_NEAR(row.d_k0, (r(k0 + e, k1, k2) - r(k0 - e, k1, k2)) / (2 * e), 1e-6);
    EXPECT_NEAR(row.d_k2, (r(k0, k1, k2 + e) - r(k0, k1, k2 - e)) / (2 * e), 1e-6);
    // d/dk1 moves the branch too: hold dc0 and dvalue from the summary.
    const auto bu = solve_post_tai_branch(k1 + e, p, SolverSettings{});
    const auto bd = solve_post_tai_branch(k1 - e, p, SolverSettings{});
    const auto su = detail::summarize(bu, p), sd = detail::summarize(bd, p);
    const double fd = (detail::spine_euler_row(k0, k1 + e, k2, h, &su, p, true).residual -
                       detail::spine_euler_row(k0, k1 - e, k2, h, &sd, p, true).residual) /
                      (2 * e);
    EXPECT_NEAR(row.d_k1, fd, 1e-5 * std::abs(fd));
}

TEST(PreTaiEulerResidual, ZeroAtStatusQuoWithoutHazard) {
    const ModelParams p;
    const double k = stationary_state(p.g_sq, p).k_hat;
    const std::vector<double> path(10, k), hazards(10, 0.0);
    for (int t = 0; t + 2 < 10; ++t) EXPECT_NEAR(pre_tai_euler_residual(t, path, BranchSet{}, hazards, p), 0.0, 1e-14);
}

TEST(PreTaiEulerResidual, InfeasibleConsumptionIsMarkedNotClamped) {
    const ModelParams p;
    const std::vector<double> path{19.0, 500.0, 19.0, 19.0}, hazards(4, 0.0);
    EXPECT_GE(pre_tai_euler_residual(0, path, BranchSet{}, hazards, p), detail::kInfeasibleResidual);
}

TEST(PreTaiEulerResidual, LambdaZeroReducesToNoPremiumForm) {
    const auto beliefs = flat_hazard(0.05, 20);
    const auto p0 = with_lambda(0.0);
    const auto spine = solve_spine(p0, beliefs, SolverSettings{});
    const BranchSet set{&spine.branches, &spine.branch_index};
    for (int t = 0; t + 2 <= spine.terminal_year(); t += 5) {
        EXPECT_EQ(pre_tai_euler_residual(t, spine.k_hat, set, spine.hazards, p0, true),
                  pre_tai_euler_residual(t, spine.k_hat, set, spine.hazards, p0, false));
    }
}

TEST(SolveSpine, ConvergedResidualsBelowTolerance) {
    const SolverSettings s;
    for (double lambda : {0.0, 1.0, 4.0}) {
        const auto p = with_lambda(lambda);
        const auto spine = solve_spine(p, flat_hazard(0.05, 60), s);
        const BranchSet set{&spine.branches, &spine.branch_index};
        for (int t = 0; t + 2 <= spine.terminal_year(); ++t) {
            EXPECT_LT(std::abs(pre_tai_euler_residual(t, spine.k_hat, set, spine.hazards, p)), s.tol) << "t=" << t;
        }
        for (const auto& b : spine.branches) EXPECT_LT(b.max_residual, s.tol);
    }
}

TEST(SolveSpine, ZeroHazardIsStatusQuoSteadyState) {
    const ModelParams p;
    const auto spine = solve_spine(p, ArrivalDistribution::never(60), SolverSettings{});
    const auto ss = stationary_state(p.g_sq, p);
    for (int t = 0; t <= spine.terminal_year(); ++t) {
        EXPECT_NEAR(spine.k_hat[static_cast<std::size_t>(t)], ss.k_hat, 1e-10);
        EXPECT_NEAR(spine.c_hat[static_cast<std::size_t>(t)], ss.c_hat, 1e-10);
    }
    EXPECT_TRUE(spine.branches.empty());
}

TEST(SolveSpine, StrategicMotiveRaisesCapital) {
    const auto beliefs = flat_hazard(0.05, 60);
    const auto k0 = solve_spine(with_lambda(0.0), beliefs, SolverSettings{}).k_hat;
    for (double lambda : {1.0, 2.0, 4.0}) {
        const auto k = solve_spine(with_lambda(lambda), beliefs, SolverSettings{}).k_hat;
        for (int t = 1; t <= 60; ++t) EXPECT_GT(k[static_cast<std::size_t>(t)], k0[static_cast<std::size_t>(t)]) << t;
    }
}

TEST(SolveSpine, InsensitiveToTerminalYear) {
    const auto beliefs = flat_hazard(0.05, 60);
    SolverSettings s150, s300;
    s300.terminal_year = 300;
    const auto a = solve_spine(ModelParams{}, beliefs, s150);
    const auto b = solve_spine(ModelParams{}, beliefs, s300);
    for (std::size_t t = 0; t <= 30; ++t) EXPECT_NEAR(a.k_hat[t], b.k_hat[t], 1e-6 * b.k_hat[t]) << t;
    for (std::size_t t = 31; t <= 60; ++t) EXPECT_NEAR(a.k_hat[t], b.k_hat[t], 1e-4 * b.k_hat[t]) << t;
}

TEST(SolveSpine, BitIdenticalAcrossThreadCounts) {
    const auto beliefs = flat_hazard(0.04, 60);
    SolverSettings one, four;
    one.threads = 1;
    four.threads = 4;
    const auto a = solve_spine(ModelParams{}, beliefs, one);
    const auto b = solve_spine(ModelParams{}, beliefs, four);
    EXPECT_EQ(a.k_hat, b.k_hat);
    EXPECT_EQ(a.c_hat, b.c_hat);
    EXPECT_EQ(a.premium, b.premium);
    ASSERT_EQ(a.branches.size(), b.branches.size());
    for (std::size_t i = 0; i < a.branches.size(); ++i) EXPECT_EQ(a.branches[i].k_hat, b.branches[i].k_hat);
}

TEST(SolveSpine, WarmStartReachesSameSolution) {
    const auto beliefs = flat_hazard(0.05, 60);
    const auto cold = solve_spine(with_lambda(2.0), beliefs, SolverSettings{});
    const auto warm_src = solve_spine(with_lambda(1.0), beliefs, SolverSettings{});
    const auto warm = solve_spine(with_lambda(2.0), beliefs, SolverSettings{}, &warm_src);
    for (std::size_t t = 0; t < cold.k_hat.size(); ++t) EXPECT_NEAR(cold.k_hat[t], warm.k_hat[t], 1e-7);
}

TEST(SolveSpine, IterationCapReportsDiagnostics) {
    SolverSettings s;
    s.max_iter = 1;
    try {
        solve_spine(ModelParams{}, flat_hazard(0.05, 60), s);
        FAIL();
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.max_residual(), 0.0);
        EXPECT_GE(e.worst_index(), 0);
        EXPECT_NE(std::string(e.what()).find("largest residual"), std::string::npos);
    }
}

TEST(SolveSpine, ShortBranchHorizonIsRejected) {
    SolverSettings s;
    s.branch_horizon = 4;
    EXPECT_THROW(solve_spine(ModelParams{}, flat_hazard(0.05, 10), s), ConfigError);
}

TEST(SolveSpine, RejectsBeliefsBeyondTerminalYear) {
    SolverSettings s;
    s.terminal_year = 50;
    EXPECT_THROW(solve_spine(ModelParams{}, flat_hazard(0.05, 60), s), ConfigError);
}
