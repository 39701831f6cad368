#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "taicap/scenario.hpp"

using namespace taicap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = TAICAP_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("taicap_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

json minimal() {
    return json::parse(R"({"timeline": {"annual_probs": [0.05, 0.05], "p_never": 0.9}})");
}

std::string config_error(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

struct Run {
    int code = -1;
    std::string err;
};

Run cli(const std::string& args) {
    const fs::path err = fs::temp_directory_path() / ("taicap_cli_err_" + std::to_string(::getpid()));
    const std::string cmd = std::string(TAICAP_CLI) + " " + args + " >/dev/null 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    fs::remove(err);
    return r;
}

}  // namespace

TEST(Config, Defaults) {
    const auto cfg = parse_config(minimal());
    EXPECT_EQ(cfg.model.beta, 0.99);
    EXPECT_EQ(cfg.model.lambda, 1.0);
    EXPECT_EQ(cfg.solver.terminal_year, 150);
    EXPECT_EQ(cfg.solver.branch_horizon, 120);
    EXPECT_EQ(cfg.report.lambdas, (std::vector<double>{0.0, 1.0, 2.0, 4.0}));
    EXPECT_EQ(cfg.timeline.horizon(), 2);
}

TEST(Config, RejectsMalformedDocuments) {
    auto unknown = minimal();
    unknown["model"] = {{"gamma", 2.0}};
    EXPECT_NE(config_error(unknown).find("model.gamma"), std::string::npos);

    EXPECT_NE(config_error(json::object()).find("timeline"), std::string::npos);

    auto both = minimal();
    both["timeline"]["distribution_file"] = "x.csv";
    EXPECT_NE(config_error(both).find("exactly one"), std::string::npos);

    auto no_never = minimal();
    no_never["timeline"].erase("p_never");
    EXPECT_FALSE(config_error(no_never).empty());

    auto bad_sum = minimal();
    bad_sum["timeline"]["p_never"] = 0.8;
    EXPECT_FALSE(config_error(bad_sum).empty());

    auto wrong_type = minimal();
    wrong_type["solver"] = {{"terminal_year", "long"}};
    EXPECT_NE(config_error(wrong_type).find("solver.terminal_year"), std::string::npos);

    auto divergent = minimal();
    divergent["model"] = {{"eta", 0.5}, {"beta", 0.999}};
    EXPECT_NE(config_error(divergent).find("convergence condition"), std::string::npos);

    auto long_report = minimal();
    long_report["report"] = {{"horizon", 100}, {"long_horizon", 60}};
    EXPECT_FALSE(config_error(long_report).empty());

    auto short_solve = minimal();
    short_solve["timeline"] = {{"annual_probs", std::vector<double>(60, 0.01)}, {"p_never", 0.4}};
    short_solve["solver"] = {{"terminal_year", 59}};
    EXPECT_FALSE(config_error(short_solve).empty());
}

TEST(Config, NbbTimeline) {
    auto doc = json::parse(R"({"timeline": {"nbb": {"n_support": [1], "n_weights": [1.0], "a": 1.0, "b": 1.0},
                                            "source_label": "uniform"}})");
    const auto cfg = parse_config(doc);
    EXPECT_NEAR(cfg.timeline.prob(1), 12.0 / 13.0, 1e-14);
    EXPECT_EQ(cfg.timeline.source_label(), "uniform");
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"baseline_cotra.json", "baseline_metaculus.json", "zero_hazard.json"}) {
        EXPECT_NO_THROW(load_config((kSource / "configs" / name).string())) << name;
    }
    const auto cfg = load_config((kSource / "configs/baseline_metaculus.json").string());
    EXPECT_EQ(cfg.timeline.horizon(), 60);
    EXPECT_EQ(cfg.timeline.source_label(), "metaculus-style");
}

TEST(RunSolve, ZeroHazardRowsAreSteadyState) {
    const auto dir = scratch("zero");
    const auto cfg = load_config((kSource / "configs/zero_hazard.json").string());
    run_solve(cfg, dir);
    const auto ss = stationary_state(cfg.model.g_sq, cfg.model);
    std::istringstream in(slurp(dir / "spine.csv"));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
        ASSERT_EQ(v.size(), 11u);
        EXPECT_NEAR(v[1], ss.k_hat, 1e-9);
        EXPECT_NEAR(v[2], ss.c_hat, 1e-9);
        EXPECT_NEAR(v[6], ss.r_gross - 1.0, 1e-10);
        EXPECT_NEAR(v[7], ss.r_gross - 1.0, 1e-10);
    }
    EXPECT_EQ(rows, 30);
}

TEST(RunSolve, RerunsAreByteIdentical) {
    const auto cfg = load_config((kSource / "configs/baseline_metaculus.json").string());
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    run_solve(cfg, a);
    run_solve(cfg, b);
    for (const char* f : {"spine.csv", "branches.csv", "summary.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(RunSolve, ThreadCountDoesNotChangeOutputs) {
    auto cfg = load_config((kSource / "configs/baseline_cotra.json").string());
    const auto a = scratch("threads_1"), b = scratch("threads_3");
    cfg.solver.threads = 1;
    run_solve(cfg, a);
    cfg.solver.threads = 3;
    run_solve(cfg, b);
    for (const char* f : {"spine.csv", "branches.csv", "summary.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(RunSolve, SummaryMatchesFirstSpineRow) {
    const auto cfg = load_config((kSource / "configs/baseline_cotra.json").string());
    const auto dir = scratch("summary");
    const auto r = run_solve(cfg, dir);
    std::ostringstream expect;
    const auto& row = r.table.front();
    expect << "source_label,lambda,year,rate_1y,rate_30y,rental,savings,wedge\n"
           << "cotra-style,1,1," << fmt_num(row.rate_1y) << ',' << fmt_num(row.rate_30y) << ','
           << fmt_num(row.rental) << ',' << fmt_num(row.savings) << ',' << fmt_num(row.wedge) << '\n';
    EXPECT_EQ(slurp(dir / "summary.csv"), expect.str());
}

TEST(RunTable, SingleLambdaNearStatusQuoRate) {
    auto doc = minimal();
    doc["timeline"] = {{"annual_probs", {0.001, 0.001}}, {"p_never", 0.998}};
    doc["report"] = {{"lambdas", {0.0}}};
    const auto rows = compute_table({parse_config(doc)});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_NEAR(rows[0].rate_1y_year1, 1.018 / 0.99 - 1.0, 1e-3);
}

TEST(RunTable, RowsMonotoneInLambdaWithDiminishingGaps) {
    const auto rows = compute_table({load_config((kSource / "configs/baseline_cotra.json").string()),
                                     load_config((kSource / "configs/baseline_metaculus.json").string())});
    ASSERT_EQ(rows.size(), 8u);
    for (std::size_t s = 0; s < 2; ++s) {
        const auto* r = &rows[4 * s];
        for (int i = 1; i < 4; ++i) {
            EXPECT_GT(r[i].rate_1y_year1, r[i - 1].rate_1y_year1) << r[i].source_label;
            EXPECT_GT(r[i].rate_30y_year1, r[i - 1].rate_30y_year1) << r[i].source_label;
        }
        EXPECT_GT(r[1].rate_1y_year1 - r[0].rate_1y_year1, r[3].rate_1y_year1 - r[2].rate_1y_year1);
    }
}

TEST(RunFit, ShippedDistributionRoundTrip) {
    for (const char* name : {"cotra_style", "metaculus_style"}) {
        const auto d = read_distribution((kSource / "data/distributions" / (std::string(name) + ".csv")).string());
        const auto dir = scratch(std::string("fit_") + name);
        std::vector<Anchor> anchors;
        for (int y : {2, 5, 10, 20, 40}) anchors.push_back({y, d.cdf(y)});
        {
            std::ofstream out(dir / "anchors.csv");
            out << "year,cumulative_probability\n";
            out.precision(17);
            for (const auto& a : anchors) out << a.year << ',' << a.cumulative << '\n';
        }
        const auto fit = run_fit((dir / "anchors.csv").string(), FitSettings{}, name, dir / "out");
        EXPECT_LT(fit.loss, 1e-6) << name;
        const auto refit = read_distribution((dir / "out/distribution.csv").string());
        double total = refit.p_never();
        for (double p : refit.annual_probs()) total += p;
        EXPECT_NEAR(total, 1.0, 1e-12);
        const auto report = json::parse(slurp(dir / "out/fit_report.json"));
        EXPECT_EQ(report["anchors"].size(), anchors.size());
        EXPECT_EQ(report["source_label"], name);
    }
}

TEST(Cli, SolveSucceeds) {
    const auto dir = scratch("cli_ok");
    const auto r = cli("solve --config " + (kSource / "configs/zero_hazard.json").string() + " --out " + dir.string());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "spine.csv"));
}

TEST(Cli, ConfigErrorExitsTwo) {
    const auto dir = scratch("cli_cfg");
    spill(dir / "bad.json", R"({"timeline": {"annual_probs": [0.5], "p_never": 0.5}, "modle": {}})");
    const auto r = cli("solve --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("modle"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, MissingFileExitsFour) {
    const auto dir = scratch("cli_io");
    EXPECT_EQ(cli("solve --config " + (dir / "absent.json").string() + " --out " + dir.string()).code, 4);
    EXPECT_EQ(cli("fit-timeline --anchors " + (dir / "absent.csv").string() + " --out " + dir.string()).code, 4);
}

TEST(Cli, NonConvergenceExitsThreeWithoutOutputs) {
    const auto dir = scratch("cli_conv");
    spill(dir / "c.json", R"({"timeline": {"annual_probs": [0.1, 0.1], "p_never": 0.8}, "solver": {"max_iter": 1}})");
    const auto r = cli("solve --config " + (dir / "c.json").string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("largest residual"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "out" / "spine.csv"));
}

TEST(Cli, MalformedAnchorNamesLine) {
    const auto dir = scratch("cli_anchor");
    spill(dir / "a.csv", "year,cumulative_probability\n3,0.2\n8 0.5\n");
    const auto r = cli("fit-timeline --anchors " + (dir / "a.csv").string() + " --out " + dir.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("a.csv:3"), std::string::npos) << r.err;
}

TEST(Cli, InfeasibleAnchorsExitNonzero) {
    const auto dir = scratch("cli_infeasible");
    spill(dir / "a.csv", "year,cumulative_probability\n8,0.6\n3,0.2\n");
    const auto r = cli("fit-timeline --anchors " + (dir / "a.csv").string() + " --out " + dir.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("increasing"), std::string::npos) << r.err;
}

TEST(Cli, BadThreadEnvironmentIsConfigError) {
    const auto dir = scratch("cli_env");
    const std::string cmd = "TAI_SOLVER_THREADS=banana " + std::string(TAICAP_CLI) + " solve --config " +
                            (kSource / "configs/zero_hazard.json").string() + " --out " + dir.string() +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 2);
}
