// taicap: solve, tabulate and calibrate TAI-expectation transition paths.
//
//   taicap solve --config scenario.json --out dir
//   taicap table --config a.json [--config b.json ...] --out dir
//   taicap fit-timeline --anchors anchors.csv --out dir [--label name]
//
// Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4 I/O error.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taicap/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

int threads_from_env() {
    const char* v = std::getenv("TAI_SOLVER_THREADS");
    if (!v || !*v) return 0;
    try {
        return std::max(0, std::stoi(v));
    } catch (const std::exception&) {
        throw taicap::ConfigError(std::string("TAI_SOLVER_THREADS is not an integer: ") + v);
    }
}

taicap::ScenarioConfig load(const std::string& path) {
    auto cfg = taicap::load_config(path);
    cfg.solver.threads = threads_from_env();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transition paths of a growth economy expecting transformative AI"};
    app.require_subcommand(1);

    std::string solve_config, solve_out;
    auto* solve = app.add_subcommand("solve", "solve one scenario; writes spine.csv, branches.csv, summary.csv");
    solve->add_option("--config", solve_config, "scenario JSON")->required();
    solve->add_option("--out", solve_out, "output directory")->required();

    std::vector<std::string> table_configs;
    std::string table_out;
    auto* table = app.add_subcommand("table", "year-1 rates for every lambda in report.lambdas; writes table1.csv");
    table->add_option("--config", table_configs, "scenario JSON (repeat for several belief sources)")->required();
    table->add_option("--out", table_out, "output directory")->required();

    std::string anchors, fit_out, label = "fitted";
    taicap::FitSettings fit_settings;
    auto* fit = app.add_subcommand("fit-timeline", "fit a negative beta-binomial timeline to cumulative anchors");
    fit->add_option("--anchors", anchors, "anchor CSV (year,cumulative_probability)")->required();
    fit->add_option("--out", fit_out, "output directory")->required();
    fit->add_option("--label", label, "source label recorded in the report");
    fit->add_option("--n-max", fit_settings.n_max, "largest breakthrough count searched")->capture_default_str();
    fit->add_option("--max-range-width", fit_settings.max_range_width, "widest uniform n range searched")
        ->capture_default_str();
    fit->add_option("--horizon", fit_settings.horizon_years, "truncation horizon in years")->capture_default_str();
    fit->add_option("--months-per-year", fit_settings.months_per_year, "trials per year")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) {
            const auto cfg = load(solve_config);
            const auto r = taicap::run_solve(cfg, solve_out);
            std::cerr << "solved " << cfg.timeline.source_label() << " lambda=" << cfg.model.lambda << " in "
                      << r.spine.iterations << " Newton iterations\n";
        } else if (*table) {
            std::vector<taicap::ScenarioConfig> cfgs;
            for (const auto& path : table_configs) cfgs.push_back(load(path));
            taicap::run_table(cfgs, table_out);
        } else if (*fit) {
            const auto result = taicap::run_fit(anchors, fit_settings, label, fit_out);
            std::cerr << "fit loss " << result.loss << '\n';
            if (result.flagged) std::cerr << "warning: " << result.warning << '\n';
        }
    } catch (const taicap::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const taicap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const taicap::ConvergenceError& e) {
        std::cerr << "solver did not converge: " << e.what() << '\n';
        return kExitSolver;
    } catch (const taicap::InfeasibleError& e) {
        std::cerr << "solver found no feasible path: " << e.what() << '\n';
        return kExitSolver;
    } catch (const taicap::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
