#pragma once

// Scenario configuration and the three end-to-end workflows behind the CLI:
// solve one economy, tabulate year-1 rates over a lambda grid, and fit a
// timeline to forecast anchors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taicap/econ_core.hpp"
#include "taicap/errors.hpp"
#include "taicap/term_structure.hpp"
#include "taicap/timeline.hpp"
#include "taicap/timeline_io.hpp"
#include "taicap/transition.hpp"

namespace taicap {

namespace fs = std::filesystem;

struct ReportSettings {
    int horizon = 30;
    int long_horizon = 30;
    std::vector<double> lambdas{0.0, 1.0, 2.0, 4.0};
    std::string output_dir = "out";
};

struct ScenarioConfig {
    ModelParams model;
    ArrivalDistribution timeline;
    SolverSettings solver;
    ReportSettings report;
};

namespace detail {

template <class T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown key " + where + "." + it.key());
    }
}

inline ArrivalDistribution parse_timeline(const nlohmann::json& tl, const fs::path& base_dir) {
    reject_unknown(tl, {"annual_probs", "p_never", "distribution_file", "nbb", "source_label"}, "timeline");
    const int sources = int(tl.contains("annual_probs")) + int(tl.contains("distribution_file")) + int(tl.contains("nbb"));
    if (sources != 1) {
        throw ConfigError("timeline: specify exactly one of annual_probs, distribution_file, nbb");
    }
    std::string label = "timeline";
    read_field(tl, "source_label", label, "timeline");
    if (tl.contains("annual_probs")) {
        std::vector<double> probs;
        read_field(tl, "annual_probs", probs, "timeline");
        if (!tl.contains("p_never")) throw ConfigError("timeline: annual_probs requires p_never");
        double never = 0.0;
        read_field(tl, "p_never", never, "timeline");
        return ArrivalDistribution(std::move(probs), never, label);
    }
    if (tl.contains("p_never")) throw ConfigError("timeline: p_never is only valid with annual_probs");
    if (tl.contains("distribution_file")) {
        std::string file;
        read_field(tl, "distribution_file", file, "timeline");
        fs::path path(file);
        if (path.is_relative()) path = base_dir / path;
        if (!fs::exists(path)) throw ConfigError("timeline: distribution file not found: " + path.string());
        return read_distribution(path.string(), label);
    }
    const auto& nb = tl.at("nbb");
    reject_unknown(nb, {"n_support", "n_weights", "a", "b", "months_per_year", "horizon_years", "never_weight"},
                   "timeline.nbb");
    NbbSpec spec;
    read_field(nb, "n_support", spec.n_support, "timeline.nbb");
    read_field(nb, "n_weights", spec.n_weights, "timeline.nbb");
    read_field(nb, "a", spec.a, "timeline.nbb");
    read_field(nb, "b", spec.b, "timeline.nbb");
    read_field(nb, "months_per_year", spec.months_per_year, "timeline.nbb");
    read_field(nb, "horizon_years", spec.horizon_years, "timeline.nbb");
    read_field(nb, "never_weight", spec.never_weight, "timeline.nbb");
    return annualize(spec, label);
}

}  // namespace detail

/// Parses a scenario document with top-level keys model, timeline, solver,
/// report. Relative file paths resolve against base_dir. Throws ConfigError.
inline ScenarioConfig parse_config(const nlohmann::json& doc, const fs::path& base_dir = ".") {
    detail::reject_unknown(doc, {"model", "timeline", "solver", "report"}, "config");
    if (!doc.contains("timeline")) throw ConfigError("config: missing timeline");
    ScenarioConfig cfg;

    if (doc.contains("model")) {
        const auto& m = doc.at("model");
        detail::reject_unknown(m, {"beta", "eta", "alpha", "delta", "g_sq", "g_tai", "lambda", "labor"}, "model");
        detail::read_field(m, "beta", cfg.model.beta, "model");
        detail::read_field(m, "eta", cfg.model.eta, "model");
        detail::read_field(m, "alpha", cfg.model.alpha, "model");
        detail::read_field(m, "delta", cfg.model.delta, "model");
        detail::read_field(m, "g_sq", cfg.model.g_sq, "model");
        detail::read_field(m, "g_tai", cfg.model.g_tai, "model");
        detail::read_field(m, "lambda", cfg.model.lambda, "model");
        detail::read_field(m, "labor", cfg.model.labor, "model");
    }
    validate(cfg.model);

    cfg.timeline = detail::parse_timeline(doc.at("timeline"), base_dir);

    if (doc.contains("solver")) {
        const auto& s = doc.at("solver");
        detail::reject_unknown(s, {"terminal_year", "branch_horizon", "tol", "max_iter", "damping", "terminal_tol"},
                               "solver");
        detail::read_field(s, "terminal_year", cfg.solver.terminal_year, "solver");
        detail::read_field(s, "branch_horizon", cfg.solver.branch_horizon, "solver");
        detail::read_field(s, "tol", cfg.solver.tol, "solver");
        detail::read_field(s, "max_iter", cfg.solver.max_iter, "solver");
        detail::read_field(s, "damping", cfg.solver.damping, "solver");
        detail::read_field(s, "terminal_tol", cfg.solver.terminal_tol, "solver");
    }
    validate(cfg.solver);
    if (cfg.solver.terminal_year < cfg.timeline.horizon()) {
        throw ConfigError("solver.terminal_year must be at least the timeline horizon");
    }

    if (doc.contains("report")) {
        const auto& r = doc.at("report");
        detail::reject_unknown(r, {"horizon", "long_horizon", "lambdas", "output_dir"}, "report");
        detail::read_field(r, "horizon", cfg.report.horizon, "report");
        detail::read_field(r, "long_horizon", cfg.report.long_horizon, "report");
        detail::read_field(r, "lambdas", cfg.report.lambdas, "report");
        detail::read_field(r, "output_dir", cfg.report.output_dir, "report");
    }
    if (cfg.report.lambdas.empty()) throw ConfigError("report.lambdas must be nonempty");
    if (cfg.report.horizon < 1 || cfg.report.long_horizon < 1) throw ConfigError("report horizons must be positive");
    if (cfg.report.horizon + cfg.report.long_horizon > cfg.solver.terminal_year) {
        throw ConfigError("report.horizon + report.long_horizon exceeds solver.terminal_year");
    }
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(doc, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// CSV output: 12 significant digits, '.' separator, header row.

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct SolveResult {
    SpinePath spine;
    RateTable table;
};

inline SolveResult solve_scenario(const ScenarioConfig& cfg, const SpinePath* warm = nullptr) {
    SolveResult r;
    r.spine = solve_spine(cfg.model, cfg.timeline, cfg.solver, warm);
    r.table = build_rate_table(r.spine, cfg.timeline, cfg.model, cfg.report.horizon, cfg.report.long_horizon);
    return r;
}

inline void write_spine_csv(std::ostream& out, const RateTable& table) {
    out << "year,k_hat,c_hat,y_hat,w_hat,rental,rate_1y,rate_30y,savings,wedge,hazard\n";
    for (const auto& r : table) {
        out << r.year << ',' << fmt_num(r.k_hat) << ',' << fmt_num(r.c_hat) << ',' << fmt_num(r.y_hat) << ','
            << fmt_num(r.w_hat) << ',' << fmt_num(r.rental) << ',' << fmt_num(r.rate_1y) << ','
            << fmt_num(r.rate_30y) << ',' << fmt_num(r.savings) << ',' << fmt_num(r.wedge) << ','
            << fmt_num(r.hazard) << '\n';
    }
}

inline void write_branches_csv(std::ostream& out, const SpinePath& spine) {
    out << "arrival_year,offset,k_hat,c_hat,rental\n";
    for (const auto& b : spine.branches) {
        for (std::size_t j = 0; j < b.c_hat.size(); ++j) {
            out << b.arrival_year << ',' << j << ',' << fmt_num(b.k_hat[j]) << ',' << fmt_num(b.c_hat[j]) << ','
                << fmt_num(b.r_k[j]) << '\n';
        }
    }
}

inline void write_summary_csv(std::ostream& out, const std::string& label, double lambda, const RateTable& table) {
    out << "source_label,lambda,year,rate_1y,rate_30y,rental,savings,wedge\n";
    if (table.empty()) return;
    const auto& r = table.front();
    out << label << ',' << fmt_num(lambda) << ',' << r.year << ',' << fmt_num(r.rate_1y) << ','
        << fmt_num(r.rate_30y) << ',' << fmt_num(r.rental) << ',' << fmt_num(r.savings) << ','
        << fmt_num(r.wedge) << '\n';
}

namespace detail {
inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}
}  // namespace detail

/// Solves the configured economy and writes spine.csv, branches.csv and
/// summary.csv into out_dir. Nothing is written if the solve fails.
inline SolveResult run_solve(const ScenarioConfig& cfg, const fs::path& out_dir) {
    SolveResult r = solve_scenario(cfg);
    std::ostringstream spine, branches, summary;
    write_spine_csv(spine, r.table);
    write_branches_csv(branches, r.spine);
    write_summary_csv(summary, cfg.timeline.source_label(), cfg.model.lambda, r.table);
    detail::ensure_dir(out_dir);
    detail::write_file(out_dir / "spine.csv", spine.str());
    detail::write_file(out_dir / "branches.csv", branches.str());
    detail::write_file(out_dir / "summary.csv", summary.str());
    return r;
}

struct TableRow {
    std::string source_label;
    double lambda = 0.0;
    double rate_1y_year1 = 0.0;
    double rate_30y_year1 = 0.0;
};

/// One solve per (scenario, lambda). A failed cold start is retried from the
/// previous lambda's solution.
inline std::vector<TableRow> compute_table(const std::vector<ScenarioConfig>& scenarios) {
    std::vector<TableRow> rows;
    for (const auto& base : scenarios) {
        std::optional<SpinePath> previous;
        for (double lambda : base.report.lambdas) {
            ScenarioConfig cfg = base;
            cfg.model.lambda = lambda;
            SolveResult r;
            try {
                r = solve_scenario(cfg);
            } catch (const ConvergenceError&) {
                if (!previous) throw;
                r = solve_scenario(cfg, &*previous);
            } catch (const InfeasibleError&) {
                if (!previous) throw;
                r = solve_scenario(cfg, &*previous);
            }
            rows.push_back({cfg.timeline.source_label(), lambda, r.table.front().rate_1y, r.table.front().rate_30y});
            previous = std::move(r.spine);
        }
    }
    return rows;
}

inline void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows) {
    out << "source_label,lambda,rate_1y_year1,rate_30y_year1\n";
    for (const auto& r : rows) {
        out << r.source_label << ',' << fmt_num(r.lambda) << ',' << fmt_num(r.rate_1y_year1) << ','
            << fmt_num(r.rate_30y_year1) << '\n';
    }
}

inline std::vector<TableRow> run_table(const std::vector<ScenarioConfig>& scenarios, const fs::path& out_dir) {
    auto rows = compute_table(scenarios);
    std::ostringstream out;
    write_table_csv(out, rows);
    detail::ensure_dir(out_dir);
    detail::write_file(out_dir / "table1.csv", out.str());
    return rows;
}

inline nlohmann::json fit_report_json(const FitResult& fit, const std::vector<Anchor>& anchors,
                                      const std::string& label) {
    nlohmann::json j;
    j["source_label"] = label;
    j["nbb"] = {{"n_support", fit.spec.n_support}, {"n_weights", fit.spec.n_weights},
                {"a", fit.spec.a},                 {"b", fit.spec.b},
                {"months_per_year", fit.spec.months_per_year},
                {"horizon_years", fit.spec.horizon_years}};
    j["loss"] = fit.loss;
    j["converged"] = fit.converged;
    j["flagged"] = fit.flagged;
    j["warning"] = fit.warning;
    auto& errs = j["anchors"] = nlohmann::json::array();
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        errs.push_back({{"year", anchors[i].year},
                        {"target", anchors[i].cumulative},
                        {"fitted", anchors[i].cumulative + fit.anchor_errors[i]},
                        {"error", fit.anchor_errors[i]}});
    }
    return j;
}

/// Fits the anchors and writes distribution.csv plus fit_report.json.
inline FitResult run_fit(const std::string& anchor_path, const FitSettings& settings, const std::string& label,
                         const fs::path& out_dir) {
    const auto anchors = read_anchors(anchor_path);
    FitResult fit = fit_to_anchors(anchors, settings);
    const auto dist = annualize(fit.spec, label);
    std::ostringstream dist_text;
    write_distribution(dist_text, dist);
    detail::ensure_dir(out_dir);
    detail::write_file(out_dir / "distribution.csv", dist_text.str());
    detail::write_file(out_dir / "fit_report.json", fit_report_json(fit, anchors, label).dump(2) + "\n");
    return fit;
}

}  // namespace taicap
