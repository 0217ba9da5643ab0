#pragma once

// Experiment commands behind the command-line front end. Every command
// resolves its scenario, computes, and writes into
// <out_root>/<command>/<scenario hash>/.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcc/axioms.hpp"
#include "mpcc/equilibrium.hpp"
#include "mpcc/mean_field.hpp"
#include "mpcc/parallel.hpp"
#include "mpcc/report.hpp"
#include "mpcc/scenario.hpp"
#include "mpcc/stochastic.hpp"

namespace mpcc {

inline constexpr const char* kOutDirEnv = "MPCC_OUT_DIR";
inline constexpr const char* kDefaultOutDir = "results";

struct HarnessOptions {
    std::filesystem::path out_root = kDefaultOutDir;
    std::size_t jobs = 1;
};

struct CommandOutput {
    std::filesystem::path directory;
    std::vector<std::string> files;
    json summary;
};

namespace detail {

inline std::filesystem::path command_dir(const HarnessOptions& opt, const std::string& command, const json& doc) {
    json key = doc;
    key.erase("outputs");
    return opt.out_root / command / scenario_hash(key);
}

inline void write_text(CommandOutput& out, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(out.directory);
    std::ofstream f(out.directory / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (out.directory / name).string());
    f << text;
    out.files.push_back(name);
}

inline void write_json(CommandOutput& out, const std::string& name, const json& j) {
    write_text(out, name, j.dump(2) + "\n");
}

inline std::string trajectory_text(const Trajectory& traj) {
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    return os.str();
}

inline std::string seed_file_name(std::size_t i, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
    char buf[48];
    std::snprintf(buf, sizeof buf, "seed_%0*zu.csv", width, i);
    return buf;
}

inline json regime_json(const Scenario& s, const Trajectory& expected, const std::optional<Convergence>& conv) {
    if (s.protocol.rho > 0.0 && s.protocol.rho < 1.0) return to_string(classify_regime(s.network, s.protocol));
    const std::size_t from = conv ? conv->t0 : 0;
    bool loss = false;
    for (std::size_t t = from; t < expected.size(); ++t)
        for (const auto& p : expected.steps[t].paths) loss = loss || p.loss;
    return to_string(loss ? Regime::lossy : Regime::lossless);
}

inline json convergence_json(const std::optional<Convergence>& conv) {
    if (!conv) return {{"converged", false}, {"t0", nullptr}};
    return {{"converged", true}, {"t0", conv->t0}, {"lag", conv->lag}, {"cycle", conv->cycle}};
}

// Per-rank post-t0 statistics of a trajectory (whole run if not converged).
inline json cycle_stats(const Trajectory& traj, const std::optional<Convergence>& conv) {
    const std::size_t from = conv ? conv->t0 : 0;
    const std::size_t paths = traj.n_paths();
    json ranks = json::array();
    for (std::size_t r = 0; r < paths; ++r) {
        double mean_load = 0.0, mean_agents = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t t = from; t < traj.size(); ++t) {
            const double load = traj.loads_by_rank(t)[r];
            mean_load += load;
            mean_agents += traj.agents_by_rank(t)[r];
            lo = std::min(lo, load);
            hi = std::max(hi, load);
        }
        const double n = static_cast<double>(traj.size() - from);
        ranks.push_back({{"rank", r},
                         {"mean_agents", mean_agents / n},
                         {"mean_load", mean_load / n},
                         {"min_load", lo},
                         {"max_load", hi}});
    }
    return {{"from", from}, {"to", traj.size() - 1}, {"per_rank", ranks}};
}

inline std::string lossy_pattern(const Trajectory& expected, const Convergence& conv, std::size_t paths) {
    const std::size_t window = expected.size() - 1 - conv.t0;
    return longest_cyclic_run(expected, conv.t0, expected.size() - 1) >= window && window >= paths
               ? "absorbed"
               : "disrupted";
}

struct RatedPoint {
    AxiomRatings ratings;
    StaticBaseline baseline;
    StaticComparison deltas;
};

inline RatedPoint rate_scenario(const Scenario& s, std::size_t jobs) {
    const auto expected = run_expected(s.network, s.protocol, s.run.horizon, s.run.init);
    const auto stochastic = run(s.network, s.protocol, s.run_options(jobs));
    RatedPoint out;
    out.ratings = rate_equilibrium(s.network, s.protocol, expected.trajectory, &stochastic);
    if (s.run.seeds < 10) out.ratings.flags.push_back("eta estimated from fewer than 10 seeds");
    out.baseline = static_baseline(s.network, s.protocol);
    out.deltas = compare_to_static(out.ratings, out.baseline);
    return out;
}

}  // namespace detail

/// Stochastic runs: one CSV per seed, the cross-seed mean per path, and a
/// summary with the regime and post-t0 cycle statistics. t0 is taken from
/// the expected dynamics of the same scenario.
inline CommandOutput cmd_simulate(const Scenario& s, const HarnessOptions& opt) {
    CommandOutput out;
    out.directory = detail::command_dir(opt, "simulate", s.document);
    const auto stochastic = run(s.network, s.protocol, s.run_options(opt.jobs));
    const auto expected = run_expected(s.network, s.protocol, s.run.horizon, s.run.init);
    const auto conv = detect_convergence(expected.trajectory);
    if (s.outputs.csv) {
        for (std::size_t i = 0; i < stochastic.per_seed.size(); ++i)
            detail::write_text(out, detail::seed_file_name(i, stochastic.per_seed.size()),
                               detail::trajectory_text(stochastic.per_seed[i]));
        detail::write_text(out, "mean.csv", detail::trajectory_text(stochastic.mean_by_path));
    }
    json summary;
    summary["command"] = "simulate";
    summary["scenario"] = s.document;
    summary["params"] = to_json(s.network, s.protocol);
    summary["regime"] = detail::regime_json(s, expected.trajectory, conv);
    summary["convergence"] = detail::convergence_json(conv);
    summary["t0"] = conv ? json(conv->t0) : json(nullptr);
    summary["cycle_stats"] = detail::cycle_stats(stochastic.mean_by_rank, conv);
    summary["seeds"] = s.run.seeds;
    out.summary = summary;
    if (s.outputs.json) detail::write_json(out, "summary.json", summary);
    return out;
}

/// Expected dynamics plus the analytical equilibrium report.
inline CommandOutput cmd_expected(const Scenario& s, const HarnessOptions& opt) {
    CommandOutput out;
    out.directory = detail::command_dir(opt, "expected", s.document);
    const auto expected = run_expected(s.network, s.protocol, s.run.horizon, s.run.init);
    const auto conv = detect_convergence(expected.trajectory);
    if (s.outputs.csv) detail::write_text(out, "trajectory.csv", detail::trajectory_text(expected.trajectory));

    json report;
    report["command"] = "expected";
    report["scenario"] = s.document;
    report["params"] = to_json(s.network, s.protocol);
    report["regime"] = detail::regime_json(s, expected.trajectory, conv);
    report["convergence"] = detail::convergence_json(conv);
    report["t0"] = conv ? json(conv->t0) : json(nullptr);
    report["equilibrium"] = nullptr;
    report["bounds"] = nullptr;
    if (s.protocol.rho > 0.0 && s.protocol.rho < 1.0) {
        try {
            const auto eq = flow_equilibrium(s.network, s.protocol);
            report["equilibrium"] = to_json(eq);
            report["Lhat0"] = eq.peak();
            report["LhatPm1"] = eq.trough();
            if (eq.bounds) report["bounds"] = to_json(*eq.bounds);
        } catch (const DivergentEquilibrium& e) {
            report["equilibrium_error"] = e.what();
            report["bounds"] = to_json(lossy_bounds(s.network, s.protocol));
        }
        report["agent_equilibrium"] =
            agent_equilibrium(static_cast<double>(s.network.n_agents), s.network.n_paths, s.protocol.rho).per_rank;
    } else {
        report["equilibrium_error"] = "the P-step cycle needs rho in (0, 1)";
    }
    if (conv && report["regime"] == "lossy")
        report["lossy_pattern"] = detail::lossy_pattern(expected.trajectory, *conv, s.network.n_paths);
    report["cycle_stats"] = detail::cycle_stats(expected.trajectory, conv);
    report["static_baseline"] = to_json(static_baseline(s.network, s.protocol));
    out.summary = report;
    if (s.outputs.json) detail::write_json(out, "report.json", report);
    return out;
}

/// Ratings of one scenario. Throws NotConverged when t0 plus ten cycles do
/// not fit in the horizon.
inline CommandOutput cmd_rate(const Scenario& s, const HarnessOptions& opt) {
    CommandOutput out;
    out.directory = detail::command_dir(opt, "rate", s.document);
    const auto point = detail::rate_scenario(s, opt.jobs);
    out.summary = to_json(point.ratings, s.network, s.protocol);
    detail::write_json(out, "ratings.json", out.summary);
    return out;
}

inline CommandOutput cmd_compare_static(const Scenario& s, const HarnessOptions& opt) {
    CommandOutput out;
    out.directory = detail::command_dir(opt, "compare-static", s.document);
    const auto point = detail::rate_scenario(s, opt.jobs);
    json j;
    j["ratings"] = to_json(point.ratings, s.network, s.protocol);
    j["static_baseline"] = to_json(point.baseline);
    j["deltas"] = to_json(point.deltas);
    out.summary = j;
    detail::write_json(out, "comparison.json", j);
    return out;
}

namespace detail {

inline json axis_value(const std::string& name, double v) {
    static const std::vector<std::string> integral = {"network.N", "network.P",   "run.horizon",
                                                      "run.seeds", "run.seed",    "run.init.seed"};
    if (std::find(integral.begin(), integral.end(), name) != integral.end()) {
        if (v < 0.0 || v != std::floor(v)) return v;  // left for validation to reject
        return static_cast<std::uint64_t>(v);
    }
    return v;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_real(v); }

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

}  // namespace detail

/// Cartesian grid over the sweep axes (first axis slowest, values ascending).
/// One CSV row per grid point; failures land in the `error` column.
inline CommandOutput cmd_sweep(const json& doc, const HarnessOptions& opt) {
    const Scenario base = parse_scenario(doc);
    const SweepSpec spec = parse_sweep(doc);
    CommandOutput out;
    out.directory = detail::command_dir(opt, "sweep", base.document);

    std::size_t cells = 1;
    for (const auto& a : spec.axes) cells *= a.values.size();
    auto wants = [&](const std::string& m) {
        return spec.metrics.empty() || std::find(spec.metrics.begin(), spec.metrics.end(), m) != spec.metrics.end();
    };

    std::vector<std::string> rows(cells);
    std::vector<std::uint8_t> failed(cells, 0);
    parallel_for(cells, opt.jobs, [&](std::size_t cell) {
        json point = doc;
        point.erase("sweep");
        std::vector<double> coords(spec.axes.size());
        std::size_t rest = cell;
        for (std::size_t k = spec.axes.size(); k-- > 0;) {
            coords[k] = spec.axes[k].values[rest % spec.axes[k].values.size()];
            rest /= spec.axes[k].values.size();
        }
        std::string row;
        for (double c : coords) row += detail::csv_number(c) + ",";
        std::string metrics, error;
        try {
            for (std::size_t k = 0; k < coords.size(); ++k)
                apply_override(point,
                               spec.axes[k].name + "=" + detail::axis_value(spec.axes[k].name, coords[k]).dump());
            const Scenario s = parse_scenario(point);
            const auto r = detail::rate_scenario(s, 1);
            const auto& a = r.ratings;
            std::string flags;
            for (const auto& f : a.flags) flags += (flags.empty() ? "" : "; ") + f;
            metrics = std::string(to_string(a.regime)) + "," + detail::csv_number(a.rho) + "," +
                      std::to_string(a.convergence.t0) + ",";
            if (wants("epsilon"))
                metrics += detail::csv_number(a.epsilon.value) + "," + detail::csv_number(a.epsilon.std_error) + ",";
            if (wants("lambda"))
                metrics += detail::csv_number(a.lambda.value) + "," + detail::csv_number(a.lambda.std_error) + ",";
            if (wants("gamma_conv"))
                metrics += detail::csv_number(a.gamma_conv.value) + "," +
                           detail::csv_number(a.gamma_conv.std_error) + ",";
            if (wants("eta"))
                metrics += detail::csv_number(a.eta.value) + "," + detail::csv_number(a.eta.std_error) + ",";
            if (wants("delta"))
                metrics += detail::csv_number(r.deltas.d_epsilon) + "," + detail::csv_number(r.deltas.d_lambda) +
                           "," + detail::csv_number(r.deltas.d_gamma_conv) + "," +
                           detail::csv_number(r.deltas.d_eta) + ",";
            metrics += detail::csv_field(flags) + ",";
        } catch (const std::exception& e) {
            error = e.what();
            failed[cell] = 1;
            std::size_t blanks = 4;  // regime, rho, t0, flags
            for (const char* m : {"epsilon", "lambda", "gamma_conv", "eta"}) blanks += wants(m) ? 2 : 0;
            blanks += wants("delta") ? 4 : 0;
            metrics = std::string(blanks, ',');
        }
        rows[cell] = row + metrics + detail::csv_field(error) + "\n";
    });

    std::string csv;
    for (const auto& a : spec.axes) csv += a.name + ",";
    csv += "regime,rho,t0,";
    if (wants("epsilon")) csv += "epsilon,epsilon_se,";
    if (wants("lambda")) csv += "lambda,lambda_se,";
    if (wants("gamma_conv")) csv += "gamma_conv,gamma_conv_se,";
    if (wants("eta")) csv += "eta,eta_se,";
    if (wants("delta")) csv += "d_epsilon,d_lambda,d_gamma_conv,d_eta,";
    csv += "flags,error\n";
    for (const auto& r : rows) csv += r;
    detail::write_text(out, "sweep.csv", csv);

    std::size_t n_failed = 0;
    for (auto f : failed) n_failed += f;
    out.summary = {{"command", "sweep"}, {"rows", cells}, {"failed", n_failed}};
    if (base.outputs.json) detail::write_json(out, "summary.json", out.summary);
    return out;
}

/// Consistency of the P-step assumption over a (rho, sigma) grid per P.
inline CommandOutput cmd_consistency(const json& doc, const HarnessOptions& opt) {
    const Scenario base = parse_scenario(doc);
    const ConsistencySpec spec = parse_consistency(doc, base);
    CommandOutput out;
    out.directory = detail::command_dir(opt, "consistency", base.document);
    ConsistencyMap all;
    json per_p = json::array();
    for (std::size_t paths : spec.path_counts) {
        NetworkConfig cfg = base.network;
        cfg.n_paths = paths;
        cfg.per_path_capacity.reset();
        if (cfg.n_agents < paths) throw ScenarioError("consistency.P", "needs network.N >= P");
        const auto map = consistency_map(cfg, base.protocol, spec.rhos, spec.sigmas, opt.jobs);
        std::size_t bad = 0, divergent = 0;
        for (const auto& c : map) {
            bad += c.consistent ? 0 : 1;
            divergent += c.divergent ? 1 : 0;
        }
        per_p.push_back({{"P", paths},
                         {"cells", map.size()},
                         {"inconsistent", bad},
                         {"divergent", divergent},
                         {"inconsistent_fraction", static_cast<double>(bad) / static_cast<double>(map.size())}});
        all.insert(all.end(), map.begin(), map.end());
    }
    std::ostringstream os;
    write_consistency_csv(os, all);
    detail::write_text(out, "consistency.csv", os.str());
    out.summary = {{"command", "consistency"}, {"per_P", per_p}};
    if (base.outputs.json) detail::write_json(out, "summary.json", out.summary);
    return out;
}

}  // namespace mpcc
