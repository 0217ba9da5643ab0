// Command-line front end: mpcc <command> --scenario file [--set k=v]... [--seed n] [--jobs n] [--out dir]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpcc/harness.hpp"

namespace {

struct Flags {
    std::string scenario;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out;
};

mpcc::json load_document(const Flags& f) {
    std::ifstream in(f.scenario);
    if (!in) throw mpcc::ScenarioError("--scenario", "cannot open '" + f.scenario + "'");
    mpcc::json doc = mpcc::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw mpcc::ScenarioError("--scenario", "'" + f.scenario + "' is not valid JSON");
    for (const auto& o : f.overrides) mpcc::apply_override(doc, o);
    if (f.seed) doc["run"]["seed"] = *f.seed;
    return doc;
}

mpcc::HarnessOptions harness_options(const Flags& f, const mpcc::json& doc) {
    mpcc::HarnessOptions h;
    h.jobs = f.jobs == 0 ? mpcc::default_jobs() : f.jobs;
    if (!f.out.empty()) {
        h.out_root = f.out;
    } else if (doc.contains("outputs") && doc["outputs"].contains("directory") &&
               doc["outputs"]["directory"].is_string()) {
        h.out_root = doc["outputs"]["directory"].get<std::string>();
    } else if (const char* env = std::getenv(mpcc::kOutDirEnv); env && *env) {
        h.out_root = env;
    }
    return h;
}

int dispatch(const std::string& command, const Flags& f) {
    const mpcc::json doc = load_document(f);
    const auto opt = harness_options(f, doc);
    mpcc::CommandOutput out;
    if (command == "sweep") {
        out = mpcc::cmd_sweep(doc, opt);
    } else if (command == "consistency") {
        out = mpcc::cmd_consistency(doc, opt);
    } else {
        const auto s = mpcc::parse_scenario(doc);
        if (command == "simulate") out = mpcc::cmd_simulate(s, opt);
        else if (command == "expected") out = mpcc::cmd_expected(s, opt);
        else if (command == "rate") out = mpcc::cmd_rate(s, opt);
        else out = mpcc::cmd_compare_static(s, opt);
    }
    std::cout << out.directory.string() << '\n';
    for (const auto& file : out.files) std::cout << "  " << file << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Path-aware congestion control: simulation, expected dynamics and axiomatic ratings"};
    app.require_subcommand(1);
    Flags flags;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "stochastic runs: per-seed and mean trajectories plus a summary"},
        {"expected", "expected dynamics trajectory and equilibrium report"},
        {"rate", "axiomatic ratings of the converged equilibrium"},
        {"sweep", "ratings over the scenario's sweep grid"},
        {"consistency", "consistency map of the P-step assumption"},
        {"compare-static", "ratings against the static baseline"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--scenario", flags.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", flags.overrides, "override a scenario leaf, e.g. protocol.rho=0.3");
        sub->add_option("--seed", flags.seed, "base seed (overrides run.seed)");
        sub->add_option("--jobs", flags.jobs, "parallel jobs, 0 = all cores")->capture_default_str();
        sub->add_option("--out", flags.out,
                        std::string("output root (default: outputs.directory, then $") + mpcc::kOutDirEnv +
                            ", then ./" + mpcc::kDefaultOutDir + ")");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, flags);
    } catch (const mpcc::ScenarioError& e) {
        std::cerr << "invalid scenario: " << e.what() << '\n';
        return 2;
    } catch (const mpcc::NotConverged& e) {
        std::cerr << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
