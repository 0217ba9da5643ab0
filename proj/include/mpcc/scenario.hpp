#pragma once

// Scenario files: JSON documents with a fixed field tree (network, protocol,
// run, outputs, plus optional sweep / consistency sections), dotted-path
// overrides and validation that names the offending field.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcc/core.hpp"
#include "mpcc/stochastic.hpp"

namespace mpcc {

using json = nlohmann::json;

class ScenarioError : public std::invalid_argument {
public:
    ScenarioError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct RunSpec {
    std::size_t horizon = 1000;
    std::size_t seeds = 1;
    std::uint64_t seed = 1;
    InitPolicy init{};
};

struct OutputSpec {
    std::string directory;  // empty: decided by the front end
    bool csv = true;
    bool json = true;
};

struct Scenario {
    NetworkConfig network;
    ProtocolParams protocol;
    RunSpec run;
    OutputSpec outputs;
    json document;  // the resolved source, overrides applied

    RunOptions run_options(std::size_t jobs = 1) const {
        RunOptions o;
        o.horizon = run.horizon;
        o.seed = run.seed;
        o.n_seeds = run.seeds;
        o.init = run.init;
        o.jobs = jobs;
        return o;
    }
};

namespace detail {

inline const json* find_field(const json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double number_at(const json& obj, const std::string& prefix, const char* key) {
    const json* v = find_field(obj, key);
    const std::string name = prefix + "." + key;
    if (!v) throw ScenarioError(name, "missing");
    if (!v->is_number()) throw ScenarioError(name, "must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ScenarioError(name, "must be finite");
    return d;
}

inline double number_or(const json& obj, const std::string& prefix, const char* key, double fallback) {
    return find_field(obj, key) ? number_at(obj, prefix, key) : fallback;
}

inline std::uint64_t count_at(const json& obj, const std::string& prefix, const char* key) {
    const json* v = find_field(obj, key);
    const std::string name = prefix + "." + key;
    if (!v) throw ScenarioError(name, "missing");
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) {
        if (v->get<std::int64_t>() < 0) throw ScenarioError(name, "must be non-negative");
        return static_cast<std::uint64_t>(v->get<std::int64_t>());
    }
    if (v->is_number_float()) {
        const double d = v->get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    throw ScenarioError(name, "must be a non-negative integer");
}

inline std::uint64_t count_or(const json& obj, const std::string& prefix, const char* key, std::uint64_t fallback) {
    return find_field(obj, key) ? count_at(obj, prefix, key) : fallback;
}

inline void only_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ScenarioError(prefix, "must be an object");
    for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const char* allowed : keys) known = known || k == allowed;
        if (!known) throw ScenarioError(prefix.empty() ? k : prefix + "." + k, "unknown field");
    }
}

inline const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    const json* s = find_field(doc, key);
    return s ? *s : empty;
}

inline AlphaFunction parse_alpha(const json& a) {
    const std::string prefix = "protocol.alpha";
    std::string kind;
    if (a.is_string()) {
        kind = a.get<std::string>();
    } else if (a.is_object()) {
        const json* k = find_field(a, "kind");
        if (!k || !k->is_string()) throw ScenarioError(prefix + ".kind", "missing or not a string");
        kind = k->get<std::string>();
    } else {
        throw ScenarioError(prefix, "must be a string or an object");
    }
    const json& o = a.is_object() ? a : json::object();
    AlphaFunction f;
    if (kind == "reno") {
        only_keys(o, prefix, {"kind"});
        f = AlphaFunction::reno();
    } else if (kind == "constant") {
        only_keys(o, prefix, {"kind", "value"});
        f = AlphaFunction::constant(number_at(o, prefix, "value"));
    } else if (kind == "slow_start") {
        only_keys(o, prefix, {"kind", "base", "cap"});
        f = AlphaFunction::slow_start(number_at(o, prefix, "base"), number_at(o, prefix, "cap"));
    } else if (kind == "table") {
        only_keys(o, prefix, {"kind", "values", "tail"});
        const json* vs = find_field(o, "values");
        if (!vs || !vs->is_array() || vs->empty())
            throw ScenarioError(prefix + ".values", "must be a non-empty array");
        std::vector<double> values;
        for (const auto& v : *vs) {
            if (!v.is_number()) throw ScenarioError(prefix + ".values", "must contain numbers only");
            values.push_back(v.get<double>());
        }
        std::optional<double> tail;
        if (find_field(o, "tail")) tail = number_at(o, prefix, "tail");
        f = AlphaFunction::table(std::move(values), tail);
    } else {
        throw ScenarioError(prefix + ".kind", "unknown kind '" + kind + "' (reno, constant, slow_start, table)");
    }
    return f;
}

inline InitPolicy parse_init(const json& o) {
    const std::string prefix = "run.init";
    only_keys(o, prefix, {"policy", "path", "window", "seed", "full_coverage"});
    InitPolicy p;
    std::string policy = "uniform";
    if (const json* v = find_field(o, "policy")) {
        if (!v->is_string()) throw ScenarioError(prefix + ".policy", "must be a string");
        policy = v->get<std::string>();
    }
    if (policy == "uniform") {
        p.placement = UniformInit{};
    } else if (policy == "single") {
        p.placement = SinglePathInit{static_cast<std::size_t>(count_or(o, prefix, "path", 0))};
    } else if (policy == "random") {
        p.placement = RandomInit{};
    } else {
        throw ScenarioError(prefix + ".policy", "unknown policy '" + policy + "' (uniform, single, random)");
    }
    p.window = number_or(o, prefix, "window", 1.0);
    if (!(p.window > 0.0)) throw ScenarioError(prefix + ".window", "must be > 0");
    if (find_field(o, "seed")) p.seed = count_at(o, prefix, "seed");
    if (const json* v = find_field(o, "full_coverage")) {
        if (!v->is_boolean()) throw ScenarioError(prefix + ".full_coverage", "must be a boolean");
        p.require_full_coverage = v->get<bool>();
    }
    return p;
}

// Re-raises core-model invariant violations ("protocol.rho must be ...") as
// field errors.
template <class Fn>
void validated(Fn&& fn) {
    try {
        fn();
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const auto space = msg.find(' ');
        throw ScenarioError(msg.substr(0, space), space == std::string::npos ? "invalid" : msg.substr(space + 1));
    }
}

}  // namespace detail

/// Builds and validates a scenario. Sections named in `extra_sections` are
/// tolerated at the top level and left for the caller.
inline Scenario parse_scenario(const json& doc, std::initializer_list<const char*> extra_sections = {"sweep", "consistency"}) {
    using namespace detail;
    if (!doc.is_object()) throw ScenarioError("scenario", "must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
        bool known = k == "network" || k == "protocol" || k == "run" || k == "outputs";
        for (const char* s : extra_sections) known = known || k == s;
        if (!known) throw ScenarioError(k, "unknown field");
    }
    Scenario s;
    s.document = doc;

    const json& net = section(doc, "network");
    only_keys(net, "network", {"N", "P", "C", "capacities"});
    s.network.n_agents = count_at(net, "network", "N");
    s.network.n_paths = count_at(net, "network", "P");
    s.network.total_capacity = number_at(net, "network", "C");
    if (const json* caps = find_field(net, "capacities")) {
        if (!caps->is_array()) throw ScenarioError("network.capacities", "must be an array");
        std::vector<double> c;
        for (const auto& v : *caps) {
            if (!v.is_number()) throw ScenarioError("network.capacities", "must contain numbers only");
            c.push_back(v.get<double>());
        }
        s.network.per_path_capacity = std::move(c);
    }
    validated([&] { s.network.validate(); });

    const json& proto = section(doc, "protocol");
    only_keys(proto, "protocol", {"rho", "sigma", "gamma", "alpha"});
    s.protocol.rho = number_at(proto, "protocol", "rho");
    s.protocol.sigma = number_at(proto, "protocol", "sigma");
    s.protocol.gamma = number_at(proto, "protocol", "gamma");
    if (const json* a = find_field(proto, "alpha")) s.protocol.alpha = parse_alpha(*a);
    validated([&] { s.protocol.validate(); });

    const json& run = section(doc, "run");
    only_keys(run, "run", {"horizon", "seeds", "seed", "init"});
    s.run.horizon = count_or(run, "run", "horizon", s.run.horizon);
    s.run.seeds = count_or(run, "run", "seeds", s.run.seeds);
    s.run.seed = count_or(run, "run", "seed", s.run.seed);
    if (s.run.horizon < 1) throw ScenarioError("run.horizon", "must be >= 1");
    if (s.run.seeds < 1) throw ScenarioError("run.seeds", "must be >= 1");
    if (const json* init = find_field(run, "init")) s.run.init = parse_init(*init);
    if (s.run.init.require_full_coverage)
        validated([&] { init_state(s.network, s.run.init, s.run.seed); });
    if (const auto* single = std::get_if<SinglePathInit>(&s.run.init.placement))
        if (single->path >= s.network.n_paths) throw ScenarioError("run.init.path", "must be < network.P");

    const json& out = section(doc, "outputs");
    only_keys(out, "outputs", {"directory", "formats"});
    if (const json* d = find_field(out, "directory")) {
        if (!d->is_string()) throw ScenarioError("outputs.directory", "must be a string");
        s.outputs.directory = d->get<std::string>();
    }
    if (const json* f = find_field(out, "formats")) {
        if (!f->is_array()) throw ScenarioError("outputs.formats", "must be an array");
        s.outputs.csv = s.outputs.json = false;
        for (const auto& v : *f) {
            const std::string name = v.is_string() ? v.get<std::string>() : "";
            if (name == "csv") s.outputs.csv = true;
            else if (name == "json") s.outputs.json = true;
            else throw ScenarioError("outputs.formats", "entries must be \"csv\" or \"json\"");
        }
    }
    return s;
}

/// Applies `path=value` to the document. The value is read as JSON when it
/// parses as such and as a plain string otherwise.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ScenarioError(assignment, "override must look like key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ScenarioError(path, "empty path component");
        if (!node->is_object()) {
            if (!node->is_null()) throw ScenarioError(path, "cannot descend into a non-object");
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

/// Grid values: a JSON array of numbers or {"from", "to", "step"}.
inline std::vector<double> parse_grid(const json& g, const std::string& field) {
    std::vector<double> out;
    if (g.is_array()) {
        for (const auto& v : g) {
            if (!v.is_number()) throw ScenarioError(field, "must contain numbers only");
            out.push_back(v.get<double>());
        }
    } else if (g.is_object()) {
        detail::only_keys(g, field, {"from", "to", "step"});
        const double from = detail::number_at(g, field, "from");
        const double to = detail::number_at(g, field, "to");
        const double step = detail::number_at(g, field, "step");
        if (!(step > 0.0) || to < from) throw ScenarioError(field, "needs step > 0 and to >= from");
        const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            // Snap to 12 decimals so that 0.05 * 3 prints as 0.15.
            out.push_back(std::round((from + static_cast<double>(i) * step) * 1e12) / 1e12);
        }
    } else {
        throw ScenarioError(field, "must be an array or {from, to, step}");
    }
    if (out.empty()) throw ScenarioError(field, "must not be empty");
    return out;
}

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

struct SweepSpec {
    std::vector<SweepAxis> axes;
    std::vector<std::string> metrics;  // empty: all
};

inline const std::vector<std::string>& sweepable_parameters() {
    static const std::vector<std::string> names = {
        "network.N",         "network.P",       "network.C",           "protocol.rho",
        "protocol.sigma",    "protocol.gamma",  "protocol.alpha.value", "protocol.alpha.base",
        "protocol.alpha.cap", "protocol.alpha.tail", "run.horizon",     "run.seeds",
        "run.seed",          "run.init.window", "run.init.seed"};
    return names;
}

inline const std::vector<std::string>& sweep_metrics() {
    static const std::vector<std::string> names = {"epsilon", "lambda", "gamma_conv", "eta", "delta"};
    return names;
}

inline SweepSpec parse_sweep(const json& doc) {
    const json* sw = detail::find_field(doc, "sweep");
    if (!sw) throw ScenarioError("sweep", "missing");
    detail::only_keys(*sw, "sweep", {"axes", "metrics"});
    SweepSpec spec;
    const json* axes = detail::find_field(*sw, "axes");
    if (!axes || !axes->is_array() || axes->empty()) throw ScenarioError("sweep.axes", "must be a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < axes->size(); ++i) {
        const std::string field = "sweep.axes[" + std::to_string(i) + "]";
        const json& a = (*axes)[i];
        detail::only_keys(a, field, {"name", "values"});
        const json* name = detail::find_field(a, "name");
        if (!name || !name->is_string()) throw ScenarioError(field + ".name", "missing or not a string");
        SweepAxis axis{name->get<std::string>(), {}};
        const auto& known = sweepable_parameters();
        if (std::find(known.begin(), known.end(), axis.name) == known.end())
            throw ScenarioError(field + ".name", "'" + axis.name + "' is not a sweepable parameter");
        if (!seen.insert(axis.name).second) throw ScenarioError(field + ".name", "duplicate axis");
        const json* values = detail::find_field(a, "values");
        if (!values) throw ScenarioError(field + ".values", "missing");
        axis.values = parse_grid(*values, field + ".values");
        std::sort(axis.values.begin(), axis.values.end());
        spec.axes.push_back(std::move(axis));
    }
    if (const json* m = detail::find_field(*sw, "metrics")) {
        if (!m->is_array()) throw ScenarioError("sweep.metrics", "must be an array");
        for (const auto& v : *m) {
            const std::string name = v.is_string() ? v.get<std::string>() : "";
            const auto& known = sweep_metrics();
            if (std::find(known.begin(), known.end(), name) == known.end())
                throw ScenarioError("sweep.metrics", "unknown metric '" + name + "'");
            spec.metrics.push_back(name);
        }
    }
    return spec;
}

struct ConsistencySpec {
    std::vector<double> rhos;
    std::vector<double> sigmas;
    std::vector<std::size_t> path_counts;
};

/// Defaults to the full 0.05-step grid at the scenario's P.
inline ConsistencySpec parse_consistency(const json& doc, const Scenario& base) {
    ConsistencySpec spec;
    const json& c = detail::section(doc, "consistency");
    detail::only_keys(c, "consistency", {"rho", "sigma", "P"});
    const json* r = detail::find_field(c, "rho");
    const json* s = detail::find_field(c, "sigma");
    spec.rhos = parse_grid(r ? *r : json{{"from", 0.05}, {"to", 0.95}, {"step", 0.05}}, "consistency.rho");
    spec.sigmas = parse_grid(s ? *s : json{{"from", 0.0}, {"to", 1.0}, {"step", 0.05}}, "consistency.sigma");
    if (const json* p = detail::find_field(c, "P")) {
        if (!p->is_array() || p->empty()) throw ScenarioError("consistency.P", "must be a non-empty array");
        for (const auto& v : *p) {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 2)
                throw ScenarioError("consistency.P", "entries must be integers >= 2");
            spec.path_counts.push_back(static_cast<std::size_t>(v.get<std::int64_t>()));
        }
    } else {
        spec.path_counts.push_back(base.network.n_paths);
    }
    for (double v : spec.rhos)
        if (!(v > 0.0 && v <= 1.0)) throw ScenarioError("consistency.rho", "values must be in (0, 1]");
    for (double v : spec.sigmas)
        if (!(v >= 0.0 && v <= 1.0)) throw ScenarioError("consistency.sigma", "values must be in [0, 1]");
    return spec;
}

/// 64-bit FNV-1a of the canonical dump (keys sorted, no whitespace).
inline std::string scenario_hash(const json& doc) {
    const std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    return out;
}

}  // namespace mpcc
