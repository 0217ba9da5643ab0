#pragma once

// JSON and CSV renderings of parameters, equilibria and ratings.

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcc/axioms.hpp"
#include "mpcc/core.hpp"
#include "mpcc/equilibrium.hpp"
#include "mpcc/trajectory.hpp"

namespace mpcc {

using json = nlohmann::json;

namespace detail {

// NaN and infinities have no JSON spelling; they become null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const AlphaFunction& a) {
    return std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConstantIncrease>) {
                if (k.value == 1.0) return {{"kind", "reno"}};
                return {{"kind", "constant"}, {"value", k.value}};
            } else if constexpr (std::is_same_v<K, SlowStartIncrease>) {
                return {{"kind", "slow_start"}, {"base", k.base}, {"cap", k.cap}};
            } else {
                return {{"kind", "table"}, {"values", k.values}, {"tail", k.tail}};
            }
        },
        a.kind());
}

inline json to_json(const NetworkConfig& c) {
    json j = {{"N", c.n_agents}, {"P", c.n_paths}, {"C", c.total_capacity}};
    if (c.per_path_capacity) j["capacities"] = *c.per_path_capacity;
    return j;
}

inline json to_json(const ProtocolParams& p) {
    return {{"rho", p.rho}, {"sigma", p.sigma}, {"gamma", p.gamma}, {"alpha", to_json(p.alpha)}};
}

inline json to_json(const LossyBounds& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

inline json to_json(const FlowEquilibrium& eq) {
    json j;
    j["regime"] = to_string(eq.regime);
    j["per_rank"] = eq.per_rank;
    j["Lhat0"] = eq.peak();
    j["LhatPm1"] = eq.trough();
    j["agents_per_rank"] = eq.cycle.agents.per_rank;
    j["mean_increase_per_rank"] = eq.cycle.mean_increase;
    j["z"] = eq.cycle.z;
    j["contraction"] = eq.cycle.contraction;
    j["capacity_per_path"] = eq.capacity_per_path;
    j["bounds"] = eq.bounds ? to_json(*eq.bounds) : json(nullptr);
    return j;
}

inline json to_json(const StaticBaseline& s) {
    return {{"epsilon", s.epsilon}, {"lambda", s.lambda}, {"gamma_conv", s.gamma_conv}, {"eta", s.eta}};
}

inline json to_json(const StaticComparison& d) {
    return {{"d_epsilon", d.d_epsilon},
            {"d_lambda", d.d_lambda},
            {"d_gamma_conv", d.d_gamma_conv},
            {"d_eta", detail::optional_number(d.d_eta)}};
}

inline json to_json(const NetworkConfig& c, const ProtocolParams& p) {
    return {{"network", to_json(c)}, {"protocol", to_json(p)}};
}

/// {params, regime, epsilon, lambda, gamma_conv, eta, rho, bounds, t0} plus
/// standard errors, provenance and flags.
inline json to_json(const AxiomRatings& r, const NetworkConfig& c, const ProtocolParams& p) {
    using detail::number_or_null;
    using detail::optional_number;
    json j;
    j["params"] = to_json(c, p);
    j["regime"] = to_string(r.regime);
    j["regime_source"] = r.regime_analytical ? "analytical" : "measured";
    j["epsilon"] = number_or_null(r.epsilon.value);
    j["lambda"] = number_or_null(r.lambda.value);
    j["gamma_conv"] = number_or_null(r.gamma_conv.value);
    j["eta"] = number_or_null(r.eta.value);
    j["rho"] = r.rho;
    j["std_errors"] = {{"epsilon", optional_number(r.epsilon.std_error)},
                       {"lambda", optional_number(r.lambda.std_error)},
                       {"gamma_conv", optional_number(r.gamma_conv.std_error)},
                       {"eta", optional_number(r.eta.std_error)}};
    j["provenance"] = {{"epsilon", to_string(r.epsilon.provenance)},
                       {"lambda", to_string(r.lambda.provenance)},
                       {"gamma_conv", to_string(r.gamma_conv.provenance)},
                       {"eta", to_string(r.eta.provenance)},
                       {"bounds", to_string(Provenance::analytical_bound)}};
    json bounds;
    bounds["epsilon"] = {{"lower", optional_number(r.epsilon.lower_bound)},
                         {"upper", optional_number(r.epsilon.upper_bound)}};
    bounds["lambda"] = {{"lower", optional_number(r.lambda.lower_bound)},
                        {"upper", optional_number(r.lambda.upper_bound)}};
    bounds["gamma_conv"] = {{"lower", optional_number(r.gamma_conv.lower_bound)},
                            {"upper", optional_number(r.gamma_conv.upper_bound)}};
    bounds["load"] = r.load_bounds ? to_json(*r.load_bounds) : json(nullptr);
    bounds["equilibrium"] = r.equilibrium ? to_json(*r.equilibrium) : json(nullptr);
    j["bounds"] = bounds;
    j["t0"] = r.convergence.t0;
    j["cycle"] = {{"lag", r.convergence.lag}, {"length", r.convergence.cycle}, {"window_end", r.window_end}};
    j["flags"] = r.flags;
    return j;
}

inline void write_consistency_csv(std::ostream& os, const ConsistencyMap& map) {
    using detail::format_real;
    os << "rho,sigma,P,consistent,Lhat0,LhatPm1\n";
    for (const auto& c : map) {
        os << format_real(c.rho) << ',' << format_real(c.sigma) << ',' << c.n_paths << ',' << (c.consistent ? 1 : 0)
           << ',' << (std::isnan(c.peak) ? std::string() : format_real(c.peak)) << ','
           << (std::isnan(c.trough) ? std::string() : format_real(c.trough)) << '\n';
    }
}

}  // namespace mpcc
