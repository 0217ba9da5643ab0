#pragma once

// Closed-form characterization of the dynamic equilibria of the expected
// dynamics under the P-step oscillation: per-rank agent counts, the lossless
// flow cycle, trajectory functions, lossy-regime bounds and the consistency
// check of the P-step assumption.

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpcc/core.hpp"
#include "mpcc/mean_field.hpp"
#include "mpcc/parallel.hpp"

namespace mpcc {

/// Raised when the hypothetical lossless cycle has no finite fixed point.
class DivergentEquilibrium : public std::domain_error {
public:
    DivergentEquilibrium()
        : std::domain_error("no lossless equilibrium; lossy regime with unbounded hypothetical peak") {}
};

enum class Regime { lossless, lossy };

inline const char* to_string(Regime r) { return r == Regime::lossless ? "lossless" : "lossy"; }

struct AgentEquilibrium {
    std::vector<double> per_rank;

    double total() const { return std::accumulate(per_rank.begin(), per_rank.end(), 0.0); }
};

/// (1 - rho)^k computed through log1p so that tiny rho keeps its precision.
inline double survival(double rho, double k) {
    if (rho >= 1.0) return k == 0.0 ? 1.0 : 0.0;
    return std::exp(k * std::log1p(-rho));
}

inline AgentEquilibrium agent_equilibrium(double n_agents, std::size_t n_paths, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("agent_equilibrium requires rho in (0, 1]");
    if (n_paths < 2) throw std::invalid_argument("agent_equilibrium requires P >= 2");
    AgentEquilibrium eq;
    eq.per_rank.assign(n_paths, 0.0);
    if (rho == 1.0) {
        eq.per_rank[0] = n_agents;
        return eq;
    }
    // 1 - (1-rho)^P without cancellation.
    const double refill = -std::expm1(static_cast<double>(n_paths) * std::log1p(-rho));
    for (std::size_t p = 0; p < n_paths; ++p)
        eq.per_rank[p] = survival(rho, static_cast<double>(p)) * rho * n_agents / refill;
    return eq;
}

/// Agent count of a path that held `start` agents when it entered rank p at
/// `t_start`, interpolated to time t.
inline double agent_trajectory(double start, double equilibrium, double rho, double t, double t_start) {
    if (t < t_start) throw std::invalid_argument("agent_trajectory requires t >= t_start");
    return (start - equilibrium) * survival(rho, t - t_start) + equilibrium;
}

/// Ingredients of the hypothetical lossless cycle.
struct CycleCoefficients {
    AgentEquilibrium agents;
    std::vector<double> mean_increase;  // expected additive increase per rank
    double z = 0.0;                     // extrapolation factor at the rank P-1 path
    double growth = 1.0;                // 1 + rho * sigma * z
    double stay = 1.0;                  // (1 - rho)^(P-1)
    double contraction = 1.0;           // growth * stay, per P-step cycle

    std::size_t n_paths() const { return mean_increase.size(); }
};

inline CycleCoefficients cycle_coefficients(const NetworkConfig& config, const ProtocolParams& params) {
    const double rho = params.rho;
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("the P-step flow cycle requires rho in (0, 1)");
    const std::size_t paths = config.n_paths;
    const double n = static_cast<double>(config.n_agents);
    CycleCoefficients c;
    c.agents = agent_equilibrium(n, paths, rho);
    c.mean_increase.resize(paths);
    for (std::size_t p = 0; p < paths; ++p) c.mean_increase[p] = expected_additive_increase(p, params, paths);
    const double last = c.agents.per_rank.back();
    c.z = (n - last) / last;
    c.growth = 1.0 + rho * params.sigma * c.z;
    c.stay = survival(rho, static_cast<double>(paths - 1));
    c.contraction = c.growth * c.stay;
    return c;
}

/// One step of the hypothetical lossless dynamics for a path at `rank`.
inline double hypothetical_step(const CycleCoefficients& c, std::size_t rank, double load, double rho) {
    const std::size_t last = c.n_paths() - 1;
    const double inc = c.mean_increase[rank] * c.agents.per_rank[rank];
    if (rank != last) return (1.0 - rho) * (load + inc);
    return c.growth * load + inc;
}

/// Closed-form peak (rank 0) load of the lossless cycle. Throws
/// DivergentEquilibrium when the cycle does not contract.
inline double closed_form_peak(const CycleCoefficients& c) {
    const std::size_t last = c.n_paths() - 1;
    const double denom = 1.0 - c.contraction;
    if (!(denom > 1e-12)) throw DivergentEquilibrium();
    double head = 0.0;
    for (std::size_t p = 0; p < last; ++p) head += c.mean_increase[p];
    return (c.growth * head + c.mean_increase[last]) * c.agents.per_rank[last] / denom;
}

/// Closed-form trough (rank P-1) load of the lossless cycle.
inline double closed_form_trough(const CycleCoefficients& c) {
    const std::size_t last = c.n_paths() - 1;
    const double denom = 1.0 - c.contraction;
    if (!(denom > 1e-12)) throw DivergentEquilibrium();
    double head = 0.0;
    for (std::size_t p = 0; p < last; ++p) head += c.mean_increase[p];
    return (head + c.mean_increase[last] * c.stay) * c.agents.per_rank[last] / denom;
}

struct LossyBounds {
    double lower = 0.0;
    double upper = 0.0;
};

struct FlowEquilibrium {
    CycleCoefficients cycle;
    std::vector<double> per_rank;  // hypothetical lossless loads
    Regime regime = Regime::lossless;
    double capacity_per_path = 0.0;
    std::optional<LossyBounds> bounds;

    double peak() const { return per_rank.front(); }
    double trough() const { return per_rank.back(); }
};

inline double capacity_per_path(const NetworkConfig& config) {
    return config.total_capacity / static_cast<double>(config.n_paths);
}

/// Lossy-regime bounds. The lower bound is gamma (1-rho)^(P-1) C/P; the upper
/// bound advances the hypothetical cycle one full period from a rank-0 path
/// sitting exactly at capacity.
inline LossyBounds lossy_bounds_from(const CycleCoefficients& c, const ProtocolParams& params, double cap) {
    LossyBounds b;
    b.lower = params.gamma * c.stay * cap;
    double load = cap;
    for (std::size_t r = 0; r < c.n_paths(); ++r) load = hypothetical_step(c, r, load, params.rho);
    b.upper = load;
    return b;
}

/// Per-rank loads of the lossless cycle: the peak from its closed form, the
/// remaining ranks by forward substitution through the cycle.
inline FlowEquilibrium flow_equilibrium(const NetworkConfig& config, const ProtocolParams& params) {
    config.validate();
    params.validate();
    FlowEquilibrium eq;
    eq.cycle = cycle_coefficients(config, params);
    eq.capacity_per_path = capacity_per_path(config);
    const std::size_t paths = config.n_paths;
    eq.per_rank.resize(paths);
    eq.per_rank[0] = closed_form_peak(eq.cycle);
    for (std::size_t p = 0; p + 1 < paths; ++p)
        eq.per_rank[p + 1] = hypothetical_step(eq.cycle, p, eq.per_rank[p], params.rho);
    eq.regime = eq.per_rank[0] <= eq.capacity_per_path ? Regime::lossless : Regime::lossy;
    if (eq.regime == Regime::lossy) eq.bounds = lossy_bounds_from(eq.cycle, params, eq.capacity_per_path);
    return eq;
}

/// Regime without throwing: a divergent hypothetical cycle is necessarily lossy.
inline Regime classify_regime(const NetworkConfig& config, const ProtocolParams& params) {
    try {
        return flow_equilibrium(config, params).regime;
    } catch (const DivergentEquilibrium&) {
        return Regime::lossy;
    }
}

inline LossyBounds lossy_bounds(const NetworkConfig& config, const ProtocolParams& params) {
    config.validate();
    params.validate();
    const auto c = cycle_coefficients(config, params);
    const double cap = capacity_per_path(config);
    try {
        if (closed_form_peak(c) <= cap) throw std::logic_error("lossy_bounds called in the lossless regime");
    } catch (const DivergentEquilibrium&) {
    }
    return lossy_bounds_from(c, params, cap);
}

/// Load of a path that entered rank p at t_start with `start`, interpolated
/// to time t. The deviation shrinks by `contraction` once per P steps.
inline double flow_trajectory(double start, double equilibrium, double contraction, std::size_t n_paths, double t,
                              double t_start) {
    if (!(contraction < 1.0)) throw std::domain_error("flow_trajectory requires a contraction factor < 1");
    if (t < t_start) throw std::invalid_argument("flow_trajectory requires t >= t_start");
    return (start - equilibrium) * std::pow(contraction, (t - t_start) / static_cast<double>(n_paths)) +
           equilibrium;
}

inline double flow_trajectory(const FlowEquilibrium& eq, double start, std::size_t rank, double t, double t_start) {
    return flow_trajectory(start, eq.per_rank.at(rank), eq.cycle.contraction, eq.per_rank.size(), t, t_start);
}

struct ConsistencyCell {
    double rho = 0.0;
    double sigma = 0.0;
    std::size_t n_paths = 0;
    bool consistent = true;
    bool divergent = false;
    double peak = std::numeric_limits<double>::quiet_NaN();    // hypothetical rank-0 load
    double trough = std::numeric_limits<double>::quiet_NaN();  // hypothetical rank P-1 load
};

using ConsistencyMap = std::vector<ConsistencyCell>;

/// Checks the P-step assumption for one (rho, sigma): the hypothetical cycle
/// must converge and its per-rank loads must be non-increasing in rank.
inline ConsistencyCell check_consistency(const NetworkConfig& config, const ProtocolParams& params) {
    ConsistencyCell cell{params.rho, params.sigma, config.n_paths};
    if (params.rho >= 1.0) return cell;  // everything lands on one path
    try {
        const auto eq = flow_equilibrium(config, params);
        cell.peak = eq.peak();
        cell.trough = eq.trough();
        for (std::size_t p = 0; p + 1 < eq.per_rank.size(); ++p)
            if (eq.per_rank[p + 1] > eq.per_rank[p]) cell.consistent = false;
    } catch (const DivergentEquilibrium&) {
        cell.consistent = false;
        cell.divergent = true;
    }
    return cell;
}

/// Evaluates check_consistency over rhos x sigmas (rho-major order).
inline ConsistencyMap consistency_map(const NetworkConfig& config, const ProtocolParams& base,
                                      const std::vector<double>& rhos, const std::vector<double>& sigmas,
                                      std::size_t jobs = 1) {
    if (rhos.empty() || sigmas.empty()) throw std::invalid_argument("consistency grid must be non-empty");
    ConsistencyMap map(rhos.size() * sigmas.size());
    parallel_for(map.size(), jobs, [&](std::size_t i) {
        ProtocolParams p = base;
        p.rho = rhos[i / sigmas.size()];
        p.sigma = sigmas[i % sigmas.size()];
        map[i] = check_consistency(config, p);
    });
    return map;
}

}  // namespace mpcc
