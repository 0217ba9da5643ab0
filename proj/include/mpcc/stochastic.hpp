#pragma once

// Discrete-time stochastic simulator: N agents over P disjoint paths, greedy
// probabilistic migration towards the least utilized path, and the generic
// loss-based window rule driven by continuity time.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mpcc/core.hpp"
#include "mpcc/parallel.hpp"
#include "mpcc/rng.hpp"
#include "mpcc/trajectory.hpp"

namespace mpcc {

struct AgentState {
    double window = 1.0;
    ContinuityTime continuity = 0;
    std::size_t path = 0;
};

struct StochasticState {
    std::size_t t = 0;
    std::vector<AgentState> agents;

    std::vector<std::size_t> counts(std::size_t n_paths) const {
        std::vector<std::size_t> c(n_paths, 0);
        for (const auto& a : agents) ++c[a.path];
        return c;
    }

    std::vector<double> loads(std::size_t n_paths) const {
        std::vector<double> l(n_paths, 0.0);
        for (const auto& a : agents) l[a.path] += a.window;
        return l;
    }
};

/// Round-robin assignment: agent i starts on path i mod P.
struct UniformInit {};
/// Every agent starts on one path.
struct SinglePathInit {
    std::size_t path = 0;
};
/// Independent uniformly random path per agent, drawn from the init seed
/// when one is set (all streams then share one placement), else per stream.
struct RandomInit {};

struct InitPolicy {
    std::variant<UniformInit, SinglePathInit, RandomInit> placement = UniformInit{};
    double window = 1.0;
    bool require_full_coverage = false;
    std::optional<std::uint64_t> seed;
};

inline StochasticState init_state(const NetworkConfig& config, const InitPolicy& policy = {},
                                  std::uint64_t seed = 0) {
    if (!(policy.window > 0.0)) throw std::invalid_argument("run.init.window must be > 0");
    const std::size_t n = config.n_agents;
    const std::size_t paths = config.n_paths;
    StochasticState s;
    s.agents.resize(n);
    Rng rng(derive_seed(policy.seed.value_or(seed), 0xC0FFEE));
    for (std::size_t i = 0; i < n; ++i) {
        auto& a = s.agents[i];
        a.window = policy.window;
        a.continuity = 0;
        if (std::holds_alternative<UniformInit>(policy.placement)) {
            a.path = i % paths;
        } else if (const auto* single = std::get_if<SinglePathInit>(&policy.placement)) {
            if (single->path >= paths) throw std::invalid_argument("run.init.path out of range");
            a.path = single->path;
        } else {
            a.path = std::min(paths - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(paths)));
        }
    }
    if (policy.require_full_coverage) {
        for (std::size_t c : s.counts(paths))
            if (c == 0) throw std::invalid_argument("run.init placement leaves a path empty");
    }
    return s;
}

struct StepEvents {
    RankVector ranks;
    std::size_t min_path = 0;
    std::vector<bool> loss;
    std::vector<std::size_t> in_migrants;
    std::vector<std::size_t> out_migrants;
};

struct StochasticStepResult {
    StochasticState state;
    StepEvents events;
};

/// Advances one step. Ranks and loss are judged on the loads at time t.
/// Migrants take sigma * w and restart their continuity; the rest either
/// back off by gamma (their path was over capacity) or grow by alpha(tau).
inline StochasticStepResult step(const StochasticState& state, const NetworkConfig& config,
                                 const ProtocolParams& params, Rng& rng) {
    const std::size_t paths = config.n_paths;
    const auto loads = state.loads(paths);
    const auto caps = config.capacities();

    StochasticStepResult out;
    auto& ev = out.events;
    ev.ranks = compute_ranks(loads, caps);
    ev.min_path = ev.ranks.min_path();
    ev.loss.resize(paths);
    for (std::size_t p = 0; p < paths; ++p) ev.loss[p] = loads[p] > caps[p];
    ev.in_migrants.assign(paths, 0);
    ev.out_migrants.assign(paths, 0);

    out.state.t = state.t + 1;
    out.state.agents = state.agents;
    for (auto& a : out.state.agents) {
        if (a.path != ev.min_path && rng.bernoulli(params.rho)) {
            ++ev.out_migrants[a.path];
            ++ev.in_migrants[ev.min_path];
            a.path = ev.min_path;
            a.window = std::max(params.sigma * a.window, kWindowFloor);
            a.continuity = 0;
        } else if (ev.loss[a.path]) {
            a.window = std::max(params.gamma * a.window, kWindowFloor);
            a.continuity = 0;
        } else {
            a.window += params.alpha(a.continuity);
            ++a.continuity;
        }
    }
    return out;
}

/// Snapshot of a state as a trajectory record (migration columns zeroed).
inline StepRecord observe(const StochasticState& state, const NetworkConfig& config) {
    const std::size_t paths = config.n_paths;
    const auto counts = state.counts(paths);
    const auto loads = state.loads(paths);
    const auto caps = config.capacities();
    const auto ranks = compute_ranks(loads, caps);

    StepRecord rec;
    rec.t = state.t;
    rec.paths.resize(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        auto& s = rec.paths[p];
        s.agents = static_cast<double>(counts[p]);
        s.load = loads[p];
        s.rank = ranks[p];
        s.loss = loads[p] > caps[p];
    }
    const double n = static_cast<double>(state.agents.size());
    double mean = 0.0;
    for (const auto& a : state.agents) mean += a.window;
    mean /= n;
    double var = 0.0;
    for (const auto& a : state.agents) var += (a.window - mean) * (a.window - mean);
    rec.mean_window = mean;
    rec.window_variance = var / n;
    return rec;
}

/// Simulates `horizon` steps from `initial`.
inline Trajectory simulate(StochasticState initial, const NetworkConfig& config, const ProtocolParams& params,
                           std::size_t horizon, std::uint64_t stream_seed) {
    Rng rng(stream_seed);
    Trajectory traj;
    traj.steps.reserve(horizon + 1);
    StochasticState state = std::move(initial);
    for (std::size_t i = 0; i < horizon; ++i) {
        StepRecord rec = observe(state, config);
        auto res = step(state, config, params, rng);
        for (std::size_t p = 0; p < rec.paths.size(); ++p) {
            rec.paths[p].in_migrants = static_cast<double>(res.events.in_migrants[p]);
            rec.paths[p].out_migrants = static_cast<double>(res.events.out_migrants[p]);
        }
        traj.steps.push_back(std::move(rec));
        state = std::move(res.state);
    }
    traj.steps.push_back(observe(state, config));
    return traj;
}

struct RunOptions {
    std::size_t horizon = 100;
    std::uint64_t seed = 1;
    std::size_t n_seeds = 1;
    InitPolicy init{};
    std::size_t jobs = 1;
};

struct StochasticRun {
    std::vector<Trajectory> per_seed;
    /// Cross-seed mean, aggregated per path.
    Trajectory mean_by_path;
    /// Cross-seed mean, aggregated per rank: entry p of each record is the
    /// rank-p path averaged over seeds (its `rank` field is p).
    Trajectory mean_by_rank;
};

namespace detail {

inline Trajectory mean_trajectory(const std::vector<Trajectory>& runs, bool by_rank) {
    Trajectory mean;
    const std::size_t steps = runs.front().size();
    const std::size_t paths = runs.front().n_paths();
    const double inv = 1.0 / static_cast<double>(runs.size());
    mean.steps.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        auto& rec = mean.steps[t];
        rec.t = runs.front().steps[t].t;
        rec.paths.assign(paths, PathSample{});
        std::vector<double> loss_count(paths, 0.0);
        for (const auto& run : runs) {
            const auto& src = run.steps[t];
            rec.mean_window += src.mean_window * inv;
            rec.window_variance += src.window_variance * inv;
            for (std::size_t p = 0; p < paths; ++p) {
                const auto& s = src.paths[p];
                const std::size_t slot = by_rank ? s.rank : p;
                auto& d = rec.paths[slot];
                d.agents += s.agents * inv;
                d.load += s.load * inv;
                d.in_migrants += s.in_migrants * inv;
                d.out_migrants += s.out_migrants * inv;
                if (s.loss) loss_count[slot] += 1.0;
            }
        }
        std::vector<double> loads(paths), unit(paths, 1.0);
        for (std::size_t p = 0; p < paths; ++p) loads[p] = rec.paths[p].load;
        const auto ranks = compute_ranks(loads, unit);
        for (std::size_t p = 0; p < paths; ++p) {
            rec.paths[p].rank = by_rank ? p : ranks[p];
            // Majority vote across seeds.
            rec.paths[p].loss = 2.0 * loss_count[p] > static_cast<double>(runs.size());
        }
    }
    return mean;
}

}  // namespace detail

/// Runs n_seeds independent trajectories. Stream i uses derive_seed(seed, i).
inline StochasticRun run(const NetworkConfig& config, const ProtocolParams& params, const RunOptions& opt) {
    if (opt.horizon < 1) throw std::invalid_argument("run.horizon must be >= 1");
    if (opt.n_seeds < 1) throw std::invalid_argument("run.seeds must be >= 1");
    config.validate();
    params.validate();

    StochasticRun out;
    out.per_seed.resize(opt.n_seeds);
    parallel_for(opt.n_seeds, opt.jobs, [&](std::size_t i) {
        const std::uint64_t s = derive_seed(opt.seed, i);
        out.per_seed[i] = simulate(init_state(config, opt.init, s), config, params, opt.horizon, s);
    });
    out.mean_by_path = detail::mean_trajectory(out.per_seed, false);
    out.mean_by_rank = detail::mean_trajectory(out.per_seed, true);
    return out;
}

}  // namespace mpcc
