#pragma once

// Deterministic expected (mean-field) dynamics. Agent counts and loads are
// replaced by their expectations; the average additive increase of a path is
// taken over an explicitly evolved continuity-time histogram.

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mpcc/core.hpp"
#include "mpcc/stochastic.hpp"
#include "mpcc/trajectory.hpp"

namespace mpcc {

/// Last histogram bin; it also holds all mass with tau >= kMaxContinuity.
inline constexpr ContinuityTime kMaxContinuity = 512;

using ContinuityHistogram = std::vector<double>;

inline ContinuityHistogram fresh_histogram() {
    ContinuityHistogram h(kMaxContinuity + 1, 0.0);
    h[0] = 1.0;
    return h;
}

struct MeanFieldState {
    std::size_t t = 0;
    std::vector<double> agents;
    std::vector<double> loads;
    std::vector<ContinuityHistogram> continuity;

    double total_agents() const { return std::accumulate(agents.begin(), agents.end(), 0.0); }
};

/// Expected state matching a concrete agent population.
inline MeanFieldState from_stochastic(const StochasticState& s, const NetworkConfig& config) {
    const std::size_t paths = config.n_paths;
    MeanFieldState m;
    m.t = s.t;
    m.agents.assign(paths, 0.0);
    m.loads.assign(paths, 0.0);
    m.continuity.assign(paths, ContinuityHistogram(kMaxContinuity + 1, 0.0));
    for (const auto& a : s.agents) {
        m.agents[a.path] += 1.0;
        m.loads[a.path] += a.window;
        m.continuity[a.path][std::min(a.continuity, kMaxContinuity)] += 1.0;
    }
    for (std::size_t p = 0; p < paths; ++p) {
        if (m.agents[p] > 0.0) {
            for (double& v : m.continuity[p]) v /= m.agents[p];
        } else {
            m.continuity[p] = fresh_histogram();
        }
    }
    return m;
}

/// Initial expected state for an init policy. Unseeded random placement is
/// replaced by its expectation, N/P agents per path.
inline MeanFieldState initial_expected(const NetworkConfig& config, const InitPolicy& policy = {}) {
    if (std::holds_alternative<RandomInit>(policy.placement) && !policy.seed) {
        MeanFieldState m;
        const double per = static_cast<double>(config.n_agents) / static_cast<double>(config.n_paths);
        m.agents.assign(config.n_paths, per);
        m.loads.assign(config.n_paths, per * policy.window);
        m.continuity.assign(config.n_paths, fresh_histogram());
        return m;
    }
    return from_stochastic(init_state(config, policy, 0), config);
}

/// Ratio of off-path to on-path agents at the least utilized path; it scales
/// that path's own load into an estimate of the load arriving from the rest.
inline double z_factor(const MeanFieldState& state, std::size_t min_path, double n_agents) {
    const double on_path = state.agents.at(min_path);
    if (!(on_path > 0.0)) throw std::domain_error("z_factor: no agents on the least utilized path");
    return (n_agents - on_path) / on_path;
}

/// Closed-form expected additive increase of a rank-p path on the
/// equilibrium cycle (infinite time since the last loss). Once alpha has
/// settled the remaining geometric tail is summed exactly; an alpha that
/// never settles is cut once the series weight drops below 1e-16.
inline double expected_additive_increase(std::size_t rank, const ProtocolParams& params, std::size_t n_paths) {
    if (rank >= n_paths) throw std::invalid_argument("rank must be < P");
    if (!(params.rho > 0.0)) throw std::invalid_argument("expected_additive_increase requires rho > 0");
    if (const auto* c = std::get_if<ConstantIncrease>(&params.alpha.kind())) return c->value;
    const double stay = std::pow(1.0 - params.rho, static_cast<double>(n_paths - 1));
    const double fresh = 1.0 - stay;
    const auto settled = params.alpha.settles_at();
    double weight = 1.0;
    double sum = 0.0;
    for (std::size_t k = 0; weight >= 1e-16; ++k) {
        const ContinuityTime tau = n_paths * k + rank;
        if (settled && tau >= *settled) return sum + weight * params.alpha(tau);
        sum += fresh * weight * params.alpha(tau);
        weight *= stay;
    }
    return sum;
}

struct ExpectedStepEvents {
    RankVector ranks;
    std::size_t min_path = 0;
    std::vector<bool> loss;
    std::vector<double> in_migrants;
    std::vector<double> out_migrants;
    std::vector<double> mean_increase;
};

struct ExpectedStepResult {
    MeanFieldState state;
    ExpectedStepEvents events;
};

/// Expected dynamics with alpha pre-sampled on the histogram support.
class MeanFieldModel {
public:
    MeanFieldModel(NetworkConfig config, ProtocolParams params)
        : config_(std::move(config)), params_(std::move(params)), alpha_(kMaxContinuity + 1) {
        for (ContinuityTime tau = 0; tau <= kMaxContinuity; ++tau) alpha_[tau] = params_.alpha(tau);
    }

    const NetworkConfig& config() const noexcept { return config_; }
    const ProtocolParams& params() const noexcept { return params_; }

    double mean_increase(const ContinuityHistogram& h) const {
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * alpha_[i];
        return s;
    }

    ExpectedStepResult step(const MeanFieldState& s) const {
        const std::size_t paths = config_.n_paths;
        const double n = static_cast<double>(config_.n_agents);
        const double rho = params_.rho;
        const double sigma = params_.sigma;
        const double gamma = params_.gamma;
        const auto caps = config_.capacities();

        ExpectedStepResult out;
        auto& ev = out.events;
        ev.ranks = compute_ranks(s.loads, caps);
        const std::size_t m = ev.min_path = ev.ranks.min_path();
        ev.loss.resize(paths);
        ev.in_migrants.assign(paths, 0.0);
        ev.out_migrants.assign(paths, 0.0);
        ev.mean_increase.resize(paths);

        auto& next = out.state;
        next.t = s.t + 1;
        next.agents.resize(paths);
        next.loads.resize(paths);
        next.continuity.resize(paths);

        double inflow = 0.0;
        double other_load = 0.0;
        for (std::size_t p = 0; p < paths; ++p) {
            ev.loss[p] = s.loads[p] > caps[p];
            ev.mean_increase[p] = mean_increase(s.continuity[p]);
            if (p == m) continue;
            const double leaving = rho * s.agents[p];
            ev.out_migrants[p] = leaving;
            inflow += leaving;
            other_load += s.loads[p];
            next.agents[p] = s.agents[p] - leaving;
            if (ev.loss[p]) {
                next.loads[p] = gamma * (1.0 - rho) * s.loads[p];
                next.continuity[p] = fresh_histogram();
            } else {
                next.loads[p] = (1.0 - rho) * s.loads[p] + ev.mean_increase[p] * (1.0 - rho) * s.agents[p];
                next.continuity[p] = shifted(s.continuity[p]);
            }
        }

        ev.in_migrants[m] = inflow;
        next.agents[m] = s.agents[m] + inflow;
        // With nobody on the destination the extrapolation is undefined; the
        // exact expected arrival load is used instead.
        const double arriving = s.agents[m] > 0.0 ? rho * sigma * z_factor(s, m, n) * s.loads[m]
                                                  : rho * sigma * other_load;
        if (ev.loss[m]) {
            next.loads[m] = gamma * s.loads[m] + arriving;
            next.continuity[m] = fresh_histogram();
        } else {
            next.loads[m] = s.loads[m] + arriving + ev.mean_increase[m] * s.agents[m];
            if (next.agents[m] > 0.0) {
                auto h = shifted(s.continuity[m]);
                const double keep = s.agents[m] / next.agents[m];
                for (double& v : h) v *= keep;
                h[0] += inflow / next.agents[m];
                next.continuity[m] = std::move(h);
            } else {
                next.continuity[m] = fresh_histogram();
            }
        }
        return out;
    }

private:
    static ContinuityHistogram shifted(const ContinuityHistogram& h) {
        ContinuityHistogram out(h.size(), 0.0);
        for (std::size_t i = 0; i + 1 < h.size(); ++i) out[i + 1] = h[i];
        out.back() += h.back();
        return out;
    }

    NetworkConfig config_;
    ProtocolParams params_;
    std::vector<double> alpha_;
};

inline MeanFieldState step_expected(const MeanFieldState& s, const NetworkConfig& config,
                                    const ProtocolParams& params) {
    return MeanFieldModel(config, params).step(s).state;
}

inline StepRecord observe_expected(const MeanFieldState& s, const NetworkConfig& config) {
    const auto caps = config.capacities();
    const auto ranks = compute_ranks(s.loads, caps);
    StepRecord rec;
    rec.t = s.t;
    rec.paths.resize(config.n_paths);
    for (std::size_t p = 0; p < config.n_paths; ++p) {
        auto& d = rec.paths[p];
        d.agents = s.agents[p];
        d.load = s.loads[p];
        d.rank = ranks[p];
        d.loss = s.loads[p] > caps[p];
    }
    return rec;
}

struct ExpectedRun {
    Trajectory trajectory;
    MeanFieldState final_state;
};

inline ExpectedRun run_expected(const NetworkConfig& config, const ProtocolParams& params, std::size_t horizon,
                                MeanFieldState init) {
    if (horizon < 1) throw std::invalid_argument("run.horizon must be >= 1");
    config.validate();
    params.validate();
    const MeanFieldModel model(config, params);
    ExpectedRun out;
    out.trajectory.steps.reserve(horizon + 1);
    MeanFieldState s = std::move(init);
    for (std::size_t i = 0; i < horizon; ++i) {
        StepRecord rec = observe_expected(s, config);
        auto res = model.step(s);
        for (std::size_t p = 0; p < config.n_paths; ++p) {
            rec.paths[p].in_migrants = res.events.in_migrants[p];
            rec.paths[p].out_migrants = res.events.out_migrants[p];
        }
        out.trajectory.steps.push_back(std::move(rec));
        s = std::move(res.state);
    }
    out.trajectory.steps.push_back(observe_expected(s, config));
    out.final_state = std::move(s);
    return out;
}

inline ExpectedRun run_expected(const NetworkConfig& config, const ProtocolParams& params, std::size_t horizon,
                                const InitPolicy& init = {}) {
    return run_expected(config, params, horizon, initial_expected(config, init));
}

}  // namespace mpcc
