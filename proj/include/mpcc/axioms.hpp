#pragma once

// Axiomatic ratings (efficiency, loss avoidance, convergence, fairness,
// responsiveness) measured on the converged part of a trajectory, analytical
// bounds attached where they exist, and the static no-selection baseline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpcc/core.hpp"
#include "mpcc/equilibrium.hpp"
#include "mpcc/mean_field.hpp"
#include "mpcc/stochastic.hpp"
#include "mpcc/trajectory.hpp"

namespace mpcc {

class NotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConvergenceOptions {
    double tolerance = 1e-3;       // relative change of every per-rank load over one lag
    std::size_t sustain_cycles = 3;
    std::size_t min_cycles = 10;   // evaluation window length after t0, in cycles
    std::size_t max_lag = 0;       // 0: 64 * P
};

struct Convergence {
    std::size_t t0 = 0;
    std::size_t lag = 0;    // recurrence lag of the per-rank loads
    std::size_t cycle = 0;  // max(P, lag)
};

namespace detail {

inline bool rank_loads_repeat(const Trajectory& traj, std::size_t t, std::size_t lag, double tol) {
    const auto a = traj.loads_by_rank(t);
    const auto b = traj.loads_by_rank(t + lag);
    for (std::size_t p = 0; p < a.size(); ++p) {
        const double scale = std::max(std::abs(a[p]), std::abs(b[p]));
        if (std::abs(a[p] - b[p]) > tol * scale) return false;
    }
    return true;
}

inline std::optional<std::size_t> onset_for_lag(const Trajectory& traj, std::size_t lag, std::size_t cycle,
                                               const ConvergenceOptions& opt) {
    const std::size_t last = traj.size() - 1;
    const std::size_t span = opt.sustain_cycles * cycle;
    if (last < span + lag) return std::nullopt;
    std::size_t run = 0;
    for (std::size_t t = 0; t + lag <= last; ++t) {
        run = rank_loads_repeat(traj, t, lag, opt.tolerance) ? run + 1 : 0;
        if (run == span) return t + 1 - span;
    }
    return std::nullopt;
}

}  // namespace detail

/// Convergence onset of a (noise-free) trajectory. The lag P is tried first;
/// otherwise the smallest lag up to max_lag whose onset is followed by the
/// required evaluation window.
inline std::optional<Convergence> detect_convergence(const Trajectory& traj, const ConvergenceOptions& opt = {}) {
    if (traj.size() < 2) return std::nullopt;
    const std::size_t paths = traj.n_paths();
    const std::size_t max_lag = opt.max_lag ? opt.max_lag : 64 * paths;
    auto attempt = [&](std::size_t lag) -> std::optional<Convergence> {
        const std::size_t cycle = std::max(paths, lag);
        const auto t0 = detail::onset_for_lag(traj, lag, cycle, opt);
        if (!t0 || *t0 + opt.min_cycles * cycle > traj.size() - 1) return std::nullopt;
        return Convergence{*t0, lag, cycle};
    };
    if (auto c = attempt(paths)) return c;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        if (lag == paths) continue;
        if (auto c = attempt(lag)) return c;
    }
    return std::nullopt;
}

/// True when every path moves from rank p to rank (p + 1) mod P between
/// the two records.
inline bool cyclic_rank_step(const StepRecord& from, const StepRecord& to) {
    const std::size_t paths = from.paths.size();
    for (std::size_t p = 0; p < paths; ++p)
        if (to.paths[p].rank != (from.paths[p].rank + 1) % paths) return false;
    return true;
}

/// Longest run of consecutive cyclic rank steps within records [from, to].
inline std::size_t longest_cyclic_run(const Trajectory& traj, std::size_t from, std::size_t to) {
    std::size_t best = 0, run = 0;
    for (std::size_t t = from; t < to && t + 1 < traj.size(); ++t) {
        run = cyclic_rank_step(traj.steps[t], traj.steps[t + 1]) ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

enum class Provenance { measured, analytical_bound };

inline const char* to_string(Provenance p) { return p == Provenance::measured ? "measured" : "analytical-bound"; }

struct Rating {
    double value = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> std_error;
    Provenance provenance = Provenance::measured;
    std::optional<double> lower_bound;
    std::optional<double> upper_bound;

    bool available() const { return !std::isnan(value); }
    bool within_bounds(double slack = 1e-6) const {
        if (!available()) return true;
        if (lower_bound && value < *lower_bound - slack) return false;
        if (upper_bound && value > *upper_bound + slack) return false;
        return true;
    }
};

struct AxiomRatings {
    Rating epsilon;
    Rating lambda;
    Rating gamma_conv;
    Rating eta;
    double rho = 0.0;
    Regime regime = Regime::lossless;
    bool regime_analytical = false;
    Convergence convergence;
    std::size_t window_end = 0;
    std::optional<LossyBounds> load_bounds;
    std::optional<FlowEquilibrium> equilibrium;
    std::vector<std::string> flags;

    bool flagged() const { return !flags.empty(); }
};

enum class LoadEvidence { expected, stochastic };

struct RatingOptions {
    ConvergenceOptions convergence{};
    /// Which trajectory the load-based ratings are measured on. The stochastic
    /// choice uses the cross-seed per-rank mean, with standard errors from
    /// seed batches.
    LoadEvidence loads = LoadEvidence::stochastic;
    std::size_t batches = 10;
};

struct LoadRatings {
    double epsilon = 0.0;
    double lambda = 0.0;
    double gamma_conv = 0.0;
};

/// Efficiency, loss avoidance and convergence over records [from, to].
/// Utilization is taken against `caps[p]` for the p-th column of `traj`.
inline LoadRatings load_ratings(const Trajectory& traj, std::size_t from, std::size_t to,
                                const std::vector<double>& caps) {
    if (from > to || to >= traj.size()) throw std::out_of_range("rating window outside trajectory");
    LoadRatings r;
    r.epsilon = std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t t = from; t <= to; ++t) {
        const auto& rec = traj.steps[t];
        for (std::size_t p = 0; p < rec.paths.size(); ++p) {
            const double load = rec.paths[p].load;
            r.epsilon = std::min(r.epsilon, load / caps[p]);
            r.lambda = std::max(r.lambda, (load - caps[p]) / caps[p]);
            lo = std::min(lo, load);
            hi = std::max(hi, load);
        }
    }
    r.gamma_conv = hi > 0.0 ? lo / hi : 1.0;
    return r;
}

/// Population window variance averaged over records [from, to].
inline double mean_window_variance(const Trajectory& traj, std::size_t from, std::size_t to) {
    if (from > to || to >= traj.size()) throw std::out_of_range("rating window outside trajectory");
    double s = 0.0;
    for (std::size_t t = from; t <= to; ++t) s += traj.steps[t].window_variance;
    return s / static_cast<double>(to - from + 1);
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double std_error_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace detail

/// Fairness: window variance averaged over the window and over seeds, with
/// the standard error across seeds.
inline Rating rate_fairness(const StochasticRun& run, std::size_t from, std::size_t to) {
    if (run.per_seed.empty()) throw std::invalid_argument("fairness needs stochastic evidence");
    std::vector<double> per_seed;
    per_seed.reserve(run.per_seed.size());
    for (const auto& traj : run.per_seed) per_seed.push_back(mean_window_variance(traj, from, to));
    Rating r;
    r.value = detail::mean_of(per_seed);
    if (per_seed.size() > 1) r.std_error = detail::std_error_of(per_seed);
    r.lower_bound = 0.0;
    return r;
}

/// Rates the equilibrium reached by the expected dynamics `expected`,
/// optionally backed by stochastic runs of the same parameters. t0 and the
/// cycle length are detected on the expected trajectory.
inline AxiomRatings rate_equilibrium(const NetworkConfig& config, const ProtocolParams& params,
                                     const Trajectory& expected, const StochasticRun* stochastic = nullptr,
                                     const RatingOptions& opt = {}) {
    config.validate();
    params.validate();
    const auto conv = detect_convergence(expected, opt.convergence);
    if (!conv) throw NotConverged("not converged: no convergence onset with " +
                                  std::to_string(opt.convergence.min_cycles) +
                                  " cycles of evidence within the horizon");

    AxiomRatings out;
    out.rho = params.rho;
    out.convergence = *conv;
    const std::size_t from = conv->t0;
    const std::size_t to = expected.size() - 1;
    out.window_end = to;

    const bool use_stochastic = stochastic && opt.loads == LoadEvidence::stochastic;
    if (stochastic) {
        for (const auto& traj : stochastic->per_seed)
            if (traj.size() != expected.size())
                throw std::invalid_argument("stochastic and expected evidence must share the horizon");
    }

    // Per-rank aggregation pairs ranks with a single capacity, so it is only
    // used when capacities are homogeneous.
    const bool by_rank = config.homogeneous();
    const auto caps = by_rank ? std::vector<double>(config.n_paths, config.capacity(0)) : config.capacities();

    LoadRatings lr;
    if (use_stochastic) {
        const Trajectory& mean = by_rank ? stochastic->mean_by_rank : stochastic->mean_by_path;
        lr = load_ratings(mean, from, to, caps);
        const std::size_t n = stochastic->per_seed.size();
        const std::size_t b = std::min(opt.batches, n);
        if (b >= 2) {
            std::vector<double> e, l, g;
            for (std::size_t k = 0; k < b; ++k) {
                std::vector<Trajectory> part(stochastic->per_seed.begin() + static_cast<std::ptrdiff_t>(k * n / b),
                                             stochastic->per_seed.begin() + static_cast<std::ptrdiff_t>((k + 1) * n / b));
                const auto r = load_ratings(detail::mean_trajectory(part, by_rank), from, to, caps);
                e.push_back(r.epsilon);
                l.push_back(r.lambda);
                g.push_back(r.gamma_conv);
            }
            out.epsilon.std_error = detail::std_error_of(e);
            out.lambda.std_error = detail::std_error_of(l);
            out.gamma_conv.std_error = detail::std_error_of(g);
        }
    } else {
        lr = load_ratings(expected, from, to, config.capacities());
    }
    out.epsilon.value = lr.epsilon;
    out.lambda.value = lr.lambda;
    out.gamma_conv.value = lr.gamma_conv;
    if (stochastic) out.eta = rate_fairness(*stochastic, from, to);

    bool any_loss = false;
    for (std::size_t t = from; t <= to; ++t)
        for (const auto& s : expected.steps[t].paths) any_loss = any_loss || s.loss;

    if (params.rho > 0.0 && params.rho < 1.0) {
        out.regime_analytical = true;
        try {
            out.equilibrium = flow_equilibrium(config, params);
            out.regime = out.equilibrium->regime;
        } catch (const DivergentEquilibrium&) {
            out.regime = Regime::lossy;
        }
    } else {
        out.regime = any_loss ? Regime::lossy : Regime::lossless;
    }

    if (out.regime == Regime::lossless) {
        out.lambda.upper_bound = 0.0;
        if (out.regime_analytical && out.lambda.value <= 0.0) out.lambda.value = 0.0;
    } else if (out.regime_analytical) {
        const auto c = cycle_coefficients(config, params);
        const double cap = capacity_per_path(config);
        const auto b = lossy_bounds_from(c, params, cap);
        out.load_bounds = b;
        out.epsilon.lower_bound = params.gamma * c.stay;
        out.lambda.upper_bound = (b.upper - cap) / cap;
        out.gamma_conv.lower_bound = b.lower / b.upper;
    }
    out.epsilon.upper_bound = out.epsilon.upper_bound.value_or(1.0);
    out.gamma_conv.upper_bound = 1.0;

    const auto check = [&](const Rating& r, const char* name) {
        if (!r.within_bounds()) out.flags.push_back(std::string(name) + " outside its analytical bound");
    };
    check(out.epsilon, "epsilon");
    check(out.lambda, "lambda");
    check(out.gamma_conv, "gamma_conv");
    return out;
}

struct StaticBaseline {
    double epsilon = 0.0;
    double lambda = 0.0;
    double gamma_conv = 0.0;
    double eta = 0.0;
};

/// Ratings of the network without path selection: synchronized agents that
/// all back off together once their path overshoots capacity.
inline StaticBaseline static_baseline(const NetworkConfig& config, const ProtocolParams& params) {
    const double n = static_cast<double>(config.n_agents);
    const double c = config.total_capacity;
    const double amax = params.alpha.max_value();
    StaticBaseline s;
    s.epsilon = params.gamma;
    s.lambda = amax * n / c;
    s.gamma_conv = params.gamma * c / (c + amax * n);
    s.eta = 0.0;
    return s;
}

struct StaticComparison {
    double d_epsilon = 0.0;
    double d_lambda = 0.0;
    double d_gamma_conv = 0.0;
    std::optional<double> d_eta;
};

/// Dynamic minus static, per metric; a negative d_lambda is an improvement.
inline StaticComparison compare_to_static(const AxiomRatings& dynamic, const StaticBaseline& base) {
    StaticComparison d;
    d.d_epsilon = dynamic.epsilon.value - base.epsilon;
    d.d_lambda = dynamic.lambda.value - base.lambda;
    d.d_gamma_conv = dynamic.gamma_conv.value - base.gamma_conv;
    if (dynamic.eta.available()) d.d_eta = dynamic.eta.value - base.eta;
    return d;
}

inline StaticComparison compare_to_static(const NetworkConfig& config, const ProtocolParams& params,
                                          const AxiomRatings& dynamic) {
    return compare_to_static(dynamic, static_baseline(config, params));
}

}  // namespace mpcc
