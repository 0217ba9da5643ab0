#pragma once

#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace mpcc {

/// One path at one time step. Stochastic runs store integral agent and
/// migrant counts; expected-dynamics runs store real values.
struct PathSample {
    double agents = 0.0;
    double load = 0.0;
    std::size_t rank = 0;
    bool loss = false;          // load > capacity at this step
    double in_migrants = 0.0;   // arrivals decided at this step
    double out_migrants = 0.0;  // departures decided at this step
};

struct StepRecord {
    std::size_t t = 0;
    std::vector<PathSample> paths;
    // Population window statistics; zero for expected-dynamics records.
    double mean_window = 0.0;
    double window_variance = 0.0;
};

/// Time series of per-path samples. Holds horizon + 1 records (t = 0..T).
struct Trajectory {
    std::vector<StepRecord> steps;

    std::size_t size() const noexcept { return steps.size(); }
    std::size_t n_paths() const noexcept { return steps.empty() ? 0 : steps.front().paths.size(); }

    /// Loads at time t indexed by rank instead of by path.
    std::vector<double> loads_by_rank(std::size_t t) const {
        const auto& rec = steps.at(t);
        std::vector<double> out(rec.paths.size());
        for (const auto& s : rec.paths) out[s.rank] = s.load;
        return out;
    }

    std::vector<double> agents_by_rank(std::size_t t) const {
        const auto& rec = steps.at(t);
        std::vector<double> out(rec.paths.size());
        for (const auto& s : rec.paths) out[s.rank] = s.agents;
        return out;
    }

    double total_agents(std::size_t t) const {
        double sum = 0.0;
        for (const auto& s : steps.at(t).paths) sum += s.agents;
        return sum;
    }
};

inline constexpr const char* kTrajectoryCsvHeader = "t,path,rank,agents,load,loss_flag,in_migrants,out_migrants";

namespace detail {
// Shortest round-trippable text for a double.
inline std::string format_real(double v) {
    char buf[64];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return buf;
}
}  // namespace detail

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    using detail::format_real;
    os << kTrajectoryCsvHeader << '\n';
    for (const auto& rec : traj.steps) {
        for (std::size_t p = 0; p < rec.paths.size(); ++p) {
            const auto& s = rec.paths[p];
            os << rec.t << ',' << p << ',' << s.rank << ',' << format_real(s.agents) << ','
               << format_real(s.load) << ',' << (s.loss ? 1 : 0) << ',' << format_real(s.in_migrants) << ','
               << format_real(s.out_migrants) << '\n';
        }
    }
}

}  // namespace mpcc
