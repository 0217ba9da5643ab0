#pragma once

// Shared domain types for the multipath congestion-control model: protocol
// parameters, the additive-increase family, network configuration and
// utilization ranks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace mpcc {

/// Number of discrete time steps an agent has stayed on its path without
/// migrating or seeing a loss.
using ContinuityTime = std::size_t;

/// Smallest window an agent may hold after a multiplicative operation.
inline constexpr double kWindowFloor = 1e-6;

struct ConstantIncrease {
    double value = 1.0;
};

/// min(base^tau, cap): exponential growth that saturates.
struct SlowStartIncrease {
    double base = 2.0;
    double cap = 8.0;
};

/// alpha(tau) = values[tau] for tau < values.size(), tail afterwards.
struct TableIncrease {
    std::vector<double> values;
    double tail = 1.0;
};

class AlphaFunction {
public:
    using Kind = std::variant<ConstantIncrease, SlowStartIncrease, TableIncrease>;

    AlphaFunction() : kind_(ConstantIncrease{1.0}) {}

    static AlphaFunction reno() { return AlphaFunction(ConstantIncrease{1.0}); }
    static AlphaFunction constant(double c) { return AlphaFunction(ConstantIncrease{c}); }
    static AlphaFunction slow_start(double base, double cap) {
        return AlphaFunction(SlowStartIncrease{base, cap});
    }
    /// Tail defaults to the last table entry.
    static AlphaFunction table(std::vector<double> values, std::optional<double> tail = {}) {
        if (values.empty()) throw std::invalid_argument("alpha table must not be empty");
        double t = tail.value_or(values.back());
        return AlphaFunction(TableIncrease{std::move(values), t});
    }

    const Kind& kind() const noexcept { return kind_; }

    bool is_constant() const noexcept { return std::holds_alternative<ConstantIncrease>(kind_); }

    double operator()(ContinuityTime tau) const noexcept {
        return std::visit(
            [tau](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantIncrease>) {
                    return k.value;
                } else if constexpr (std::is_same_v<K, SlowStartIncrease>) {
                    return std::min(std::pow(k.base, static_cast<double>(tau)), k.cap);
                } else {
                    return tau < k.values.size() ? k.values[tau] : k.tail;
                }
            },
            kind_);
    }

    /// max over tau of alpha(tau).
    double max_value() const noexcept {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantIncrease>) {
                    return k.value;
                } else if constexpr (std::is_same_v<K, SlowStartIncrease>) {
                    return k.base > 1.0 ? k.cap : std::min(1.0, k.cap);
                } else {
                    return std::max(*std::max_element(k.values.begin(), k.values.end()), k.tail);
                }
            },
            kind_);
    }

    /// First tau from which alpha stays constant, if any.
    std::optional<ContinuityTime> settles_at() const noexcept {
        return std::visit(
            [](const auto& k) -> std::optional<ContinuityTime> {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantIncrease>) {
                    return 0;
                } else if constexpr (std::is_same_v<K, SlowStartIncrease>) {
                    if (k.base < 1.0) return std::nullopt;
                    if (k.base == 1.0 || k.cap <= 1.0) return 0;
                    ContinuityTime tau = 0;
                    while (std::pow(k.base, static_cast<double>(tau)) < k.cap) ++tau;
                    return tau;
                } else {
                    return static_cast<ContinuityTime>(k.values.size());
                }
            },
            kind_);
    }

    /// Throws std::invalid_argument unless alpha(tau) > 0 for every tau.
    void validate() const {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, ConstantIncrease>) {
                    if (!(k.value > 0.0)) throw std::invalid_argument("protocol.alpha.value must be > 0");
                } else if constexpr (std::is_same_v<K, SlowStartIncrease>) {
                    if (!(k.base > 0.0)) throw std::invalid_argument("protocol.alpha.base must be > 0");
                    if (!(k.cap > 0.0)) throw std::invalid_argument("protocol.alpha.cap must be > 0");
                } else {
                    for (double v : k.values)
                        if (!(v > 0.0)) throw std::invalid_argument("protocol.alpha.values must all be > 0");
                    if (!(k.tail > 0.0)) throw std::invalid_argument("protocol.alpha.tail must be > 0");
                }
            },
            kind_);
    }

    friend bool operator==(const AlphaFunction& a, const AlphaFunction& b) {
        if (a.kind_.index() != b.kind_.index()) return false;
        return std::visit(
            [&b](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                const auto& o = std::get<K>(b.kind_);
                if constexpr (std::is_same_v<K, ConstantIncrease>) return k.value == o.value;
                else if constexpr (std::is_same_v<K, SlowStartIncrease>) return k.base == o.base && k.cap == o.cap;
                else return k.values == o.values && k.tail == o.tail;
            },
            a.kind_);
    }

private:
    explicit AlphaFunction(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

inline double alpha_eval(const AlphaFunction& alpha, ContinuityTime tau) noexcept { return alpha(tau); }

/// The protocol tuple. rho = 0 is accepted as a diagnostic "static" mode in
/// which no agent ever migrates.
struct ProtocolParams {
    double rho = 0.1;
    double sigma = 0.0;
    double gamma = 0.5;
    AlphaFunction alpha = AlphaFunction::reno();

    void validate() const {
        if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("protocol.rho must be in [0, 1]");
        if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("protocol.sigma must be in [0, 1]");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("protocol.gamma must be in (0, 1)");
        alpha.validate();
    }
};

struct NetworkConfig {
    std::size_t n_agents = 100;
    std::size_t n_paths = 2;
    double total_capacity = 1000.0;
    std::optional<std::vector<double>> per_path_capacity;

    double capacity(std::size_t path) const {
        if (per_path_capacity) return (*per_path_capacity)[path];
        return total_capacity / static_cast<double>(n_paths);
    }

    std::vector<double> capacities() const {
        std::vector<double> c(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) c[p] = capacity(p);
        return c;
    }

    bool homogeneous() const {
        if (!per_path_capacity) return true;
        const auto& c = *per_path_capacity;
        return std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
    }

    void validate() const {
        if (n_paths < 2) throw std::invalid_argument("network.P must be >= 2");
        if (n_agents < n_paths) throw std::invalid_argument("network.N must be >= network.P");
        if (!(total_capacity > 0.0)) throw std::invalid_argument("network.C must be > 0");
        if (per_path_capacity) {
            if (per_path_capacity->size() != n_paths)
                throw std::invalid_argument("network.capacities must have exactly P entries");
            for (double c : *per_path_capacity)
                if (!(c > 0.0)) throw std::invalid_argument("network.capacities must all be > 0");
        }
    }
};

/// rank[path] in [0, P); rank 0 is the most utilized path.
struct RankVector {
    std::vector<std::size_t> rank;

    std::size_t size() const noexcept { return rank.size(); }
    std::size_t operator[](std::size_t path) const { return rank[path]; }

    /// Path holding rank P-1, i.e. the least utilized one.
    std::size_t min_path() const { return path_at(rank.size() - 1); }

    std::size_t path_at(std::size_t r) const {
        auto it = std::find(rank.begin(), rank.end(), r);
        if (it == rank.end()) throw std::out_of_range("rank not present");
        return static_cast<std::size_t>(it - rank.begin());
    }

    friend bool operator==(const RankVector&, const RankVector&) = default;
};

/// Orders paths by descending utilization (load / capacity). Equal
/// utilizations give the lower path index the lower (busier) rank.
inline RankVector compute_ranks(std::span<const double> loads, std::span<const double> capacities) {
    if (loads.size() != capacities.size()) throw std::invalid_argument("loads and capacities differ in length");
    const std::size_t n = loads.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return loads[a] / capacities[a] > loads[b] / capacities[b];
    });
    RankVector r{std::vector<std::size_t>(n)};
    for (std::size_t i = 0; i < n; ++i) r.rank[order[i]] = i;
    return r;
}

}  // namespace mpcc
