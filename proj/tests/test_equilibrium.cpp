#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mpcc/equilibrium.hpp"

using namespace mpcc;

namespace {

ProtocolParams proto(double rho, double sigma = 0.0, double gamma = 0.5) {
    ProtocolParams p;
    p.rho = rho;
    p.sigma = sigma;
    p.gamma = gamma;
    return p;
}

// Oracle: iterate one path through a full rank cycle. It loses rho of its
// agents at every non-min rank and gains rho of everyone else at rank P-1.
std::vector<double> iterate_agents(double n, std::size_t paths, double rho, int cycles = 1000) {
    double x = n / static_cast<double>(paths);
    std::vector<double> per_rank(paths);
    for (int c = 0; c < cycles; ++c) {
        double y = x;
        for (std::size_t p = 0; p < paths; ++p) {
            per_rank[p] = y;
            y = p + 1 < paths ? (1.0 - rho) * y : y + rho * (n - y);
        }
        x = y;
    }
    return per_rank;
}

// Oracle: the lossless cycle iterated until it stops moving, with alpha == 1.
std::vector<double> iterate_flow(double n, std::size_t paths, double rho, double sigma) {
    const auto a = iterate_agents(n, paths, rho);
    const double z = (n - a.back()) / a.back();
    std::vector<double> loads(paths, 0.0);
    double x = 0.0;
    for (int c = 0; c < 200000; ++c) {
        double y = x;
        for (std::size_t p = 0; p < paths; ++p) {
            loads[p] = y;
            y = p + 1 < paths ? (1.0 - rho) * (y + a[p]) : (1.0 + rho * sigma * z) * y + a[p];
        }
        if (std::abs(y - x) <= 1e-14 * std::abs(y)) break;
        x = y;
    }
    return loads;
}

}  // namespace

TEST(AgentEquilibrium, Examples) {
    EXPECT_EQ(agent_equilibrium(99, 3, 1.0).per_rank, (std::vector<double>{99, 0, 0}));
    const auto two = agent_equilibrium(100, 2, 0.5).per_rank;
    EXPECT_NEAR(two[0], 200.0 / 3.0, 1e-9);
    EXPECT_NEAR(two[1], 100.0 / 3.0, 1e-9);
    for (double a : agent_equilibrium(100, 4, 1e-6).per_rank) EXPECT_NEAR(a, 25.0, 25e-3);
}

TEST(AgentEquilibrium, MatchesIterationAndSumsToN) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> rho(0.01, 0.99);
    for (int i = 0; i < 50; ++i) {
        const double n = 10.0 + 37.0 * i;
        const std::size_t p = 2 + i % 5;
        const double r = rho(gen);
        const auto eq = agent_equilibrium(n, p, r);
        const auto it = iterate_agents(n, p, r);
        for (std::size_t k = 0; k < p; ++k) EXPECT_NEAR(eq.per_rank[k], it[k], 1e-9 * it[k]);
        EXPECT_NEAR(eq.total(), n, 1e-9 * n);
        for (std::size_t k = 0; k + 1 < p; ++k) EXPECT_GT(eq.per_rank[k], eq.per_rank[k + 1]);
    }
}

TEST(AgentEquilibrium, Preconditions) {
    EXPECT_THROW(agent_equilibrium(10, 1, 0.5), std::invalid_argument);
    EXPECT_THROW(agent_equilibrium(10, 3, 0.0), std::invalid_argument);
}

TEST(AgentTrajectory, Examples) {
    EXPECT_DOUBLE_EQ(agent_trajectory(33.0, 33.0, 0.4, 17, 2), 33.0);
    EXPECT_NEAR(agent_trajectory(50.0, 100.0 / 3.0, 0.5, 2, 0), 37.5, 1e-12);
    EXPECT_NEAR(agent_trajectory(50.0, 100.0 / 3.0, 0.3, 60, 0), 100.0 / 3.0 + 50.0 / 3.0 * std::pow(0.7, 60), 1e-12);
    EXPECT_THROW(agent_trajectory(1, 1, 0.5, 0, 1), std::invalid_argument);
}

TEST(FlowEquilibrium, WorkedTwoPathCase) {
    const NetworkConfig cfg{100, 2, 400, {}};
    const auto eq = flow_equilibrium(cfg, proto(0.5));
    EXPECT_NEAR(eq.peak(), 400.0 / 3.0, 1e-6);
    EXPECT_NEAR(eq.trough(), 100.0, 1e-6);
    EXPECT_EQ(eq.regime, Regime::lossless);
    EXPECT_EQ(eq.capacity_per_path, 200.0);
    EXPECT_FALSE(eq.bounds);

    const NetworkConfig tight{100, 2, 200, {}};
    const auto lossy = flow_equilibrium(tight, proto(0.5));
    EXPECT_EQ(lossy.regime, Regime::lossy);
    ASSERT_TRUE(lossy.bounds);
}

TEST(FlowEquilibrium, ClosedFormsMatchIteration) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 50) {
        const std::size_t p = 2 + checked % 4;
        const double n = 50.0 + 1000.0 * u(gen);
        const double rho = 0.05 + 0.9 * u(gen);
        const double sigma = 0.6 * u(gen);
        const NetworkConfig cfg{static_cast<std::size_t>(n), p, 1e12, {}};
        const auto c = cycle_coefficients(cfg, proto(rho, sigma));
        if (c.contraction > 0.97) continue;
        const auto eq = flow_equilibrium(cfg, proto(rho, sigma));
        const auto it = iterate_flow(static_cast<double>(cfg.n_agents), p, rho, sigma);
        EXPECT_NEAR(closed_form_peak(c), it.front(), 1e-9 * it.front());
        EXPECT_NEAR(closed_form_trough(c), it.back(), 1e-9 * it.back());
        for (std::size_t k = 0; k < p; ++k) EXPECT_NEAR(eq.per_rank[k], it[k], 1e-9 * it[k]);
        ++checked;
    }
}

TEST(FlowEquilibrium, HardResetSimplification) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int i = 0; i < 3; ++i) {
        const double rho = u(gen);
        const NetworkConfig cfg{300, 4, 1e9, {}};
        const auto c = cycle_coefficients(cfg, proto(rho, 0.0));
        double sum = 0.0;
        for (double a : c.mean_increase) sum += a;
        const double simplified = sum * c.agents.per_rank.back() / (1.0 - std::pow(1.0 - rho, 3));
        EXPECT_NEAR(closed_form_peak(c), simplified, 1e-9 * simplified);
    }
}

TEST(FlowEquilibrium, DivergentCycle) {
    const NetworkConfig cfg{500, 3, 1e9, {}};
    try {
        flow_equilibrium(cfg, proto(0.3, 1.0));
        FAIL() << "expected divergence";
    } catch (const DivergentEquilibrium& e) {
        EXPECT_NE(std::string(e.what()).find("no lossless equilibrium"), std::string::npos);
    }
    EXPECT_EQ(classify_regime(cfg, proto(0.3, 1.0)), Regime::lossy);
}

TEST(FlowEquilibrium, RequiresInteriorRho) {
    const NetworkConfig cfg{100, 2, 400, {}};
    EXPECT_THROW(flow_equilibrium(cfg, proto(1.0)), std::invalid_argument);
}

TEST(FlowTrajectory, Examples) {
    EXPECT_DOUBLE_EQ(flow_trajectory(120.0, 120.0, 0.45, 3, 40, 10), 120.0);
    EXPECT_NEAR(flow_trajectory(140.0, 100.0, 0.45, 3, 6, 0), 40.0 * 0.2025 + 100.0, 1e-12);
    EXPECT_THROW(flow_trajectory(1, 0, 1.0, 3, 1, 0), std::domain_error);
}

TEST(FlowTrajectory, DecayRateMatchesExpectedDynamics) {
    // P = 2, rho = 0.2, sigma = 0: load deviations shrink by (1 - rho) per
    // cycle once the agents (shrinking by (1 - rho)^2) have settled.
    const NetworkConfig cfg{100, 2, 1e9, {}};
    const auto params = proto(0.2);
    InitPolicy init;
    init.placement = RandomInit{};
    init.seed = 1;
    const auto eq = flow_equilibrium(cfg, params);
    const auto r = run_expected(cfg, params, 100, init);
    const auto dev = [&](std::size_t t) { return r.trajectory.loads_by_rank(t)[0] - eq.peak(); };
    const double ratio = dev(72) / dev(70);
    EXPECT_NEAR(ratio, eq.cycle.contraction, 1e-3);
    EXPECT_DOUBLE_EQ(eq.cycle.contraction, 0.8);
}

TEST(LossyBounds, LowerBoundArithmetic) {
    // C_pi = 100 with enough agents to overload it.
    const NetworkConfig cfg{500, 3, 300, {}};
    const auto b = lossy_bounds(cfg, proto(0.1, 0.0, 0.5));
    EXPECT_NEAR(b.lower, 40.5, 1e-12);
    EXPECT_GE(b.upper, 100.0);
}

TEST(LossyBounds, UpperIsOneCycleFromCapacity) {
    const NetworkConfig cfg{500, 3, 300, {}};
    const auto params = proto(0.3, 0.2);
    const auto a = agent_equilibrium(500, 3, 0.3).per_rank;
    const double z = (500 - a[2]) / a[2];
    double x = 100.0;
    x = 0.7 * (x + a[0]);
    x = 0.7 * (x + a[1]);
    x = (1 + 0.3 * 0.2 * z) * x + a[2];
    EXPECT_NEAR(lossy_bounds(cfg, params).upper, x, 1e-9 * x);
}

TEST(LossyBounds, RejectsLosslessAndAcceptsDivergent) {
    EXPECT_THROW(lossy_bounds(NetworkConfig{100, 2, 400, {}}, proto(0.5)), std::logic_error);
    const auto b = lossy_bounds(NetworkConfig{500, 3, 300, {}}, proto(0.3, 1.0));
    EXPECT_GT(b.upper, 100.0);
}

TEST(RunExpected, LosslessConvergesToFlowEquilibrium) {
    const NetworkConfig cfg{500, 3, 1e9, {}};
    const auto params = proto(0.2);
    InitPolicy init;
    init.placement = RandomInit{};
    init.seed = 1;
    const auto eq = flow_equilibrium(cfg, params);
    const auto r = run_expected(cfg, params, 800, init);
    const auto loads = r.trajectory.loads_by_rank(800);
    for (std::size_t p = 0; p < 3; ++p) EXPECT_NEAR(loads[p], eq.per_rank[p], 1e-3 * eq.per_rank[p]);
}

TEST(Consistency, Examples) {
    const NetworkConfig two{100, 2, 1e9, {}};
    const auto cell = check_consistency(two, proto(0.5));
    EXPECT_TRUE(cell.consistent);
    EXPECT_NEAR(cell.peak, 400.0 / 3.0, 1e-9);
    EXPECT_TRUE(check_consistency(two, proto(1.0)).consistent);
    const NetworkConfig three{500, 3, 1e9, {}};
    const auto div = check_consistency(three, proto(0.4, 1.0));
    EXPECT_FALSE(div.consistent);
    EXPECT_TRUE(div.divergent);
}

TEST(Consistency, HardResetThreePathsSwitchesAtOneHalf) {
    // With alpha == 1 the P = 3 hard-reset cycle stays ordered exactly when
    // rho <= 1/2 (L^(2) <= L^(1) reduces to (1-rho) a^(1) <= rho L^(1)).
    const NetworkConfig three{500, 3, 1e9, {}};
    for (double rho : {0.1, 0.3, 0.45, 0.49}) EXPECT_TRUE(check_consistency(three, proto(rho)).consistent) << rho;
    for (double rho : {0.55, 0.7, 0.9}) EXPECT_FALSE(check_consistency(three, proto(rho)).consistent) << rho;
}

TEST(Consistency, MapShapeAndOrder) {
    const NetworkConfig three{500, 3, 1e9, {}};
    const std::vector<double> rhos{0.1, 0.2, 0.3}, sigmas{0.0, 0.5};
    const auto map = consistency_map(three, proto(0.1), rhos, sigmas, 2);
    ASSERT_EQ(map.size(), 6u);
    EXPECT_EQ(map[3].rho, 0.2);
    EXPECT_EQ(map[3].sigma, 0.5);
    for (const auto& c : map)
        if (c.consistent) EXPECT_LE(c.trough, c.peak);
    EXPECT_THROW(consistency_map(three, proto(0.1), {}, sigmas), std::invalid_argument);
}
