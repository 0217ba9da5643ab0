#include <gtest/gtest.h>

#include <cmath>

#include "mpcc/axioms.hpp"

using namespace mpcc;

namespace {

ProtocolParams proto(double rho, double sigma = 0.0, double gamma = 0.5) {
    ProtocolParams p;
    p.rho = rho;
    p.sigma = sigma;
    p.gamma = gamma;
    return p;
}

Trajectory constant_population(std::vector<double> windows, std::size_t steps) {
    const NetworkConfig cfg{windows.size(), 2, 1e9, {}};
    StochasticState s;
    for (std::size_t i = 0; i < windows.size(); ++i) s.agents.push_back({windows[i], 0, i % 2});
    Trajectory t;
    for (std::size_t k = 0; k < steps; ++k) {
        s.t = k;
        t.steps.push_back(observe(s, cfg));
    }
    return t;
}

InitPolicy seeded_random(std::uint64_t seed) {
    InitPolicy p;
    p.placement = RandomInit{};
    p.seed = seed;
    return p;
}

}  // namespace

TEST(StaticBaseline, Formulas) {
    const NetworkConfig cfg{100, 2, 1000, {}};
    const auto s = static_baseline(cfg, proto(0.3, 0.0, 0.5));
    EXPECT_EQ(s.epsilon, 0.5);
    EXPECT_DOUBLE_EQ(s.lambda, 0.1);
    EXPECT_DOUBLE_EQ(s.gamma_conv, 500.0 / 1100.0);
    EXPECT_EQ(s.eta, 0.0);
    auto bursty = proto(0.3);
    bursty.alpha = AlphaFunction::slow_start(2, 8);
    EXPECT_DOUBLE_EQ(static_baseline(cfg, bursty).lambda, 0.8);
}

TEST(Convergence, ConstantAndPeriodic) {
    Trajectory flat;
    for (std::size_t t = 0; t < 60; ++t) {
        StepRecord r;
        r.t = t;
        r.paths = {PathSample{1, 10, 0}, PathSample{1, 5, 1}};
        flat.steps.push_back(r);
    }
    auto c = detect_convergence(flat);
    ASSERT_TRUE(c);
    EXPECT_EQ(c->t0, 0u);
    EXPECT_EQ(c->lag, 2u);

    Trajectory saw;
    for (std::size_t t = 0; t < 400; ++t) {
        StepRecord r;
        r.t = t;
        const double v = t < 50 ? 100.0 + t * 3.0 : 10.0 + static_cast<double>((t - 50) % 7);
        r.paths = {PathSample{1, v, 0}, PathSample{1, v / 2, 1}};
        saw.steps.push_back(r);
    }
    c = detect_convergence(saw);
    ASSERT_TRUE(c);
    EXPECT_EQ(c->lag, 7u);
    EXPECT_EQ(c->cycle, 7u);
    EXPECT_GE(c->t0, 50u);
    EXPECT_LE(c->t0, 51u);

    saw.steps.resize(120);
    EXPECT_FALSE(detect_convergence(saw));
}

TEST(Fairness, ToyPopulations) {
    StochasticRun run;
    run.per_seed = {constant_population({2.0, 4.0}, 30), constant_population({2.0, 4.0}, 30)};
    EXPECT_DOUBLE_EQ(rate_fairness(run, 0, 29).value, 1.0);
    run.per_seed = {constant_population({3.0, 3.0, 3.0}, 30)};
    EXPECT_EQ(rate_fairness(run, 0, 29).value, 0.0);
}

TEST(Rate, LosslessTwoPathCycle) {
    // Cycle loads 4000/9 and 400 against C_pi = 500.
    const NetworkConfig cfg{100, 2, 1000, {}};
    const auto params = proto(0.2);
    const auto mf = run_expected(cfg, params, 300, seeded_random(1));
    const auto r = rate_equilibrium(cfg, params, mf.trajectory);
    EXPECT_EQ(r.regime, Regime::lossless);
    EXPECT_EQ(r.lambda.value, 0.0);
    // t0 admits a 0.1% residual per lag, so the window still carries some
    // of the approach.
    EXPECT_NEAR(r.epsilon.value, 0.8, 0.01);
    EXPECT_NEAR(r.gamma_conv.value, 0.9, 0.01);
    EXPECT_FALSE(r.eta.available());
    EXPECT_FALSE(r.flagged());
    // eps * C_pi equals the smallest load of the window exactly.
    double lo = 1e300;
    for (std::size_t t = r.convergence.t0; t < mf.trajectory.size(); ++t)
        for (const auto& p : mf.trajectory.steps[t].paths) lo = std::min(lo, p.load);
    EXPECT_EQ(r.epsilon.value * 500.0, lo);
}

TEST(Rate, LossyRespectsBounds) {
    const NetworkConfig cfg{500, 3, 6371, {}};
    const auto params = proto(0.1, 0.0, 0.5);
    const auto mf = run_expected(cfg, params, 3000, seeded_random(1));
    const auto r = rate_equilibrium(cfg, params, mf.trajectory);
    EXPECT_EQ(r.regime, Regime::lossy);
    EXPECT_GE(r.epsilon.value, 0.405 - 1e-6);
    ASSERT_TRUE(r.gamma_conv.lower_bound);
    ASSERT_TRUE(r.load_bounds);
    EXPECT_GE(r.gamma_conv.value, *r.gamma_conv.lower_bound - 1e-6);
    EXPECT_GT(r.lambda.value, 0.0);
    // The expected dynamics settle on a long orbit (lag 117) whose peak
    // overshoots the one-cycle bound by about 1%; it is reported, not fatal.
    EXPECT_EQ(r.convergence.lag, 117u);
    ASSERT_TRUE(r.lambda.upper_bound);
    EXPECT_LE(r.lambda.value * 6371.0 / 3.0 + 6371.0 / 3.0, 1.05 * r.load_bounds->upper);
    EXPECT_EQ(r.flags, std::vector<std::string>{"lambda outside its analytical bound"});
}

TEST(Rate, NotConvergedWithinHorizon) {
    const NetworkConfig cfg{500, 3, 1e9, {}};
    const auto mf = run_expected(cfg, proto(0.1), 20);
    EXPECT_THROW(rate_equilibrium(cfg, proto(0.1), mf.trajectory), NotConverged);
}

TEST(Rate, StochasticEvidenceCarriesErrors) {
    const NetworkConfig cfg{200, 3, 1e9, {}};
    const auto params = proto(0.3);
    RunOptions o;
    o.horizon = 300;
    o.n_seeds = 20;
    const auto mf = run_expected(cfg, params, 300);
    const auto st = run(cfg, params, o);
    const auto r = rate_equilibrium(cfg, params, mf.trajectory, &st);
    ASSERT_TRUE(r.epsilon.std_error);
    ASSERT_TRUE(r.eta.std_error);
    EXPECT_GT(*r.eta.std_error, 0.0);
    EXPECT_GE(r.eta.value, 0.0);
    EXPECT_LE(r.epsilon.value, 1.0);
    EXPECT_LE(r.gamma_conv.value, 1.0);
}

TEST(Rate, FairnessImprovesWithResponsiveness) {
    const NetworkConfig cfg{200, 3, 1e9, {}};
    RunOptions o;
    o.horizon = 400;
    o.n_seeds = 10;
    o.init = seeded_random(1);
    std::vector<double> eta;
    for (double rho : {0.05, 0.95}) {
        const auto mf = run_expected(cfg, proto(rho), 400, o.init);
        const auto st = run(cfg, proto(rho), o);
        eta.push_back(rate_equilibrium(cfg, proto(rho), mf.trajectory, &st).eta.value);
    }
    EXPECT_LT(eta[1], eta[0]);
}

TEST(Static, SynchronizedRunReproducesBaseline) {
    // Loads climb by 50 per step per path and hit C/P = 5050 exactly, so the
    // overshoot is one increment.
    const NetworkConfig cfg{100, 2, 10100, {}};
    const auto params = proto(0.0);
    RunOptions o;
    o.horizon = 2000;
    const auto mf = run_expected(cfg, params, 2000);
    const auto st = run(cfg, params, o);
    const auto r = rate_equilibrium(cfg, params, mf.trajectory, &st);
    const auto s = static_baseline(cfg, params);
    EXPECT_EQ(r.regime, Regime::lossy);
    EXPECT_NEAR(r.epsilon.value, s.epsilon, 0.01 * s.epsilon);
    EXPECT_NEAR(r.lambda.value, s.lambda, 0.01 * s.lambda);
    EXPECT_EQ(r.eta.value, 0.0);
    const auto d = compare_to_static(r, s);
    EXPECT_NEAR(d.d_lambda, 0.0, 0.01 * s.lambda);
}

TEST(Static, DeltaArithmetic) {
    AxiomRatings dyn;
    dyn.epsilon.value = 0.6;
    dyn.lambda.value = 0.0;
    dyn.gamma_conv.value = 0.7;
    StaticBaseline base{0.5, 0.1, 0.45, 0.0};
    const auto d = compare_to_static(dyn, base);
    EXPECT_DOUBLE_EQ(d.d_lambda, -0.1);
    EXPECT_DOUBLE_EQ(d.d_epsilon, 0.1);
    EXPECT_FALSE(d.d_eta);
}

TEST(CyclicRanks, DetectsPermutation) {
    StepRecord a, b, c;
    a.paths = {PathSample{0, 0, 0}, PathSample{0, 0, 1}, PathSample{0, 0, 2}};
    b.paths = {PathSample{0, 0, 1}, PathSample{0, 0, 2}, PathSample{0, 0, 0}};
    c.paths = {PathSample{0, 0, 2}, PathSample{0, 0, 1}, PathSample{0, 0, 0}};
    EXPECT_TRUE(cyclic_rank_step(a, b));
    EXPECT_FALSE(cyclic_rank_step(b, c));
}
