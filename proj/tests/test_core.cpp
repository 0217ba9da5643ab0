#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "mpcc/core.hpp"

using namespace mpcc;

TEST(Alpha, RenoIsOneEverywhere) {
    const auto a = AlphaFunction::reno();
    EXPECT_EQ(alpha_eval(a, 0), 1.0);
    EXPECT_EQ(alpha_eval(a, 7), 1.0);
    EXPECT_EQ(a.max_value(), 1.0);
}

TEST(Alpha, Constant) {
    EXPECT_EQ(alpha_eval(AlphaFunction::constant(2.0), 0), 2.0);
    EXPECT_EQ(AlphaFunction::constant(2.0).max_value(), 2.0);
}

TEST(Alpha, SlowStartHandTable) {
    const auto a = AlphaFunction::slow_start(2.0, 8.0);
    const double expected[] = {1, 2, 4, 8, 8, 8, 8};
    for (ContinuityTime tau = 0; tau < 7; ++tau) EXPECT_EQ(a(tau), expected[tau]) << "tau=" << tau;
    EXPECT_EQ(a.max_value(), 8.0);
}

TEST(Alpha, TableTail) {
    const auto a = AlphaFunction::table({3.0, 1.0, 2.0}, 0.5);
    EXPECT_EQ(a(0), 3.0);
    EXPECT_EQ(a(2), 2.0);
    EXPECT_EQ(a(3), 0.5);
    EXPECT_EQ(a(1000), 0.5);
    EXPECT_EQ(a.max_value(), 3.0);
    EXPECT_EQ(AlphaFunction::table({1.0, 4.0})(9), 4.0);
}

TEST(Alpha, SettlesAt) {
    EXPECT_EQ(AlphaFunction::reno().settles_at(), 0u);
    EXPECT_EQ(AlphaFunction::slow_start(2.0, 8.0).settles_at(), 3u);
    EXPECT_EQ(AlphaFunction::slow_start(2.0, 5.0).settles_at(), 3u);
    EXPECT_EQ(AlphaFunction::slow_start(1.0, 5.0).settles_at(), 0u);
    EXPECT_FALSE(AlphaFunction::slow_start(0.5, 5.0).settles_at());
    EXPECT_EQ(AlphaFunction::table({3.0, 1.0}).settles_at(), 2u);
}

TEST(Alpha, ValidationRejectsNonPositive) {
    EXPECT_THROW(AlphaFunction::constant(0.0).validate(), std::invalid_argument);
    EXPECT_THROW(AlphaFunction::table({1.0, -1.0}).validate(), std::invalid_argument);
    EXPECT_THROW(AlphaFunction::table({}), std::invalid_argument);
    EXPECT_NO_THROW(AlphaFunction::slow_start(2, 8).validate());
}

TEST(Alpha, Pure) {
    const auto a = AlphaFunction::slow_start(1.5, 20.0);
    for (ContinuityTime tau = 0; tau < 50; ++tau) EXPECT_EQ(a(tau), a(tau));
}

TEST(Ranks, DistinctLoads) {
    const std::vector<double> loads{10, 7, 9}, caps{1, 1, 1};
    const auto r = compute_ranks(loads, caps);
    EXPECT_EQ(r.rank, (std::vector<std::size_t>{0, 2, 1}));
    EXPECT_EQ(r.min_path(), 1u);
}

TEST(Ranks, TieGoesToLowerIndex) {
    const std::vector<double> loads{5, 5}, caps{1, 1};
    EXPECT_EQ(compute_ranks(loads, caps).rank, (std::vector<std::size_t>{0, 1}));
}

TEST(Ranks, UtilizationNotRawLoad) {
    const std::vector<double> loads{8, 8}, caps{16, 8};
    EXPECT_EQ(compute_ranks(loads, caps).rank, (std::vector<std::size_t>{1, 0}));
}

TEST(Ranks, PermutationAndOrderProperty) {
    std::mt19937_64 gen(42);
    std::uniform_int_distribution<int> paths_dist(2, 9);
    std::uniform_real_distribution<double> val(0.0, 100.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int p = paths_dist(gen);
        std::vector<double> loads(p), caps(p);
        for (int i = 0; i < p; ++i) {
            // Coarse values so that ties show up regularly.
            loads[i] = std::floor(val(gen) / 20.0);
            caps[i] = 1.0 + std::floor(val(gen) / 50.0);
        }
        const auto r = compute_ranks(loads, caps);
        auto sorted = r.rank;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < p; ++i) ASSERT_EQ(sorted[i], static_cast<std::size_t>(i));
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) {
                const double ua = loads[a] / caps[a], ub = loads[b] / caps[b];
                if (ua > ub) EXPECT_LT(r[a], r[b]);
                if (ua == ub && a < b) EXPECT_LT(r[a], r[b]);
            }
    }
}

TEST(Ranks, LengthMismatchThrows) {
    const std::vector<double> loads{1, 2}, caps{1};
    EXPECT_THROW(compute_ranks(loads, caps), std::invalid_argument);
}

TEST(Params, Validation) {
    ProtocolParams p;
    EXPECT_NO_THROW(p.validate());
    p.rho = 1.5;
    try {
        p.validate();
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("protocol.rho"), std::string::npos);
    }
    p = {};
    p.gamma = 1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.sigma = -0.1;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Network, CapacitiesAndValidation) {
    NetworkConfig c{10, 4, 100.0, {}};
    EXPECT_EQ(c.capacity(2), 25.0);
    EXPECT_TRUE(c.homogeneous());
    c.per_path_capacity = std::vector<double>{10, 20, 30, 40};
    EXPECT_EQ(c.capacity(3), 40.0);
    EXPECT_FALSE(c.homogeneous());
    EXPECT_NO_THROW(c.validate());
    c.per_path_capacity = std::vector<double>{10, 20};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    NetworkConfig few{3, 4, 100.0, {}};
    EXPECT_THROW(few.validate(), std::invalid_argument);
    NetworkConfig single{3, 1, 100.0, {}};
    EXPECT_THROW(single.validate(), std::invalid_argument);
}
