#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "fragstop/parallel.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"

using namespace fragstop;

TEST(Rng, StreamsAreReproducible) {
    const StreamPlan plan(42);
    Rng a = plan.stream("x", 3);
    Rng b = plan.stream("x", 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, LabelsAndIndicesSeparateStreams) {
    const StreamPlan plan(42);
    std::set<std::uint64_t> keys;
    for (const char* label : {"a", "b", "iinfty", "laplace"})
        for (std::uint64_t i = 0; i < 100; ++i) keys.insert(plan.key(label, i));
    EXPECT_EQ(keys.size(), 400u);
    EXPECT_NE(StreamPlan(1).key("a", 0), StreamPlan(2).key("a", 0));
}

TEST(Rng, UniformAndExponentialMoments) {
    Rng g(7);
    std::vector<double> u(200000);
    std::vector<double> e(200000);
    for (auto& x : u) x = uniform01(g);
    for (auto& x : e) x = exponential(g, 2.0);
    const auto mu = mean_estimate(u);
    const auto me = mean_estimate(e);
    EXPECT_LE(std::abs(mu.value - 0.5), 4 * mu.std_error);
    EXPECT_LE(std::abs(me.value - 0.5), 4 * me.std_error);
    EXPECT_TRUE(std::isinf(exponential(g, 0.0)));
}

TEST(Rng, OpenUniformNeverHitsEndpoints) {
    Rng g(1);
    for (int i = 0; i < 100000; ++i) {
        const double x = uniform_open(g);
        ASSERT_GT(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
    const StreamPlan plan(9);
    auto fn = [&](std::size_t i) {
        Rng g = plan.stream("p", i);
        double s = 0.0;
        for (int k = 0; k < 10; ++k) s += uniform01(g);
        return s;
    };
    const auto one = parallel_map(1000, 1, fn);
    const auto four = parallel_map(1000, 4, fn);
    EXPECT_EQ(one, four);
}

TEST(Parallel, ExceptionsPropagate) {
    EXPECT_THROW(parallel_map(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw std::runtime_error("boom");
                                  return 1;
                              }),
                 std::runtime_error);
}

TEST(Stats, PairedDifferenceAndRatio) {
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {0, 1, 2, 3};
    const auto d = paired_difference(a, b);
    EXPECT_DOUBLE_EQ(d.value, 1.0);
    EXPECT_DOUBLE_EQ(d.std_error, 0.0);
    // x = 2y exactly: ratio has no spread
    const std::vector<double> y = {1, 2, 3, 4};
    const std::vector<double> x = {2, 4, 6, 8};
    EXPECT_NEAR(ratio_std_error(x, y), 0.0, 1e-15);
}
