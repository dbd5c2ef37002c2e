#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "lpvdd/metrics.hpp"

using namespace lpvdd;

namespace {

SampledSignal geometric_step(double a, std::size_t n, double ts, std::size_t delay = 0) {
    std::vector<double> y(n, 0.0);
    for (std::size_t k = delay; k < n; ++k) y[k] = 1.0 - std::pow(a, static_cast<double>(k - delay));
    return SampledSignal(y, ts);
}

} // namespace

TEST(StepMetricsTest, FirstOrderMatchesContinuousCrossings) {
    const auto y = geometric_step(0.99, 1500, 0.01);
    const auto m = step_metrics(y, 0, 0.0, 1.0);
    const double lam = -std::log(0.99);
    const double rise = (std::log(0.9) - std::log(0.1)) / lam * 0.01;
    const double settle = -std::log(0.02) / lam * 0.01;
    ASSERT_TRUE(m.rise_time_10_90 && m.settling_time_2pct);
    EXPECT_NEAR(*m.rise_time_10_90, rise, 2e-3);
    EXPECT_NEAR(*m.rise_time_10_90, 2.186, 2e-3);
    EXPECT_NEAR(*m.settling_time_2pct, settle, 2e-3);
    EXPECT_NEAR(*m.settling_time_2pct, 3.893, 2e-3);
    EXPECT_EQ(m.overshoot_pct, 0.0);
}

TEST(StepMetricsTest, IdealStepIsInstantaneous) {
    const auto m = step_metrics(SampledSignal::constant(1.0, 20, 0.1), 0, 0.0, 1.0);
    EXPECT_EQ(*m.rise_time_10_90, 0.0);
    EXPECT_EQ(*m.settling_time_2pct, 0.0);
}

TEST(StepMetricsTest, UnreachedTargetIsUndefined) {
    const auto m = step_metrics(SampledSignal::constant(0.5, 50, 0.1), 0, 0.0, 1.0);
    EXPECT_FALSE(m.defined());
    EXPECT_FALSE(m.settling_time_2pct.has_value());
}

TEST(StepMetricsTest, CountsFromStepInstant) {
    const auto a = step_metrics(geometric_step(0.9, 400, 0.05), 0, 0.0, 1.0);
    const auto b = step_metrics(geometric_step(0.9, 500, 0.05, 100), 100, 0.0, 1.0);
    EXPECT_NEAR(*a.rise_time_10_90, *b.rise_time_10_90, 1e-12);
    EXPECT_NEAR(*a.settling_time_2pct, *b.settling_time_2pct, 1e-12);
}

TEST(StepMetricsTest, OvershootAndLastExit) {
    // 1, then 1.5, then settled: last exit from the band happens after the overshoot.
    const SampledSignal y({0.0, 1.5, 1.0, 1.0, 1.0}, 1.0);
    const auto m = step_metrics(y, 0, 0.0, 1.0);
    EXPECT_NEAR(m.overshoot_pct, 50.0, 1e-12);
    EXPECT_NEAR(*m.settling_time_2pct, 1.0 + 0.48 / 0.5, 1e-12);
}

TEST(StepMetricsProperty, AffineInvariance) {
    const auto base = geometric_step(0.97, 600, 0.02);
    const auto m0 = step_metrics(base, 0, 0.0, 1.0);
    for (double scale : {-3.0, 0.5, 7.0}) {
        for (double offset : {-2.0, 0.0, 4.5}) {
            std::vector<double> v(base.size());
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = offset + scale * base[k];
            const auto m = step_metrics(SampledSignal(v, 0.02), 0, offset, offset + scale);
            EXPECT_NEAR(*m.rise_time_10_90, *m0.rise_time_10_90, 1e-9);
            EXPECT_NEAR(*m.settling_time_2pct, *m0.settling_time_2pct, 1e-9);
        }
    }
}

TEST(StepMetricsTest, RejectsDegenerateInput) {
    EXPECT_THROW(step_metrics(SampledSignal::constant(1.0, 5, 1.0), 0, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(step_metrics(SampledSignal::constant(1.0, 5, 1.0), 5, 0.0, 1.0), RangeError);
}

TEST(MatchingMs, Examples) {
    EXPECT_DOUBLE_EQ(matching_ms(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}), 1.0 / 3.0);
    EXPECT_EQ(matching_ms(std::vector<double>{2, 2}, std::vector<double>{2, 2}), 0.0);
    EXPECT_THROW(matching_ms(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST(MatchingMsProperty, SymmetricAndShiftInvariant) {
    const auto a = fx::white(300, 1.0, 1).values_or_nan();
    const auto b = fx::white(300, 1.0, 2).values_or_nan();
    EXPECT_EQ(matching_ms(a, b), matching_ms(b, a));
    auto a2 = a, b2 = b;
    for (auto& v : a2) v += 10.0;
    for (auto& v : b2) v += 10.0;
    EXPECT_NEAR(matching_ms(a2, b2), matching_ms(a, b), 1e-12);
}

TEST(Violations, CountsAndMagnitude) {
    const std::vector<double> s{0.0, 6.0, -1.0, 5.0000001, 2.0};
    const auto v = violation_stats(s, 0.0, 5.0);
    EXPECT_DOUBLE_EQ(v.max_violation, 1.0);
    EXPECT_EQ(v.violated_samples, 3u);
    EXPECT_EQ(violation_stats(s, 0.0, 5.0, 1e-6).violated_samples, 2u);
    EXPECT_EQ(violation_stats(s, -INFINITY, INFINITY).violated_samples, 0u);
}

TEST(Increments, BackwardDifferences) {
    EXPECT_EQ(increments({1.0, 3.0, 2.0}), (std::vector<double>{2.0, -1.0}));
    EXPECT_TRUE(increments({1.0}).empty());
}

TEST(MetricsCsv, HeaderAndRows) {
    std::ostringstream os;
    write_metrics_csv(os, {{"ms", 0.1}, {"rise_time", 2.5}});
    EXPECT_EQ(os.str(), "metric,value\nms,0.1\nrise_time,2.5\n");
    EXPECT_NE(metrics_summary({{"ms", 0.1}}).find("ms"), std::string::npos);
}

TEST(FirstStepMetrics, SkipsFlatLevelsAndStopsBeforeNextStep) {
    // Level 0 until 10, then 1 until 60, then 2; y is a geometric response to the first change.
    std::vector<double> v(100, 0.0);
    for (std::size_t k = 10; k < 100; ++k) v[k] = 1.0 - std::pow(0.8, static_cast<double>(k - 10));
    const SampledSignal y(v, 0.1);
    const std::vector<std::pair<std::size_t, double>> steps{{0, 0.0}, {10, 1.0}, {60, 2.0}};
    const auto m = first_step_metrics(y, steps);
    const auto ref = step_metrics(slice(y, 0, 60), 10, 0.0, 1.0);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(*m->rise_time_10_90, *ref.rise_time_10_90);
    const auto short_window = first_step_metrics(y, steps, 45);
    ASSERT_TRUE(short_window.has_value());
    EXPECT_EQ(*short_window->rise_time_10_90, *step_metrics(slice(y, 0, 15), 10, 0.0, 1.0).rise_time_10_90);
    EXPECT_FALSE(first_step_metrics(y, {{0, 0.0}}).has_value());
}
