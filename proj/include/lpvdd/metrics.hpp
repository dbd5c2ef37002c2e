#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpvdd/signals.hpp"

namespace lpvdd {

/// Step-response figures in seconds from the step instant; nullopt marks an undefined metric.
struct StepMetrics {
    std::optional<double> rise_time_10_90;
    std::optional<double> settling_time_2pct;
    double overshoot_pct = 0.0;
    double final_value = 0.0;

    [[nodiscard]] bool defined() const noexcept { return rise_time_10_90.has_value(); }
};

/**
 * 10-90% rise time and 2% settling time ("last exit" from the band) with
 * linear interpolation between samples, counted from `step_start`.
 */
StepMetrics step_metrics(const SampledSignal& y, std::size_t step_start, double initial, double final_target);

/**
 * Step metrics on the first genuine level change of a piecewise-constant
 * reference (levels start at 0), evaluated up to the next change minus
 * `lookahead` samples. nullopt when no such window exists.
 */
std::optional<StepMetrics> first_step_metrics(const SampledSignal& y,
                                              const std::vector<std::pair<std::size_t, double>>& steps,
                                              std::size_t lookahead = 0);

/// (1/N) sum (y - y_d)^2.
double matching_ms(const SampledSignal& y, const SampledSignal& y_d);
double matching_ms(const std::vector<double>& y, const std::vector<double>& y_d);

struct ViolationStats {
    double max_violation = 0.0;
    std::size_t violated_samples = 0;
};

/// Largest excursion outside [low, high] and the number of samples outside; `tol` ignores tiny excursions in the count.
ViolationStats violation_stats(const std::vector<double>& signal, double low, double high, double tol = 0.0);

/// Backward differences x(t) - x(t-1), t >= 1.
std::vector<double> increments(const std::vector<double>& x);

struct MetricsRow {
    std::string name;
    double value;
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::string metrics_summary(const std::vector<MetricsRow>& rows);

} // namespace lpvdd
