#include "lpvdd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lpvdd {

namespace {

// Fractional sample index where v crosses `level` going from a to b.
double crossing(double a, double b, double level) {
    return b == a ? 0.0 : (level - a) / (b - a);
}

} // namespace

StepMetrics step_metrics(const SampledSignal& y, std::size_t step_start, double initial, double final_target) {
    if (final_target == initial) throw std::invalid_argument("step metrics need final_target != initial");
    if (step_start >= y.size()) throw RangeError("step start outside the record");
    const double span = final_target - initial;
    const double ts = y.sample_period();
    const std::size_t n = y.size();
    std::vector<double> v(n - step_start);
    for (std::size_t k = step_start; k < n; ++k) v[k - step_start] = (y.value(k) - initial) / span;

    StepMetrics m;
    m.final_value = y.value(n - 1);
    m.overshoot_pct = std::max(0.0, *std::max_element(v.begin(), v.end()) - 1.0) * 100.0;

    auto first_cross = [&](double level) -> std::optional<double> {
        if (v[0] >= level) return 0.0;
        for (std::size_t k = 1; k < v.size(); ++k) {
            if (v[k] >= level) return (static_cast<double>(k - 1) + crossing(v[k - 1], v[k], level)) * ts;
        }
        return std::nullopt;
    };
    const auto t10 = first_cross(0.1);
    const auto t90 = first_cross(0.9);
    if (t10 && t90) m.rise_time_10_90 = *t90 - *t10;

    constexpr double band = 0.02;
    auto outside = [&](double x) { return std::abs(x - 1.0) > band; };
    if (outside(v.back())) return m;
    std::size_t last = v.size();
    for (std::size_t k = v.size(); k-- > 0;) {
        if (outside(v[k])) {
            last = k;
            break;
        }
    }
    if (last == v.size()) {
        m.settling_time_2pct = 0.0;
    } else {
        const double a = v[last], b = v[last + 1];
        const double edge = a > 1.0 ? 1.0 + band : 1.0 - band;
        m.settling_time_2pct = (static_cast<double>(last) + crossing(a, b, edge)) * ts;
    }
    return m;
}

std::optional<StepMetrics> first_step_metrics(const SampledSignal& y,
                                              const std::vector<std::pair<std::size_t, double>>& steps,
                                              std::size_t lookahead) {
    double level = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].second == level) continue;
        const std::size_t next = i + 1 < steps.size() ? steps[i + 1].first : y.size() + lookahead;
        const std::size_t end = next - std::min(lookahead, next);
        if (steps[i].first >= end || end > y.size()) return std::nullopt;
        return step_metrics(slice(y, 0, end), steps[i].first, level, steps[i].second);
    }
    return std::nullopt;
}

double matching_ms(const std::vector<double>& y, const std::vector<double>& y_d) {
    if (y.size() != y_d.size()) throw ShapeError("matching_ms: signals differ in length");
    if (y.empty()) throw ShapeError("matching_ms: empty signals");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - y_d[i]) * (y[i] - y_d[i]);
    return acc / static_cast<double>(y.size());
}

double matching_ms(const SampledSignal& y, const SampledSignal& y_d) {
    return matching_ms(y.values_or_nan(), y_d.values_or_nan());
}

ViolationStats violation_stats(const std::vector<double>& signal, double low, double high, double tol) {
    ViolationStats s;
    for (double x : signal) {
        const double excess = std::max({0.0, x - high, low - x});
        s.max_violation = std::max(s.max_violation, excess);
        if (excess > tol) ++s.violated_samples;
    }
    return s;
}

std::vector<double> increments(const std::vector<double>& x) {
    std::vector<double> d;
    for (std::size_t t = 1; t < x.size(); ++t) d.push_back(x[t] - x[t - 1]);
    return d;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "metric,value\n";
    for (const auto& r : rows) out << r.name << ',' << format_double(r.value) << '\n';
}

std::string metrics_summary(const std::vector<MetricsRow>& rows) {
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    std::ostringstream os;
    for (const auto& r : rows) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << r.name << std::setprecision(6) << r.value << '\n';
    }
    return os.str();
}

} // namespace lpvdd
