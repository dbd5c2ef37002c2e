#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpvdd {

/// Raised when an index or length falls outside a signal's record.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Raised when dimensions or lengths of combined objects disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Uniformly sampled scalar signal.
 *
 * Samples that refer to instants outside the recorded window (produced by
 * shifting) are stored as disengaged optionals. Consumers that build
 * regressors must skip any row touching such a sample instead of imputing it.
 */
class SampledSignal {
public:
    SampledSignal(std::vector<double> values, double sample_period, std::int64_t start_index = 0);
    SampledSignal(std::vector<std::optional<double>> samples, double sample_period,
                  std::int64_t start_index = 0);
    SampledSignal(std::initializer_list<double> values, double sample_period, std::int64_t start_index = 0)
        : SampledSignal(std::vector<double>(values), sample_period, start_index) {}

    static SampledSignal constant(double value, std::size_t n, double sample_period);

    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] double sample_period() const noexcept { return sample_period_; }
    [[nodiscard]] std::int64_t start_index() const noexcept { return start_index_; }

    [[nodiscard]] bool available(std::size_t i) const { return samples_.at(i).has_value(); }
    [[nodiscard]] const std::optional<double>& at(std::size_t i) const { return samples_.at(i); }
    /// Value at position i; throws RangeError if the sample is unavailable.
    [[nodiscard]] double value(std::size_t i) const;
    [[nodiscard]] double operator[](std::size_t i) const { return value(i); }

    [[nodiscard]] bool fully_available() const noexcept;
    /// All values, unavailable ones replaced by NaN.
    [[nodiscard]] std::vector<double> values_or_nan() const;
    [[nodiscard]] const std::vector<std::optional<double>>& samples() const noexcept { return samples_; }

    /// Time stamp of position i in seconds.
    [[nodiscard]] double time(std::size_t i) const noexcept {
        return static_cast<double>(start_index_ + static_cast<std::int64_t>(i)) * sample_period_;
    }

    friend bool operator==(const SampledSignal&, const SampledSignal&) = default;

private:
    std::vector<std::optional<double>> samples_;
    double sample_period_;
    std::int64_t start_index_;
};

/// Synchronized input/output/scheduling record of one experiment.
class ExperimentLog {
public:
    ExperimentLog(SampledSignal u, SampledSignal y, SampledSignal p);

    [[nodiscard]] const SampledSignal& u() const noexcept { return u_; }
    [[nodiscard]] const SampledSignal& y() const noexcept { return y_; }
    [[nodiscard]] const SampledSignal& p() const noexcept { return p_; }
    [[nodiscard]] std::size_t size() const noexcept { return u_.size(); }
    [[nodiscard]] double sample_period() const noexcept { return u_.sample_period(); }

    friend bool operator==(const ExperimentLog&, const ExperimentLog&) = default;

private:
    SampledSignal u_;
    SampledSignal y_;
    SampledSignal p_;
};

/// Magnitude, rate and output bounds. Infinite entries mean "unconstrained".
struct BoundSet {
    double u_min = -std::numeric_limits<double>::infinity();
    double u_max = std::numeric_limits<double>::infinity();
    double du_min = -std::numeric_limits<double>::infinity();
    double du_max = std::numeric_limits<double>::infinity();
    double y_min = -std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();

    /// Throws std::invalid_argument when a lower bound exceeds its upper bound.
    void validate() const;
};

/// Contiguous sub-signal [from, to); start_index advances by `from`.
SampledSignal slice(const SampledSignal& signal, std::size_t from, std::size_t to);
ExperimentLog slice(const ExperimentLog& log, std::size_t from, std::size_t to);

/// Output sample t equals input sample t - lag; out-of-record samples become unavailable.
SampledSignal shift(const SampledSignal& signal, std::int64_t lag);

// CSV log format: header `t,u,y,p`, one row per sample, t in seconds.
void write_log_csv(std::ostream& out, const ExperimentLog& log);
void write_log_csv(const std::string& path, const ExperimentLog& log);
ExperimentLog read_log_csv(std::istream& in);
ExperimentLog read_log_csv(const std::string& path);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

} // namespace lpvdd
