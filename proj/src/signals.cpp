#include "lpvdd/signals.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace lpvdd {

namespace {

void check_period(double sample_period) {
    if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
        throw std::invalid_argument("sample_period must be finite and strictly positive");
    }
}

double round_significant(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return std::stod(os.str());
}

std::optional<double> parse_field(std::string_view field, std::size_t line) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
        field.remove_suffix(1);
    }
    if (field.empty() || field == "nan" || field == "NaN") return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw std::runtime_error("log csv line " + std::to_string(line) + ": cannot parse '" +
                                 std::string(field) + "'");
    }
    return v;
}

} // namespace

SampledSignal::SampledSignal(std::vector<double> values, double sample_period, std::int64_t start_index)
    : sample_period_(sample_period), start_index_(start_index) {
    check_period(sample_period);
    if (values.empty()) throw std::invalid_argument("signal must hold at least one sample");
    samples_.reserve(values.size());
    for (double v : values) samples_.emplace_back(v);
}

SampledSignal::SampledSignal(std::vector<std::optional<double>> samples, double sample_period,
                             std::int64_t start_index)
    : samples_(std::move(samples)), sample_period_(sample_period), start_index_(start_index) {
    check_period(sample_period);
    if (samples_.empty()) throw std::invalid_argument("signal must hold at least one sample");
}

SampledSignal SampledSignal::constant(double value, std::size_t n, double sample_period) {
    return SampledSignal(std::vector<double>(n, value), sample_period);
}

double SampledSignal::value(std::size_t i) const {
    const auto& s = samples_.at(i);
    if (!s) throw RangeError("sample " + std::to_string(i) + " is unavailable");
    return *s;
}

bool SampledSignal::fully_available() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(), [](const auto& s) { return s.has_value(); });
}

std::vector<double> SampledSignal::values_or_nan() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.value_or(std::nan("")));
    return out;
}

ExperimentLog::ExperimentLog(SampledSignal u, SampledSignal y, SampledSignal p)
    : u_(std::move(u)), y_(std::move(y)), p_(std::move(p)) {
    if (u_.size() != y_.size() || u_.size() != p_.size()) {
        throw ShapeError("experiment log channels differ in length: u=" + std::to_string(u_.size()) +
                         " y=" + std::to_string(y_.size()) + " p=" + std::to_string(p_.size()));
    }
    if (u_.sample_period() != y_.sample_period() || u_.sample_period() != p_.sample_period()) {
        throw ShapeError("experiment log channels differ in sample period");
    }
}

void BoundSet::validate() const {
    auto check = [](double lo, double hi, const char* name) {
        if (std::isfinite(lo) && std::isfinite(hi) && lo > hi) {
            throw std::invalid_argument(std::string("bound set: ") + name + " lower bound exceeds upper bound");
        }
        if (std::isnan(lo) || std::isnan(hi)) {
            throw std::invalid_argument(std::string("bound set: ") + name + " bound is NaN");
        }
    };
    check(u_min, u_max, "u");
    check(du_min, du_max, "du");
    check(y_min, y_max, "y");
}

SampledSignal slice(const SampledSignal& signal, std::size_t from, std::size_t to) {
    if (from >= to || to > signal.size()) {
        throw RangeError("slice [" + std::to_string(from) + ", " + std::to_string(to) +
                         ") outside record of length " + std::to_string(signal.size()));
    }
    std::vector<std::optional<double>> out(signal.samples().begin() + static_cast<std::ptrdiff_t>(from),
                                           signal.samples().begin() + static_cast<std::ptrdiff_t>(to));
    return SampledSignal(std::move(out), signal.sample_period(),
                         signal.start_index() + static_cast<std::int64_t>(from));
}

ExperimentLog slice(const ExperimentLog& log, std::size_t from, std::size_t to) {
    return ExperimentLog(slice(log.u(), from, to), slice(log.y(), from, to), slice(log.p(), from, to));
}

SampledSignal shift(const SampledSignal& signal, std::int64_t lag) {
    const auto n = static_cast<std::int64_t>(signal.size());
    std::vector<std::optional<double>> out(signal.size());
    for (std::int64_t t = 0; t < n; ++t) {
        const std::int64_t src = t - lag;
        if (src >= 0 && src < n) out[static_cast<std::size_t>(t)] = signal.at(static_cast<std::size_t>(src));
    }
    return SampledSignal(std::move(out), signal.sample_period(), signal.start_index());
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_log_csv(std::ostream& out, const ExperimentLog& log) {
    auto field = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("nan"); };
    out << "t,u,y,p\n";
    for (std::size_t i = 0; i < log.size(); ++i) {
        out << format_double(log.u().time(i)) << ',' << field(log.u().at(i)) << ',' << field(log.y().at(i))
            << ',' << field(log.p().at(i)) << '\n';
    }
}

void write_log_csv(const std::string& path, const ExperimentLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_log_csv(out, log);
}

ExperimentLog read_log_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("log csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,u,y,p") throw std::runtime_error("log csv: expected header 't,u,y,p', got '" + line + "'");

    std::vector<double> t;
    std::vector<std::optional<double>> u, y, p;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::array<std::string_view, 4> fields{};
        std::string_view rest(line);
        for (std::size_t k = 0; k < 4; ++k) {
            const auto comma = rest.find(',');
            if (k < 3 && comma == std::string_view::npos) {
                throw std::runtime_error("log csv line " + std::to_string(lineno) + ": expected 4 fields");
            }
            fields[k] = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        const auto tv = parse_field(fields[0], lineno);
        if (!tv) throw std::runtime_error("log csv line " + std::to_string(lineno) + ": missing time stamp");
        t.push_back(*tv);
        u.push_back(parse_field(fields[1], lineno));
        y.push_back(parse_field(fields[2], lineno));
        p.push_back(parse_field(fields[3], lineno));
    }
    if (t.empty()) throw std::runtime_error("log csv: no samples");

    // Period is recovered from the time column; time stamps carry at most
    // 12 significant digits of information about it.
    double period = 1.0;
    if (t.size() > 1) period = round_significant((t.back() - t.front()) / static_cast<double>(t.size() - 1), 12);
    const auto start = static_cast<std::int64_t>(std::llround(t.front() / period));
    return ExperimentLog(SampledSignal(std::move(u), period, start), SampledSignal(std::move(y), period, start),
                         SampledSignal(std::move(p), period, start));
}

ExperimentLog read_log_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return read_log_csv(in);
}

} // namespace lpvdd
