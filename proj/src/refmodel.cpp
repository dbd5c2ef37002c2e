#include "lpvdd/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>

namespace lpvdd {

namespace {

constexpr double kMarkovFloor = 1e-12;
constexpr int kGridPoints = 21;

std::vector<double> scheduling_grid(const LpvStateSpace& model) {
    if (model.is_lti()) return {0.0};
    std::vector<double> grid;
    for (int k = 0; k < kGridPoints; ++k) {
        grid.push_back(model.scheduling_min +
                       (model.scheduling_max - model.scheduling_min) * k / (kGridPoints - 1));
    }
    return grid;
}

void require_full(const SampledSignal& s, const char* what) {
    if (!s.fully_available()) throw RangeError(std::string(what) + " contains unavailable samples");
}

} // namespace

double BasisFunction::operator()(std::span<const double> scheduling) const {
    if (kind == Kind::Constant) return 1.0;
    if (index >= scheduling.size()) {
        throw ShapeError("basis function reads p[" + std::to_string(index) + "] but scheduling vector has " +
                         std::to_string(scheduling.size()) + " entries");
    }
    const double v = scheduling[index];
    switch (kind) {
    case Kind::Power: return std::pow(v, power);
    case Kind::Sin: return std::sin(v);
    case Kind::Cos: return std::cos(v);
    case Kind::Constant: break;
    }
    return 1.0;
}

std::string BasisFunction::to_string() const {
    const std::string el = "p[" + std::to_string(index) + "]";
    switch (kind) {
    case Kind::Constant: return "1";
    case Kind::Power: return power == 1 ? el : el + "^" + std::to_string(power);
    case Kind::Sin: return "sin(" + el + ")";
    case Kind::Cos: return "cos(" + el + ")";
    }
    return "1";
}

BasisFunction BasisFunction::parse(const std::string& text) {
    static const std::regex power_re(R"(^\s*p\[(\d+)\](\^(-?\d+))?\s*$)");
    static const std::regex trig_re(R"(^\s*(sin|cos)\(p\[(\d+)\]\)\s*$)");
    std::smatch m;
    if (text == "1") return constant();
    if (std::regex_match(text, m, power_re)) {
        return element(std::stoul(m[1].str()), m[3].matched ? std::stoi(m[3].str()) : 1);
    }
    if (std::regex_match(text, m, trig_re)) {
        return {m[1].str() == "sin" ? Kind::Sin : Kind::Cos, std::stoul(m[2].str()), 1};
    }
    throw std::invalid_argument("unrecognized basis function '" + text + "'");
}

LpvStateSpace::LpvStateSpace(Basis basis, std::vector<Term> terms)
    : basis_(std::move(basis)), terms_(std::move(terms)) {
    if (basis_.empty() || basis_.front().kind != BasisFunction::Kind::Constant) {
        throw std::invalid_argument("basis must start with the constant function");
    }
    if (basis_.size() != terms_.size()) throw ShapeError("one coefficient term is required per basis element");
    const auto& t0 = terms_.front();
    n_x_ = t0.A.rows();
    n_u_ = t0.B.cols();
    n_y_ = t0.C.rows();
    if (t0.D.rows() != n_y_ || t0.D.cols() != n_u_) throw ShapeError("D must be n_y x n_u");
    for (const auto& t : terms_) {
        if (t.A.rows() != n_x_ || t.A.cols() != n_x_ || t.B.rows() != n_x_ || t.B.cols() != n_u_ ||
            t.C.rows() != n_y_ || t.C.cols() != n_x_ || t.D.rows() != n_y_ || t.D.cols() != n_u_) {
            throw ShapeError("inconsistent coefficient matrix dimensions");
        }
    }
}

LpvStateSpace LpvStateSpace::lti(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd D) {
    return LpvStateSpace({BasisFunction::constant()}, {Term{std::move(A), std::move(B), std::move(C), std::move(D)}});
}

LpvStateSpace LpvStateSpace::first_order(double a, double b, double c) {
    return lti(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b),
               Eigen::MatrixXd::Constant(1, 1, c), Eigen::MatrixXd::Zero(1, 1));
}

bool LpvStateSpace::is_lti() const {
    for (std::size_t k = 1; k < terms_.size(); ++k) {
        const auto& t = terms_[k];
        if (!t.A.isZero(0.0) || !t.B.isZero(0.0) || !t.C.isZero(0.0) || !t.D.isZero(0.0)) return false;
    }
    return true;
}

std::size_t LpvStateSpace::scheduling_size() const {
    std::size_t n = 0;
    for (const auto& f : basis_) n = std::max(n, f.required_size());
    return n;
}

StateSpaceMatrices LpvStateSpace::evaluate(std::span<const double> scheduling) const {
    StateSpaceMatrices m{terms_[0].A, terms_[0].B, terms_[0].C, terms_[0].D};
    for (std::size_t k = 1; k < terms_.size(); ++k) {
        const double w = basis_[k](scheduling);
        if (w == 0.0) continue;
        m.A += w * terms_[k].A;
        m.B += w * terms_[k].B;
        m.C += w * terms_[k].C;
        m.D += w * terms_[k].D;
    }
    return m;
}

SimulationResult simulate(const LpvStateSpace& model, const SampledSignal& input, const SampledSignal& p,
                          const Eigen::VectorXd& x0) {
    if (input.size() != p.size()) throw ShapeError("input and scheduling signals differ in length");
    if (model.input_dim() != 1) throw ShapeError("simulate expects a single-input model");
    if (x0.size() != model.state_dim()) throw ShapeError("initial state has wrong dimension");
    require_full(input, "input");
    require_full(p, "scheduling signal");

    const std::size_t n = input.size();
    const auto ny = static_cast<std::size_t>(model.output_dim());
    std::vector<std::vector<double>> out(ny, std::vector<double>(n));
    SimulationResult result;
    result.states.reserve(n + 1);
    Eigen::VectorXd x = x0;
    result.states.push_back(x);
    for (std::size_t t = 0; t < n; ++t) {
        const double pt = p[t];
        const auto m = model.evaluate(pt);
        const double in = input[t];
        const Eigen::VectorXd yt = m.C * x + m.D.col(0) * in;
        for (std::size_t j = 0; j < ny; ++j) out[j][t] = yt(static_cast<Eigen::Index>(j));
        x = m.A * x + m.B.col(0) * in;
        result.states.push_back(x);
    }
    for (auto& o : out) result.outputs.emplace_back(std::move(o), input.sample_period(), input.start_index());
    return result;
}

SimulationResult simulate(const LpvStateSpace& model, const SampledSignal& input, const SampledSignal& p) {
    return simulate(model, input, p, Eigen::VectorXd::Zero(model.state_dim()));
}

LeftInverseFilter::LeftInverseFilter(LpvStateSpace source) : source_(std::move(source)) {
    if (source_.input_dim() != 1 || source_.output_dim() != 1) {
        throw UnsupportedError("left inverse requires a SISO reference model");
    }
    const auto grid = scheduling_grid(source_);
    bool any_d = false, all_d = true;
    for (double p : grid) {
        const double d = std::abs(source_.evaluate(p).D(0, 0));
        any_d = any_d || d >= kMarkovFloor;
        all_d = all_d && d >= kMarkovFloor;
    }
    if (any_d && !all_d) {
        throw NonInvertibleError("feedthrough D(p) vanishes on part of the scheduling range");
    }
    if (all_d) {
        relative_degree_ = 0;
        return;
    }
    if (source_.state_dim() == 0) throw NonInvertibleError("static model with zero gain is not invertible");
    for (double p : grid) {
        const auto now = source_.evaluate(p);
        for (double pn : grid) {
            const double markov = (source_.evaluate(pn).C * now.B)(0, 0);
            if (std::abs(markov) < kMarkovFloor) {
                // Either the model is not invertible or its relative degree exceeds one.
                throw NonInvertibleError("first Markov parameter C(p')B(p) is (near) zero; relative degree > 1 "
                                         "or non-invertible reference models are not supported");
            }
        }
    }
    relative_degree_ = 1;
}

LeftInverseFilter left_inverse(const LpvStateSpace& model) { return LeftInverseFilter(model); }

SampledSignal apply_inverse(const LeftInverseFilter& filter, const SampledSignal& y, const SampledSignal& p) {
    if (y.size() != p.size()) throw ShapeError("output and scheduling signals differ in length");
    const int r = filter.relative_degree();
    if (y.size() < static_cast<std::size_t>(r) + 1) throw RangeError("signal shorter than relative degree + 1");
    require_full(y, "output");
    require_full(p, "scheduling signal");

    const auto& model = filter.source();
    const std::size_t n = y.size();
    std::vector<std::optional<double>> out(n);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.state_dim());
    if (r == 0) {
        for (std::size_t t = 0; t < n; ++t) {
            const auto m = model.evaluate(p[t]);
            const double g = (y[t] - (m.C * x)(0)) / m.D(0, 0);
            out[t] = g;
            x = m.A * x + m.B.col(0) * g;
        }
    } else {
        auto now = model.evaluate(p[0]);
        // Start from the minimum-norm state consistent with y(0); zero for records that begin at rest.
        x = now.C.completeOrthogonalDecomposition().solve(Eigen::VectorXd::Constant(1, y[0]));
        for (std::size_t t = 0; t + 1 < n; ++t) {
            const auto next = model.evaluate(p[t + 1]);
            const double markov = (next.C * now.B)(0, 0);
            const double g = (y[t + 1] - (next.C * now.A * x)(0)) / markov;
            out[t + 1] = g;
            x = now.A * x + now.B.col(0) * g;
            now = next;
        }
    }
    return SampledSignal(std::move(out), y.sample_period(), y.start_index());
}

SampledSignal reconstruct_input(const LeftInverseFilter& filter, const SampledSignal& y, const SampledSignal& p) {
    return shift(apply_inverse(filter, y, p), -filter.relative_degree());
}

double first_order_cutoff_hz(double pole, double sample_period) {
    return -std::log(pole) / (2.0 * std::numbers::pi * sample_period);
}

} // namespace lpvdd
