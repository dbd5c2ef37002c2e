#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvdd/signals.hpp"

namespace lpvdd {

/// Scalar function of a scheduling vector, used as a coefficient basis element.
struct BasisFunction {
    enum class Kind { Constant, Power, Sin, Cos };

    Kind kind = Kind::Constant;
    std::size_t index = 0; ///< scheduling-vector element the function reads
    int power = 1;         ///< exponent for Kind::Power

    static BasisFunction constant() { return {}; }
    static BasisFunction element(std::size_t index, int power = 1) { return {Kind::Power, index, power}; }

    [[nodiscard]] double operator()(std::span<const double> scheduling) const;
    /// Text form: "1", "p[0]", "p[2]^3", "sin(p[1])", "cos(p[0])".
    [[nodiscard]] std::string to_string() const;
    static BasisFunction parse(const std::string& text);
    [[nodiscard]] std::size_t required_size() const { return kind == Kind::Constant ? 0 : index + 1; }

    friend bool operator==(const BasisFunction&, const BasisFunction&) = default;
};

using Basis = std::vector<BasisFunction>;

/// Concrete matrices of a state-space model at one scheduling point.
struct StateSpaceMatrices {
    Eigen::MatrixXd A, B, C, D;
};

class NonInvertibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Parameter-dependent state-space model
 *
 *   x(t+1) = A(p) x(t) + B(p) in(t),   out(t) = C(p) x(t) + D(p) in(t),
 *
 * with every matrix an expansion sum_k M_k * phi_k(p) over a declared basis.
 * The first basis element is always the constant function.
 */
class LpvStateSpace {
public:
    struct Term {
        Eigen::MatrixXd A, B, C, D;
    };

    LpvStateSpace(Basis basis, std::vector<Term> terms);

    static LpvStateSpace lti(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd D);
    /// x(t+1) = a x(t) + b in(t), out(t) = c x(t).
    static LpvStateSpace first_order(double a, double b, double c = 1.0);

    [[nodiscard]] Eigen::Index state_dim() const noexcept { return n_x_; }
    [[nodiscard]] Eigen::Index input_dim() const noexcept { return n_u_; }
    [[nodiscard]] Eigen::Index output_dim() const noexcept { return n_y_; }
    [[nodiscard]] const Basis& basis() const noexcept { return basis_; }
    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }
    [[nodiscard]] bool is_lti() const;
    [[nodiscard]] std::size_t scheduling_size() const;

    [[nodiscard]] StateSpaceMatrices evaluate(std::span<const double> scheduling) const;
    [[nodiscard]] StateSpaceMatrices evaluate(double p) const { return evaluate(std::span<const double>(&p, 1)); }

    /// Admissible scalar scheduling interval used for invertibility checks.
    double scheduling_min = -1.0;
    double scheduling_max = 1.0;

private:
    Basis basis_;
    std::vector<Term> terms_;
    Eigen::Index n_x_ = 0, n_u_ = 0, n_y_ = 0;
};

struct SimulationResult {
    std::vector<SampledSignal> outputs;   ///< one signal per output channel
    std::vector<Eigen::VectorXd> states;  ///< x(0) .. x(N)

    [[nodiscard]] const SampledSignal& output() const { return outputs.front(); }
};

/// Single-input simulation over a recorded scheduling trajectory.
SimulationResult simulate(const LpvStateSpace& model, const SampledSignal& input, const SampledSignal& p,
                          const Eigen::VectorXd& x0);
SimulationResult simulate(const LpvStateSpace& model, const SampledSignal& input, const SampledSignal& p);

/// Left inverse of a SISO model with relative degree 0 or 1.
class LeftInverseFilter {
public:
    explicit LeftInverseFilter(LpvStateSpace source);

    [[nodiscard]] const LpvStateSpace& source() const noexcept { return source_; }
    [[nodiscard]] int relative_degree() const noexcept { return relative_degree_; }

private:
    LpvStateSpace source_;
    int relative_degree_ = 1;
};

/// Validates invertibility on a grid over the scheduling range.
LeftInverseFilter left_inverse(const LpvStateSpace& model);

/**
 * Causal batch application of the left inverse: sample t of the result is the
 * reconstructed model input at t - r, so the first r samples are unavailable.
 * The model state starts at zero.
 */
SampledSignal apply_inverse(const LeftInverseFilter& filter, const SampledSignal& y, const SampledSignal& p);

/// apply_inverse advanced by r samples: sample t is the input at t (last r unavailable).
SampledSignal reconstruct_input(const LeftInverseFilter& filter, const SampledSignal& y, const SampledSignal& p);

/// Continuous-equivalent cutoff -ln(a) / (2 pi Ts) of a first-order pole a.
double first_order_cutoff_hz(double pole, double sample_period);

} // namespace lpvdd
