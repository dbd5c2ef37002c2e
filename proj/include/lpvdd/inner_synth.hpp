#pragma once

#include <Eigen/Dense>
#include "json.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "lpvdd/refmodel.hpp"
#include "lpvdd/signals.hpp"

namespace lpvdd {

/// Raised when an API is called with arguments that can never be valid (e.g. IV without instruments).
class MisuseError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class FixedPart { None, Integrator };
enum class Estimator { LeastSquares, InstrumentalVariables };

/// Coefficient functions as weights over a declared basis of Pi(t).
struct ParametricCoefficients {
    Basis basis{BasisFunction::constant()};
};

/// Coefficient functions as Gaussian kernel expansions centered on training scheduling vectors.
struct KernelCoefficients {
    double sigma = 1.0;
    std::size_t center_stride = 1; ///< keep every k-th valid training sample as a center
};

using CoefficientModel = std::variant<ParametricCoefficients, KernelCoefficients>;

/**
 * IO structure of the inner controller
 *
 *   u(t) = -sum_{i=1}^{n_a} a_i(Pi) u(t-i) + sum_{j=0}^{n_b} b_j(Pi) e_f(t-j)
 *
 * where Pi(t) = [p(t - l) for l in scheduling_lags] and e_f is the error
 * passed through the fixed part.
 */
struct ControllerStructure {
    std::size_t n_a = 1;
    std::size_t n_b = 1;
    std::vector<std::size_t> scheduling_lags{};
    CoefficientModel coefficients = ParametricCoefficients{};
    FixedPart fixed_part = FixedPart::None;
    double gamma = 1e6;
    Estimator estimator = Estimator::LeastSquares;

    void validate() const;
    /// Number of structural terms: n_a + n_b + 1.
    [[nodiscard]] std::size_t term_count() const noexcept { return n_a + n_b + 1; }
    /// Largest lag in Pi(t) (0 when Pi is empty).
    [[nodiscard]] std::size_t max_scheduling_lag() const noexcept;
    [[nodiscard]] bool is_kernel() const noexcept { return std::holds_alternative<KernelCoefficients>(coefficients); }
};

/// Passes an error signal through the fixed part (integrator: cumulative sum over available samples).
SampledSignal prefilter_fixed_part(const SampledSignal& error, FixedPart fixed);

/// Scheduling vector Pi(t) = [p(t - l)]; nullopt if any entry is unavailable.
std::optional<Eigen::VectorXd> scheduling_vector(const SampledSignal& p, std::size_t t,
                                                 const std::vector<std::size_t>& lags);

/// Gaussian kernel features exp(-|query - c_j|^2 / sigma), one per center.
Eigen::VectorXd build_kernel_features(std::span<const Eigen::VectorXd> centers, const Eigen::VectorXd& query,
                                      double sigma);

/// Feature vector multiplying each structural term (basis values or kernel features).
Eigen::VectorXd coefficient_features(const ControllerStructure& structure, std::span<const Eigen::VectorXd> centers,
                                     const Eigen::VectorXd& pi);

struct RegressionSystem {
    Eigen::MatrixXd rows;                      ///< one regressor per valid sample
    Eigen::VectorXd targets;                   ///< u(t)
    std::optional<Eigen::MatrixXd> instruments; ///< z(t), same shape as rows
    std::vector<std::size_t> sample_index;     ///< log position of each row
    std::vector<Eigen::VectorXd> centers;      ///< kernel centers used for the features (empty if parametric)

    [[nodiscard]] Eigen::Index size() const noexcept { return rows.rows(); }
};

/// Virtual error e*(t) = M^dagger y(t) - y(t) on recorded data (last r samples unavailable).
SampledSignal virtual_error(const SampledSignal& y, const SampledSignal& p, const LeftInverseFilter& inverse);

/**
 * Regression rows of the model-matching problem: target u(t); row holds -u(t-i)
 * and e_f(t-j) (e_f the pre-filtered virtual error), each times the coefficient
 * features of Pi(t). Rows touching unavailable samples are dropped. Instruments
 * repeat the construction with the instrument log's y and p. Kernel centers are
 * taken from the training rows unless given.
 */
RegressionSystem build_regression(const ExperimentLog& log, const ExperimentLog* instrument_log,
                                  const ControllerStructure& structure, const LpvStateSpace& reference_model,
                                  const std::vector<Eigen::VectorXd>* centers = nullptr);

/// Ridge LS: (Phi'Phi/N + I/gamma) theta = Phi' tau / N.
Eigen::VectorXd fit_ls(const RegressionSystem& system, double gamma);
/// Regularized IV: (S'S + I/gamma) theta = S's with S = Z'Phi/N, s = Z'tau/N.
Eigen::VectorXd fit_iv(const RegressionSystem& system, double gamma);
/// Dispatches on structure.estimator.
Eigen::VectorXd fit(const RegressionSystem& system, const ControllerStructure& structure);

/// Mean squared residual |tau - Phi theta|^2 / N.
double residual_score(const RegressionSystem& system, const Eigen::VectorXd& theta);

/// Controller coefficients at one scheduling point.
struct CoefficientValues {
    Eigen::VectorXd a; ///< a_1 .. a_{n_a}
    Eigen::VectorXd b; ///< b_0 .. b_{n_b}
};

class InnerControllerModel {
public:
    InnerControllerModel(ControllerStructure structure, Eigen::VectorXd theta, std::vector<Eigen::VectorXd> centers,
                         LpvStateSpace reference_model);

    [[nodiscard]] const ControllerStructure& structure() const noexcept { return structure_; }
    [[nodiscard]] const Eigen::VectorXd& theta() const noexcept { return theta_; }
    [[nodiscard]] const std::vector<Eigen::VectorXd>& centers() const noexcept { return centers_; }
    [[nodiscard]] const LpvStateSpace& reference_model() const noexcept { return reference_model_; }
    [[nodiscard]] std::size_t feature_count() const noexcept;

    [[nodiscard]] CoefficientValues coefficients(const Eigen::VectorXd& pi) const;

private:
    ControllerStructure structure_;
    Eigen::VectorXd theta_;
    std::vector<Eigen::VectorXd> centers_;
    LpvStateSpace reference_model_;
};

/// Fits a controller on a training log (instrument log required for IV).
InnerControllerModel fit_inner_controller(const ExperimentLog& train, const ExperimentLog* instrument,
                                          const ControllerStructure& structure, const LpvStateSpace& reference_model);

struct CvPoint {
    double gamma;
    double sigma;
    double score = 0.0;
};

struct CvResult {
    CvPoint best;
    std::vector<CvPoint> table;
};

/**
 * Grid search over (gamma, sigma): fit on train, score the residual on val with
 * the training centers. Ties go to larger gamma, then larger sigma. sigma is
 * ignored for parametric structures.
 */
CvResult cross_validate(const ExperimentLog& train, const ExperimentLog* instrument, const ExperimentLog& val,
                        const std::vector<CvPoint>& grid, const ControllerStructure& structure,
                        const LpvStateSpace& reference_model);

/// Cartesian product of gamma and sigma lists.
std::vector<CvPoint> make_grid(const std::vector<double>& gammas, const std::vector<double>& sigmas);

/// Past values kept by the controller recursion (most recent first).
struct ControllerHistory {
    std::vector<double> u;   ///< u(t-1) .. u(t-n_a)
    std::vector<double> ef;  ///< e_f(t-1) .. e_f(t-n_b)
    double e_int = 0.0;      ///< integrator state e_int(t-1)

    static ControllerHistory zeros(const ControllerStructure& structure);
};

/**
 * One sample of the controller: e = g - y, fixed part, coefficient evaluation
 * at pi, IO recursion. Updates `history` in place and returns u(t).
 */
double controller_step(const InnerControllerModel& ctrl, ControllerHistory& history, double g, double y,
                       const Eigen::VectorXd& pi);

void to_json(nlohmann::json& j, const ControllerStructure& s);
void from_json(const nlohmann::json& j, ControllerStructure& s);
nlohmann::json to_json(const LpvStateSpace& m);
LpvStateSpace lpv_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InnerControllerModel& c);
InnerControllerModel controller_from_json(const nlohmann::json& j);

} // namespace lpvdd
