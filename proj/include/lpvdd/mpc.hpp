#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvdd/qp.hpp"
#include "lpvdd/realization.hpp"
#include "lpvdd/signals.hpp"

namespace lpvdd {

enum class PredictionMode { LTV, LPV };

/**
 * Reference-governor weights and limits. Decisions are g(t), ..., g(t+Nu-1)
 * (held beyond Nu) and one slack eps >= 0. Output terms cover y(t+1..t+Np);
 * input and input-rate terms cover u(t..t+Np-1), the first rate using u(t-1).
 */
struct MpcConfig {
    int Np = 10;
    int Nu = 10;
    double Q_y = 1.0;
    double Q_u = 0.0;
    double Q_du = 0.0;
    double Q_g = 1.0;
    double Q_eps = 1e5;
    double V_y = 1.0;
    double V_u = 1.0;
    double V_du = 1.0;
    BoundSet bounds{};
    PredictionMode mode = PredictionMode::LPV;
    QpOptions qp{};

    void validate() const;
};

/// Stacked predictions Y = Fy xi + Gy gmoves, U = Fu xi + Gu gmoves (gmoves of length Nu).
struct PredictionStack {
    Eigen::MatrixXd Fy, Gy; ///< rows k = 1..Np
    Eigen::MatrixXd Fu, Gu; ///< rows k = 0..Np-1
};

/// windows[k] is the scheduling window at t+k, k = 0..Np.
PredictionStack build_prediction(const AugmentedModel& model, const MpcConfig& config,
                                 const std::vector<std::vector<double>>& windows);

struct StepReferences {
    Eigen::VectorXd r;      ///< r(t) .. r(t+Np)
    Eigen::VectorXd u_ref;  ///< u_ref(t) .. u_ref(t+Np-1); empty means zero
};

QpProblem build_step_qp(const AugmentedModel& model, const MpcConfig& config, const Eigen::VectorXd& xi,
                        const StepReferences& refs, const std::vector<std::vector<double>>& windows, double u_prev);

/// Windows for t..t+Np from a recorded schedule (LTV: future read from p; LPV: future frozen at p(t)).
std::vector<std::vector<double>> prediction_windows(const SampledSignal& p, std::size_t t, std::size_t window_length,
                                                    int Np, PredictionMode mode);
/// Same, from the past schedule only (LPV): history[k] = p(t-k), k >= 0.
std::vector<std::vector<double>> frozen_windows(const std::vector<double>& history, std::size_t window_length, int Np);

/// r(t..t+Np) from a signal, held at its last value past the end.
Eigen::VectorXd reference_preview(const SampledSignal& r, std::size_t t, int Np);

struct MpcDiagnostics {
    std::size_t t = 0;
    double g = 0.0;
    double eps = 0.0;
    int qp_iters = 0;
    double qp_kkt = 0.0;
    std::size_t active_set_size = 0;
    double predicted_u = 0.0;  ///< u(t|t)
};

class MpcError : public std::runtime_error {
public:
    MpcError(const std::string& what, QpProblem problem, QpSolution solution)
        : std::runtime_error(what), problem(std::move(problem)), solution(std::move(solution)) {}
    QpProblem problem;
    QpSolution solution;
};

/// Receding-horizon governor: one QP per sample, warm-started from the previous active set.
class MpcController {
public:
    MpcController(const AugmentedModel& model, MpcConfig config);

    /// Solves the step QP and returns g(t); throws MpcError on a non-optimal QP status.
    MpcDiagnostics step(std::size_t t, const Eigen::VectorXd& xi, const StepReferences& refs,
                        const std::vector<std::vector<double>>& windows, double u_prev);

    [[nodiscard]] const MpcConfig& config() const noexcept { return config_; }
    [[nodiscard]] const AugmentedModel& model() const noexcept { return *model_; }
    /// When set, every step QP is appended to this stream.
    void set_debug_stream(std::ostream* out) noexcept { debug_ = out; }

private:
    const AugmentedModel* model_;
    MpcConfig config_;
    std::vector<int> warm_;
    std::ostream* debug_ = nullptr;
};

void write_diagnostics_csv(std::ostream& out, const std::vector<MpcDiagnostics>& rows);

} // namespace lpvdd
