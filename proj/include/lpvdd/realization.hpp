#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

#include "lpvdd/inner_synth.hpp"
#include "lpvdd/refmodel.hpp"
#include "lpvdd/signals.hpp"

namespace lpvdd {

class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Offsets of the sub-blocks of the augmented state.
struct StateLayout {
    Eigen::Index x_m = 0;      ///< reference-model state, size n_m
    Eigen::Index n_m = 0;
    Eigen::Index u_hist = 0;   ///< u(t-1) .. u(t-n_a)
    Eigen::Index n_u = 0;
    Eigen::Index e_hist = 0;   ///< e(t-1) .. e(t-n_b), raw error g - y
    Eigen::Index n_e = 0;
    Eigen::Index e_int = -1;   ///< integrator state e_int(t-1), -1 if absent
    Eigen::Index size = 0;
};

/**
 * Single-input two-output model from g to [y; u]: the reference model M
 * standing in for the inner closed loop, plus a shift-register realization of
 * the controller. Scheduling argument of evaluate_at is the window
 * [p(t), p(t-1), ..., p(t-L)] with L = window_length() - 1.
 */
class AugmentedModel {
public:
    AugmentedModel(LpvStateSpace reference_model, InnerControllerModel controller);

    [[nodiscard]] const StateLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] Eigen::Index state_dim() const noexcept { return layout_.size; }
    [[nodiscard]] std::size_t window_length() const noexcept { return window_length_; }
    [[nodiscard]] const LpvStateSpace& reference_model() const noexcept { return reference_model_; }
    [[nodiscard]] const InnerControllerModel& controller() const noexcept { return controller_; }

    /// Concrete (A, B, C, D) with C, D having rows [y; u].
    [[nodiscard]] StateSpaceMatrices evaluate_at(std::span<const double> window) const;

private:
    LpvStateSpace reference_model_;
    InnerControllerModel controller_;
    StateLayout layout_;
    std::size_t window_length_ = 1;
};

AugmentedModel build_augmented(const LpvStateSpace& reference_model, const InnerControllerModel& controller);

/// Window [p(t), p(t-1), ..., p(t-L)] from a recorded signal; indices before the record repeat p(0).
std::vector<double> scheduling_window(const SampledSignal& p, std::size_t t, std::size_t length);

/// Pi(t) read from a scheduling window.
Eigen::VectorXd pi_from_window(std::span<const double> window, const std::vector<std::size_t>& lags);

struct AugmentedResponse {
    std::vector<double> y;
    std::vector<double> u;
    std::vector<Eigen::VectorXd> states; ///< xi(0) .. xi(N)
};

/// Simulates the augmented model driven by g along the recorded schedule p.
AugmentedResponse simulate_augmented(const AugmentedModel& model, const SampledSignal& g, const SampledSignal& p,
                                     const Eigen::VectorXd& xi0);
AugmentedResponse simulate_augmented(const AugmentedModel& model, const SampledSignal& g, const SampledSignal& p);

nlohmann::json to_json(const AugmentedModel& model);
AugmentedModel augmented_from_json(const nlohmann::json& j);

} // namespace lpvdd
