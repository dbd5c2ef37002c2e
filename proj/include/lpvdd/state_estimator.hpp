#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>

#include "lpvdd/realization.hpp"

namespace lpvdd {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Time-varying Kalman filter on the augmented model. The measurement at time t
 * is [y(t); u(t-1)]: the output read through C_M, and the newest entry of the
 * input shift register. Both are available before g(t) is chosen.
 */
class KalmanFilter {
public:
    KalmanFilter(const AugmentedModel& model, Eigen::MatrixXd Q, Eigen::Matrix2d R, Eigen::VectorXd x0,
                 Eigen::MatrixXd P0);
    /// Default tuning Q = 1e-6 I, R = diag(1e-4, 1e-6), x0 = 0, P0 = I.
    explicit KalmanFilter(const AugmentedModel& model);

    /// xi(t|t-1) = A xi(t-1|t-1) + B g(t-1), evaluated at the window of t-1.
    void predict(double g_applied, std::span<const double> window_prev);
    /// Joseph-form update against [y; u_prev], evaluated at the window of t.
    void update(double y, double u_prev, std::span<const double> window_now);
    /// predict (skipped on the first call) followed by update; returns the posterior.
    const Eigen::VectorXd& step(double g_prev, double y, double u_prev, std::span<const double> window_prev,
                                std::span<const double> window_now);

    [[nodiscard]] const Eigen::VectorXd& estimate() const noexcept { return x_; }
    [[nodiscard]] const Eigen::MatrixXd& covariance() const noexcept { return P_; }
    [[nodiscard]] Eigen::MatrixXd measurement_matrix(std::span<const double> window) const;

private:
    const AugmentedModel* model_;
    Eigen::MatrixXd Q_;
    Eigen::Matrix2d R_;
    Eigen::VectorXd x_;
    Eigen::MatrixXd P_;
    bool started_ = false;
};

/**
 * Direct reconstruction: shift registers filled from measured u and e = g - y,
 * integrator state from the measured error sum, x_M propagated open-loop.
 */
class DirectReconstruction {
public:
    explicit DirectReconstruction(const AugmentedModel& model);

    /// Called once per sample before g(t) is chosen; g_prev/y_prev/u_prev refer to t-1 (ignored at t = 0).
    const Eigen::VectorXd& step(double g_prev, double y_prev, double u_prev, std::span<const double> window_prev);

    [[nodiscard]] const Eigen::VectorXd& estimate() const noexcept { return x_; }

private:
    const AugmentedModel* model_;
    Eigen::VectorXd x_;
    bool started_ = false;
};

} // namespace lpvdd
