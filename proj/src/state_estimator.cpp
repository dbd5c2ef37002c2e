#include "lpvdd/state_estimator.hpp"

#include <sstream>

namespace lpvdd {

KalmanFilter::KalmanFilter(const AugmentedModel& model, Eigen::MatrixXd Q, Eigen::Matrix2d R, Eigen::VectorXd x0,
                           Eigen::MatrixXd P0)
    : model_(&model), Q_(std::move(Q)), R_(std::move(R)), x_(std::move(x0)), P_(std::move(P0)) {
    const auto n = model.state_dim();
    if (Q_.rows() != n || Q_.cols() != n || x_.size() != n || P_.rows() != n || P_.cols() != n) {
        throw ShapeError("Kalman filter matrices do not match the augmented state dimension");
    }
    if (model.layout().n_u == 0) throw ConfigurationError("Kalman filter needs an input history slot (n_a > 0)");
}

KalmanFilter::KalmanFilter(const AugmentedModel& model)
    : KalmanFilter(model, 1e-6 * Eigen::MatrixXd::Identity(model.state_dim(), model.state_dim()),
                   Eigen::Vector2d(1e-4, 1e-6).asDiagonal(), Eigen::VectorXd::Zero(model.state_dim()),
                   Eigen::MatrixXd::Identity(model.state_dim(), model.state_dim())) {}

Eigen::MatrixXd KalmanFilter::measurement_matrix(std::span<const double> window) const {
    const auto m = model_->evaluate_at(window);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, model_->state_dim());
    H.row(0) = m.C.row(0);
    H(1, model_->layout().u_hist) = 1.0;
    return H;
}

void KalmanFilter::predict(double g_applied, std::span<const double> window_prev) {
    const auto m = model_->evaluate_at(window_prev);
    x_ = m.A * x_ + m.B.col(0) * g_applied;
    P_ = m.A * P_ * m.A.transpose() + Q_;
    P_ = 0.5 * (P_ + P_.transpose());
}

void KalmanFilter::update(double y, double u_prev, std::span<const double> window_now) {
    const Eigen::MatrixXd H = measurement_matrix(window_now);
    const Eigen::Matrix2d S = H * P_ * H.transpose() + R_;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(S.determinant()) < 1e-300) {
        std::ostringstream os;
        os << "innovation covariance is singular: S = [" << S(0, 0) << ", " << S(0, 1) << "; " << S(1, 0) << ", "
           << S(1, 1) << "], trace(P) = " << P_.trace();
        throw NumericalError(os.str());
    }
    const Eigen::MatrixXd K = ldlt.solve(H * P_).transpose();
    const Eigen::Vector2d z(y, u_prev);
    x_ += K * (z - H * x_);
    const Eigen::MatrixXd I_KH = Eigen::MatrixXd::Identity(P_.rows(), P_.cols()) - K * H;
    P_ = I_KH * P_ * I_KH.transpose() + K * R_ * K.transpose();
    P_ = 0.5 * (P_ + P_.transpose());
}

const Eigen::VectorXd& KalmanFilter::step(double g_prev, double y, double u_prev, std::span<const double> window_prev,
                                          std::span<const double> window_now) {
    if (started_) predict(g_prev, window_prev);
    started_ = true;
    update(y, u_prev, window_now);
    return x_;
}

DirectReconstruction::DirectReconstruction(const AugmentedModel& model)
    : model_(&model), x_(Eigen::VectorXd::Zero(model.state_dim())) {}

const Eigen::VectorXd& DirectReconstruction::step(double g_prev, double y_prev, double u_prev,
                                                  std::span<const double> window_prev) {
    if (!started_) {
        started_ = true;
        return x_;
    }
    const auto& L = model_->layout();
    const auto mm = model_->reference_model().evaluate(window_prev);
    const double e = g_prev - y_prev;
    x_.segment(L.x_m, L.n_m) = mm.A * x_.segment(L.x_m, L.n_m) + mm.B.col(0) * g_prev;
    for (Eigen::Index i = L.n_u - 1; i > 0; --i) x_(L.u_hist + i) = x_(L.u_hist + i - 1);
    if (L.n_u > 0) x_(L.u_hist) = u_prev;
    for (Eigen::Index i = L.n_e - 1; i > 0; --i) x_(L.e_hist + i) = x_(L.e_hist + i - 1);
    if (L.n_e > 0) x_(L.e_hist) = e;
    if (L.e_int >= 0) x_(L.e_int) += e;
    return x_;
}

} // namespace lpvdd
