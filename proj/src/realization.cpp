#include "lpvdd/realization.hpp"

#include <algorithm>
#include <cmath>

namespace lpvdd {

namespace {

using Row = Eigen::RowVectorXd;

Row unit(Eigen::Index n, Eigen::Index k) {
    Row r = Row::Zero(n);
    r(k) = 1.0;
    return r;
}

} // namespace

AugmentedModel::AugmentedModel(LpvStateSpace reference_model, InnerControllerModel controller)
    : reference_model_(std::move(reference_model)), controller_(std::move(controller)) {
    if (reference_model_.input_dim() != 1 || reference_model_.output_dim() != 1) {
        throw ConfigurationError("augmented model requires a SISO reference model");
    }
    // y must not depend on g at the same instant; check D on a grid over the scheduling range.
    for (int k = 0; k <= 20; ++k) {
        const double p = reference_model_.scheduling_min +
                         (reference_model_.scheduling_max - reference_model_.scheduling_min) * k / 20.0;
        std::vector<double> w(std::max<std::size_t>(reference_model_.scheduling_size(), 1), p);
        if (std::abs(reference_model_.evaluate(w).D(0, 0)) > 0.0) {
            throw ConfigurationError("reference model must be strictly proper (D = 0) for the augmented model");
        }
    }
    const auto& s = controller_.structure();
    layout_.x_m = 0;
    layout_.n_m = reference_model_.state_dim();
    layout_.u_hist = layout_.n_m;
    layout_.n_u = static_cast<Eigen::Index>(s.n_a);
    layout_.e_hist = layout_.u_hist + layout_.n_u;
    layout_.n_e = static_cast<Eigen::Index>(s.n_b);
    layout_.size = layout_.e_hist + layout_.n_e;
    if (s.fixed_part == FixedPart::Integrator) layout_.e_int = layout_.size++;
    const std::size_t model_lag = reference_model_.scheduling_size() > 0 ? reference_model_.scheduling_size() - 1 : 0;
    window_length_ = std::max(s.max_scheduling_lag(), model_lag) + 1;
}

AugmentedModel build_augmented(const LpvStateSpace& reference_model, const InnerControllerModel& controller) {
    return AugmentedModel(reference_model, controller);
}

StateSpaceMatrices AugmentedModel::evaluate_at(std::span<const double> window) const {
    if (window.size() < window_length_) {
        throw ShapeError("scheduling window has " + std::to_string(window.size()) + " entries, expected " +
                         std::to_string(window_length_));
    }
    const auto& s = controller_.structure();
    const auto& L = layout_;
    const Eigen::Index n = L.size;
    const auto m = reference_model_.evaluate(window);
    const auto c = controller_.coefficients(pi_from_window(window, s.scheduling_lags));

    // e(t) = g - C_M x_M
    Row e_x = Row::Zero(n);
    e_x.segment(L.x_m, L.n_m) = -m.C.row(0);

    // e_f(t - j) = ef_x[j] xi + ef_g[j] g
    std::vector<Row> ef_x(s.n_b + 1, Row::Zero(n));
    std::vector<double> ef_g(s.n_b + 1, 0.0);
    if (s.fixed_part == FixedPart::Integrator) {
        ef_x[0] = unit(n, L.e_int) + e_x;
        ef_g[0] = 1.0;
        Row acc = unit(n, L.e_int);
        for (std::size_t j = 1; j <= s.n_b; ++j) {
            ef_x[j] = acc;
            acc -= unit(n, L.e_hist + static_cast<Eigen::Index>(j) - 1);
        }
    } else {
        ef_x[0] = e_x;
        ef_g[0] = 1.0;
        for (std::size_t j = 1; j <= s.n_b; ++j) ef_x[j] = unit(n, L.e_hist + static_cast<Eigen::Index>(j) - 1);
    }

    Row k_x = Row::Zero(n);
    double k_g = 0.0;
    for (std::size_t i = 1; i <= s.n_a; ++i) {
        k_x -= c.a(static_cast<Eigen::Index>(i) - 1) * unit(n, L.u_hist + static_cast<Eigen::Index>(i) - 1);
    }
    for (std::size_t j = 0; j <= s.n_b; ++j) {
        k_x += c.b(static_cast<Eigen::Index>(j)) * ef_x[j];
        k_g += c.b(static_cast<Eigen::Index>(j)) * ef_g[j];
    }

    StateSpaceMatrices out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, 1), Eigen::MatrixXd::Zero(2, n),
                           Eigen::MatrixXd::Zero(2, 1)};
    out.A.block(L.x_m, L.x_m, L.n_m, L.n_m) = m.A;
    out.B.block(L.x_m, 0, L.n_m, 1) = m.B;
    if (L.n_u > 0) {
        out.A.row(L.u_hist) = k_x;
        out.B(L.u_hist, 0) = k_g;
        for (Eigen::Index i = 1; i < L.n_u; ++i) out.A(L.u_hist + i, L.u_hist + i - 1) = 1.0;
    }
    if (L.n_e > 0) {
        out.A.row(L.e_hist) = e_x;
        out.B(L.e_hist, 0) = 1.0;
        for (Eigen::Index i = 1; i < L.n_e; ++i) out.A(L.e_hist + i, L.e_hist + i - 1) = 1.0;
    }
    if (L.e_int >= 0) {
        out.A.row(L.e_int) = unit(n, L.e_int) + e_x;
        out.B(L.e_int, 0) = 1.0;
    }
    out.C.block(0, L.x_m, 1, L.n_m) = m.C;
    out.C.row(1) = k_x;
    out.D(1, 0) = k_g;
    return out;
}

std::vector<double> scheduling_window(const SampledSignal& p, std::size_t t, std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t k = 0; k < length; ++k) w[k] = p.value(k <= t ? t - k : 0);
    return w;
}

Eigen::VectorXd pi_from_window(std::span<const double> window, const std::vector<std::size_t>& lags) {
    Eigen::VectorXd pi(static_cast<Eigen::Index>(lags.size()));
    for (std::size_t k = 0; k < lags.size(); ++k) {
        if (lags[k] >= window.size()) throw ShapeError("scheduling lag exceeds the supplied window");
        pi(static_cast<Eigen::Index>(k)) = window[lags[k]];
    }
    return pi;
}

AugmentedResponse simulate_augmented(const AugmentedModel& model, const SampledSignal& g, const SampledSignal& p,
                                     const Eigen::VectorXd& xi0) {
    if (g.size() != p.size()) throw ShapeError("g and scheduling signals differ in length");
    if (xi0.size() != model.state_dim()) throw ShapeError("initial augmented state has wrong dimension");
    AugmentedResponse r;
    Eigen::VectorXd xi = xi0;
    r.states.push_back(xi);
    for (std::size_t t = 0; t < g.size(); ++t) {
        const auto w = scheduling_window(p, t, model.window_length());
        const auto m = model.evaluate_at(w);
        const double gt = g.value(t);
        const Eigen::Vector2d out = m.C * xi + m.D.col(0) * gt;
        r.y.push_back(out(0));
        r.u.push_back(out(1));
        xi = m.A * xi + m.B.col(0) * gt;
        r.states.push_back(xi);
    }
    return r;
}

AugmentedResponse simulate_augmented(const AugmentedModel& model, const SampledSignal& g, const SampledSignal& p) {
    return simulate_augmented(model, g, p, Eigen::VectorXd::Zero(model.state_dim()));
}

nlohmann::json to_json(const AugmentedModel& model) {
    const auto& L = model.layout();
    return {{"reference_model", to_json(model.reference_model())},
            {"controller", to_json(model.controller())},
            {"window_length", model.window_length()},
            {"layout",
             {{"size", L.size},
              {"x_m", {L.x_m, L.n_m}},
              {"u_history", {L.u_hist, L.n_u}},
              {"e_history", {L.e_hist, L.n_e}},
              {"e_int", L.e_int}}}};
}

AugmentedModel augmented_from_json(const nlohmann::json& j) {
    return AugmentedModel(lpv_from_json(j.at("reference_model")), controller_from_json(j.at("controller")));
}

} // namespace lpvdd
