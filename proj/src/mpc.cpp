#include "lpvdd/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace lpvdd {

void MpcConfig::validate() const {
    if (Np < 1 || Nu < 1 || Nu > Np) throw std::invalid_argument("MPC horizons must satisfy 1 <= Nu <= Np");
    for (double w : {Q_y, Q_u, Q_du, Q_g}) {
        if (!(w >= 0.0)) throw std::invalid_argument("MPC weights must be nonnegative");
    }
    if (!(Q_eps > 0.0)) throw std::invalid_argument("slack weight Q_eps must be positive");
    if (!(V_y > 0.0) || !(V_u > 0.0) || !(V_du > 0.0)) throw std::invalid_argument("softening gains V must be positive");
    bounds.validate();
}

PredictionStack build_prediction(const AugmentedModel& model, const MpcConfig& config,
                                 const std::vector<std::vector<double>>& windows) {
    const int Np = config.Np;
    const int Nu = config.Nu;
    if (static_cast<int>(windows.size()) != Np + 1) throw ShapeError("prediction needs Np + 1 scheduling windows");
    const Eigen::Index n = model.state_dim();

    // Blocking map from the Nu decisions to the Np applied moves.
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(Np, Nu);
    for (int k = 0; k < Np; ++k) T(k, std::min(k, Nu - 1)) = 1.0;

    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Gam = Eigen::MatrixXd::Zero(n, Np);
    Eigen::MatrixXd Fy(Np, n), GyF(Np, Np), Fu(Np, n), GuF(Np, Np);
    for (int k = 0; k <= Np; ++k) {
        const auto m = model.evaluate_at(windows[static_cast<std::size_t>(k)]);
        if (k >= 1) {
            Fy.row(k - 1) = m.C.row(0) * Phi;
            GyF.row(k - 1) = m.C.row(0) * Gam;
        }
        if (k < Np) {
            Fu.row(k) = m.C.row(1) * Phi;
            GuF.row(k) = m.C.row(1) * Gam;
            GuF(k, k) += m.D(1, 0);
            Phi = m.A * Phi;
            Gam = m.A * Gam;
            Gam.col(k) += m.B.col(0);
        }
    }
    return {Fy, GyF * T, Fu, GuF * T};
}

QpProblem build_step_qp(const AugmentedModel& model, const MpcConfig& config, const Eigen::VectorXd& xi,
                        const StepReferences& refs, const std::vector<std::vector<double>>& windows, double u_prev) {
    config.validate();
    const int Np = config.Np;
    const int Nu = config.Nu;
    if (refs.r.size() != Np + 1) throw ShapeError("reference preview must hold Np + 1 samples");
    if (xi.size() != model.state_dim()) throw ShapeError("augmented state has wrong dimension");
    const PredictionStack ps = build_prediction(model, config, windows);

    const Eigen::VectorXd y_free = ps.Fy * xi;
    const Eigen::VectorXd u_free = ps.Fu * xi;
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(Np, Np);
    for (int k = 1; k < Np; ++k) S(k, k - 1) = -1.0;
    const Eigen::MatrixXd Gdu = S * ps.Gu;
    Eigen::VectorXd du_free = S * u_free;
    du_free(0) -= u_prev;
    const Eigen::VectorXd u_ref = refs.u_ref.size() == 0 ? Eigen::VectorXd::Zero(Np) : refs.u_ref;
    if (u_ref.size() != Np) throw ShapeError("input reference preview must hold Np samples");

    const Eigen::Index nz = Nu + 1;
    QpProblem qp;
    qp.H = Eigen::MatrixXd::Zero(nz, nz);
    qp.f = Eigen::VectorXd::Zero(nz);
    auto add_term = [&](double w, const Eigen::MatrixXd& G, const Eigen::VectorXd& offset) {
        if (w == 0.0) return;
        qp.H.topLeftCorner(Nu, Nu) += 2.0 * w * G.transpose() * G;
        qp.f.head(Nu) += 2.0 * w * G.transpose() * offset;
    };
    add_term(config.Q_y, ps.Gy, y_free - refs.r.segment(1, Np));
    add_term(config.Q_u, ps.Gu, u_free - u_ref);
    add_term(config.Q_du, Gdu, du_free);
    add_term(config.Q_g, Eigen::MatrixXd::Identity(Nu, Nu), -refs.r.head(Nu));
    qp.H(Nu, Nu) = 2.0 * config.Q_eps;
    qp.H = 0.5 * (qp.H + qp.H.transpose());

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto add_bounds = [&](const Eigen::MatrixXd& G, const Eigen::VectorXd& free, double lo, double hi, double v) {
        for (Eigen::Index k = 0; k < G.rows(); ++k) {
            if (std::isfinite(hi)) {
                Eigen::RowVectorXd r(nz);
                r << G.row(k), -v;
                rows.push_back(r);
                rhs.push_back(hi - free(k));
            }
            if (std::isfinite(lo)) {
                Eigen::RowVectorXd r(nz);
                r << -G.row(k), -v;
                rows.push_back(r);
                rhs.push_back(free(k) - lo);
            }
        }
    };
    const auto& b = config.bounds;
    add_bounds(ps.Gy, y_free, b.y_min, b.y_max, config.V_y);
    add_bounds(ps.Gu, u_free, b.u_min, b.u_max, config.V_u);
    add_bounds(Gdu, du_free, b.du_min, b.du_max, config.V_du);
    qp.A_in.resize(static_cast<Eigen::Index>(rows.size()), nz);
    qp.b_in.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        qp.A_in.row(static_cast<Eigen::Index>(i)) = rows[i];
        qp.b_in(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    qp.lb = Eigen::VectorXd::Constant(nz, -std::numeric_limits<double>::infinity());
    (*qp.lb)(Nu) = 0.0;
    return qp;
}

std::vector<std::vector<double>> prediction_windows(const SampledSignal& p, std::size_t t, std::size_t window_length,
                                                    int Np, PredictionMode mode) {
    const auto n = static_cast<std::int64_t>(p.size());
    const auto now = static_cast<std::int64_t>(t);
    auto value = [&](std::int64_t i) {
        if (i < 0) return p.value(0);
        if (i > now && mode == PredictionMode::LPV) return p.value(static_cast<std::size_t>(now));
        return p.value(static_cast<std::size_t>(std::min(i, n - 1)));
    };
    std::vector<std::vector<double>> out(static_cast<std::size_t>(Np) + 1, std::vector<double>(window_length));
    for (int k = 0; k <= Np; ++k) {
        for (std::size_t l = 0; l < window_length; ++l) {
            out[static_cast<std::size_t>(k)][l] = value(now + k - static_cast<std::int64_t>(l));
        }
    }
    return out;
}

std::vector<std::vector<double>> frozen_windows(const std::vector<double>& history, std::size_t window_length, int Np) {
    if (history.empty()) throw ShapeError("scheduling history is empty");
    std::vector<std::vector<double>> out(static_cast<std::size_t>(Np) + 1, std::vector<double>(window_length));
    for (int k = 0; k <= Np; ++k) {
        for (std::size_t l = 0; l < window_length; ++l) {
            const auto back = static_cast<std::int64_t>(l) - k;
            const auto idx = static_cast<std::size_t>(std::max<std::int64_t>(back, 0));
            out[static_cast<std::size_t>(k)][l] = history[std::min(idx, history.size() - 1)];
        }
    }
    return out;
}

Eigen::VectorXd reference_preview(const SampledSignal& r, std::size_t t, int Np) {
    Eigen::VectorXd out(Np + 1);
    for (int k = 0; k <= Np; ++k) out(k) = r.value(std::min(t + static_cast<std::size_t>(k), r.size() - 1));
    return out;
}

MpcController::MpcController(const AugmentedModel& model, MpcConfig config) : model_(&model), config_(std::move(config)) {
    config_.validate();
}

MpcDiagnostics MpcController::step(std::size_t t, const Eigen::VectorXd& xi, const StepReferences& refs,
                                   const std::vector<std::vector<double>>& windows, double u_prev) {
    QpProblem qp = build_step_qp(*model_, config_, xi, refs, windows, u_prev);
    if (debug_) write_qp_csv(*debug_, qp, std::to_string(t));
    QpSolution sol = solve(qp, config_.qp, warm_.empty() ? nullptr : &warm_);
    if (sol.status != QpStatus::Optimal) {
        std::ostringstream os;
        os << "MPC QP at t=" << t << " returned status " << to_string(sol.status) << " after " << sol.iterations
           << " iterations (KKT residual " << sol.kkt_residual << ")";
        throw MpcError(os.str(), std::move(qp), std::move(sol));
    }
    warm_ = sol.active_set;

    const auto m0 = model_->evaluate_at(windows.front());
    MpcDiagnostics d;
    d.t = t;
    d.g = sol.z(0);
    d.eps = sol.z(config_.Nu) + 0.0; // normalizes -0
    d.qp_iters = sol.iterations;
    d.qp_kkt = sol.kkt_residual;
    d.active_set_size = sol.active_set.size();
    d.predicted_u = (m0.C.row(1) * xi)(0) + m0.D(1, 0) * d.g;
    return d;
}

void write_diagnostics_csv(std::ostream& out, const std::vector<MpcDiagnostics>& rows) {
    out << "t,g,eps,qp_iters,qp_kkt,active_set_size\n";
    for (const auto& r : rows) {
        out << r.t << ',' << format_double(r.g) << ',' << format_double(r.eps) << ',' << r.qp_iters << ','
            << format_double(r.qp_kkt) << ',' << r.active_set_size << '\n';
    }
}

} // namespace lpvdd
