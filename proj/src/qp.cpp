#include "lpvdd/qp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "lpvdd/signals.hpp"

namespace lpvdd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRegFloor = 1e-9;
constexpr double kNonConvex = -1e-8;

double violation_scale(double b) { return std::max(1.0, std::abs(b)); }

struct Factor {
    Eigen::MatrixXd L;       // H = L L'
    Eigen::MatrixXd J1, J2;  // L^{-T} Q split at the active-set size
    Eigen::MatrixXd R;       // upper-triangular factor of L^{-1} N
};

// Null-space factorization for the active normals N (columns), recomputed from scratch.
void factor_active(const Eigen::MatrixXd& L, const Eigen::MatrixXd& N, Factor& f) {
    const Eigen::Index n = L.rows();
    const Eigen::Index q = N.cols();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
    if (q > 0) {
        const Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(N);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
        Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        f.R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
    } else {
        f.R.resize(0, 0);
    }
    const Eigen::MatrixXd J = L.transpose().triangularView<Eigen::Upper>().solve(Q);
    f.J1 = J.leftCols(q);
    f.J2 = J.rightCols(n - q);
}

} // namespace

const char* to_string(QpStatus s) {
    switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max-iterations";
    case QpStatus::Infeasible: return "infeasible-detected";
    }
    return "unknown";
}

void QpProblem::validate() const {
    const Eigen::Index n = f.size();
    if (n == 0) throw ShapeError("QP has no decision variables");
    if (H.rows() != n || H.cols() != n) throw ShapeError("QP Hessian must be n x n");
    if (A_in.rows() != b_in.size() || (A_in.rows() > 0 && A_in.cols() != n)) {
        throw ShapeError("QP inequality system has inconsistent dimensions");
    }
    if ((lb && lb->size() != n) || (ub && ub->size() != n)) throw ShapeError("QP bound vectors must have length n");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw std::invalid_argument("QP Hessian is not symmetric");
    if (!H.allFinite() || !f.allFinite() || !A_in.allFinite()) throw std::invalid_argument("QP data contains non-finite values");
}

void QpProblem::stacked_constraints(Eigen::MatrixXd& G, Eigen::VectorXd& h) const {
    const Eigen::Index n = f.size();
    std::vector<std::pair<Eigen::RowVectorXd, double>> extra;
    if (ub) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isfinite((*ub)(i))) {
                Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
                r(i) = 1.0;
                extra.emplace_back(r, (*ub)(i));
            }
        }
    }
    if (lb) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isfinite((*lb)(i))) {
                Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
                r(i) = -1.0;
                extra.emplace_back(r, -(*lb)(i));
            }
        }
    }
    const Eigen::Index m = A_in.rows() + static_cast<Eigen::Index>(extra.size());
    G.resize(m, n);
    h.resize(m);
    if (A_in.rows() > 0) {
        G.topRows(A_in.rows()) = A_in;
        h.head(A_in.rows()) = b_in;
    }
    for (std::size_t k = 0; k < extra.size(); ++k) {
        G.row(A_in.rows() + static_cast<Eigen::Index>(k)) = extra[k].first;
        h(A_in.rows() + static_cast<Eigen::Index>(k)) = extra[k].second;
    }
}

double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& z, const Eigen::VectorXd& multipliers) {
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    problem.stacked_constraints(G, h);
    const Eigen::VectorXd Hz = problem.H * z;
    Eigen::VectorXd grad = Hz + problem.f;
    if (G.rows() > 0) grad += G.transpose() * multipliers;
    const double gscale = std::max({1.0, problem.f.cwiseAbs().maxCoeff(), Hz.cwiseAbs().maxCoeff()});
    double res = grad.cwiseAbs().maxCoeff() / gscale;
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        const double slack = G.row(i).dot(z) - h(i);
        const double s = violation_scale(h(i));
        res = std::max(res, std::max(0.0, slack) / s);
        res = std::max(res, std::max(0.0, -multipliers(i)));
        res = std::max(res, std::abs(multipliers(i) * slack) / s);
    }
    return res;
}

QpSolution solve(const QpProblem& problem, const QpOptions& options, const std::vector<int>* warm_start) {
    problem.validate();
    const Eigen::Index n = problem.size();
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    problem.stacked_constraints(G, h);
    const Eigen::Index m = G.rows();
    const double tol = options.tol;

    Eigen::MatrixXd H = 0.5 * (problem.H + problem.H.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (lmin < kNonConvex) throw std::invalid_argument("QP Hessian is not positive semidefinite");
    if (lmin < kRegFloor) H.diagonal().array() += kRegFloor - std::min(lmin, 0.0);

    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("QP Hessian factorization failed");
    const Eigen::MatrixXd L = llt.matrixL();

    QpSolution sol;
    Eigen::VectorXd x = llt.solve(-problem.f);
    std::vector<int> active;
    std::vector<double> u;
    std::vector<char> in_active(static_cast<std::size_t>(m), 0);
    std::vector<char> preferred(static_cast<std::size_t>(m), 0);
    if (warm_start) {
        for (int i : *warm_start) {
            if (i >= 0 && i < m) preferred[static_cast<std::size_t>(i)] = 1;
        }
    }
    auto objective = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(problem.H * v) + problem.f.dot(v); };

    Factor fac;
    int iterations = 0;
    int stalls = 0;
    double last_obj = objective(x);
    QpStatus status = QpStatus::Optimal;
    const int stall_limit = 3 * static_cast<int>(n);

    auto note_change = [&]() {
        const double obj = objective(x);
        if (obj <= last_obj + 1e-14 * std::max(1.0, std::abs(last_obj))) {
            ++stalls;
        } else {
            stalls = 0;
        }
        last_obj = obj;
    };

    auto active_normals = [&]() {
        Eigen::MatrixXd N(n, static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = -G.row(active[k]).transpose();
        return N;
    };

    bool done = false;
    while (!done) {
        // Step 1: pick the entering constraint.
        int p = -1;
        double worst = 0.0;
        bool worst_preferred = false;
        const bool bland = stalls >= stall_limit;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (in_active[static_cast<std::size_t>(i)]) continue;
            const double v = (G.row(i).dot(x) - h(i)) / violation_scale(h(i));
            if (v <= tol) continue;
            if (bland) {
                p = static_cast<int>(i);
                break;
            }
            const bool pref = preferred[static_cast<std::size_t>(i)] != 0;
            if (p < 0 || (pref && !worst_preferred) || (pref == worst_preferred && v > worst)) {
                p = static_cast<int>(i);
                worst = v;
                worst_preferred = pref;
            }
        }
        if (p < 0) break;

        const Eigen::VectorXd np = -G.row(p).transpose();
        const double bp = -h(p);
        double up = 0.0;
        // Step 2: move until p is satisfied with equality or an active constraint is dropped.
        while (true) {
            if (++iterations > options.max_iter) {
                status = QpStatus::MaxIterations;
                done = true;
                break;
            }
            factor_active(L, active_normals(), fac);
            const auto q = static_cast<Eigen::Index>(active.size());
            const Eigen::VectorXd d1 = fac.J1.transpose() * np;
            const Eigen::VectorXd d2 = fac.J2.transpose() * np;
            const Eigen::VectorXd z = fac.J2 * d2;
            Eigen::VectorXd r(q);
            if (q > 0) r = fac.R.triangularView<Eigen::Upper>().solve(d1);

            double t1 = kInf;
            Eigen::Index k = -1;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (r(j) <= 1e-12) continue;
                const double ratio = u[static_cast<std::size_t>(j)] / r(j);
                if (ratio < t1 || (ratio == t1 && active[static_cast<std::size_t>(j)] < active[static_cast<std::size_t>(k)])) {
                    t1 = ratio;
                    k = j;
                }
            }
            const double dn = d1.norm() + d2.norm();
            const bool z_zero = d2.norm() <= 1e-10 * std::max(1.0, dn);
            const double t2 = z_zero ? kInf : (bp - np.dot(x)) / z.dot(np);
            const double t = std::min(t1, t2);

            if (!std::isfinite(t)) {
                status = QpStatus::Infeasible;
                done = true;
                break;
            }
            for (Eigen::Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
            up += t;
            if (!z_zero) x += t * z;

            if (t2 <= t1) {
                active.push_back(p);
                u.push_back(up);
                in_active[static_cast<std::size_t>(p)] = 1;
                note_change();
                break;
            }
            in_active[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])] = 0;
            active.erase(active.begin() + k);
            u.erase(u.begin() + k);
            note_change();
        }
    }

    // Polish: solve the equality-constrained KKT system on the final active set.
    if (status == QpStatus::Optimal) {
        const auto q = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + q, n + q);
        Eigen::VectorXd rhs(n + q);
        K.topLeftCorner(n, n) = H;
        rhs.head(n) = -problem.f;
        for (Eigen::Index j = 0; j < q; ++j) {
            K.block(0, n + j, n, 1) = G.row(active[static_cast<std::size_t>(j)]).transpose();
            K.block(n + j, 0, 1, n) = G.row(active[static_cast<std::size_t>(j)]);
            rhs(n + j) = h(active[static_cast<std::size_t>(j)]);
        }
        const Eigen::VectorXd s = K.fullPivLu().solve(rhs);
        if (s.allFinite()) {
            Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
            Eigen::VectorXd lam_old = Eigen::VectorXd::Zero(m);
            for (Eigen::Index j = 0; j < q; ++j) {
                lam(active[static_cast<std::size_t>(j)]) = s(n + j);
                lam_old(active[static_cast<std::size_t>(j)]) = u[static_cast<std::size_t>(j)];
            }
            const Eigen::VectorXd xp = s.head(n);
            if (kkt_residual(problem, xp, lam) <= kkt_residual(problem, x, lam_old)) {
                x = xp;
                for (Eigen::Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] = s(n + j);
            }
        }
    }

    sol.z = x;
    sol.objective = objective(x);
    sol.status = status;
    sol.iterations = iterations;
    sol.multipliers = Eigen::VectorXd::Zero(m);
    for (std::size_t j = 0; j < active.size(); ++j) sol.multipliers(active[j]) = u[j];
    sol.active_set = active;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.kkt_residual = kkt_residual(problem, x, sol.multipliers);
    if (status == QpStatus::Optimal && sol.kkt_residual > tol) {
        spdlog::debug("qp: optimal return with KKT residual {:.3e} above tolerance", sol.kkt_residual);
    }
    return sol;
}

void write_qp_csv(std::ostream& out, const QpProblem& problem, const std::string& label) {
    auto row = [&](const char* block, Eigen::Index i, const auto& values) {
        out << label << ',' << block << ',' << i;
        for (Eigen::Index k = 0; k < values.size(); ++k) out << ',' << format_double(values(k));
        out << '\n';
    };
    for (Eigen::Index i = 0; i < problem.H.rows(); ++i) row("H", i, problem.H.row(i));
    row("f", 0, problem.f);
    for (Eigen::Index i = 0; i < problem.A_in.rows(); ++i) row("A_in", i, problem.A_in.row(i));
    row("b_in", 0, problem.b_in);
    if (problem.lb) row("lb", 0, *problem.lb);
    if (problem.ub) row("ub", 0, *problem.ub);
}

} // namespace lpvdd
