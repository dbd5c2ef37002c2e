#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lpvdd {

/// minimize 0.5 z'Hz + f'z  subject to  A_in z <= b_in,  lb <= z <= ub.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    std::optional<Eigen::VectorXd> lb;
    std::optional<Eigen::VectorXd> ub;

    [[nodiscard]] Eigen::Index size() const noexcept { return f.size(); }
    /// Throws ShapeError / std::invalid_argument on inconsistent data or a non-convex H.
    void validate() const;
    /// All inequalities as rows G z <= h (A_in first, then finite upper bounds, then finite lower bounds).
    void stacked_constraints(Eigen::MatrixXd& G, Eigen::VectorXd& h) const;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

const char* to_string(QpStatus s);

struct QpSolution {
    Eigen::VectorXd z;
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIterations;
    int iterations = 0;
    double kkt_residual = 0.0;
    Eigen::VectorXd multipliers;  ///< one per stacked constraint row
    std::vector<int> active_set;  ///< stacked row indices, ascending
};

struct QpOptions {
    double tol = 1e-8;
    int max_iter = 200;
};

/**
 * Dual active-set method (Goldfarb-Idnani) for strictly convex QPs. The
 * optional warm start lists stacked row indices from a previous solve; violated
 * rows in that set are added first.
 */
QpSolution solve(const QpProblem& problem, const QpOptions& options = {},
                 const std::vector<int>* warm_start = nullptr);

/// Scaled KKT residual of (z, multipliers) for the stacked system.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& z, const Eigen::VectorXd& multipliers);

/// Appends the problem data as CSV records "block,index,values..." tagged with `label`.
void write_qp_csv(std::ostream& out, const QpProblem& problem, const std::string& label);

} // namespace lpvdd
