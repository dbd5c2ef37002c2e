#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "lpvdd/mpc.hpp"

using namespace lpvdd;

namespace {

InnerControllerModel scheduled_controller(const LpvStateSpace& M) {
    ControllerStructure s;
    s.n_a = 2;
    s.n_b = 2;
    s.scheduling_lags = {1, 2};
    s.coefficients = ParametricCoefficients{{BasisFunction::constant(), BasisFunction::element(0), BasisFunction::element(1)}};
    std::mt19937_64 rng(8);
    std::normal_distribution<double> d(0.0, 0.3);
    std::vector<double> th(15);
    for (auto& v : th) v = d(rng);
    return fx::constant_controller(s, th, M);
}

std::vector<std::vector<double>> random_windows(std::size_t len, int Np, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<std::vector<double>> w(static_cast<std::size_t>(Np) + 1, std::vector<double>(len));
    for (auto& row : w)
        for (auto& v : row) v = d(rng);
    return w;
}

MpcConfig base_config(int Np, int Nu) {
    MpcConfig c;
    c.Np = Np;
    c.Nu = Nu;
    return c;
}

Eigen::VectorXd settled_state(const AugmentedModel& aug, double level) {
    const auto g = SampledSignal::constant(level, 3000, 1.0);
    return simulate_augmented(aug, g, g).states.back();
}

} // namespace

TEST(Prediction, MatchesDirectRecursionWithBlocking) {
    const auto M = LpvStateSpace::first_order(0.9, 0.1);
    const auto aug = build_augmented(M, scheduled_controller(M));
    const auto cfg = base_config(8, 3);
    const auto w = random_windows(aug.window_length(), cfg.Np, 4);
    const auto ps = build_prediction(aug, cfg, w);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    Eigen::VectorXd xi = Eigen::VectorXd::NullaryExpr(aug.state_dim(), [&] { return d(rng); });
    const Eigen::Vector3d moves(0.4, -1.2, 2.0);
    const Eigen::VectorXd Y = ps.Fy * xi + ps.Gy * moves;
    const Eigen::VectorXd U = ps.Fu * xi + ps.Gu * moves;
    Eigen::VectorXd x = xi;
    for (int k = 0; k <= cfg.Np; ++k) {
        const auto m = aug.evaluate_at(w[static_cast<std::size_t>(k)]);
        const double g = moves(std::min(k, 2));
        if (k >= 1) {
            EXPECT_NEAR(Y(k - 1), (m.C.row(0) * x)(0), 1e-12);
        }
        if (k < cfg.Np) {
            EXPECT_NEAR(U(k), (m.C.row(1) * x)(0) + m.D(1, 0) * g, 1e-12);
            x = m.A * x + m.B * g;
        }
    }
}

TEST(Prediction, BlockedColumnsSumTrailingMoves) {
    const auto M = fx::lti_model();
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    const auto w = random_windows(aug.window_length(), 6, 1);
    const auto full = build_prediction(aug, base_config(6, 6), w);
    const auto blocked = build_prediction(aug, base_config(6, 2), w);
    EXPECT_LT((blocked.Gy.col(0) - full.Gy.col(0)).cwiseAbs().maxCoeff(), 1e-14);
    const Eigen::VectorXd tail = full.Gy.rightCols(5).rowwise().sum();
    EXPECT_LT((blocked.Gy.col(1) - tail).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StepQp, DecisionDimensionIsNuPlusSlack) {
    const auto M = LpvStateSpace::first_order(0.99, 0.01);
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(10, 10);
    cfg.bounds.du_min = -0.2;
    cfg.bounds.du_max = 0.2;
    const auto w = random_windows(aug.window_length(), 10, 2);
    const auto qp = build_step_qp(aug, cfg, Eigen::VectorXd::Zero(aug.state_dim()),
                                  {Eigen::VectorXd::Ones(11), {}}, w, 0.0);
    EXPECT_EQ(qp.size(), 11);
    EXPECT_EQ(qp.A_in.rows(), 20);
    EXPECT_EQ((*qp.lb)(10), 0.0);
}

TEST(Governor, OnlyReferenceWeightGivesReference) {
    const auto M = fx::lti_model();
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(5, 5);
    cfg.Q_y = 0.0;
    MpcController mpc(aug, cfg);
    Eigen::VectorXd r(6);
    r << 0.3, 1.0, 1.0, 1.0, 1.0, 1.0;
    const auto d = mpc.step(0, Eigen::VectorXd::Zero(aug.state_dim()), {r, {}}, random_windows(1, 5, 0), 0.0);
    EXPECT_NEAR(d.g, 0.3, 1e-12);
}

TEST(Governor, DominantReferenceWeightApproachesReference) {
    const auto M = fx::lti_model();
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(5, 5);
    cfg.Q_g = 1e8;
    MpcController mpc(aug, cfg);
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(6, 2.0);
    const auto d = mpc.step(0, Eigen::VectorXd::Zero(aug.state_dim()), {r, {}}, random_windows(1, 5, 0), 0.0);
    EXPECT_NEAR(d.g, 2.0, 1e-6);
}

TEST(Governor, ScalarToyInvertsModelGain) {
    // y(t+1) = 0.5 y(t) + 0.5 g(t) from rest; tracking r = 1 one step ahead needs g = 2.
    const auto M = LpvStateSpace::first_order(0.5, 0.5);
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(1, 1);
    cfg.Q_g = 0.0;
    MpcController mpc(aug, cfg);
    const auto d = mpc.step(0, Eigen::VectorXd::Zero(aug.state_dim()), {Eigen::Vector2d(1.0, 1.0), {}},
                            random_windows(1, 1, 0), 0.0);
    EXPECT_NEAR(d.g, 2.0, 1e-10);
    EXPECT_EQ(d.eps, 0.0);
}

TEST(Governor, SteadyStateIsStationary) {
    const auto M = fx::lti_model();
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(10, 4);
    cfg.Q_du = 0.3;
    const auto xi = settled_state(aug, 1.5);
    const double u_ss = aug.evaluate_at(std::vector<double>{1.5}).C.row(1).dot(xi) +
                        aug.evaluate_at(std::vector<double>{1.5}).D(1, 0) * 1.5;
    MpcController mpc(aug, cfg);
    const auto d = mpc.step(0, xi, {Eigen::VectorXd::Constant(11, 1.5), {}},
                            prediction_windows(SampledSignal::constant(1.5, 20, 1.0), 5, 1, 10, PredictionMode::LPV), u_ss);
    EXPECT_NEAR(d.g, 1.5, 1e-8);
}

TEST(Governor, SlackIsZeroWithoutBounds) {
    const auto M = LpvStateSpace::first_order(0.95, 0.05);
    const auto aug = build_augmented(M, scheduled_controller(M));
    auto cfg = base_config(6, 3);
    cfg.Q_du = 0.1;
    MpcController mpc(aug, cfg);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd xi = Eigen::VectorXd::NullaryExpr(aug.state_dim(), [&] { return d(rng); });
        Eigen::VectorXd r = Eigen::VectorXd::NullaryExpr(7, [&] { return d(rng); });
        const auto out = mpc.step(0, xi, {r, {}}, random_windows(aug.window_length(), 6, trial), d(rng));
        EXPECT_EQ(out.eps, 0.0);
    }
}

TEST(Governor, SoftConstraintsHoldWithSlack) {
    const auto M = fx::lti_model();
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(6, 6);
    cfg.bounds.y_max = 0.5;
    cfg.V_y = 1.0;
    // Start well above the bound: the output cannot come down in one step, so eps > 0.
    const auto xi = settled_state(aug, 3.0);
    const auto w = prediction_windows(SampledSignal::constant(3.0, 20, 1.0), 5, 1, 6, PredictionMode::LPV);
    const StepReferences refs{Eigen::VectorXd::Constant(7, 3.0), {}};
    const auto qp = build_step_qp(aug, cfg, xi, refs, w, 0.0);
    const auto sol = solve(qp);
    ASSERT_EQ(sol.status, QpStatus::Optimal);
    const double eps = sol.z(6);
    EXPECT_GT(eps, 0.0);
    const auto ps = build_prediction(aug, cfg, w);
    const Eigen::VectorXd Y = ps.Fy * xi + ps.Gy * sol.z.head(6);
    for (Eigen::Index k = 0; k < Y.size(); ++k) EXPECT_LE(Y(k), 0.5 + cfg.V_y * eps + 1e-9);
}

TEST(Governor, PredictedRateRespectsBoundWhenFeasible) {
    const auto M = LpvStateSpace::first_order(0.99, 0.01);
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(10, 10);
    cfg.Q_y = 6.5;
    cfg.Q_du = 0.1;
    cfg.bounds.du_min = -0.2;
    cfg.bounds.du_max = 0.2;
    const auto w = prediction_windows(SampledSignal::constant(0.0, 20, 0.01), 0, 1, 10, PredictionMode::LPV);
    const Eigen::VectorXd xi = Eigen::VectorXd::Zero(aug.state_dim());
    const StepReferences refs{Eigen::VectorXd::Constant(11, 1.0), {}};
    const auto sol = solve(build_step_qp(aug, cfg, xi, refs, w, 0.0));
    ASSERT_EQ(sol.status, QpStatus::Optimal);
    const auto ps = build_prediction(aug, cfg, w);
    const Eigen::VectorXd U = ps.Fu * xi + ps.Gu * sol.z.head(10);
    const double eps = sol.z(10);
    double prev = 0.0;
    for (Eigen::Index k = 0; k < U.size(); ++k) {
        EXPECT_LE(std::abs(U(k) - prev), 0.2 + cfg.V_du * eps + 1e-9);
        prev = U(k);
    }
}

TEST(Governor, PredictedInputMatchesStack) {
    const auto M = LpvStateSpace::first_order(0.95, 0.05);
    const auto aug = build_augmented(M, scheduled_controller(M));
    auto cfg = base_config(4, 2);
    MpcController mpc(aug, cfg);
    const auto w = random_windows(aug.window_length(), 4, 3);
    const Eigen::VectorXd xi = Eigen::VectorXd::Constant(aug.state_dim(), 0.2);
    const auto d = mpc.step(0, xi, {Eigen::VectorXd::Constant(5, 1.0), {}}, w, 0.0);
    const auto ps = build_prediction(aug, cfg, w);
    const double u0 = (ps.Fu.row(0) * xi)(0) + ps.Gu(0, 0) * d.g;
    EXPECT_NEAR(d.predicted_u, u0, 1e-12);
}

TEST(Governor, SolutionIsContinuousInState) {
    const auto M = LpvStateSpace::first_order(0.99, 0.01);
    const auto aug = build_augmented(M, fx::lti_pi_controller(M));
    auto cfg = base_config(10, 10);
    cfg.bounds.du_min = -0.2;
    cfg.bounds.du_max = 0.2;
    const auto w = random_windows(1, 10, 0);
    const StepReferences refs{Eigen::VectorXd::Constant(11, 1.0), {}};
    Eigen::VectorXd xi = Eigen::VectorXd::Constant(aug.state_dim(), 0.1);
    const double g0 = solve(build_step_qp(aug, cfg, xi, refs, w, 0.0)).z(0);
    xi.array() += 1e-7;
    const double g1 = solve(build_step_qp(aug, cfg, xi, refs, w, 0.0)).z(0);
    EXPECT_LT(std::abs(g1 - g0), 1e-4);
}

TEST(Windows, LpvFreezesFutureAndMatchesLtvOnConstantSchedule) {
    const auto p = fx::uniform(30, -1.0, 1.0, 6);
    const auto lpv = prediction_windows(p, 10, 3, 5, PredictionMode::LPV);
    for (const auto& w : lpv) EXPECT_EQ(w[0], p[10]);
    EXPECT_EQ(lpv[5][2], p[10]);
    EXPECT_EQ(lpv[1][1], p[10]);
    EXPECT_EQ(lpv[1][2], p[9]);
    const auto ltv = prediction_windows(p, 10, 3, 5, PredictionMode::LTV);
    EXPECT_EQ(ltv[5][0], p[15]);
    EXPECT_EQ(ltv[5][2], p[13]);

    const auto c = SampledSignal::constant(0.4, 30, 1.0);
    EXPECT_EQ(prediction_windows(c, 10, 3, 5, PredictionMode::LPV), prediction_windows(c, 10, 3, 5, PredictionMode::LTV));
}

TEST(Windows, FrozenHistoryMatchesRecordedLpvWindows) {
    const auto p = fx::uniform(30, -1.0, 1.0, 6);
    std::vector<double> hist;
    for (int k = 0; k <= 12; ++k) hist.push_back(p[static_cast<std::size_t>(12 - k)]);
    EXPECT_EQ(frozen_windows(hist, 4, 6), prediction_windows(p, 12, 4, 6, PredictionMode::LPV));
}

TEST(Windows, ReferencePreviewHoldsLastValue) {
    const SampledSignal r({1.0, 2.0, 3.0}, 1.0);
    const auto v = reference_preview(r, 1, 3);
    EXPECT_EQ(v, Eigen::Vector4d(2.0, 3.0, 3.0, 3.0));
}

TEST(Config, RejectsInvalidHorizonsAndWeights) {
    auto c = base_config(5, 6);
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = base_config(5, 5);
    c.Q_y = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = base_config(5, 5);
    c.Q_eps = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
