#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "lpvdd/closed_loop.hpp"
#include "lpvdd/metrics.hpp"

using namespace lpvdd;

namespace {

SampledSignal staircase(std::size_t n) {
    std::vector<double> v(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) v[t] = t < 20 ? 0.0 : t < 150 ? 1.0 : t < 300 ? -0.5 : 2.0;
    return SampledSignal(v, 1.0);
}

MpcConfig plain_config() {
    MpcConfig c;
    c.Np = 8;
    c.Nu = 4;
    c.mode = PredictionMode::LPV;
    return c;
}

class EnvGuard {
public:
    explicit EnvGuard(const char* name) : name_(name) {
        if (const char* v = std::getenv(name)) saved_ = v;
    }
    ~EnvGuard() {
        if (saved_) {
            setenv(name_, saved_->c_str(), 1);
        } else {
            unsetenv(name_);
        }
    }

private:
    const char* name_;
    std::optional<std::string> saved_;
};

} // namespace

TEST(InnerLoop, MatchingControllerReproducesModel) {
    const auto g = staircase(400);
    auto plant = fx::lti_plant();
    const auto log = run_inner_loop(plant, fx::lti_pi_controller(), g, SchedulingSource::measured_output());
    const auto yd = simulate(fx::lti_model(), g, g).output();
    EXPECT_LT(fx::max_abs_diff(log.y(), yd), 1e-8);
}

TEST(InnerLoop, ZeroReferenceStaysAtRest) {
    auto plant = fx::lti_plant();
    const auto log = run_inner_loop(plant, fx::lti_pi_controller(), SampledSignal::constant(0.0, 100, 1.0),
                                    SchedulingSource::measured_output());
    for (std::size_t t = 0; t < 100; ++t) {
        EXPECT_EQ(log.y()[t], 0.0);
        EXPECT_EQ(log.u()[t], 0.0);
    }
}

TEST(InnerLoop, ExogenousScheduleIsRecorded) {
    const auto s = generate_switching(200, 20, 1.0, 3);
    SwitchedRc plant(SwitchedRcParams{}, s);
    const auto log = run_inner_loop(plant, fx::lti_pi_controller(), staircase(200), SchedulingSource::exogenous(s));
    EXPECT_EQ(log.p(), s);
    EXPECT_THROW(run_inner_loop(plant, fx::lti_pi_controller(), staircase(300), SchedulingSource::exogenous(s)),
                 ShapeError);
}

TEST(InnerLoop, DivergenceCarriesPartialLog) {
    const auto bad = fx::constant_controller(fx::lti_structure(), {-1.0, -40.0, 0.0}, fx::lti_model());
    auto plant = fx::lti_plant();
    try {
        run_inner_loop(plant, bad, SampledSignal::constant(1.0, 5000, 1.0), SchedulingSource::measured_output());
        FAIL() << "expected divergence";
    } catch (const ClosedLoopDivergence& d) {
        ASSERT_TRUE(d.partial.has_value());
        EXPECT_EQ(d.partial->size(), d.index);
        EXPECT_GT(d.index, 1u);
        EXPECT_LE(std::abs(d.partial->y()[d.index - 1]), 1e6);
    }
}

TEST(Hierarchical, PassThroughEqualsInnerLoop) {
    const auto r = staircase(400);
    LoopOptions opt;
    opt.noise_std = 0.01;
    opt.seed = 17;
    auto p1 = fx::lti_plant();
    const auto inner = run_inner_loop(p1, fx::lti_pi_controller(), r, SchedulingSource::measured_output(), opt);
    auto p2 = fx::lti_plant();
    const auto aug = build_augmented(fx::lti_model(), fx::lti_pi_controller());
    const auto h = run_hierarchical(p2, fx::lti_pi_controller(), aug, plain_config(), r,
                                    SchedulingSource::measured_output(), opt, StateSourceKind::PassThrough);
    EXPECT_EQ(h.log, inner);
    EXPECT_EQ(h.g, r);
    EXPECT_TRUE(h.diagnostics.empty());
}

TEST(Hierarchical, ReferenceOnlyGovernorDegeneratesToPassThrough) {
    const auto r = staircase(400);
    auto cfg = plain_config();
    cfg.Q_y = 0.0;
    const auto aug = build_augmented(fx::lti_model(), fx::lti_pi_controller());
    auto p1 = fx::lti_plant();
    const auto gov = run_hierarchical(p1, fx::lti_pi_controller(), aug, cfg, r, SchedulingSource::measured_output());
    auto p2 = fx::lti_plant();
    const auto pass = run_hierarchical(p2, fx::lti_pi_controller(), aug, cfg, r, SchedulingSource::measured_output(),
                                       {}, StateSourceKind::PassThrough);
    const auto yd = simulate(fx::lti_model(), r, r).output().values_or_nan();
    const double ms_gov = matching_ms(gov.clean_output, yd);
    const double ms_pass = matching_ms(pass.clean_output, yd);
    EXPECT_LT(std::abs(ms_gov - ms_pass), 1e-4);
    EXPECT_LT(fx::max_abs_diff(gov.g, r), 1e-10);
}

TEST(Hierarchical, GovernorKeepsOutputBelowBound) {
    // Soft bound: the quadratic slack penalty leaves an excess of order 1 / Q_eps.
    const auto r = staircase(400);
    EXPECT_GT(r.values_or_nan().back(), 1.5);
    const auto aug = build_augmented(fx::lti_model(), fx::lti_pi_controller());
    double previous = INFINITY;
    for (double q_eps : {1e5, 1e7, 1e9}) {
        auto cfg = plain_config();
        cfg.bounds.y_max = 1.5;
        cfg.Q_eps = q_eps;
        auto plant = fx::lti_plant();
        const auto h = run_hierarchical(plant, fx::lti_pi_controller(), aug, cfg, r,
                                        SchedulingSource::measured_output(), {}, StateSourceKind::Direct);
        const double excess = violation_stats(h.clean_output, -INFINITY, 1.5).max_violation;
        EXPECT_LE(excess, 10.0 / q_eps) << "Q_eps " << q_eps;
        EXPECT_LE(excess, previous);
        previous = excess;
    }
}

TEST(Hierarchical, RunsAreDeterministic) {
    const auto r = staircase(300);
    LoopOptions opt;
    opt.noise_std = 0.02;
    opt.seed = 5;
    auto cfg = plain_config();
    cfg.bounds.du_min = -0.5;
    cfg.bounds.du_max = 0.5;
    const auto aug = build_augmented(fx::lti_model(), fx::lti_pi_controller());
    auto p1 = fx::lti_plant();
    auto p2 = fx::lti_plant();
    const auto a = run_hierarchical(p1, fx::lti_pi_controller(), aug, cfg, r, SchedulingSource::measured_output(), opt);
    const auto b = run_hierarchical(p2, fx::lti_pi_controller(), aug, cfg, r, SchedulingSource::measured_output(), opt);
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(a.g, b.g);
}

TEST(Hierarchical, LtvNeedsKnownSchedule) {
    auto cfg = plain_config();
    cfg.mode = PredictionMode::LTV;
    const auto aug = build_augmented(fx::lti_model(), fx::lti_pi_controller());
    auto plant = fx::lti_plant();
    EXPECT_THROW(run_hierarchical(plant, fx::lti_pi_controller(), aug, cfg, staircase(50),
                                  SchedulingSource::measured_output()),
                 ConfigurationError);
}

TEST(Sweep, ExactStructureGivesZeroMismatch) {
    const auto u = fx::white(600, 1.0, 3);
    SweepScenario sc{simulate_open_loop(fx::lti_plant(), u, 0.0, 1), std::nullopt, staircase(400),
                     SchedulingSource::measured_output(), {}};
    const auto out = sensitivity_sweep([] { return std::make_unique<FirstOrderPlant>(fx::lti_plant()); },
                                       fx::lti_structure(1e12), {0.5, 0.8, 0.95}, sc);
    ASSERT_EQ(out.size(), 3u);
    for (const auto& e : out) {
        ASSERT_TRUE(e.ms.has_value());
        EXPECT_LT(*e.ms, 1e-10) << "pole " << e.pole;
        EXPECT_NEAR(e.cutoff_hz, first_order_cutoff_hz(e.pole, 1.0), 1e-15);
    }
}

TEST(Sweep, ThreadCapDoesNotChangeResults) {
    EnvGuard guard("LPVDD_THREADS");
    const auto u = fx::white(400, 1.0, 4);
    SweepScenario sc{simulate_open_loop(fx::lti_plant(), u, 0.01, 2), std::nullopt, staircase(300),
                     SchedulingSource::measured_output(), {}};
    auto factory = [] { return std::make_unique<FirstOrderPlant>(fx::lti_plant()); };
    setenv("LPVDD_THREADS", "1", 1);
    const auto a = sensitivity_sweep(factory, fx::lti_structure(1e6), {0.6, 0.7, 0.9}, sc);
    setenv("LPVDD_THREADS", "3", 1);
    const auto b = sensitivity_sweep(factory, fx::lti_structure(1e6), {0.6, 0.7, 0.9}, sc);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].ms, b[i].ms);
}

TEST(Sweep, ThreadEnvironmentParsing) {
    EnvGuard guard("LPVDD_THREADS");
    setenv("LPVDD_THREADS", "3", 1);
    EXPECT_EQ(sweep_threads(), 3u);
    setenv("LPVDD_THREADS", "zero", 1);
    EXPECT_GE(sweep_threads(), 1u);
    unsetenv("LPVDD_THREADS");
    EXPECT_GE(sweep_threads(), 1u);
}
