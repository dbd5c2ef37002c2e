// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4] [--expect-fail 3,4] [--config-dir DIR]
//
// Exit code 0 iff every criterion that ran passed, or failed and was listed in --expect-fail.
// An expected failure that passes is reported as XPASS and counts as a failure.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "lpvdd/closed_loop.hpp"
#include "lpvdd/config.hpp"
#include "lpvdd/metrics.hpp"
#include "lpvdd/qp.hpp"
#include "lpvdd/realization.hpp"

using namespace lpvdd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("undefined"); }

struct Context {
    std::string config_dir;
    // Criterion 4's motor controller, reused by criterion 8.
    std::optional<InnerControllerModel> motor_ctrl;
    std::optional<InnerControllerModel> rc_ctrl;
};

InnerControllerModel fit_from_config(const PipelineConfig& cfg) {
    const auto logs = collect_logs(cfg);
    const bool iv = cfg.controller.estimator == Estimator::InstrumentalVariables;
    return fit_inner_controller(logs.train, iv ? &logs.instrument : nullptr, cfg.controller, cfg.reference_model);
}

struct RunPair {
    std::optional<StepMetrics> inner, hier;
    std::vector<double> u_hier, y_hier;
    std::string error;
};

// Inner-only (g = r) and governed runs of the config scenario.
RunPair inner_vs_hierarchical(const PipelineConfig& cfg, const InnerControllerModel& ctrl) {
    RunPair out;
    const auto aug = build_augmented(cfg.reference_model, ctrl);
    const auto r = scenario_reference(cfg);
    const auto sw = scenario_switching(cfg);
    const auto sched = scenario_scheduling(cfg, sw);
    const auto opt = scenario_loop_options(cfg);
    try {
        auto plant = make_plant(cfg, sw);
        const auto res = run_hierarchical(*plant, ctrl, aug, cfg.mpc, r, sched, opt, StateSourceKind::PassThrough);
        out.inner = first_step_metrics(SampledSignal(res.clean_output, cfg.sample_period), cfg.scenario.steps);
    } catch (const ClosedLoopDivergence& d) {
        out.error += "inner-only loop diverged at sample " + std::to_string(d.index) + "; ";
    }
    try {
        auto plant = make_plant(cfg, sw);
        const auto src = scenario_state_source(cfg);
        const auto res = run_hierarchical(*plant, ctrl, aug, cfg.mpc, r, sched, opt, src,
                                          scenario_kalman_tuning(cfg, aug.state_dim()));
        out.hier = first_step_metrics(SampledSignal(res.clean_output, cfg.sample_period), cfg.scenario.steps,
                                      static_cast<std::size_t>(cfg.mpc.Np));
        out.u_hier = res.log.u().values_or_nan();
        out.y_hier = res.clean_output;
    } catch (const ClosedLoopDivergence& d) {
        out.error += "hierarchical loop diverged at sample " + std::to_string(d.index) + "; ";
    }
    return out;
}

Outcome lti_recovery(Context&) {
    const auto u = fx::white(2000, 1.0, 11);
    const auto log = simulate_open_loop(fx::lti_plant(), u, 0.0, 0);
    const auto sys = build_regression(log, nullptr, fx::lti_structure(1e12), fx::lti_model());
    const auto theta = fit_ls(sys, 1e12);
    const auto K = fx::matching_controller(fx::lti_plant_tf(), fx::lti_model_tf());
    const Eigen::Vector3d truth(K.den.at(1), K.num.at(0), K.num.at(1));
    const double err = (theta - truth).cwiseAbs().maxCoeff();
    return {err <= 1e-6, "max |theta - theta_oracle| = " + fmt(err)};
}

Outcome iv_vs_ls(Context&) {
    const auto K = fx::matching_controller(fx::lti_plant_tf(), fx::lti_model_tf());
    const Eigen::Vector3d truth(K.den.at(1), K.num.at(0), K.num.at(1));
    const int seeds = 20;
    const double gamma = 1e9;
    std::vector<double> iv_err;
    double ls_8000 = 0.0;
    for (std::size_t n : {500u, 2000u, 8000u}) {
        double iv = 0.0, ls = 0.0;
        for (int k = 0; k < seeds; ++k) {
            const auto u = fx::white(n, 1.0, 500 + k);
            const auto clean = simulate_open_loop(fx::lti_plant(), u, 0.0, 0).y().values_or_nan();
            const double sd = noise_std_for_snr(clean, 30.0);
            const auto train = simulate_open_loop(fx::lti_plant(), u, sd, 2000 + 2 * k);
            const auto inst = simulate_open_loop(fx::lti_plant(), u, sd, 2001 + 2 * k);
            const auto sys = build_regression(train, &inst, fx::lti_structure(gamma), fx::lti_model());
            iv += (fit_iv(sys, gamma) - truth).norm() / seeds;
            ls += (fit_ls(sys, gamma) - truth).norm() / seeds;
        }
        iv_err.push_back(iv);
        if (n == 8000) ls_8000 = ls;
    }
    const bool monotone = iv_err[0] > iv_err[1] && iv_err[1] > iv_err[2];
    return {iv_err[2] <= ls_8000 && monotone, "N=8000 mean error IV " + fmt(iv_err[2]) + " vs LS " + fmt(ls_8000) +
                                                  "; IV over N=500/2000/8000: " + fmt(iv_err[0]) + " / " +
                                                  fmt(iv_err[1]) + " / " + fmt(iv_err[2])};
}

Outcome motor_sweep(Context& ctx) {
    const auto cfg = load_config(ctx.config_dir + "/dc_motor.json");
    const auto logs = collect_logs(cfg);
    SweepScenario sc{logs.train, std::nullopt, scenario_reference(cfg), scenario_scheduling(cfg, std::nullopt),
                     scenario_loop_options(cfg)};
    if (cfg.controller.estimator == Estimator::InstrumentalVariables) sc.instrument = logs.instrument;
    const auto entries = sensitivity_sweep([&] { return make_plant(cfg, std::nullopt); }, cfg.controller,
                                           cfg.sweep_poles, sc);
    std::ostringstream d;
    for (const auto& e : entries) d << "a=" << e.pole << ":" << (e.ms ? fmt(*e.ms) : std::string("unstable")) << ' ';
    // Poles are listed slowest first; the three slowest and the fastest are judged.
    const auto& ms = entries;
    const bool defined = ms.size() >= 4 && ms[0].ms && ms[1].ms && ms[2].ms;
    bool pass = defined && *ms[0].ms < *ms[1].ms && *ms[1].ms < *ms[2].ms && *ms[2].ms >= 1e-3 && *ms[2].ms <= 1e-1 &&
                !ms.back().ms;
    return {pass, d.str()};
}

Outcome motor_speedup(Context& ctx, RunPair& run) {
    const auto cfg = load_config(ctx.config_dir + "/dc_motor.json");
    ctx.motor_ctrl = fit_from_config(cfg);
    run = inner_vs_hierarchical(cfg, *ctx.motor_ctrl);
    if (!run.inner || !run.hier) return {false, run.error + "step metrics unavailable"};
    const auto& a = *run.inner;
    const auto& b = *run.hier;
    std::string d = run.error + "rise inner " + fmt_opt(a.rise_time_10_90) + " s, hierarchical " +
                    fmt_opt(b.rise_time_10_90) + " s; settling inner " + fmt_opt(a.settling_time_2pct) +
                    " s, hierarchical " + fmt_opt(b.settling_time_2pct) + " s";
    const bool pass = a.defined() && b.defined() && a.settling_time_2pct && b.settling_time_2pct &&
                      *b.rise_time_10_90 <= 0.5 * *a.rise_time_10_90 &&
                      *b.settling_time_2pct <= 0.5 * *a.settling_time_2pct;
    return {pass, d};
}

Outcome rate_bound(const RunPair& run) {
    if (run.u_hier.empty()) return {false, "no hierarchical run available (" + run.error + ")"};
    double worst = 0.0;
    for (double du : increments(run.u_hier)) worst = std::max(worst, std::abs(du));
    return {worst <= 0.2 + 1e-3, "max |du| = " + fmt(worst) + " V over " + std::to_string(run.u_hier.size()) +
                                     " samples"};
}

Outcome qp_oracle(Context&) {
    std::mt19937_64 rng(2024);
    double worst_z = 0.0, worst_obj = 0.0, worst_kkt = 0.0;
    int non_optimal = 0, biggest_rows = 0;
    for (int k = 0; k < 50; ++k) {
        const auto q = fx::random_qp(rng, 8, 10);
        Eigen::MatrixXd G;
        Eigen::VectorXd h;
        q.stacked_constraints(G, h);
        biggest_rows = std::max(biggest_rows, static_cast<int>(G.rows()));
        const auto ref = fx::enumerate_oracle(q);
        const auto s = solve(q);
        if (s.status != QpStatus::Optimal || ref.size() == 0) {
            ++non_optimal;
            continue;
        }
        worst_z = std::max(worst_z, (s.z - ref).cwiseAbs().maxCoeff());
        worst_obj = std::max(worst_obj, std::abs(s.objective - fx::qp_objective(q, ref)));
        worst_kkt = std::max(worst_kkt, s.kkt_residual);
    }
    const bool pass = non_optimal == 0 && worst_z <= 1e-6 && worst_obj <= 1e-6 && worst_kkt <= 1e-8;
    return {pass, "primal " + fmt(worst_z) + ", objective " + fmt(worst_obj) + ", KKT " + fmt(worst_kkt) +
                      ", non-optimal " + std::to_string(non_optimal) + ", max rows " + std::to_string(biggest_rows)};
}

Outcome inverse_round_trip(Context&) {
    double worst = 0.0;
    for (double a : {0.99, 0.95}) {
        const auto M = LpvStateSpace::first_order(a, 1.0 - a);
        const auto inv = left_inverse(M);
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto g = fx::white(500, 1.0, seed);
            const auto p = SampledSignal::constant(0.0, g.size(), 1.0);
            const auto back = reconstruct_input(inv, simulate(M, g, p).output(), p);
            for (std::size_t t = 0; t < g.size(); ++t) {
                if (back.available(t)) worst = std::max(worst, std::abs(back[t] - g[t]));
            }
        }
    }
    return {worst < 1e-8, "max |M^dagger(M g) - g| = " + fmt(worst)};
}

Outcome cascade_equivalence(Context& ctx) {
    if (!ctx.motor_ctrl) ctx.motor_ctrl = fit_from_config(load_config(ctx.config_dir + "/dc_motor.json"));
    if (!ctx.rc_ctrl) ctx.rc_ctrl = fit_from_config(load_config(ctx.config_dir + "/switched_rc.json"));
    const auto lti_cfg = load_config(ctx.config_dir + "/lti_fixture.json");
    const auto lti_ctrl = fit_from_config(lti_cfg);
    struct Case {
        const char* name;
        const InnerControllerModel* c;
        double lo, hi;
    };
    const Case cases[] = {{"lti", &lti_ctrl, -1.0, 1.0},
                          {"dc_motor", &*ctx.motor_ctrl, -4.0, 4.0},
                          {"switched_rc", &*ctx.rc_ctrl, 0.0, 1.0}};
    double worst = 0.0;
    std::string d;
    for (const auto& c : cases) {
        double w = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            w = std::max(w, fx::cascade_gap(*c.c, c.c->reference_model(), seed, 100, c.lo, c.hi));
        }
        d += std::string(c.name) + " " + fmt(w) + "  ";
        worst = std::max(worst, w);
    }
    return {worst <= 1e-10, d};
}

Outcome rc_loop(Context& ctx) {
    const auto cfg = load_config(ctx.config_dir + "/switched_rc.json");
    if (!ctx.rc_ctrl) ctx.rc_ctrl = fit_from_config(cfg);
    const auto run = inner_vs_hierarchical(cfg, *ctx.rc_ctrl);
    if (run.y_hier.empty()) return {false, run.error};
    const auto v = violation_stats(run.y_hier, 0.0, 5.0, 1e-3);
    const auto vu = violation_stats(run.u_hier, 0.0, 5.0, 1e-3);
    const auto ri = run.inner ? run.inner->rise_time_10_90 : std::nullopt;
    const auto rh = run.hier ? run.hier->rise_time_10_90 : std::nullopt;
    const bool pass = v.violated_samples == 0 && ri && rh && *rh < *ri;
    return {pass, run.error + "y samples beyond [0,5] by >1e-3: " + std::to_string(v.violated_samples) +
                      " (u: " + std::to_string(vu.violated_samples) + "); rise inner " + fmt_opt(ri) +
                      " s, hierarchical " + fmt_opt(rh) + " s"};
}

Outcome metric_analytics(Context&) {
    std::vector<double> y(2000);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = 1.0 - std::pow(0.99, static_cast<double>(k));
    const auto m = step_metrics(SampledSignal(y, 0.01), 0, 0.0, 1.0);
    const bool pass = m.rise_time_10_90 && m.settling_time_2pct && std::abs(*m.rise_time_10_90 - 2.186) <= 0.005 &&
                      std::abs(*m.settling_time_2pct - 3.893) <= 0.005;
    return {pass, "rise " + fmt_opt(m.rise_time_10_90) + " s, settling " + fmt_opt(m.settling_time_2pct) + " s"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only, expect_fail;
    Context ctx{LPVDD_CONFIG_DIR, std::nullopt, std::nullopt};
    app.add_option("--only", only, "run only these criteria")->delimiter(',');
    app.add_option("--expect-fail", expect_fail, "criteria known to fail (reported, not fatal)")->delimiter(',');
    app.add_option("--config-dir", ctx.config_dir, "directory with the shipped configs");
    CLI11_PARSE(app, argc, argv);

    RunPair motor_run;
    bool motor_ran = false;
    struct Criterion {
        int id;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, 1.0, [&] { return lti_recovery(ctx); }},
        {2, 120.0, [&] { return iv_vs_ls(ctx); }},
        {3, 600.0, [&] { return motor_sweep(ctx); }},
        {4, 300.0, [&] { motor_ran = true; return motor_speedup(ctx, motor_run); }},
        {5, 300.0, [&] {
             if (!motor_ran) {
                 motor_ran = true;
                 (void)motor_speedup(ctx, motor_run);
             }
             return rate_bound(motor_run);
         }},
        {6, 10.0, [&] { return qp_oracle(ctx); }},
        {7, 60.0, [&] { return inverse_round_trip(ctx); }},
        {8, 300.0, [&] { return cascade_equivalence(ctx); }},
        {9, 300.0, [&] { return rc_loop(ctx); }},
        {10, 1.0, [&] { return metric_analytics(ctx); }},
    };
    const std::set<int> run_set(only.begin(), only.end());
    const std::set<int> xfail(expect_fail.begin(), expect_fail.end());
    int unexpected = 0;
    for (const auto& c : criteria) {
        if (!run_set.empty() && !run_set.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string detail = o.detail + " [" + fmt(secs) + " s]";
        if (secs > c.budget_s) {
            o.pass = false;
            detail += " exceeds the " + fmt(c.budget_s) + " s budget";
        }
        const bool expected = xfail.count(c.id) > 0;
        const char* tag = o.pass ? (expected ? "XPASS" : "PASS") : "FAIL";
        if (o.pass == expected) ++unexpected;
        std::printf("criterion %2d: %s  %s%s\n", c.id, tag, detail.c_str(),
                    !o.pass && expected ? "  (expected failure)" : "");
        std::fflush(stdout);
    }
    return unexpected == 0 ? 0 : 1;
}
