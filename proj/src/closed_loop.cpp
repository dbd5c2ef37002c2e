#include "lpvdd/closed_loop.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <numbers>
#include <random>
#include <thread>

#include "lpvdd/metrics.hpp"
#include "lpvdd/state_estimator.hpp"

namespace lpvdd {

namespace {

// Measurement chain shared by both loop kinds so their noise draws line up.
class Sensor {
public:
    Sensor(const LoopOptions& o) : opts_(o), rng_(o.seed), normal_(0.0, o.noise_std > 0.0 ? o.noise_std : 1.0) {}

    double read(double clean) {
        return opts_.noise_std > 0.0 ? clean + normal_(rng_) : clean;
    }

private:
    LoopOptions opts_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
};

std::vector<double> window_from(const std::vector<double>& p, std::size_t t, std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t k = 0; k < length; ++k) w[k] = p[k <= t ? t - k : 0];
    return w;
}

std::optional<ExperimentLog> partial_log(const std::vector<double>& u, const std::vector<double>& y,
                                         const std::vector<double>& p, std::size_t count, double ts) {
    if (count == 0) return std::nullopt;
    auto head = [&](const std::vector<double>& v) {
        return SampledSignal(std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(count)), ts);
    };
    return ExperimentLog(head(u), head(y), head(p));
}

void check_scheduling(const SchedulingSource& s, std::size_t n) {
    if (s.kind == SchedulingSource::Kind::Exogenous) {
        if (!s.signal) throw std::invalid_argument("exogenous scheduling requires a signal");
        if (s.signal->size() < n) throw ShapeError("scheduling signal shorter than the reference");
    }
}

struct LoopBuffers {
    std::vector<double> u, y, p, clean;
    explicit LoopBuffers(std::size_t n) : u(n, 0.0), y(n, 0.0), p(n, 0.0), clean(n, 0.0) {}
};

// Reads the plant at sample t; throws with the partial log when the output leaves the admissible region.
double sense(Plant& plant, Sensor& sensor, const LoopOptions& opts, const SchedulingSource& sched, LoopBuffers& b,
             std::size_t t, double ts) {
    const double clean = plant.output();
    const double y = sensor.read(clean);
    if (!std::isfinite(y) || std::abs(y) > opts.divergence_limit) {
        throw ClosedLoopDivergence("closed-loop output diverged at sample " + std::to_string(t), t,
                                   partial_log(b.u, b.y, b.p, t, ts));
    }
    b.clean[t] = clean;
    b.y[t] = y;
    b.p[t] = sched.kind == SchedulingSource::Kind::Exogenous ? sched.signal->value(t) : y;
    return y;
}

void actuate(Plant& plant, double u, LoopBuffers& b, std::size_t t, double ts) {
    b.u[t] = u;
    try {
        plant.step(u, t);
    } catch (const DivergenceError& e) {
        throw ClosedLoopDivergence(e.what(), t + 1, partial_log(b.u, b.y, b.p, t + 1, ts));
    }
}

} // namespace

ExperimentLog run_inner_loop(Plant& plant, const InnerControllerModel& ctrl, const SampledSignal& g,
                             const SchedulingSource& scheduling, const LoopOptions& options,
                             std::vector<double>* clean_output) {
    const std::size_t n = g.size();
    const double ts = g.sample_period();
    check_scheduling(scheduling, n);
    const auto& s = ctrl.structure();
    const std::size_t wl = s.max_scheduling_lag() + 1;
    Sensor sensor(options);
    LoopBuffers b(n);
    ControllerHistory hist = ControllerHistory::zeros(s);
    for (std::size_t t = 0; t < n; ++t) {
        const double y = sense(plant, sensor, options, scheduling, b, t, ts);
        const auto w = window_from(b.p, t, wl);
        const double u = controller_step(ctrl, hist, g.value(t), y, pi_from_window(w, s.scheduling_lags));
        actuate(plant, u, b, t, ts);
    }
    if (clean_output) *clean_output = b.clean;
    return ExperimentLog(SampledSignal(b.u, ts), SampledSignal(b.y, ts), SampledSignal(b.p, ts));
}

HierarchicalResult run_hierarchical(Plant& plant, const InnerControllerModel& ctrl, const AugmentedModel& augmented,
                                    const MpcConfig& config, const SampledSignal& r,
                                    const SchedulingSource& scheduling, const LoopOptions& options,
                                    StateSourceKind state_source, const KalmanTuning& tuning) {
    const std::size_t n = r.size();
    const double ts = r.sample_period();
    check_scheduling(scheduling, n);
    if (config.mode == PredictionMode::LTV && scheduling.kind != SchedulingSource::Kind::Exogenous &&
        state_source != StateSourceKind::PassThrough) {
        throw ConfigurationError("LTV prediction needs a known (exogenous) future schedule");
    }
    const auto& s = ctrl.structure();
    const std::size_t wl = std::max(augmented.window_length(), s.max_scheduling_lag() + 1);
    const auto nx = augmented.state_dim();

    std::optional<KalmanFilter> kf;
    std::optional<DirectReconstruction> direct;
    if (state_source == StateSourceKind::Kalman) {
        kf.emplace(augmented, tuning.Q.value_or(1e-6 * Eigen::MatrixXd::Identity(nx, nx)),
                   tuning.R.value_or(Eigen::Matrix2d(Eigen::Vector2d(1e-4, 1e-6).asDiagonal())),
                   Eigen::VectorXd::Zero(nx), Eigen::MatrixXd::Identity(nx, nx));
    } else if (state_source == StateSourceKind::Direct) {
        direct.emplace(augmented);
    }
    MpcController mpc(augmented, config);

    Sensor sensor(options);
    LoopBuffers b(n);
    std::vector<double> g(n, 0.0);
    std::vector<MpcDiagnostics> diags;
    ControllerHistory hist = ControllerHistory::zeros(s);
    for (std::size_t t = 0; t < n; ++t) {
        const double y = sense(plant, sensor, options, scheduling, b, t, ts);
        const auto w_now = window_from(b.p, t, wl);
        double gt = r.value(t);
        if (state_source != StateSourceKind::PassThrough) {
            const double g_prev = t > 0 ? g[t - 1] : 0.0;
            const double u_prev = t > 0 ? b.u[t - 1] : 0.0;
            const auto w_prev = window_from(b.p, t > 0 ? t - 1 : 0, wl);
            const Eigen::VectorXd xi = kf ? kf->step(g_prev, y, u_prev, w_prev, w_now)
                                          : direct->step(g_prev, t > 0 ? b.y[t - 1] : 0.0, u_prev, w_prev);
            const auto windows = config.mode == PredictionMode::LTV
                                     ? prediction_windows(*scheduling.signal, t, wl, config.Np, PredictionMode::LTV)
                                     : frozen_windows(w_now, wl, config.Np);
            StepReferences refs{reference_preview(r, t, config.Np), {}};
            try {
                const auto d = mpc.step(t, xi, refs, windows, u_prev);
                gt = d.g;
                diags.push_back(d);
            } catch (const MpcError&) {
                spdlog::error("MPC failure at sample {}", t);
                throw;
            }
        }
        g[t] = gt;
        const double u = controller_step(ctrl, hist, gt, y, pi_from_window(w_now, s.scheduling_lags));
        actuate(plant, u, b, t, ts);
    }
    return {ExperimentLog(SampledSignal(b.u, ts), SampledSignal(b.y, ts), SampledSignal(b.p, ts)),
            SampledSignal(g, ts), std::move(diags), std::move(b.clean)};
}

unsigned sweep_threads() {
    if (const char* env = std::getenv("LPVDD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
        spdlog::warn("ignoring invalid LPVDD_THREADS='{}'", env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepEntry> sensitivity_sweep(const PlantFactory& plant, const ControllerStructure& structure,
                                          const std::vector<double>& poles, const SweepScenario& scenario) {
    const double ts = scenario.g.sample_period();
    auto run_one = [&](double a) {
        SweepEntry e{a, first_order_cutoff_hz(a, ts), std::nullopt, 0};
        const LpvStateSpace M = LpvStateSpace::first_order(a, 1.0 - a);
        const auto ctrl = fit_inner_controller(scenario.train, scenario.instrument ? &*scenario.instrument : nullptr,
                                               structure, M);
        auto p = plant();
        std::vector<double> clean;
        try {
            run_inner_loop(*p, ctrl, scenario.g, scenario.scheduling, scenario.options, &clean);
        } catch (const ClosedLoopDivergence& d) {
            e.diverged_at = d.index;
            return e;
        }
        const auto yd = simulate(M, scenario.g, scenario.g).output().values_or_nan();
        e.ms = matching_ms(clean, yd);
        return e;
    };

    std::vector<SweepEntry> out(poles.size());
    const std::size_t cap = sweep_threads();
    for (std::size_t start = 0; start < poles.size(); start += cap) {
        std::vector<std::future<SweepEntry>> jobs;
        const std::size_t end = std::min(poles.size(), start + cap);
        for (std::size_t i = start; i < end; ++i) jobs.push_back(std::async(std::launch::async, run_one, poles[i]));
        for (std::size_t i = start; i < end; ++i) out[i] = jobs[i - start].get();
    }
    return out;
}

} // namespace lpvdd
