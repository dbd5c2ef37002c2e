// Pipeline runner: collect -> fit-inner -> build-augmented -> run-mpc -> report.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "json.hpp"
#include "lpvdd/closed_loop.hpp"
#include "lpvdd/config.hpp"
#include "lpvdd/inner_synth.hpp"
#include "lpvdd/metrics.hpp"
#include "lpvdd/realization.hpp"

namespace fs = std::filesystem;
using namespace lpvdd;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    bool verbose = false;
    std::string train, instrument, validation, controller, augmented, log;
};

std::string input_path(const Options& o, const std::string& given, const std::string& fallback) {
    return given.empty() ? (fs::path(o.out) / fallback).string() : given;
}

std::string output_path(const Options& o, const std::string& name) {
    fs::create_directories(o.out);
    return (fs::path(o.out) / name).string();
}

PipelineConfig load(const Options& o) {
    PipelineConfig cfg = load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

// Model response to the command, scheduled by the recorded p.
std::vector<double> desired_output(const LpvStateSpace& M, const SampledSignal& g, const SampledSignal& p) {
    return simulate(M, g, p).output().values_or_nan();
}

void append_step_metrics(std::vector<MetricsRow>& rows, const PipelineConfig& cfg, const SampledSignal& y,
                         const std::string& prefix, std::size_t lookahead = 0) {
    const auto m = first_step_metrics(y, cfg.scenario.steps, lookahead);
    if (!m) return;
    rows.push_back({prefix + "rise_time_s", m->rise_time_10_90.value_or(std::nan(""))});
    rows.push_back({prefix + "settling_time_s", m->settling_time_2pct.value_or(std::nan(""))});
    rows.push_back({prefix + "overshoot_pct", m->overshoot_pct});
}

void append_bound_metrics(std::vector<MetricsRow>& rows, const BoundSet& b, const std::vector<double>& u,
                          const std::vector<double>& y) {
    const auto du = increments(u);
    double max_du = 0.0;
    for (double d : du) max_du = std::max(max_du, std::abs(d));
    rows.push_back({"max_abs_du", max_du});
    const auto vu = violation_stats(u, b.u_min, b.u_max);
    const auto vy = violation_stats(y, b.y_min, b.y_max);
    const auto vdu = violation_stats(du, b.du_min, b.du_max);
    rows.push_back({"u_max_violation", vu.max_violation});
    rows.push_back({"y_max_violation", vy.max_violation});
    rows.push_back({"du_max_violation", vdu.max_violation});
    rows.push_back({"y_violated_samples", static_cast<double>(vy.violated_samples)});
}

void emit_metrics(const Options& o, const std::string& name, const std::vector<MetricsRow>& rows) {
    std::ofstream out(output_path(o, name));
    write_metrics_csv(out, rows);
    std::cout << metrics_summary(rows);
}

void write_columns(const std::string& path, const std::vector<std::string>& names,
                   const std::vector<std::vector<double>>& cols, double ts) {
    std::ofstream out(path);
    out << "t";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    const std::size_t n = cols.front().size();
    for (std::size_t k = 0; k < n; ++k) {
        out << format_double(static_cast<double>(k) * ts);
        for (const auto& c : cols) out << ',' << format_double(c[k]);
        out << '\n';
    }
}

int cmd_collect(const Options& o) {
    const auto cfg = load(o);
    const auto logs = collect_logs(cfg);
    write_log_csv(output_path(o, "train.csv"), logs.train);
    write_log_csv(output_path(o, "instrument.csv"), logs.instrument);
    write_log_csv(output_path(o, "validation.csv"), logs.validation);
    spdlog::info("collected {} training and {} validation samples", logs.train.size(), logs.validation.size());
    return 0;
}

int cmd_fit_inner(const Options& o) {
    const auto cfg = load(o);
    const auto train = read_log_csv(input_path(o, o.train, "train.csv"));
    const auto val = read_log_csv(input_path(o, o.validation, "validation.csv"));
    std::optional<ExperimentLog> inst;
    if (cfg.controller.estimator == Estimator::InstrumentalVariables) {
        inst = read_log_csv(input_path(o, o.instrument, "instrument.csv"));
        if (inst->size() != train.size()) {
            throw SchemaError("/instrument", "instrument log has " + std::to_string(inst->size()) +
                                                 " samples but the training log has " + std::to_string(train.size()));
        }
    }
    const ExperimentLog* ip = inst ? &*inst : nullptr;

    ControllerStructure s = cfg.controller;
    nlohmann::json report;
    if (!cfg.cv_gammas.empty()) {
        std::vector<double> sigmas = cfg.cv_sigmas;
        if (sigmas.empty()) sigmas.push_back(s.is_kernel() ? std::get<KernelCoefficients>(s.coefficients).sigma : 1.0);
        const auto cv = cross_validate(train, ip, val, make_grid(cfg.cv_gammas, sigmas), s, cfg.reference_model);
        s.gamma = cv.best.gamma;
        if (s.is_kernel()) std::get<KernelCoefficients>(s.coefficients).sigma = cv.best.sigma;
        nlohmann::json table = nlohmann::json::array();
        for (const auto& p : cv.table) table.push_back({{"gamma", p.gamma}, {"sigma", p.sigma}, {"score", p.score}});
        report["cv_table"] = table;
        spdlog::info("cross-validation picked gamma={} sigma={} (score {})", cv.best.gamma, cv.best.sigma,
                     cv.best.score);
    }
    const auto ctrl = fit_inner_controller(train, ip, s, cfg.reference_model);
    const auto sys_train = build_regression(train, nullptr, s, cfg.reference_model, &ctrl.centers());
    const auto sys_val = build_regression(val, nullptr, s, cfg.reference_model, &ctrl.centers());
    report["gamma"] = s.gamma;
    if (s.is_kernel()) report["sigma"] = std::get<KernelCoefficients>(s.coefficients).sigma;
    report["parameters"] = ctrl.theta().size();
    report["train_rows"] = sys_train.size();
    report["train_residual_ms"] = residual_score(sys_train, ctrl.theta());
    report["validation_rows"] = sys_val.size();
    report["validation_residual_ms"] = sys_val.size() > 0 ? residual_score(sys_val, ctrl.theta()) : 0.0;
    write_json(output_path(o, "controller.json"), to_json(ctrl));
    write_json(output_path(o, "fit_report.json"), report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_validate_inner(const Options& o) {
    const auto cfg = load(o);
    const auto ctrl = controller_from_json(read_json(input_path(o, o.controller, "controller.json")));
    const auto g = scenario_reference(cfg);
    const auto sw = scenario_switching(cfg);
    auto plant = make_plant(cfg, sw);
    std::vector<double> clean;
    const auto log = run_inner_loop(*plant, ctrl, g, scenario_scheduling(cfg, sw), scenario_loop_options(cfg), &clean);
    write_log_csv(output_path(o, "inner_log.csv"), log);
    const auto yd = desired_output(ctrl.reference_model(), g, log.p());
    write_columns(output_path(o, "inner_signals.csv"), {"g", "y_d", "y", "y_clean", "u"},
                  {g.values_or_nan(), yd, log.y().values_or_nan(), clean, log.u().values_or_nan()}, cfg.sample_period);
    std::vector<MetricsRow> rows{{"ms", matching_ms(clean, yd)}, {"ms_measured", matching_ms(log.y().values_or_nan(), yd)}};
    append_step_metrics(rows, cfg, SampledSignal(clean, cfg.sample_period), "");
    emit_metrics(o, "inner_metrics.csv", rows);
    return 0;
}

int cmd_build_augmented(const Options& o) {
    const auto ctrl = controller_from_json(read_json(input_path(o, o.controller, "controller.json")));
    const auto model = build_augmented(ctrl.reference_model(), ctrl);
    write_json(output_path(o, "augmented.json"), to_json(model));
    const auto& L = model.layout();
    spdlog::info("augmented state dimension {} (model {}, input history {}, error history {}, integrator {})",
                 L.size, L.n_m, L.n_u, L.n_e, L.e_int >= 0 ? "yes" : "no");
    return 0;
}

int cmd_run_mpc(const Options& o) {
    const auto cfg = load(o);
    const auto ctrl = controller_from_json(read_json(input_path(o, o.controller, "controller.json")));
    const auto model = augmented_from_json(read_json(input_path(o, o.augmented, "augmented.json")));
    const auto r = scenario_reference(cfg);
    const auto sw = scenario_switching(cfg);
    auto plant = make_plant(cfg, sw);
    const auto src = scenario_state_source(cfg);
    const auto tuning = scenario_kalman_tuning(cfg, model.state_dim());
    const auto res = run_hierarchical(*plant, ctrl, model, cfg.mpc, r, scenario_scheduling(cfg, sw), scenario_loop_options(cfg), src,
                                      tuning);
    write_log_csv(output_path(o, "hier_log.csv"), res.log);
    {
        std::ofstream out(output_path(o, "diagnostics.csv"));
        write_diagnostics_csv(out, res.diagnostics);
    }
    const auto u = res.log.u().values_or_nan();
    write_columns(output_path(o, "hier_signals.csv"), {"r", "g", "y", "y_clean", "u"},
                  {r.values_or_nan(), res.g.values_or_nan(), res.log.y().values_or_nan(), res.clean_output, u},
                  cfg.sample_period);
    std::vector<MetricsRow> rows;
    append_step_metrics(rows, cfg, SampledSignal(res.clean_output, cfg.sample_period), "",
                        src == StateSourceKind::PassThrough ? 0 : static_cast<std::size_t>(cfg.mpc.Np));
    append_bound_metrics(rows, cfg.mpc.bounds, u, res.clean_output);
    int max_iter = 0;
    for (const auto& d : res.diagnostics) max_iter = std::max(max_iter, d.qp_iters);
    rows.push_back({"max_qp_iterations", static_cast<double>(max_iter)});
    emit_metrics(o, "hier_metrics.csv", rows);
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto cfg = load(o);
    if (cfg.sweep_poles.empty()) throw SchemaError("/sweep/poles", "missing or empty pole list");
    const auto logs = collect_logs(cfg);
    const auto sw = scenario_switching(cfg);
    SweepScenario sc{logs.train, std::nullopt, scenario_reference(cfg), scenario_scheduling(cfg, sw), scenario_loop_options(cfg)};
    if (cfg.controller.estimator == Estimator::InstrumentalVariables) sc.instrument = logs.instrument;
    const auto entries = sensitivity_sweep([&] { return make_plant(cfg, sw); }, cfg.controller, cfg.sweep_poles, sc);
    std::ofstream out(output_path(o, "sweep.csv"));
    out << "pole,cutoff_hz,ms,unstable\n";
    for (const auto& e : entries) {
        out << format_double(e.pole) << ',' << format_double(e.cutoff_hz) << ','
            << (e.ms ? format_double(*e.ms) : std::string("nan")) << ',' << (e.ms ? 0 : 1) << '\n';
        std::cout << "pole " << e.pole << " (" << e.cutoff_hz << " Hz): "
                  << (e.ms ? "MS " + std::to_string(*e.ms) : "unstable at sample " + std::to_string(e.diverged_at))
                  << '\n';
    }
    return 0;
}

int cmd_report(const Options& o) {
    const auto cfg = load(o);
    const auto log = read_log_csv(input_path(o, o.log, "hier_log.csv"));
    const auto g = scenario_reference(cfg);
    if (g.size() != log.size()) {
        throw SchemaError("/scenario/length", "scenario has " + std::to_string(g.size()) + " samples but the log has " +
                                                  std::to_string(log.size()));
    }
    const auto yd = desired_output(cfg.reference_model, g, log.p());
    const auto y = log.y().values_or_nan();
    const auto u = log.u().values_or_nan();
    std::vector<MetricsRow> rows{{"ms", matching_ms(y, yd)}};
    append_step_metrics(rows, cfg, log.y(), "");
    append_bound_metrics(rows, cfg.mpc.bounds, u, y);
    emit_metrics(o, "report_metrics.csv", rows);
    write_columns(output_path(o, "plot_data.csv"), {"g", "y_d", "y", "u", "p"},
                  {g.values_or_nan(), yd, y, u, log.p().values_or_nan()}, log.sample_period());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LPV data-driven inner control with a predictive reference governor"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--out", o.out, "output directory (also the default input directory)");
        sub->add_flag("--verbose", o.verbose, "debug logging");
    };
    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Entry entries[] = {
        {"collect", "open-loop experiment -> train/instrument/validation logs", cmd_collect},
        {"fit-inner", "fit the inner controller (optionally cross-validated)", cmd_fit_inner},
        {"validate-inner", "inner loop on the scenario; MS against the reference model", cmd_validate_inner},
        {"build-augmented", "realize the augmented model from a fitted controller", cmd_build_augmented},
        {"run-mpc", "hierarchical closed loop on the scenario", cmd_run_mpc},
        {"sweep", "reference-model pole sweep of the inner-loop MS", cmd_sweep},
        {"report", "metrics and plot data for a recorded log", cmd_report},
    };
    int (*selected)(const Options&) = nullptr;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        common(sub);
        sub->add_option("--train", o.train, "training log CSV");
        sub->add_option("--instrument", o.instrument, "instrument log CSV");
        sub->add_option("--validation", o.validation, "validation log CSV");
        sub->add_option("--controller", o.controller, "controller JSON");
        sub->add_option("--augmented", o.augmented, "augmented model JSON");
        sub->add_option("--log", o.log, "closed-loop log CSV");
        sub->callback([&selected, run = e.run] { selected = run; });
    }
    CLI11_PARSE(app, argc, argv);

    spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::warn);
    try {
        return selected(o);
    } catch (const SchemaError& e) {
        std::cerr << "config error at " << e.what() << '\n';
        return 2;
    } catch (const ClosedLoopDivergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
