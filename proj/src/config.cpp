#include "lpvdd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lpvdd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* type_name(const nlohmann::json& j) { return j.type_name(); }

// Bound values may be numbers or the strings "inf" / "-inf".
double bound_value(const ConfigNode& node, const std::string& key, double fallback) {
    if (!node.has(key)) return fallback;
    const auto& v = node.json().at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    node.fail(key, "expected a number or \"inf\"/\"-inf\"");
}

std::vector<std::pair<std::size_t, double>> parse_steps(const ConfigNode& list) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const ConfigNode s = list.at(i);
        const auto at = s.integer("at");
        if (at < 0) s.fail("at", "must be nonnegative");
        if (!out.empty() && static_cast<std::size_t>(at) < out.back().first) s.fail("at", "steps must be sorted by sample");
        out.emplace_back(static_cast<std::size_t>(at), s.number("value"));
    }
    return out;
}

PlantConfig parse_plant(const ConfigNode& n) {
    PlantConfig p;
    const std::string type = n.string("type", "");
    if (type == "dc_motor") {
        p.kind = PlantKind::DcMotor;
        auto& m = p.motor;
        m.R = n.number("R", m.R);
        m.L = n.number("L", m.L);
        m.K = n.number("K", m.K);
        m.J = n.number("J", m.J);
        m.b = n.number("b", m.b);
        m.m = n.number("m", m.m);
        m.l = n.number("l", m.l);
        m.g_accel = n.number("g_accel", m.g_accel);
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            n.fail(e.what());
        }
        if (n.has("initial_state")) {
            const auto x0 = n.numbers("initial_state");
            if (x0.size() != 3) n.fail("initial_state", "expected [theta, omega, current]");
            p.motor_initial = {x0[0], x0[1], x0[2]};
        }
    } else if (type == "switched_rc") {
        p.kind = PlantKind::SwitchedRc;
        auto& r = p.rc;
        r.a_on = n.number("a_on", r.a_on);
        r.b_on = n.number("b_on", r.b_on);
        r.a_off = n.number("a_off", r.a_off);
        r.b_off = n.number("b_off", r.b_off);
        try {
            r.validate();
        } catch (const std::invalid_argument& e) {
            n.fail(e.what());
        }
    } else if (type == "first_order") {
        p.kind = PlantKind::FirstOrder;
        p.first_order_a = n.number("a");
        p.first_order_b = n.number("b");
    } else {
        n.fail("type", "expected \"dc_motor\", \"switched_rc\" or \"first_order\", got \"" + type + "\"");
    }
    return p;
}

ExperimentConfig parse_experiment(const ConfigNode& n) {
    ExperimentConfig e;
    const ConfigNode x = n.child("excitation");
    const std::string kind = x.string("kind", "filtered_gaussian");
    if (kind == "filtered_gaussian") {
        e.excitation.kind = ExcitationSpec::Kind::FilteredGaussian;
    } else if (kind == "piecewise_constant") {
        e.excitation.kind = ExcitationSpec::Kind::PiecewiseConstant;
    } else {
        x.fail("kind", "expected \"filtered_gaussian\" or \"piecewise_constant\"");
    }
    e.excitation.std = x.number("std");
    e.excitation.mean = x.number("mean", 0.0);
    e.excitation.filter_cutoff_hz = x.number("cutoff_hz", e.excitation.filter_cutoff_hz);
    const auto hold = x.integer("hold_length", 1);
    if (hold < 1) x.fail("hold_length", "must be at least 1");
    e.excitation.hold_length = static_cast<std::size_t>(hold);
    try {
        e.excitation.validate();
    } catch (const std::invalid_argument& err) {
        x.fail(err.what());
    }
    const auto nt = n.integer("n_train", 1500);
    const auto nv = n.integer("n_validation", 500);
    if (nt < 10) n.fail("n_train", "must be at least 10");
    if (nv < 0) n.fail("n_validation", "must be nonnegative");
    e.n_train = static_cast<std::size_t>(nt);
    e.n_validation = static_cast<std::size_t>(nv);
    if (n.has("snr_db")) {
        const auto& v = n.json().at("snr_db");
        if (v.is_string() && v.get<std::string>() == "inf") {
            e.snr_db = kInf;
        } else {
            e.snr_db = n.number("snr_db");
        }
    }
    e.noise_std = n.number("noise_std", 0.0);
    if (e.noise_std < 0.0) n.fail("noise_std", "must be nonnegative");
    if (auto s = n.optional_child("switching")) {
        const auto h = s->integer("hold_length", 50);
        if (h < 1) s->fail("hold_length", "must be at least 1");
        e.switching.hold_length = static_cast<std::size_t>(h);
        e.switching.on_probability = s->number("on_probability", 0.5);
        if (e.switching.on_probability < 0.0 || e.switching.on_probability > 1.0) {
            s->fail("on_probability", "must lie in [0, 1]");
        }
    }
    return e;
}

LpvStateSpace parse_reference_model(const ConfigNode& n) {
    try {
        if (n.has("pole")) {
            const double a = n.number("pole");
            return LpvStateSpace::first_order(a, n.number("gain", 1.0 - a));
        }
        return lpv_from_json(n.json());
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        n.fail(e.what());
    }
}

MpcConfig parse_mpc(const ConfigNode& n) {
    MpcConfig c;
    c.Np = static_cast<int>(n.integer("Np", c.Np));
    c.Nu = static_cast<int>(n.integer("Nu", c.Nu));
    c.Q_y = n.number("Q_y", c.Q_y);
    c.Q_u = n.number("Q_u", c.Q_u);
    c.Q_du = n.number("Q_du", c.Q_du);
    c.Q_g = n.number("Q_g", c.Q_g);
    c.Q_eps = n.number("Q_eps", c.Q_eps);
    c.V_y = n.number("V_y", c.V_y);
    c.V_u = n.number("V_u", c.V_u);
    c.V_du = n.number("V_du", c.V_du);
    const std::string mode = n.string("mode", "lpv");
    if (mode == "lpv") {
        c.mode = PredictionMode::LPV;
    } else if (mode == "ltv") {
        c.mode = PredictionMode::LTV;
    } else {
        n.fail("mode", "expected \"lpv\" or \"ltv\"");
    }
    if (auto b = n.optional_child("bounds")) {
        c.bounds.u_min = bound_value(*b, "u_min", -kInf);
        c.bounds.u_max = bound_value(*b, "u_max", kInf);
        c.bounds.du_min = bound_value(*b, "du_min", -kInf);
        c.bounds.du_max = bound_value(*b, "du_max", kInf);
        c.bounds.y_min = bound_value(*b, "y_min", -kInf);
        c.bounds.y_max = bound_value(*b, "y_max", kInf);
    }
    if (auto q = n.optional_child("qp")) {
        c.qp.tol = q->number("tol", c.qp.tol);
        c.qp.max_iter = static_cast<int>(q->integer("max_iter", c.qp.max_iter));
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        n.fail(e.what());
    }
    return c;
}

ScenarioConfig parse_scenario(const ConfigNode& n) {
    ScenarioConfig s;
    const auto len = n.integer("length");
    if (len < 2) n.fail("length", "must be at least 2");
    s.length = static_cast<std::size_t>(len);
    s.steps = parse_steps(n.child("steps"));
    if (auto sw = n.optional_child("switch_steps")) s.switch_steps = parse_steps(*sw);
    s.noise_std = n.number("noise_std", 0.0);
    if (s.noise_std < 0.0) n.fail("noise_std", "must be nonnegative");
    s.estimator = n.string("estimator", "kalman");
    if (s.estimator != "kalman" && s.estimator != "direct" && s.estimator != "pass_through") {
        n.fail("estimator", "expected \"kalman\", \"direct\" or \"pass_through\"");
    }
    if (n.has("kf_q")) s.kf_q = n.number("kf_q");
    if (n.has("kf_r")) {
        const auto r = n.numbers("kf_r");
        if (r.size() != 2) n.fail("kf_r", "expected two variances [output, input]");
        s.kf_r = std::make_pair(r[0], r[1]);
    }
    return s;
}

} // namespace

bool ConfigNode::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

const nlohmann::json& ConfigNode::field(const std::string& key) const {
    if (!j_->is_object()) fail(std::string("expected an object, got ") + type_name(*j_));
    if (!j_->contains(key)) fail(key, "missing required field");
    return j_->at(key);
}

ConfigNode ConfigNode::child(const std::string& key) const { return {field(key), path_ + "/" + key}; }

std::optional<ConfigNode> ConfigNode::optional_child(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return child(key);
}

ConfigNode ConfigNode::at(std::size_t i) const {
    if (!j_->is_array()) fail(std::string("expected an array, got ") + type_name(*j_));
    if (i >= j_->size()) fail("index " + std::to_string(i) + " out of range");
    return {(*j_)[i], path_ + "/" + std::to_string(i)};
}

std::size_t ConfigNode::size() const {
    if (!j_->is_array()) fail(std::string("expected an array, got ") + type_name(*j_));
    return j_->size();
}

double ConfigNode::number(const std::string& key) const {
    const auto& v = field(key);
    if (!v.is_number()) fail(key, std::string("expected a number, got ") + type_name(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
}

double ConfigNode::number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

std::int64_t ConfigNode::integer(const std::string& key) const {
    const auto& v = field(key);
    if (!v.is_number_integer()) fail(key, std::string("expected an integer, got ") + type_name(v));
    return v.get<std::int64_t>();
}

std::int64_t ConfigNode::integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
}

std::string ConfigNode::string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = field(key);
    if (!v.is_string()) fail(key, std::string("expected a string, got ") + type_name(v));
    return v.get<std::string>();
}

std::vector<double> ConfigNode::numbers(const std::string& key) const {
    const ConfigNode list = child(key);
    std::vector<double> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& v = list.at(i).json();
        if (!v.is_number()) list.at(i).fail(std::string("expected a number, got ") + type_name(v));
        out.push_back(v.get<double>());
    }
    return out;
}

PipelineConfig parse_config(const nlohmann::json& j) {
    const ConfigNode root(j, "");
    if (!j.is_object()) root.fail("config root must be an object");
    const auto version = root.integer("schema_version");
    if (version != kSchemaVersion) {
        root.fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                        std::to_string(kSchemaVersion) + ")");
    }
    PipelineConfig cfg;
    cfg.sample_period = root.number("sample_period", cfg.sample_period);
    if (!(cfg.sample_period > 0.0)) root.fail("sample_period", "must be positive");
    const auto seed = root.integer("seed", 1);
    if (seed < 0) root.fail("seed", "must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.plant = parse_plant(root.child("plant"));
    if (auto e = root.optional_child("experiment")) cfg.experiment = parse_experiment(*e);
    if (auto m = root.optional_child("reference_model")) cfg.reference_model = parse_reference_model(*m);
    if (auto c = root.optional_child("controller")) {
        try {
            cfg.controller = c->json().get<ControllerStructure>();
        } catch (const std::exception& e) {
            c->fail(e.what());
        }
        if (auto cv = c->optional_child("cv_grid")) {
            cfg.cv_gammas = cv->numbers("gamma");
            if (cv->has("sigma")) cfg.cv_sigmas = cv->numbers("sigma");
        }
    }
    if (auto m = root.optional_child("mpc")) cfg.mpc = parse_mpc(*m);
    if (auto s = root.optional_child("scenario")) cfg.scenario = parse_scenario(*s);
    if (auto sw = root.optional_child("sweep")) {
        cfg.sweep_poles = sw->numbers("poles");
        for (std::size_t i = 0; i < cfg.sweep_poles.size(); ++i) {
            const double a = cfg.sweep_poles[i];
            if (!(a > 0.0 && a < 1.0)) throw SchemaError(sw->path() + "/poles/" + std::to_string(i), "pole must lie in (0, 1)");
        }
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path, "cannot open config file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path, std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

SampledSignal piecewise_constant(std::size_t length, const std::vector<std::pair<std::size_t, double>>& steps,
                                 double sample_period) {
    std::vector<double> v(length, 0.0);
    double level = 0.0;
    std::size_t next = 0;
    for (std::size_t t = 0; t < length; ++t) {
        while (next < steps.size() && steps[next].first <= t) level = steps[next++].second;
        v[t] = level;
    }
    return SampledSignal(std::move(v), sample_period);
}

std::optional<SampledSignal> scenario_switching(const PipelineConfig& cfg) {
    if (cfg.plant.kind != PlantKind::SwitchedRc) return std::nullopt;
    if (!cfg.scenario.switch_steps.empty()) {
        return piecewise_constant(cfg.scenario.length, cfg.scenario.switch_steps, cfg.sample_period);
    }
    return generate_switching(cfg.scenario.length, cfg.experiment.switching.hold_length, cfg.sample_period,
                              cfg.seed + 5, cfg.experiment.switching.on_probability);
}

std::unique_ptr<Plant> make_plant(const PipelineConfig& cfg, const std::optional<SampledSignal>& switch_signal) {
    switch (cfg.plant.kind) {
    case PlantKind::DcMotor:
        return std::make_unique<DcMotor>(cfg.plant.motor, cfg.sample_period, cfg.plant.motor_initial);
    case PlantKind::SwitchedRc:
        if (!switch_signal) throw std::invalid_argument("switched RC plant needs a switch signal");
        return std::make_unique<SwitchedRc>(cfg.plant.rc, *switch_signal);
    case PlantKind::FirstOrder:
        return std::make_unique<FirstOrderPlant>(cfg.plant.first_order_a, cfg.plant.first_order_b, cfg.sample_period);
    }
    throw std::logic_error("unknown plant kind");
}

SampledSignal scenario_reference(const PipelineConfig& cfg) {
    return piecewise_constant(cfg.scenario.length, cfg.scenario.steps, cfg.sample_period);
}

SchedulingSource scenario_scheduling(const PipelineConfig& cfg, const std::optional<SampledSignal>& switch_signal) {
    if (cfg.plant.kind == PlantKind::SwitchedRc) {
        if (!switch_signal) throw std::invalid_argument("switched RC scenario needs a switch signal");
        return SchedulingSource::exogenous(*switch_signal);
    }
    return SchedulingSource::measured_output();
}

LoopOptions scenario_loop_options(const PipelineConfig& cfg) { return {cfg.scenario.noise_std, cfg.seed + 4, 1e6}; }

StateSourceKind scenario_state_source(const PipelineConfig& cfg) {
    if (cfg.scenario.estimator == "direct") return StateSourceKind::Direct;
    if (cfg.scenario.estimator == "pass_through") return StateSourceKind::PassThrough;
    return StateSourceKind::Kalman;
}

KalmanTuning scenario_kalman_tuning(const PipelineConfig& cfg, Eigen::Index state_dim) {
    KalmanTuning t;
    if (cfg.scenario.kf_q) t.Q = *cfg.scenario.kf_q * Eigen::MatrixXd::Identity(state_dim, state_dim);
    if (cfg.scenario.kf_r) t.R = Eigen::Vector2d(cfg.scenario.kf_r->first, cfg.scenario.kf_r->second).asDiagonal();
    return t;
}

CollectedLogs collect_logs(const PipelineConfig& cfg) {
    const auto& e = cfg.experiment;
    const std::size_t n = e.n_train + e.n_validation;
    ExcitationSpec spec = e.excitation;
    spec.seed = cfg.seed;
    const SampledSignal u = generate_excitation(spec, n, cfg.sample_period);

    ExperimentLog full = [&] {
        switch (cfg.plant.kind) {
        case PlantKind::DcMotor: {
            const DcMotor motor(cfg.plant.motor, cfg.sample_period, cfg.plant.motor_initial);
            return simulate_dc_motor(motor, u, e.snr_db.value_or(kInf), cfg.seed + 1);
        }
        case PlantKind::SwitchedRc: {
            const auto s = generate_switching(n, e.switching.hold_length, cfg.sample_period, cfg.seed + 3,
                                              e.switching.on_probability);
            return simulate_switched_rc(cfg.plant.rc, u, s, e.noise_std, cfg.seed + 1);
        }
        case PlantKind::FirstOrder:
            break;
        }
        const FirstOrderPlant plant(cfg.plant.first_order_a, cfg.plant.first_order_b, cfg.sample_period);
        return simulate_open_loop(plant, u, e.noise_std, cfg.seed + 1);
    }();

    // Instrument: same input and plant trajectory, independent noise.
    ExperimentLog repeat = [&] {
        switch (cfg.plant.kind) {
        case PlantKind::DcMotor: {
            const DcMotor motor(cfg.plant.motor, cfg.sample_period, cfg.plant.motor_initial);
            return repeat_experiment(motor, u, e.snr_db.value_or(kInf), cfg.seed + 2);
        }
        case PlantKind::SwitchedRc:
            return simulate_switched_rc(cfg.plant.rc, u, full.p(), e.noise_std, cfg.seed + 2);
        case PlantKind::FirstOrder:
            break;
        }
        const FirstOrderPlant plant(cfg.plant.first_order_a, cfg.plant.first_order_b, cfg.sample_period);
        return simulate_open_loop(plant, u, e.noise_std, cfg.seed + 2);
    }();

    CollectedLogs out{slice(full, 0, e.n_train), slice(repeat, 0, e.n_train),
                      e.n_validation > 0 ? slice(full, e.n_train, n) : slice(full, 0, e.n_train)};
    return out;
}

} // namespace lpvdd
