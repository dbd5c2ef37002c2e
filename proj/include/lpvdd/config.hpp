#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpvdd/closed_loop.hpp"
#include "lpvdd/inner_synth.hpp"
#include "lpvdd/mpc.hpp"
#include "lpvdd/plant_lab.hpp"
#include "lpvdd/refmodel.hpp"

namespace lpvdd {

inline constexpr int kSchemaVersion = 1;

/// Config violation; the message starts with the JSON path of the offending field.
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path(path) {}
    std::string path;
};

/// Read-only view of one JSON node that remembers its path for diagnostics.
class ConfigNode {
public:
    ConfigNode(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    [[nodiscard]] bool has(const std::string& key) const;
    [[nodiscard]] ConfigNode child(const std::string& key) const;
    [[nodiscard]] std::optional<ConfigNode> optional_child(const std::string& key) const;
    [[nodiscard]] ConfigNode at(std::size_t i) const;
    [[nodiscard]] std::size_t size() const;

    [[nodiscard]] double number(const std::string& key) const;
    [[nodiscard]] double number(const std::string& key, double fallback) const;
    [[nodiscard]] std::int64_t integer(const std::string& key) const;
    [[nodiscard]] std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    [[nodiscard]] std::string string(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] std::vector<double> numbers(const std::string& key) const;

    [[nodiscard]] const nlohmann::json& json() const noexcept { return *j_; }
    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[noreturn]] void fail(const std::string& what) const { throw SchemaError(path_, what); }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw SchemaError(path_ + "/" + key, what);
    }

private:
    [[nodiscard]] const nlohmann::json& field(const std::string& key) const;

    const nlohmann::json* j_;
    std::string path_;
};

enum class PlantKind { DcMotor, SwitchedRc, FirstOrder };

struct PlantConfig {
    PlantKind kind = PlantKind::DcMotor;
    DcMotorParams motor{};
    DcMotor::State motor_initial{0.0, 0.0, 0.0};
    SwitchedRcParams rc{};
    double first_order_a = 0.9;
    double first_order_b = 0.1;
};

struct SwitchingConfig {
    std::size_t hold_length = 50;
    double on_probability = 0.5;
};

struct ExperimentConfig {
    ExcitationSpec excitation{};
    std::size_t n_train = 1500;
    std::size_t n_validation = 500;
    std::optional<double> snr_db;   ///< DC motor noise level
    double noise_std = 0.0;         ///< other plants
    SwitchingConfig switching{};
};

struct ScenarioConfig {
    std::size_t length = 1000;
    std::vector<std::pair<std::size_t, double>> steps;   ///< (sample, value), held until the next step
    std::vector<std::pair<std::size_t, double>> switch_steps;
    double noise_std = 0.0;
    std::string estimator = "kalman";  ///< kalman | direct | pass_through
    std::optional<double> kf_q;
    std::optional<std::pair<double, double>> kf_r;
};

struct PipelineConfig {
    double sample_period = 0.01;
    std::uint64_t seed = 1;
    PlantConfig plant{};
    ExperimentConfig experiment{};
    LpvStateSpace reference_model = LpvStateSpace::first_order(0.99, 0.01);
    ControllerStructure controller{};
    std::vector<double> cv_gammas;
    std::vector<double> cv_sigmas;
    MpcConfig mpc{};
    ScenarioConfig scenario{};
    std::vector<double> sweep_poles;
};

/// Parses and validates a pipeline config; throws SchemaError with a path on any violation.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

/// Piecewise-constant signal from (sample, value) steps; value before the first step is 0.
SampledSignal piecewise_constant(std::size_t length, const std::vector<std::pair<std::size_t, double>>& steps,
                                 double sample_period);

/// Plant instance for closed-loop runs (switch signal needed for the switched RC plant).
std::unique_ptr<Plant> make_plant(const PipelineConfig& cfg, const std::optional<SampledSignal>& switch_signal);

/// Scenario switch schedule (switched RC only): explicit steps, or a seeded random signal.
std::optional<SampledSignal> scenario_switching(const PipelineConfig& cfg);

/// Scenario reference r (piecewise constant).
SampledSignal scenario_reference(const PipelineConfig& cfg);
/// Switch signal for the switched RC plant, measured output otherwise.
SchedulingSource scenario_scheduling(const PipelineConfig& cfg, const std::optional<SampledSignal>& switch_signal);
/// Closed-loop measurement noise (seeded from cfg.seed).
LoopOptions scenario_loop_options(const PipelineConfig& cfg);
StateSourceKind scenario_state_source(const PipelineConfig& cfg);
KalmanTuning scenario_kalman_tuning(const PipelineConfig& cfg, Eigen::Index state_dim);

struct CollectedLogs {
    ExperimentLog train;
    ExperimentLog instrument;
    ExperimentLog validation;
};

/// Open-loop data collection per the experiment block (seeded from cfg.seed).
CollectedLogs collect_logs(const PipelineConfig& cfg);

} // namespace lpvdd
