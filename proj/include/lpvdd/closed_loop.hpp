#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvdd/inner_synth.hpp"
#include "lpvdd/mpc.hpp"
#include "lpvdd/plant_lab.hpp"
#include "lpvdd/realization.hpp"
#include "lpvdd/signals.hpp"

namespace lpvdd {

/// Where p(t) comes from during a closed-loop run.
struct SchedulingSource {
    enum class Kind { MeasuredOutput, Exogenous };
    Kind kind = Kind::MeasuredOutput;
    std::optional<SampledSignal> signal; ///< required for Exogenous

    static SchedulingSource measured_output() { return {}; }
    static SchedulingSource exogenous(SampledSignal s) { return {Kind::Exogenous, std::move(s)}; }
};

/// Closed loop left its admissible region; `partial` holds samples 0..index-1.
class ClosedLoopDivergence : public std::runtime_error {
public:
    ClosedLoopDivergence(const std::string& what, std::size_t index, std::optional<ExperimentLog> partial)
        : std::runtime_error(what), index(index), partial(std::move(partial)) {}
    std::size_t index;
    std::optional<ExperimentLog> partial;
};

struct LoopOptions {
    double noise_std = 0.0;     ///< additive Gaussian noise on the measured output
    std::uint64_t seed = 0;
    double divergence_limit = 1e6;
};

/**
 * Inner loop only: each sample reads y (plus noise), sets p, forms e = g - y,
 * runs controller_step and applies u to the plant.
 */
ExperimentLog run_inner_loop(Plant& plant, const InnerControllerModel& ctrl, const SampledSignal& g,
                             const SchedulingSource& scheduling, const LoopOptions& options = {},
                             std::vector<double>* clean_output = nullptr);

enum class StateSourceKind { Kalman, Direct, PassThrough };

struct KalmanTuning {
    std::optional<Eigen::MatrixXd> Q;
    std::optional<Eigen::Matrix2d> R;
};

struct HierarchicalResult {
    ExperimentLog log;
    SampledSignal g;
    std::vector<MpcDiagnostics> diagnostics;
    std::vector<double> clean_output; ///< noise-free plant output
};

/**
 * Full loop: estimate xi(t), choose g(t) with the governor, then the real
 * controller recursion turns g(t) into u(t). PassThrough sets g = r and skips
 * estimation and optimization.
 */
HierarchicalResult run_hierarchical(Plant& plant, const InnerControllerModel& ctrl, const AugmentedModel& augmented,
                                    const MpcConfig& config, const SampledSignal& r,
                                    const SchedulingSource& scheduling, const LoopOptions& options = {},
                                    StateSourceKind state_source = StateSourceKind::Kalman,
                                    const KalmanTuning& tuning = {});

struct SweepEntry {
    double pole;
    double cutoff_hz;
    std::optional<double> ms; ///< nullopt when the closed loop diverged (noise-free output vs model)
    std::size_t diverged_at = 0;
};

struct SweepScenario {
    ExperimentLog train;
    std::optional<ExperimentLog> instrument;
    SampledSignal g;
    SchedulingSource scheduling;
    LoopOptions options;
};

/// Builds a fresh plant for each sweep entry.
using PlantFactory = std::function<std::unique_ptr<Plant>()>;

/**
 * For each pole a: reference model (a, 1 - a), controller fit on the scenario
 * logs, inner loop on the scenario reference, MS against the model response.
 * Entries run concurrently, capped by LPVDD_THREADS.
 */
std::vector<SweepEntry> sensitivity_sweep(const PlantFactory& plant, const ControllerStructure& structure,
                                          const std::vector<double>& poles, const SweepScenario& scenario);

/// Thread cap from LPVDD_THREADS (default: hardware concurrency, at least 1).
unsigned sweep_threads();

} // namespace lpvdd
