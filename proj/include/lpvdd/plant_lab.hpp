#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvdd/signals.hpp"

namespace lpvdd {

/// Non-finite or runaway plant state; `index` is the first offending sample.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t index) : std::runtime_error(what), index(index) {}
    std::size_t index;
};

/// Sampled-data plant advanced one controller period at a time under zero-order hold.
class Plant {
public:
    virtual ~Plant() = default;

    /// Noise-free output at the current sample.
    [[nodiscard]] virtual double output() const = 0;
    /// Apply input u over [t, t+1) and advance to sample t+1.
    virtual void step(double u, std::size_t t) = 0;
    [[nodiscard]] virtual double sample_period() const = 0;
    [[nodiscard]] virtual std::unique_ptr<Plant> clone() const = 0;
};

/// Physical constants of the servo with an eccentric mass (SI units, current in A).
struct DcMotorParams {
    double R = 9.5;
    double L = 0.84e-3;
    double K = 53.6e-3;
    double J = 2.2e-4;
    double b = 6.6e-5;
    double m = 0.07;
    double l = 0.042;
    double g_accel = 9.81;

    void validate() const;
};

/**
 * Quasi-LPV DC motor
 *
 *   theta' = (1 + sinc(theta)) omega
 *   omega' = (m g l / J) sinc(theta) theta - (b/J) omega + (K/J) I
 *   I'     = -(K/L) omega - (R/L) I + V/L
 *
 * integrated with fixed-step RK4. Output is theta.
 */
class DcMotor final : public Plant {
public:
    using State = std::array<double, 3>; // theta [rad], omega [rad/s], I [A]

    explicit DcMotor(DcMotorParams params = {}, double sample_period = 0.01, State initial = {0.0, 0.0, 0.0});

    [[nodiscard]] double output() const override { return state_[0]; }
    void step(double u, std::size_t t) override;
    [[nodiscard]] double sample_period() const override { return sample_period_; }
    [[nodiscard]] std::unique_ptr<Plant> clone() const override { return std::make_unique<DcMotor>(*this); }

    [[nodiscard]] const State& state() const noexcept { return state_; }
    [[nodiscard]] const DcMotorParams& params() const noexcept { return params_; }
    [[nodiscard]] int substeps() const noexcept { return substeps_; }
    /// Overrides the number of RK4 steps per sample (convergence studies).
    void set_substeps(int n);

    [[nodiscard]] State derivative(const State& x, double voltage) const;

private:
    DcMotorParams params_;
    double sample_period_;
    State state_;
    int substeps_;
};

/// sin(x)/x with the series fallback 1 - x^2/6 for |x| < 1e-6.
double sinc(double x);

/// Default substep count: at least 20, and step no longer than L/R.
int default_motor_substeps(const DcMotorParams& params, double sample_period);

/// First-order load whose pole and gain are selected by a Boolean switch.
struct SwitchedRcParams {
    double a_on = 0.80;
    double b_on = 0.20;
    double a_off = 0.95;
    double b_off = 0.05;

    void validate() const;
};

class SwitchedRc final : public Plant {
public:
    SwitchedRc(SwitchedRcParams params, SampledSignal switch_signal, double initial = 0.0);

    [[nodiscard]] double output() const override { return y_; }
    void step(double u, std::size_t t) override;
    [[nodiscard]] double sample_period() const override { return switch_.sample_period(); }
    [[nodiscard]] std::unique_ptr<Plant> clone() const override { return std::make_unique<SwitchedRc>(*this); }

    [[nodiscard]] const SampledSignal& switch_signal() const noexcept { return switch_; }
    [[nodiscard]] const SwitchedRcParams& params() const noexcept { return params_; }

private:
    SwitchedRcParams params_;
    SampledSignal switch_;
    double y_;
};

struct ExcitationSpec {
    enum class Kind { FilteredGaussian, PiecewiseConstant };

    Kind kind = Kind::FilteredGaussian;
    double std = 1.0;
    double mean = 0.0;
    double filter_cutoff_hz = 1.0;
    std::size_t hold_length = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The white Gaussian draws (before filtering/holding) behind generate_excitation.
std::vector<double> excitation_draws(const ExcitationSpec& spec, std::size_t n);

/// Filtered white noise (one-pole low-pass, unity DC gain) or held Gaussian levels.
SampledSignal generate_excitation(const ExcitationSpec& spec, std::size_t n, double sample_period);

/// Boolean (0/1) signal holding random levels for `hold_length` samples.
SampledSignal generate_switching(std::size_t n, std::size_t hold_length, double sample_period, std::uint64_t seed,
                                 double on_probability = 0.5);

/// Clean output y(0..N-1) of a plant driven by u (y(t) is sampled before u(t) is applied).
std::vector<double> simulate_clean(Plant& plant, const SampledSignal& u);

/// Standard deviation giving 10 log10(var(clean)/var(noise)) = snr_db (0 when snr_db is +inf).
double noise_std_for_snr(const std::vector<double>& clean, double snr_db);

/// Adds zero-mean Gaussian noise of the given standard deviation.
std::vector<double> add_noise(const std::vector<double>& clean, double noise_std, std::uint64_t seed);

/// Open-loop experiment on the motor; p is the measured (noisy) output.
ExperimentLog simulate_dc_motor(DcMotor plant, const SampledSignal& u, double snr_db, std::uint64_t seed);

/// Same input and plant trajectory, independent noise realization (instrument log).
ExperimentLog repeat_experiment(const DcMotor& plant, const SampledSignal& u, double snr_db, std::uint64_t seed2);

/// Open-loop experiment on the switched load; p is the switch signal.
ExperimentLog simulate_switched_rc(SwitchedRc plant, const SampledSignal& u, double noise_std, std::uint64_t seed);
ExperimentLog simulate_switched_rc(const SwitchedRcParams& params, const SampledSignal& u, const SampledSignal& s,
                                   double noise_std, std::uint64_t seed);

/**
 * First-order LTI plant y(t+1) = a y(t) + b u(t), used as a fixture whose
 * model-matching controller is known in closed form.
 */
class FirstOrderPlant final : public Plant {
public:
    FirstOrderPlant(double a, double b, double sample_period, double initial = 0.0)
        : a_(a), b_(b), sample_period_(sample_period), y_(initial) {}

    [[nodiscard]] double output() const override { return y_; }
    void step(double u, std::size_t) override { y_ = a_ * y_ + b_ * u; }
    [[nodiscard]] double sample_period() const override { return sample_period_; }
    [[nodiscard]] std::unique_ptr<Plant> clone() const override { return std::make_unique<FirstOrderPlant>(*this); }

private:
    double a_, b_, sample_period_, y_;
};

/// Open-loop experiment on any plant with additive output noise; p = noisy y or a given signal.
ExperimentLog simulate_open_loop(const Plant& plant, const SampledSignal& u, double noise_std, std::uint64_t seed,
                                 const SampledSignal* scheduling = nullptr);

} // namespace lpvdd
