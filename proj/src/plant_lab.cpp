#include "lpvdd/plant_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace lpvdd {

namespace {

double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size());
}

} // namespace

double sinc(double x) {
    if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

void DcMotorParams::validate() const {
    for (double v : {R, L, K, J, b, m, l, g_accel}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("DC motor parameters must be positive");
    }
}

int default_motor_substeps(const DcMotorParams& params, double sample_period) {
    const double electrical = params.L / params.R;
    return std::max(20, static_cast<int>(std::ceil(sample_period / electrical)));
}

DcMotor::DcMotor(DcMotorParams params, double sample_period, State initial)
    : params_(params), sample_period_(sample_period), state_(initial),
      substeps_(default_motor_substeps(params, sample_period)) {
    params_.validate();
    if (!(sample_period > 0.0)) throw std::invalid_argument("sample period must be positive");
}

void DcMotor::set_substeps(int n) {
    if (n < 1) throw std::invalid_argument("substeps must be positive");
    substeps_ = n;
}

DcMotor::State DcMotor::derivative(const State& x, double voltage) const {
    const auto& p = params_;
    const double s = sinc(x[0]);
    return {(1.0 + s) * x[1],
            p.m * p.g_accel * p.l / p.J * s * x[0] - p.b / p.J * x[1] + p.K / p.J * x[2],
            -p.K / p.L * x[1] - p.R / p.L * x[2] + voltage / p.L};
}

void DcMotor::step(double u, std::size_t t) {
    const double h = sample_period_ / substeps_;
    auto axpy = [](const State& x, double a, const State& k) {
        return State{x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2]};
    };
    State x = state_;
    for (int i = 0; i < substeps_; ++i) {
        const State k1 = derivative(x, u);
        const State k2 = derivative(axpy(x, h / 2, k1), u);
        const State k3 = derivative(axpy(x, h / 2, k2), u);
        const State k4 = derivative(axpy(x, h, k3), u);
        for (int j = 0; j < 3; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
        throw DivergenceError("DC motor state became non-finite", t + 1);
    }
    state_ = x;
}

void SwitchedRcParams::validate() const {
    for (double a : {a_on, a_off}) {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("switched RC poles must lie in (0, 1)");
    }
}

SwitchedRc::SwitchedRc(SwitchedRcParams params, SampledSignal switch_signal, double initial)
    : params_(params), switch_(std::move(switch_signal)), y_(initial) {
    params_.validate();
}

void SwitchedRc::step(double u, std::size_t t) {
    const bool on = switch_.value(std::min(t, switch_.size() - 1)) > 0.5;
    y_ = (on ? params_.a_on : params_.a_off) * y_ + (on ? params_.b_on : params_.b_off) * u;
}

void ExcitationSpec::validate() const {
    if (!(std >= 0.0)) throw std::invalid_argument("excitation std must be nonnegative");
    if (kind == Kind::FilteredGaussian && !(filter_cutoff_hz > 0.0)) {
        throw std::invalid_argument("filtered excitation requires a positive cutoff");
    }
    if (kind == Kind::PiecewiseConstant && hold_length == 0) {
        throw std::invalid_argument("hold length must be at least one sample");
    }
}

std::vector<double> excitation_draws(const ExcitationSpec& spec, std::size_t n) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t count =
        spec.kind == ExcitationSpec::Kind::PiecewiseConstant ? (n + spec.hold_length - 1) / spec.hold_length : n;
    std::vector<double> draws(count);
    for (auto& d : draws) d = spec.std * normal(rng);
    return draws;
}

SampledSignal generate_excitation(const ExcitationSpec& spec, std::size_t n, double sample_period) {
    if (n == 0) throw std::invalid_argument("excitation length must be at least one sample");
    const auto draws = excitation_draws(spec, n);
    std::vector<double> out(n);
    if (spec.kind == ExcitationSpec::Kind::FilteredGaussian) {
        const double pole = std::exp(-2.0 * std::numbers::pi * spec.filter_cutoff_hz * sample_period);
        double state = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            state = pole * state + (1.0 - pole) * draws[t];
            out[t] = spec.mean + state;
        }
    } else {
        for (std::size_t t = 0; t < n; ++t) out[t] = spec.mean + draws[t / spec.hold_length];
    }
    return SampledSignal(std::move(out), sample_period);
}

SampledSignal generate_switching(std::size_t n, std::size_t hold_length, double sample_period, std::uint64_t seed,
                                 double on_probability) {
    if (n == 0 || hold_length == 0) throw std::invalid_argument("switch signal needs positive length and hold");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(on_probability);
    std::vector<double> out(n);
    double level = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t % hold_length == 0) level = coin(rng) ? 1.0 : 0.0;
        out[t] = level;
    }
    return SampledSignal(std::move(out), sample_period);
}

std::vector<double> simulate_clean(Plant& plant, const SampledSignal& u) {
    std::vector<double> y(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        y[t] = plant.output();
        plant.step(u[t], t);
    }
    return y;
}

double noise_std_for_snr(const std::vector<double>& clean, double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return std::sqrt(variance(clean) / std::pow(10.0, snr_db / 10.0));
}

std::vector<double> add_noise(const std::vector<double>& clean, double noise_std, std::uint64_t seed) {
    if (noise_std == 0.0) return clean;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_std);
    std::vector<double> out(clean.size());
    for (std::size_t t = 0; t < clean.size(); ++t) out[t] = clean[t] + normal(rng);
    return out;
}

ExperimentLog simulate_dc_motor(DcMotor plant, const SampledSignal& u, double snr_db, std::uint64_t seed) {
    const auto clean = simulate_clean(plant, u);
    const auto noisy = add_noise(clean, noise_std_for_snr(clean, snr_db), seed);
    const double ts = u.sample_period();
    return ExperimentLog(u, SampledSignal(noisy, ts, u.start_index()), SampledSignal(noisy, ts, u.start_index()));
}

ExperimentLog repeat_experiment(const DcMotor& plant, const SampledSignal& u, double snr_db, std::uint64_t seed2) {
    return simulate_dc_motor(plant, u, snr_db, seed2);
}

ExperimentLog simulate_switched_rc(SwitchedRc plant, const SampledSignal& u, double noise_std, std::uint64_t seed) {
    if (plant.switch_signal().size() != u.size()) throw ShapeError("switch signal and input differ in length");
    const auto clean = simulate_clean(plant, u);
    const auto noisy = add_noise(clean, noise_std, seed);
    const double ts = u.sample_period();
    return ExperimentLog(u, SampledSignal(noisy, ts, u.start_index()), plant.switch_signal());
}

ExperimentLog simulate_switched_rc(const SwitchedRcParams& params, const SampledSignal& u, const SampledSignal& s,
                                   double noise_std, std::uint64_t seed) {
    return simulate_switched_rc(SwitchedRc(params, s), u, noise_std, seed);
}

ExperimentLog simulate_open_loop(const Plant& plant, const SampledSignal& u, double noise_std, std::uint64_t seed,
                                 const SampledSignal* scheduling) {
    auto sim = plant.clone();
    const auto clean = simulate_clean(*sim, u);
    const auto noisy = add_noise(clean, noise_std, seed);
    const double ts = u.sample_period();
    SampledSignal y(noisy, ts, u.start_index());
    if (scheduling) {
        if (scheduling->size() != u.size()) throw ShapeError("scheduling signal and input differ in length");
        return ExperimentLog(u, y, *scheduling);
    }
    return ExperimentLog(u, y, y);
}

} // namespace lpvdd
