#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "lpvdd/inner_synth.hpp"
#include "lpvdd/plant_lab.hpp"
#include "lpvdd/refmodel.hpp"
#include "lpvdd/signals.hpp"

namespace fx {

using namespace lpvdd;

// Polynomials in q^-1, lowest power first.
using Poly = std::vector<double>;

inline Poly mul(const Poly& a, const Poly& b) {
    Poly r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline Poly sub(Poly a, const Poly& b) {
    a.resize(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] -= b[i];
    return a;
}

struct Tf {
    Poly num, den;
};

// Ideal model-matching controller K = M / (G (1 - M)), common q^-1 factors removed, den[0] = 1.
inline Tf matching_controller(const Tf& G, const Tf& M) {
    Poly num = mul(M.num, G.den);
    Poly den = mul(G.num, sub(M.den, M.num));
    while (!num.empty() && !den.empty() && std::abs(num.front()) < 1e-15 && std::abs(den.front()) < 1e-15) {
        num.erase(num.begin());
        den.erase(den.begin());
    }
    const double d0 = den.front();
    for (auto& c : num) c /= d0;
    for (auto& c : den) c /= d0;
    while (!den.empty() && std::abs(den.back()) < 1e-15) den.pop_back();
    while (!num.empty() && std::abs(num.back()) < 1e-15) num.pop_back();
    return {num, den};
}

// G = 0.1 q^-1 / (1 - 0.9 q^-1), M = 0.2 q^-1 / (1 - 0.8 q^-1).
inline Tf lti_plant_tf() { return {{0.0, 0.1}, {1.0, -0.9}}; }
inline Tf lti_model_tf() { return {{0.0, 0.2}, {1.0, -0.8}}; }
inline LpvStateSpace lti_model() { return LpvStateSpace::first_order(0.8, 0.2); }
inline FirstOrderPlant lti_plant(double ts = 1.0) { return FirstOrderPlant(0.9, 0.1, ts); }

inline ControllerStructure lti_structure(double gamma = 1e9) {
    ControllerStructure s;
    s.n_a = 1;
    s.n_b = 1;
    s.gamma = gamma;
    return s;
}

// Constant-coefficient controller with theta = [a_1..a_na, b_0..b_nb].
inline InnerControllerModel constant_controller(const ControllerStructure& s, const std::vector<double>& theta,
                                                const LpvStateSpace& M) {
    return InnerControllerModel(s, Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())),
                                {}, M);
}

// The exact matching controller of the LTI fixture: u = u(t-1) + 2 e(t) - 1.8 e(t-1).
inline InnerControllerModel lti_pi_controller(const LpvStateSpace& M = lti_model()) {
    return constant_controller(lti_structure(), {-1.0, 2.0, -1.8}, M);
}

inline SampledSignal white(std::size_t n, double std, std::uint64_t seed, double ts = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, std);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return SampledSignal(v, ts);
}

inline SampledSignal uniform(std::size_t n, double lo, double hi, std::uint64_t seed, double ts = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return SampledSignal(v, ts);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const SampledSignal& a, const SampledSignal& b) {
    return max_abs_diff(a.values_or_nan(), b.values_or_nan());
}

} // namespace fx
