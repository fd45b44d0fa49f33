#pragma once

// Small optimal control problems with closed-form optima, used to validate the
// transcription, solver and refinement loop end to end.

#include <ascentry/errors.hpp>
#include <ascentry/transcription.hpp>

#include <json.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ascentry::benchmarks {

/// min int u^2, x' = u, x(0) = 0, x(1) = 1. Optimum u = 1, J = 1.
inline MultiPhaseProblem single_integrator() {
    PhaseSpec p;
    p.name = "single_integrator";
    p.state_names = {"x"};
    p.control_names = {"u"};
    p.state_bounds = {Bounds::free()};
    p.control_bounds = {Bounds{-10.0, 10.0}};
    p.initial_state = {Bounds::fixed(0.0)};
    p.final_state = {Bounds::fixed(1.0)};
    p.t0 = Bounds::fixed(0.0);
    p.tf = Bounds::fixed(1.0);
    p.dynamics = [](double, std::span<const double>, std::span<const double> u, std::span<double> dx) { dx[0] = u[0]; };
    p.integrand_names = {"effort"};
    p.integrands = [](double, std::span<const double>, std::span<const double> u, std::span<double> out) {
        out[0] = u[0] * u[0];
    };
    MultiPhaseProblem prob;
    prob.phases = {p};
    prob.integrals = {IntegralSpec{"J", {{0, 0}}, {}, 1.0, 1.0}};
    return prob;
}

/// Rest-to-rest move from x0 to xf in time T with minimum int u^2.
struct DoubleIntegrator {
    double x0 = 0.0;
    double xf = 1.0;
    double duration = 1.0;

    // Analytic optimum: cubic position, linear control.
    double position(double t) const {
        const double s = t / duration;
        return x0 + (xf - x0) * s * s * (3.0 - 2.0 * s);
    }
    double velocity(double t) const {
        const double s = t / duration;
        return (xf - x0) / duration * 6.0 * s * (1.0 - s);
    }
    double control(double t) const {
        const double s = t / duration;
        return (xf - x0) / (duration * duration) * (6.0 - 12.0 * s);
    }
    double cost() const { return 12.0 * (xf - x0) * (xf - x0) / (duration * duration * duration); }

    MultiPhaseProblem problem() const {
        if (!(duration > 0.0))
            throw ConfigError("double integrator: duration must be positive");
        PhaseSpec p;
        p.name = "double_integrator";
        p.state_names = {"x", "v"};
        p.control_names = {"u"};
        p.state_bounds = {Bounds::free(), Bounds::free()};
        const double umax = 100.0 * std::abs(control(0.0)) + 1.0;
        p.control_bounds = {Bounds{-umax, umax}};
        p.initial_state = {Bounds::fixed(x0), Bounds::fixed(0.0)};
        p.final_state = {Bounds::fixed(xf), Bounds::fixed(0.0)};
        p.t0 = Bounds::fixed(0.0);
        p.tf = Bounds::fixed(duration);
        p.dynamics = [](double, std::span<const double> x, std::span<const double> u, std::span<double> dx) {
            dx[0] = x[1];
            dx[1] = u[0];
        };
        p.integrand_names = {"effort"};
        p.integrands = [](double, std::span<const double>, std::span<const double> u, std::span<double> out) {
            out[0] = u[0] * u[0];
        };
        MultiPhaseProblem prob;
        prob.phases = {p};
        prob.integrals = {IntegralSpec{"J", {{0, 0}}, {}, 1.0, 1.0}};
        return prob;
    }

    /// Straight-line position, zero velocity and control.
    std::vector<TranscribedNLP::PhaseGuess> guess() const {
        const double a = x0, b = xf, T = duration;
        return {{0.0, T, [a, b, T](double t, std::span<double> x, std::span<double> u) {
                     x[0] = a + (b - a) * t / T;
                     x[1] = 0.0;
                     u[0] = 0.0;
                 }}};
    }
};

/// x' = x, x(0) = 1 on [0, 1]: no controls, solution e^t.
inline MultiPhaseProblem exponential() {
    PhaseSpec p;
    p.name = "exponential";
    p.state_names = {"x"};
    p.state_bounds = {Bounds::free()};
    p.initial_state = {Bounds::fixed(1.0)};
    p.t0 = Bounds::fixed(0.0);
    p.tf = Bounds::fixed(1.0);
    p.dynamics = [](double, std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = x[0]; };
    MultiPhaseProblem prob;
    prob.phases = {p};
    return prob;
}

inline std::vector<TranscribedNLP::PhaseGuess> constant_guess(double t0, double tf, double value) {
    return {{t0, tf, [value](double, std::span<double> x, std::span<double> u) {
                 std::fill(x.begin(), x.end(), value);
                 std::fill(u.begin(), u.end(), 0.0);
             }}};
}

} // namespace ascentry::benchmarks
