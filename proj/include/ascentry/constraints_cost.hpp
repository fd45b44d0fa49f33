#pragma once

// Running cost, the phugoid penalty and pointwise path quantities.

#include <ascentry/dynamics.hpp>
#include <ascentry/errors.hpp>

#include <cmath>
#include <limits>

namespace ascentry {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct PathLimits {
    double n_max = 12.0;         // g
    double q_max = 126.3;        // kPa
    double q_min = 12.0;         // kPa
    double Qdot_max = infinity;  // MW/m^2
    double Q_max = infinity;     // MJ/m^2
    double h_atm = 80.0;         // km
    double h_peak_min = 100.0;   // km
    double h_peak_max = 200.0;   // km

    void validate() const {
        for (double f : {n_max, q_max, q_min, Qdot_max, Q_max, h_atm, h_peak_min, h_peak_max})
            if (!(f > 0.0))
                throw ConfigError("PathLimits: every limit must be positive");
        if (!(q_min < q_max))
            throw ConfigError("PathLimits: q_min must be below q_max");
        if (!(h_peak_min < h_peak_max))
            throw ConfigError("PathLimits: h_peak_min must be below h_peak_max");
    }
};

struct PathEval {
    double q = 0.0;     // kPa
    double n = 0.0;     // g
    double Qdot = 0.0;  // MW/m^2
    double L = 0.0;     // kN
    double D = 0.0;     // kN
    double mach = 0.0;
};

/// Chapman stagnation-point heating. kappa is already in MW/m^2, so the
/// result needs no further unit factor.
inline double heating_rate(double rho, double v, const EarthConstants& e) {
    return e.kappa * std::sqrt(rho / e.rho0) * std::pow(v / e.v_c, 3.15);
}

/// Sensed acceleration in g: sqrt(L^2 + D^2) / (m g0), with kN / kg = km/s^2.
inline double sensed_acceleration(double L, double D, double mass, const EarthConstants& e) {
    return std::hypot(L, D) / (mass * e.g0);
}

inline PathEval path_quantities(double h, double v, double alpha, double mass, const PhaseContext& ctx) {
    if (!(v > 0.0))
        throw DomainError("path_quantities: speed must be positive");
    if (!ctx.atmosphere)
        throw ContractError("path_quantities: context has no atmosphere");
    const auto f = aero_forces(h, v, alpha, ctx);
    PathEval p;
    p.q = f.q;
    p.L = f.L;
    p.D = f.D;
    p.mach = f.mach;
    p.n = sensed_acceleration(f.L, f.D, mass, ctx.earth);
    p.Qdot = heating_rate(f.rho, v, ctx.earth);
    return p;
}

inline PathEval path_quantities(const GeoState& s, const PhaseContext& ctx) {
    return path_quantities(s.h, s.v, s.alpha, detail::mass_of(s.m, ctx), ctx);
}

inline PathEval path_quantities(const VertState& s, const PhaseContext& ctx) {
    return path_quantities(s.h, s.v, s.alpha, detail::mass_of(s.m, ctx), ctx);
}

/// Normalisation that makes the penalty reach 1 at sin(gamma) = +-1.
inline double phugoid_constant(double k) {
    if (!(k > 0.0))
        throw DomainError("phugoid penalty: k must be positive");
    const double ek = std::exp(-k);
    return 2.0 * (1.0 + ek) / (1.0 - ek);
}

/// Sigmoid penalty on sin(gamma): 0 in level flight, 1 when vertical.
inline double phugoid_penalty(double sin_gamma, double k, double C) {
    if (!(k > 0.0))
        throw DomainError("phugoid penalty: k must be positive");
    const double s = C / (1.0 + std::exp(-k * sin_gamma)) - 0.5 * C;
    return s * s;
}

inline double phugoid_penalty(double sin_gamma, double k) {
    return phugoid_penalty(sin_gamma, k, phugoid_constant(k));
}

/**
 * Weights of the control-margin integrand. `include_alpha_term` is false in
 * the coast phases; k > 0 switches on the phugoid penalty (final entry phase).
 */
struct CostParams {
    double alpha_bar = 0.0;           // rad
    double alpha_max = 25.0 * deg;    // rad
    double u_alpha_max = 10.0 * deg;  // rad/s
    double u_sigma_max = 30.0 * deg;  // rad/s
    bool include_alpha_term = true;
    double k = 0.0;
    double C = 0.0;

    /// Sets k and the matching C (k = 0 disables the penalty).
    CostParams& with_penalty(double k_value) {
        k = k_value;
        C = k_value > 0.0 ? phugoid_constant(k_value) : 0.0;
        return *this;
    }

    void validate() const {
        if (!(alpha_max > 0.0) || !(u_alpha_max > 0.0) || !(u_sigma_max > 0.0))
            throw ConfigError("CostParams: alpha_max, u_alpha_max, u_sigma_max must be positive");
        if (!(k >= 0.0))
            throw ConfigError("CostParams: k must be non-negative");
        if (k > 0.0 && std::abs(C - phugoid_constant(k)) > 1e-12)
            throw ConfigError("CostParams: C does not match k");
    }
};

/// Integrand in 1/s units of time: alpha margin, alpha-rate and bank-rate terms.
inline double running_cost(double alpha, double u_alpha, double u_bank, double sin_gamma,
                           const CostParams& p) {
    double L = 0.0;
    if (p.include_alpha_term) {
        const double a = (alpha - p.alpha_bar) / p.alpha_max;
        L += a * a;
    }
    const double ua = u_alpha / p.u_alpha_max;
    const double us = u_bank / p.u_sigma_max;
    L += ua * ua + us * us;
    if (p.k > 0.0)
        L += phugoid_penalty(sin_gamma, p.k, p.C);
    return L;
}

inline double running_cost(const GeoState& s, const GeoControl& u, const CostParams& p) {
    return running_cost(s.alpha, u.u_alpha, u.u_sigma, std::sin(s.gamma), p);
}

/// Vertical formulation: omega_1 stands in for the bank rate.
inline double running_cost(const VertState& s, const VertControl& u, const CostParams& p) {
    const double sin_gamma = 1.0 - 2.0 * (s.e2 * s.e2 + s.e3 * s.e3);
    return running_cost(s.alpha, u.u_alpha, u.w1, sin_gamma, p);
}

} // namespace ascentry
