#pragma once

// Three-degree-of-freedom point-mass motion over a rotating spherical Earth in
// two parameterizations: geodetic angles (gamma, psi, sigma) for non-vertical
// flight and Euler parameters for flight that starts or ends vertically.

#include <ascentry/errors.hpp>
#include <ascentry/models.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace ascentry {

struct GeoState {
    double h = 0.0;     // km
    double phi = 0.0;   // longitude, rad
    double theta = 0.0; // latitude, rad
    double v = 0.0;     // km/s
    double gamma = 0.0; // flight-path angle, rad
    double psi = 0.0;   // azimuth from north toward east, rad
    double alpha = 0.0; // rad
    double sigma = 0.0; // bank, rad
    std::optional<double> m; // kg, thrusting phases only
};

struct VertState {
    double h = 0.0;
    double phi = 0.0;
    double theta = 0.0;
    double v = 0.0;
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, eta = 1.0;
    double alpha = 0.0;
    std::optional<double> m;
};

struct GeoControl {
    double u_alpha = 0.0; // rad/s
    double u_sigma = 0.0; // rad/s
};

struct VertControl {
    double u_alpha = 0.0; // rad/s
    double w1 = 0.0;      // rad/s, roll rate about the velocity vector
    double u1 = 0.0;      // slack on the eps2 rate
    double u2 = 0.0;      // slack on the eps3 rate
};

struct AngularVelocity {
    double w1 = 0.0, w2 = 0.0, w3 = 0.0;
};

struct Quaternion {
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, eta = 1.0;

    double squared_norm() const { return e1 * e1 + e2 * e2 + e3 * e3 + eta * eta; }
};

struct FlightAngles {
    double gamma = 0.0, psi = 0.0, sigma = 0.0;
};

/// Per-phase vehicle and environment data. A null `aero` means no aerodynamic
/// forces (exo-atmospheric flight); zero thrust means unpowered.
struct PhaseContext {
    double thrust = 0.0;        // kN
    double isp = 0.0;           // s
    double area = 0.0;          // m^2
    double vehicle_mass = 0.0;  // kg, used when the state carries no mass
    const AeroTable* aero = nullptr;
    const AtmosphereTable* atmosphere = nullptr;
    EarthConstants earth{};

    void validate() const {
        if (thrust < 0.0)
            throw ContractError("PhaseContext: negative thrust");
        if (thrust > 0.0 && !(isp > 0.0))
            throw ContractError("PhaseContext: powered phase needs Isp > 0");
        if (aero && !atmosphere)
            throw ContractError("PhaseContext: aerodynamic phase needs an atmosphere");
    }

    /// Propellant flow magnitude, kg/s (kN / (s * km/s) = kg/s).
    double mass_flow() const { return thrust > 0.0 ? thrust / (isp * earth.g0) : 0.0; }
};

/// How omega_2/omega_3 are formed. `as_published` is the literal printed form;
/// `consistent` drops the thrust term from omega_2 and adds the local-frame
/// rotation about the vertical so the Euler-parameter flow agrees with the
/// geodetic equations.
enum class RateForm { consistent, as_published };

/// Aerodynamic state at one point. Dynamic pressure in kPa: with rho in kg/m^3
/// and v in km/s, rho*v^2/2 carries a factor 1e6 Pa = 1e3 kPa.
struct AeroForces {
    double rho = 0.0;  // kg/m^3
    double q = 0.0;    // kPa
    double mach = 0.0;
    double L = 0.0;    // kN
    double D = 0.0;    // kN
};

inline constexpr double kpa_per_rho_v2 = 1.0e3;

inline AeroForces aero_forces(double h, double v, double alpha, const PhaseContext& ctx) {
    AeroForces f;
    if (!ctx.atmosphere)
        return f;
    const auto atm = ctx.atmosphere->lookup(h);
    f.rho = atm.rho;
    f.q = 0.5 * atm.rho * v * v * kpa_per_rho_v2;
    f.mach = v / atm.a;
    if (ctx.aero) {
        const auto c = ctx.aero->lookup(alpha / deg, f.mach);
        f.L = f.q * ctx.area * c.CL;
        f.D = f.q * ctx.area * c.CD;
    }
    return f;
}

namespace detail {
inline double mass_of(const std::optional<double>& m, const PhaseContext& ctx) {
    const double mass = m ? *m : ctx.vehicle_mass;
    if (!(mass > 0.0))
        throw DomainError("dynamics: vehicle mass must be positive");
    return mass;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Geodetic formulation
// ---------------------------------------------------------------------------

/// Time derivative of a GeoState; `m` is set iff the state carries mass.
inline GeoState geo_dynamics(const GeoState& s, const GeoControl& u, const PhaseContext& ctx) {
    const double cg = std::cos(s.gamma);
    if (std::abs(cg) < 1e-12 || !std::isfinite(s.gamma))
        throw DomainError("geo_dynamics: singular at vertical flight");
    if (!(s.v > 0.0))
        throw DomainError("geo_dynamics: speed must be positive");
    const double ct = std::cos(s.theta);
    if (std::abs(ct) < 1e-12)
        throw DomainError("geo_dynamics: singular at the poles");

    const auto& e = ctx.earth;
    const double r = s.h + e.R_e;
    const double m = detail::mass_of(s.m, ctx);
    const auto f = aero_forces(s.h, s.v, s.alpha, ctx);
    const double T = ctx.thrust;

    const double sg = std::sin(s.gamma), st = std::sin(s.theta);
    const double sp = std::sin(s.psi), cp = std::cos(s.psi);
    const double w = e.omega_e, w2 = w * w;
    const double normal = T * std::sin(s.alpha) + f.L;

    GeoState d;
    d.h = s.v * sg;
    d.phi = s.v / (r * ct) * cg * sp;
    d.theta = s.v / r * cg * cp;
    d.v = (T * std::cos(s.alpha) - f.D) / m - e.mu_e / (r * r) * sg +
          r * w2 * ct * (sg * ct - cg * st * cp);
    d.gamma = std::cos(s.sigma) / (m * s.v) * normal + cg * (s.v / r - e.mu_e / (r * r * s.v)) +
              2.0 * w * ct * sp + r * w2 / s.v * ct * (cg * ct + sg * st * cp);
    d.psi = std::sin(s.sigma) / (m * s.v * cg) * normal + s.v / r * cg * sp * std::tan(s.theta) -
            2.0 * w * (std::tan(s.gamma) * ct * cp - st) + r * w2 / (s.v * cg) * st * ct * sp;
    d.alpha = u.u_alpha;
    d.sigma = u.u_sigma;
    if (s.m)
        d.m = -ctx.mass_flow();
    return d;
}

// ---------------------------------------------------------------------------
// Euler-parameter formulation
// ---------------------------------------------------------------------------

/// omega_2, omega_3 of the velocity frame for a given roll rate omega_1.
inline AngularVelocity angular_rates(const VertState& s, const PhaseContext& ctx, double w1 = 0.0,
                                     RateForm form = RateForm::consistent) {
    if (!(s.v > 0.0))
        throw DomainError("angular_rates: speed must be positive");
    const auto& e = ctx.earth;
    const double r = s.h + e.R_e;
    const double m = detail::mass_of(s.m, ctx);
    const auto f = aero_forces(s.h, s.v, s.alpha, ctx);
    const double T = ctx.thrust;
    const double st = std::sin(s.theta), ct = std::cos(s.theta);
    const double w = e.omega_e;

    const double e1 = s.e1, e2 = s.e2, e3 = s.e3, eta = s.eta;
    const double a = e1 * e3 + e2 * eta;      // sin(sigma)-like combination
    const double b = e1 * e2 - e3 * eta;      // cos(sigma)-like combination
    const double c = 0.5 - e1 * e1 - e2 * e2;
    const double d = e2 * e3 + e1 * eta;
    const double grav = s.v / r - e.mu_e / (r * r * s.v);
    const double cent = 2.0 * r * w * w / s.v * ct;
    const double normal = T * std::sin(s.alpha);

    AngularVelocity out;
    out.w1 = w1;
    out.w2 = -2.0 * grav * a - 4.0 * w * (st * b + ct * d) - cent * (ct * a - st * c);
    out.w3 = (normal + f.L) / (m * s.v) + 2.0 * grav * b - 4.0 * w * (st * a + ct * c) +
             cent * (ct * b - st * d);
    if (form == RateForm::as_published) {
        out.w2 -= normal / (m * s.v);
    } else {
        // Rotation of the local vertical frame about the up axis, phi_dot*sin(theta).
        const double transport = 4.0 * s.v / r * std::tan(s.theta) * (e1 * e2 + e3 * eta);
        out.w2 -= transport * b;
        out.w3 -= transport * a;
    }
    return out;
}

inline VertState vert_dynamics(const VertState& s, const VertControl& u, const PhaseContext& ctx,
                               RateForm form = RateForm::consistent) {
    if (!(s.v > 0.0))
        throw DomainError("vert_dynamics: speed must be positive");
    const double ct = std::cos(s.theta);
    if (std::abs(ct) < 1e-12)
        throw DomainError("vert_dynamics: singular at the poles");

    const auto& e = ctx.earth;
    const double r = s.h + e.R_e;
    const double m = detail::mass_of(s.m, ctx);
    const auto f = aero_forces(s.h, s.v, s.alpha, ctx);
    const double T = ctx.thrust;
    const double st = std::sin(s.theta);
    const double w = e.omega_e;

    const double e1 = s.e1, e2 = s.e2, e3 = s.e3, eta = s.eta;
    const double sin_gamma = 1.0 - 2.0 * (e2 * e2 + e3 * e3);
    const double north = e1 * e3 - e2 * eta; // cos(gamma)cos(psi) / 2

    const AngularVelocity om = angular_rates(s, ctx, u.w1, form);

    VertState d;
    d.h = s.v * sin_gamma;
    d.phi = 2.0 * s.v / (r * ct) * (e1 * e2 + e3 * eta);
    d.theta = 2.0 * s.v / r * north;
    d.v = (T * std::cos(s.alpha) - f.D) / m - e.mu_e / (r * r) * sin_gamma +
          r * w * w * ct * (ct * sin_gamma - 2.0 * st * north);
    d.e1 = 0.5 * (eta * om.w1 - e3 * om.w2 + e2 * om.w3);
    d.e2 = 0.5 * (e3 * om.w1 + eta * om.w2 - e1 * om.w3 + u.u1);
    d.e3 = 0.5 * (-e2 * om.w1 + e1 * om.w2 + eta * om.w3 + u.u2);
    d.eta = -0.5 * (e1 * om.w1 + e2 * om.w2 + e3 * om.w3);
    d.alpha = u.u_alpha;
    if (s.m)
        d.m = -ctx.mass_flow();
    return d;
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

/// Flight-path, azimuth and bank angles of a unit quaternion. Identity maps to
/// gamma = +90 deg (vertical ascent).
inline FlightAngles quat_to_angles(double e1, double e2, double e3, double eta) {
    FlightAngles a;
    a.gamma = std::atan2(0.5 - e2 * e2 - e3 * e3, std::sqrt((e1 * e1 + eta * eta) * (e2 * e2 + e3 * e3)));
    a.psi = std::atan2(e1 * e2 + e3 * eta, e1 * e3 - e2 * eta);
    a.sigma = std::atan2(-e3 * e1 - e2 * eta, e2 * e1 - e3 * eta);
    return a;
}

inline FlightAngles quat_to_angles(const Quaternion& q) { return quat_to_angles(q.e1, q.e2, q.e3, q.eta); }

/**
 * Unit quaternion whose rotation takes the local (up, east, north) frame to the
 * velocity frame with the given angles. At |gamma| = 90 deg psi and sigma are
 * not recoverable; the returned quaternion is one consistent representative.
 */
inline Quaternion angles_to_quat(double gamma, double psi, double sigma) {
    const double sg = std::sin(gamma), cg = std::cos(gamma);
    const double sp = std::sin(psi), cp = std::cos(psi);
    const double ss = std::sin(sigma), cs = std::cos(sigma);

    // Velocity axis and the two axes orthogonal to it (vertical plane, horizontal).
    const std::array<double, 3> x{sg, cg * sp, cg * cp};
    const std::array<double, 3> n1{cg, -sg * sp, -sg * cp};
    const std::array<double, 3> n2{x[1] * n1[2] - x[2] * n1[1], x[2] * n1[0] - x[0] * n1[2],
                                   x[0] * n1[1] - x[1] * n1[0]};
    std::array<std::array<double, 3>, 3> c{};
    for (int k = 0; k < 3; ++k) {
        c[0][k] = x[k];
        c[1][k] = cs * n1[k] + ss * n2[k];
        c[2][k] = -ss * n1[k] + cs * n2[k];
    }

    // Shepperd's extraction for C = (eta^2 - e.e) I + 2 e e^T - 2 eta [e x].
    const double tr = c[0][0] + c[1][1] + c[2][2];
    Quaternion q;
    if (tr >= c[0][0] && tr >= c[1][1] && tr >= c[2][2]) {
        q.eta = 0.5 * std::sqrt(std::max(0.0, 1.0 + tr));
        const double f = 0.25 / q.eta;
        q.e1 = (c[1][2] - c[2][1]) * f;
        q.e2 = (c[2][0] - c[0][2]) * f;
        q.e3 = (c[0][1] - c[1][0]) * f;
    } else if (c[0][0] >= c[1][1] && c[0][0] >= c[2][2]) {
        q.e1 = 0.5 * std::sqrt(std::max(0.0, 1.0 + 2.0 * c[0][0] - tr));
        const double f = 0.25 / q.e1;
        q.eta = (c[1][2] - c[2][1]) * f;
        q.e2 = (c[0][1] + c[1][0]) * f;
        q.e3 = (c[0][2] + c[2][0]) * f;
    } else if (c[1][1] >= c[2][2]) {
        q.e2 = 0.5 * std::sqrt(std::max(0.0, 1.0 + 2.0 * c[1][1] - tr));
        const double f = 0.25 / q.e2;
        q.eta = (c[2][0] - c[0][2]) * f;
        q.e1 = (c[0][1] + c[1][0]) * f;
        q.e3 = (c[1][2] + c[2][1]) * f;
    } else {
        q.e3 = 0.5 * std::sqrt(std::max(0.0, 1.0 + 2.0 * c[2][2] - tr));
        const double f = 0.25 / q.e3;
        q.eta = (c[0][1] - c[1][0]) * f;
        q.e1 = (c[0][2] + c[2][0]) * f;
        q.e2 = (c[1][2] + c[2][1]) * f;
    }
    const double n = std::sqrt(q.squared_norm());
    q.e1 /= n;
    q.e2 /= n;
    q.e3 /= n;
    q.eta /= n;
    return q;
}

/// Bank-angle rate implied by omega_1 and the current omega_2, omega_3.
inline double w1_to_bank_rate(const VertState& s, const AngularVelocity& w) {
    const double e1 = s.e1, e2 = s.e2, e3 = s.e3, eta = s.eta;
    const double den = (e1 * e1 + eta * eta) * (e2 * e2 + e3 * e3);
    if (!(den > 1e-12))
        throw SingularityError("w1_to_bank_rate: bank rate undefined in vertical flight");
    const double num = 0.5 - e2 * e2 - e3 * e3;
    return w.w1 - num / den * (w.w2 * (e2 * e1 - e3 * eta) + w.w3 * (e3 * e1 + e2 * eta));
}

/// Geodetic view of a VertState (mass carried over).
inline GeoState to_geo(const VertState& s) {
    const auto a = quat_to_angles(s.e1, s.e2, s.e3, s.eta);
    return GeoState{s.h, s.phi, s.theta, s.v, a.gamma, a.psi, s.alpha, a.sigma, s.m};
}

inline VertState to_vert(const GeoState& s) {
    const auto q = angles_to_quat(s.gamma, s.psi, s.sigma);
    return VertState{s.h, s.phi, s.theta, s.v, q.e1, q.e2, q.e3, q.eta, s.alpha, s.m};
}

} // namespace ascentry
