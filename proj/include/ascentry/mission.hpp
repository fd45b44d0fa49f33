#pragma once

// The eight-phase ascent/coast/entry problem: tables and per-phase vehicle
// contexts, problem assembly, a propagated initial guess, solution checks and
// the limit sweeps.
//
// Phases (0-based): 0 stage 1 (Euler parameters), 1 stage 2, 2 stage 3 with
// fairing, 3 stage 3 without fairing, 4 coast to apogee, 5 coast to the
// atmospheric interface, 6 upper entry, 7 lower entry (Euler parameters).

#include <ascentry/constraints_cost.hpp>
#include <ascentry/dynamics.hpp>
#include <ascentry/mesh_refinement.hpp>
#include <ascentry/mission_config.hpp>
#include <ascentry/models.hpp>
#include <ascentry/nlp.hpp>
#include <ascentry/transcription.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ascentry {

inline constexpr int mission_phases = 8;

namespace geo_index {
enum : int { h, phi, theta, v, gamma, psi, alpha, sigma, m };
enum : int { u_alpha, u_sigma };
} // namespace geo_index

namespace vert_index {
enum : int { h, phi, theta, v, e1, e2, e3, eta, alpha, m };
enum : int { u_alpha, w1, u1, u2 };
} // namespace vert_index

/// Loaded tables plus the per-phase vehicle contexts and cost weights.
struct MissionModel {
    MissionConfig config;
    AtmosphereTable atmosphere;
    std::array<AeroTable, 3> stage_aero;
    AeroTable entry_aero;
    std::array<PhaseContext, mission_phases> context;
    std::array<CostParams, mission_phases> cost;

    static bool vertical(int p) { return p == 0 || p == 7; }
    static bool has_mass(int p) { return p < 4; }
    static int state_count(int p) { return (vertical(p) ? 9 : 8) + (has_mass(p) ? 1 : 0); }

    static std::shared_ptr<const MissionModel> load(const MissionConfig& config) {
        config.validate();
        auto m = std::make_shared<MissionModel>();
        m->config = config;
        m->atmosphere = AtmosphereTable::from_csv(config.resolve(config.atmosphere_file));
        for (int i = 0; i < 3; ++i)
            m->stage_aero[i] = AeroTable::from_csv(config.resolve(config.stage_cl[i]), config.resolve(config.stage_cd[i]));
        m->entry_aero = extend_entry_aero(
            AeroTable::from_csv(config.resolve(config.entry_cl_raw), config.resolve(config.entry_cd_raw)));

        const auto& st = config.stages;
        for (int p = 0; p < mission_phases; ++p) {
            auto& c = m->context[p];
            c.earth = config.earth;
            c.atmosphere = &m->atmosphere;
        }
        for (int p = 0; p < 3; ++p) {
            m->context[p].thrust = st[p].thrust;
            m->context[p].isp = st[p].isp;
            m->context[p].area = st[p].area;
            m->context[p].aero = &m->stage_aero[p];
        }
        // Above the sensible atmosphere once the fairing is gone: thrust only.
        m->context[3].thrust = st[2].thrust;
        m->context[3].isp = st[2].isp;
        m->context[3].area = st[2].area;
        // Unpowered, drag-free coast; the mass only enters through zero forces.
        for (int p : {4, 5}) {
            m->context[p].area = st[2].area;
            m->context[p].vehicle_mass = st[2].mass_empty + config.payload_mass;
        }
        for (int p : {6, 7}) {
            m->context[p].area = config.entry_area;
            m->context[p].vehicle_mass = config.entry_mass;
            m->context[p].aero = &m->entry_aero;
        }

        for (int p = 0; p < 4; ++p)
            m->cost[p] = config.boost_cost;
        m->cost[4] = m->cost[5] = config.coast_cost;
        m->cost[4].include_alpha_term = m->cost[5].include_alpha_term = false;
        m->cost[6] = m->cost[7] = config.entry_cost;
        m->cost[7].with_penalty(config.k);
        return m;
    }
};

inline const std::array<const char*, mission_phases>& mission_phase_names() {
    static const std::array<const char*, mission_phases> names{
        "stage1", "stage2", "stage3", "stage3_bare", "coast_apogee", "coast_interface", "entry_upper", "entry_lower"};
    return names;
}

inline GeoState geo_state(std::span<const double> x, bool mass) {
    using namespace geo_index;
    GeoState s{x[h], x[phi], x[theta], x[v], x[gamma], x[psi], x[alpha], x[sigma], std::nullopt};
    if (mass)
        s.m = x[m];
    return s;
}

inline VertState vert_state(std::span<const double> x, bool mass) {
    using namespace vert_index;
    VertState s{x[h], x[phi], x[theta], x[v], x[e1], x[e2], x[e3], x[eta], x[alpha], std::nullopt};
    if (mass)
        s.m = x[m];
    return s;
}

// GCC's -Warray-bounds misreads the guarded mass write once inlined into
// fixed-size callers.
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Warray-bounds"
#endif
inline void write_state(const GeoState& s, std::span<double> x) {
    using namespace geo_index;
    x[h] = s.h, x[phi] = s.phi, x[theta] = s.theta, x[v] = s.v;
    x[gamma] = s.gamma, x[psi] = s.psi, x[alpha] = s.alpha, x[sigma] = s.sigma;
    if (s.m && x.size() > m)
        x[m] = *s.m;
}

inline void write_state(const VertState& s, std::span<double> x) {
    using namespace vert_index;
    x[h] = s.h, x[phi] = s.phi, x[theta] = s.theta, x[v] = s.v;
    x[e1] = s.e1, x[e2] = s.e2, x[e3] = s.e3, x[eta] = s.eta, x[alpha] = s.alpha;
    if (s.m && x.size() > m)
        x[m] = *s.m;
}

#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic pop
#endif

/// Geodetic view of any phase's state (angles recovered from Euler parameters).
inline GeoState geo_view(int p, std::span<const double> x) {
    if (MissionModel::vertical(p))
        return to_geo(vert_state(x, MissionModel::has_mass(p)));
    return geo_state(x, MissionModel::has_mass(p));
}

/// Continuity vector [h, phi, theta, v, gamma, psi, alpha, sigma].
inline std::array<double, 8> linkage_vector(int p, std::span<const double> x) {
    const auto s = geo_view(p, x);
    return {s.h, s.phi, s.theta, s.v, s.gamma, s.psi, s.alpha, s.sigma};
}

inline double mass_at(const MissionModel& model, int p, std::span<const double> x) {
    if (MissionModel::has_mass(p))
        return x[MissionModel::vertical(p) ? static_cast<int>(vert_index::m) : static_cast<int>(geo_index::m)];
    return model.context[p].vehicle_mass;
}

/// Dynamic pressure, sensed acceleration and heating rate at one state.
inline PathEval mission_path_quantities(const MissionModel& model, int p, std::span<const double> x) {
    const auto s = geo_view(p, x);
    return path_quantities(s.h, s.v, s.alpha, mass_at(model, p, x), model.context[p]);
}

namespace detail {

inline double sin_gamma_vert(std::span<const double> x) {
    using namespace vert_index;
    return 1.0 - 2.0 * (x[e2] * x[e2] + x[e3] * x[e3]);
}

inline std::vector<Bounds> mission_state_bounds(const MissionModel& model, int p) {
    using std::numbers::pi;
    const auto& c = model.config;
    const double inf = std::numeric_limits<double>::infinity();
    const double h_lo = (p >= 3 && p <= 5) ? c.limits.h_atm : 0.0;
    const Bounds h{h_lo, 400.0}, phi{-2.0 * pi, 2.0 * pi}, theta{-89.0 * deg, 89.0 * deg}, v{0.001, 12.0};
    Bounds alpha{-c.boost_cost.alpha_max, c.boost_cost.alpha_max};
    if (p == 4 || p == 5)
        alpha = Bounds{-pi, pi};
    if (p >= 6)
        alpha = Bounds{0.0, c.entry_cost.alpha_max};
    const double m_hi[4] = {c.liftoff_mass(), c.m_S2, c.m_S3, c.m_S3};
    const Bounds mass{1.0, p < 4 ? m_hi[p] : inf};
    if (MissionModel::vertical(p)) {
        const Bounds q{-1.0, 1.0};
        std::vector<Bounds> b{h, phi, theta, v, q, q, q, q, alpha};
        if (MissionModel::has_mass(p))
            b.push_back(mass);
        return b;
    }
    std::vector<Bounds> b{h, phi, theta, v, Bounds{-89.5 * deg, 89.5 * deg}, Bounds{-2.0 * pi, 2.0 * pi}, alpha,
                          Bounds{-pi, pi}};
    if (MissionModel::has_mass(p))
        b.push_back(mass);
    return b;
}

inline std::vector<double> mission_state_scale(const MissionModel& model, int p) {
    const double m_ref[4] = {model.config.initial.m, model.config.m_S2, model.config.m_S3,
                             model.config.m_S3 - model.config.fairing_mass};
    std::vector<double> s;
    if (MissionModel::vertical(p))
        s = {100.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 1.0, 0.5};
    else
        s = {100.0, 1.0, 1.0, 5.0, 1.0, 1.0, 0.5, 1.0};
    if (MissionModel::has_mass(p))
        s.push_back(m_ref[p]);
    return s;
}

} // namespace detail

/// Assembles the full problem; the closures keep the model alive.
inline MultiPhaseProblem build_mission(std::shared_ptr<const MissionModel> model) {
    using namespace detail;
    const auto& c = model->config;
    const double inf = std::numeric_limits<double>::infinity();
    MultiPhaseProblem prob;
    prob.objective_scale = 10.0;

    const auto& names = mission_phase_names();
    for (int p = 0; p < mission_phases; ++p) {
        PhaseSpec P;
        P.name = names[p];
        const bool vert = MissionModel::vertical(p), mass = MissionModel::has_mass(p);
        if (vert)
            P.state_names = {"h", "phi", "theta", "v", "e1", "e2", "e3", "eta", "alpha"};
        else
            P.state_names = {"h", "phi", "theta", "v", "gamma", "psi", "alpha", "sigma"};
        if (mass)
            P.state_names.push_back("m");
        P.state_bounds = mission_state_bounds(*model, p);
        P.state_scale = mission_state_scale(*model, p);

        const CostParams& cp = model->cost[p];
        const Bounds ua{-cp.u_alpha_max, cp.u_alpha_max}, us{-cp.u_sigma_max, cp.u_sigma_max};
        if (vert) {
            P.control_names = {"u_alpha", "w1", "u1", "u2"};
            P.control_bounds = {ua, us, Bounds{-c.slack_bound, c.slack_bound}, Bounds{-c.slack_bound, c.slack_bound}};
            P.control_scale = {0.1, 0.5, c.slack_bound, c.slack_bound};
        } else {
            P.control_names = {"u_alpha", "u_sigma"};
            P.control_bounds = {ua, us};
            P.control_scale = {0.1, 0.5};
        }
        P.time_scale = 100.0;

        const PhaseContext* ctx = &model->context[p];
        const RateForm form = c.rate_form;
        if (vert) {
            P.dynamics = [model, ctx, mass, form](double, std::span<const double> x, std::span<const double> u,
                                                  std::span<double> out) {
                const auto d = vert_dynamics(vert_state(x, mass),
                                             VertControl{u[vert_index::u_alpha], u[vert_index::w1],
                                                         u[vert_index::u1], u[vert_index::u2]},
                                             *ctx, form);
                write_state(d, out);
            };
        } else {
            P.dynamics = [model, ctx, mass](double, std::span<const double> x, std::span<const double> u,
                                            std::span<double> out) {
                const auto d = geo_dynamics(geo_state(x, mass),
                                            GeoControl{u[geo_index::u_alpha], u[geo_index::u_sigma]}, *ctx);
                write_state(d, out);
            };
        }

        // Path limits; a row is attached only when its limit is finite.
        std::vector<int> kinds; // 0 q, 1 n, 2 Qdot
        if (p == 0 && std::isfinite(c.limits.q_max)) {
            P.path_names.push_back("q");
            P.path_bounds.push_back({-inf, c.limits.q_max});
            P.path_scale.push_back(100.0);
            kinds.push_back(0);
        }
        if (p == 6 || p == 7) {
            P.path_names.push_back("q");
            P.path_bounds.push_back(p == 6 ? Bounds{-inf, c.limits.q_min} : Bounds{c.limits.q_min, inf});
            P.path_scale.push_back(10.0);
            kinds.push_back(0);
            if (std::isfinite(c.limits.n_max)) {
                P.path_names.push_back("n");
                P.path_bounds.push_back({-inf, c.limits.n_max});
                P.path_scale.push_back(10.0);
                kinds.push_back(1);
            }
            if (std::isfinite(c.limits.Qdot_max)) {
                P.path_names.push_back("Qdot");
                P.path_bounds.push_back({-inf, c.limits.Qdot_max});
                P.path_scale.push_back(1.0);
                kinds.push_back(2);
            }
        }
        if (!kinds.empty()) {
            P.path = [model, p, kinds](double, std::span<const double> x, std::span<const double>,
                                       std::span<double> out) {
                const auto q = mission_path_quantities(*model, p, x);
                for (std::size_t i = 0; i < kinds.size(); ++i)
                    out[i] = kinds[i] == 0 ? q.q : kinds[i] == 1 ? q.n : q.Qdot;
            };
        }

        P.integrand_names = {"cost"};
        if (p >= 6)
            P.integrand_names.push_back("Qdot");
        P.integrands = [model, p, vert](double, std::span<const double> x, std::span<const double> u,
                                        std::span<double> out) {
            const CostParams& w = model->cost[p];
            if (vert) {
                out[0] = running_cost(x[vert_index::alpha], u[vert_index::u_alpha], u[vert_index::w1],
                                      sin_gamma_vert(x), w);
            } else {
                out[0] = running_cost(x[geo_index::alpha], u[geo_index::u_alpha], u[geo_index::u_sigma],
                                      std::sin(x[geo_index::gamma]), w);
            }
            if (p >= 6)
                out[1] = mission_path_quantities(*model, p, x).Qdot;
        };

        const auto& tm = c.timing;
        switch (p) {
        case 0:
            P.t0 = Bounds::fixed(c.initial.t);
            P.tf = Bounds::fixed(tm.t_S1);
            break;
        case 1:
            P.t0 = Bounds::fixed(tm.t_S1);
            P.tf = Bounds::fixed(tm.t_S2);
            break;
        case 2:
            P.t0 = Bounds::fixed(tm.t_S2);
            P.tf = Bounds::fixed(tm.t_fairing);
            break;
        case 3:
            P.t0 = Bounds::fixed(tm.t_fairing);
            P.tf = Bounds::fixed(tm.t_S3);
            break;
        case 4:
            P.t0 = Bounds::fixed(tm.t_S3);
            P.tf = {tm.t_S3, tm.t_S3 + 10000.0};
            P.min_duration = 1.0;
            break;
        default:
            P.t0 = P.tf = {tm.t_S3, tm.t_S3 + 10000.0};
            P.min_duration = 1.0;
        }

        // Boundary conditions expressed as endpoint bounds.
        if (p == 0) {
            const auto& ic = c.initial;
            P.initial_state = {Bounds::fixed(ic.h),  Bounds::fixed(ic.phi), Bounds::fixed(ic.theta),
                               Bounds::fixed(ic.v),  Bounds::fixed(ic.e1),  Bounds::fixed(ic.e2),
                               Bounds::fixed(ic.e3), Bounds::fixed(ic.eta), Bounds::fixed(ic.alpha),
                               Bounds::fixed(ic.m)};
        }
        if (p == 1 || p == 2) {
            P.initial_state = P.state_bounds;
            P.initial_state[geo_index::m] = Bounds::fixed(p == 1 ? c.m_S2 : c.m_S3);
        }
        if (p == 4) {
            // Separation at apogee: level flight, zero incidence and bank.
            P.final_state = P.state_bounds;
            P.final_state[geo_index::h] = {c.limits.h_peak_min, c.limits.h_peak_max};
            P.final_state[geo_index::gamma] = Bounds::fixed(0.0);
            P.final_state[geo_index::alpha] = Bounds::fixed(0.0);
            P.final_state[geo_index::sigma] = Bounds::fixed(0.0);
        }
        if (p == 5) {
            P.final_state = P.state_bounds;
            P.final_state[geo_index::h] = Bounds::fixed(c.limits.h_atm);
        }
        if (p == 7) {
            const auto& tc = c.terminal;
            P.final_state = P.state_bounds;
            P.final_state[vert_index::h] = Bounds::fixed(tc.h);
            P.final_state[vert_index::phi] = Bounds::fixed(tc.phi);
            P.final_state[vert_index::theta] = Bounds::fixed(tc.theta);
            P.final_state[vert_index::v] = Bounds::fixed(tc.v);
            P.final_state[vert_index::e1] = Bounds::fixed(tc.e1);
            P.final_state[vert_index::eta] = Bounds::fixed(tc.eta);
            P.final_state[vert_index::alpha] = Bounds::fixed(tc.alpha);
        }
        prob.phases.push_back(std::move(P));
    }

    IntegralSpec J{"J", {}, Bounds{0.0, inf}, 1.0, 10.0};
    for (int p = 0; p < mission_phases; ++p)
        J.terms.push_back({p, 0});
    prob.integrals.push_back(J);
    prob.integrals.push_back(IntegralSpec{"Q", {{6, 1}, {7, 1}}, Bounds{0.0, c.limits.Q_max}, 0.0, 1000.0});

    using End = EndpointRef::End;
    const std::vector<double> link_scale{100.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 1.0};
    for (int p = 0; p + 1 < mission_phases; ++p) {
        EventSpec e;
        e.name = std::string("link_") + names[p] + "_" + names[p + 1];
        e.refs = {{p, End::final}, {p + 1, End::initial}};
        e.bounds.assign(8, Bounds::fixed(0.0));
        e.scale = link_scale;
        e.fn = [p](std::span<const EndpointValue> ends, std::span<double> out) {
            const auto a = linkage_vector(p, ends[0].x);
            const auto b = linkage_vector(p + 1, ends[1].x);
            for (int i = 0; i < 8; ++i)
                out[i] = a[i] - b[i];
        };
        prob.events.push_back(std::move(e));
    }
    for (int p = 4; p + 1 < mission_phases; ++p) {
        EventSpec e;
        e.name = std::string("time_") + names[p] + "_" + names[p + 1];
        e.refs = {{p, End::final}, {p + 1, End::initial}};
        e.bounds = {Bounds::fixed(0.0)};
        e.scale = {100.0};
        e.fn = [](std::span<const EndpointValue> ends, std::span<double> out) { out[0] = ends[0].t - ends[1].t; };
        prob.events.push_back(std::move(e));
    }
    {
        EventSpec e;
        e.name = "fairing_jettison";
        e.refs = {{2, End::final}, {3, End::initial}};
        e.bounds = {Bounds::fixed(c.fairing_mass)};
        e.scale = {100.0};
        e.fn = [](std::span<const EndpointValue> ends, std::span<double> out) {
            out[0] = ends[0].x[geo_index::m] - ends[1].x[geo_index::m];
        };
        prob.events.push_back(std::move(e));
    }
    {
        EventSpec e;
        e.name = "unit_norm_entry_lower";
        e.refs = {{7, End::initial}};
        e.bounds = {Bounds::fixed(1.0)};
        e.fn = [](std::span<const EndpointValue> ends, std::span<double> out) {
            using namespace vert_index;
            const auto x = ends[0].x;
            out[0] = x[e1] * x[e1] + x[e2] * x[e2] + x[e3] * x[e3] + x[eta] * x[eta];
        };
        prob.events.push_back(std::move(e));
    }
    prob.validate();
    return prob;
}

inline MultiPhaseProblem build_mission(const MissionConfig& config) {
    return build_mission(MissionModel::load(config));
}

// ---------------------------------------------------------------------------
// Initial guess
// ---------------------------------------------------------------------------

/// Time-sampled states and controls, linearly interpolated and clamped in time.
struct SampledPhase {
    std::vector<double> t;
    std::vector<std::vector<double>> x, u;

    void push(double tk, std::span<const double> xk, std::span<const double> uk) {
        t.push_back(tk);
        x.emplace_back(xk.begin(), xk.end());
        u.emplace_back(uk.begin(), uk.end());
    }
    double t0() const { return t.front(); }
    double tf() const { return t.back(); }

    void at(double tq, std::span<double> xs, std::span<double> us) const {
        if (t.empty())
            throw ContractError("SampledPhase: no samples");
        std::size_t k = 0;
        double f = 0.0;
        if (t.size() > 1 && tq > t.front()) {
            const auto it = std::upper_bound(t.begin(), t.end(), tq);
            k = std::min<std::size_t>(static_cast<std::size_t>(it - t.begin()) - 1, t.size() - 2);
            f = std::clamp((tq - t[k]) / (t[k + 1] - t[k]), 0.0, 1.0);
        }
        const std::size_t k1 = t.size() > 1 ? k + 1 : k;
        for (std::size_t i = 0; i < xs.size(); ++i)
            xs[i] = (1.0 - f) * x[k][i] + f * x[k1][i];
        for (std::size_t i = 0; i < us.size(); ++i)
            us[i] = (1.0 - f) * u[k][i] + f * u[k1][i];
    }
};

struct MissionGuess {
    std::vector<SampledPhase> phases;
    double roll = 0.0;       // rad, rolled in during the first seconds of stage 1
    double kick = 0.0;       // rad, peak pitch-over incidence
    double kick_hold = 0.0;  // s
    double apogee = 0.0;     // km
    double heading_error = 0.0; // rad, pierce heading minus bearing to the target
};

namespace detail {

template <class F>
std::vector<double> rk4_step(const F& f, double t, const std::vector<double>& y, double dt) {
    const std::size_t n = y.size();
    auto axpy = [&](const std::vector<double>& k, double a) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = y[i] + a * k[i];
        return r;
    };
    const auto k1 = f(t, y);
    const auto k2 = f(t + 0.5 * dt, axpy(k1, 0.5 * dt));
    const auto k3 = f(t + 0.5 * dt, axpy(k2, 0.5 * dt));
    const auto k4 = f(t + dt, axpy(k3, dt));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

inline double wrap_pi(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

/// Initial great-circle bearing from (phi1, theta1) to (phi2, theta2), clockwise from north.
inline double bearing(double phi1, double theta1, double phi2, double theta2) {
    const double dl = phi2 - phi1;
    return std::atan2(std::sin(dl) * std::cos(theta2),
                      std::cos(theta1) * std::sin(theta2) - std::sin(theta1) * std::cos(theta2) * std::cos(dl));
}

/// Stage-1 pitch program: roll in, then an incidence kick that returns to zero.
struct PitchProgram {
    double roll;
    double kick;
    double kick_hold = 4.0; // s at full kick incidence
    static constexpr double roll_time = 6.0;
    static constexpr double kick_ramp = 2.0;

    std::array<double, 4> controls(double s) const {
        std::array<double, 4> u{0.0, 0.0, 0.0, 0.0};
        if (s < roll_time)
            u[vert_index::w1] = roll / roll_time;
        const double s1 = s - roll_time;
        if (s1 >= 0.0 && s1 < kick_ramp)
            u[vert_index::u_alpha] = -kick / kick_ramp;
        else if (s1 >= kick_ramp + kick_hold && s1 < 2.0 * kick_ramp + kick_hold)
            u[vert_index::u_alpha] = kick / kick_ramp;
        return u;
    }
    std::vector<double> breakpoints(double t0) const {
        return {t0 + roll_time, t0 + roll_time + kick_ramp, t0 + roll_time + kick_ramp + kick_hold,
                t0 + roll_time + 2.0 * kick_ramp + kick_hold};
    }
};

/// Propagates phases 0-5 (ascent and ballistic coast). Returns nullopt when
/// the program does not reach an apogee above the interface.
inline std::optional<MissionGuess> propagate_ascent(const MissionModel& model, const PitchProgram& prog,
                                                    double dt = 0.1) {
    const auto& c = model.config;
    MissionGuess g;
    g.roll = prog.roll;
    g.kick = prog.kick;
    g.kick_hold = prog.kick_hold;
    g.phases.resize(6);
    try {
        // Stage 1, Euler-parameter form.
        {
            const auto& ic = c.initial;
            std::vector<double> y{ic.h, ic.phi, ic.theta, ic.v, ic.e1, ic.e2, ic.e3, ic.eta, ic.alpha, ic.m};
            double t = ic.t;
            const double t_end = c.timing.t_S1;
            auto bps = prog.breakpoints(ic.t);
            bps.push_back(t_end);
            const auto& ctx = model.context[0];
            const RateForm form = c.rate_form;
            std::array<double, 4> u = prog.controls(0.0);
            g.phases[0].push(t, y, u);
            for (double bp : bps) {
                if (bp > t_end)
                    bp = t_end;
                u = prog.controls(t - ic.t + 1e-9);
                auto f = [&](double, const std::vector<double>& s) {
                    const auto d = vert_dynamics(vert_state(s, true), VertControl{u[0], u[1], u[2], u[3]}, ctx, form);
                    std::vector<double> out(10);
                    write_state(d, out);
                    return out;
                };
                while (t < bp - 1e-9) {
                    const double h = std::min(dt, bp - t);
                    y = rk4_step(f, t, y, h);
                    t += h;
                    // Renormalise the Euler parameters against drift.
                    const double n = std::sqrt(y[4] * y[4] + y[5] * y[5] + y[6] * y[6] + y[7] * y[7]);
                    for (int i = 4; i < 8; ++i)
                        y[i] /= n;
                    g.phases[0].push(t, y, u);
                }
            }
            // Controls are piecewise constant; the recorded control at a sample
            // is the one acting on the step that ends there.
        }

        // Stages 2, 3 and the bare third stage, geodetic with zero controls.
        GeoState s = to_geo(vert_state(g.phases[0].x.back(), true));
        const double t_bounds[4] = {c.timing.t_S1, c.timing.t_S2, c.timing.t_fairing, c.timing.t_S3};
        for (int p = 1; p <= 3; ++p) {
            if (p == 1)
                s.m = c.m_S2;
            else if (p == 2)
                s.m = c.m_S3;
            else
                s.m = *s.m - c.fairing_mass;
            std::vector<double> y(9);
            write_state(s, y);
            const std::array<double, 2> u{0.0, 0.0};
            const auto& ctx = model.context[p];
            auto f = [&](double, const std::vector<double>& st) {
                const auto d = geo_dynamics(geo_state(st, true), GeoControl{}, ctx);
                std::vector<double> out(9);
                write_state(d, out);
                return out;
            };
            double t = t_bounds[p - 1];
            g.phases[p].push(t, y, u);
            while (t < t_bounds[p] - 1e-9) {
                const double h = std::min(dt, t_bounds[p] - t);
                y = rk4_step(f, t, y, h);
                t += h;
                g.phases[p].push(t, y, u);
            }
            s = geo_state(y, true);
        }
        if (s.h < c.limits.h_atm || s.gamma <= 0.0)
            return std::nullopt;

        // Ballistic arcs: to apogee, then down to the interface.
        auto coast = [&](int p, GeoState start, double t, auto stop) -> std::optional<GeoState> {
            std::vector<double> y(8);
            start.m.reset();
            write_state(start, y);
            const auto& ctx = model.context[p];
            auto f = [&](double, const std::vector<double>& st) {
                auto d = geo_dynamics(geo_state(st, false), GeoControl{}, ctx);
                d.m.reset();
                std::vector<double> out(8);
                write_state(d, out);
                return out;
            };
            const std::array<double, 2> u{0.0, 0.0};
            g.phases[p].push(t, y, u);
            const double step = 1.0;
            for (int k = 0; k < 20000; ++k) {
                auto next = rk4_step(f, t, y, step);
                const double a = stop(y), b = stop(next);
                if (a > 0.0 && b <= 0.0) {
                    // Secant on the stop function inside the step.
                    const double frac = a / (a - b);
                    next = rk4_step(f, t, y, frac * step);
                    g.phases[p].push(t + frac * step, next, u);
                    return geo_state(next, false);
                }
                y = std::move(next);
                t += step;
                g.phases[p].push(t, y, u);
                if (y[geo_index::h] < 0.0)
                    return std::nullopt;
            }
            return std::nullopt;
        };
        auto apo = coast(4, s, c.timing.t_S3, [](const std::vector<double>& y) { return y[geo_index::gamma]; });
        if (!apo)
            return std::nullopt;
        g.apogee = apo->h;
        const double h_atm = c.limits.h_atm;
        auto pierce = coast(5, *apo, g.phases[4].tf(), [h_atm](const std::vector<double>& y) {
            return y[geo_index::h] - h_atm;
        });
        if (!pierce)
            return std::nullopt;
        g.heading_error =
            wrap_pi(pierce->psi - bearing(pierce->phi, pierce->theta, c.terminal.phi, c.terminal.theta));

        // Incidence and bank are free in ballistic flight: ramp them to zero by apogee.
        auto& P4 = g.phases[4];
        const double T4 = P4.tf() - P4.t0();
        const double a0 = P4.x.front()[geo_index::alpha], s0 = P4.x.front()[geo_index::sigma];
        for (std::size_t k = 0; k < P4.t.size(); ++k) {
            const double f = (P4.t[k] - P4.t0()) / T4;
            P4.x[k][geo_index::alpha] = a0 * (1.0 - f);
            P4.x[k][geo_index::sigma] = s0 * (1.0 - f);
            P4.u[k][geo_index::u_alpha] = -a0 / T4;
            P4.u[k][geo_index::u_sigma] = -s0 / T4;
        }
        for (auto& x : g.phases[5].x)
            x[geo_index::alpha] = x[geo_index::sigma] = 0.0;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return g;
}

inline double guess_score(const MissionModel& model, const MissionGuess& g) {
    const auto& l = model.config.limits;
    double band = 0.0;
    if (g.apogee < l.h_peak_min)
        band = (l.h_peak_min - g.apogee) / 10.0;
    else if (g.apogee > l.h_peak_max)
        band = (g.apogee - l.h_peak_max) / 10.0;
    return std::abs(g.heading_error) + band;
}

} // namespace detail

/**
 * Initial guess: stage-1 roll and pitch-kick program propagated with zero
 * incidence afterwards, ballistic coast to apogee and to the interface, then a
 * straight line in state space to the terminal conditions. The roll angle and
 * kick size are picked by a grid search that points the interface heading at
 * the target and keeps the apogee in its band.
 */
inline MissionGuess initial_guess(const MissionModel& model, double entry_duration = 1200.0) {
    using detail::PitchProgram;
    const auto& c = model.config;
    std::vector<PitchProgram> grid;
    for (double kick : {1.0, 2.0, 4.0, 7.0, 10.0, 15.0, 20.0})
        for (double hold : {4.0, 10.0, 20.0, 35.0})
            for (int r = -18; r < 18; ++r)
                grid.push_back({r * 10.0 * deg, kick * deg, hold});
    std::vector<std::optional<MissionGuess>> runs(grid.size());
    parallel_for(static_cast<int>(grid.size()), evaluation_threads(),
                 [&](int i, int) { runs[i] = detail::propagate_ascent(model, grid[i], 0.5); });
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (runs[i]) {
            const double sc = detail::guess_score(model, *runs[i]);
            if (sc < best_score) {
                best_score = sc;
                best = static_cast<int>(i);
            }
        }
    if (best < 0)
        throw DomainError("initial_guess: no pitch program reaches an apogee above the interface");

    // Local refinement of the roll angle, then the final fine-step propagation.
    PitchProgram prog = grid[best];
    for (double step : {2.0 * deg, 0.5 * deg}) {
        PitchProgram centre = prog;
        for (int r = -5; r <= 5; ++r) {
            PitchProgram trial{centre.roll + r * step, centre.kick, centre.kick_hold};
            if (auto g = detail::propagate_ascent(model, trial, 0.5)) {
                const double sc = detail::guess_score(model, *g);
                if (sc < best_score) {
                    best_score = sc;
                    prog = trial;
                }
            }
        }
    }
    auto result = detail::propagate_ascent(model, prog, 0.1);
    if (!result)
        result = detail::propagate_ascent(model, prog, 0.5);
    MissionGuess g = std::move(*result);

    // Entry: straight line from the interface state to the terminal state.
    const auto pierce = geo_state(g.phases[5].x.back(), false);
    const double t7 = g.phases[5].tf();
    const double split = 0.35;
    const auto& tc = c.terminal;
    const double abar = c.entry_cost.alpha_bar;
    const double ramp = 0.05;
    auto entry_state = [&](double s) {
        GeoState e;
        e.h = pierce.h + s * (tc.h - pierce.h);
        e.phi = pierce.phi + s * (tc.phi - pierce.phi);
        e.theta = pierce.theta + s * (tc.theta - pierce.theta);
        e.v = pierce.v + s * (tc.v - pierce.v);
        e.gamma = pierce.gamma + s * (-0.5 * std::numbers::pi - pierce.gamma);
        e.psi = pierce.psi;
        e.alpha = abar * std::clamp(std::min(s, 1.0 - s) / ramp, 0.0, 1.0);
        e.sigma = 0.0;
        return e;
    };
    auto alpha_rate = [&](double s) {
        if (s < ramp)
            return abar / (ramp * entry_duration);
        if (s > 1.0 - ramp)
            return -abar / (ramp * entry_duration);
        return 0.0;
    };
    g.phases.resize(8);
    const int samples = 400;
    for (int k = 0; k <= samples; ++k) {
        const double s = split * k / samples;
        const auto e = entry_state(s);
        std::vector<double> x(8);
        write_state(e, x);
        g.phases[6].push(t7 + s * entry_duration, x, std::array<double, 2>{alpha_rate(s), 0.0});
    }
    for (int k = 0; k <= samples; ++k) {
        const double s = split + (1.0 - split) * k / samples;
        auto e = entry_state(s);
        // Vertical at the end; stay just off it elsewhere so the angles stay defined.
        const auto q = angles_to_quat(e.gamma, e.psi, 0.0);
        VertState vs{e.h, e.phi, e.theta, e.v, q.e1, q.e2, q.e3, q.eta, e.alpha, std::nullopt};
        std::vector<double> x(9);
        write_state(vs, x);
        g.phases[7].push(t7 + s * entry_duration, x, std::array<double, 4>{alpha_rate(s), 0.0, 0.0, 0.0});
    }
    return g;
}

inline MissionGuess initial_guess(const MissionConfig& config) { return initial_guess(*MissionModel::load(config)); }

/// Guess closures for the transcription, clamped to the phase's variable bounds.
inline std::vector<TranscribedNLP::PhaseGuess> phase_guesses(const MultiPhaseProblem& prob, const MissionGuess& g) {
    if (g.phases.size() != prob.phases.size())
        throw ContractError("phase_guesses: guess and problem differ in phase count");
    auto shared = std::make_shared<const MissionGuess>(g);
    std::vector<TranscribedNLP::PhaseGuess> out;
    for (std::size_t p = 0; p < prob.phases.size(); ++p) {
        const auto& P = prob.phases[p];
        const auto& S = g.phases[p];
        const double t0 = std::clamp(S.t0(), P.t0.lo, P.t0.hi);
        const double tf = std::clamp(S.tf(), P.tf.lo, P.tf.hi);
        auto sb = P.state_bounds, ib = P.initial_state.empty() ? sb : P.initial_state,
             fb = P.final_state.empty() ? sb : P.final_state;
        auto cb = P.control_bounds;
        // Phase samples are mapped onto the transcription's [t0, tf].
        const double s0 = S.t0(), s1 = S.tf();
        out.push_back({t0, tf, [shared, p, t0, tf, s0, s1, sb, ib, fb, cb](double t, std::span<double> x,
                                                                           std::span<double> u) {
                           const double f = tf > t0 ? (t - t0) / (tf - t0) : 0.0;
                           shared->phases[p].at(s0 + f * (s1 - s0), x, u);
                           const double eps = 1e-9 * std::max(1.0, std::abs(tf));
                           const auto& b = t <= t0 + eps ? ib : t >= tf - eps ? fb : sb;
                           for (std::size_t i = 0; i < x.size(); ++i)
                               x[i] = std::clamp(x[i], std::max(b[i].lo, sb[i].lo), std::min(b[i].hi, sb[i].hi));
                           for (std::size_t i = 0; i < u.size(); ++i)
                               u[i] = std::clamp(u[i], cb[i].lo, cb[i].hi);
                           if (MissionModel::vertical(static_cast<int>(p))) {
                               using namespace vert_index;
                               const double n = std::sqrt(x[e1] * x[e1] + x[e2] * x[e2] + x[e3] * x[e3] + x[eta] * x[eta]);
                               for (int i : {e1, e2, e3, eta})
                                   x[i] /= n;
                           }
                       }});
    }
    return out;
}

/// Initial NLP point for a guess, clamped into the variable bounds.
inline std::vector<double> mission_initial_point(const TranscribedNLP& nlp, const MissionGuess& g) {
    auto x = nlp.initial_point(phase_guesses(nlp.problem(), g));
    std::vector<double> lo(x.size()), hi(x.size());
    nlp.variable_bounds(lo, hi);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], lo[i], hi[i]);
    nlp.fill_accumulators(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
}

// ---------------------------------------------------------------------------
// Solving, checks and studies
// ---------------------------------------------------------------------------

inline std::vector<MeshPhase> initial_mission_mesh(const MissionConfig& c) {
    std::vector<MeshPhase> mesh;
    for (int p = 0; p < mission_phases; ++p)
        mesh.push_back(MeshPhase::uniform(c.mesh.intervals[p], c.mesh.degree));
    return mesh;
}

inline SolverOptions mission_solver_options(const MissionConfig& c) {
    SolverOptions s;
    s.tolerance = c.solver.tolerance;
    s.max_iterations = c.solver.max_iterations;
    return s;
}

inline RefinementOptions mission_refinement_options(const MissionConfig& c) {
    RefinementOptions r;
    r.mesh_tolerance = c.mesh.mesh_tolerance;
    r.max_refinements = c.mesh.max_refinements;
    r.n_min = c.mesh.n_min;
    r.n_max = c.mesh.n_max;
    return r;
}

inline bool solve_succeeded(const RefinementResult& r) { return r.report.status == SolveStatus::converged; }

/// Solve from explicit guess closures (cold guess or warm start).
inline RefinementResult solve_mission(std::shared_ptr<const MissionModel> model,
                                      const std::vector<TranscribedNLP::PhaseGuess>& guess,
                                      std::ostream* iteration_log = nullptr) {
    const auto prob = build_mission(model);
    auto opts = mission_solver_options(model->config);
    opts.iteration_log = iteration_log;
    return refine_and_solve(prob, initial_mission_mesh(model->config), guess, opts,
                            mission_refinement_options(model->config));
}

inline RefinementResult solve_mission(std::shared_ptr<const MissionModel> model, std::ostream* iteration_log = nullptr) {
    const auto prob = build_mission(model);
    return solve_mission(model, phase_guesses(prob, initial_guess(*model)), iteration_log);
}

/// Headline quantities of a mission solution.
struct MissionSummary {
    double Q = 0.0;             // MJ/m^2
    double max_Qdot = 0.0;      // MW/m^2
    double J = 0.0;
    double h_peak = 0.0;        // km
    double v_pierce = 0.0;      // km/s
    double gamma_pierce = 0.0;  // rad
    double entry_duration = 0.0; // s
};

inline MissionSummary summarize(const MissionModel& model, const Solution& sol) {
    MissionSummary s;
    s.J = sol.integral(0);
    s.Q = sol.integral(1);
    const auto x = sol.node_state(5, 0);
    s.h_peak = x[geo_index::h];
    const auto x6 = sol.node_state(6, 0);
    s.v_pierce = x6[geo_index::v];
    s.gamma_pierce = x6[geo_index::gamma];
    s.entry_duration = sol.tf(7) - sol.t0(6);
    for (int p : {6, 7}) {
        const double a = sol.t0(p), b = sol.tf(p);
        const int n = std::max(2, static_cast<int>(std::ceil(b - a)) * 4 + 1);
        std::vector<double> times(n);
        for (int i = 0; i < n; ++i)
            times[i] = a + (b - a) * i / (n - 1);
        const auto tr = interpolate_solution(sol, p, times);
        for (int i = 0; i < n; ++i)
            s.max_Qdot = std::max(s.max_Qdot, mission_path_quantities(model, p, tr.x[i]).Qdot);
        for (int j = 0; j <= sol.nlp().phase_layout(p).nodes; ++j) {
            const auto xs = sol.node_state(p, j);
            s.max_Qdot = std::max(s.max_Qdot, mission_path_quantities(model, p, xs).Qdot);
        }
    }
    return s;
}

/// Independent consistency checks on a solution.
struct SolutionChecks {
    double boundary_mismatch = 0.0;  // max |linkage residual| over phase boundaries
    double quaternion_norm_error = 0.0; // | |e|^2 - 1 | at the start of the last phase
    double heat_load_relative_error = 0.0; // accumulator vs trapezoid of the interpolated Qdot
    double terminal_error = 0.0;     // max |terminal residual| (h, v, gamma in rad)
};

inline SolutionChecks check_solution(const MissionModel& model, const Solution& sol, int samples_per_phase = 4000) {
    SolutionChecks c;
    for (int p = 0; p + 1 < mission_phases; ++p) {
        const auto a = sol.node_state(p, sol.nlp().phase_layout(p).nodes);
        const auto b = sol.node_state(p + 1, 0);
        const auto la = linkage_vector(p, a), lb = linkage_vector(p + 1, b);
        for (int i = 0; i < 8; ++i)
            c.boundary_mismatch = std::max(c.boundary_mismatch, std::abs(la[i] - lb[i]));
    }
    {
        const auto x = sol.node_state(7, 0);
        using namespace vert_index;
        c.quaternion_norm_error = std::abs(x[e1] * x[e1] + x[e2] * x[e2] + x[e3] * x[e3] + x[eta] * x[eta] - 1.0);
    }
    double Q = 0.0;
    for (int p : {6, 7}) {
        const double a = sol.t0(p), b = sol.tf(p);
        std::vector<double> times(samples_per_phase + 1);
        for (int i = 0; i <= samples_per_phase; ++i)
            times[i] = a + (b - a) * i / samples_per_phase;
        const auto tr = interpolate_solution(sol, p, times);
        for (int i = 0; i < samples_per_phase; ++i)
            Q += 0.5 * (times[i + 1] - times[i]) *
                 (mission_path_quantities(model, p, tr.x[i]).Qdot + mission_path_quantities(model, p, tr.x[i + 1]).Qdot);
    }
    const double Qacc = sol.integral(1);
    c.heat_load_relative_error = std::abs(Qacc - Q) / std::max(std::abs(Q), 1e-12);
    {
        const auto x = sol.node_state(7, sol.nlp().phase_layout(7).nodes);
        const auto g = geo_view(7, x);
        const auto& tc = model.config.terminal;
        c.terminal_error = std::max({std::abs(g.h - tc.h), std::abs(g.v - tc.v), std::abs(g.gamma + 0.5 * std::numbers::pi)});
    }
    return c;
}

struct StudyResult {
    double Qdot_max = infinity;  // MW/m^2
    double Q_max = infinity;     // MJ/m^2
    double Q = std::numeric_limits<double>::quiet_NaN();
    double max_Qdot = std::numeric_limits<double>::quiet_NaN();
    double J = std::numeric_limits<double>::quiet_NaN();
    double h_peak = std::numeric_limits<double>::quiet_NaN();
    double v_pierce = std::numeric_limits<double>::quiet_NaN();
    double gamma_pierce_deg = std::numeric_limits<double>::quiet_NaN();
    double entry_duration = std::numeric_limits<double>::quiet_NaN();
    std::string status = "skipped";
    int iterations = 0; // total solver iterations over all meshes (not a CSV column)
};

inline constexpr const char* study_csv_header =
    "Qdot_max_MW_m2,Q_max_MJ_m2,Q_MJ_m2,max_Qdot_MW_m2,J,h_peak_km,v_pierce_km_s,gamma_pierce_deg,"
    "entry_duration_s,status";

inline void write_study_csv(std::ostream& out, const std::vector<StudyResult>& rows) {
    out << study_csv_header << '\n';
    for (const auto& r : rows) {
        out << csv::format(r.Qdot_max) << ',' << csv::format(r.Q_max) << ',' << csv::format(r.Q) << ','
            << csv::format(r.max_Qdot) << ',' << csv::format(r.J) << ',' << csv::format(r.h_peak) << ','
            << csv::format(r.v_pierce) << ',' << csv::format(r.gamma_pierce_deg) << ','
            << csv::format(r.entry_duration) << ',' << r.status << '\n';
    }
}

/// A Qdot_max list, a Q_max list, or both (grid: Qdot_max outer, Q_max inner).
struct Sweep {
    std::vector<double> qdot_max;
    std::vector<double> q_max;
};

struct StudyOutput {
    std::vector<StudyResult> rows;
    std::vector<RefinementResult> solutions; // one per attempted cell, in row order
};

/// Result of one sweep cell: the row plus the guess that seeds the next cell.
struct CellOutcome {
    StudyResult row;
    std::optional<std::vector<TranscribedNLP::PhaseGuess>> next_guess; // set iff converged
    std::optional<RefinementResult> result;
};

/// Solves one cell from a guess (nullptr: cold start).
using CellSolver =
    std::function<CellOutcome(const MissionConfig&, const std::vector<TranscribedNLP::PhaseGuess>* guess)>;

inline CellOutcome solve_cell(const MissionConfig& c, const std::vector<TranscribedNLP::PhaseGuess>* guess) {
    CellOutcome out;
    out.row.Qdot_max = c.limits.Qdot_max;
    out.row.Q_max = c.limits.Q_max;
    const auto model = MissionModel::load(c);
    auto result = guess ? solve_mission(model, *guess) : solve_mission(model);
    for (const auto& h : result.history)
        out.row.iterations += h.solver_iterations;
    out.row.status = to_string(result.report.status);
    if (solve_succeeded(result)) {
        const auto s = summarize(*model, result.solution());
        out.row.Q = s.Q;
        out.row.max_Qdot = s.max_Qdot;
        out.row.J = s.J;
        out.row.h_peak = s.h_peak;
        out.row.v_pierce = s.v_pierce;
        out.row.gamma_pierce_deg = s.gamma_pierce / deg;
        out.row.entry_duration = s.entry_duration;
        out.next_guess = warm_start(result.nlp, result.x);
    }
    out.result = std::move(result);
    return out;
}

/// Sweep cells grouped into warm-start branches, in output (row-major) order.
inline std::vector<std::vector<std::pair<double, double>>> sweep_branches(const MissionConfig& config,
                                                                          const Sweep& sweep) {
    std::vector<std::vector<std::pair<double, double>>> branches;
    const auto& qd = sweep.qdot_max;
    const auto& qm = sweep.q_max;
    if (qd.size() > 1 && qm.size() > 1) {
        for (double a : qd) {
            branches.emplace_back();
            for (double b : qm)
                branches.back().emplace_back(a, b);
        }
        return branches;
    }
    const double a0 = qd.empty() ? config.limits.Qdot_max : qd.front();
    const double b0 = qm.empty() ? config.limits.Q_max : qm.front();
    branches.emplace_back();
    if (qd.size() > 1) {
        for (double a : qd)
            branches.back().emplace_back(a, b0);
    } else if (qm.size() > 1) {
        for (double b : qm)
            branches.back().emplace_back(a0, b);
    } else {
        branches.back().emplace_back(a0, b0);
    }
    return branches;
}

/**
 * Solves each cell warm-started from the previous converged cell of its
 * branch (one grid row, or the whole list); a branch's first cell starts from
 * the previous branch's first converged cell. A branch stops at its first
 * failed cell and the remaining cells are reported as skipped.
 */
inline StudyOutput run_study(const MissionConfig& config, const Sweep& sweep, std::ostream* log = nullptr,
                             const CellSolver& solver = solve_cell) {
    StudyOutput out;
    std::optional<std::vector<TranscribedNLP::PhaseGuess>> branch_seed;
    for (const auto& branch : sweep_branches(config, sweep)) {
        auto warm = branch_seed;
        bool failed = false;
        bool first_in_branch = true;
        for (const auto& [a, b] : branch) {
            if (failed) {
                StudyResult row;
                row.Qdot_max = a;
                row.Q_max = b;
                out.rows.push_back(row);
                continue;
            }
            MissionConfig c = config;
            c.limits.Qdot_max = a;
            c.limits.Q_max = b;
            if (log)
                *log << "solving Qdot_max=" << csv::format(a) << " Q_max=" << csv::format(b) << '\n';
            auto cell = solver(c, warm ? &*warm : nullptr);
            cell.row.Qdot_max = a;
            cell.row.Q_max = b;
            if (cell.next_guess) {
                warm = cell.next_guess;
                if (first_in_branch)
                    branch_seed = warm;
            } else {
                failed = true;
            }
            first_in_branch = false;
            out.rows.push_back(cell.row);
            if (cell.result)
                out.solutions.push_back(std::move(*cell.result));
        }
    }
    return out;
}

} // namespace ascentry
