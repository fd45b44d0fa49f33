#pragma once

// CSV artifacts of a mission solution and of a sweep. Column names are fixed;
// angles are written in degrees, everything else in the library's units
// (km, km/s, kg, kPa, g, MW/m^2, MJ/m^2, s).

#include <ascentry/csv.hpp>
#include <ascentry/mission.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ascentry {

/// One row of the mission time history.
struct TrajectorySample {
    int phase = 0;
    double t = 0.0;
    GeoState s;
    double m = 0.0;
    PathEval path;
    double Q = 0.0; // heat load accumulated since the interface
};

inline constexpr const char* trajectory_csv_header =
    "t,phase,h,phi_deg,theta_deg,v,gamma_deg,psi_deg,alpha_deg,sigma_deg,m,q,n,Qdot,Q";

namespace detail {

inline TrajectorySample sample_at(const MissionModel& model, int p, double t, std::span<const double> x) {
    TrajectorySample r;
    r.phase = p;
    r.t = t;
    r.s = geo_view(p, x);
    r.m = mass_at(model, p, x);
    r.path = path_quantities(r.s.h, r.s.v, r.s.alpha, r.m, model.context[p]);
    return r;
}

inline void write_sample(std::ostream& out, const TrajectorySample& r) {
    using csv::format;
    out << format(r.t) << ',' << r.phase << ',' << format(r.s.h) << ',' << format(r.s.phi / deg) << ','
        << format(r.s.theta / deg) << ',' << format(r.s.v) << ',' << format(r.s.gamma / deg) << ','
        << format(r.s.psi / deg) << ',' << format(r.s.alpha / deg) << ',' << format(r.s.sigma / deg) << ','
        << format(r.m) << ',' << format(r.path.q) << ',' << format(r.path.n) << ',' << format(r.path.Qdot) << ','
        << format(r.Q) << '\n';
}

} // namespace detail

/**
 * Mission history at whole seconds plus the start and end instants. A sample
 * on a phase boundary belongs to the later phase. Q is the trapezoid integral
 * of the heating rate over the entry phases on a 0.25 s sub-grid.
 */
inline std::vector<TrajectorySample> sample_trajectory(const MissionModel& model, const Solution& sol) {
    std::vector<TrajectorySample> rows;
    const int np = sol.phases();
    const double t_begin = sol.t0(0), t_end = sol.tf(np - 1);
    std::vector<double> times{t_begin};
    for (double t = std::ceil(t_begin); t < t_end; t += 1.0)
        if (t > t_begin)
            times.push_back(t);
    times.push_back(t_end);

    auto phase_of = [&](double t) {
        for (int p = np - 1; p >= 0; --p)
            if (t >= sol.t0(p))
                return p;
        return 0;
    };
    auto state = [&](int p, double t) {
        std::vector<double> x(sol.nlp().problem().phases[p].nx());
        sol.state_at(p, std::clamp(t, sol.t0(p), sol.tf(p)), x);
        return x;
    };
    auto qdot = [&](double t) {
        const int p = phase_of(t);
        if (p < 6)
            return 0.0;
        return mission_path_quantities(model, p, state(p, t)).Qdot;
    };

    double Q = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0) {
            // Accumulate over [times[i-1], times[i]] on the sub-grid.
            const double a = times[i - 1], b = times[i];
            const int sub = std::max(1, static_cast<int>(std::ceil((b - a) / 0.25)));
            double prev = qdot(a);
            for (int k = 1; k <= sub; ++k) {
                const double tk = a + (b - a) * k / sub;
                const double cur = qdot(tk);
                Q += 0.5 * (tk - (a + (b - a) * (k - 1) / sub)) * (prev + cur);
                prev = cur;
            }
        }
        const double t = times[i];
        const int p = phase_of(t);
        auto r = detail::sample_at(model, p, t, state(p, t));
        r.Q = Q;
        rows.push_back(r);
    }
    return rows;
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& rows) {
    out << trajectory_csv_header << '\n';
    for (const auto& r : rows)
        detail::write_sample(out, r);
}

/// Values at every collocation node and phase end, with the node controls.
inline void write_node_csv(std::ostream& out, const MissionModel& model, const Solution& sol) {
    using csv::format;
    out << "phase,node,t,h,phi_deg,theta_deg,v,gamma_deg,psi_deg,alpha_deg,sigma_deg,m,q,n,Qdot,"
           "u_alpha_deg_s,u_bank_deg_s,u1,u2\n";
    for (int p = 0; p < sol.phases(); ++p) {
        const auto times = sol.node_times(p);
        const int nodes = sol.nlp().phase_layout(p).nodes;
        for (int j = 0; j <= nodes; ++j) {
            const auto x = sol.node_state(p, j);
            const auto r = detail::sample_at(model, p, times[j], x);
            out << p << ',' << j << ',' << format(r.t) << ',' << format(r.s.h) << ',' << format(r.s.phi / deg) << ','
                << format(r.s.theta / deg) << ',' << format(r.s.v) << ',' << format(r.s.gamma / deg) << ','
                << format(r.s.psi / deg) << ',' << format(r.s.alpha / deg) << ',' << format(r.s.sigma / deg) << ','
                << format(r.m) << ',' << format(r.path.q) << ',' << format(r.path.n) << ','
                << format(r.path.Qdot);
            if (j < nodes) {
                const auto u = sol.node_control(p, j);
                // Controls: [u_alpha, u_sigma] or [u_alpha, w1, u1, u2].
                out << ',' << format(u[0] / deg) << ',' << format(u[1] / deg) << ','
                    << format(u.size() > 2 ? u[2] : 0.0) << ',' << format(u.size() > 3 ? u[3] : 0.0);
            } else {
                out << ",nan,nan,nan,nan";
            }
            out << '\n';
        }
    }
}

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f)
        throw ConfigError("cannot write '" + path.string() + "'");
    return f;
}
} // namespace detail

/// Plot-ready time histories, one file per figure family.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<TrajectorySample>& rows,
                                                     const std::filesystem::path& dir) {
    using csv::format;
    std::filesystem::create_directories(dir);
    struct Family {
        const char* file;
        const char* header;
        std::function<void(std::ostream&, const TrajectorySample&)> row;
    };
    const std::vector<Family> families{
        {"gamma_vs_t.csv", "t,gamma_deg",
         [](std::ostream& o, const TrajectorySample& r) { o << format(r.t) << ',' << format(r.s.gamma / deg); }},
        {"altitude_speed_vs_t.csv", "t,h,v",
         [](std::ostream& o, const TrajectorySample& r) {
             o << format(r.t) << ',' << format(r.s.h) << ',' << format(r.s.v);
         }},
        {"heating_load_factor_vs_t.csv", "t,Qdot,n",
         [](std::ostream& o, const TrajectorySample& r) {
             o << format(r.t) << ',' << format(r.path.Qdot) << ',' << format(r.path.n);
         }},
        {"alpha_sigma_vs_t.csv", "t,alpha_deg,sigma_deg",
         [](std::ostream& o, const TrajectorySample& r) {
             o << format(r.t) << ',' << format(r.s.alpha / deg) << ',' << format(r.s.sigma / deg);
         }},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& f : families) {
        const auto path = dir / f.file;
        auto out = detail::open_output(path);
        out << f.header << '\n';
        for (const auto& r : rows) {
            f.row(out, r);
            out << '\n';
        }
        written.push_back(path);
    }
    return written;
}

/// Smallest converged Q_max for each Qdot_max that has at least one converged cell.
inline std::vector<std::pair<double, double>> failure_map(const std::vector<StudyResult>& rows) {
    std::map<double, double> best;
    for (const auto& r : rows)
        if (r.status == "converged") {
            auto it = best.find(r.Qdot_max);
            if (it == best.end() || r.Q_max < it->second)
                best[r.Qdot_max] = r.Q_max;
        }
    return {best.begin(), best.end()};
}

/// Sweep cost curve (converged cells only) and the failure-point map.
inline std::vector<std::filesystem::path> emit_sweep_plots(const std::vector<StudyResult>& rows,
                                                           const std::filesystem::path& dir) {
    using csv::format;
    std::filesystem::create_directories(dir);
    const auto cost_path = dir / "sweep_cost.csv";
    {
        auto out = detail::open_output(cost_path);
        out << "Qdot_max_MW_m2,Q_max_MJ_m2,J,Q_MJ_m2,max_Qdot_MW_m2,h_peak_km\n";
        for (const auto& r : rows)
            if (r.status == "converged")
                out << format(r.Qdot_max) << ',' << format(r.Q_max) << ',' << format(r.J) << ',' << format(r.Q)
                    << ',' << format(r.max_Qdot) << ',' << format(r.h_peak) << '\n';
    }
    const auto map_path = dir / "failure_map.csv";
    {
        auto out = detail::open_output(map_path);
        out << "Qdot_max_MW_m2,smallest_feasible_Q_max_MJ_m2\n";
        for (const auto& [a, b] : failure_map(rows))
            out << format(a) << ',' << format(b) << '\n';
    }
    return {cost_path, map_path};
}

} // namespace ascentry
