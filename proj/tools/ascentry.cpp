// Command-line front end: check a config, dump the transcription at the
// initial guess, solve one mission, or run a limit sweep.
//
// Exit status: 0 success, 1 configuration or input error, 2 non-convergence
// (or non-finite evaluation at the guess).

#include <ascentry/benchmarks.hpp>
#include <ascentry/mission.hpp>
#include <ascentry/output.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ascentry;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_failed = 2;

struct Options {
    std::string config;
    std::string out = "out";
    std::string command = "solve";
    std::vector<std::string> qdot_max;
    std::vector<std::string> q_max;
    std::optional<double> k;
    std::optional<int> max_refinements;
};

double parse_limit(const std::string& s, const char* flag) {
    if (s == "inf" || s == "Infinity" || s == "none")
        return infinity;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !(v > 0.0))
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(flag) + ": expected a positive number or 'inf', got '" + s + "'");
    }
}

std::vector<double> parse_list(const std::vector<std::string>& items, const char* flag) {
    std::vector<double> out;
    for (const auto& s : items)
        out.push_back(parse_limit(s, flag));
    return out;
}

std::ofstream open_file(const fs::path& p) {
    std::ofstream f(p);
    if (!f)
        throw ConfigError("cannot write '" + p.string() + "'");
    return f;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ":" + detail::line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
}

MissionConfig mission_config(const Options& o) {
    MissionConfig c = load_mission_config(o.config);
    if (o.qdot_max.size() == 1)
        c.limits.Qdot_max = parse_limit(o.qdot_max[0], "--qdot-max");
    if (o.q_max.size() == 1)
        c.limits.Q_max = parse_limit(o.q_max[0], "--q-max");
    if (o.k)
        c.k = *o.k;
    if (o.max_refinements)
        c.mesh.max_refinements = *o.max_refinements;
    c.validate();
    return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int run_check(const Options& o) {
    const auto c = mission_config(o);
    const double g0 = c.earth.g0;
    std::printf("config: %s\n", o.config.c_str());
    std::printf("%-28s %14s %14s %14s\n", "stage", "mass_total kg", "fuel kg", "T*tb/(Isp g0)");
    for (int i = 0; i < 3; ++i) {
        const auto& s = c.stages[i];
        std::printf("%-28d %14.1f %14.1f %14.1f\n", i + 1, s.mass_total, s.mass_fuel, s.thrust * s.burn_time / (s.isp * g0));
    }
    std::printf("%-28s %14.1f\n", "fairing kg", c.fairing_mass);
    std::printf("%-28s %14.1f\n", "payload kg", c.payload_mass);
    std::printf("%-28s %14.1f\n", "ignition mass kg", c.liftoff_mass());
    std::printf("%-28s %14.1f   (stage2 + stage3 + fairing + payload = %.1f)\n", "m_S2 kg", c.m_S2, c.expected_m_S2());
    std::printf("%-28s %14.1f   (stage3 + fairing + payload = %.1f)\n", "m_S3 kg", c.m_S3, c.expected_m_S3());
    const auto tc = tower_clear_propagate(c);
    std::printf("%-28s t = %.3f s, h = %.4f km, v = %.4f km/s, m = %.1f kg\n", "tower clear", tc.t, tc.h, tc.v, tc.m);
    std::printf("%-28s t = %.2f s, h = %.3f km, v = %.3f km/s, m = %.1f kg\n", "configured initial state",
                c.initial.t, c.initial.h, c.initial.v, c.initial.m);
    const auto& tm = c.timing;
    std::printf("%-28s t_S1 %.1f, t_S2 %.1f, t_fairing %.1f, t_S3 %.1f s\n", "timing", tm.t_S1, tm.t_S2, tm.t_fairing,
                tm.t_S3);
    std::printf("%-28s Qdot_max %s MW/m^2, Q_max %s MJ/m^2, k %g\n", "limits", csv::format(c.limits.Qdot_max).c_str(),
                csv::format(c.limits.Q_max).c_str(), c.k);
    // Loading the tables also validates the data files.
    MissionModel::load(c);
    std::printf("config ok\n");
    return exit_ok;
}

int run_transcribe_only(const Options& o) {
    const auto c = mission_config(o);
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = MissionModel::load(c);
    const auto prob = build_mission(model);
    const auto guess = initial_guess(*model);
    TranscribedNLP nlp(prob, initial_mission_mesh(c));
    const auto x = mission_initial_point(nlp, guess);

    const double f = nlp.objective(x);
    std::vector<double> g(nlp.num_constraints()), lo(g.size()), hi(g.size());
    nlp.constraints(x, g);
    nlp.constraint_bounds(lo, hi);
    const auto pattern = nlp.jacobian_sparsity();
    std::vector<double> jac(pattern.nnz());
    nlp.jacobian_values(x, jac);

    bool finite = std::isfinite(f);
    for (double v : g)
        finite = finite && std::isfinite(v);
    for (double v : jac)
        finite = finite && std::isfinite(v);

    // Violation statistics per constraint family (name prefix up to the bracket).
    std::map<std::string, std::pair<int, double>> families;
    for (int i = 0; i < nlp.num_constraints(); ++i) {
        std::string name = nlp.constraint_name(i);
        name = name.substr(0, name.find('['));
        auto& fam = families[name];
        ++fam.first;
        fam.second = std::max(fam.second, std::max({0.0, lo[i] - g[i], g[i] - hi[i]}));
    }

    fs::create_directories(o.out);
    {
        auto out = open_file(fs::path(o.out) / "layout.json");
        out << nlp.layout_json().dump(2) << '\n';
    }
    {
        auto out = open_file(fs::path(o.out) / "residuals.csv");
        out << "constraint,count,max_violation\n";
        for (const auto& [name, v] : families)
            out << name << ',' << v.first << ',' << csv::format(v.second) << '\n';
    }
    const int ncolors = color_columns(pattern).num_colors;
    std::printf("variables %d, constraints %d, jacobian nnz %d, colors %d\n", nlp.num_variables(), nlp.num_constraints(),
                pattern.nnz(), ncolors);
    std::printf("objective at guess %.6g, values %s\n", f, finite ? "finite" : "NOT finite");
    for (const auto& [name, v] : families)
        std::printf("  %-48s %6d rows  max violation %.3e\n", name.c_str(), v.first, v.second);
    std::printf("wrote %s/layout.json and residuals.csv (%.2f s)\n", o.out.c_str(), seconds_since(t0));
    return finite ? exit_ok : exit_failed;
}

int solve_double_integrator(const Options& o, const nlohmann::json& j) {
    benchmarks::DoubleIntegrator di;
    RefinementOptions ropt;
    ropt.mesh_tolerance = 1e-6;
    int intervals = 2, degree = 3;
    const detail::Reader r(j, "");
    r.check_keys({"problem", "description", "x0", "xf", "duration", "mesh"});
    r.number("x0", di.x0);
    r.number("xf", di.xf);
    r.number("duration", di.duration);
    if (r.has("mesh")) {
        const auto m = r.child("mesh");
        m.check_keys({"intervals", "degree", "mesh_tolerance", "max_refinements"});
        m.integer("intervals", intervals);
        m.integer("degree", degree);
        m.number("mesh_tolerance", ropt.mesh_tolerance);
        m.integer("max_refinements", ropt.max_refinements);
    }
    if (o.max_refinements)
        ropt.max_refinements = *o.max_refinements;
    try {
        ropt.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    const auto result = refine_and_solve(di.problem(), {MeshPhase::uniform(intervals, degree)}, di.guess(), {}, ropt);
    const auto sol = result.solution();

    fs::create_directories(o.out);
    {
        auto out = open_file(fs::path(o.out) / "trajectory.csv");
        out << "t,x,v,u\n";
        const int n = 100;
        for (int i = 0; i <= n; ++i) {
            const double t = di.duration * i / n;
            double xs[2], us[1];
            sol.state_at(0, t, xs);
            sol.control_at(0, t, us);
            out << csv::format(t) << ',' << csv::format(xs[0]) << ',' << csv::format(xs[1]) << ','
                << csv::format(us[0]) << '\n';
        }
    }
    {
        auto out = open_file(fs::path(o.out) / "mesh_history.json");
        out << mesh_history_json(result).dump(2) << '\n';
    }
    std::printf("status %s, J = %.10g (analytic %.10g), %d mesh refinements\n", to_string(result.report.status),
                result.report.objective, di.cost(), result.refinements());
    return result.report.status == SolveStatus::converged ? exit_ok : exit_failed;
}

void write_solution_artifacts(const MissionModel& model, const RefinementResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    const auto sol = result.solution();
    const auto rows = sample_trajectory(model, sol);
    {
        auto out = open_file(dir / "trajectory.csv");
        write_trajectory_csv(out, rows);
    }
    {
        auto out = open_file(dir / "nodes.csv");
        write_node_csv(out, model, sol);
    }
    {
        auto out = open_file(dir / "mesh_history.json");
        out << mesh_history_json(result).dump(2) << '\n';
    }
    const auto s = summarize(model, sol);
    const auto checks = check_solution(model, sol);
    nlohmann::json j;
    j["status"] = to_string(result.report.status);
    j["mesh_converged"] = result.mesh_converged;
    j["J"] = s.J;
    j["Q_MJ_m2"] = s.Q;
    j["max_Qdot_MW_m2"] = s.max_Qdot;
    j["h_peak_km"] = s.h_peak;
    j["v_pierce_km_s"] = s.v_pierce;
    j["gamma_pierce_deg"] = s.gamma_pierce / deg;
    j["entry_duration_s"] = s.entry_duration;
    j["checks"] = {{"boundary_mismatch", checks.boundary_mismatch},
                   {"quaternion_norm_error", checks.quaternion_norm_error},
                   {"heat_load_relative_error", checks.heat_load_relative_error},
                   {"terminal_error", checks.terminal_error}};
    {
        auto out = open_file(dir / "summary.json");
        out << j.dump(2) << '\n';
    }
    emit_plots(rows, dir / "plots");
}

int run_solve(const Options& o) {
    const auto j = read_json(o.config);
    if (j.is_object() && j.contains("problem")) {
        if (j["problem"] != "double_integrator")
            throw ConfigError(o.config + ": unknown problem '" + j["problem"].dump() + "'");
        return solve_double_integrator(o, j);
    }
    const auto c = mission_config(o);
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = MissionModel::load(c);
    fs::create_directories(o.out);
    auto log = open_file(fs::path(o.out) / "iterations.csv");
    const auto result = solve_mission(model, &log);
    write_solution_artifacts(*model, result, o.out);
    std::printf("status %s after %d refinements, J = %.6g, max error %.3e (%.1f s)\n", to_string(result.report.status),
                result.refinements(), result.report.objective, result.history.back().max_error, seconds_since(t0));
    return solve_succeeded(result) ? exit_ok : exit_failed;
}

int run_sweep(const Options& o) {
    Sweep sweep;
    sweep.qdot_max = parse_list(o.qdot_max, "--qdot-max");
    sweep.q_max = parse_list(o.q_max, "--q-max");
    if (sweep.qdot_max.empty() && sweep.q_max.empty())
        throw ConfigError("sweep: give --qdot-max and/or --q-max lists");
    Options base = o;
    base.qdot_max.clear();
    base.q_max.clear();
    const auto c = mission_config(base);
    const auto study = run_study(c, sweep, &std::cout);
    fs::create_directories(o.out);
    {
        auto out = open_file(fs::path(o.out) / "study.csv");
        write_study_csv(out, study.rows);
    }
    emit_sweep_plots(study.rows, fs::path(o.out) / "plots");
    int converged = 0;
    for (const auto& r : study.rows)
        converged += r.status == "converged";
    std::printf("%d of %zu cells converged; wrote %s/study.csv\n", converged, study.rows.size(), o.out.c_str());
    return converged > 0 ? exit_ok : exit_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-phase ascent and entry trajectory optimization"};
    Options o;
    app.add_option("--config", o.config, "Config JSON (mission or benchmark problem)")->required();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--command", o.command, "What to run")
        ->check(CLI::IsMember({"solve", "sweep", "check", "transcribe-only"}))
        ->capture_default_str();
    app.add_option("--qdot-max", o.qdot_max, "Heating-rate limit(s), MW/m^2 ('inf' allowed)")->delimiter(',');
    app.add_option("--q-max", o.q_max, "Heat-load limit(s), MJ/m^2 ('inf' allowed)")->delimiter(',');
    app.add_option("--k", o.k, "Phugoid penalty steepness (0 disables)");
    app.add_option("--max-refinements", o.max_refinements, "Mesh refinement iterations after the first solve");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_config;
    }

    try {
        if (o.command != "sweep" && (o.qdot_max.size() > 1 || o.q_max.size() > 1))
            throw ConfigError("limit lists are only accepted by --command sweep");
        if (o.command == "check")
            return run_check(o);
        if (o.command == "transcribe-only")
            return run_transcribe_only(o);
        if (o.command == "sweep")
            return run_sweep(o);
        return run_solve(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const NonFiniteError& e) {
        std::fprintf(stderr, "non-finite evaluation: %s\n", e.what());
        return exit_failed;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_failed;
    }
}
