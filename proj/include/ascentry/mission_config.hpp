#pragma once

// Mission configuration: vehicle, Earth, limits, boundary conditions and
// timing. Every field has the reference-mission default and can be overridden
// from a JSON document.

#include <ascentry/constraints_cost.hpp>
#include <ascentry/errors.hpp>
#include <ascentry/lgr.hpp>
#include <ascentry/models.hpp>

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace ascentry {

struct VehicleStage {
    double burn_time = 0.0;  // s
    double mass_empty = 0.0; // kg
    double mass_fuel = 0.0;  // kg
    double mass_total = 0.0; // kg
    double area = 0.0;       // m^2
    double isp = 0.0;        // s
    double thrust = 0.0;     // kN

    void validate(const std::string& name, double g0) const {
        for (double f : {burn_time, mass_empty, mass_fuel, mass_total, area, isp, thrust})
            if (!(f > 0.0) || !std::isfinite(f))
                throw ConfigError(name + ": every field must be positive and finite");
        if (std::abs(mass_total - (mass_empty + mass_fuel)) > 1e-6 * mass_total)
            throw ConfigError(name + ": mass_total must equal mass_empty + mass_fuel");
        const double burned = thrust * burn_time / (isp * g0);
        if (std::abs(mass_fuel - burned) / mass_fuel >= 0.01)
            throw ConfigError(name + ": mass_fuel differs from T*burn_time/(Isp*g0) = " + std::to_string(burned) +
                              " kg by more than 1%");
    }

    double mass_flow(double g0) const { return thrust / (isp * g0); }
};

/// Launch state after tower clear.
struct InitialConditions {
    double t = 2.52;       // s
    double h = 0.167;      // km
    double phi = -120.63 * deg;
    double theta = 34.58 * deg;
    double v = 0.040;      // km/s
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, eta = 1.0;
    double alpha = 0.0;
    double m = 85743.0;    // kg
};

/// Impact conditions. Longitude is kept unwrapped (west of -180 deg).
struct TerminalConditions {
    double h = 0.0;
    double phi = -192.30 * deg;
    double theta = 8.70 * deg;
    double v = 1.219;
    double e1 = 0.0;
    double eta = 0.0;
    double alpha = 0.0;
};

struct MissionTiming {
    double t_S1 = 56.4;
    double t_S2 = 117.1;
    double t_fairing = 179.1;
    double t_S3 = 189.1;
};

struct MeshSettings {
    std::array<int, 8> intervals{4, 4, 4, 2, 4, 4, 6, 10};
    int degree = 4;
    double mesh_tolerance = 1e-4;
    int max_refinements = 10;
    int n_min = 3;
    int n_max = 10;
};

struct SolverSettings {
    double tolerance = 1e-6;
    int max_iterations = 500;
};

struct MissionConfig {
    EarthConstants earth;
    std::string atmosphere_file = "data/atmosphere_us1962.csv";
    std::array<std::string, 3> stage_cl{"data/aero/stage1_cl.csv", "data/aero/stage2_cl.csv",
                                        "data/aero/stage3_cl.csv"};
    std::array<std::string, 3> stage_cd{"data/aero/stage1_cd.csv", "data/aero/stage2_cd.csv",
                                        "data/aero/stage3_cd.csv"};
    std::string entry_cl_raw = "data/aero/entry_cl_raw.csv";
    std::string entry_cd_raw = "data/aero/entry_cd_raw.csv";

    std::array<VehicleStage, 3> stages{VehicleStage{56.4, 3630, 45360, 48990, 4.307, 282, 2224.1},
                                       VehicleStage{60.7, 3170, 24500, 27670, 4.307, 309, 1222.9},
                                       VehicleStage{72.0, 630, 7080, 7710, 4.307, 300, 289.1}};
    double entry_mass = 907.186; // kg
    double entry_area = 0.48387; // m^2
    double payload_mass = 3000.0;
    double fairing_mass = 400.0;
    double pad_elevation = 0.117; // km
    double tower_height = 0.050;  // km

    InitialConditions initial;
    TerminalConditions terminal;
    PathLimits limits;
    MissionTiming timing;
    double m_S2 = 38780.0;
    double m_S3 = 11110.0;

    // Cost weights per phase group; the coast group drops the alpha term.
    CostParams boost_cost{0.0, 25.0 * deg, 10.0 * deg, 30.0 * deg, true, 0.0, 0.0};
    CostParams coast_cost{0.0, 25.0 * deg, 10.0 * deg, 30.0 * deg, false, 0.0, 0.0};
    CostParams entry_cost{11.86 * deg, 25.0 * deg, 10.0 * deg, 30.0 * deg, true, 0.0, 0.0};
    double k = 3.0; // phugoid penalty in the last phase; 0 disables

    // Slack bound on the quaternion rates, one order above the NLP tolerance.
    double slack_bound = 1e-5;
    RateForm rate_form = RateForm::consistent;
    MeshSettings mesh;
    SolverSettings solver;

    std::filesystem::path base_dir = "."; // data paths are relative to this

    /// Relative data paths are looked up next to the config, then in the working directory.
    std::string resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        if (path.is_absolute())
            return path.string();
        const auto beside = base_dir / path;
        if (std::filesystem::exists(beside) || !std::filesystem::exists(path))
            return beside.string();
        return path.string();
    }

    /// Ignition mass of the full stack.
    double liftoff_mass() const {
        return stages[0].mass_total + stages[1].mass_total + stages[2].mass_total + fairing_mass + payload_mass;
    }
    double expected_m_S2() const { return stages[1].mass_total + stages[2].mass_total + fairing_mass + payload_mass; }
    double expected_m_S3() const { return stages[2].mass_total + fairing_mass + payload_mass; }

    void validate() const {
        earth.validate();
        limits.validate();
        for (int i = 0; i < 3; ++i)
            stages[i].validate("stage " + std::to_string(i + 1), earth.g0);
        for (double f : {entry_mass, entry_area, payload_mass, fairing_mass, tower_height, slack_bound})
            if (!(f > 0.0))
                throw ConfigError("masses, areas, tower_height and slack_bound must be positive");
        const auto& t = timing;
        if (!(t.t_S1 < t.t_S2 && t.t_S2 < t.t_fairing && t.t_fairing < t.t_S3))
            throw ConfigError("timing: need t_S1 < t_S2 < t_fairing < t_S3");
        if (!(initial.t < t.t_S1))
            throw ConfigError("timing: the initial time must precede t_S1");
        if (std::abs(m_S2 - expected_m_S2()) > 0.5)
            throw ConfigError("m_S2 = " + std::to_string(m_S2) + " kg but stage 2 + stage 3 + fairing + payload = " +
                              std::to_string(expected_m_S2()) + " kg");
        if (std::abs(m_S3 - expected_m_S3()) > 0.5)
            throw ConfigError("m_S3 = " + std::to_string(m_S3) + " kg but stage 3 + fairing + payload = " +
                              std::to_string(expected_m_S3()) + " kg");
        const double qn = initial.e1 * initial.e1 + initial.e2 * initial.e2 + initial.e3 * initial.e3 +
                          initial.eta * initial.eta;
        if (std::abs(qn - 1.0) > 1e-9)
            throw ConfigError("initial Euler parameters must have unit norm");
        boost_cost.validate();
        coast_cost.validate();
        entry_cost.validate();
        if (!(k >= 0.0))
            throw ConfigError("k must be non-negative");
        if (mesh.degree < 1 || mesh.degree > lgr_max_degree || mesh.n_min > mesh.n_max || mesh.n_min < 1 ||
            mesh.n_max > lgr_max_degree || !(mesh.mesh_tolerance > 0.0) || mesh.max_refinements < 0)
            throw ConfigError("mesh settings out of range");
        for (int n : mesh.intervals)
            if (n < 1)
                throw ConfigError("mesh: every phase needs at least one interval");
        if (!(solver.tolerance > 0.0) || solver.max_iterations < 1)
            throw ConfigError("solver settings out of range");
    }
};

namespace detail {

/// Numbers may be given as JSON numbers or as "inf"/"-inf"/null (infinity).
inline double json_number(const nlohmann::json& j, const std::string& key) {
    if (j.is_number())
        return j.get<double>();
    if (j.is_null())
        return std::numeric_limits<double>::infinity();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "Infinity" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf" || s == "-Infinity")
            return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError("'" + key + "' must be a number or \"inf\"");
}

inline nlohmann::json json_value(double v) {
    if (std::isfinite(v))
        return v;
    return v > 0 ? "inf" : "-inf";
}

/// Reads key into target if present; angles with a `_deg` suffix are converted.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw ConfigError("'" + path_ + "' must be an object");
    }

    void number(const char* key, double& target, double factor = 1.0) const {
        if (j_.contains(key))
            target = json_number(j_.at(key), where(key)) * factor;
    }
    void integer(const char* key, int& target) const {
        if (!j_.contains(key))
            return;
        if (!j_.at(key).is_number_integer())
            throw ConfigError("'" + where(key) + "' must be an integer");
        target = j_.at(key).get<int>();
    }
    void string(const char* key, std::string& target) const {
        if (!j_.contains(key))
            return;
        if (!j_.at(key).is_string())
            throw ConfigError("'" + where(key) + "' must be a string");
        target = j_.at(key).get<std::string>();
    }
    bool has(const char* key) const { return j_.contains(key); }
    Reader child(const char* key) const { return Reader(j_.at(key), where(key)); }
    const nlohmann::json& raw(const char* key) const { return j_.at(key); }
    std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void check_keys(std::initializer_list<const char*> allowed) const {
        for (const auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const char* a : allowed)
                ok = ok || k == a;
            if (!ok)
                throw ConfigError("unknown key '" + (path_.empty() ? k : path_ + "." + k) + "'");
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
};

inline void read_cost(const Reader& r, CostParams& c) {
    r.check_keys({"alpha_bar_deg", "alpha_max_deg", "u_alpha_max_deg_s", "u_sigma_max_deg_s"});
    r.number("alpha_bar_deg", c.alpha_bar, deg);
    r.number("alpha_max_deg", c.alpha_max, deg);
    r.number("u_alpha_max_deg_s", c.u_alpha_max, deg);
    r.number("u_sigma_max_deg_s", c.u_sigma_max, deg);
}

inline nlohmann::json write_cost(const CostParams& c) {
    return {{"alpha_bar_deg", c.alpha_bar / deg},
            {"alpha_max_deg", c.alpha_max / deg},
            {"u_alpha_max_deg_s", c.u_alpha_max / deg},
            {"u_sigma_max_deg_s", c.u_sigma_max / deg}};
}

/// 1-based line and column of a byte offset.
inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

} // namespace detail

/// Applies the JSON overrides on top of the defaults.
inline MissionConfig mission_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    using detail::Reader;
    MissionConfig c;
    c.base_dir = base_dir;
    const Reader r(j, "");
    r.check_keys({"earth", "atmosphere_file", "aero", "stages", "entry_vehicle", "payload_mass", "fairing_mass",
                  "pad_elevation_km", "tower_height_km", "initial", "terminal", "limits", "timing", "m_S2", "m_S3",
                  "cost", "k", "slack_bound", "rate_form", "mesh", "solver", "description"});
    if (r.has("earth")) {
        const auto e = r.child("earth");
        e.check_keys({"mu_e", "R_e", "omega_e", "g0", "rho0", "v_c", "kappa"});
        e.number("mu_e", c.earth.mu_e);
        e.number("R_e", c.earth.R_e);
        e.number("omega_e", c.earth.omega_e);
        e.number("g0", c.earth.g0);
        e.number("rho0", c.earth.rho0);
        e.number("v_c", c.earth.v_c);
        e.number("kappa", c.earth.kappa);
    }
    r.string("atmosphere_file", c.atmosphere_file);
    if (r.has("aero")) {
        const auto a = r.child("aero");
        a.check_keys({"stage1", "stage2", "stage3", "entry"});
        const char* names[3] = {"stage1", "stage2", "stage3"};
        for (int i = 0; i < 3; ++i)
            if (a.has(names[i])) {
                const auto s = a.child(names[i]);
                s.check_keys({"cl", "cd"});
                s.string("cl", c.stage_cl[i]);
                s.string("cd", c.stage_cd[i]);
            }
        if (a.has("entry")) {
            const auto s = a.child("entry");
            s.check_keys({"cl_raw", "cd_raw"});
            s.string("cl_raw", c.entry_cl_raw);
            s.string("cd_raw", c.entry_cd_raw);
        }
    }
    if (r.has("stages")) {
        const auto& arr = r.raw("stages");
        if (!arr.is_array() || arr.size() != 3)
            throw ConfigError("'stages' must be an array of three objects");
        for (int i = 0; i < 3; ++i) {
            const Reader s(arr[i], "stages[" + std::to_string(i) + "]");
            s.check_keys({"burn_time", "mass_empty", "mass_fuel", "mass_total", "area", "isp", "thrust"});
            auto& st = c.stages[i];
            s.number("burn_time", st.burn_time);
            s.number("mass_empty", st.mass_empty);
            s.number("mass_fuel", st.mass_fuel);
            s.number("mass_total", st.mass_total);
            s.number("area", st.area);
            s.number("isp", st.isp);
            s.number("thrust", st.thrust);
        }
    }
    if (r.has("entry_vehicle")) {
        const auto e = r.child("entry_vehicle");
        e.check_keys({"mass", "area"});
        e.number("mass", c.entry_mass);
        e.number("area", c.entry_area);
    }
    r.number("payload_mass", c.payload_mass);
    r.number("fairing_mass", c.fairing_mass);
    r.number("pad_elevation_km", c.pad_elevation);
    r.number("tower_height_km", c.tower_height);
    if (r.has("initial")) {
        const auto s = r.child("initial");
        s.check_keys({"t", "h", "phi_deg", "theta_deg", "v", "e1", "e2", "e3", "eta", "alpha_deg", "m"});
        auto& ic = c.initial;
        s.number("t", ic.t);
        s.number("h", ic.h);
        s.number("phi_deg", ic.phi, deg);
        s.number("theta_deg", ic.theta, deg);
        s.number("v", ic.v);
        s.number("e1", ic.e1);
        s.number("e2", ic.e2);
        s.number("e3", ic.e3);
        s.number("eta", ic.eta);
        s.number("alpha_deg", ic.alpha, deg);
        s.number("m", ic.m);
    }
    if (r.has("terminal")) {
        const auto s = r.child("terminal");
        s.check_keys({"h", "phi_deg", "theta_deg", "v", "e1", "eta", "alpha_deg"});
        auto& tc = c.terminal;
        s.number("h", tc.h);
        s.number("phi_deg", tc.phi, deg);
        s.number("theta_deg", tc.theta, deg);
        s.number("v", tc.v);
        s.number("e1", tc.e1);
        s.number("eta", tc.eta);
        s.number("alpha_deg", tc.alpha, deg);
    }
    if (r.has("limits")) {
        const auto s = r.child("limits");
        s.check_keys({"n_max", "q_max", "q_min", "Qdot_max", "Q_max", "h_atm", "h_peak_min", "h_peak_max"});
        auto& l = c.limits;
        s.number("n_max", l.n_max);
        s.number("q_max", l.q_max);
        s.number("q_min", l.q_min);
        s.number("Qdot_max", l.Qdot_max);
        s.number("Q_max", l.Q_max);
        s.number("h_atm", l.h_atm);
        s.number("h_peak_min", l.h_peak_min);
        s.number("h_peak_max", l.h_peak_max);
    }
    if (r.has("timing")) {
        const auto s = r.child("timing");
        s.check_keys({"t_S1", "t_S2", "t_fairing", "t_S3"});
        s.number("t_S1", c.timing.t_S1);
        s.number("t_S2", c.timing.t_S2);
        s.number("t_fairing", c.timing.t_fairing);
        s.number("t_S3", c.timing.t_S3);
    }
    r.number("m_S2", c.m_S2);
    r.number("m_S3", c.m_S3);
    if (r.has("cost")) {
        const auto s = r.child("cost");
        s.check_keys({"boost", "coast", "entry"});
        if (s.has("boost"))
            detail::read_cost(s.child("boost"), c.boost_cost);
        if (s.has("coast"))
            detail::read_cost(s.child("coast"), c.coast_cost);
        if (s.has("entry"))
            detail::read_cost(s.child("entry"), c.entry_cost);
    }
    r.number("k", c.k);
    r.number("slack_bound", c.slack_bound);
    if (r.has("rate_form")) {
        std::string form;
        r.string("rate_form", form);
        if (form == "consistent")
            c.rate_form = RateForm::consistent;
        else if (form == "as_published")
            c.rate_form = RateForm::as_published;
        else
            throw ConfigError("'rate_form' must be \"consistent\" or \"as_published\"");
    }
    if (r.has("mesh")) {
        const auto s = r.child("mesh");
        s.check_keys({"intervals", "degree", "mesh_tolerance", "max_refinements", "n_min", "n_max"});
        if (s.has("intervals")) {
            const auto& iv = s.raw("intervals");
            if (iv.is_number_integer()) {
                c.mesh.intervals.fill(iv.get<int>());
            } else if (iv.is_array() && iv.size() == 8) {
                for (int i = 0; i < 8; ++i) {
                    if (!iv[i].is_number_integer())
                        throw ConfigError("'mesh.intervals' entries must be integers");
                    c.mesh.intervals[i] = iv[i].get<int>();
                }
            } else {
                throw ConfigError("'mesh.intervals' must be an integer or an array of eight integers");
            }
        }
        s.integer("degree", c.mesh.degree);
        s.number("mesh_tolerance", c.mesh.mesh_tolerance);
        s.integer("max_refinements", c.mesh.max_refinements);
        s.integer("n_min", c.mesh.n_min);
        s.integer("n_max", c.mesh.n_max);
    }
    if (r.has("solver")) {
        const auto s = r.child("solver");
        s.check_keys({"tolerance", "max_iterations"});
        s.number("tolerance", c.solver.tolerance);
        s.integer("max_iterations", c.solver.max_iterations);
    }
    return c;
}

/// Parses a config file; syntax errors carry line:column, semantic errors the key path.
inline MissionConfig load_mission_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ":" + detail::line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    MissionConfig c;
    try {
        c = mission_config_from_json(j, std::filesystem::path(path).parent_path());
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return c;
}

inline nlohmann::json mission_config_to_json(const MissionConfig& c) {
    using detail::json_value;
    nlohmann::json j;
    j["earth"] = {{"mu_e", c.earth.mu_e}, {"R_e", c.earth.R_e}, {"omega_e", c.earth.omega_e}, {"g0", c.earth.g0},
                  {"rho0", c.earth.rho0}, {"v_c", c.earth.v_c}, {"kappa", c.earth.kappa}};
    j["atmosphere_file"] = c.atmosphere_file;
    j["aero"] = {{"stage1", {{"cl", c.stage_cl[0]}, {"cd", c.stage_cd[0]}}},
                 {"stage2", {{"cl", c.stage_cl[1]}, {"cd", c.stage_cd[1]}}},
                 {"stage3", {{"cl", c.stage_cl[2]}, {"cd", c.stage_cd[2]}}},
                 {"entry", {{"cl_raw", c.entry_cl_raw}, {"cd_raw", c.entry_cd_raw}}}};
    for (const auto& s : c.stages)
        j["stages"].push_back({{"burn_time", s.burn_time}, {"mass_empty", s.mass_empty}, {"mass_fuel", s.mass_fuel},
                               {"mass_total", s.mass_total}, {"area", s.area}, {"isp", s.isp}, {"thrust", s.thrust}});
    j["entry_vehicle"] = {{"mass", c.entry_mass}, {"area", c.entry_area}};
    j["payload_mass"] = c.payload_mass;
    j["fairing_mass"] = c.fairing_mass;
    j["pad_elevation_km"] = c.pad_elevation;
    j["tower_height_km"] = c.tower_height;
    const auto& ic = c.initial;
    j["initial"] = {{"t", ic.t},         {"h", ic.h},   {"phi_deg", ic.phi / deg}, {"theta_deg", ic.theta / deg},
                    {"v", ic.v},         {"e1", ic.e1}, {"e2", ic.e2},             {"e3", ic.e3},
                    {"eta", ic.eta},     {"alpha_deg", ic.alpha / deg},            {"m", ic.m}};
    const auto& tc = c.terminal;
    j["terminal"] = {{"h", tc.h},   {"phi_deg", tc.phi / deg}, {"theta_deg", tc.theta / deg}, {"v", tc.v},
                     {"e1", tc.e1}, {"eta", tc.eta},           {"alpha_deg", tc.alpha / deg}};
    const auto& l = c.limits;
    j["limits"] = {{"n_max", json_value(l.n_max)},         {"q_max", json_value(l.q_max)},
                   {"q_min", json_value(l.q_min)},         {"Qdot_max", json_value(l.Qdot_max)},
                   {"Q_max", json_value(l.Q_max)},         {"h_atm", json_value(l.h_atm)},
                   {"h_peak_min", json_value(l.h_peak_min)}, {"h_peak_max", json_value(l.h_peak_max)}};
    j["timing"] = {{"t_S1", c.timing.t_S1}, {"t_S2", c.timing.t_S2}, {"t_fairing", c.timing.t_fairing},
                   {"t_S3", c.timing.t_S3}};
    j["m_S2"] = c.m_S2;
    j["m_S3"] = c.m_S3;
    j["cost"] = {{"boost", detail::write_cost(c.boost_cost)},
                 {"coast", detail::write_cost(c.coast_cost)},
                 {"entry", detail::write_cost(c.entry_cost)}};
    j["k"] = c.k;
    j["slack_bound"] = c.slack_bound;
    j["rate_form"] = c.rate_form == RateForm::consistent ? "consistent" : "as_published";
    j["mesh"] = {{"intervals", c.mesh.intervals},   {"degree", c.mesh.degree},
                 {"mesh_tolerance", c.mesh.mesh_tolerance}, {"max_refinements", c.mesh.max_refinements},
                 {"n_min", c.mesh.n_min},           {"n_max", c.mesh.n_max}};
    j["solver"] = {{"tolerance", c.solver.tolerance}, {"max_iterations", c.solver.max_iterations}};
    return j;
}

struct TowerClearState {
    double t;  // s after ignition
    double h;  // km
    double v;  // km/s
    double m;  // kg
};

/**
 * Vertical rise from rest at the pad with alpha = 0 and no drag:
 * dv/dt = T/m - mu/r^2, dm/dt = -T/(Isp g0), until the gain equals the tower height.
 */
inline TowerClearState tower_clear_propagate(const MissionConfig& c, double dt = 1e-4) {
    const auto& s = c.stages[0];
    const double m0 = c.liftoff_mass();
    const double r0 = c.earth.R_e + c.pad_elevation;
    if (!(s.thrust > 0.0) || s.thrust / m0 <= c.earth.mu_e / (r0 * r0))
        throw DomainError("tower_clear_propagate: thrust-to-weight <= 1, the vehicle cannot lift off");
    const double mdot = s.mass_flow(c.earth.g0);
    auto rhs = [&](double, const std::array<double, 3>& y) {
        const double r = c.earth.R_e + y[0];
        return std::array<double, 3>{y[1], s.thrust / y[2] - c.earth.mu_e / (r * r), -mdot};
    };
    std::array<double, 3> y{c.pad_elevation, 0.0, m0};
    double t = 0.0;
    const double target = c.pad_elevation + c.tower_height;
    while (true) {
        auto add = [](const std::array<double, 3>& a, const std::array<double, 3>& b, double f) {
            return std::array<double, 3>{a[0] + f * b[0], a[1] + f * b[1], a[2] + f * b[2]};
        };
        const auto k1 = rhs(t, y);
        const auto k2 = rhs(t + 0.5 * dt, add(y, k1, 0.5 * dt));
        const auto k3 = rhs(t + 0.5 * dt, add(y, k2, 0.5 * dt));
        const auto k4 = rhs(t + dt, add(y, k3, dt));
        std::array<double, 3> next;
        for (int i = 0; i < 3; ++i)
            next[i] = y[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        if (next[0] >= target) {
            // Linear interpolation inside the final step.
            const double f = (target - y[0]) / (next[0] - y[0]);
            return {t + f * dt, target, y[1] + f * (next[1] - y[1]), y[2] + f * (next[2] - y[2])};
        }
        y = next;
        t += dt;
        if (t > s.burn_time)
            throw DomainError("tower_clear_propagate: tower not cleared before burnout");
    }
}

} // namespace ascentry
