#pragma once

// Legendre-Gauss-Radau transcription of a multi-phase optimal control problem
// into the NLP interface.
//
// Per phase the variables are [t0, tf] followed by node-interleaved states and
// controls [x_0 u_0 x_1 u_1 ... x_{M-1} u_{M-1} x_M]; x_M is the state at the
// phase end, which carries no control. Interval k owns nodes
// [start_k, start_k + N_k) and reads states up to start_k + N_k.
//
// Integrals are chains of accumulators, one per (phase, interval) term:
//   A_k - A_{k-1} - (tf - t0)/2 * f_k * sum_i w_i g(x_i, u_i) = 0,
// so every row stays local and the final accumulator is the integral.

#include <ascentry/errors.hpp>
#include <ascentry/lgr.hpp>
#include <ascentry/nlp.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ascentry {

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    static Bounds fixed(double v) { return {v, v}; }
    static Bounds free() { return {}; }
};

using PointFunction =
    std::function<void(double t, std::span<const double> x, std::span<const double> u, std::span<double> out)>;

struct PhaseSpec {
    std::string name;
    std::vector<std::string> state_names;
    std::vector<std::string> control_names;
    std::vector<Bounds> state_bounds;
    std::vector<Bounds> control_bounds;
    std::vector<Bounds> initial_state; // empty: state_bounds
    std::vector<Bounds> final_state;   // empty: state_bounds
    Bounds t0, tf;
    double min_duration = 0.0;         // tf - t0 >= min_duration
    bool autonomous = true;            // callbacks ignore t

    std::vector<double> state_scale;   // empty: 1
    std::vector<double> control_scale; // empty: 1
    double time_scale = 1.0;

    PointFunction dynamics;            // writes nx derivatives

    std::vector<std::string> path_names;
    std::vector<Bounds> path_bounds;
    std::vector<double> path_scale;    // empty: 1
    PointFunction path;                // writes path_names.size() values

    std::vector<std::string> integrand_names;
    PointFunction integrands;          // writes integrand_names.size() values

    int nx() const { return static_cast<int>(state_names.size()); }
    int nu() const { return static_cast<int>(control_names.size()); }
    int npath() const { return static_cast<int>(path_names.size()); }
    int nint() const { return static_cast<int>(integrand_names.size()); }
};

/// An integral summed over one or more phases (each contributing one integrand).
struct IntegralSpec {
    std::string name;
    struct Term {
        int phase;
        int integrand;
    };
    std::vector<Term> terms;
    Bounds bounds;
    double objective_weight = 0.0;
    double scale = 1.0;
};

struct EndpointRef {
    int phase;
    enum class End { initial, final } end;
};

struct EndpointValue {
    double t;
    std::span<const double> x;
};

/// Algebraic constraints on phase endpoints (boundary conditions, linkages).
struct EventSpec {
    std::string name;
    std::vector<EndpointRef> refs;
    std::vector<Bounds> bounds;  // one per output
    std::vector<double> scale;   // empty: 1
    std::function<void(std::span<const EndpointValue>, std::span<double>)> fn;

    int size() const { return static_cast<int>(bounds.size()); }
};

struct MultiPhaseProblem {
    std::vector<PhaseSpec> phases;
    std::vector<IntegralSpec> integrals;
    std::vector<EventSpec> events;
    double objective_scale = 1.0;

    void validate() const {
        if (phases.empty())
            throw ContractError("MultiPhaseProblem: no phases");
        for (const auto& p : phases) {
            const std::string where = "phase '" + p.name + "': ";
            if (p.nx() == 0)
                throw ContractError(where + "no states");
            if (static_cast<int>(p.state_bounds.size()) != p.nx() || static_cast<int>(p.control_bounds.size()) != p.nu())
                throw ContractError(where + "bounds do not match dimensions");
            if (!p.initial_state.empty() && static_cast<int>(p.initial_state.size()) != p.nx())
                throw ContractError(where + "initial_state has wrong size");
            if (!p.final_state.empty() && static_cast<int>(p.final_state.size()) != p.nx())
                throw ContractError(where + "final_state has wrong size");
            if (!p.state_scale.empty() && static_cast<int>(p.state_scale.size()) != p.nx())
                throw ContractError(where + "state_scale has wrong size");
            if (!p.control_scale.empty() && static_cast<int>(p.control_scale.size()) != p.nu())
                throw ContractError(where + "control_scale has wrong size");
            if (static_cast<int>(p.path_bounds.size()) != p.npath() ||
                (!p.path_scale.empty() && static_cast<int>(p.path_scale.size()) != p.npath()))
                throw ContractError(where + "path bounds/scales do not match path_names");
            if (!p.dynamics)
                throw ContractError(where + "missing dynamics");
            if (p.npath() > 0 && !p.path)
                throw ContractError(where + "missing path callback");
            if (p.nint() > 0 && !p.integrands)
                throw ContractError(where + "missing integrand callback");
        }
        const int np = static_cast<int>(phases.size());
        for (const auto& I : integrals) {
            if (I.terms.empty())
                throw ContractError("integral '" + I.name + "' has no terms");
            for (const auto& t : I.terms)
                if (t.phase < 0 || t.phase >= np || t.integrand < 0 || t.integrand >= phases[t.phase].nint())
                    throw ContractError("integral '" + I.name + "' references an invalid phase/integrand");
            if (!(I.scale > 0.0))
                throw ContractError("integral '" + I.name + "' needs a positive scale");
        }
        for (const auto& e : events) {
            if (!e.fn || e.refs.empty())
                throw ContractError("event '" + e.name + "' has no callback or no endpoints");
            for (const auto& r : e.refs)
                if (r.phase < 0 || r.phase >= np)
                    throw ContractError("event '" + e.name + "' references an invalid phase");
            if (!e.scale.empty() && static_cast<int>(e.scale.size()) != e.size())
                throw ContractError("event '" + e.name + "' scale has wrong size");
        }
    }
};

/// Interval fractions of [t0, tf] and per-interval polynomial degrees.
struct MeshPhase {
    std::vector<double> fractions;
    std::vector<int> degrees;

    static MeshPhase uniform(int intervals, int degree) {
        return {std::vector<double>(intervals, 1.0 / intervals), std::vector<int>(intervals, degree)};
    }

    int intervals() const { return static_cast<int>(fractions.size()); }
    int nodes() const { return std::accumulate(degrees.begin(), degrees.end(), 0); }

    void validate() const {
        if (fractions.empty())
            throw ContractError("MeshPhase: empty mesh");
        if (fractions.size() != degrees.size())
            throw ContractError("MeshPhase: fractions and degrees differ in length");
        double s = 0.0;
        for (double f : fractions) {
            if (!(f > 0.0))
                throw ContractError("MeshPhase: fractions must be positive");
            s += f;
        }
        if (std::abs(s - 1.0) > 1e-10)
            throw ContractError("MeshPhase: fractions must sum to 1");
        for (int d : degrees)
            if (d < 1 || d > lgr_max_degree)
                throw ContractError("MeshPhase: degree outside [1, 64]");
    }
};

struct PhaseLayout {
    int t0 = 0, tf = 0;
    int base = 0;       // first state variable
    int nodes = 0;      // collocation nodes
    int stride = 0;     // nx + nu
    std::vector<int> interval_start; // first node of each interval
    std::vector<double> interval_begin; // cumulative fraction at each interval start
    int defect_row = 0; // first defect row
    int path_row = 0;   // first path row
    int duration_row = 0;

    int state(int point, int s) const { return base + point * stride + s; }
    int control(int node, int c, int nx) const { return base + node * stride + nx + c; }
};

struct IntegralLayout {
    struct Chain {
        int phase, integrand, interval;
        int var; // accumulator variable
        int row; // accumulator constraint row
    };
    std::vector<Chain> chain;
    int final_var() const { return chain.back().var; }
};

/**
 * The transcribed NLP. Holds copies of the problem and mesh; evaluation is
 * pure and thread-safe.
 */
class TranscribedNLP : public NLP {
public:
    TranscribedNLP(MultiPhaseProblem problem, std::vector<MeshPhase> mesh)
        : prob_(std::move(problem)), mesh_(std::move(mesh)) {
        prob_.validate();
        if (mesh_.size() != prob_.phases.size())
            throw ContractError("transcribe: one mesh per phase required");
        for (const auto& m : mesh_)
            m.validate();
        build_layout();
        build_pattern();
    }

    const MultiPhaseProblem& problem() const { return prob_; }
    const std::vector<MeshPhase>& mesh() const { return mesh_; }
    const PhaseLayout& phase_layout(int p) const { return layout_[p]; }
    const IntegralLayout& integral_layout(int i) const { return integrals_[i]; }
    int event_row(int e) const { return event_row_[e]; }

    int num_variables() const override { return nvar_; }
    int num_constraints() const override { return ncon_; }

    void variable_bounds(std::span<double> lo, std::span<double> hi) const override {
        std::copy(xlo_.begin(), xlo_.end(), lo.begin());
        std::copy(xhi_.begin(), xhi_.end(), hi.begin());
    }
    void constraint_bounds(std::span<double> lo, std::span<double> hi) const override {
        std::copy(glo_.begin(), glo_.end(), lo.begin());
        std::copy(ghi_.begin(), ghi_.end(), hi.begin());
    }
    void variable_scale(std::span<double> s) const override { std::copy(xscale_.begin(), xscale_.end(), s.begin()); }
    void constraint_scale(std::span<double> s) const override { std::copy(gscale_.begin(), gscale_.end(), s.begin()); }
    double objective_scale() const override { return prob_.objective_scale; }

    double objective(std::span<const double> x) const override {
        double f = 0.0;
        for (std::size_t i = 0; i < prob_.integrals.size(); ++i)
            if (prob_.integrals[i].objective_weight != 0.0)
                f += prob_.integrals[i].objective_weight * x[integrals_[i].final_var()];
        return f;
    }

    std::vector<int> gradient_sparsity() const override {
        std::vector<int> s;
        for (std::size_t i = 0; i < prob_.integrals.size(); ++i)
            if (prob_.integrals[i].objective_weight != 0.0)
                s.push_back(integrals_[i].final_var());
        return s;
    }

    bool objective_gradient(std::span<const double>, std::span<double> grad) const override {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < prob_.integrals.size(); ++i)
            grad[integrals_[i].final_var()] += prob_.integrals[i].objective_weight;
        return true;
    }

    void constraints(std::span<const double> x, std::span<double> g) const override {
        if (static_cast<int>(x.size()) != nvar_ || static_cast<int>(g.size()) != ncon_)
            throw ContractError("evaluate_nlp: point has the wrong dimension");
        std::fill(g.begin(), g.end(), 0.0);
        std::vector<std::vector<double>> integrand_sums(prob_.phases.size());
        for (std::size_t p = 0; p < prob_.phases.size(); ++p)
            eval_phase(static_cast<int>(p), x, g, integrand_sums[p]);
        for (std::size_t i = 0; i < integrals_.size(); ++i) {
            int prev = -1;
            for (const auto& c : integrals_[i].chain) {
                const auto& P = prob_.phases[c.phase];
                const auto& L = layout_[c.phase];
                const double half = 0.5 * (x[L.tf] - x[L.t0]) * mesh_[c.phase].fractions[c.interval];
                const double s = integrand_sums[c.phase][c.interval * P.nint() + c.integrand];
                g[c.row] = x[c.var] - (prev >= 0 ? x[prev] : 0.0) - half * s;
                prev = c.var;
            }
        }
        eval_events(x, g);
        for (int r = 0; r < ncon_; ++r)
            if (!std::isfinite(g[r]))
                throw_non_finite(r);
    }

    SparsityPattern jacobian_sparsity() const override { return pattern_; }

    std::vector<std::vector<int>> hessian_blocks() const override {
        std::vector<std::vector<int>> blocks;
        for (std::size_t p = 0; p < prob_.phases.size(); ++p) {
            const auto& L = layout_[p];
            blocks.push_back({L.t0, L.tf});
            for (int j = 0; j <= L.nodes; ++j) {
                std::vector<int> b;
                const int width = j < L.nodes ? L.stride : prob_.phases[p].nx();
                for (int k = 0; k < width; ++k)
                    b.push_back(L.base + j * L.stride + k);
                blocks.push_back(std::move(b));
            }
        }
        return blocks;
    }

    /// Structured central differences: each node function is differenced with
    /// respect to its own state and control; linear parts are exact.
    bool jacobian_values(std::span<const double> x, std::span<double> values) const override {
        std::fill(values.begin(), values.end(), 0.0);
        for (std::size_t p = 0; p < prob_.phases.size(); ++p)
            jac_phase(static_cast<int>(p), x, values);
        jac_events(x, values);
        return true;
    }

    std::string variable_name(int i) const override {
        for (std::size_t p = 0; p < layout_.size(); ++p) {
            const auto& L = layout_[p];
            const auto& P = prob_.phases[p];
            if (i == L.t0)
                return P.name + ".t0";
            if (i == L.tf)
                return P.name + ".tf";
            const int end = L.base + L.nodes * L.stride + P.nx();
            if (i >= L.base && i < end) {
                const int j = (i - L.base) / L.stride, k = (i - L.base) % L.stride;
                if (k < P.nx())
                    return P.name + ".x[" + std::to_string(j) + "]." + P.state_names[k];
                return P.name + ".u[" + std::to_string(j) + "]." + P.control_names[k - P.nx()];
            }
        }
        for (std::size_t n = 0; n < integrals_.size(); ++n)
            for (const auto& c : integrals_[n].chain)
                if (c.var == i)
                    return prob_.integrals[n].name + ".acc[" + prob_.phases[c.phase].name + "," +
                           std::to_string(c.interval) + "]";
        return NLP::variable_name(i);
    }

    std::string constraint_name(int r) const override {
        const auto loc = locate_row(r);
        return loc.name;
    }

    /// Time of node j of phase p (nodes = collocation points plus the end).
    double node_time(int p, int j, std::span<const double> x) const {
        const auto& L = layout_[p];
        if (j == L.nodes)
            return x[L.tf];
        const auto [k, i] = node_interval(p, j);
        const auto& rule = lgr_rule(mesh_[p].degrees[k]);
        const double theta = L.interval_begin[k] + mesh_[p].fractions[k] * 0.5 * (rule.nodes[i] + 1.0);
        return x[L.t0] + theta * (x[L.tf] - x[L.t0]);
    }

    /// Debug dump: variables, constraints and nonzeros.
    nlohmann::json layout_json() const {
        nlohmann::json j;
        j["num_variables"] = nvar_;
        j["num_constraints"] = ncon_;
        auto& vars = j["variables"] = nlohmann::json::array();
        for (int i = 0; i < nvar_; ++i)
            vars.push_back({{"index", i}, {"name", variable_name(i)}, {"lower", json_num(xlo_[i])},
                            {"upper", json_num(xhi_[i])}});
        auto& cons = j["constraints"] = nlohmann::json::array();
        for (int r = 0; r < ncon_; ++r)
            cons.push_back({{"index", r}, {"name", constraint_name(r)}, {"lower", json_num(glo_[r])},
                            {"upper", json_num(ghi_[r])}});
        auto& phases = j["phases"] = nlohmann::json::array();
        for (std::size_t p = 0; p < layout_.size(); ++p) {
            const auto& L = layout_[p];
            phases.push_back({{"name", prob_.phases[p].name}, {"t0", L.t0}, {"tf", L.tf}, {"state_offset", L.base},
                              {"nodes", L.nodes}, {"stride", L.stride}, {"defect_row", L.defect_row},
                              {"path_row", L.path_row}, {"degrees", mesh_[p].degrees},
                              {"fractions", mesh_[p].fractions}});
        }
        auto& nz = j["nonzeros"] = nlohmann::json::array();
        for (int c = 0; c < pattern_.cols; ++c)
            for (int k = pattern_.col_start[c]; k < pattern_.col_start[c + 1]; ++k)
                nz.push_back({pattern_.row_index[k], c});
        return j;
    }

    /// Initial point from per-phase guess functions; accumulators are filled so
    /// the integral rows hold exactly.
    struct PhaseGuess {
        double t0 = 0.0, tf = 1.0;
        std::function<void(double t, std::span<double> x, std::span<double> u)> at;
    };

    std::vector<double> initial_point(const std::vector<PhaseGuess>& guess) const {
        if (guess.size() != prob_.phases.size())
            throw ContractError("initial_point: one guess per phase required");
        std::vector<double> x(nvar_, 0.0);
        for (std::size_t p = 0; p < guess.size(); ++p) {
            const auto& L = layout_[p];
            const auto& P = prob_.phases[p];
            x[L.t0] = guess[p].t0;
            x[L.tf] = guess[p].tf;
            std::vector<double> xs(P.nx()), us(P.nu());
            for (int j = 0; j <= L.nodes; ++j) {
                const double t = node_time(static_cast<int>(p), j, x);
                std::fill(us.begin(), us.end(), 0.0);
                guess[p].at(t, xs, us);
                for (int s = 0; s < P.nx(); ++s)
                    x[L.state(j, s)] = xs[s];
                if (j < L.nodes)
                    for (int c = 0; c < P.nu(); ++c)
                        x[L.control(j, c, P.nx())] = us[c];
            }
        }
        fill_accumulators(x);
        return x;
    }

    /// Recomputes accumulator variables from the current states/controls.
    void fill_accumulators(std::span<double> x) const {
        std::vector<std::vector<double>> sums(prob_.phases.size());
        std::vector<double> scratch(ncon_);
        for (std::size_t p = 0; p < prob_.phases.size(); ++p)
            eval_phase(static_cast<int>(p), x, scratch, sums[p]);
        for (std::size_t i = 0; i < integrals_.size(); ++i) {
            double acc = 0.0;
            for (const auto& c : integrals_[i].chain) {
                const auto& L = layout_[c.phase];
                const double half = 0.5 * (x[L.tf] - x[L.t0]) * mesh_[c.phase].fractions[c.interval];
                acc += half * sums[c.phase][c.interval * prob_.phases[c.phase].nint() + c.integrand];
                x[c.var] = acc;
            }
        }
    }

    std::pair<int, int> node_interval(int p, int j) const {
        const auto& L = layout_[p];
        const auto it = std::upper_bound(L.interval_start.begin(), L.interval_start.end(), j);
        const int k = static_cast<int>(it - L.interval_start.begin()) - 1;
        return {k, j - L.interval_start[k]};
    }

private:
    static nlohmann::json json_num(double v) {
        if (std::isfinite(v))
            return v;
        return v > 0 ? "inf" : "-inf";
    }

    void build_layout() {
        const int np = static_cast<int>(prob_.phases.size());
        layout_.resize(np);
        int v = 0;
        for (int p = 0; p < np; ++p) {
            const auto& P = prob_.phases[p];
            auto& L = layout_[p];
            L.t0 = v++;
            L.tf = v++;
            L.base = v;
            L.stride = P.nx() + P.nu();
            L.nodes = mesh_[p].nodes();
            double acc = 0.0;
            int start = 0;
            for (int k = 0; k < mesh_[p].intervals(); ++k) {
                L.interval_start.push_back(start);
                L.interval_begin.push_back(acc);
                start += mesh_[p].degrees[k];
                acc += mesh_[p].fractions[k];
            }
            v += L.nodes * L.stride + P.nx();
        }
        // Accumulators.
        integrals_.resize(prob_.integrals.size());
        for (std::size_t i = 0; i < prob_.integrals.size(); ++i)
            for (const auto& t : prob_.integrals[i].terms)
                for (int k = 0; k < mesh_[t.phase].intervals(); ++k)
                    integrals_[i].chain.push_back({t.phase, t.integrand, k, v++, -1});
        nvar_ = v;

        int r = 0;
        for (int p = 0; p < np; ++p) {
            const auto& P = prob_.phases[p];
            auto& L = layout_[p];
            L.defect_row = r;
            r += L.nodes * P.nx();
            L.path_row = r;
            r += L.nodes * P.npath();
            L.duration_row = r++;
        }
        for (auto& I : integrals_)
            for (auto& c : I.chain)
                c.row = r++;
        event_row_.clear();
        for (const auto& e : prob_.events) {
            event_row_.push_back(r);
            r += e.size();
        }
        ncon_ = r;

        // Bounds and scales.
        const double inf = std::numeric_limits<double>::infinity();
        xlo_.assign(nvar_, -inf);
        xhi_.assign(nvar_, inf);
        xscale_.assign(nvar_, 1.0);
        glo_.assign(ncon_, 0.0);
        ghi_.assign(ncon_, 0.0);
        gscale_.assign(ncon_, 1.0);
        for (int p = 0; p < np; ++p) {
            const auto& P = prob_.phases[p];
            const auto& L = layout_[p];
            xlo_[L.t0] = P.t0.lo;
            xhi_[L.t0] = P.t0.hi;
            xlo_[L.tf] = P.tf.lo;
            xhi_[L.tf] = P.tf.hi;
            xscale_[L.t0] = xscale_[L.tf] = P.time_scale;
            for (int j = 0; j <= L.nodes; ++j) {
                const auto& sb = j == 0 && !P.initial_state.empty()
                                     ? P.initial_state
                                     : (j == L.nodes && !P.final_state.empty() ? P.final_state : P.state_bounds);
                for (int s = 0; s < P.nx(); ++s) {
                    xlo_[L.state(j, s)] = sb[s].lo;
                    xhi_[L.state(j, s)] = sb[s].hi;
                    xscale_[L.state(j, s)] = P.state_scale.empty() ? 1.0 : P.state_scale[s];
                }
                if (j < L.nodes)
                    for (int c = 0; c < P.nu(); ++c) {
                        xlo_[L.control(j, c, P.nx())] = P.control_bounds[c].lo;
                        xhi_[L.control(j, c, P.nx())] = P.control_bounds[c].hi;
                        xscale_[L.control(j, c, P.nx())] = P.control_scale.empty() ? 1.0 : P.control_scale[c];
                    }
            }
            for (int j = 0; j < L.nodes; ++j)
                for (int s = 0; s < P.nx(); ++s)
                    gscale_[L.defect_row + j * P.nx() + s] = P.state_scale.empty() ? 1.0 : P.state_scale[s];
            for (int j = 0; j < L.nodes; ++j)
                for (int q = 0; q < P.npath(); ++q) {
                    const int row = L.path_row + j * P.npath() + q;
                    glo_[row] = P.path_bounds[q].lo;
                    ghi_[row] = P.path_bounds[q].hi;
                    gscale_[row] = P.path_scale.empty() ? 1.0 : P.path_scale[q];
                }
            glo_[L.duration_row] = P.min_duration;
            ghi_[L.duration_row] = inf;
            gscale_[L.duration_row] = P.time_scale;
        }
        for (std::size_t i = 0; i < integrals_.size(); ++i) {
            const auto& I = prob_.integrals[i];
            for (const auto& c : integrals_[i].chain) {
                xscale_[c.var] = I.scale;
                gscale_[c.row] = I.scale;
            }
            xlo_[integrals_[i].final_var()] = I.bounds.lo;
            xhi_[integrals_[i].final_var()] = I.bounds.hi;
        }
        for (std::size_t e = 0; e < prob_.events.size(); ++e) {
            const auto& E = prob_.events[e];
            for (int q = 0; q < E.size(); ++q) {
                glo_[event_row_[e] + q] = E.bounds[q].lo;
                ghi_[event_row_[e] + q] = E.bounds[q].hi;
                gscale_[event_row_[e] + q] = E.scale.empty() ? 1.0 : E.scale[q];
            }
        }
    }

    void build_pattern() {
        std::vector<std::pair<int, int>> e;
        for (std::size_t p = 0; p < prob_.phases.size(); ++p) {
            const auto& P = prob_.phases[p];
            const auto& L = layout_[p];
            const int nx = P.nx(), nu = P.nu();
            for (int k = 0; k < mesh_[p].intervals(); ++k) {
                const int N = mesh_[p].degrees[k], s0 = L.interval_start[k];
                for (int i = 0; i < N; ++i) {
                    const int node = s0 + i;
                    for (int s = 0; s < nx; ++s) {
                        const int row = L.defect_row + node * nx + s;
                        for (int j = 0; j <= N; ++j)
                            e.emplace_back(row, L.state(s0 + j, s));
                        for (int q = 0; q < nx; ++q)
                            e.emplace_back(row, L.state(node, q));
                        for (int c = 0; c < nu; ++c)
                            e.emplace_back(row, L.control(node, c, nx));
                        e.emplace_back(row, L.t0);
                        e.emplace_back(row, L.tf);
                    }
                    for (int q = 0; q < P.npath(); ++q) {
                        const int row = L.path_row + node * P.npath() + q;
                        for (int v = 0; v < nx + nu; ++v)
                            e.emplace_back(row, L.base + node * L.stride + v);
                        if (!P.autonomous) {
                            e.emplace_back(row, L.t0);
                            e.emplace_back(row, L.tf);
                        }
                    }
                }
            }
            e.emplace_back(L.duration_row, L.t0);
            e.emplace_back(L.duration_row, L.tf);
        }
        for (const auto& I : integrals_) {
            int prev = -1;
            for (const auto& c : I.chain) {
                const auto& L = layout_[c.phase];
                const int nx = prob_.phases[c.phase].nx(), nu = prob_.phases[c.phase].nu();
                e.emplace_back(c.row, c.var);
                if (prev >= 0)
                    e.emplace_back(c.row, prev);
                e.emplace_back(c.row, L.t0);
                e.emplace_back(c.row, L.tf);
                const int s0 = L.interval_start[c.interval], N = mesh_[c.phase].degrees[c.interval];
                for (int i = 0; i < N; ++i)
                    for (int v = 0; v < nx + nu; ++v)
                        e.emplace_back(c.row, L.base + (s0 + i) * L.stride + v);
                prev = c.var;
            }
        }
        for (std::size_t k = 0; k < prob_.events.size(); ++k) {
            const auto& E = prob_.events[k];
            for (int q = 0; q < E.size(); ++q)
                for (const auto& r : E.refs)
                    for (int v : endpoint_vars(r))
                        e.emplace_back(event_row_[k] + q, v);
        }
        pattern_ = SparsityPattern::from_entries(ncon_, nvar_, std::move(e));
    }

    /// Time variable followed by the endpoint state variables.
    std::vector<int> endpoint_vars(const EndpointRef& r) const {
        const auto& L = layout_[r.phase];
        const int nx = prob_.phases[r.phase].nx();
        const bool ini = r.end == EndpointRef::End::initial;
        std::vector<int> v{ini ? L.t0 : L.tf};
        const int point = ini ? 0 : L.nodes;
        for (int s = 0; s < nx; ++s)
            v.push_back(L.state(point, s));
        return v;
    }

    // Values of dynamics, path and integrands at one node.
    void node_functions(int p, double t, std::span<const double> xs, std::span<const double> us,
                        std::span<double> out) const {
        const auto& P = prob_.phases[p];
        P.dynamics(t, xs, us, out.subspan(0, P.nx()));
        if (P.npath() > 0)
            P.path(t, xs, us, out.subspan(P.nx(), P.npath()));
        if (P.nint() > 0)
            P.integrands(t, xs, us, out.subspan(P.nx() + P.npath(), P.nint()));
    }

    void eval_phase(int p, std::span<const double> x, std::span<double> g, std::vector<double>& integrand_sums) const {
        const auto& P = prob_.phases[p];
        const auto& L = layout_[p];
        const auto& M = mesh_[p];
        const int nx = P.nx(), nu = P.nu(), nf = nx + P.npath() + P.nint();
        const double t0 = x[L.t0], tf = x[L.tf];
        integrand_sums.assign(M.intervals() * P.nint(), 0.0);
        std::vector<double> out(nf);
        for (int k = 0; k < M.intervals(); ++k) {
            const auto& rule = lgr_rule(M.degrees[k]);
            const int N = M.degrees[k], s0 = L.interval_start[k];
            const double half = 0.5 * (tf - t0) * M.fractions[k];
            for (int i = 0; i < N; ++i) {
                const int node = s0 + i;
                const double t = t0 + (L.interval_begin[k] + M.fractions[k] * 0.5 * (rule.nodes[i] + 1.0)) * (tf - t0);
                const auto xs = x.subspan(L.state(node, 0), nx);
                const auto us = x.subspan(L.state(node, 0) + nx, nu);
                try {
                    node_functions(p, t, xs, us, out);
                } catch (const NonFiniteError&) {
                    throw;
                } catch (const std::exception& ex) {
                    throw NonFiniteError("phase '" + P.name + "' interval " + std::to_string(k) + " node " +
                                             std::to_string(i) + ": " + ex.what(),
                                         L.defect_row + node * nx, p, k, i);
                }
                for (int f = 0; f < nf; ++f)
                    if (!std::isfinite(out[f]))
                        throw NonFiniteError("phase '" + P.name + "' interval " + std::to_string(k) + " node " +
                                                 std::to_string(i) + ": non-finite callback output " +
                                                 std::to_string(f),
                                             f < nx ? L.defect_row + node * nx + f
                                                    : (f < nx + P.npath() ? L.path_row + node * P.npath() + f - nx : -1),
                                             p, k, i);
                for (int s = 0; s < nx; ++s) {
                    double dx = 0.0;
                    for (int j = 0; j <= N; ++j)
                        dx += rule.diff_matrix(i, j) * x[L.state(s0 + j, s)];
                    g[L.defect_row + node * nx + s] = dx - half * out[s];
                }
                for (int q = 0; q < P.npath(); ++q)
                    g[L.path_row + node * P.npath() + q] = out[nx + q];
                for (int q = 0; q < P.nint(); ++q)
                    integrand_sums[k * P.nint() + q] += rule.weights[i] * out[nx + P.npath() + q];
            }
        }
        g[L.duration_row] = tf - t0;
    }

    void eval_events(std::span<const double> x, std::span<double> g) const {
        for (std::size_t k = 0; k < prob_.events.size(); ++k) {
            const auto& E = prob_.events[k];
            std::vector<EndpointValue> ends;
            for (const auto& r : E.refs) {
                const auto& L = layout_[r.phase];
                const bool ini = r.end == EndpointRef::End::initial;
                ends.push_back({x[ini ? L.t0 : L.tf], x.subspan(L.state(ini ? 0 : L.nodes, 0), prob_.phases[r.phase].nx())});
            }
            E.fn(ends, g.subspan(event_row_[k], E.size()));
        }
    }

    void jac_phase(int p, std::span<const double> x, std::span<double> values) const {
        const auto& P = prob_.phases[p];
        const auto& L = layout_[p];
        const auto& M = mesh_[p];
        const int nx = P.nx(), nu = P.nu(), nv = nx + nu, nf = nx + P.npath() + P.nint();
        const double t0 = x[L.t0], tf = x[L.tf];

        auto add = [&](int row, int col, double v) {
            const int pos = pattern_.find(row, col);
            values[pos] += v;
        };
        add(L.duration_row, L.t0, -1.0);
        add(L.duration_row, L.tf, 1.0);

        // Accumulator rows of this phase, keyed by (interval, integrand).
        std::vector<int> acc_row(M.intervals() * std::max(1, P.nint()), -1);
        for (const auto& I : integrals_)
            for (const auto& c : I.chain)
                if (c.phase == p)
                    acc_row[c.interval * P.nint() + c.integrand] = c.row;

        struct NodeWork {
            int k, i, node;
            double t, theta;
            std::vector<double> f, dfdv, dfdt; // dfdv: nf x nv column-major
        };
        std::vector<NodeWork> work(L.nodes);
        for (int k = 0; k < M.intervals(); ++k) {
            const auto& rule = lgr_rule(M.degrees[k]);
            for (int i = 0; i < M.degrees[k]; ++i) {
                auto& w = work[L.interval_start[k] + i];
                w.k = k;
                w.i = i;
                w.node = L.interval_start[k] + i;
                w.theta = L.interval_begin[k] + M.fractions[k] * 0.5 * (rule.nodes[i] + 1.0);
                w.t = t0 + w.theta * (tf - t0);
            }
        }
        const int threads = std::min(evaluation_threads(), std::max(1, L.nodes / 8));
        parallel_for(L.nodes, threads, [&](int j, int) {
            auto& w = work[j];
            std::vector<double> v(x.begin() + L.state(j, 0), x.begin() + L.state(j, 0) + nv);
            std::vector<double> fp(nf), fm(nf);
            w.f.resize(nf);
            w.dfdv.assign(nf * nv, 0.0);
            auto call = [&](double t, const std::vector<double>& vv, std::vector<double>& out) {
                try {
                    node_functions(p, t, std::span<const double>(vv.data(), nx),
                                   std::span<const double>(vv.data() + nx, nu), out);
                } catch (const std::exception& ex) {
                    throw NonFiniteError("phase '" + P.name + "' interval " + std::to_string(w.k) + " node " +
                                             std::to_string(w.i) + ": " + ex.what(),
                                         L.defect_row + j * nx, p, w.k, w.i);
                }
            };
            call(w.t, v, w.f);
            for (int c = 0; c < nv; ++c) {
                const double x0 = v[c], h = difference_step(x0);
                v[c] = x0 + h;
                call(w.t, v, fp);
                const double hp = v[c];
                v[c] = x0 - h;
                call(w.t, v, fm);
                const double inv = 1.0 / (hp - v[c]);
                v[c] = x0;
                for (int f = 0; f < nf; ++f)
                    w.dfdv[c * nf + f] = (fp[f] - fm[f]) * inv;
            }
            if (!P.autonomous) {
                const double h = difference_step(w.t);
                call(w.t + h, v, fp);
                call(w.t - h, v, fm);
                const double inv = 1.0 / ((w.t + h) - (w.t - h));
                w.dfdt.resize(nf);
                for (int f = 0; f < nf; ++f)
                    w.dfdt[f] = (fp[f] - fm[f]) * inv;
            }
            for (double d : w.dfdv)
                if (!std::isfinite(d))
                    throw NonFiniteError("phase '" + P.name + "': non-finite derivative at interval " +
                                             std::to_string(w.k) + " node " + std::to_string(w.i),
                                         L.defect_row + j * nx, p, w.k, w.i);
        });

        for (const auto& w : work) {
            const auto& rule = lgr_rule(M.degrees[w.k]);
            const int N = M.degrees[w.k], s0 = L.interval_start[w.k];
            const double fk = M.fractions[w.k];
            const double half = 0.5 * (tf - t0) * fk;
            const double dt_dt0 = 1.0 - w.theta, dt_dtf = w.theta;
            for (int s = 0; s < nx; ++s) {
                const int row = L.defect_row + w.node * nx + s;
                for (int j = 0; j <= N; ++j)
                    add(row, L.state(s0 + j, s), rule.diff_matrix(w.i, j));
                for (int c = 0; c < nv; ++c)
                    add(row, L.base + w.node * L.stride + c, -half * w.dfdv[c * (nx + P.npath() + P.nint()) + s]);
                double dt0 = 0.5 * fk * w.f[s], dtf = -0.5 * fk * w.f[s];
                if (!P.autonomous) {
                    dt0 -= half * w.dfdt[s] * dt_dt0;
                    dtf -= half * w.dfdt[s] * dt_dtf;
                }
                add(row, L.t0, dt0);
                add(row, L.tf, dtf);
            }
            const int nfn = nx + P.npath() + P.nint();
            for (int q = 0; q < P.npath(); ++q) {
                const int row = L.path_row + w.node * P.npath() + q;
                for (int c = 0; c < nv; ++c)
                    add(row, L.base + w.node * L.stride + c, w.dfdv[c * nfn + nx + q]);
                if (!P.autonomous) {
                    add(row, L.t0, w.dfdt[nx + q] * dt_dt0);
                    add(row, L.tf, w.dfdt[nx + q] * dt_dtf);
                }
            }
            for (int q = 0; q < P.nint(); ++q) {
                const int row = acc_row[w.k * P.nint() + q];
                if (row < 0)
                    continue;
                const int f = nx + P.npath() + q;
                const double wi = rule.weights[w.i];
                for (int c = 0; c < nv; ++c)
                    add(row, L.base + w.node * L.stride + c, -half * wi * w.dfdv[c * nfn + f]);
                double dt0 = 0.5 * fk * wi * w.f[f], dtf = -0.5 * fk * wi * w.f[f];
                if (!P.autonomous) {
                    dt0 -= half * wi * w.dfdt[f] * dt_dt0;
                    dtf -= half * wi * w.dfdt[f] * dt_dtf;
                }
                add(row, L.t0, dt0);
                add(row, L.tf, dtf);
            }
            (void)N;
        }

        // Accumulator identity terms.
        for (const auto& I : integrals_) {
            int prev = -1;
            for (const auto& c : I.chain) {
                if (c.phase == p) {
                    add(c.row, c.var, 1.0);
                    if (prev >= 0)
                        add(c.row, prev, -1.0);
                }
                prev = c.var;
            }
        }
    }

    void jac_events(std::span<const double> x, std::span<double> values) const {
        std::vector<double> xp(x.begin(), x.end());
        for (std::size_t k = 0; k < prob_.events.size(); ++k) {
            const auto& E = prob_.events[k];
            std::vector<int> vars;
            for (const auto& r : E.refs)
                for (int v : endpoint_vars(r))
                    vars.push_back(v);
            std::sort(vars.begin(), vars.end());
            vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
            std::vector<double> gp(ncon_), gm(ncon_);
            for (int v : vars) {
                const double x0 = x[v], h = difference_step(x0);
                xp[v] = x0 + h;
                const double hp = xp[v];
                eval_single_event(k, xp, gp);
                xp[v] = x0 - h;
                const double hm = xp[v];
                eval_single_event(k, xp, gm);
                xp[v] = x0;
                for (int q = 0; q < E.size(); ++q) {
                    const int row = event_row_[k] + q;
                    const double d = (gp[row] - gm[row]) / (hp - hm);
                    if (!std::isfinite(d))
                        throw NonFiniteError("event '" + E.name + "': non-finite derivative", row);
                    values[pattern_.find(row, v)] += d;
                }
            }
        }
    }

    void eval_single_event(std::size_t k, std::span<const double> x, std::span<double> g) const {
        const auto& E = prob_.events[k];
        std::vector<EndpointValue> ends;
        for (const auto& r : E.refs) {
            const auto& L = layout_[r.phase];
            const bool ini = r.end == EndpointRef::End::initial;
            ends.push_back({x[ini ? L.t0 : L.tf], x.subspan(L.state(ini ? 0 : L.nodes, 0), prob_.phases[r.phase].nx())});
        }
        E.fn(ends, g.subspan(event_row_[k], E.size()));
    }

    struct RowLocation {
        std::string name;
        int phase = -1, interval = -1, node = -1;
    };

    RowLocation locate_row(int r) const {
        for (std::size_t p = 0; p < layout_.size(); ++p) {
            const auto& P = prob_.phases[p];
            const auto& L = layout_[p];
            if (r >= L.defect_row && r < L.path_row) {
                const int node = (r - L.defect_row) / P.nx(), s = (r - L.defect_row) % P.nx();
                const auto [k, i] = node_interval(static_cast<int>(p), node);
                return {P.name + ".defect[" + std::to_string(k) + "," + std::to_string(i) + "]." + P.state_names[s],
                        static_cast<int>(p), k, i};
            }
            if (r >= L.path_row && r < L.duration_row) {
                const int node = (r - L.path_row) / P.npath(), q = (r - L.path_row) % P.npath();
                const auto [k, i] = node_interval(static_cast<int>(p), node);
                return {P.name + ".path[" + std::to_string(k) + "," + std::to_string(i) + "]." + P.path_names[q],
                        static_cast<int>(p), k, i};
            }
            if (r == L.duration_row)
                return {P.name + ".duration", static_cast<int>(p)};
        }
        for (std::size_t n = 0; n < integrals_.size(); ++n)
            for (const auto& c : integrals_[n].chain)
                if (c.row == r)
                    return {prob_.integrals[n].name + ".integral[" + prob_.phases[c.phase].name + "," +
                                std::to_string(c.interval) + "]",
                            c.phase, c.interval};
        for (std::size_t e = 0; e < prob_.events.size(); ++e)
            if (r >= event_row_[e] && r < event_row_[e] + prob_.events[e].size())
                return {"event." + prob_.events[e].name + "[" + std::to_string(r - event_row_[e]) + "]"};
        return {"g[" + std::to_string(r) + "]"};
    }

    [[noreturn]] void throw_non_finite(int r) const {
        const auto loc = locate_row(r);
        throw NonFiniteError("non-finite value in constraint " + std::to_string(r) + " (" + loc.name + ")", r,
                             loc.phase, loc.interval, loc.node);
    }

    MultiPhaseProblem prob_;
    std::vector<MeshPhase> mesh_;
    std::vector<PhaseLayout> layout_;
    std::vector<IntegralLayout> integrals_;
    std::vector<int> event_row_;
    int nvar_ = 0, ncon_ = 0;
    std::vector<double> xlo_, xhi_, glo_, ghi_, xscale_, gscale_;
    SparsityPattern pattern_;
};

inline TranscribedNLP transcribe(MultiPhaseProblem problem, std::vector<MeshPhase> mesh) {
    return TranscribedNLP(std::move(problem), std::move(mesh));
}

/// Objective and constraint vector at a point.
inline std::pair<double, std::vector<double>> evaluate_nlp(const NLP& nlp, std::span<const double> x) {
    if (static_cast<int>(x.size()) != nlp.num_variables())
        throw ContractError("evaluate_nlp: point has the wrong dimension");
    std::vector<double> g(nlp.num_constraints());
    nlp.constraints(x, g);
    return {nlp.objective(x), std::move(g)};
}

/**
 * Continuous view of an NLP point: states by the degree-N Lagrange polynomial
 * through the interval's nodes and end point, controls through the nodes only.
 */
class Solution {
public:
    Solution(const TranscribedNLP& nlp, std::vector<double> x) : nlp_(&nlp), x_(std::move(x)) {
        if (static_cast<int>(x_.size()) != nlp.num_variables())
            throw ContractError("Solution: point has the wrong dimension");
    }

    const std::vector<double>& point() const { return x_; }
    const TranscribedNLP& nlp() const { return *nlp_; }
    int phases() const { return static_cast<int>(nlp_->problem().phases.size()); }
    double t0(int p) const { return x_[nlp_->phase_layout(p).t0]; }
    double tf(int p) const { return x_[nlp_->phase_layout(p).tf]; }

    double integral(int i) const { return x_[nlp_->integral_layout(i).final_var()]; }

    void state_at(int p, double t, std::span<double> out) const {
        const auto& L = nlp_->phase_layout(p);
        const int nx = nlp_->problem().phases[p].nx();
        const auto [k, tau] = locate(p, t);
        const auto& rule = lgr_rule(nlp_->mesh()[p].degrees[k]);
        std::vector<double> pts(rule.nodes);
        pts.push_back(1.0);
        std::vector<double> basis;
        lagrange_basis(pts, tau, basis);
        const int s0 = L.interval_start[k];
        for (int s = 0; s < nx; ++s) {
            double v = 0.0;
            for (std::size_t j = 0; j < pts.size(); ++j)
                v += basis[j] * x_[L.state(s0 + static_cast<int>(j), s)];
            out[s] = v;
        }
    }

    /// Time derivative of the state interpolant.
    void state_rate_at(int p, double t, std::span<double> out) const {
        const auto& L = nlp_->phase_layout(p);
        const int nx = nlp_->problem().phases[p].nx();
        const auto [k, tau] = locate(p, t);
        const auto& rule = lgr_rule(nlp_->mesh()[p].degrees[k]);
        std::vector<double> pts(rule.nodes);
        pts.push_back(1.0);
        std::vector<double> basis;
        lagrange_basis_derivative(pts, tau, basis);
        const double dtau_dt = 2.0 / ((tf(p) - t0(p)) * nlp_->mesh()[p].fractions[k]);
        const int s0 = L.interval_start[k];
        // Basis derivatives sum to zero; differencing against the first node
        // makes constants exact.
        for (int s = 0; s < nx; ++s) {
            const double ref = x_[L.state(s0, s)];
            double v = 0.0;
            for (std::size_t j = 1; j < pts.size(); ++j)
                v += basis[j] * (x_[L.state(s0 + static_cast<int>(j), s)] - ref);
            out[s] = v * dtau_dt;
        }
    }

    void control_at(int p, double t, std::span<double> out) const {
        const auto& L = nlp_->phase_layout(p);
        const auto& P = nlp_->problem().phases[p];
        if (P.nu() == 0)
            return;
        const auto [k, tau] = locate(p, t);
        const auto& rule = lgr_rule(nlp_->mesh()[p].degrees[k]);
        std::vector<double> basis;
        lagrange_basis(rule.nodes, tau, basis);
        const int s0 = L.interval_start[k];
        for (int c = 0; c < P.nu(); ++c) {
            double v = 0.0;
            for (std::size_t j = 0; j < rule.nodes.size(); ++j)
                v += basis[j] * x_[L.control(s0 + static_cast<int>(j), c, P.nx())];
            out[c] = v;
        }
    }

    /// Times of the collocation nodes and the end point of phase p.
    std::vector<double> node_times(int p) const {
        const auto& L = nlp_->phase_layout(p);
        std::vector<double> t(L.nodes + 1);
        for (int j = 0; j <= L.nodes; ++j)
            t[j] = nlp_->node_time(p, j, x_);
        return t;
    }

    std::vector<double> node_state(int p, int j) const {
        const auto& L = nlp_->phase_layout(p);
        const int nx = nlp_->problem().phases[p].nx();
        return {x_.begin() + L.state(j, 0), x_.begin() + L.state(j, 0) + nx};
    }

    std::vector<double> node_control(int p, int j) const {
        const auto& L = nlp_->phase_layout(p);
        const auto& P = nlp_->problem().phases[p];
        return {x_.begin() + L.control(j, 0, P.nx()), x_.begin() + L.control(j, 0, P.nx()) + P.nu()};
    }

    /// Interval index and local coordinate tau in [-1, 1] of time t.
    std::pair<int, double> locate(int p, double t) const {
        const double a = t0(p), b = tf(p);
        const double span = b - a;
        const double slack = 1e-9 * std::max(1.0, std::abs(span));
        if (!(t >= a - slack && t <= b + slack))
            throw ContractError("interpolate_solution: time " + std::to_string(t) + " outside phase '" +
                                nlp_->problem().phases[p].name + "' span");
        const auto& L = nlp_->phase_layout(p);
        const auto& M = nlp_->mesh()[p];
        if (span <= 0.0)
            return {0, -1.0};
        const double theta = std::clamp((t - a) / span, 0.0, 1.0);
        int k = static_cast<int>(std::upper_bound(L.interval_begin.begin(), L.interval_begin.end(), theta) -
                                 L.interval_begin.begin()) - 1;
        k = std::clamp(k, 0, M.intervals() - 1);
        double tau = std::clamp(2.0 * (theta - L.interval_begin[k]) / M.fractions[k] - 1.0, -1.0, 1.0);
        // Node times round-trip through t with a few ulps of error; snap so
        // node queries return stored values exactly.
        for (double node : lgr_rule(M.degrees[k]).nodes)
            if (std::abs(tau - node) < 64.0 * std::numeric_limits<double>::epsilon())
                tau = node;
        return {k, tau};
    }

private:
    const TranscribedNLP* nlp_;
    std::vector<double> x_;
};

/// Values of states and controls of phase p at the query times.
struct InterpolatedTrajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> x, u;
};

inline InterpolatedTrajectory interpolate_solution(const Solution& sol, int p, std::span<const double> times) {
    const auto& P = sol.nlp().problem().phases[p];
    InterpolatedTrajectory out;
    for (double t : times) {
        std::vector<double> xs(P.nx()), us(P.nu());
        sol.state_at(p, t, xs);
        sol.control_at(p, t, us);
        out.t.push_back(t);
        out.x.push_back(std::move(xs));
        out.u.push_back(std::move(us));
    }
    return out;
}

} // namespace ascentry
