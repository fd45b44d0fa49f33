#pragma once

// hp mesh refinement: estimate the per-interval dynamics residual of the
// interpolated solution, then raise the degree or split offending intervals.

#include <ascentry/errors.hpp>
#include <ascentry/sqp.hpp>
#include <ascentry/transcription.hpp>

#include <json.hpp>

#include <cmath>
#include <memory>
#include <ostream>
#include <vector>

namespace ascentry {

struct RefinementOptions {
    double mesh_tolerance = 1e-4;
    int max_refinements = 10;
    int n_min = 3;
    int n_max = 10;
    int subdivision = 2;

    void validate() const {
        if (!(mesh_tolerance > 0.0))
            throw ContractError("RefinementOptions: mesh_tolerance must be positive");
        if (max_refinements < 0)
            throw ContractError("RefinementOptions: max_refinements must be non-negative");
        if (n_min < 1 || n_max > lgr_max_degree || n_min > n_max)
            throw ContractError("RefinementOptions: need 1 <= n_min <= n_max <= 64");
        if (subdivision < 2)
            throw ContractError("RefinementOptions: subdivision must be at least 2");
    }
};

/**
 * Per-interval error of phase p: at N + 10 interior checkpoints the derivative
 * of the state interpolant is compared with the dynamics. The residual is
 * multiplied by the interval duration, turning it into a state-sized error,
 * and divided by 1 + max|x_s| over the interval.
 */
inline std::vector<double> estimate_error(const Solution& sol, int p) {
    const auto& P = sol.nlp().problem().phases[p];
    const auto& M = sol.nlp().mesh()[p];
    const auto& L = sol.nlp().phase_layout(p);
    const int nx = P.nx(), nu = P.nu();
    const double duration = sol.tf(p) - sol.t0(p);
    std::vector<double> err(M.intervals(), 0.0);
    parallel_for(M.intervals(), evaluation_threads(), [&](int k, int) {
        const int N = M.degrees[k], checkpoints = N + 10;
        const double span = duration * M.fractions[k];
        const double a = sol.t0(p) + L.interval_begin[k] * duration;
        std::vector<double> magnitude(nx, 0.0);
        for (int j = 0; j <= N; ++j) {
            const auto xs = sol.node_state(p, L.interval_start[k] + j);
            for (int s = 0; s < nx; ++s)
                magnitude[s] = std::max(magnitude[s], std::abs(xs[s]));
        }
        std::vector<double> x(nx), rate(nx), u(nu), f(nx);
        double e = 0.0;
        try {
            for (int c = 1; c <= checkpoints; ++c) {
                const double t = a + span * c / (checkpoints + 1.0);
                sol.state_at(p, t, x);
                sol.state_rate_at(p, t, rate);
                sol.control_at(p, t, u);
                P.dynamics(t, x, u, f);
                for (int s = 0; s < nx; ++s) {
                    magnitude[s] = std::max(magnitude[s], std::abs(x[s]));
                    e = std::max(e, std::abs(rate[s] - f[s]) * span / (1.0 + magnitude[s]));
                }
            }
        } catch (const std::exception&) {
            e = std::numeric_limits<double>::infinity();
        }
        err[k] = std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    });
    return err;
}

struct RefineResult {
    MeshPhase mesh;
    bool fixed_point = false; // no interval changed
};

/// Raises degrees by ceil(log10(e/tol)) where that stays within n_max;
/// otherwise splits the interval into equal parts of degree max(n_min, ceil(N/parts)).
inline RefineResult refine(const MeshPhase& mesh, std::span<const double> errors, const RefinementOptions& opt) {
    opt.validate();
    mesh.validate();
    if (static_cast<int>(errors.size()) != mesh.intervals())
        throw ContractError("refine: one error per interval required");
    RefineResult out;
    bool changed = false;
    for (int k = 0; k < mesh.intervals(); ++k) {
        const int N = mesh.degrees[k];
        const double e = errors[k];
        if (e <= opt.mesh_tolerance) {
            out.mesh.fractions.push_back(mesh.fractions[k]);
            out.mesh.degrees.push_back(N);
            continue;
        }
        changed = true;
        const int raise = std::isfinite(e) ? std::max(1, static_cast<int>(std::ceil(std::log10(e / opt.mesh_tolerance))))
                                           : opt.n_max;
        if (N + raise <= opt.n_max) {
            out.mesh.fractions.push_back(mesh.fractions[k]);
            out.mesh.degrees.push_back(N + raise);
            continue;
        }
        const int parts = opt.subdivision;
        const int degree = std::max(opt.n_min, (N + parts - 1) / parts);
        for (int s = 0; s < parts; ++s) {
            out.mesh.fractions.push_back(mesh.fractions[k] / parts);
            out.mesh.degrees.push_back(degree);
        }
    }
    // Keep fractions summing to one exactly in the presence of round-off.
    const double total = std::accumulate(out.mesh.fractions.begin(), out.mesh.fractions.end(), 0.0);
    for (auto& f : out.mesh.fractions)
        f /= total;
    out.fixed_point = !changed;
    return out;
}

struct MeshIteration {
    std::vector<MeshPhase> mesh;
    std::vector<std::vector<double>> errors; // per phase, per interval
    std::vector<std::pair<double, double>> phase_times;
    SolveStatus status = SolveStatus::numerical_failure;
    int solver_iterations = 0;
    double objective = 0.0;
    double violation = 0.0;
    double max_error = 0.0;
};

struct RefinementResult {
    std::vector<MeshIteration> history;
    std::shared_ptr<TranscribedNLP> nlp;
    std::vector<double> x;
    SolveReport report;
    bool mesh_converged = false;

    Solution solution() const { return Solution(*nlp, x); }
    int refinements() const { return static_cast<int>(history.size()) - 1; }
};

/// Guess functions that interpolate a previous solution; the closures keep
/// the previous transcription alive.
inline std::vector<TranscribedNLP::PhaseGuess> warm_start(std::shared_ptr<const TranscribedNLP> nlp,
                                                          std::vector<double> x) {
    auto previous = std::make_shared<const Solution>(*nlp, std::move(x));
    std::vector<TranscribedNLP::PhaseGuess> g;
    for (int p = 0; p < previous->phases(); ++p) {
        const double a = previous->t0(p), b = previous->tf(p);
        g.push_back({a, b, [nlp, previous, p, a, b](double t, std::span<double> xs, std::span<double> us) {
                         const double tc = std::clamp(t, std::min(a, b), std::max(a, b));
                         previous->state_at(p, tc, xs);
                         previous->control_at(p, tc, us);
                     }});
    }
    return g;
}

/**
 * Solve, estimate, refine until every interval meets the tolerance, the mesh
 * stops changing, or max_refinements meshes have been tried beyond the first.
 */
inline RefinementResult refine_and_solve(const MultiPhaseProblem& problem, std::vector<MeshPhase> mesh,
                                         const std::vector<TranscribedNLP::PhaseGuess>& guess,
                                         const SolverOptions& solver, const RefinementOptions& opt) {
    opt.validate();
    RefinementResult result;
    std::vector<TranscribedNLP::PhaseGuess> start = guess;
    for (int it = 0;; ++it) {
        result.nlp = std::make_shared<TranscribedNLP>(problem, mesh);
        const auto x0 = result.nlp->initial_point(start);
        result.report = solve(*result.nlp, x0, solver);
        result.x = result.report.x.empty() ? x0 : result.report.x;
        const Solution sol = result.solution();

        MeshIteration rec;
        rec.mesh = mesh;
        rec.status = result.report.status;
        rec.solver_iterations = result.report.iterations;
        rec.objective = result.report.objective;
        rec.violation = result.report.violation;
        for (int p = 0; p < sol.phases(); ++p) {
            rec.errors.push_back(estimate_error(sol, p));
            rec.phase_times.emplace_back(sol.t0(p), sol.tf(p));
            for (double e : rec.errors.back())
                rec.max_error = std::max(rec.max_error, e);
        }
        result.history.push_back(rec);

        if (rec.max_error <= opt.mesh_tolerance) {
            result.mesh_converged = true;
            break;
        }
        if (it >= opt.max_refinements)
            break;
        bool fixed = true;
        std::vector<MeshPhase> next;
        for (std::size_t p = 0; p < mesh.size(); ++p) {
            auto r = refine(mesh[p], rec.errors[p], opt);
            fixed = fixed && r.fixed_point;
            next.push_back(std::move(r.mesh));
        }
        if (fixed)
            break;
        mesh = std::move(next);
        start = warm_start(result.nlp, result.x);
    }
    return result;
}

/// Per-iteration interval boundaries (absolute times), degrees and errors.
inline nlohmann::json mesh_history_json(const RefinementResult& r) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        const auto& h = r.history[i];
        nlohmann::json phases = nlohmann::json::array();
        for (std::size_t p = 0; p < h.mesh.size(); ++p) {
            const auto [t0, tf] = h.phase_times[p];
            std::vector<double> bounds{t0};
            double acc = 0.0;
            for (double f : h.mesh[p].fractions) {
                acc += f;
                bounds.push_back(t0 + acc * (tf - t0));
            }
            std::vector<nlohmann::json> errs;
            for (double e : h.errors[p])
                errs.push_back(std::isfinite(e) ? nlohmann::json(e) : nlohmann::json("inf"));
            phases.push_back({{"boundaries", bounds}, {"degrees", h.mesh[p].degrees}, {"errors", errs}});
        }
        j.push_back({{"iteration", i},
                     {"status", to_string(h.status)},
                     {"solver_iterations", h.solver_iterations},
                     {"objective", h.objective},
                     {"violation", h.violation},
                     {"max_error", std::isfinite(h.max_error) ? nlohmann::json(h.max_error) : nlohmann::json("inf")},
                     {"phases", phases}});
    }
    return j;
}

} // namespace ascentry
