#pragma once

// Line-search SQP for the NLP interface: block-diagonal damped BFGS Hessian,
// elastic interior-point subproblems and an l1 merit function.

#include <ascentry/nlp.hpp>
#include <ascentry/qp.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ascentry {

enum class SolveStatus { converged, max_iterations, infeasible, numerical_failure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

struct SolveReport {
    SolveStatus status = SolveStatus::numerical_failure;
    int iterations = 0;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double violation = std::numeric_limits<double>::infinity(); // scaled constraint violation, inf-norm
    double stationarity = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    std::vector<double> lambda;  // constraint multipliers, grad f = J'lambda + z
    std::vector<double> z;       // bound multipliers, lower minus upper
    std::string message;
};

class ExternalSolver;

struct SolverOptions {
    double tolerance = 1e-6;
    int max_iterations = 500;
    double derivative_step = 0.0; // relative central-difference step; 0 = cbrt(eps)
    enum class Mode { builtin, external } mode = Mode::builtin;
    std::shared_ptr<ExternalSolver> external;
    std::ostream* iteration_log = nullptr; // CSV
    int threads = 0;

    void validate() const {
        if (!(tolerance > 0.0))
            throw ContractError("SolverOptions: tolerance must be positive");
        if (max_iterations < 1)
            throw ContractError("SolverOptions: max_iterations must be >= 1");
        if (mode == Mode::external && !external)
            throw ContractError("SolverOptions: external mode without a solver plugin");
    }
};

/// Plugin hook for an industrial NLP solver working on the same callbacks.
class ExternalSolver {
public:
    virtual ~ExternalSolver() = default;
    virtual std::string name() const = 0;
    virtual SolveReport solve(const NLP& nlp, std::span<const double> x0, const SolverOptions& options) = 0;
};

/// First-order optimality measures in the problem's scaled units.
struct KKTResiduals {
    double feasibility = 0.0;
    double stationarity = 0.0;
    double complementarity = 0.0;
};

namespace detail {

inline double violation_of(double g, double lo, double hi) { return std::max({0.0, lo - g, g - hi}); }

// A multiplier of sign s on a bound at distance `slack` (infinite when the
// bound is absent). The wrong-sign case counts the multiplier itself.
inline double complementarity_of(double mult, double slack) {
    if (mult == 0.0)
        return 0.0;
    if (!std::isfinite(slack))
        return std::abs(mult);
    return std::abs(mult) * std::max(slack, 0.0);
}

} // namespace detail

/**
 * KKT residuals of (x, lambda, z) recomputed from scratch. Inputs are in
 * problem units; scaling follows the problem's declared magnitudes.
 */
inline KKTResiduals kkt_residuals(const NLP& nlp, std::span<const double> x, std::span<const double> lambda,
                                  std::span<const double> z, const DifferenceOptions& dopt = {}) {
    const int n = nlp.num_variables(), m = nlp.num_constraints();
    std::vector<double> xl(n), xu(n), gl(m), gu(m), sx(n), sg(m), g(m), grad(n);
    nlp.variable_bounds(xl, xu);
    nlp.constraint_bounds(gl, gu);
    nlp.variable_scale(sx);
    nlp.constraint_scale(sg);
    const double sf = nlp.objective_scale();
    nlp.constraints(x, g);
    const auto support = nlp.gradient_sparsity();
    gradient(nlp, x, support, grad, dopt);
    const auto pattern = nlp.jacobian_sparsity();
    const auto coloring = color_columns(pattern);
    std::vector<double> jv(pattern.nnz());
    jacobian(nlp, x, pattern, coloring, jv, dopt);

    KKTResiduals r;
    std::vector<double> res(n);
    for (int i = 0; i < n; ++i)
        res[i] = grad[i] - z[i];
    for (int c = 0; c < n; ++c)
        for (int k = pattern.col_start[c]; k < pattern.col_start[c + 1]; ++k)
            res[c] -= jv[k] * lambda[pattern.row_index[k]];

    // Scaled multipliers: lambda_s = lambda * sg / sf, z_s = z * sx / sf.
    double mult_sum = 0.0;
    for (int j = 0; j < m; ++j)
        mult_sum += std::abs(lambda[j] * sg[j] / sf);
    for (int i = 0; i < n; ++i)
        mult_sum += std::abs(z[i] * sx[i] / sf);
    const double sd = std::max(100.0, mult_sum / std::max(1, n + m)) / 100.0;

    for (int i = 0; i < n; ++i)
        r.stationarity = std::max(r.stationarity, std::abs(res[i] * sx[i] / sf) / sd);
    for (int j = 0; j < m; ++j) {
        r.feasibility = std::max(r.feasibility, detail::violation_of(g[j], gl[j], gu[j]) / sg[j]);
        const double ls = lambda[j] * sg[j] / sf;
        const double slack = ls > 0 ? g[j] - gl[j] : gu[j] - g[j];
        r.complementarity = std::max(r.complementarity, detail::complementarity_of(ls, slack / sg[j]) / sd);
    }
    for (int i = 0; i < n; ++i) {
        const double zs = z[i] * sx[i] / sf;
        const double slack = zs > 0 ? x[i] - xl[i] : xu[i] - x[i];
        r.complementarity = std::max(r.complementarity, detail::complementarity_of(zs, slack / sx[i]) / sd);
    }
    return r;
}

namespace detail {

/// Block-diagonal damped BFGS approximation in scaled variables.
class BlockBFGS {
public:
    void init(int n, std::vector<std::vector<int>> blocks) {
        std::vector<char> covered(n, 0);
        for (const auto& b : blocks)
            for (int i : b) {
                if (i < 0 || i >= n || covered[i])
                    throw ContractError("hessian_blocks: blocks must be disjoint and in range");
                covered[i] = 1;
            }
        for (int i = 0; i < n; ++i)
            if (!covered[i])
                blocks.push_back({i});
        blocks_ = std::move(blocks);
        B_.clear();
        fresh_.clear();
        for (const auto& b : blocks_) {
            B_.push_back(Eigen::MatrixXd::Identity(b.size(), b.size()));
            fresh_.push_back(true);
        }
        std::vector<Eigen::Triplet<double>> t;
        for (const auto& b : blocks_)
            for (int p : b)
                for (int q : b)
                    if (p >= q)
                        t.emplace_back(p, q, 1.0);
        H_.resize(n, n);
        H_.setFromTriplets(t.begin(), t.end());
        H_.makeCompressed();
        refresh();
    }

    void reset() {
        for (std::size_t k = 0; k < B_.size(); ++k) {
            B_[k].setIdentity();
            fresh_[k] = true;
        }
        refresh();
    }

    void update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            const int nb = static_cast<int>(b.size());
            Eigen::VectorXd sb(nb), yb(nb);
            for (int i = 0; i < nb; ++i) {
                sb[i] = s[b[i]];
                yb[i] = y[b[i]];
            }
            const double ss = sb.squaredNorm();
            if (ss < 1e-24)
                continue;
            Eigen::MatrixXd& B = B_[k];
            const double sy = sb.dot(yb);
            if (fresh_[k] && sy > 1e-12 * ss) {
                B *= std::clamp(yb.squaredNorm() / sy, 1e-6, 1e6);
                fresh_[k] = false;
            }
            const Eigen::VectorXd Bs = B * sb;
            const double sBs = sb.dot(Bs);
            if (!(sBs > 0.0))
                continue;
            Eigen::VectorXd r = yb;
            if (sy < 0.2 * sBs) {
                const double theta = 0.8 * sBs / (sBs - sy);
                r = theta * yb + (1.0 - theta) * Bs;
            }
            const double sr = sb.dot(r);
            if (!(sr > 1e-16 * ss))
                continue;
            B += -(Bs * Bs.transpose()) / sBs + (r * r.transpose()) / sr;
            B = 0.5 * (B + B.transpose());
        }
        refresh();
    }

    const Eigen::SparseMatrix<double>& matrix() const { return H_; }

private:
    void refresh() {
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            for (std::size_t p = 0; p < b.size(); ++p)
                for (std::size_t q = 0; q < b.size(); ++q)
                    if (b[p] >= b[q])
                        H_.coeffRef(b[p], b[q]) = B_[k](p, q);
        }
    }

    std::vector<std::vector<int>> blocks_;
    std::vector<Eigen::MatrixXd> B_;
    std::vector<bool> fresh_;
    Eigen::SparseMatrix<double> H_;
};

} // namespace detail

/**
 * Solves the NLP from x0 (projected into the bounds).
 *
 * Converged means scaled feasibility, stationarity and complementarity are
 * all within the tolerance; otherwise the best iterate is returned with the
 * reason in `status`.
 */
inline SolveReport solve(const NLP& nlp, std::span<const double> x0, const SolverOptions& options = {}) {
    options.validate();
    if (options.mode == SolverOptions::Mode::external)
        return options.external->solve(nlp, x0, options);

    const int n = nlp.num_variables(), m = nlp.num_constraints();
    if (static_cast<int>(x0.size()) != n)
        throw ContractError("solve: x0 has the wrong dimension");
    const double tol = options.tolerance;
    const double inf = std::numeric_limits<double>::infinity();
    DifferenceOptions dopt;
    dopt.relative_step = options.derivative_step;
    dopt.threads = options.threads;

    std::vector<double> xl(n), xu(n), gl(m), gu(m), sx(n), sg(m);
    nlp.variable_bounds(xl, xu);
    nlp.constraint_bounds(gl, gu);
    nlp.variable_scale(sx);
    nlp.constraint_scale(sg);
    const double sf = nlp.objective_scale();
    for (int i = 0; i < n; ++i)
        if (!(sx[i] > 0.0) || xl[i] > xu[i])
            throw ContractError("solve: invalid bounds or scale for " + nlp.variable_name(i));
    for (int j = 0; j < m; ++j)
        if (!(sg[j] > 0.0) || gl[j] > gu[j])
            throw ContractError("solve: invalid bounds or scale for " + nlp.constraint_name(j));

    const auto pattern = nlp.jacobian_sparsity();
    const auto coloring = color_columns(pattern);
    const auto support = nlp.gradient_sparsity();

    // Scaled Jacobian shares the pattern's compressed-column layout.
    Eigen::SparseMatrix<double> Js(m, n);
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(pattern.nnz());
        for (int c = 0; c < n; ++c)
            for (int k = pattern.col_start[c]; k < pattern.col_start[c + 1]; ++k)
                t.emplace_back(pattern.row_index[k], c, 1.0);
        Js.setFromTriplets(t.begin(), t.end());
        Js.makeCompressed();
    }

    struct Point {
        std::vector<double> x;
        double f = 0.0;
        std::vector<double> g;
        double viol_inf = 0.0, viol_1 = 0.0;
    };
    auto evaluate = [&](Point& p) -> bool {
        try {
            p.f = nlp.objective(p.x);
            p.g.resize(m);
            nlp.constraints(p.x, p.g);
        } catch (const std::exception&) {
            return false;
        }
        if (!std::isfinite(p.f))
            return false;
        p.viol_inf = p.viol_1 = 0.0;
        for (int j = 0; j < m; ++j) {
            if (!std::isfinite(p.g[j]))
                return false;
            const double v = detail::violation_of(p.g[j], gl[j], gu[j]) / sg[j];
            p.viol_inf = std::max(p.viol_inf, v);
            p.viol_1 += v;
        }
        return true;
    };

    std::vector<double> grad(n), jv(pattern.nnz());
    Eigen::VectorXd gs(n);
    auto derivatives = [&](const Point& p) {
        gradient(nlp, p.x, support, grad, dopt);
        jacobian(nlp, p.x, pattern, coloring, jv, dopt);
        for (int i = 0; i < n; ++i)
            gs[i] = grad[i] * sx[i] / sf;
        double* v = Js.valuePtr();
        for (int c = 0; c < n; ++c)
            for (int k = pattern.col_start[c]; k < pattern.col_start[c + 1]; ++k)
                v[k] = jv[k] * sx[c] / sg[pattern.row_index[k]];
    };

    SolveReport report;
    Point cur;
    cur.x.assign(x0.begin(), x0.end());
    for (int i = 0; i < n; ++i)
        cur.x[i] = std::clamp(cur.x[i], xl[i], xu[i]);
    if (!evaluate(cur)) {
        report.status = SolveStatus::numerical_failure;
        report.message = "callbacks failed at the initial point";
        report.x = cur.x;
        return report;
    }
    try {
        derivatives(cur);
    } catch (const std::exception& e) {
        report.status = SolveStatus::numerical_failure;
        report.message = e.what();
        report.x = cur.x;
        return report;
    }

    detail::BlockBFGS bfgs;
    const auto blocks = nlp.hessian_blocks();
    bfgs.init(n, blocks);
    QPSolver qps;

    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m), zb = Eigen::VectorXd::Zero(n);
    double nu = 1.0;
    std::deque<std::pair<double, double>> history; // (f, viol_1) for the nonmonotone reference
    const int memory = 4;
    int consecutive_failures = 0;

    // Best iterate: feasible with lowest objective, else least infeasible.
    Point best = cur;
    Eigen::VectorXd best_lam = lam, best_z = zb;
    auto better = [&](const Point& a, const Point& b) {
        const bool fa = a.viol_inf <= tol, fb = b.viol_inf <= tol;
        if (fa != fb)
            return fa;
        return fa ? a.f < b.f : a.viol_inf < b.viol_inf;
    };

    if (options.iteration_log)
        *options.iteration_log << "iteration,objective,feasibility,step_norm,alpha,stationarity\n";

    auto scaled_stationarity = [&](const Eigen::VectorXd& l, const Eigen::VectorXd& z) {
        Eigen::VectorXd r = gs - Js.transpose() * l - z;
        const double msum = l.lpNorm<1>() + z.lpNorm<1>();
        const double sd = std::max(100.0, msum / std::max(1, n + m)) / 100.0;
        return r.lpNorm<Eigen::Infinity>() / sd;
    };
    auto scaled_complementarity = [&](const Point& p, const Eigen::VectorXd& l, const Eigen::VectorXd& z) {
        const double msum = l.lpNorm<1>() + z.lpNorm<1>();
        const double sd = std::max(100.0, msum / std::max(1, n + m)) / 100.0;
        double c = 0.0;
        for (int j = 0; j < m; ++j) {
            const double slack = l[j] > 0 ? p.g[j] - gl[j] : gu[j] - p.g[j];
            c = std::max(c, detail::complementarity_of(l[j], slack / sg[j]));
        }
        for (int i = 0; i < n; ++i) {
            const double slack = z[i] > 0 ? p.x[i] - xl[i] : xu[i] - p.x[i];
            c = std::max(c, detail::complementarity_of(z[i], slack / sx[i]));
        }
        return c / sd;
    };

    auto finish = [&](SolveStatus status, const Point& p, const Eigen::VectorXd& l, const Eigen::VectorXd& z,
                      int iterations, std::string msg) {
        report.status = status;
        report.iterations = iterations;
        report.x = p.x;
        report.objective = p.f;
        report.violation = p.viol_inf;
        report.lambda.resize(m);
        report.z.resize(n);
        for (int j = 0; j < m; ++j)
            report.lambda[j] = l[j] * sf / sg[j];
        for (int i = 0; i < n; ++i)
            report.z[i] = z[i] * sf / sx[i];
        report.message = std::move(msg);
        return report;
    };

    QPProblem qp;
    qp.H = &bfgs.matrix();
    qp.J = &Js;
    qp.c.resize(m);
    qp.c_lo.resize(m);
    qp.c_hi.resize(m);
    qp.d_lo.resize(n);
    qp.d_hi.resize(n);

    auto solve_subproblem = [&](const Point& p, const std::vector<double>& cvals, QPResult& out) {
        for (int j = 0; j < m; ++j) {
            qp.c[j] = cvals[j] / sg[j];
            qp.c_lo[j] = std::isfinite(gl[j]) ? gl[j] / sg[j] : -inf;
            qp.c_hi[j] = std::isfinite(gu[j]) ? gu[j] / sg[j] : inf;
        }
        for (int i = 0; i < n; ++i) {
            qp.d_lo[i] = std::isfinite(xl[i]) ? (xl[i] - p.x[i]) / sx[i] : -inf;
            qp.d_hi[i] = std::isfinite(xu[i]) ? (xu[i] - p.x[i]) / sx[i] : inf;
        }
        qp.g = gs;
        double pen = std::max(100.0, 10.0 * lam.lpNorm<Eigen::Infinity>());
        for (int attempt = 0; attempt < 4; ++attempt) {
            qp.elastic_penalty = pen;
            out = qps.solve(qp);
            if (out.status == QPResult::Status::failed)
                return false;
            const double ymax = out.y.size() ? out.y.lpNorm<Eigen::Infinity>() : 0.0;
            // Past this the linearization is inconsistent and a larger penalty only hurts conditioning.
            if (ymax < 0.99 * pen || pen >= 1e8)
                break;
            pen *= 100.0;
        }
        return out.d.allFinite();
    };

    for (int it = 0;; ++it) {
        if (better(cur, best)) {
            best = cur;
            best_lam = lam;
            best_z = zb;
        }
        if (it >= options.max_iterations)
            return finish(SolveStatus::max_iterations, best, best_lam, best_z, it, "iteration limit reached");

        QPResult sub;
        if (!solve_subproblem(cur, cur.g, sub)) {
            if (consecutive_failures++ == 0) {
                bfgs.reset();
                --it;
                continue;
            }
            return finish(SolveStatus::numerical_failure, best, best_lam, best_z, it, "QP subproblem failed");
        }
        const Eigen::VectorXd& d = sub.d;

        // KKT test at the current point with the fresh multipliers.
        const double stat = scaled_stationarity(sub.y, sub.z);
        const double comp = scaled_complementarity(cur, sub.y, sub.z);
        if (cur.viol_inf <= tol && stat <= tol && comp <= tol) {
            report.stationarity = stat;
            return finish(SolveStatus::converged, cur, sub.y, sub.z, it, "");
        }

        const double dnorm = d.lpNorm<Eigen::Infinity>();
        if (dnorm <= 1e-14 * (1.0 + Eigen::Map<const Eigen::VectorXd>(cur.x.data(), n).lpNorm<Eigen::Infinity>())) {
            if (cur.viol_inf > tol)
                return finish(SolveStatus::infeasible, best, best_lam, best_z, it,
                              "stationary point of the constraint violation");
        }

        // Linearized violation after the full step.
        Eigen::VectorXd lin = Js * d;
        double lin_viol = 0.0;
        for (int j = 0; j < m; ++j)
            lin_viol += detail::violation_of(qp.c[j] + lin[j], qp.c_lo[j], qp.c_hi[j]);
        const double gd = gs.dot(d);
        const double dHd = d.dot(qp.H->selfadjointView<Eigen::Lower>() * d);
        const double vred = cur.viol_1 - lin_viol;
        double nu_needed = 1.1 * sub.y.lpNorm<Eigen::Infinity>() + 1e-6;
        if (vred > 1e-12)
            nu_needed = std::max(nu_needed, (gd + 0.5 * std::max(dHd, 0.0)) / (0.9 * vred));
        // A penalty left over from an early elastic phase would make the merit blind to
        // the objective, so let it relax gradually.
        if (nu < nu_needed)
            nu = nu_needed;
        else if (nu > 10.0 * nu_needed)
            nu = std::max(10.0 * nu_needed, 0.1 * nu);
        const double pred = -(gd + 0.5 * std::max(dHd, 0.0)) + nu * vred;

        double phi_ref = cur.f / sf + nu * cur.viol_1;
        for (const auto& [hf, hv] : history)
            phi_ref = std::max(phi_ref, hf / sf + nu * hv);
        const double eta = 1e-4;

        auto trial_from = [&](const Eigen::VectorXd& step, double alpha, Point& t) {
            t.x.resize(n);
            for (int i = 0; i < n; ++i)
                t.x[i] = std::clamp(cur.x[i] + alpha * step[i] * sx[i], xl[i], xu[i]);
            return evaluate(t);
        };
        auto merit = [&](const Point& p) { return p.f / sf + nu * p.viol_1; };

        Point trial;
        double alpha = 1.0;
        bool accepted = false;
        const double min_alpha = 1e-10;
        for (int ls = 0; alpha >= min_alpha; ++ls) {
            const bool ok = trial_from(d, alpha, trial);
            if (ok && merit(trial) <= phi_ref - eta * alpha * std::max(pred, 0.0)) {
                accepted = true;
                break;
            }
            if (ls == 0 && ok && m > 0) {
                // Second-order corrections for the full step, repeated while they keep
                // reducing the violation.
                Point base = trial;
                Eigen::VectorXd base_step = d;
                for (int k = 0; k < 4 && !accepted; ++k) {
                    std::vector<double> csoc(m);
                    const Eigen::VectorXd lin_k = Js * base_step;
                    for (int j = 0; j < m; ++j)
                        csoc[j] = base.g[j] - lin_k[j] * sg[j];
                    QPResult soc;
                    if (!solve_subproblem(cur, csoc, soc))
                        break;
                    Point ts;
                    const bool sok = trial_from(soc.d, 1.0, ts);
                    if (!sok)
                        break;
                    if (merit(ts) <= phi_ref - eta * std::max(pred, 0.0)) {
                        trial = std::move(ts);
                        accepted = true;
                    } else if (ts.viol_1 < base.viol_1) {
                        base = std::move(ts);
                        base_step = soc.d;
                    } else {
                        break;
                    }
                }
                if (accepted)
                    break;
            }
            alpha *= ok ? 0.5 : 0.25;
        }
        if (!accepted) {
            if (consecutive_failures++ == 0) {
                bfgs.reset();
                history.clear();
                --it;
                continue;
            }
            return finish(cur.viol_inf > tol ? SolveStatus::infeasible : SolveStatus::numerical_failure, best,
                          best_lam, best_z, it, "line search failed");
        }
        consecutive_failures = 0;

        // Quasi-Newton update with the new multipliers.
        const Eigen::VectorXd lam_new = sub.y, z_new = sub.z;
        const Eigen::VectorXd grad_lag_old = gs - Js.transpose() * lam_new;
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i)
            s[i] = (trial.x[i] - cur.x[i]) / sx[i];

        history.emplace_back(cur.f, cur.viol_1);
        if (static_cast<int>(history.size()) > memory)
            history.pop_front();
        cur = std::move(trial);
        try {
            derivatives(cur);
        } catch (const std::exception& e) {
            return finish(SolveStatus::numerical_failure, best, best_lam, best_z, it + 1, e.what());
        }
        const Eigen::VectorXd grad_lag_new = gs - Js.transpose() * lam_new;
        bfgs.update(s, grad_lag_new - grad_lag_old);
        lam = lam_new;
        zb = z_new;

        if (options.iteration_log)
            *options.iteration_log << it + 1 << ',' << cur.f << ',' << cur.viol_inf << ',' << s.lpNorm<Eigen::Infinity>()
                                   << ',' << alpha << ',' << stat << '\n';
    }
}

} // namespace ascentry
