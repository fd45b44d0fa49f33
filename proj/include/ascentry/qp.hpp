#pragma once

// Convex QP by a Mehrotra predictor-corrector interior-point method:
//
//   min 1/2 d'Hd + g'd + nu * sum(p + n)
//   s.t. c_lo <= c + J d + p - n <= c_hi,  d_lo <= d <= d_hi,  p, n >= 0.
//
// The elastic variables p, n keep every subproblem feasible. Eliminating the
// per-row slacks leaves the quasi-definite system [H + S, J'; J, -D] with
// D > 0, which a sparse LDL' factors without pivoting.

#include <ascentry/errors.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ascentry {

struct QPProblem {
    const Eigen::SparseMatrix<double>* H = nullptr; // n x n, lower triangle referenced
    const Eigen::SparseMatrix<double>* J = nullptr; // m x n
    Eigen::VectorXd g;
    Eigen::VectorXd c, c_lo, c_hi;
    Eigen::VectorXd d_lo, d_hi;
    double elastic_penalty = 0.0; // 0 disables the elastic variables
};

struct QPResult {
    enum class Status { optimal, max_iterations, failed } status = Status::failed;
    Eigen::VectorXd d;
    Eigen::VectorXd y;       // constraint multipliers, g + Hd = J'y + z
    Eigen::VectorXd z;       // bound multipliers, lower minus upper
    double elastic_sum = 0.0;
    int iterations = 0;
};

struct QPOptions {
    double tolerance = 1e-9;
    int max_iterations = 200;
    double regularization = 1e-11;
};

/// Keeps the symbolic factorization between calls with the same pattern.
class QPSolver {
public:
    QPResult solve(const QPProblem& qp, const QPOptions& opt = {}) {
        const Eigen::SparseMatrix<double>& H = *qp.H;
        const Eigen::SparseMatrix<double>& J = *qp.J;
        const int n = static_cast<int>(H.cols()), m = static_cast<int>(J.rows());
        if (H.rows() != n || J.cols() != n || qp.g.size() != n || qp.c.size() != m || qp.c_lo.size() != m ||
            qp.c_hi.size() != m || qp.d_lo.size() != n || qp.d_hi.size() != n)
            throw ContractError("QPSolver: dimension mismatch");
        const double inf = std::numeric_limits<double>::infinity();

        // Variable classification.
        std::vector<char> fixed(n, 0);
        for (int i = 0; i < n; ++i)
            fixed[i] = std::isfinite(qp.d_lo[i]) &&
                       qp.d_hi[i] - qp.d_lo[i] <= 1e-13 * std::max(1.0, std::abs(qp.d_lo[i]));
        std::vector<char> row_on(m, 0), row_eq(m, 0);
        for (int j = 0; j < m; ++j) {
            row_on[j] = std::isfinite(qp.c_lo[j]) || std::isfinite(qp.c_hi[j]);
            row_eq[j] = std::isfinite(qp.c_lo[j]) &&
                        qp.c_hi[j] - qp.c_lo[j] <= 1e-13 * std::max(1.0, std::abs(qp.c_lo[j]));
        }
        const bool elastic = qp.elastic_penalty > 0.0;

        // Extras: w (range rows), p and n (elastic); one row each.
        std::vector<int> ex_row;
        std::vector<double> ex_a, ex_cost, ex_l, ex_u;
        std::vector<std::vector<int>> row_ex(m);
        auto add_extra = [&](int row, double a, double cost, double l, double u) {
            row_ex[row].push_back(static_cast<int>(ex_row.size()));
            ex_row.push_back(row);
            ex_a.push_back(a);
            ex_cost.push_back(cost);
            ex_l.push_back(l);
            ex_u.push_back(u);
        };
        for (int j = 0; j < m; ++j) {
            if (!row_on[j])
                continue;
            if (!row_eq[j])
                add_extra(j, -1.0, 0.0, qp.c_lo[j], qp.c_hi[j]);
            if (elastic) {
                add_extra(j, 1.0, qp.elastic_penalty, 0.0, inf);
                add_extra(j, -1.0, qp.elastic_penalty, 0.0, inf);
            }
        }
        const int ne = static_cast<int>(ex_row.size());
        const int N = n + ne;

        std::vector<double> lo(N), hi(N), x(N, 0.0);
        for (int i = 0; i < n; ++i) {
            lo[i] = fixed[i] ? -inf : qp.d_lo[i];
            hi[i] = fixed[i] ? inf : qp.d_hi[i];
        }
        for (int e = 0; e < ne; ++e) {
            lo[n + e] = ex_l[e];
            hi[n + e] = ex_u[e];
        }
        std::vector<char> has_l(N), has_u(N);
        for (int i = 0; i < N; ++i) {
            has_l[i] = std::isfinite(lo[i]);
            has_u[i] = std::isfinite(hi[i]);
        }

        // Starting point: d pushed into the box, row slacks chosen so every row holds.
        const double kappa = 1e-2;
        auto push_inside = [&](int i, double v) {
            if (has_l[i] && has_u[i]) {
                const double margin = std::min(kappa * std::max(1.0, std::abs(v)), 0.5 * (hi[i] - lo[i]));
                return std::clamp(v, lo[i] + margin, hi[i] - margin);
            }
            if (has_l[i])
                return std::max(v, lo[i] + kappa * std::max(1.0, std::abs(lo[i])));
            if (has_u[i])
                return std::min(v, hi[i] - kappa * std::max(1.0, std::abs(hi[i])));
            return v;
        };
        for (int i = 0; i < n; ++i)
            x[i] = fixed[i] ? 0.0 : push_inside(i, 0.0);
        Eigen::VectorXd dvec = Eigen::Map<Eigen::VectorXd>(x.data(), n);
        Eigen::VectorXd Jd = J * dvec;
        for (int j = 0; j < m; ++j) {
            if (!row_on[j])
                continue;
            double r = Jd[j] + qp.c[j];
            for (int e : row_ex[j]) {
                if (ex_cost[e] == 0.0) { // w
                    x[n + e] = push_inside(n + e, r);
                    r -= x[n + e];
                }
            }
            if (row_eq[j])
                r -= qp.c_lo[j];
            for (int e : row_ex[j]) {
                if (ex_cost[e] == 0.0)
                    continue;
                x[n + e] = ex_a[e] > 0 ? std::max(-r, 0.0) + kappa : std::max(r, 0.0) + kappa;
            }
        }

        std::vector<double> zl(N, 0.0), zu(N, 0.0), y(m, 0.0);
        for (int i = 0; i < N; ++i) {
            const double base = i >= n ? std::max(1.0, ex_cost[i - n]) : 1.0;
            if (has_l[i])
                zl[i] = base;
            if (has_u[i])
                zu[i] = base;
        }
        int ncomp = 0;
        for (int i = 0; i < N; ++i)
            ncomp += has_l[i] + has_u[i];

        assemble(H, J, fixed, row_on);

        const double scale_p = 1.0 + qp.c.lpNorm<Eigen::Infinity>();
        const double scale_d = 1.0 + std::max(qp.g.lpNorm<Eigen::Infinity>(), qp.elastic_penalty);

        std::vector<double> rd(N), rp(m), sl(N), su(N), sigma(N);
        std::vector<double> dx(N), dzl(N), dzu(N), dy(m), dx_a(N), dzl_a(N), dzu_a(N), rcl(N), rcu(N);
        Eigen::VectorXd rhs(n + m), sol(n + m);
        Eigen::VectorXd tmp_n(n), tmp_m(m);

        auto residuals = [&] {
            dvec = Eigen::Map<Eigen::VectorXd>(x.data(), n);
            Eigen::VectorXd Hd = H.selfadjointView<Eigen::Lower>() * dvec;
            Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), m);
            Eigen::VectorXd Jty = J.transpose() * yv;
            Jd = J * dvec;
            for (int i = 0; i < n; ++i)
                rd[i] = fixed[i] ? 0.0 : Hd[i] + qp.g[i] - Jty[i] - zl[i] + zu[i];
            for (int e = 0; e < ne; ++e)
                rd[n + e] = ex_cost[e] - ex_a[e] * y[ex_row[e]] - zl[n + e] + zu[n + e];
            for (int j = 0; j < m; ++j) {
                if (!row_on[j]) {
                    rp[j] = 0.0;
                    continue;
                }
                double r = Jd[j] + qp.c[j] - (row_eq[j] ? qp.c_lo[j] : 0.0);
                for (int e : row_ex[j])
                    r += ex_a[e] * x[n + e];
                rp[j] = r;
            }
            for (int i = 0; i < N; ++i) {
                sl[i] = has_l[i] ? x[i] - lo[i] : 0.0;
                su[i] = has_u[i] ? hi[i] - x[i] : 0.0;
            }
        };

        // Solves the Newton system for the given complementarity right-hand sides.
        auto newton = [&](const std::vector<double>& r_cl, const std::vector<double>& r_cu, std::vector<double>& ox,
                          std::vector<double>& ozl, std::vector<double>& ozu, std::vector<double>& oy) {
            std::vector<double> rho(N);
            for (int i = 0; i < N; ++i) {
                double v = -rd[i];
                if (has_l[i])
                    v += r_cl[i] / sl[i];
                if (has_u[i])
                    v -= r_cu[i] / su[i];
                rho[i] = v;
            }
            for (int i = 0; i < n; ++i)
                rhs[i] = fixed[i] ? 0.0 : rho[i];
            for (int j = 0; j < m; ++j) {
                double v = -rp[j];
                for (int e : row_ex[j])
                    v -= ex_a[e] * rho[n + e] / sigma[n + e];
                rhs[n + j] = row_on[j] ? v : 0.0;
            }
            sol = solve_refined(rhs);
            for (int i = 0; i < n; ++i)
                ox[i] = fixed[i] ? 0.0 : sol[i];
            for (int j = 0; j < m; ++j)
                oy[j] = row_on[j] ? -sol[n + j] : 0.0;
            for (int e = 0; e < ne; ++e)
                ox[n + e] = (rho[n + e] + ex_a[e] * oy[ex_row[e]]) / sigma[n + e];
            for (int i = 0; i < N; ++i) {
                ozl[i] = has_l[i] ? (r_cl[i] - zl[i] * ox[i]) / sl[i] : 0.0;
                ozu[i] = has_u[i] ? (r_cu[i] + zu[i] * ox[i]) / su[i] : 0.0;
            }
        };

        auto max_step = [&](const std::vector<double>& ddx, const std::vector<double>& ddzl,
                            const std::vector<double>& ddzu, double& ap, double& ad) {
            ap = 1.0;
            ad = 1.0;
            for (int i = 0; i < N; ++i) {
                if (has_l[i]) {
                    if (ddx[i] < 0.0)
                        ap = std::min(ap, -sl[i] / ddx[i]);
                    if (ddzl[i] < 0.0)
                        ad = std::min(ad, -zl[i] / ddzl[i]);
                }
                if (has_u[i]) {
                    if (ddx[i] > 0.0)
                        ap = std::min(ap, su[i] / ddx[i]);
                    if (ddzu[i] < 0.0)
                        ad = std::min(ad, -zu[i] / ddzu[i]);
                }
            }
        };

        QPResult res;
        std::vector<double> dy_a(m);
        for (int it = 0; it <= opt.max_iterations; ++it) {
            residuals();
            double mu = 0.0;
            for (int i = 0; i < N; ++i)
                mu += (has_l[i] ? sl[i] * zl[i] : 0.0) + (has_u[i] ? su[i] * zu[i] : 0.0);
            mu = ncomp > 0 ? mu / ncomp : 0.0;
            double rp_norm = 0.0, rd_norm = 0.0;
            for (double v : rp)
                rp_norm = std::max(rp_norm, std::abs(v));
            for (double v : rd)
                rd_norm = std::max(rd_norm, std::abs(v));
            res.iterations = it;
            if (rp_norm <= opt.tolerance * scale_p && rd_norm <= opt.tolerance * scale_d && mu <= opt.tolerance) {
                res.status = QPResult::Status::optimal;
                break;
            }
            if (it == opt.max_iterations) {
                res.status = QPResult::Status::max_iterations;
                break;
            }

            for (int i = 0; i < N; ++i)
                sigma[i] = (has_l[i] ? zl[i] / sl[i] : 0.0) + (has_u[i] ? zu[i] / su[i] : 0.0);

            // Near convergence the system can lose definiteness numerically; more
            // regularization usually recovers a usable step.
            bool stepped = false;
            double alpha = 0.0;
            for (double reg = opt.regularization; reg <= 1e-5 && !stepped; reg *= 100.0) {
                if (!factor(n, m, sigma, row_ex, row_on, fixed, reg))
                    continue;
                for (int i = 0; i < N; ++i) {
                    rcl[i] = has_l[i] ? -sl[i] * zl[i] : 0.0;
                    rcu[i] = has_u[i] ? -su[i] * zu[i] : 0.0;
                }
                newton(rcl, rcu, dx_a, dzl_a, dzu_a, dy_a);
                double ap, ad;
                max_step(dx_a, dzl_a, dzu_a, ap, ad);
                double mu_aff = 0.0;
                for (int i = 0; i < N; ++i) {
                    if (has_l[i])
                        mu_aff += (sl[i] + ap * dx_a[i]) * (zl[i] + ad * dzl_a[i]);
                    if (has_u[i])
                        mu_aff += (su[i] - ap * dx_a[i]) * (zu[i] + ad * dzu_a[i]);
                }
                mu_aff = ncomp > 0 ? mu_aff / ncomp : 0.0;
                const double sig = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

                for (int i = 0; i < N; ++i) {
                    rcl[i] = has_l[i] ? sig * mu - sl[i] * zl[i] - dx_a[i] * dzl_a[i] : 0.0;
                    rcu[i] = has_u[i] ? sig * mu - su[i] * zu[i] + dx_a[i] * dzu_a[i] : 0.0;
                }
                newton(rcl, rcu, dx, dzl, dzu, dy);
                bool finite = std::isfinite(sig);
                for (int i = 0; i < N && finite; ++i)
                    finite = std::isfinite(dx[i]) && std::isfinite(dzl[i]) && std::isfinite(dzu[i]);
                for (int j = 0; j < m && finite; ++j)
                    finite = std::isfinite(dy[j]);
                if (!finite)
                    continue;
                max_step(dx, dzl, dzu, ap, ad);
                const double tau = std::max(0.99, 1.0 - mu);
                alpha = std::min(1.0, tau * std::min(ap, ad));
                stepped = true;
            }
            if (!stepped) {
                // Keep a nearly converged iterate rather than discarding it.
                const bool close = rp_norm <= 1e-6 * scale_p && rd_norm <= 1e-4 * scale_d && mu <= 1e-6;
                res.status = close ? QPResult::Status::max_iterations : QPResult::Status::failed;
                break;
            }
            for (int i = 0; i < N; ++i) {
                x[i] += alpha * dx[i];
                zl[i] += alpha * dzl[i];
                zu[i] += alpha * dzu[i];
            }
            for (int j = 0; j < m; ++j)
                y[j] += alpha * dy[j];
        }

        res.d = Eigen::Map<Eigen::VectorXd>(x.data(), n);
        for (int i = 0; i < n; ++i)
            if (fixed[i])
                res.d[i] = 0.0;
        res.y = Eigen::Map<Eigen::VectorXd>(y.data(), m);
        res.z.resize(n);
        {
            // A fixed variable's bound multiplier absorbs its whole stationarity residual.
            const Eigen::VectorXd Hd = H.selfadjointView<Eigen::Lower>() * res.d;
            const Eigen::VectorXd Jty = J.transpose() * res.y;
            for (int i = 0; i < n; ++i)
                res.z[i] = fixed[i] ? qp.g[i] + Hd[i] - Jty[i] : zl[i] - zu[i];
        }
        if (elastic)
            for (int e = 0; e < ne; ++e)
                if (ex_cost[e] > 0.0)
                    res.elastic_sum += x[n + e];
        return res;
    }

private:
    // Builds the lower triangle of [H, J'; J, 0] with every diagonal present.
    void assemble(const Eigen::SparseMatrix<double>& H, const Eigen::SparseMatrix<double>& J,
                  const std::vector<char>& fixed, const std::vector<char>& row_on) {
        const int n = static_cast<int>(H.cols()), m = static_cast<int>(J.rows());
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(H.nonZeros() + J.nonZeros() + n + m);
        for (int c = 0; c < n; ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(H, c); it; ++it)
                if (it.row() > c && !fixed[c] && !fixed[it.row()])
                    t.emplace_back(static_cast<int>(it.row()), c, it.value());
        for (int c = 0; c < n; ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(J, c); it; ++it)
                t.emplace_back(n + static_cast<int>(it.row()), c,
                               fixed[c] || !row_on[it.row()] ? 0.0 : it.value());
        // Diagonal placeholders carry H's diagonal.
        h_diag_.assign(n, 0.0);
        for (int c = 0; c < n; ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(H, c); it; ++it)
                if (it.row() == c)
                    h_diag_[c] = it.value();
        for (int i = 0; i < n + m; ++i)
            t.emplace_back(i, i, 0.0);
        Eigen::SparseMatrix<double> K(n + m, n + m);
        K.setFromTriplets(t.begin(), t.end());
        K.makeCompressed();

        const bool same_pattern = analyzed_ && K.rows() == K_.rows() && K.nonZeros() == K_.nonZeros() &&
                                  std::equal(K.outerIndexPtr(), K.outerIndexPtr() + K.cols() + 1, K_.outerIndexPtr()) &&
                                  std::equal(K.innerIndexPtr(), K.innerIndexPtr() + K.nonZeros(), K_.innerIndexPtr());
        K_ = std::move(K);
        base_values_.assign(K_.valuePtr(), K_.valuePtr() + K_.nonZeros());
        diag_pos_.resize(n + m);
        for (int c = 0; c < n + m; ++c) {
            // Lower storage: the diagonal is the first entry of each column.
            diag_pos_[c] = K_.outerIndexPtr()[c];
        }
        if (!same_pattern) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
    }

    bool factor(int n, int m, const std::vector<double>& sigma, const std::vector<std::vector<int>>& row_ex,
                const std::vector<char>& row_on, const std::vector<char>& fixed, double reg) {
        std::copy(base_values_.begin(), base_values_.end(), K_.valuePtr());
        double hmax = 1.0;
        for (double v : h_diag_)
            hmax = std::max(hmax, std::abs(v));
        const double delta = reg * hmax;
        for (int i = 0; i < n; ++i)
            K_.valuePtr()[diag_pos_[i]] = fixed[i] ? 1.0 : h_diag_[i] + sigma[i] + delta;
        for (int j = 0; j < m; ++j) {
            double D = 0.0;
            for (int e : row_ex[j])
                D += 1.0 / sigma[n + e];
            K_.valuePtr()[diag_pos_[n + j]] = row_on[j] ? -(D + reg) : -1.0;
        }
        ldlt_.factorize(K_);
        delta_.assign(n + m, 0.0);
        for (int i = 0; i < n; ++i)
            delta_[i] = fixed[i] ? 0.0 : delta;
        for (int j = 0; j < m; ++j)
            delta_[n + j] = row_on[j] ? -reg : 0.0;
        return ldlt_.info() == Eigen::Success;
    }

    // The regularized factor is only a preconditioner; refine against the true system.
    Eigen::VectorXd solve_refined(const Eigen::VectorXd& rhs) {
        Eigen::VectorXd sol = ldlt_.solve(rhs);
        const double target = 1e-13 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        double last = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 10; ++k) {
            Eigen::VectorXd r = rhs - K_.selfadjointView<Eigen::Lower>() * sol;
            for (Eigen::Index i = 0; i < r.size(); ++i)
                r[i] += delta_[i] * sol[i];
            const double rn = r.lpNorm<Eigen::Infinity>();
            if (!(rn > target) || rn > 0.5 * last)
                break;
            last = rn;
            sol += ldlt_.solve(r);
        }
        return sol;
    }

    Eigen::SparseMatrix<double> K_;
    std::vector<double> base_values_, h_diag_;
    std::vector<int> diag_pos_;
    std::vector<double> delta_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
    bool analyzed_ = false;
};

} // namespace ascentry
