#pragma once

// Solver-agnostic nonlinear program interface and derivative estimation by
// sparse central differences.

#include <ascentry/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ascentry {

/// Compressed-column nonzero pattern; row indices are sorted within a column.
struct SparsityPattern {
    int rows = 0;
    int cols = 0;
    std::vector<int> col_start{0};
    std::vector<int> row_index;

    int nnz() const { return static_cast<int>(row_index.size()); }

    static SparsityPattern from_entries(int rows, int cols, std::vector<std::pair<int, int>> entries) {
        for (const auto& [r, c] : entries)
            if (r < 0 || r >= rows || c < 0 || c >= cols)
                throw ContractError("SparsityPattern: entry out of range");
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second < b.second : a.first < b.first;
        });
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
        SparsityPattern p;
        p.rows = rows;
        p.cols = cols;
        p.col_start.assign(cols + 1, 0);
        p.row_index.reserve(entries.size());
        for (const auto& [r, c] : entries) {
            ++p.col_start[c + 1];
            p.row_index.push_back(r);
        }
        for (int c = 0; c < cols; ++c)
            p.col_start[c + 1] += p.col_start[c];
        return p;
    }

    /// Position of (r, c) in the value array, or -1.
    int find(int r, int c) const {
        const auto b = row_index.begin() + col_start[c], e = row_index.begin() + col_start[c + 1];
        const auto it = std::lower_bound(b, e, r);
        return it != e && *it == r ? static_cast<int>(it - row_index.begin()) : -1;
    }
};

/// Partition of columns into structurally orthogonal groups.
struct ColumnColoring {
    int num_colors = 0;
    std::vector<int> color;                 // per column
    std::vector<std::vector<int>> groups;   // columns per color
};

/// Greedy coloring in natural column order: a column takes the smallest color
/// not used by any column sharing a row with it.
inline ColumnColoring color_columns(const SparsityPattern& p) {
    std::vector<std::vector<int>> row_cols(p.rows);
    for (int c = 0; c < p.cols; ++c)
        for (int k = p.col_start[c]; k < p.col_start[c + 1]; ++k)
            row_cols[p.row_index[k]].push_back(c);

    ColumnColoring out;
    out.color.assign(p.cols, -1);
    std::vector<int> mark; // mark[color] == c means forbidden for column c
    for (int c = 0; c < p.cols; ++c) {
        for (int k = p.col_start[c]; k < p.col_start[c + 1]; ++k)
            for (int other : row_cols[p.row_index[k]])
                if (other < c) {
                    const int oc = out.color[other];
                    if (oc >= static_cast<int>(mark.size()))
                        mark.resize(oc + 1, -1);
                    mark[oc] = c;
                }
        int chosen = 0;
        while (chosen < static_cast<int>(mark.size()) && mark[chosen] == c)
            ++chosen;
        out.color[c] = chosen;
        if (chosen >= out.num_colors) {
            out.num_colors = chosen + 1;
            out.groups.resize(out.num_colors);
        }
        out.groups[chosen].push_back(c);
    }
    return out;
}

/**
 * A nonlinear program
 *
 *   min f(x)  s.t.  g_lo <= g(x) <= g_hi,  x_lo <= x <= x_hi.
 *
 * Evaluation callbacks must be pure: the derivative estimator calls them
 * concurrently from several threads.
 */
class NLP {
public:
    virtual ~NLP() = default;

    virtual int num_variables() const = 0;
    virtual int num_constraints() const = 0;
    virtual void variable_bounds(std::span<double> lo, std::span<double> hi) const = 0;
    virtual void constraint_bounds(std::span<double> lo, std::span<double> hi) const = 0;
    virtual double objective(std::span<const double> x) const = 0;
    virtual void constraints(std::span<const double> x, std::span<double> g) const = 0;
    virtual SparsityPattern jacobian_sparsity() const = 0;

    /// Variables the objective may depend on.
    virtual std::vector<int> gradient_sparsity() const {
        std::vector<int> all(num_variables());
        for (int i = 0; i < num_variables(); ++i)
            all[i] = i;
        return all;
    }

    /// Problems with cheaper structured derivatives override these and return true.
    virtual bool jacobian_values(std::span<const double>, std::span<double>) const { return false; }
    virtual bool objective_gradient(std::span<const double>, std::span<double>) const { return false; }

    /// Disjoint variable groups for a block-diagonal quasi-Newton Hessian.
    /// Default: one dense block.
    virtual std::vector<std::vector<int>> hessian_blocks() const { return {gradient_sparsity_all()}; }

    /// Typical magnitudes; the solver works with x / scale and g / scale.
    virtual void variable_scale(std::span<double> s) const { std::fill(s.begin(), s.end(), 1.0); }
    virtual void constraint_scale(std::span<double> s) const { std::fill(s.begin(), s.end(), 1.0); }
    virtual double objective_scale() const { return 1.0; }

    virtual std::string constraint_name(int i) const { return "g[" + std::to_string(i) + "]"; }
    virtual std::string variable_name(int i) const { return "x[" + std::to_string(i) + "]"; }

private:
    std::vector<int> gradient_sparsity_all() const {
        std::vector<int> all(num_variables());
        for (int i = 0; i < num_variables(); ++i)
            all[i] = i;
        return all;
    }
};

/// Thread budget for concurrent evaluations: ASCENTRY_THREADS, else hardware.
inline int evaluation_threads() {
    if (const char* env = std::getenv("ASCENTRY_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Run body(i, worker) for i in [0, n) on up to `threads` workers.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i)
            body(i, 0);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads)
                    body(i, w);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

/// Default central-difference step for a variable of magnitude |x|.
inline double difference_step(double x, double relative = 0.0) {
    static const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    return (relative > 0.0 ? relative : cbrt_eps) * std::max(1.0, std::abs(x));
}

struct DifferenceOptions {
    double relative_step = 0.0;  // 0: cube root of machine epsilon
    int threads = 0;             // 0: evaluation_threads()
};

/**
 * Central-difference Jacobian values in the order of `pattern`. Columns in one
 * color group are perturbed together; entries outside the pattern are never
 * formed.
 */
inline void estimate_jacobian(const NLP& nlp, std::span<const double> x, const SparsityPattern& pattern,
                              const ColumnColoring& coloring, std::span<double> values,
                              const DifferenceOptions& opt = {}) {
    const int n = nlp.num_variables(), m = nlp.num_constraints();
    if (static_cast<int>(x.size()) != n || pattern.cols != n || pattern.rows != m)
        throw ContractError("estimate_jacobian: dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v))
            throw DomainError("estimate_jacobian: non-finite point");
    const int threads = opt.threads > 0 ? opt.threads : evaluation_threads();
    const int workers = std::max(1, std::min(threads, coloring.num_colors));

    struct Scratch {
        std::vector<double> xp, xm, gp, gm;
    };
    std::vector<Scratch> scratch(workers);
    for (auto& s : scratch) {
        s.xp.assign(x.begin(), x.end());
        s.xm.assign(x.begin(), x.end());
        s.gp.resize(m);
        s.gm.resize(m);
    }
    parallel_for(coloring.num_colors, workers, [&](int color, int w) {
        auto& s = scratch[w];
        const auto& cols = coloring.groups[color];
        for (int c : cols) {
            const double h = difference_step(x[c], opt.relative_step);
            s.xp[c] = x[c] + h;
            s.xm[c] = x[c] - h;
        }
        nlp.constraints(s.xp, s.gp);
        nlp.constraints(s.xm, s.gm);
        for (int c : cols) {
            const double inv = 1.0 / (s.xp[c] - s.xm[c]);
            for (int k = pattern.col_start[c]; k < pattern.col_start[c + 1]; ++k) {
                const int r = pattern.row_index[k];
                const double v = (s.gp[r] - s.gm[r]) * inv;
                if (!std::isfinite(v))
                    throw NonFiniteError("estimate_jacobian: non-finite difference in " + nlp.constraint_name(r) +
                                         " w.r.t. " + nlp.variable_name(c), r);
                values[k] = v;
            }
            s.xp[c] = x[c];
            s.xm[c] = x[c];
        }
    });
}

/// Central-difference gradient on the listed variables (others set to zero).
inline void estimate_gradient(const NLP& nlp, std::span<const double> x, std::span<const int> support,
                              std::span<double> grad, const DifferenceOptions& opt = {}) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> xp(x.begin(), x.end());
    for (int c : support) {
        const double h = difference_step(x[c], opt.relative_step);
        xp[c] = x[c] + h;
        const double fp = nlp.objective(xp);
        const double hp = xp[c] - x[c];
        xp[c] = x[c] - h;
        const double fm = nlp.objective(xp);
        const double hm = x[c] - xp[c];
        xp[c] = x[c];
        grad[c] = (fp - fm) / (hp + hm);
        if (!std::isfinite(grad[c]))
            throw NonFiniteError("estimate_gradient: non-finite objective difference w.r.t. " + nlp.variable_name(c), -1);
    }
}

/// Values of the Jacobian on `pattern`, using the problem's own derivatives if it has them.
inline void jacobian(const NLP& nlp, std::span<const double> x, const SparsityPattern& pattern,
                     const ColumnColoring& coloring, std::span<double> values, const DifferenceOptions& opt = {}) {
    if (!nlp.jacobian_values(x, values))
        estimate_jacobian(nlp, x, pattern, coloring, values, opt);
}

inline void gradient(const NLP& nlp, std::span<const double> x, std::span<const int> support,
                     std::span<double> grad, const DifferenceOptions& opt = {}) {
    if (!nlp.objective_gradient(x, grad))
        estimate_gradient(nlp, x, support, grad, opt);
}

} // namespace ascentry
