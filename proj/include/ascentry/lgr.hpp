#pragma once

#include <ascentry/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace ascentry {

/**
 * Legendre-Gauss-Radau points on [-1, 1) (including -1), quadrature weights
 * and the N x (N+1) differentiation matrix acting on values at the N nodes
 * followed by the value at +1.
 */
struct LGRRule {
    int degree = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
    Eigen::MatrixXd diff_matrix;
};

namespace detail {

// P_{n-1}(x), P_n(x) and P_n'(x) by the three-term recurrence.
inline void legendre(int n, long double x, long double& pnm1, long double& pn, long double& dpn) {
    long double p0 = 1.0L, p1 = x;
    if (n == 0) {
        pnm1 = 0.0L;
        pn = 1.0L;
        dpn = 0.0L;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    pnm1 = p0;
    pn = p1;
    // Valid away from x = +-1, which Newton never approaches for interior roots.
    dpn = n * (x * pn - pnm1) / (x * x - 1.0L);
}

inline LGRRule build_lgr(int N) {
    LGRRule r;
    r.degree = N;
    std::vector<long double> x(N);
    x[0] = -1.0L;
    for (int i = 1; i < N; ++i) {
        // Chebyshev-Gauss-Radau starting guess, then Newton on P_{N-1} + P_N.
        long double xi = -std::cos(2.0L * std::numbers::pi_v<long double> * i / (2 * N - 1));
        for (int it = 0; it < 100; ++it) {
            long double a, b, db, c, d, dd;
            legendre(N - 1, xi, a, b, db); // b = P_{N-1}
            legendre(N, xi, c, d, dd);     // d = P_N
            const long double f = b + d, df = db + dd;
            const long double step = f / df;
            xi -= step;
            if (std::abs(step) < 1e-19L)
                break;
        }
        x[i] = xi;
    }
    std::sort(x.begin(), x.end());

    r.nodes.resize(N);
    r.weights.resize(N);
    for (int i = 0; i < N; ++i) {
        r.nodes[i] = static_cast<double>(x[i]);
        if (i == 0) {
            r.weights[i] = 2.0 / (static_cast<double>(N) * N);
        } else {
            long double a, b, db;
            legendre(N - 1, x[i], a, b, db);
            r.weights[i] = static_cast<double>((1.0L - x[i]) / (static_cast<long double>(N) * N * b * b));
        }
    }

    // Barycentric differentiation on the N nodes plus +1.
    std::vector<long double> pts(x);
    pts.push_back(1.0L);
    const int M = N + 1;
    std::vector<long double> bw(M, 1.0L);
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < M; ++k)
            if (k != j)
                bw[j] /= (pts[j] - pts[k]);
    r.diff_matrix.resize(N, M);
    for (int i = 0; i < N; ++i) {
        long double diag = 0.0L;
        for (int j = 0; j < M; ++j) {
            if (j == i)
                continue;
            const long double v = bw[j] / bw[i] / (pts[i] - pts[j]);
            r.diff_matrix(i, j) = static_cast<double>(v);
            diag -= v;
        }
        r.diff_matrix(i, i) = static_cast<double>(diag);
    }
    return r;
}

} // namespace detail

inline constexpr int lgr_max_degree = 64;

/// Cached rule for 1 <= N <= 64.
inline const LGRRule& lgr_rule(int N) {
    if (N < 1 || N > lgr_max_degree)
        throw ContractError("lgr_rule: degree " + std::to_string(N) + " outside [1, 64]");
    static const std::vector<LGRRule> cache = [] {
        std::vector<LGRRule> c;
        c.reserve(lgr_max_degree);
        for (int n = 1; n <= lgr_max_degree; ++n)
            c.push_back(detail::build_lgr(n));
        return c;
    }();
    return cache[N - 1];
}

/// Lagrange basis values at `t` for the given support points.
inline void lagrange_basis(const std::vector<double>& pts, double t, std::vector<double>& out) {
    const std::size_t n = pts.size();
    out.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        if (t == pts[j]) {
            out[j] = 1.0;
            return;
        }
    for (std::size_t j = 0; j < n; ++j) {
        double l = 1.0;
        for (std::size_t k = 0; k < n; ++k)
            if (k != j)
                l *= (t - pts[k]) / (pts[j] - pts[k]);
        out[j] = l;
    }
}

/// Derivative of the Lagrange basis at `t`.
inline void lagrange_basis_derivative(const std::vector<double>& pts, double t, std::vector<double>& out) {
    const std::size_t n = pts.size();
    out.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == j)
                continue;
            double prod = 1.0 / (pts[j] - pts[m]);
            for (std::size_t k = 0; k < n; ++k)
                if (k != j && k != m)
                    prod *= (t - pts[k]) / (pts[j] - pts[k]);
            sum += prod;
        }
        out[j] = sum;
    }
}

} // namespace ascentry
