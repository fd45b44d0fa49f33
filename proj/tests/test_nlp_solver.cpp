#include <ascentry/sqp.hpp>

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

using namespace ascentry;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

/// Small NLP assembled from lambdas; dense Jacobian pattern unless given.
class LambdaNLP : public NLP {
public:
    int n = 0, m = 0;
    std::vector<double> xl, xu, gl, gu;
    std::function<double(std::span<const double>)> f;
    std::function<void(std::span<const double>, std::span<double>)> g = [](auto, auto) {};
    std::vector<std::pair<int, int>> pattern_entries;
    std::vector<double> x_scale;

    int num_variables() const override { return n; }
    int num_constraints() const override { return m; }
    void variable_bounds(std::span<double> lo, std::span<double> hi) const override {
        for (int i = 0; i < n; ++i) {
            lo[i] = xl.empty() ? -inf : xl[i];
            hi[i] = xu.empty() ? inf : xu[i];
        }
    }
    void constraint_bounds(std::span<double> lo, std::span<double> hi) const override {
        std::copy(gl.begin(), gl.end(), lo.begin());
        std::copy(gu.begin(), gu.end(), hi.begin());
    }
    double objective(std::span<const double> x) const override { return f(x); }
    void constraints(std::span<const double> x, std::span<double> out) const override { g(x, out); }
    SparsityPattern jacobian_sparsity() const override {
        if (!pattern_entries.empty() || m == 0)
            return SparsityPattern::from_entries(m, n, pattern_entries);
        std::vector<std::pair<int, int>> all;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c)
                all.emplace_back(r, c);
        return SparsityPattern::from_entries(m, n, all);
    }
    void variable_scale(std::span<double> s) const override {
        for (int i = 0; i < n; ++i)
            s[i] = x_scale.empty() ? 1.0 : x_scale[i];
    }
};

LambdaNLP rosenbrock() {
    LambdaNLP p;
    p.n = 2;
    p.f = [](std::span<const double> x) { return (1 - x[0]) * (1 - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]); };
    return p;
}

} // namespace

TEST(Sparsity, FromEntriesDeduplicatesAndSorts) {
    const auto p = SparsityPattern::from_entries(3, 2, {{2, 1}, {0, 0}, {1, 1}, {2, 1}});
    EXPECT_EQ(p.nnz(), 3);
    EXPECT_EQ(p.find(1, 1), 1);
    EXPECT_EQ(p.find(2, 1), 2);
    EXPECT_EQ(p.find(1, 0), -1);
    EXPECT_THROW(SparsityPattern::from_entries(1, 1, {{1, 0}}), ContractError);
}

TEST(Coloring, DisjointColumnsShareOneColor) {
    const auto p = SparsityPattern::from_entries(2, 2, {{0, 0}, {1, 1}});
    const auto c = color_columns(p);
    EXPECT_EQ(c.num_colors, 1);
}

TEST(Coloring, ColumnsInOneGroupAreStructurallyOrthogonal) {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> r(0, 39), cl(0, 59);
    std::vector<std::pair<int, int>> e;
    for (int k = 0; k < 200; ++k)
        e.emplace_back(r(rng), cl(rng));
    const auto p = SparsityPattern::from_entries(40, 60, e);
    const auto c = color_columns(p);
    for (const auto& group : c.groups) {
        std::vector<int> seen(40, 0);
        for (int col : group)
            for (int k = p.col_start[col]; k < p.col_start[col + 1]; ++k)
                EXPECT_EQ(seen[p.row_index[k]]++, 0);
    }
}

TEST(Derivatives, GradientOfSquare) {
    LambdaNLP p;
    p.n = 1;
    p.f = [](std::span<const double> x) { return x[0] * x[0]; };
    std::vector<double> x{3.0}, g(1);
    const std::vector<int> support{0};
    estimate_gradient(p, x, support, g);
    EXPECT_NEAR(g[0], 6.0, 1e-8);
}

TEST(Derivatives, PairOfSquaresNeedsTwoEvaluationsPerSide) {
    LambdaNLP p;
    p.n = 2;
    p.m = 2;
    p.gl = {-inf, -inf};
    p.gu = {inf, inf};
    p.f = [](auto) { return 0.0; };
    auto calls = std::make_shared<std::atomic<int>>(0);
    p.g = [calls](std::span<const double> x, std::span<double> g) {
        ++*calls;
        g[0] = x[0] * x[0];
        g[1] = x[1] * x[1];
    };
    p.pattern_entries = {{0, 0}, {1, 1}};
    const auto pat = p.jacobian_sparsity();
    const auto col = color_columns(pat);
    EXPECT_EQ(col.num_colors, 1);
    std::vector<double> x{1.5, -2.0}, v(2);
    estimate_jacobian(p, x, pat, col, v);
    EXPECT_EQ(calls->load(), 2);
    EXPECT_NEAR(v[0], 3.0, 1e-8);
    EXPECT_NEAR(v[1], -4.0, 1e-8);
}

TEST(Derivatives, RandomSparseQuadraticMap) {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 30;
        LambdaNLP p;
        p.n = n;
        p.m = n;
        p.gl.assign(n, -inf);
        p.gu.assign(n, inf);
        p.f = [](auto) { return 0.0; };
        std::vector<double> a(n);
        for (auto& v : a)
            v = u(rng);
        p.g = [a](std::span<const double> x, std::span<double> g) {
            for (std::size_t i = 0; i < x.size(); ++i)
                g[i] = a[i] * x[i] * x[i];
        };
        for (int i = 0; i < n; ++i)
            p.pattern_entries.emplace_back(i, i);
        const auto pat = p.jacobian_sparsity();
        std::vector<double> x(n), v(n);
        for (auto& xi : x)
            xi = u(rng);
        estimate_jacobian(p, x, pat, color_columns(pat), v);
        for (int i = 0; i < n; ++i)
            EXPECT_NEAR(v[i], 2.0 * a[i] * x[i], 1e-7);
    }
}

TEST(Derivatives, SparseMatchesDenseDifferences) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 12, m = 9;
        LambdaNLP p;
        p.n = n;
        p.m = m;
        p.gl.assign(m, -inf);
        p.gu.assign(m, inf);
        p.f = [](auto) { return 0.0; };
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::vector<std::array<int, 3>> use(m);
        for (int r = 0; r < m; ++r)
            for (int k = 0; k < 3; ++k) {
                use[r][k] = pick(rng);
                p.pattern_entries.emplace_back(r, use[r][k]);
            }
        p.g = [use](std::span<const double> x, std::span<double> g) {
            for (std::size_t r = 0; r < use.size(); ++r)
                g[r] = std::sin(x[use[r][0]]) * std::exp(0.3 * x[use[r][1]]) + x[use[r][2]] * x[use[r][2]] * x[use[r][0]];
        };
        const auto pat = p.jacobian_sparsity();
        std::vector<double> x(n), v(pat.nnz());
        for (auto& xi : x)
            xi = u(rng);
        estimate_jacobian(p, x, pat, color_columns(pat), v);
        // Dense one-column-at-a-time differences with the same step.
        std::vector<double> xp(x), gp(m), gm(m);
        for (int c = 0; c < n; ++c) {
            const double h = difference_step(x[c]);
            xp[c] = x[c] + h;
            p.g(xp, gp);
            xp[c] = x[c] - h;
            p.g(xp, gm);
            const double hh = (x[c] + h) - (x[c] - h);
            xp[c] = x[c];
            for (int r = 0; r < m; ++r) {
                const int k = pat.find(r, c);
                if (k >= 0)
                    EXPECT_NEAR(v[k], (gp[r] - gm[r]) / hh, 1e-10);
                else
                    EXPECT_EQ(gp[r] - gm[r], 0.0);
            }
        }
    }
}

TEST(Derivatives, NonFiniteValuesAreReported) {
    LambdaNLP p;
    p.n = 1;
    p.m = 1;
    p.gl = {-inf};
    p.gu = {inf};
    p.f = [](auto) { return 0.0; };
    p.g = [](std::span<const double> x, std::span<double> g) { g[0] = x[0] > 0 ? std::log(-1.0) : 0.0; };
    const auto pat = p.jacobian_sparsity();
    std::vector<double> x{1.0}, v(1);
    EXPECT_THROW(estimate_jacobian(p, x, pat, color_columns(pat), v), NonFiniteError);
}

TEST(QP, EqualityConstrainedLeastNorm) {
    // min 1/2 |d|^2 s.t. d0 + d1 = 1.
    Eigen::SparseMatrix<double> H(2, 2), J(1, 2);
    H.insert(0, 0) = 1.0;
    H.insert(1, 1) = 1.0;
    J.insert(0, 0) = 1.0;
    J.insert(0, 1) = 1.0;
    QPProblem qp;
    qp.H = &H;
    qp.J = &J;
    qp.g = Eigen::VectorXd::Zero(2);
    qp.c = Eigen::VectorXd::Zero(1);
    qp.c_lo = qp.c_hi = Eigen::VectorXd::Ones(1);
    qp.d_lo = Eigen::VectorXd::Constant(2, -inf);
    qp.d_hi = Eigen::VectorXd::Constant(2, inf);
    qp.elastic_penalty = 100.0;
    QPSolver s;
    const auto r = s.solve(qp);
    ASSERT_EQ(r.status, QPResult::Status::optimal);
    EXPECT_NEAR(r.d[0], 0.5, 1e-8);
    EXPECT_NEAR(r.d[1], 0.5, 1e-8);
    EXPECT_NEAR(r.y[0], 0.5, 1e-8);
}

TEST(QP, BoundConstrained) {
    // min 1/2 (d - 3)^2 with d <= 1 and a range row 0 <= d <= 2.
    Eigen::SparseMatrix<double> H(1, 1), J(1, 1);
    H.insert(0, 0) = 1.0;
    J.insert(0, 0) = 1.0;
    QPProblem qp;
    qp.H = &H;
    qp.J = &J;
    qp.g = Eigen::VectorXd::Constant(1, -3.0);
    qp.c = Eigen::VectorXd::Zero(1);
    qp.c_lo = Eigen::VectorXd::Zero(1);
    qp.c_hi = Eigen::VectorXd::Constant(1, 2.0);
    qp.d_lo = Eigen::VectorXd::Constant(1, -inf);
    qp.d_hi = Eigen::VectorXd::Ones(1);
    qp.elastic_penalty = 50.0;
    QPSolver s;
    const auto r = s.solve(qp);
    ASSERT_EQ(r.status, QPResult::Status::optimal);
    EXPECT_NEAR(r.d[0], 1.0, 1e-8);
    EXPECT_NEAR(r.z[0], -2.0, 1e-7);
}

TEST(QP, InconsistentLinearizationGoesElastic) {
    // d >= 1 and d <= -1 cannot both hold; the elastic QP still returns.
    Eigen::SparseMatrix<double> H(1, 1), J(2, 1);
    H.insert(0, 0) = 1.0;
    J.insert(0, 0) = 1.0;
    J.insert(1, 0) = 1.0;
    QPProblem qp;
    qp.H = &H;
    qp.J = &J;
    qp.g = Eigen::VectorXd::Zero(1);
    qp.c = Eigen::VectorXd::Zero(2);
    qp.c_lo = Eigen::Vector2d(1.0, -inf);
    qp.c_hi = Eigen::Vector2d(inf, -1.0);
    qp.d_lo = Eigen::VectorXd::Constant(1, -inf);
    qp.d_hi = Eigen::VectorXd::Constant(1, inf);
    qp.elastic_penalty = 10.0;
    QPSolver s;
    const auto r = s.solve(qp);
    ASSERT_EQ(r.status, QPResult::Status::optimal);
    EXPECT_NEAR(r.d[0], 0.0, 1e-7);
    EXPECT_NEAR(r.elastic_sum, 2.0, 1e-6);
}

TEST(Solve, Rosenbrock) {
    const auto p = rosenbrock();
    const std::vector<double> x0{-1.2, 1.0};
    const auto r = solve(p, x0);
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    EXPECT_NEAR(r.x[0], 1.0, 1e-5);
    EXPECT_NEAR(r.x[1], 1.0, 1e-5);
}

TEST(Solve, QuadraticWithLinearEquality) {
    LambdaNLP p;
    p.n = 2;
    p.m = 1;
    p.gl = {1.0};
    p.gu = {1.0};
    p.f = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    p.g = [](std::span<const double> x, std::span<double> g) { g[0] = x[0] + x[1]; };
    const std::vector<double> x0{3.0, -1.0};
    const auto r = solve(p, x0);
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    EXPECT_NEAR(r.x[0], 0.5, 1e-6);
    EXPECT_NEAR(r.x[1], 0.5, 1e-6);
    EXPECT_NEAR(r.lambda[0], 1.0, 1e-5);
}

TEST(Solve, LinearProgramCorner) {
    LambdaNLP p;
    p.n = 1;
    p.xl = {0.0};
    p.xu = {2.0};
    p.f = [](std::span<const double> x) { return -x[0]; };
    const std::vector<double> x0{0.3};
    const auto r = solve(p, x0);
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    EXPECT_NEAR(r.x[0], 2.0, 1e-8);
    EXPECT_LT(r.z[0], 0.0); // active upper bound
    EXPECT_NEAR(r.z[0], -1.0, 1e-6);
}

TEST(Solve, InequalityConstrainedNonconvex) {
    // min x0 + x1 on the unit disk: optimum (-1/sqrt2, -1/sqrt2).
    LambdaNLP p;
    p.n = 2;
    p.m = 1;
    p.gl = {-inf};
    p.gu = {1.0};
    p.f = [](std::span<const double> x) { return x[0] + x[1]; };
    p.g = [](std::span<const double> x, std::span<double> g) { g[0] = x[0] * x[0] + x[1] * x[1]; };
    const std::vector<double> x0{0.2, 0.9};
    const auto r = solve(p, x0);
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    EXPECT_NEAR(r.x[0], -std::sqrt(0.5), 1e-6);
    EXPECT_NEAR(r.x[1], -std::sqrt(0.5), 1e-6);
    EXPECT_LT(r.lambda[0], 0.0);
}

TEST(Solve, ConvergenceSurvivesIndependentKKTCheck) {
    LambdaNLP p;
    p.n = 3;
    p.m = 2;
    p.xl = {-inf, 0.0, -inf};
    p.gl = {1.0, -inf};
    p.gu = {1.0, 2.0};
    p.f = [](std::span<const double> x) {
        return (x[0] - 2) * (x[0] - 2) + std::exp(x[1]) + x[2] * x[2] * x[2] * x[2] + x[0] * x[2];
    };
    p.g = [](std::span<const double> x, std::span<double> g) {
        g[0] = x[0] * x[1] + x[2];
        g[1] = x[0] * x[0] + x[2];
    };
    const std::vector<double> x0{0.5, 0.5, 0.5};
    SolverOptions o;
    const auto r = solve(p, x0, o);
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    const auto k = kkt_residuals(p, r.x, r.lambda, r.z);
    EXPECT_LE(k.feasibility, 10 * o.tolerance);
    EXPECT_LE(k.stationarity, 10 * o.tolerance);
    EXPECT_LE(k.complementarity, 10 * o.tolerance);
}

TEST(Solve, InvariantToVariablePermutation) {
    auto make = [](bool swap) {
        LambdaNLP p;
        p.n = 2;
        p.m = 1;
        p.gl = {-inf};
        p.gu = {1.0};
        const int a = swap ? 1 : 0, b = swap ? 0 : 1;
        p.f = [a, b](std::span<const double> x) { return (x[a] - 2) * (x[a] - 2) + (x[b] - 1) * (x[b] - 1) + x[a] * x[b]; };
        p.g = [a, b](std::span<const double> x, std::span<double> g) { g[0] = x[a] * x[a] + 2 * x[b] * x[b]; };
        return p;
    };
    const std::vector<double> x0{0.1, 0.2}, x0s{0.2, 0.1};
    const auto r1 = solve(make(false), x0);
    const auto r2 = solve(make(true), x0s);
    ASSERT_EQ(r1.status, SolveStatus::converged);
    ASSERT_EQ(r2.status, SolveStatus::converged);
    EXPECT_NEAR(r1.x[0], r2.x[1], 1e-6);
    EXPECT_NEAR(r1.x[1], r2.x[0], 1e-6);
}

TEST(Solve, DeterministicWithIterationLog) {
    const auto p = rosenbrock();
    const std::vector<double> x0{-1.2, 1.0};
    std::ostringstream a, b;
    SolverOptions o;
    o.iteration_log = &a;
    const auto r1 = solve(p, x0, o);
    o.iteration_log = &b;
    const auto r2 = solve(p, x0, o);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(r1.x, r2.x);
    EXPECT_EQ(a.str().rfind("iteration,objective,feasibility,step_norm", 0), 0u);
}

TEST(Solve, IterationLimitReturnsBestPoint) {
    const auto p = rosenbrock();
    const std::vector<double> x0{-1.2, 1.0};
    SolverOptions o;
    o.max_iterations = 3;
    const auto r = solve(p, x0, o);
    EXPECT_EQ(r.status, SolveStatus::max_iterations);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_LE(r.objective, p.f(x0));
}

TEST(Solve, NaNAtStartIsNumericalFailure) {
    LambdaNLP p;
    p.n = 1;
    p.f = [](auto) { return std::nan(""); };
    const std::vector<double> x0{0.0};
    EXPECT_EQ(solve(p, x0).status, SolveStatus::numerical_failure);
}

TEST(Solve, InfeasibleProblemIsReported) {
    LambdaNLP p;
    p.n = 1;
    p.m = 1;
    p.gl = {-1.0};
    p.gu = {-0.5};
    p.f = [](std::span<const double> x) { return x[0] * x[0]; };
    p.g = [](std::span<const double> x, std::span<double> g) { g[0] = x[0] * x[0]; };
    const std::vector<double> x0{1.0};
    SolverOptions o;
    o.max_iterations = 100;
    const auto r = solve(p, x0, o);
    EXPECT_NE(r.status, SolveStatus::converged);
}

TEST(Solve, OptionsValidation) {
    SolverOptions o;
    o.tolerance = 0.0;
    EXPECT_THROW(o.validate(), ContractError);
    o = {};
    o.mode = SolverOptions::Mode::external;
    EXPECT_THROW(o.validate(), ContractError);
}

TEST(Solve, ExternalPluginIsCalled) {
    struct Fake : ExternalSolver {
        std::string name() const override { return "fake"; }
        SolveReport solve(const NLP&, std::span<const double> x0, const SolverOptions&) override {
            SolveReport r;
            r.status = SolveStatus::converged;
            r.x.assign(x0.begin(), x0.end());
            r.message = "fake";
            return r;
        }
    };
    SolverOptions o;
    o.mode = SolverOptions::Mode::external;
    o.external = std::make_shared<Fake>();
    const auto p = rosenbrock();
    const std::vector<double> x0{0.0, 0.0};
    EXPECT_EQ(solve(p, x0, o).message, "fake");
}

TEST(Solve, FixedVariableCarriesItsBoundMultiplier) {
    // min x^2 + y^2 with x pinned at 1: gradient 2 is balanced by the bound.
    LambdaNLP p;
    p.n = 2;
    p.xl = {1.0, -inf};
    p.xu = {1.0, inf};
    p.f = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    const auto r = solve(p, std::vector<double>{1.0, 0.7}, {});
    ASSERT_EQ(r.status, SolveStatus::converged) << r.message;
    EXPECT_NEAR(r.x[1], 0.0, 1e-6);
    EXPECT_NEAR(r.z[0], 2.0, 1e-6);
}
