#include <ascentry/lgr.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace ascentry;

TEST(LGR, OnePointRule) {
    const auto& r = lgr_rule(1);
    ASSERT_EQ(r.nodes.size(), 1u);
    EXPECT_EQ(r.nodes[0], -1.0);
    EXPECT_DOUBLE_EQ(r.weights[0], 2.0);
}

TEST(LGR, ThreePointRuleIntegratesQuartic) {
    const auto& r = lgr_rule(3);
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        s += r.weights[i] * std::pow(r.nodes[i], 4);
    EXPECT_NEAR(s, 0.4, 1e-15);
}

TEST(LGR, OutOfRangeDegree) {
    EXPECT_THROW(lgr_rule(0), ContractError);
    EXPECT_THROW(lgr_rule(65), ContractError);
}

TEST(LGR, StructuralInvariants) {
    for (int N = 1; N <= 64; ++N) {
        const auto& r = lgr_rule(N);
        EXPECT_EQ(r.nodes.front(), -1.0);
        double ws = 0.0;
        for (int i = 0; i < N; ++i) {
            EXPECT_GT(r.weights[i], 0.0);
            ws += r.weights[i];
            if (i > 0) {
                EXPECT_GT(r.nodes[i], r.nodes[i - 1]);
            }
        }
        EXPECT_LT(r.nodes.back(), 1.0);
        EXPECT_NEAR(ws, 2.0, 1e-13) << N;
        for (int i = 0; i < N; ++i)
            EXPECT_NEAR(r.diff_matrix.row(i).sum(), 0.0, 1e-9 * N * N) << N;
    }
}

TEST(LGR, QuadratureExactToDegree2NMinus2) {
    for (int N = 2; N <= 10; ++N) {
        const auto& r = lgr_rule(N);
        for (int d = 0; d <= 2 * N - 2; ++d) {
            double s = 0.0;
            for (int i = 0; i < N; ++i)
                s += r.weights[i] * std::pow(r.nodes[i], d);
            const double exact = d % 2 == 0 ? 2.0 / (d + 1) : 0.0;
            EXPECT_LE(std::abs(s - exact), 1e-12 * std::max(1.0, std::abs(exact))) << "N=" << N << " d=" << d;
        }
    }
}

TEST(LGR, DifferentiatesMonomialOfDegreeN) {
    for (int N = 1; N <= 16; ++N) {
        const auto& r = lgr_rule(N);
        for (int d = 0; d <= N; ++d) {
            Eigen::VectorXd f(N + 1);
            for (int i = 0; i < N; ++i)
                f[i] = std::pow(r.nodes[i], d);
            f[N] = 1.0;
            const Eigen::VectorXd df = r.diff_matrix * f;
            for (int i = 0; i < N; ++i) {
                const double exact = d == 0 ? 0.0 : d * std::pow(r.nodes[i], d - 1);
                EXPECT_NEAR(df[i], exact, 1e-10) << "N=" << N << " d=" << d;
            }
        }
    }
}

TEST(LGR, NodesAreRootsOfRadauPolynomial) {
    for (int N : {2, 5, 9, 20, 40, 64}) {
        const auto& r = lgr_rule(N);
        for (double x : r.nodes) {
            long double a, b, db, c, d, dd;
            detail::legendre(N - 1, x, a, b, db);
            detail::legendre(N, x, c, d, dd);
            EXPECT_NEAR(static_cast<double>(b + d), 0.0, 1e-12 * N);
        }
    }
}
