#include <ascentry/sqp.hpp>
#include <ascentry/transcription.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ascentry;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

/// x' = x on [0, T] with x(0) = 1; optional control u unused by the dynamics.
PhaseSpec growth_phase(double T, bool with_control = false) {
    PhaseSpec p;
    p.name = "growth";
    p.state_names = {"x"};
    p.state_bounds = {Bounds::free()};
    p.initial_state = {Bounds::fixed(1.0)};
    if (with_control) {
        p.control_names = {"u"};
        p.control_bounds = {Bounds{-10, 10}};
    }
    p.t0 = Bounds::fixed(0.0);
    p.tf = Bounds::fixed(T);
    p.dynamics = [](double, std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = x[0]; };
    return p;
}

std::vector<double> exact_exp_point(const TranscribedNLP& nlp) {
    const auto& ph = nlp.problem().phases;
    std::vector<TranscribedNLP::PhaseGuess> g;
    for (std::size_t p = 0; p < ph.size(); ++p) {
        const double t0 = ph[p].t0.lo, tf = ph[p].tf.lo;
        g.push_back({t0, tf, [](double t, std::span<double> x, std::span<double> u) {
                         for (auto& v : x)
                             v = std::exp(t);
                         for (auto& v : u)
                             v = std::sin(t);
                     }});
    }
    return nlp.initial_point(g);
}

double max_abs(std::span<const double> v, int from = 0, int to = -1) {
    if (to < 0)
        to = static_cast<int>(v.size());
    double m = 0.0;
    for (int i = from; i < to; ++i)
        m = std::max(m, std::abs(v[i]));
    return m;
}

} // namespace

TEST(Transcription, ExponentialDefectsSmallOnFourIntervalsDegreeSix) {
    MultiPhaseProblem prob;
    prob.phases = {growth_phase(1.0)};
    auto nlp = transcribe(prob, {MeshPhase::uniform(4, 6)});
    const auto x = exact_exp_point(nlp);
    const auto [f, g] = evaluate_nlp(nlp, x);
    const auto& L = nlp.phase_layout(0);
    EXPECT_LT(max_abs(g, L.defect_row, L.path_row), 1e-6);

    // Every constraint within bounds to 1e-6.
    std::vector<double> lo(g.size()), hi(g.size());
    nlp.constraint_bounds(lo, hi);
    for (std::size_t r = 0; r < g.size(); ++r) {
        EXPECT_GE(g[r], lo[r] - 1e-6) << nlp.constraint_name(static_cast<int>(r));
        EXPECT_LE(g[r], hi[r] + 1e-6) << nlp.constraint_name(static_cast<int>(r));
    }
    EXPECT_EQ(f, 0.0);
}

TEST(Transcription, LayoutCountsAreExhaustive) {
    MultiPhaseProblem prob;
    prob.phases = {growth_phase(1.0, true)};
    auto nlp = transcribe(prob, {MeshPhase{{0.25, 0.75}, {3, 5}}});
    // t0, tf, 8 nodes x (x,u), end state.
    EXPECT_EQ(nlp.num_variables(), 2 + 8 * 2 + 1);
    // 8 defects plus the duration row.
    EXPECT_EQ(nlp.num_constraints(), 9);
    const auto& L = nlp.phase_layout(0);
    EXPECT_EQ(L.interval_start, (std::vector<int>{0, 3}));
    std::vector<int> seen(nlp.num_variables(), 0);
    seen[L.t0]++;
    seen[L.tf]++;
    for (int j = 0; j <= L.nodes; ++j)
        seen[L.state(j, 0)]++;
    for (int j = 0; j < L.nodes; ++j)
        seen[L.control(j, 0, 1)]++;
    for (int s : seen)
        EXPECT_EQ(s, 1);
}

TEST(Transcription, LinkedPhasesHaveZeroResidualWhenEndpointsCopied) {
    MultiPhaseProblem prob;
    auto a = growth_phase(1.0);
    auto b = growth_phase(1.0);
    b.name = "second";
    b.initial_state = {};
    b.t0 = Bounds::fixed(1.0);
    b.tf = Bounds::fixed(2.0);
    prob.phases = {a, b};
    EventSpec link;
    link.name = "continuity";
    link.refs = {{0, EndpointRef::End::final}, {1, EndpointRef::End::initial}};
    link.bounds = {Bounds::fixed(0.0), Bounds::fixed(0.0)};
    link.fn = [](std::span<const EndpointValue> e, std::span<double> out) {
        out[0] = e[1].x[0] - e[0].x[0];
        out[1] = e[1].t - e[0].t;
    };
    prob.events = {link};
    auto nlp = transcribe(prob, {MeshPhase::uniform(2, 4), MeshPhase::uniform(3, 3)});
    auto x = exact_exp_point(nlp);
    const auto& L0 = nlp.phase_layout(0);
    const auto& L1 = nlp.phase_layout(1);
    x[L1.state(0, 0)] = x[L0.state(L0.nodes, 0)];
    const auto [f, g] = evaluate_nlp(nlp, x);
    EXPECT_EQ(g[nlp.event_row(0)], 0.0);
    EXPECT_EQ(g[nlp.event_row(0) + 1], 0.0);
}

TEST(Transcription, ConstantIntegrandAccumulatesCTimesDuration) {
    const double c = 3.7, T = 12.5;
    MultiPhaseProblem prob;
    auto p = growth_phase(T);
    p.integrand_names = {"heat"};
    p.integrands = [c](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = c; };
    prob.phases = {p};
    prob.integrals = {IntegralSpec{"Q", {{0, 0}}, Bounds{-inf, 100.0}, 1.0, 1.0}};
    auto nlp = transcribe(prob, {MeshPhase{{0.2, 0.3, 0.5}, {3, 4, 5}}});
    std::vector<double> x(nlp.num_variables(), 0.0);
    x[nlp.phase_layout(0).tf] = T;
    nlp.fill_accumulators(x);
    Solution sol(nlp, x);
    EXPECT_NEAR(sol.integral(0), c * T, 1e-12);
    EXPECT_NEAR(nlp.objective(x), c * T, 1e-12);
    std::vector<double> g(nlp.num_constraints());
    nlp.constraints(x, g);
    for (const auto& link : nlp.integral_layout(0).chain)
        EXPECT_NEAR(g[link.row], 0.0, 1e-12);
    std::vector<double> lo(nlp.num_variables()), hi(nlp.num_variables());
    nlp.variable_bounds(lo, hi);
    EXPECT_EQ(hi[nlp.integral_layout(0).final_var()], 100.0);
}

TEST(Transcription, IntegralSpanningTwoPhasesSumsBoth) {
    MultiPhaseProblem prob;
    auto a = growth_phase(2.0);
    a.integrand_names = {"one"};
    a.integrands = [](double, auto, auto, std::span<double> out) { out[0] = 1.0; };
    auto b = a;
    b.name = "b";
    b.t0 = Bounds::fixed(2.0);
    b.tf = Bounds::fixed(5.0);
    b.integrands = [](double, auto, auto, std::span<double> out) { out[0] = 2.0; };
    prob.phases = {a, b};
    prob.integrals = {IntegralSpec{"Q", {{0, 0}, {1, 0}}, {}, 0.0, 1.0}};
    auto nlp = transcribe(prob, {MeshPhase::uniform(2, 3), MeshPhase::uniform(3, 3)});
    std::vector<double> x(nlp.num_variables(), 0.0);
    x[nlp.phase_layout(0).tf] = 2.0;
    x[nlp.phase_layout(1).t0] = 2.0;
    x[nlp.phase_layout(1).tf] = 5.0;
    nlp.fill_accumulators(x);
    EXPECT_NEAR(Solution(nlp, x).integral(0), 2.0 * 1.0 + 3.0 * 2.0, 1e-12);
}

TEST(Transcription, ZeroDurationDefectsReduceToDX) {
    MultiPhaseProblem prob;
    auto p = growth_phase(0.0);
    p.tf = Bounds::fixed(0.0);
    prob.phases = {p};
    const int N = 5;
    auto nlp = transcribe(prob, {MeshPhase::uniform(1, N)});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> x(nlp.num_variables());
    for (auto& v : x)
        v = U(rng);
    const auto& L = nlp.phase_layout(0);
    x[L.t0] = x[L.tf] = 0.4;
    std::vector<double> g(nlp.num_constraints());
    nlp.constraints(x, g);
    const auto& rule = lgr_rule(N);
    for (int i = 0; i < N; ++i) {
        double dx = 0.0;
        for (int j = 0; j <= N; ++j)
            dx += rule.diff_matrix(i, j) * x[L.state(j, 0)];
        EXPECT_NEAR(g[L.defect_row + i], dx, 1e-14);
    }
}

namespace {

/// Two-state, two-control phase with nonlinear dynamics, path and integrand,
/// non-autonomous when requested.
MultiPhaseProblem nonlinear_problem(bool autonomous) {
    PhaseSpec p;
    p.name = "nl";
    p.state_names = {"a", "b"};
    p.control_names = {"u", "w"};
    p.state_bounds = {Bounds::free(), Bounds::free()};
    p.control_bounds = {Bounds::free(), Bounds::free()};
    p.t0 = Bounds{-1, 1};
    p.tf = Bounds{1, 5};
    p.autonomous = autonomous;
    p.dynamics = [autonomous](double t, std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        const double tt = autonomous ? 0.0 : t;
        dx[0] = std::sin(x[1]) * u[0] + tt * x[0];
        dx[1] = x[0] * x[0] - std::cos(u[1]) + 0.1 * tt * tt;
    };
    p.path_names = {"mix"};
    p.path_bounds = {Bounds{-2, 2}};
    p.path = [autonomous](double t, std::span<const double> x, std::span<const double> u, std::span<double> out) {
        out[0] = x[0] * u[1] + (autonomous ? 0.0 : std::sin(t));
    };
    p.integrand_names = {"energy"};
    p.integrands = [](double, std::span<const double> x, std::span<const double> u, std::span<double> out) {
        out[0] = u[0] * u[0] + x[1] * x[0];
    };
    auto q = p;
    q.name = "nl2";
    q.t0 = Bounds{1, 5};
    q.tf = Bounds{2, 9};
    MultiPhaseProblem prob;
    prob.phases = {p, q};
    prob.integrals = {IntegralSpec{"E", {{0, 0}, {1, 0}}, {}, 1.0, 1.0}};
    EventSpec link;
    link.name = "link";
    link.refs = {{0, EndpointRef::End::final}, {1, EndpointRef::End::initial}};
    link.bounds = {Bounds::fixed(0), Bounds::fixed(0), Bounds::fixed(0)};
    link.fn = [](std::span<const EndpointValue> e, std::span<double> out) {
        out[0] = e[1].x[0] - e[0].x[0];
        out[1] = e[1].x[1] * e[1].x[1] - e[0].x[1];
        out[2] = e[1].t - e[0].t;
    };
    prob.events = {link};
    return prob;
}

std::vector<double> random_point(const NLP& nlp, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> x(nlp.num_variables());
    for (auto& v : x)
        v = U(rng);
    return x;
}

void set_times(const TranscribedNLP& nlp, std::vector<double>& x) {
    x[nlp.phase_layout(0).t0] = 0.2;
    x[nlp.phase_layout(0).tf] = 1.7;
    x[nlp.phase_layout(1).t0] = 1.7;
    x[nlp.phase_layout(1).tf] = 3.1;
}

} // namespace

class StructuredJacobian : public ::testing::TestWithParam<bool> {};

TEST_P(StructuredJacobian, MatchesColoredCentralDifferences) {
    auto nlp = transcribe(nonlinear_problem(GetParam()), {MeshPhase{{0.4, 0.6}, {3, 4}}, MeshPhase::uniform(3, 2)});
    auto x = random_point(nlp, 11);
    set_times(nlp, x);
    const auto pattern = nlp.jacobian_sparsity();
    std::vector<double> structured(pattern.nnz());
    ASSERT_TRUE(nlp.jacobian_values(x, structured));
    std::vector<double> colored(pattern.nnz());
    estimate_jacobian(nlp, x, pattern, color_columns(pattern), colored, {});
    ASSERT_EQ(colored.size(), structured.size());
    for (std::size_t k = 0; k < colored.size(); ++k)
        EXPECT_NEAR(structured[k], colored[k], 1e-7 * (1.0 + std::abs(colored[k]))) << k;
}

INSTANTIATE_TEST_SUITE_P(Autonomy, StructuredJacobian, ::testing::Values(true, false));

TEST(Transcription, PerturbingAVariableOnlyMovesItsSparsityColumn) {
    auto nlp = transcribe(nonlinear_problem(false), {MeshPhase{{0.4, 0.6}, {3, 4}}, MeshPhase::uniform(3, 2)});
    auto x = random_point(nlp, 5);
    set_times(nlp, x);
    const auto pattern = nlp.jacobian_sparsity();
    std::vector<double> g0(nlp.num_constraints()), g1(nlp.num_constraints());
    nlp.constraints(x, g0);
    for (int c = 0; c < nlp.num_variables(); ++c) {
        auto xp = x;
        xp[c] += 0.37;
        nlp.constraints(xp, g1);
        for (int r = 0; r < nlp.num_constraints(); ++r)
            if (g1[r] != g0[r]) {
                EXPECT_GE(pattern.find(r, c), 0) << nlp.constraint_name(r) << " vs " << nlp.variable_name(c);
            }
    }
}

TEST(Transcription, LayoutIsDeterministic) {
    auto mesh = std::vector<MeshPhase>{MeshPhase{{0.4, 0.6}, {3, 4}}, MeshPhase::uniform(3, 2)};
    auto a = transcribe(nonlinear_problem(true), mesh);
    auto b = transcribe(nonlinear_problem(true), mesh);
    EXPECT_EQ(a.layout_json().dump(), b.layout_json().dump());
    const auto pa = a.jacobian_sparsity(), pb = b.jacobian_sparsity();
    EXPECT_EQ(pa.col_start, pb.col_start);
    EXPECT_EQ(pa.row_index, pb.row_index);
}

TEST(Transcription, LayoutJsonNamesEveryVariableAndConstraint) {
    auto nlp = transcribe(nonlinear_problem(true), {MeshPhase::uniform(1, 3), MeshPhase::uniform(1, 2)});
    const auto j = nlp.layout_json();
    EXPECT_EQ(j["variables"].size(), static_cast<std::size_t>(nlp.num_variables()));
    EXPECT_EQ(j["constraints"].size(), static_cast<std::size_t>(nlp.num_constraints()));
    EXPECT_EQ(j["nonzeros"].size(), static_cast<std::size_t>(nlp.jacobian_sparsity().nnz()));
    EXPECT_EQ(j["variables"][2]["name"], "nl.x[0].a");
    EXPECT_EQ(j["variables"][4]["name"], "nl.u[0].u");
    for (const auto& c : j["constraints"])
        EXPECT_EQ(c["name"].get<std::string>().rfind("g[", 0), std::string::npos);
}

TEST(Transcription, SpectralConvergenceOfDefects) {
    double previous = inf;
    std::vector<double> defects;
    for (int N = 4; N <= 12; ++N) {
        MultiPhaseProblem prob;
        prob.phases = {growth_phase(1.0)};
        auto nlp = transcribe(prob, {MeshPhase::uniform(1, N)});
        const auto [f, g] = evaluate_nlp(nlp, exact_exp_point(nlp));
        const double d = max_abs(g, 0, N);
        defects.push_back(d);
        if (d > 1e-13) {
            EXPECT_LT(d, previous) << "N=" << N;
        }
        previous = d;
    }
    // Geometric decay: every step at least halves the defect until round-off.
    for (std::size_t k = 1; k < defects.size(); ++k)
        if (defects[k - 1] > 1e-12) {
            EXPECT_LT(defects[k], 0.5 * defects[k - 1]);
        }
}

TEST(Transcription, NonFiniteCallbackReportsCoordinates) {
    MultiPhaseProblem prob;
    auto p = growth_phase(1.0);
    p.dynamics = [](double, std::span<const double> x, std::span<const double>, std::span<double> dx) {
        dx[0] = x[0] > 5.0 ? std::nan("") : x[0];
    };
    prob.phases = {p};
    auto nlp = transcribe(prob, {MeshPhase::uniform(3, 4)});
    std::vector<double> x(nlp.num_variables(), 1.0);
    x[nlp.phase_layout(0).t0] = 0.0;
    const auto& L = nlp.phase_layout(0);
    x[L.state(6, 0)] = 9.0; // interval 1, node 2
    std::vector<double> g(nlp.num_constraints());
    try {
        nlp.constraints(x, g);
        FAIL() << "expected NonFiniteError";
    } catch (const NonFiniteError& e) {
        EXPECT_EQ(e.phase(), 0);
        EXPECT_EQ(e.interval(), 1);
        EXPECT_EQ(e.node(), 2);
        EXPECT_EQ(e.row(), L.defect_row + 6);
    }
}

TEST(Transcription, RejectsInvalidInputs) {
    MultiPhaseProblem prob;
    prob.phases = {growth_phase(1.0)};
    EXPECT_THROW(transcribe(prob, {}), ContractError);
    EXPECT_THROW(transcribe(prob, {MeshPhase{{}, {}}}), ContractError);
    EXPECT_THROW(transcribe(prob, {MeshPhase{{0.5, 0.6}, {3, 3}}}), ContractError);
    EXPECT_THROW(transcribe(prob, {MeshPhase{{1.0}, {65}}}), ContractError);
    auto bad = prob;
    bad.phases[0].state_bounds.clear();
    EXPECT_THROW(transcribe(bad, {MeshPhase::uniform(1, 3)}), ContractError);
    auto bad_link = prob;
    EventSpec e;
    e.name = "x";
    e.refs = {{3, EndpointRef::End::final}};
    e.bounds = {Bounds::fixed(0)};
    e.fn = [](auto, auto) {};
    bad_link.events = {e};
    EXPECT_THROW(transcribe(bad_link, {MeshPhase::uniform(1, 3)}), ContractError);
    auto nlp = transcribe(prob, {MeshPhase::uniform(1, 3)});
    std::vector<double> short_point(2);
    EXPECT_THROW(evaluate_nlp(nlp, short_point), ContractError);
}

TEST(Interpolation, ExactAtNodesAndForPolynomials) {
    MultiPhaseProblem prob;
    prob.phases = {growth_phase(2.0, true)};
    const int N = 5;
    auto nlp = transcribe(prob, {MeshPhase{{0.3, 0.7}, {N, N}}});
    auto poly = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t * t - 0.1 * std::pow(t, 5); };
    std::vector<TranscribedNLP::PhaseGuess> guess{{0.0, 2.0, [&](double t, std::span<double> x, std::span<double> u) {
                                                      x[0] = poly(t);
                                                      u[0] = 3.0 * t * t;
                                                  }}};
    Solution sol(nlp, nlp.initial_point(guess));
    const auto times = sol.node_times(0);
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
        double xs, us;
        sol.state_at(0, times[j], std::span(&xs, 1));
        sol.control_at(0, times[j], std::span(&us, 1));
        EXPECT_EQ(xs, sol.node_state(0, static_cast<int>(j))[0]);
        EXPECT_EQ(us, sol.node_control(0, static_cast<int>(j))[0]);
    }
    for (double t = 0.0; t <= 2.0; t += 0.0137) {
        double xs, us;
        sol.state_at(0, t, std::span(&xs, 1));
        sol.control_at(0, t, std::span(&us, 1));
        EXPECT_NEAR(xs, poly(t), 1e-12);
        EXPECT_NEAR(us, 3.0 * t * t, 1e-11);
    }
    double dummy;
    EXPECT_THROW(sol.state_at(0, 2.1, std::span(&dummy, 1)), ContractError);
    EXPECT_THROW(sol.state_at(0, -0.1, std::span(&dummy, 1)), ContractError);
}

TEST(Interpolation, LinearStateContinuousAcrossIntervalBoundary) {
    MultiPhaseProblem prob;
    prob.phases = {growth_phase(1.0)};
    auto nlp = transcribe(prob, {MeshPhase{{0.4, 0.6}, {3, 4}}});
    std::vector<TranscribedNLP::PhaseGuess> guess{
        {0.0, 1.0, [](double t, std::span<double> x, std::span<double>) { x[0] = 2.0 + 3.0 * t; }}};
    Solution sol(nlp, nlp.initial_point(guess));
    double left, right;
    sol.state_at(0, std::nextafter(0.4, 0.0), std::span(&left, 1));
    sol.state_at(0, 0.4, std::span(&right, 1));
    EXPECT_NEAR(left, right, 1e-12);
    EXPECT_NEAR(right, 3.2, 1e-12);
    const auto traj = interpolate_solution(sol, 0, std::vector<double>{0.0, 0.5, 1.0});
    EXPECT_NEAR(traj.x[2][0], 5.0, 1e-12);
}

TEST(TranscribedSolve, DoubleIntegratorMinimumEnergy) {
    // Rest-to-rest unit move in unit time: u = 6 - 12 t, cost 12.
    PhaseSpec p;
    p.name = "di";
    p.state_names = {"pos", "vel"};
    p.control_names = {"acc"};
    p.state_bounds = {Bounds::free(), Bounds::free()};
    p.control_bounds = {Bounds{-20, 20}};
    p.initial_state = {Bounds::fixed(0), Bounds::fixed(0)};
    p.final_state = {Bounds::fixed(1), Bounds::fixed(0)};
    p.t0 = Bounds::fixed(0);
    p.tf = Bounds::fixed(1);
    p.dynamics = [](double, std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        dx[0] = x[1];
        dx[1] = u[0];
    };
    p.integrand_names = {"effort"};
    p.integrands = [](double, auto, std::span<const double> u, std::span<double> out) { out[0] = u[0] * u[0]; };
    MultiPhaseProblem prob;
    prob.phases = {p};
    prob.integrals = {IntegralSpec{"J", {{0, 0}}, {}, 1.0, 1.0}};
    auto nlp = transcribe(prob, {MeshPhase::uniform(2, 4)});
    std::vector<TranscribedNLP::PhaseGuess> guess{
        {0.0, 1.0, [](double t, std::span<double> x, std::span<double> u) {
             x[0] = t;
             x[1] = 0.0;
             u[0] = 0.0;
         }}};
    const auto report = solve(nlp, nlp.initial_point(guess), {});
    ASSERT_EQ(report.status, SolveStatus::converged) << report.message;
    EXPECT_NEAR(report.objective, 12.0, 1e-6);
    Solution sol(nlp, report.x);
    for (double t : {0.0, 0.25, 0.6, 0.9}) {
        double u;
        sol.control_at(0, t, std::span(&u, 1));
        EXPECT_NEAR(u, 6.0 - 12.0 * t, 1e-5);
    }
}
