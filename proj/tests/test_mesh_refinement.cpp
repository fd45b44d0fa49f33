#include <ascentry/mesh_refinement.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace ascentry;

namespace {

PhaseSpec scalar_phase(PointFunction dynamics, bool autonomous = true) {
    PhaseSpec p;
    p.name = "s";
    p.state_names = {"x"};
    p.state_bounds = {Bounds::free()};
    p.initial_state = {Bounds::fixed(1.0)};
    p.t0 = Bounds::fixed(0.0);
    p.tf = Bounds::fixed(1.0);
    p.autonomous = autonomous;
    p.dynamics = std::move(dynamics);
    return p;
}

Solution sampled(const TranscribedNLP& nlp, std::function<double(double)> x) {
    std::vector<TranscribedNLP::PhaseGuess> g{
        {0.0, 1.0, [x](double t, std::span<double> xs, std::span<double>) { xs[0] = x(t); }}};
    return Solution(nlp, nlp.initial_point(g));
}

const PointFunction growth = [](double, std::span<const double> x, std::span<const double>, std::span<double> dx) {
    dx[0] = x[0];
};

} // namespace

TEST(EstimateError, ConstantSolutionOfStaticDynamicsIsExact) {
    MultiPhaseProblem prob;
    prob.phases = {scalar_phase([](double, auto, auto, std::span<double> dx) { dx[0] = 0.0; })};
    auto nlp = transcribe(prob, {MeshPhase::uniform(3, 4)});
    const auto err = estimate_error(sampled(nlp, [](double) { return 1.0; }), 0);
    ASSERT_EQ(err.size(), 3u);
    for (double e : err)
        EXPECT_EQ(e, 0.0);
}

TEST(EstimateError, ExponentialAtDegreeEightIsSmall) {
    MultiPhaseProblem prob;
    prob.phases = {scalar_phase(growth)};
    auto nlp = transcribe(prob, {MeshPhase::uniform(1, 8)});
    const auto err = estimate_error(sampled(nlp, [](double t) { return std::exp(t); }), 0);
    EXPECT_LT(err[0], 1e-6);
    EXPECT_GT(err[0], 0.0);
}

TEST(EstimateError, CornerConcentratesInItsInterval) {
    // x = max(0, t - 0.6) with matching piecewise dynamics; the kink sits in interval 2 of 4.
    MultiPhaseProblem prob;
    prob.phases = {scalar_phase(
        [](double t, auto, auto, std::span<double> dx) { dx[0] = t > 0.6 ? 1.0 : 0.0; }, false)};
    prob.phases[0].initial_state = {Bounds::fixed(0.0)};
    auto nlp = transcribe(prob, {MeshPhase::uniform(4, 5)});
    const auto err = estimate_error(sampled(nlp, [](double t) { return std::max(0.0, t - 0.6); }), 0);
    for (int k : {0, 1, 3})
        EXPECT_LT(err[k], err[2]) << k;
    EXPECT_GT(err[2], 1e-3);
}

TEST(Refine, AllBelowToleranceIsFixedPoint) {
    const MeshPhase mesh{{0.3, 0.7}, {4, 6}};
    const std::vector<double> errors{1e-6, 5e-5};
    const auto r = refine(mesh, errors, {});
    EXPECT_TRUE(r.fixed_point);
    EXPECT_EQ(r.mesh.degrees, mesh.degrees);
    EXPECT_EQ(r.mesh.fractions, mesh.fractions);
}

TEST(Refine, RaisesDegreeByErrorMagnitude) {
    RefinementOptions opt;
    const MeshPhase mesh{{0.5, 0.5}, {3, 4}};
    // 100x tolerance: +2; 3.2x tolerance: +1.
    const std::vector<double> errors{100.0 * opt.mesh_tolerance, 3.2 * opt.mesh_tolerance};
    const auto r = refine(mesh, errors, opt);
    EXPECT_FALSE(r.fixed_point);
    EXPECT_EQ(r.mesh.degrees, (std::vector<int>{5, 5}));
}

TEST(Refine, SplitsWhenDegreeWouldExceedMaximum) {
    RefinementOptions opt;
    const MeshPhase mesh{{0.25, 0.75}, {4, opt.n_max}};
    const std::vector<double> errors{0.0, 100.0 * opt.mesh_tolerance};
    const auto r = refine(mesh, errors, opt);
    ASSERT_EQ(r.mesh.intervals(), 3);
    EXPECT_EQ(r.mesh.degrees[0], 4);
    EXPECT_DOUBLE_EQ(r.mesh.fractions[1], 0.375);
    EXPECT_DOUBLE_EQ(r.mesh.fractions[2], 0.375);
    EXPECT_EQ(r.mesh.degrees[1], r.mesh.degrees[2]);
    EXPECT_GE(r.mesh.degrees[1], opt.n_min);
}

TEST(Refine, NeverDecreasesPointCount) {
    RefinementOptions opt;
    for (int N = 1; N <= opt.n_max; ++N)
        for (double factor : {1.5, 10.0, 1e3, 1e9, std::numeric_limits<double>::infinity()}) {
            const MeshPhase mesh{{1.0}, {N}};
            const std::vector<double> errors{factor * opt.mesh_tolerance};
            const auto r = refine(mesh, errors, opt);
            EXPECT_GE(r.mesh.nodes(), mesh.nodes()) << N << " " << factor;
            r.mesh.validate();
        }
}

TEST(Refine, RejectsMisalignedErrors) {
    const MeshPhase mesh{{1.0}, {3}};
    const std::vector<double> errors{1.0, 2.0};
    EXPECT_THROW(refine(mesh, errors, {}), ContractError);
    RefinementOptions bad;
    bad.n_min = 11;
    EXPECT_THROW(bad.validate(), ContractError);
}

TEST(RefinementLoop, ExponentialConvergesWithinFourRefinements) {
    MultiPhaseProblem prob;
    prob.phases = {scalar_phase(growth)};
    RefinementOptions opt;
    opt.mesh_tolerance = 1e-6;
    std::vector<TranscribedNLP::PhaseGuess> guess{
        {0.0, 1.0, [](double, std::span<double> x, std::span<double>) { x[0] = 1.0; }}};
    const auto r = refine_and_solve(prob, {MeshPhase::uniform(1, 3)}, guess, {}, opt);
    EXPECT_TRUE(r.mesh_converged);
    EXPECT_LE(r.refinements(), 4);
    EXPECT_LE(r.history.back().max_error, opt.mesh_tolerance);
    double end;
    r.solution().state_at(0, 1.0, std::span(&end, 1));
    EXPECT_NEAR(end, std::exp(1.0), 1e-5);
    for (std::size_t i = 1; i < r.history.size(); ++i)
        EXPECT_GE(r.history[i].mesh[0].nodes(), r.history[i - 1].mesh[0].nodes());
    const auto j = mesh_history_json(r);
    EXPECT_EQ(j.size(), r.history.size());
    EXPECT_EQ(j[0]["phases"][0]["degrees"][0], 3);
}

TEST(RefinementLoop, DoubleIntegratorMeetsTolerance) {
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
    std::vector<TranscribedNLP::PhaseGuess> guess{{0.0, 1.0, [](double t, std::span<double> x, std::span<double> u) {
                                                       x[0] = t;
                                                       x[1] = 0.0;
                                                       u[0] = 0.0;
                                                   }}};
    RefinementOptions opt;
    const auto r = refine_and_solve(prob, {MeshPhase::uniform(2, 3)}, guess, {}, opt);
    EXPECT_TRUE(r.mesh_converged);
    EXPECT_LE(r.history.back().max_error, opt.mesh_tolerance);
    EXPECT_EQ(r.report.status, SolveStatus::converged);
    EXPECT_NEAR(r.report.objective, 12.0, 1e-6);
}

TEST(RefinementLoop, StopsAtMaxRefinements) {
    MultiPhaseProblem prob;
    prob.phases = {scalar_phase(growth)};
    RefinementOptions opt;
    opt.mesh_tolerance = 1e-15;
    opt.max_refinements = 2;
    std::vector<TranscribedNLP::PhaseGuess> guess{
        {0.0, 1.0, [](double, std::span<double> x, std::span<double>) { x[0] = 1.0; }}};
    const auto r = refine_and_solve(prob, {MeshPhase::uniform(1, 3)}, guess, {}, opt);
    EXPECT_FALSE(r.mesh_converged);
    EXPECT_LE(r.refinements(), opt.max_refinements);
    EXPECT_EQ(r.history.back().errors[0].size(), static_cast<std::size_t>(r.history.back().mesh[0].intervals()));
}
