#include <ascentry/output.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace ascentry;

namespace {

struct Fixture {
    std::shared_ptr<const MissionModel> model;
    std::unique_ptr<TranscribedNLP> nlp;
    std::unique_ptr<Solution> sol;
};

// The guess point stands in for a solution: the writers only need a point.
const Fixture& fixture() {
    static const Fixture f = [] {
        MissionConfig c;
        c.base_dir = std::filesystem::path(ASCENTRY_DATA_DIR).parent_path();
        Fixture f;
        f.model = MissionModel::load(c);
        f.nlp = std::make_unique<TranscribedNLP>(build_mission(f.model), initial_mission_mesh(c));
        f.sol = std::make_unique<Solution>(*f.nlp, mission_initial_point(*f.nlp, initial_guess(*f.model)));
        return f;
    }();
    return f;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(Trajectory, SpansTheMissionAtWholeSeconds) {
    const auto& f = fixture();
    const auto rows = sample_trajectory(*f.model, *f.sol);
    ASSERT_GT(rows.size(), 100u);
    EXPECT_EQ(rows.front().t, f.sol->t0(0));
    EXPECT_EQ(rows.back().t, f.sol->tf(7));
    for (std::size_t i = 1; i + 1 < rows.size(); ++i)
        EXPECT_EQ(rows[i].t, std::floor(rows[i].t));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_GT(rows[i].t, rows[i - 1].t);
        EXPECT_GE(rows[i].phase, rows[i - 1].phase);
    }
}

TEST(Trajectory, PathColumnsMatchTheirDefinitions) {
    const auto& f = fixture();
    const auto& e = f.model->config.earth;
    for (const auto& r : sample_trajectory(*f.model, *f.sol)) {
        const double rho = atmosphere_lookup(f.model->atmosphere, r.s.h).rho;
        const double q = 0.5 * rho * r.s.v * r.s.v * 1e3;
        const double Qdot = e.kappa * std::sqrt(rho / e.rho0) * std::pow(r.s.v / e.v_c, 3.15);
        const double n = std::hypot(r.path.L, r.path.D) / (r.m * e.g0);
        EXPECT_NEAR(r.path.q, q, 1e-9 * std::max(1.0, q)) << r.t;
        EXPECT_NEAR(r.path.Qdot, Qdot, 1e-9 * std::max(1.0, Qdot)) << r.t;
        EXPECT_NEAR(r.path.n, n, 1e-9 * std::max(1.0, n)) << r.t;
    }
}

TEST(Trajectory, HeatLoadAccumulatesOnlyDuringEntry) {
    const auto& f = fixture();
    const auto rows = sample_trajectory(*f.model, *f.sol);
    double prev = 0.0;
    for (const auto& r : rows) {
        if (r.t <= f.sol->t0(6)) {
            EXPECT_EQ(r.Q, 0.0) << r.t;
        }
        EXPECT_GE(r.Q, prev);
        prev = r.Q;
    }
    // Finer trapezoid over the two entry phases.
    double Q_dense = 0.0;
    std::vector<double> x(9);
    for (int p : {6, 7}) {
        const double a = f.sol->t0(p), b = f.sol->tf(p);
        const int n = static_cast<int>(std::ceil((b - a) / 0.05));
        double prev = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = a + (b - a) * i / n;
            auto xs = std::span(x).first(MissionModel::state_count(p));
            f.sol->state_at(p, t, xs);
            const double cur = mission_path_quantities(*f.model, p, xs).Qdot;
            if (i > 0)
                Q_dense += 0.5 * (b - a) / n * (prev + cur);
            prev = cur;
        }
    }
    EXPECT_GT(rows.back().Q, 0.0);
    EXPECT_NEAR(rows.back().Q / Q_dense, 1.0, 0.05);
}

TEST(Trajectory, CsvIsDeterministic) {
    const auto& f = fixture();
    std::ostringstream a, b;
    write_trajectory_csv(a, sample_trajectory(*f.model, *f.sol));
    write_trajectory_csv(b, sample_trajectory(*f.model, *f.sol));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), trajectory_csv_header);
}

TEST(NodeCsv, OneRowPerNodeAndEndpoint) {
    const auto& f = fixture();
    std::ostringstream out;
    write_node_csv(out, *f.model, *f.sol);
    int expected = 1;
    for (int p = 0; p < mission_phases; ++p)
        expected += f.nlp->phase_layout(p).nodes + 1;
    EXPECT_EQ(count_lines(out.str()), expected);
}

TEST(Plots, FilesShareTheTimeBase) {
    const auto& f = fixture();
    const auto rows = sample_trajectory(*f.model, *f.sol);
    const auto dir = std::filesystem::temp_directory_path() / "ascentry_plots_test";
    std::filesystem::remove_all(dir);
    const auto files = emit_plots(rows, dir);
    ASSERT_EQ(files.size(), 4u);
    for (const auto& p : files) {
        const auto text = read_file(p);
        EXPECT_EQ(count_lines(text), static_cast<int>(rows.size()) + 1) << p;
        EXPECT_EQ(text.rfind("t,", 0), 0u) << p;
    }
    std::filesystem::remove_all(dir);
}

TEST(Plots, FailureMapKeepsSmallestConvergedLoad) {
    std::vector<StudyResult> rows(5);
    rows[0] = {9, 3000};
    rows[1] = {9, 2000};
    rows[2] = {9, 1000};
    rows[3] = {7, 3000};
    rows[4] = {5, 3000};
    rows[0].status = rows[1].status = rows[3].status = "converged";
    rows[2].status = "infeasible";
    const auto map = failure_map(rows);
    ASSERT_EQ(map.size(), 2u);
    EXPECT_EQ(map[0], std::make_pair(7.0, 3000.0));
    EXPECT_EQ(map[1], std::make_pair(9.0, 2000.0));

    const auto dir = std::filesystem::temp_directory_path() / "ascentry_sweep_plots_test";
    std::filesystem::remove_all(dir);
    emit_sweep_plots(rows, dir);
    EXPECT_EQ(count_lines(read_file(dir / "sweep_cost.csv")), 4);
    EXPECT_EQ(read_file(dir / "failure_map.csv"), "Qdot_max_MW_m2,smallest_feasible_Q_max_MJ_m2\n7,3000\n9,2000\n");
    std::filesystem::remove_all(dir);
}
