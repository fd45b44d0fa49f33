#include <ascentry/models.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

using namespace ascentry;

namespace {

const std::string data_dir = ASCENTRY_DATA_DIR;

AtmosphereTable shipped_atmosphere() { return AtmosphereTable::from_csv(data_dir + "/atmosphere_us1962.csv"); }

// Fritsch-Carlson slope at an interior knot, written out for three points.
double interior_slope(double h0, double h1, double d0, double d1) {
    if (d0 * d1 <= 0.0)
        return 0.0;
    const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
    return (w1 + w2) / (w1 / d0 + w2 / d1);
}

} // namespace

TEST(EarthConstants, DefaultsAreValid) {
    EarthConstants e;
    EXPECT_NO_THROW(e.validate());
    e.v_c = 8.5;
    EXPECT_THROW(e.validate(), ConfigError);
}

TEST(Atmosphere, SeaLevelDensity) {
    const auto atm = shipped_atmosphere();
    EXPECT_EQ(atmosphere_lookup(atm, 0.0).rho, 1.225);
}

TEST(Atmosphere, ReproducesEveryKnot) {
    const auto atm = shipped_atmosphere();
    for (std::size_t i = 0; i < atm.altitudes().size(); ++i) {
        const auto s = atm.lookup(atm.altitudes()[i]);
        EXPECT_EQ(s.rho, atm.densities()[i]);
        EXPECT_EQ(s.a, atm.sound_speeds()[i]);
    }
}

TEST(Atmosphere, MidpointMatchesHandEvaluatedInterpolant) {
    // Five knots; evaluate between knots 2 and 3 where both slopes are interior.
    const std::vector<double> h{0, 10, 20, 35, 50};
    const std::vector<double> rho{1.2, 0.41, 0.088, 0.0082, 0.001};
    const std::vector<double> a(5, 0.3);
    AtmosphereTable table(h, rho, a);

    std::vector<double> y(5);
    for (int i = 0; i < 5; ++i)
        y[i] = std::log(rho[i]);
    auto delta = [&](int k) { return (y[k + 1] - y[k]) / (h[k + 1] - h[k]); };
    const double s2 = interior_slope(h[2] - h[1], h[3] - h[2], delta(1), delta(2));
    const double s3 = interior_slope(h[3] - h[2], h[4] - h[3], delta(2), delta(3));
    const double hm = 27.5, dh = h[3] - h[2];
    const double t = (hm - h[2]) / dh;
    const double expected_log = (2 * t * t * t - 3 * t * t + 1) * y[2] + (t * t * t - 2 * t * t + t) * dh * s2 +
                                (-2 * t * t * t + 3 * t * t) * y[3] + (t * t * t - t * t) * dh * s3;
    EXPECT_NEAR(table.lookup(hm).rho, std::exp(expected_log), 1e-14);
}

TEST(Atmosphere, LogLinearAboveTable) {
    const auto atm = shipped_atmosphere();
    const auto h = atm.altitudes();
    const auto r = atm.densities();
    const std::size_t n = h.size();
    const double slope = std::log(r[n - 1] / r[n - 2]) / (h[n - 1] - h[n - 2]);
    const double q = h[n - 1] + 7.0;
    EXPECT_NEAR(atm.lookup(q).rho / (r[n - 1] * std::exp(slope * 7.0)), 1.0, 1e-12);
    EXPECT_GT(atm.lookup(q).rho, 0.0);
}

TEST(Atmosphere, NonFiniteAltitudeIsDomainError) {
    const auto atm = shipped_atmosphere();
    EXPECT_THROW(atm.lookup(std::nan("")), DomainError);
    EXPECT_THROW(atm.lookup(INFINITY), DomainError);
}

TEST(Atmosphere, MonotoneNonIncreasingOnShippedTable) {
    const auto atm = shipped_atmosphere();
    double prev = atm.lookup(0.0).rho;
    for (double h = 0.01; h <= 220.0; h += 0.037) {
        const double r = atm.lookup(h).rho;
        ASSERT_LE(r, prev) << "h = " << h;
        prev = r;
    }
}

TEST(Atmosphere, RejectsMalformedTables) {
    EXPECT_THROW(AtmosphereTable({0, 1}, {1.0, 0.0}, {0.3, 0.3}), ContractError);
    EXPECT_THROW(AtmosphereTable({0, 0}, {1.0, 0.5}, {0.3, 0.3}), ContractError);
    EXPECT_THROW(AtmosphereTable({0}, {1.0}, {0.3}), ContractError);
}

namespace {

AeroTable bilinear_table(double a0, double ba, double bm, double bam) {
    const std::vector<double> alphas{-10, 0, 5, 12, 20};
    const std::vector<double> machs{0.5, 1.0, 2.0, 4.0};
    std::vector<double> cl, cd;
    for (double al : alphas)
        for (double m : machs) {
            cl.push_back(a0 + ba * al + bm * m + bam * al * m);
            cd.push_back(0.5 + 0.01 * al + 0.02 * m + 0.001 * al * m);
        }
    return AeroTable(alphas, machs, cl, cd);
}

} // namespace

TEST(Aero, ReproducesGridNodes) {
    const auto t = AeroTable::from_csv(data_dir + "/aero/stage1_cl.csv", data_dir + "/aero/stage1_cd.csv");
    for (std::size_t i = 0; i < t.alphas().size(); ++i)
        for (std::size_t j = 0; j < t.machs().size(); ++j) {
            const auto c = aero_lookup(t, t.alphas()[i], t.machs()[j]);
            EXPECT_EQ(c.CL, t.cl(i, j));
            EXPECT_EQ(c.CD, t.cd(i, j));
        }
}

TEST(Aero, ClampsOutsideTheGrid) {
    const auto t = bilinear_table(0.1, 0.05, -0.01, 0.002);
    const auto hi = aero_lookup(t, 45.0, 1.7);
    const auto edge = aero_lookup(t, 20.0, 1.7);
    EXPECT_EQ(hi.CL, edge.CL);
    EXPECT_EQ(hi.CD, edge.CD);
    const auto lo = aero_lookup(t, 3.0, 0.0);
    const auto lo_edge = aero_lookup(t, 3.0, 0.5);
    EXPECT_EQ(lo.CL, lo_edge.CL);
}

TEST(Aero, BilinearTableAtCellCenter) {
    const auto t = bilinear_table(0.1, 0.05, -0.01, 0.002);
    // Cell [5, 12] x [1, 2]; centre (8.5, 1.5).
    const double al = 8.5, m = 1.5;
    const double expected_cl = 0.1 + 0.05 * al - 0.01 * m + 0.002 * al * m;
    const double expected_cd = 0.5 + 0.01 * al + 0.02 * m + 0.001 * al * m;
    const auto c = aero_lookup(t, al, m);
    EXPECT_NEAR(c.CL, expected_cl, 1e-13);
    EXPECT_NEAR(c.CD, expected_cd, 1e-13);
}

TEST(Aero, NonFiniteInputIsDomainError) {
    const auto t = bilinear_table(0.1, 0.05, -0.01, 0.002);
    EXPECT_THROW(aero_lookup(t, std::nan(""), 1.0), DomainError);
    EXPECT_THROW(aero_lookup(t, 1.0, INFINITY), DomainError);
}

TEST(Aero, RejectsNonPositiveDrag) {
    EXPECT_THROW(AeroTable({0, 1}, {0, 1}, {0, 0, 0, 0}, {0.1, 0.1, 0.0, 0.1}), ContractError);
}

TEST(DragPolar, ExactDataRecoversCoefficients) {
    const std::vector<double> cl{0, 1, 2}, cd{0.1, 0.3, 0.9};
    const auto f = fit_drag_polar(cl, cd);
    EXPECT_NEAR(f.CD0, 0.1, 1e-14);
    EXPECT_NEAR(f.K, 0.2, 1e-14);
}

TEST(DragPolar, NoisyDataMatchesNormalEquations) {
    std::mt19937 rng(7);
    std::normal_distribution<double> noise(0.0, 0.003);
    std::uniform_real_distribution<double> uni(-1.2, 1.2);
    std::vector<double> cl(25), cd(25);
    for (int i = 0; i < 25; ++i) {
        cl[i] = uni(rng);
        cd[i] = 0.05 + 0.4 * cl[i] * cl[i] + noise(rng);
    }
    // [n, sum x; sum x, sum x^2] [c0; k] = [sum y; sum x y], x = CL^2, by Cramer's rule.
    double n = 25, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (int i = 0; i < 25; ++i) {
        const double x = cl[i] * cl[i];
        sx += x;
        sxx += x * x;
        sy += cd[i];
        sxy += x * cd[i];
    }
    const double det = n * sxx - sx * sx;
    const double c0 = (sy * sxx - sx * sxy) / det;
    const double k = (n * sxy - sx * sy) / det;
    const auto f = fit_drag_polar(cl, cd);
    EXPECT_NEAR(f.CD0, c0, 1e-12);
    EXPECT_NEAR(f.K, k, 1e-12);
}

TEST(DragPolar, RankDeficientDesign) {
    const std::vector<double> cl{1, 1, 1}, cd{0.2, 0.3, 0.4};
    EXPECT_THROW(fit_drag_polar(cl, cd), RankDeficiencyError);
    const std::vector<double> sym{-1, 1}, cd2{0.2, 0.3};
    EXPECT_THROW(fit_drag_polar(sym, cd2), RankDeficiencyError);
}

TEST(DragPolar, ZeroResidualOnPolarData) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.5);
    for (int trial = 0; trial < 50; ++trial) {
        const double c0 = 0.01 + 0.1 * uni(rng), k = 0.5 * uni(rng);
        std::vector<double> cl(6), cd(6);
        for (int i = 0; i < 6; ++i) {
            cl[i] = uni(rng);
            cd[i] = c0 + k * cl[i] * cl[i];
        }
        const auto f = fit_drag_polar(cl, cd);
        for (int i = 0; i < 6; ++i)
            EXPECT_LE(std::abs(f(cl[i]) - cd[i]), 1e-12 * cd[i]);
    }
}

namespace {

AeroTable raw_entry(double cl10, double cl15, double cl20, double c0, double k) {
    std::vector<double> cl{cl10, cl10 * 1.1, cl15, cl15 * 1.1, cl20, cl20 * 1.1};
    std::vector<double> cd;
    for (double c : cl)
        cd.push_back(c0 + k * c * c);
    return AeroTable({10, 15, 20}, {5, 10}, cl, cd);
}

} // namespace

TEST(EntryAero, LinearFillAndExtrapolation) {
    const auto ext = extend_entry_aero(raw_entry(0.5, 0.8, 1.0, 0.04, 0.3));
    ASSERT_EQ(ext.alphas().size(), 6u);
    EXPECT_EQ(ext.cl(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(ext.cl(1, 0), 0.25);
    EXPECT_DOUBLE_EQ(ext.cl(5, 0), 1.2);
}

TEST(EntryAero, NewDragFromFittedPolar) {
    const double c0 = 0.04, k = 0.3;
    const auto raw = raw_entry(0.5, 0.8, 1.0, c0, k);
    const auto ext = extend_entry_aero(raw);
    for (std::size_t j = 0; j < 2; ++j) {
        const std::array<double, 3> cls{raw.cl(0, j), raw.cl(1, j), raw.cl(2, j)};
        const std::array<double, 3> cds{raw.cd(0, j), raw.cd(1, j), raw.cd(2, j)};
        const auto fit = fit_drag_polar(cls, cds);
        EXPECT_NEAR(ext.cd(5, j), fit(ext.cl(5, j)), 1e-14);
        EXPECT_NEAR(ext.cd(5, j), c0 + k * ext.cl(5, j) * ext.cl(5, j), 1e-12);
        EXPECT_NEAR(ext.cd(0, j), c0, 1e-12);
    }
}

TEST(EntryAero, RawRowsUnchanged) {
    const auto raw = AeroTable::from_csv(data_dir + "/aero/entry_cl_raw.csv", data_dir + "/aero/entry_cd_raw.csv");
    const auto ext = extend_entry_aero(raw);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < raw.machs().size(); ++j) {
            EXPECT_EQ(ext.cl(i + 2, j), raw.cl(i, j));
            EXPECT_EQ(ext.cd(i + 2, j), raw.cd(i, j));
        }
}

TEST(EntryAero, WrongGridIsContractError) {
    const AeroTable bad({10, 15, 25}, {5, 10}, {0.1, 0.1, 0.2, 0.2, 0.3, 0.3}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
    EXPECT_THROW(extend_entry_aero(bad), ContractError);
}
