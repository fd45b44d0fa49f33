#pragma once

// Environment and vehicle data: Earth constants, tabulated atmosphere,
// aerodynamic coefficient tables and the drag-polar extension of sparse
// entry-vehicle data.

#include <ascentry/csv.hpp>
#include <ascentry/errors.hpp>
#include <ascentry/interpolation.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace ascentry {

inline constexpr double deg = std::numbers::pi / 180.0;

/// Spherical rotating Earth plus the reference values used by the heating model.
struct EarthConstants {
    double mu_e = 3.986004405e5;     // km^3/s^2
    double R_e = 6.378166e3;         // km
    double omega_e = 7.292115856e-5; // rad/s
    double g0 = 9.8066498e-3;        // km/s^2
    double rho0 = 1.225;             // kg/m^3
    double v_c = 7.9053;             // km/s, circular speed at R_e
    double kappa = 199.87;           // MW/m^2

    void validate() const {
        for (double f : {mu_e, R_e, omega_e, g0, rho0, v_c, kappa})
            if (!(f > 0.0) || !std::isfinite(f))
                throw ConfigError("EarthConstants: every field must be positive and finite");
        if (std::abs(v_c - std::sqrt(mu_e / R_e)) / v_c >= 1e-4)
            throw ConfigError("EarthConstants: v_c inconsistent with sqrt(mu_e / R_e)");
    }
};

// ---------------------------------------------------------------------------
// Atmosphere
// ---------------------------------------------------------------------------

struct AtmosphereSample {
    double rho; // kg/m^3
    double a;   // km/s
};

/**
 * Tabulated density and speed of sound versus geometric altitude.
 *
 * Density is interpolated on log(rho) with a monotone cubic, so it stays
 * positive and keeps the exponential character of the data. Outside the table
 * log(rho) continues linearly with the slope of the nearest segment; the
 * speed of sound is held at the nearest table value.
 */
class AtmosphereTable {
public:
    AtmosphereTable() = default;

    AtmosphereTable(std::vector<double> altitudes, std::vector<double> densities,
                    std::vector<double> sound_speeds)
        : h_(std::move(altitudes)), rho_(std::move(densities)), a_(std::move(sound_speeds)) {
        if (h_.size() < 2 || rho_.size() != h_.size() || a_.size() != h_.size())
            throw ContractError("AtmosphereTable: need >= 2 rows of equal length");
        for (std::size_t i = 0; i < h_.size(); ++i) {
            if (i > 0 && !(h_[i] > h_[i - 1]))
                throw ContractError("AtmosphereTable: altitudes must be strictly increasing");
            if (!(rho_[i] > 0.0))
                throw ContractError("AtmosphereTable: densities must be positive");
        }
        log_rho_.resize(rho_.size());
        std::transform(rho_.begin(), rho_.end(), log_rho_.begin(), [](double r) { return std::log(r); });
        log_rho_interp_ = MonotoneCubic(h_, log_rho_);
        a_interp_ = MonotoneCubic(h_, a_);
    }

    /// Header `h_km,rho_kgm3,a_kms`, rows ascending in altitude.
    static AtmosphereTable from_csv(const std::string& path) {
        const auto t = csv::read(path);
        if (t.header.size() != 3 || t.header[0] != "h_km" || t.header[1] != "rho_kgm3" ||
            t.header[2] != "a_kms")
            throw ConfigError(path + ":1: expected header 'h_km,rho_kgm3,a_kms'");
        std::vector<double> h, rho, a;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& r = t.rows[i];
            if (!h.empty() && !(r[0] > h.back()))
                throw ConfigError(path + ":" + std::to_string(t.line_numbers[i]) +
                                  ": altitudes must be strictly ascending");
            if (!(r[1] > 0.0))
                throw ConfigError(path + ":" + std::to_string(t.line_numbers[i]) +
                                  ": density must be positive");
            h.push_back(r[0]);
            rho.push_back(r[1]);
            a.push_back(r[2]);
        }
        return AtmosphereTable(std::move(h), std::move(rho), std::move(a));
    }

    AtmosphereSample lookup(double h) const {
        if (!std::isfinite(h))
            throw DomainError("atmosphere_lookup: non-finite altitude");
        const std::size_t n = h_.size();
        if (h > h_[n - 1]) {
            const double slope = (log_rho_[n - 1] - log_rho_[n - 2]) / (h_[n - 1] - h_[n - 2]);
            return {std::exp(log_rho_[n - 1] + slope * (h - h_[n - 1])), a_[n - 1]};
        }
        if (h < h_[0]) {
            const double slope = (log_rho_[1] - log_rho_[0]) / (h_[1] - h_[0]);
            return {std::exp(log_rho_[0] + slope * (h - h_[0])), a_[0]};
        }
        // Knots are returned verbatim rather than through exp(log(.)).
        const auto it = std::lower_bound(h_.begin(), h_.end(), h);
        if (it != h_.end() && *it == h) {
            const auto i = static_cast<std::size_t>(it - h_.begin());
            return {rho_[i], a_[i]};
        }
        return {std::exp(log_rho_interp_(h)), a_interp_(h)};
    }

    std::span<const double> altitudes() const { return h_; }
    std::span<const double> densities() const { return rho_; }
    std::span<const double> sound_speeds() const { return a_; }

private:
    std::vector<double> h_, rho_, a_, log_rho_;
    MonotoneCubic log_rho_interp_, a_interp_;
};

inline AtmosphereSample atmosphere_lookup(const AtmosphereTable& table, double h) {
    return table.lookup(h);
}

// ---------------------------------------------------------------------------
// Aerodynamics
// ---------------------------------------------------------------------------

struct AeroCoefficients {
    double CL;
    double CD;
};

/// CL and CD on an (alpha [deg], Mach) tensor grid, stored alpha-major.
class AeroTable {
public:
    AeroTable() = default;

    AeroTable(std::vector<double> alphas_deg, std::vector<double> machs, std::vector<double> cl,
              std::vector<double> cd)
        : alphas_(std::move(alphas_deg)), machs_(std::move(machs)), cl_(std::move(cl)),
          cd_(std::move(cd)) {
        const std::size_t na = alphas_.size(), nm = machs_.size();
        if (na < 2 || nm < 2)
            throw ContractError("AeroTable: each grid needs at least two points");
        if (cl_.size() != na * nm || cd_.size() != na * nm)
            throw ContractError("AeroTable: coefficient matrices do not match grid sizes");
        for (std::size_t i = 1; i < na; ++i)
            if (!(alphas_[i] > alphas_[i - 1]))
                throw ContractError("AeroTable: alpha grid must be strictly increasing");
        for (std::size_t j = 1; j < nm; ++j)
            if (!(machs_[j] > machs_[j - 1]))
                throw ContractError("AeroTable: Mach grid must be strictly increasing");
        for (double c : cd_)
            if (!(c > 0.0))
                throw ContractError("AeroTable: CD must be positive everywhere");
        build_columns();
    }

    /// Two CSV files (CL, CD): header row `alpha_deg,<mach>...`, one row per alpha.
    static AeroTable from_csv(const std::string& cl_path, const std::string& cd_path) {
        auto read_one = [](const std::string& path, std::vector<double>& alphas,
                           std::vector<double>& machs, std::vector<double>& values) {
            const auto t = csv::read(path);
            if (t.header.size() < 3)
                throw ConfigError(path + ":1: need alpha column plus at least two Mach columns");
            machs.clear();
            for (std::size_t j = 1; j < t.header.size(); ++j)
                machs.push_back(csv::parse_number(t.header[j], path + ":1"));
            alphas.clear();
            values.clear();
            for (const auto& r : t.rows) {
                alphas.push_back(r[0]);
                values.insert(values.end(), r.begin() + 1, r.end());
            }
        };
        std::vector<double> a1, m1, cl, a2, m2, cd;
        read_one(cl_path, a1, m1, cl);
        read_one(cd_path, a2, m2, cd);
        if (a1 != a2 || m1 != m2)
            throw ConfigError("'" + cl_path + "' and '" + cd_path + "' use different grids");
        try {
            return AeroTable(std::move(a1), std::move(m1), std::move(cl), std::move(cd));
        } catch (const ContractError& e) {
            throw ConfigError(cl_path + ": " + e.what());
        }
    }

    AeroCoefficients lookup(double alpha_deg, double mach) const {
        if (!std::isfinite(alpha_deg) || !std::isfinite(mach))
            throw DomainError("aero_lookup: non-finite input");
        const double a = std::clamp(alpha_deg, alphas_.front(), alphas_.back());
        const double m = std::clamp(mach, machs_.front(), machs_.back());
        const std::size_t nm = machs_.size();
        double cl_at_mach[64], cd_at_mach[64];
        std::vector<double> cl_heap, cd_heap;
        double* clv = cl_at_mach;
        double* cdv = cd_at_mach;
        if (nm > 64) {
            cl_heap.resize(nm);
            cd_heap.resize(nm);
            clv = cl_heap.data();
            cdv = cd_heap.data();
        }
        for (std::size_t j = 0; j < nm; ++j) {
            clv[j] = cl_columns_[j](a);
            cdv[j] = cd_columns_[j](a);
        }
        return {monotone_cubic_eval(machs_, {clv, nm}, m), monotone_cubic_eval(machs_, {cdv, nm}, m)};
    }

    std::span<const double> alphas() const { return alphas_; }
    std::span<const double> machs() const { return machs_; }
    double cl(std::size_t i_alpha, std::size_t j_mach) const { return cl_[i_alpha * machs_.size() + j_mach]; }
    double cd(std::size_t i_alpha, std::size_t j_mach) const { return cd_[i_alpha * machs_.size() + j_mach]; }

private:
    void build_columns() {
        const std::size_t na = alphas_.size(), nm = machs_.size();
        cl_columns_.clear();
        cd_columns_.clear();
        for (std::size_t j = 0; j < nm; ++j) {
            std::vector<double> cl_col(na), cd_col(na);
            for (std::size_t i = 0; i < na; ++i) {
                cl_col[i] = cl(i, j);
                cd_col[i] = cd(i, j);
            }
            cl_columns_.emplace_back(alphas_, std::move(cl_col));
            cd_columns_.emplace_back(alphas_, std::move(cd_col));
        }
    }

    std::vector<double> alphas_, machs_, cl_, cd_;
    std::vector<MonotoneCubic> cl_columns_, cd_columns_;
};

inline AeroCoefficients aero_lookup(const AeroTable& table, double alpha_deg, double mach) {
    return table.lookup(alpha_deg, mach);
}

// ---------------------------------------------------------------------------
// Drag polar
// ---------------------------------------------------------------------------

/// CD = CD0 + K * CL^2 at fixed Mach.
struct DragPolarFit {
    double CD0;
    double K;

    double operator()(double CL) const { return CD0 + K * CL * CL; }
};

/// Linear least squares in the basis {1, CL^2}, solved in centred form.
inline DragPolarFit fit_drag_polar(std::span<const double> CL, std::span<const double> CD) {
    if (CL.size() != CD.size() || CL.size() < 2)
        throw ContractError("fit_drag_polar: need >= 2 paired samples");
    const double n = static_cast<double>(CL.size());
    double mean_x = 0.0, mean_y = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < CL.size(); ++i) {
        mean_x += CL[i] * CL[i];
        mean_y += CD[i];
        scale = std::max(scale, CL[i] * CL[i]);
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < CL.size(); ++i) {
        const double dx = CL[i] * CL[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (CD[i] - mean_y);
    }
    if (!(sxx > 1e-24 * std::max(1.0, scale * scale) * n))
        throw RankDeficiencyError("fit_drag_polar: CL^2 values are all equal");
    const double K = sxy / sxx;
    return {mean_y - K * mean_x, K};
}

/**
 * Extends entry-vehicle data given at alpha = {10, 15, 20} deg to
 * {0, 5, 10, 15, 20, 25} deg, Mach column by Mach column:
 *   CL(0) = 0, CL(5) halfway to CL(10), CL(25) extrapolated from CL(15), CL(20);
 *   CD at the new angles from a drag polar fitted to the raw column.
 * The raw rows are copied unchanged.
 */
inline AeroTable extend_entry_aero(const AeroTable& raw) {
    const auto a = raw.alphas();
    if (a.size() != 3 || a[0] != 10.0 || a[1] != 15.0 || a[2] != 20.0)
        throw ContractError("extend_entry_aero: raw alpha grid must be exactly {10, 15, 20} deg");
    const auto machs = raw.machs();
    const std::size_t nm = machs.size();
    std::vector<double> alphas{0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
    std::vector<double> cl(6 * nm), cd(6 * nm);
    for (std::size_t j = 0; j < nm; ++j) {
        const double cl10 = raw.cl(0, j), cl15 = raw.cl(1, j), cl20 = raw.cl(2, j);
        const std::array<double, 3> cls{cl10, cl15, cl20};
        const std::array<double, 3> cds{raw.cd(0, j), raw.cd(1, j), raw.cd(2, j)};
        const DragPolarFit polar = fit_drag_polar(cls, cds);

        const std::array<double, 6> col_cl{0.0, 0.5 * cl10, cl10, cl15, cl20, cl20 + (cl20 - cl15)};
        const std::array<double, 6> col_cd{polar(col_cl[0]), polar(col_cl[1]), cds[0],
                                           cds[1], cds[2], polar(col_cl[5])};
        for (std::size_t i = 0; i < 6; ++i) {
            cl[i * nm + j] = col_cl[i];
            cd[i * nm + j] = col_cd[i];
        }
    }
    return AeroTable(std::move(alphas), {machs.begin(), machs.end()}, std::move(cl), std::move(cd));
}

} // namespace ascentry
