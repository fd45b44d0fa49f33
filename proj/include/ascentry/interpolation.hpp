#pragma once

#include <ascentry/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ascentry {

namespace detail {

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Shape-preserving knot slopes (Fritsch-Carlson with the Brodlie weighted
/// harmonic mean in the interior and a one-sided three-point end rule).
inline void pchip_slopes(std::span<const double> x, std::span<const double> y,
                         std::span<double> d) {
    const std::size_t n = x.size();
    if (n == 2) {
        const double s = (y[1] - y[0]) / (x[1] - x[0]);
        d[0] = d[1] = s;
        return;
    }
    auto h = [&](std::size_t k) { return x[k + 1] - x[k]; };
    auto delta = [&](std::size_t k) { return (y[k + 1] - y[k]) / h(k); };

    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double d0 = delta(k - 1), d1 = delta(k);
        if (d0 * d1 <= 0.0) {
            d[k] = 0.0;
            continue;
        }
        const double w1 = 2.0 * h(k) + h(k - 1);
        const double w2 = h(k) + 2.0 * h(k - 1);
        d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
    }

    auto end_slope = [](double h0, double h1, double del0, double del1) {
        double s = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
        if (sign(s) != sign(del0))
            s = 0.0;
        else if (sign(del0) != sign(del1) && std::abs(s) > std::abs(3.0 * del0))
            s = 3.0 * del0;
        return s;
    };
    d[0] = end_slope(h(0), h(1), delta(0), delta(1));
    d[n - 1] = end_slope(h(n - 2), h(n - 3), delta(n - 2), delta(n - 3));
}

/// Cubic Hermite on [x0, x1] with end values and slopes.
inline double hermite(double x0, double x1, double y0, double y1, double d0, double d1,
                      double xq) {
    const double h = x1 - x0;
    const double t = (xq - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
}

/// Index k of the interval [x_k, x_{k+1}] containing xq (clamped to the ends).
inline std::size_t locate(std::span<const double> x, double xq) {
    const auto it = std::upper_bound(x.begin(), x.end(), xq);
    std::size_t k = static_cast<std::size_t>(std::distance(x.begin(), it));
    if (k == 0)
        return 0;
    return std::min(k - 1, x.size() - 2);
}

} // namespace detail

/**
 * Monotone piecewise-cubic Hermite interpolant.
 *
 * Reproduces the knot values exactly and never overshoots the data between
 * knots. Queries outside the knot range are evaluated on the end cubic; callers
 * that need a different extrapolation handle it themselves.
 */
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() != y_.size() || x_.size() < 2)
            throw ContractError("MonotoneCubic: need at least two knots of matching length");
        for (std::size_t k = 1; k < x_.size(); ++k)
            if (!(x_[k] > x_[k - 1]))
                throw ContractError("MonotoneCubic: knots must be strictly increasing");
        d_.resize(x_.size());
        detail::pchip_slopes(x_, y_, d_);
    }

    double operator()(double xq) const {
        const std::size_t k = detail::locate(x_, xq);
        return detail::hermite(x_[k], x_[k + 1], y_[k], y_[k + 1], d_[k], d_[k + 1], xq);
    }

    std::span<const double> knots() const { return x_; }
    std::span<const double> values() const { return y_; }
    std::span<const double> slopes() const { return d_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> d_;
};

/// One-shot monotone cubic evaluation on small data (slopes built per call).
inline double monotone_cubic_eval(std::span<const double> x, std::span<const double> y,
                                  double xq) {
    double slopes_buf[64];
    std::vector<double> slopes_heap;
    std::span<double> d;
    if (x.size() <= 64) {
        d = std::span<double>(slopes_buf, x.size());
    } else {
        slopes_heap.resize(x.size());
        d = slopes_heap;
    }
    detail::pchip_slopes(x, y, d);
    const std::size_t k = detail::locate(x, xq);
    return detail::hermite(x[k], x[k + 1], y[k], y[k + 1], d[k], d[k + 1], xq);
}

} // namespace ascentry
