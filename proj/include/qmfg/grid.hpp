#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace qmfg {

/// Uniform state grid with n nodes spanning [lo, hi] inclusive.
struct GridSpec {
    double lo = -8.0;
    double hi = 8.0;
    int n = 801;

    double delta() const { return (hi - lo) / double(n - 1); }
    double point(int i) const { return lo + delta() * double(i); }

    Eigen::ArrayXd points() const {
        return Eigen::ArrayXd::LinSpaced(n, lo, hi);
    }

    void require_valid() const {
        if (!(hi > lo) || n < 2) throw std::invalid_argument("grid: need hi > lo and n >= 2");
    }
};

/// Trapezoid integral of nodal values on a uniform grid.
inline double trapz(const Eigen::ArrayXd& v, double dx) {
    if (v.size() < 2) return 0.0;
    return dx * (v.sum() - 0.5 * (v(0) + v(v.size() - 1)));
}

}  // namespace qmfg
