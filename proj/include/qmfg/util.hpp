#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qmfg {

inline constexpr const char* kVersion = "0.1.0";

/// Worker cap: min(hardware_concurrency, QMFG_THREADS). Always >= 1.
int worker_count();

/// Runs body(lo, hi) over a partition of [0, n). Results must not depend on
/// the partition; callers own any synchronization beyond disjoint writes.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body,
                  int workers = 0);

/// Sum with a fixed chunk tree (4096-element leaves, serial combine), so the
/// value is bit-identical no matter how many workers computed the leaves.
double chunked_sum(const Eigen::ArrayXd& v);

struct Quadrature {
    Eigen::ArrayXd nodes;
    Eigen::ArrayXd weights;
};

/// Gauss-Legendre rule on [-1, 1].
Quadrature gauss_legendre(int n);

/// Gauss-Legendre rule mapped to [a, b].
Quadrature gauss_legendre(int n, double a, double b);

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10);

/// Linear interpolation of (x_i, y_i) with uniform x_i = lo + i*dx; zero
/// outside [lo, lo + (n-1)*dx].
double interp_uniform(double lo, double dx, const Eigen::ArrayXd& y, double x);

/// Doubles with 17 significant digits (lossless round trip).
std::string fmt17(double x);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace qmfg
