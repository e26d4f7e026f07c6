#include "qmfg/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace qmfg {

int worker_count() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("QMFG_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body,
                  int workers) {
    if (n <= 0) return;
    if (workers <= 0) workers = worker_count();
    workers = int(std::min<std::int64_t>(workers, n));
    if (workers == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    body(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

double chunked_sum(const Eigen::ArrayXd& v) {
    constexpr std::int64_t kLeaf = 4096;
    const std::int64_t n = v.size();
    if (n == 0) return 0.0;
    const std::int64_t leaves = (n + kLeaf - 1) / kLeaf;
    Eigen::ArrayXd partial = Eigen::ArrayXd::Zero(leaves);
    parallel_for(leaves, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t k = lo; k < hi; ++k) {
            const std::int64_t a = k * kLeaf;
            const std::int64_t b = std::min(n, a + kLeaf);
            double s = 0.0;
            for (std::int64_t i = a; i < b; ++i) s += v(i);
            partial(k) = s;
        }
    });
    double total = 0.0;
    for (std::int64_t k = 0; k < leaves; ++k) total += partial(k);
    return total;
}

Quadrature gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    // Newton iteration on P_n with Chebyshev-like initial guesses.
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        q.nodes(i) = -x;
        q.nodes(n - 1 - i) = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        q.weights(i) = w;
        q.weights(n - 1 - i) = w;
    }
    return q;
}

Quadrature gauss_legendre(int n, double a, double b) {
    Quadrature q = gauss_legendre(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    q.nodes = mid + half * q.nodes;
    q.weights *= half;
    return q;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = simpson(a, fa, b, fb, fm);
    return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

double interp_uniform(double lo, double dx, const Eigen::ArrayXd& y, double x) {
    const std::int64_t n = y.size();
    const double u = (x - lo) / dx;
    if (u <= 0.0) return u >= -1e-9 ? y(0) : 0.0;
    if (u >= double(n - 1)) return u <= double(n - 1) + 1e-9 ? y(n - 1) : 0.0;
    const std::int64_t i = std::int64_t(u);
    const double w = u - double(i);
    return (1.0 - w) * y(i) + w * y(i + 1);
}

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace qmfg
