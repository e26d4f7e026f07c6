#include "qmfg/density.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "qmfg/util.hpp"

namespace qmfg {

namespace {
constexpr double kScoreFloor = 1e-12;

double gauss_kernel(double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}
}  // namespace

// ---------------------------------------------------------------------------
// DensityField

DensityField DensityField::normalized(const GridSpec& grid, Eigen::ArrayXd values, double t) {
    grid.require_valid();
    if (values.size() != grid.n)
        throw std::invalid_argument("density: values size does not match grid");
    if (!values.isFinite().all()) throw std::invalid_argument("density: non-finite values");
    for (int i = 0; i < values.size(); ++i)
        if (values(i) < 0.0) values(i) = 0.0;
    const double mass = trapz(values, grid.delta());
    if (!(mass > 0.0)) throw std::invalid_argument("density: total mass must be positive");
    DensityField f;
    f.grid = grid;
    f.values = values / mass;
    f.t = t;
    f.raw_mass = mass;
    return f;
}

double DensityField::interp(double x) const {
    return interp_uniform(grid.lo, grid.delta(), values, x);
}

Eigen::ArrayXd DensityField::cdf() const {
    Eigen::ArrayXd c(grid.n);
    c(0) = 0.0;
    const double dx = grid.delta();
    for (int i = 1; i < grid.n; ++i) c(i) = c(i - 1) + 0.5 * dx * (values(i - 1) + values(i));
    const double total = c(grid.n - 1);
    if (total > 0.0) c /= total;
    return c;
}

double DensityField::quantile(double f) const {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("quantile: f must lie in (0,1)");
    const Eigen::ArrayXd c = cdf();
    for (int i = 0; i < grid.n; ++i)
        if (c(i) >= f) return grid.point(i);
    return grid.hi;
}

// ---------------------------------------------------------------------------
// Mollifier

MollifierSpec MollifierSpec::fixed(double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("mollifier: bandwidth must be > 0");
    return {eps, false};
}

double MollifierSpec::resolve(const Eigen::ArrayXd& states) const {
    if (!use_silverman) return bandwidth;
    const auto n = states.size();
    if (n < 2) throw std::invalid_argument("mollifier: Silverman rule needs at least 2 states");
    const double mean = states.mean();
    const double var = (states - mean).square().sum() / double(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0))
        throw std::invalid_argument(
            "mollifier: all states identical; provide an explicit bandwidth");
    return 1.06 * sd * std::pow(double(n), -0.2);
}

// ---------------------------------------------------------------------------
// Kernel density estimate

DensityField kde(const Eigen::ArrayXd& states, const MollifierSpec& spec, const GridSpec& grid) {
    grid.require_valid();
    if (states.size() == 0) throw std::invalid_argument("kde: empty sample");
    const double eps = spec.resolve(states);
    const double dx = grid.delta();
    Eigen::ArrayXd values = Eigen::ArrayXd::Zero(grid.n);
    const double window = 8.0 * eps;
    for (Eigen::Index j = 0; j < states.size(); ++j) {
        const double s = states(j);
        auto i0 = std::int64_t(std::ceil((s - window - grid.lo) / dx));
        auto i1 = std::int64_t(std::floor((s + window - grid.lo) / dx));
        i0 = std::max<std::int64_t>(i0, 0);
        i1 = std::min<std::int64_t>(i1, grid.n - 1);
        for (std::int64_t i = i0; i <= i1; ++i)
            values(i) += gauss_kernel((grid.point(int(i)) - s) / eps);
    }
    values /= double(states.size()) * eps;
    return DensityField::normalized(grid, std::move(values), 0.0);
}

double log_density_gradient(const Eigen::ArrayXd& states, const MollifierSpec& spec, double x,
                            bool* floored) {
    if (states.size() == 0) throw std::invalid_argument("log_density_gradient: empty sample");
    const double eps = spec.resolve(states);
    double m = 0.0, ms = 0.0;
    for (Eigen::Index j = 0; j < states.size(); ++j) {
        const double u = (x - states(j)) / eps;
        if (std::abs(u) > 38.0) continue;
        const double k = gauss_kernel(u);
        m += k;
        ms += -u / eps * k;
    }
    const double scale = 1.0 / (double(states.size()) * eps);
    m *= scale;
    ms *= scale;
    const bool hit_floor = m < kScoreFloor;
    if (floored) *floored = hit_floor;
    return ms / std::max(m, kScoreFloor);
}

// ---------------------------------------------------------------------------
// Jump adjoint

Eigen::ArrayXd jump_adjoint_apply(const DensityField& field, const LevySpec& levy) {
    const auto& grid = field.grid;
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(grid.n);
    const double lambda = levy.intensity;
    if (lambda == 0.0) return out;

    const double grid_width = grid.hi - grid.lo;
    if (levy.mark.hi() - levy.mark.lo() > 0.5 * grid_width)
        throw std::invalid_argument(
            "jump_adjoint_apply: mark support wider than half the grid");

    if (levy.mark.is_point()) {
        const double th = levy.mark.mu;
        for (int i = 0; i < grid.n; ++i)
            out(i) = lambda * (field.interp(grid.point(i) - th) - field.values(i));
        return out;
    }

    // Mark quadrature on grid-aligned offsets so m(s - theta) needs no
    // interpolation; weights normalized to unit mass (mass-neutral adjoint).
    const double dx = grid.delta();
    const auto d_lo = std::int64_t(std::floor(levy.mark.lo() / dx)) - 1;
    const auto d_hi = std::int64_t(std::ceil(levy.mark.hi() / dx)) + 1;
    const std::int64_t n_off = d_hi - d_lo + 1;
    Eigen::ArrayXd w(n_off);
    for (std::int64_t d = d_lo; d <= d_hi; ++d) w(d - d_lo) = levy.mark.density(double(d) * dx);
    w(0) *= 0.5;
    w(n_off - 1) *= 0.5;
    const double mass = w.sum();
    if (!(mass > 0.0))
        throw std::invalid_argument("jump_adjoint_apply: mark density vanishes on the grid");
    w /= mass;

    for (std::int64_t d = d_lo; d <= d_hi; ++d) {
        const double wd = w(d - d_lo);
        if (wd == 0.0) continue;
        const std::int64_t j0 = std::max<std::int64_t>(0, d);
        const std::int64_t j1 = std::min<std::int64_t>(grid.n, grid.n + d);
        for (std::int64_t j = j0; j < j1; ++j) out(j) += wd * field.values(j - d);
    }
    out = lambda * (out - field.values);
    return out;
}

// ---------------------------------------------------------------------------
// FPK stepping

namespace {

enum class GammaKind { none, identity, unsupported };

GammaKind detect_gamma(const Scenario& scn) {
    if (scn.levy.intensity == 0.0) return GammaKind::none;
    const double mid = 0.5 * (scn.state_grid.lo + scn.state_grid.hi);
    bool all_identity = true, all_zero = true;
    for (double s : {scn.state_grid.lo, mid, scn.state_grid.hi}) {
        const double a = scn.control_policy.eval(0.0, s, mid);
        for (double th : {scn.levy.mark.lo(), 0.3, scn.levy.mark.hi()}) {
            const double g = scn.coeffs.jump_gamma(0.0, s, mid, a, th);
            if (std::abs(g - th) > 1e-12 * (1.0 + std::abs(th))) all_identity = false;
            if (std::abs(g) > 1e-12) all_zero = false;
        }
    }
    if (all_identity) return GammaKind::identity;
    if (all_zero) return GammaKind::none;
    return GammaKind::unsupported;
}

}  // namespace

Eigen::ArrayXd fpk_rhs(const DensityField& field, const Scenario& scn, double q) {
    const auto& grid = field.grid;
    const int n = grid.n;
    const double dx = grid.delta();
    const auto& m = field.values;
    const double t = field.t;

    Eigen::ArrayXd b(n), sig2(n);
    for (int i = 0; i < n; ++i) {
        const double x = grid.point(i);
        const double a = scn.control_policy.eval(t, x, q);
        b(i) = scn.coeffs.drift(t, x, q, a);
        const double sg = scn.coeffs.diff_idio(t, x, q, a);
        sig2(i) = sg * sg;
    }
    const double a_q = scn.control_policy.eval(t, q, q);
    const double sigma_o = scn.coeffs.diff_common(t, q, q, a_q);
    // State-independent common diffusion only; flag anything else.
    for (double x : {grid.lo, grid.hi}) {
        const double so = scn.coeffs.diff_common(t, x, q, scn.control_policy.eval(t, x, q));
        if (std::abs(so - sigma_o) > 1e-12 * (1.0 + std::abs(sigma_o)))
            throw std::invalid_argument("fpk: sigma_o must be state-independent");
    }

    auto at = [&](const Eigen::ArrayXd& v, int i) { return (i < 0 || i >= n) ? 0.0 : v(i); };

    Eigen::ArrayXd bm = b * m;
    Eigen::ArrayXd u = sig2 * m;
    Eigen::ArrayXd rhs(n);
    for (int i = 0; i < n; ++i) {
        // conservative flux difference for (b m)_s
        const double flux_hi = 0.5 * (bm(i) + at(bm, i + 1));
        const double flux_lo = 0.5 * (at(bm, i - 1) + bm(i));
        const double adv = (flux_hi - flux_lo) / dx;
        const double diff = (at(u, i + 1) - 2.0 * u(i) + at(u, i - 1)) / (dx * dx);
        const double mss = (at(m, i + 1) - 2.0 * m(i) + at(m, i - 1)) / (dx * dx);
        rhs(i) = -adv + 0.5 * diff + 0.5 * sigma_o * sigma_o * mss;
    }

    const GammaKind gk = detect_gamma(scn);
    if (gk == GammaKind::unsupported)
        throw std::invalid_argument("fpk: grid solver supports jump sizes gamma(theta)=theta only");
    if (gk == GammaKind::identity) rhs += jump_adjoint_apply(field, scn.levy);
    return rhs;
}

DensityField fpk_step(const DensityField& field, const Scenario& scn, double dB_o) {
    const auto& grid = field.grid;
    const int n = grid.n;
    const double dx = grid.delta();
    const double t = field.t;
    const double q = field.quantile(scn.f);
    const double a_q = scn.control_policy.eval(t, q, q);
    const double sigma_o = scn.coeffs.diff_common(t, q, q, a_q);

    double max_sig2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = grid.point(i);
        const double sg = scn.coeffs.diff_idio(t, x, q, scn.control_policy.eval(t, x, q));
        max_sig2 = std::max(max_sig2, sg * sg);
    }
    const double cfl = (max_sig2 + sigma_o * sigma_o) * scn.dt / (dx * dx);
    if (cfl > 0.5) {
        const double dt_max = 0.5 * dx * dx / (max_sig2 + sigma_o * sigma_o);
        throw std::invalid_argument("fpk_step: CFL violated; maximal admissible dt = " +
                                    fmt17(dt_max));
    }

    const Eigen::ArrayXd rhs = fpk_rhs(field, scn, q);

    auto at = [&](const Eigen::ArrayXd& v, int i) { return (i < 0 || i >= n) ? 0.0 : v(i); };
    Eigen::ArrayXd ms(n);
    for (int i = 0; i < n; ++i) ms(i) = (at(field.values, i + 1) - at(field.values, i - 1)) / (2.0 * dx);

    Eigen::ArrayXd next = field.values + scn.dt * rhs - sigma_o * dB_o * ms;

    const double raw_mass = trapz(next, dx);
    double clipped = 0.0;
    for (int i = 0; i < n; ++i)
        if (next(i) < 0.0) clipped += -next(i);
    clipped *= dx;

    DensityField out = DensityField::normalized(grid, std::move(next), t + scn.dt);
    out.raw_mass = raw_mass;
    out.clipped_mass = clipped;
    return out;
}

DensityField shift_decompose(const DensityField& base, double s0, double sigma_o_path_integral) {
    const auto& grid = base.grid;
    const double shift = s0 + sigma_o_path_integral;
    Eigen::ArrayXd shifted(grid.n);
    for (int i = 0; i < grid.n; ++i) shifted(i) = base.interp(grid.point(i) - shift);
    const double kept = trapz(shifted, grid.delta());
    if (1.0 - kept > 1e-3)
        throw std::invalid_argument("shift_decompose: shift pushes more than 1e-3 mass off-grid");
    DensityField out = DensityField::normalized(grid, std::move(shifted), base.t);
    out.raw_mass = kept;
    return out;
}

void write_density_csv(const DensityField& field, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "s,m\n";
    for (int i = 0; i < field.grid.n; ++i)
        os << fmt17(field.grid.point(i)) << "," << fmt17(field.values(i)) << "\n";
}

}  // namespace qmfg
