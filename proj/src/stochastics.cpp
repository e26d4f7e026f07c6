#include "qmfg/stochastics.hpp"

#include <cmath>
#include <stdexcept>

namespace qmfg {

double brownian_increment(const NoisePlan& plan, std::uint32_t step) {
    if (!(plan.dt > 0.0)) {
        if (plan.dt == 0.0) return 0.0;
        throw std::invalid_argument("brownian_increment: dt must be >= 0");
    }
    CounterRng rng(plan.seed, plan.stream_id, step, kLaneBrownian);
    return std::sqrt(plan.dt) * rng.normal();
}

JumpBatch sample_jumps(const NoisePlan& plan, const LevySpec& levy, std::uint32_t step,
                       const std::function<double(double)>& gamma) {
    JumpBatch batch;
    if (levy.intensity == 0.0) return batch;
    if (levy.intensity < 0.0) throw std::invalid_argument("sample_jumps: intensity must be >= 0");

    CounterRng rng(plan.seed, plan.stream_id, step, kLaneJumps);
    const long count = rng.poisson(levy.intensity * plan.dt);
    batch.marks.reserve(std::size_t(count));
    for (long k = 0; k < count; ++k) {
        const double theta = levy.mark.icdf(rng.uniform());
        if (!std::isfinite(theta))
            throw std::runtime_error("sample_jumps: mark sampler returned a non-finite value");
        batch.marks.push_back(theta);
    }
    const double mean_gamma =
        gamma ? levy.mean_of(gamma) : levy.mean_of([](double th) { return th; });
    batch.compensator = plan.dt * levy.intensity * mean_gamma;
    return batch;
}

CompoundPoissonDensity compound_poisson_density(const LevySpec& levy, double t,
                                                const GridSpec& grid) {
    grid.require_valid();
    CompoundPoissonDensity out;
    out.grid = grid;
    out.values = Eigen::ArrayXd::Zero(grid.n);
    const double lt = levy.intensity * t;
    if (lt == 0.0) {
        out.atom_weight = 1.0;
        return out;
    }
    if (!(lt > 0.0) || !std::isfinite(lt))
        throw std::invalid_argument("compound_poisson_density: lambda*t must be finite and >= 0");
    if (levy.mark.is_point())
        throw std::invalid_argument(
            "compound_poisson_density: atomic mark laws have no grid density");

    const double dx = grid.delta();

    // Mark density sampled on grid-aligned offsets, trapezoid weights,
    // normalized to unit mass so convolutions conserve mass on-grid.
    const auto d_lo = std::int64_t(std::floor(levy.mark.lo() / dx)) - 1;
    const auto d_hi = std::int64_t(std::ceil(levy.mark.hi() / dx)) + 1;
    const std::int64_t n_off = d_hi - d_lo + 1;
    Eigen::ArrayXd w(n_off);
    for (std::int64_t d = d_lo; d <= d_hi; ++d) w(d - d_lo) = levy.mark.density(double(d) * dx);
    w(0) *= 0.5;
    w(n_off - 1) *= 0.5;
    w *= dx;

    // Coarseness probe on the target grid.
    {
        Eigen::ArrayXd on_grid(grid.n);
        for (int i = 0; i < grid.n; ++i) on_grid(i) = levy.mark.density(grid.point(i));
        if (trapz(on_grid, dx) < 0.999)
            throw std::invalid_argument(
                "compound_poisson_density: grid too coarse (mark mass on grid < 0.999)");
    }
    const double w_mass = w.sum();
    if (w_mass <= 0.0)
        throw std::invalid_argument("compound_poisson_density: mark density vanishes on the grid");
    w /= w_mass;

    // Truncation order: Poisson tail mass below 1e-10.
    int K = 1;
    {
        double pmf = std::exp(-lt);
        double cum = pmf;
        while (1.0 - cum > 1e-10 && K < 4096) {
            pmf *= lt / double(K);
            cum += pmf;
            ++K;
        }
    }

    auto convolve = [&](const Eigen::ArrayXd& f) {
        Eigen::ArrayXd r = Eigen::ArrayXd::Zero(grid.n);
        for (std::int64_t d = d_lo; d <= d_hi; ++d) {
            const double wd = w(d - d_lo);
            if (wd == 0.0) continue;
            const std::int64_t j0 = std::max<std::int64_t>(0, d);
            const std::int64_t j1 = std::min<std::int64_t>(grid.n, grid.n + d);
            for (std::int64_t j = j0; j < j1; ++j) r(j) += wd * f(j - d);
        }
        return r;
    };

    // mark^{*1} on the grid (per unit mass along the grid measure).
    Eigen::ArrayXd power(grid.n);
    for (int i = 0; i < grid.n; ++i) power(i) = levy.mark.density(grid.point(i));
    const double p1_mass = trapz(power, dx);
    power /= p1_mass;

    out.atom_weight = std::exp(-lt);
    double pois = out.atom_weight;
    for (int k = 1; k <= K; ++k) {
        pois *= lt / double(k);
        out.values += pois * power;
        if (k < K) power = convolve(power);
    }

    if (std::abs(out.total_mass() - 1.0) > 1e-6)
        throw std::runtime_error(
            "compound_poisson_density: grid too narrow for the requested jump activity "
            "(mass = " + fmt17(out.total_mass()) + ")");
    return out;
}

}  // namespace qmfg
