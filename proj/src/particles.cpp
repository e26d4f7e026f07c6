#include "qmfg/particles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qmfg/util.hpp"

namespace qmfg {

std::int64_t quantile_rank(std::int64_t n, double f) {
    const double kd = f * double(n);
    const double snap = 4.0 * std::numeric_limits<double>::epsilon() * double(n);
    std::int64_t k;
    if (std::abs(kd - std::round(kd)) <= snap)
        k = std::int64_t(std::llround(kd));
    else
        k = std::int64_t(std::ceil(kd));
    return std::clamp<std::int64_t>(k, 1, n);
}

double empirical_quantile(const Eigen::ArrayXd& states, double f) {
    const auto n = states.size();
    if (n == 0) throw std::invalid_argument("empirical_quantile: empty sample");
    if (!(f > 0.0 && f < 1.0))
        throw std::invalid_argument("empirical_quantile: f must lie strictly in (0,1)");
    const std::int64_t k = quantile_rank(n, f);
    std::vector<double> scratch(states.data(), states.data() + n);
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    return scratch[std::size_t(k - 1)];
}

namespace {

enum class GammaKind { zero, identity, general };

GammaKind classify_gamma(const Scenario& scn) {
    if (scn.levy.intensity == 0.0) return GammaKind::zero;
    const double mid = 0.5 * (scn.state_grid.lo + scn.state_grid.hi);
    bool all_identity = true, all_zero = true;
    for (double s : {scn.state_grid.lo, mid, scn.state_grid.hi}) {
        const double a = scn.control_policy.eval(0.0, s, mid);
        for (double th : {scn.levy.mark.lo(), 0.37, scn.levy.mark.hi()}) {
            const double g = scn.coeffs.jump_gamma(0.0, s, mid, a, th);
            if (std::abs(g - th) > 1e-12 * (1.0 + std::abs(th))) all_identity = false;
            if (std::abs(g) > 1e-12) all_zero = false;
        }
    }
    if (all_zero) return GammaKind::zero;
    if (all_identity) return GammaKind::identity;
    return GammaKind::general;
}

}  // namespace

ParticleEnsemble init_ensemble(const Scenario& scn) {
    ParticleEnsemble e;
    e.states.resize(scn.n_particles);
    parallel_for(scn.n_particles, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            CounterRng rng(scn.seed, std::uint32_t(i + 1), 0, kLaneInit);
            e.states(i) = scn.initial_law.sample(rng);
        }
    });
    e.t = 0.0;
    e.quantile_value = empirical_quantile(e.states, scn.f);
    return e;
}

ParticleEnsemble step_ensemble(const ParticleEnsemble& e, const Scenario& scn,
                               std::uint32_t step) {
    const double t = e.t;
    const double q = e.quantile_value;
    const double dt = scn.dt;
    const NoisePlan common{scn.seed, 0, dt};
    const double dBo = brownian_increment(common, step);

    const GammaKind gk = classify_gamma(scn);
    const double lambda = scn.levy.intensity;
    // Compensator for state-independent jump sizes is shared by all particles.
    double shared_comp = 0.0;
    if (gk == GammaKind::identity)
        shared_comp = dt * lambda * scn.levy.mean_of([](double th) { return th; });

    ParticleEnsemble out;
    out.states.resize(e.states.size());
    std::atomic<std::int64_t> bad_particle{-1};

    parallel_for(e.states.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const double s = e.states(i);
            const double a = scn.control_policy.eval(t, s, q);
            const double b = scn.coeffs.drift(t, s, q, a);
            const double sig = scn.coeffs.diff_idio(t, s, q, a);
            const double sigo = scn.coeffs.diff_common(t, s, q, a);
            const NoisePlan mine{scn.seed, std::uint32_t(i + 1), dt};
            const double dBi = brownian_increment(mine, step);

            double jump_term = 0.0;
            if (gk != GammaKind::zero) {
                // same draw sequence as sample_jumps, skipping its per-call
                // compensator quadrature (shared across particles when the
                // jump size is state-independent)
                CounterRng jrng(scn.seed, std::uint32_t(i + 1), step, kLaneJumps);
                const long count = jrng.poisson(lambda * dt);
                double jump_sum = 0.0;
                for (long j = 0; j < count; ++j) {
                    const double th = scn.levy.mark.icdf(jrng.uniform());
                    if (!std::isfinite(th))
                        throw std::runtime_error("step_ensemble: non-finite jump mark");
                    jump_sum += scn.coeffs.jump_gamma(t, s, q, a, th);
                }
                const double comp =
                    gk == GammaKind::identity
                        ? shared_comp
                        : dt * lambda * scn.levy.mean_of([&](double th) {
                              return scn.coeffs.jump_gamma(t, s, q, a, th);
                          });
                jump_term = jump_sum - comp;
            }

            const double next = s + b * dt + sig * dBi + sigo * dBo + jump_term;
            out.states(i) = next;
            if (!std::isfinite(next)) bad_particle.store(i, std::memory_order_relaxed);
        }
    });
    if (bad_particle.load() >= 0)
        throw std::runtime_error("step_ensemble: non-finite state for particle " +
                                 std::to_string(bad_particle.load()) + " at step " +
                                 std::to_string(step));

    out.t = double(step + 1) * dt;
    out.quantile_value = empirical_quantile(out.states, scn.f);
    out.common_sum = e.common_sum + dBo;
    const double a_q = scn.control_policy.eval(t, q, q);
    out.sigma_common_sum = e.sigma_common_sum + scn.coeffs.diff_common(t, q, q, a_q) * dBo;
    return out;
}

TrajectoryRecord simulate(const Scenario& scn, const SimulateOptions& opts) {
    TrajectoryRecord rec;
    const std::int64_t n_steps = scn.n_steps();
    rec.times.reserve(n_steps + 1);
    rec.quantile_path.reserve(n_steps + 1);
    rec.common_path.reserve(n_steps + 1);
    rec.moment_path.reserve(n_steps + 1);

    ParticleEnsemble e = init_ensemble(scn);
    const std::int64_t snap_stride =
        opts.record_snapshots ? std::max<std::int64_t>(1, n_steps / std::max(1, opts.max_snapshots - 1))
                              : 0;

    auto record = [&](const ParticleEnsemble& ens, std::int64_t step_index) {
        rec.times.push_back(ens.t);
        rec.quantile_path.push_back(ens.quantile_value);
        rec.common_path.push_back(ens.common_sum);
        rec.moment_path.push_back(chunked_sum(ens.states.abs()) / double(ens.states.size()));
        if (opts.record_snapshots &&
            (step_index % snap_stride == 0 || step_index == n_steps)) {
            rec.snapshot_times.push_back(ens.t);
            rec.snapshots.push_back(ens.states);
        }
    };

    record(e, 0);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        try {
            e = step_ensemble(e, scn, std::uint32_t(step));
        } catch (const std::exception& err) {
            rec.finite = false;
            rec.error = err.what();
            const double nan = std::numeric_limits<double>::quiet_NaN();
            rec.times.push_back(double(step + 1) * scn.dt);
            rec.quantile_path.push_back(nan);
            rec.common_path.push_back(nan);
            rec.moment_path.push_back(nan);
            return rec;
        }
        record(e, step + 1);
    }
    return rec;
}

MomentBound moment_bound_check(const TrajectoryRecord& rec) {
    MomentBound mb;
    mb.finite = rec.finite;
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
        const double v = rec.moment_path[k] + std::abs(rec.quantile_path[k]);
        if (!std::isfinite(v)) {
            mb.finite = false;
            continue;
        }
        mb.sup = std::max(mb.sup, v);
    }
    return mb;
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "t,quantile,common_noise,mean_abs_state\n";
    for (std::size_t k = 0; k < rec.times.size(); ++k)
        os << fmt17(rec.times[k]) << "," << fmt17(rec.quantile_path[k]) << ","
           << fmt17(rec.common_path[k]) << "," << fmt17(rec.moment_path[k]) << "\n";
}

void write_snapshots_csv(const TrajectoryRecord& rec, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "t,particle,s\n";
    for (std::size_t k = 0; k < rec.snapshots.size(); ++k)
        for (Eigen::Index i = 0; i < rec.snapshots[k].size(); ++i)
            os << fmt17(rec.snapshot_times[k]) << "," << i << "," << fmt17(rec.snapshots[k](i))
               << "\n";
}

}  // namespace qmfg
