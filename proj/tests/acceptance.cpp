// Acceptance suite: one criterion per block, each printed as a PASS/FAIL line
// with the measured quantities and its runtime budget. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qmfg/density.hpp"
#include "qmfg/experiment.hpp"
#include "qmfg/market.hpp"
#include "qmfg/particles.hpp"
#include "qmfg/quantile.hpp"
#include "qmfg/util.hpp"

using namespace qmfg;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Shared {
    TrajectoryRecord gaussian_null;
    Scenario gaussian_null_scn;
    TrajectoryRecord ou;
    Scenario ou_scn;
    TrajectoryRecord jump_hi;  // f = 0.7 run of the jump scenario
    Scenario jump_scn;
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", x);
    return buf;
}

double normal_pdf(double x, double mu, double var) {
    return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * M_PI * var);
}

// --------------------------------------------------------------------------
// 1. Dilating-Gaussian route agreement

Outcome c1(Shared& sh) {
    Scenario scn = named_scenario("gaussian_null");  // f=0.8413, T=3, dt=1e-3, n=1e5
    sh.gaussian_null_scn = scn;
    sh.gaussian_null = simulate(scn);
    const double Q = inv_norm_cdf(scn.f);

    double sup_particle = 0.0;
    for (std::size_t k = 0; k < sh.gaussian_null.times.size(); ++k) {
        const double closed = std::sqrt(1.0 + sh.gaussian_null.times[k]) * Q;
        sup_particle =
            std::max(sup_particle, std::abs(sh.gaussian_null.quantile_path[k] - closed));
    }

    const ScoreSource score =
        ScoreSource::analytic([](double t, double x) { return -x / (1.0 + t); });
    const QuantilePath sde = integrate_quantile_sde(scn, score, NoisePlan{scn.seed, 0, scn.dt});
    double sup_sde = 0.0;
    for (std::size_t k = 0; k < sde.times.size(); ++k) {
        const double closed = std::sqrt(1.0 + sde.times[k]) * Q;
        sup_sde = std::max(sup_sde, std::abs(sde.values[k] - closed));
    }

    Outcome out;
    out.pass = sup_particle < 0.05 && sup_sde < 2e-3;
    out.detail = "particle sup " + fmt(sup_particle) + " (<0.05), sde sup " + fmt(sup_sde) +
                 " (<2e-3), n=1e5, dt=1e-3";
    return out;
}

// --------------------------------------------------------------------------
// 2. Common-noise factorization to machine precision

Outcome c2(Shared&) {
    Scenario scn = named_scenario("gaussian_null");
    scn.n_particles = 1000;
    scn.horizon = 1.0;
    scn.dt = 1e-4;
    scn.coeffs.diff_idio = coeff_zero();
    scn.coeffs.diff_idio_s = coeff_zero();
    scn.coeffs.diff_common = coeff_const(1.0);
    scn.coeffs.diff_common_s = coeff_zero();

    const TrajectoryRecord rec = simulate(scn);
    const NoisePlan plan{scn.seed, 0, scn.dt};
    double expected = rec.quantile_path[0];
    double worst = 0.0;
    for (std::int64_t k = 0; k < scn.n_steps(); ++k) {
        expected = expected + 1.0 * brownian_increment(plan, std::uint32_t(k));
        worst = std::max(worst,
                         std::abs(rec.quantile_path[std::size_t(k + 1)] - expected));
    }
    Outcome out;
    out.pass = worst == 0.0;
    out.detail = "max |quantile - accumulated B_o| = " + fmt(worst) + " over 1e4 steps (want 0)";
    return out;
}

// --------------------------------------------------------------------------
// 3. Mean-reverting market scenario: particle vs closed form + step identity

Outcome c3(Shared& sh) {
    Scenario scn = named_scenario("ou");  // alpha=1, sigma=sqrt2, sigma_o=0.3, f=0.8413
    sh.ou_scn = scn;
    sh.ou = simulate(scn);

    const QuantilePath closed = ou_quantile_closed_form(
        1.0, [](double) { return std::sqrt(2.0); }, [](double) { return 0.3; },
        scn.initial_law, scn.f, sh.ou.times, sh.ou.common_path);

    double sup = 0.0;
    for (std::size_t k = 0; k < closed.times.size(); ++k)
        sup = std::max(sup, std::abs(sh.ou.quantile_path[k] - closed.values[k]));

    // dm = sigma_o dB + (a sigma_nc + sigma_nc') Q dt, drift integrated
    // exactly per step; aggregate of |per-step residual| under 1e-3 * T.
    const double Q = inv_norm_cdf(scn.f);
    auto sigma_nc = [](double t) { return std::sqrt(1.0 - std::exp(-2.0 * t)); };
    double aggregate = 0.0;
    for (std::size_t k = 0; k + 1 < closed.times.size(); ++k) {
        const double drift_int =
            adaptive_simpson(sigma_nc, closed.times[k], closed.times[k + 1], 1e-12) +
            (sigma_nc(closed.times[k + 1]) - sigma_nc(closed.times[k]));
        const double res = (closed.values[k + 1] - closed.values[k]) -
                           0.3 * (closed.common_path[k + 1] - closed.common_path[k]) -
                           Q * drift_int;
        aggregate += std::abs(res);
    }

    Outcome out;
    out.pass = sup < 0.05 && aggregate < 1e-3;
    out.detail = "particle vs closed form sup " + fmt(sup) + " (<0.05), step-identity residual " +
                 fmt(aggregate) + " (<1e-3 aggregate)";
    return out;
}

// --------------------------------------------------------------------------
// 4. Variance ODE identity

Outcome c4(Shared&) {
    std::mt19937 gen(2026);
    std::uniform_real_distribution<double> adist(0.2, 3.0), tdist(0.05, 3.0);
    auto sig_one = [](double) { return 1.0; };
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const OuVariance ov = ou_variance(adist(gen), sig_one, tdist(gen));
        worst = std::max(worst, std::abs(ov.ode_residual));
    }
    Outcome out;
    out.pass = worst < 1e-4;
    out.detail = "max |a s + s' - sigma^2/(2s)| = " + fmt(worst) + " over 50 (alpha, t) pairs";
    return out;
}

// --------------------------------------------------------------------------
// 5. Zero-drift jump case against the grid closed form

Outcome c5(Shared& sh) {
    Outcome out;
    std::string detail;
    for (double f : {0.3, 0.7}) {
        Scenario scn = named_scenario("jump_drift_free");
        scn.f = f;
        const TrajectoryRecord rec = simulate(scn);
        if (f == 0.7) {
            sh.jump_scn = scn;
            sh.jump_hi = rec;
        }

        // checkpoints: 65 evenly spaced times
        std::vector<double> times, common, particle;
        const std::size_t n = rec.times.size();
        for (std::size_t j = 0; j < 65; ++j) {
            const std::size_t i = j * (n - 1) / 64;
            times.push_back(rec.times[i]);
            common.push_back(rec.common_path[i]);
            particle.push_back(rec.quantile_path[i]);
        }
        const QuantilePath closed =
            jump_free_drift_quantile_path(0.2, scn.levy, f, times, common);
        double sup = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j)
            sup = std::max(sup, std::abs(particle[j] - closed.values[j]));
        out.pass = out.pass && sup < 0.06;
        detail += "f=" + fmt(f) + ": sup " + fmt(sup) + " (<0.06); ";
    }
    out.detail = detail + "n=1e5, 65 checkpoints";
    return out;
}

// --------------------------------------------------------------------------
// 6. tanh closed-form density: raw mass cells + jump-free operator residual

Outcome c6(Shared&) {
    Outcome out;
    std::string detail;
    const GridSpec grid{-16.0, 16.0, 3201};
    for (double delta : {0.5, 1.0}) {
        for (double lam : {0.0, 1.0}) {
            const LevySpec levy =
                lam == 0.0 ? LevySpec::none() : LevySpec(lam, MarkLaw::uniform(-1.0, 1.0), 2.0);
            const TanhDensity td = tanh_closed_form_density(delta, levy, 1.0, grid, 0.0, 0.0);
            const bool ok = std::abs(td.raw_mass - 1.0) <= 1e-3;
            out.pass = out.pass && ok;
            detail += "mass(d=" + fmt(delta) + ",l=" + fmt(lam) + ")=" + fmt(td.raw_mass);
            if (!ok && lam > 0.0) {
                const double c1m =
                    levy.mean_of([&](double th) { return std::cosh(delta * th); });
                const double c2m = levy.mean_of(
                    [&](double th) { return std::cosh(delta * th) * std::cosh(delta * th); });
                detail += " [cosh-tilt grows mass; predicted " + fmt(std::exp(c2m - c1m)) + "]";
            }
            detail += "; ";
        }
    }

    // jump-free operator residual at ds = 0.01
    for (double delta : {0.5, 1.0}) {
        const GridSpec fine{-12.0, 12.0, 2401};
        const double h = 1e-4;
        const DensityField up =
            tanh_closed_form_density(delta, LevySpec::none(), 1.0 + h, fine, 0.0, 0.0).field;
        const DensityField dn =
            tanh_closed_form_density(delta, LevySpec::none(), 1.0 - h, fine, 0.0, 0.0).field;
        const DensityField mid =
            tanh_closed_form_density(delta, LevySpec::none(), 1.0, fine, 0.0, 0.0).field;

        Scenario scn = named_scenario("tanh");
        scn.coeffs.drift = drift_tanh(delta);
        scn.coeffs.drift_s = [delta](double, double s, double, double) {
            const double th = std::tanh(delta * s);
            return delta * delta * (1.0 - th * th);
        };
        scn.coeffs.diff_common = coeff_zero();
        scn.coeffs.diff_common_s = coeff_zero();
        scn.levy = LevySpec::none();

        const Eigen::ArrayXd rhs = fpk_rhs(mid, scn, mid.quantile(scn.f));
        double l1 = 0.0;
        for (int i = 0; i < fine.n; ++i)
            l1 += std::abs((up.values(i) - dn.values(i)) / (2.0 * h) - rhs(i));
        l1 *= fine.delta();
        out.pass = out.pass && l1 < 5e-2;
        detail += "operator residual(d=" + fmt(delta) + ")=" + fmt(l1) + " (<0.05); ";
    }
    out.detail = detail;
    return out;
}

// --------------------------------------------------------------------------
// 7. Density-equation solver oracles

Outcome c7(Shared&) {
    Outcome out;
    std::string detail;

    Scenario heat = named_scenario("gaussian_null");
    heat.dt = 1e-4;

    // heat kernel
    {
        const GridSpec grid{-14.0, 14.0, 1401};
        Eigen::ArrayXd v0(grid.n);
        for (int i = 0; i < grid.n; ++i) v0(i) = normal_pdf(grid.point(i), 0.0, 0.25);
        DensityField f = DensityField::normalized(grid, std::move(v0), 0.0);
        for (int k = 0; k < 3000; ++k) f = fpk_step(f, heat, 0.0);
        double l1 = 0.0;
        for (int i = 0; i < grid.n; ++i)
            l1 += std::abs(f.values(i) - normal_pdf(grid.point(i), 0.0, 0.25 + 0.3));
        l1 *= grid.delta();
        out.pass = out.pass && l1 < 1e-2;
        detail += "heat L1 " + fmt(l1) + " (<0.01); ";
    }

    // pure common-noise transport
    {
        Scenario trans = heat;
        trans.coeffs.diff_idio = coeff_const(1e-6);
        trans.coeffs.diff_idio_s = coeff_zero();
        trans.coeffs.diff_common = coeff_const(1.0);
        trans.coeffs.diff_common_s = coeff_zero();
        const GridSpec grid{-14.0, 14.0, 1401};
        Eigen::ArrayXd v0(grid.n);
        for (int i = 0; i < grid.n; ++i) v0(i) = normal_pdf(grid.point(i), 0.0, 0.25);
        DensityField f = DensityField::normalized(grid, std::move(v0), 0.0);
        const NoisePlan plan{777, 0, trans.dt};
        double B = 0.0;
        for (int k = 0; k < 2500; ++k) {
            const double dB = brownian_increment(plan, std::uint32_t(k));
            f = fpk_step(f, trans, dB);
            B += dB;
        }
        double l1 = 0.0;
        for (int i = 0; i < grid.n; ++i)
            l1 += std::abs(f.values(i) - normal_pdf(grid.point(i) - B, 0.0, 0.25));
        l1 *= grid.delta();
        out.pass = out.pass && l1 < 1e-2;
        detail += "transport L1 " + fmt(l1) + " (<0.01); ";
    }

    // per-step mass conservation over 1e4 steps
    {
        const GridSpec grid{-14.0, 14.0, 1401};
        Eigen::ArrayXd v0(grid.n);
        for (int i = 0; i < grid.n; ++i) v0(i) = normal_pdf(grid.point(i), 0.0, 0.25);
        DensityField f = DensityField::normalized(grid, std::move(v0), 0.0);
        double worst = 0.0;
        for (int k = 0; k < 10'000; ++k) {
            f = fpk_step(f, heat, 0.0);
            worst = std::max(worst, std::abs(f.raw_mass - 1.0));
        }
        out.pass = out.pass && worst < 1e-6;
        detail += "max per-step mass drift " + fmt(worst) + " (<1e-6)";
    }

    out.detail = detail;
    return out;
}

// --------------------------------------------------------------------------
// 8. Wasserstein identity

Outcome c8(Shared&) {
    auto q0 = [](double f) { return inv_norm_cdf(f); };
    auto q1 = [&](double f) { return 1.0 + 2.0 * q0(f); };
    const double w = wasserstein2_from_quantiles(q0, q1);
    const double id = wasserstein2_from_quantiles(q0, q0);
    auto q_shift = [&](double f) { return q0(f) + 2.5; };
    const double tr = std::abs(wasserstein2_from_quantiles(q0, q_shift) - 2.5);

    Outcome out;
    out.pass = std::abs(w - std::sqrt(2.0)) < 1e-6 && id <= 1e-12 && tr <= 1e-12;
    out.detail = "|W2 - sqrt2| = " + fmt(std::abs(w - std::sqrt(2.0))) +
                 " (<1e-6), identity " + fmt(id) + ", translation " + fmt(tr) + " (<=1e-12)";
    return out;
}

// --------------------------------------------------------------------------
// 9. Auction clearing against the sort oracle

Outcome c9(Shared&) {
    std::mt19937 gen(99);
    std::lognormal_distribution<double> dist(0.0, 0.8);
    Outcome out;
    int rounds = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        AuctionRound round;
        const int n = 2 + int(gen() % 199);
        for (int i = 0; i < n; ++i) round.bids.push_back(dist(gen));
        round.nbar = 1 + std::int64_t(gen() % n);
        const ClearingResult res = clearing_price(round);

        std::vector<std::pair<double, std::int64_t>> order;
        for (int i = 0; i < n; ++i) order.push_back({round.bids[std::size_t(i)], i});
        std::stable_sort(order.begin(), order.end());
        const double oracle_price = std::log(order[std::size_t(round.nbar - 1)].first);
        std::vector<std::int64_t> oracle_winners;
        for (std::int64_t k = 0; k < round.nbar; ++k)
            oracle_winners.push_back(order[std::size_t(k)].second);
        std::sort(oracle_winners.begin(), oracle_winners.end());

        bool ok = res.log_price == oracle_price && res.winners == oracle_winners;

        AuctionRound scaled = round;
        const double c = 0.25 + 4.0 * double(gen() % 1000) / 1000.0;
        for (double& b : scaled.bids) b *= c;
        const ClearingResult res2 = clearing_price(scaled);
        ok = ok && std::abs(res2.log_price - (res.log_price + std::log(c))) < 1e-12 &&
             res2.winners == res.winners;

        if (!ok) {
            out.pass = false;
            out.detail = "mismatch at round " + std::to_string(trial);
            return out;
        }
        ++rounds;
    }
    out.detail = std::to_string(rounds) + " random rounds exact, scaling covariance holds";
    return out;
}

// --------------------------------------------------------------------------
// 10. Convergence sweep

Outcome c10(Shared&) {
    ExperimentConfig cfg;
    cfg.scenario_name = "gaussian_null";
    cfg.scenario = named_scenario("gaussian_null");
    const SweepResult res = convergence_sweep(cfg, {1000, 10'000, 100'000});

    Outcome out;
    const bool decreasing =
        res.rows[0].sup_gap > res.rows[1].sup_gap && res.rows[1].sup_gap > res.rows[2].sup_gap;
    out.pass = decreasing && res.slope > -0.7 && res.slope < -0.3;
    std::string gaps;
    for (const auto& row : res.rows)
        gaps += "n=" + std::to_string(row.n) + ": " + fmt(row.sup_gap) + "; ";
    out.detail = gaps + "slope " + fmt(res.slope) + " (want -0.5 +- 0.2, decreasing)";
    return out;
}

// --------------------------------------------------------------------------
// 11. Determinism across reruns and worker counts

Outcome c11(Shared&) {
    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    ExperimentConfig cfg;
    cfg.scenario_name = "ou";
    cfg.scenario = named_scenario("ou");
    cfg.scenario.n_particles = 2000;
    cfg.scenario.horizon = 0.2;
    cfg.routes = {QuantileMethod::particle, QuantileMethod::closed_form};

    setenv("QMFG_THREADS", "1", 1);
    cfg.output_dir = "acceptance_out/threads1";
    run_experiment(cfg);
    setenv("QMFG_THREADS", "8", 1);
    cfg.output_dir = "acceptance_out/threads8";
    run_experiment(cfg);
    cfg.output_dir = "acceptance_out/threads8_rerun";
    run_experiment(cfg);
    unsetenv("QMFG_THREADS");

    Outcome out;
    for (const char* f : {"ou_particle.csv", "ou_closed_form.csv", "ou_report.json"}) {
        const std::string a = slurp("acceptance_out/threads1/" + std::string(f));
        const std::string b = slurp("acceptance_out/threads8/" + std::string(f));
        const std::string c = slurp("acceptance_out/threads8_rerun/" + std::string(f));
        if (a.empty() || a != b || b != c) {
            out.pass = false;
            out.detail = std::string("byte mismatch in ") + f;
            return out;
        }
    }
    out.detail = "artifacts byte-identical for QMFG_THREADS=1, 8, and rerun";
    return out;
}

// --------------------------------------------------------------------------
// 12. Moment bounds on every shipped scenario

Outcome c12(Shared& sh) {
    Outcome out;
    std::string detail;
    auto check = [&](const std::string& name, const TrajectoryRecord& rec) {
        const MomentBound mb = moment_bound_check(rec);
        out.pass = out.pass && mb.finite;
        detail += name + ": sup " + fmt(mb.sup) + (mb.finite ? " finite; " : " NON-FINITE; ");
    };
    check("gaussian_null", sh.gaussian_null);
    check("ou", sh.ou);
    check("jump_drift_free", sh.jump_hi);
    check("tanh", simulate(named_scenario("tanh")));
    out.detail = detail;
    return out;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        double budget;  // seconds; 0 = no budget
        std::function<Outcome(Shared&)> run;
    };
    Shared sh;
    const std::vector<Entry> entries = {
        {1, "dilating-Gaussian route agreement", 60.0, c1},
        {2, "common-noise factorization", 5.0, c2},
        {3, "mean-reverting market closed form", 60.0, c3},
        {4, "variance ODE identity", 1.0, c4},
        {5, "zero-drift jump quantile", 90.0, c5},
        {6, "tanh closed-form density", 30.0, c6},
        {7, "density solver oracles", 30.0, c7},
        {8, "Wasserstein quantile identity", 1.0, c8},
        {9, "auction clearing", 5.0, c9},
        {10, "particle-count convergence", 120.0, c10},
        {11, "determinism across workers", 0.0, c11},
        {12, "moment bounds on shipped scenarios", 0.0, c12},
    };

    std::filesystem::create_directories("acceptance_out");
    int failures = 0;
    for (const auto& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = e.run(sh);
        } catch (const std::exception& err) {
            out.pass = false;
            out.detail = std::string("exception: ") + err.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = e.budget == 0.0 || secs < e.budget;
        const bool pass = out.pass && in_budget;
        if (!pass) ++failures;
        const std::string budget_str = e.budget > 0.0 ? "/" + fmt(e.budget) + "s" : "";
        std::printf("[%s] %2d. %s | %s | %.1fs%s\n", pass ? "PASS" : "FAIL", e.id, e.name,
                    out.detail.c_str(), secs, budget_str.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, entries.size());
    return failures;
}
