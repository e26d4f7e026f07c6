#include "qmfg/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "qmfg/util.hpp"

namespace qmfg {

// ---------------------------------------------------------------------------
// Gaussian quantile

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation for the probit function, |rel err| < 1.2e-9.
double probit_estimate(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double u = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double u = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    const double u = p - 0.5;
    const double r = u * u;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double inv_norm_cdf(double f) {
    if (!(f > 0.0 && f < 1.0))
        throw std::invalid_argument("inv_norm_cdf: f must lie strictly in (0,1)");
    double x = probit_estimate(f);
    x -= (norm_cdf(x) - f) / norm_pdf(x);  // one Newton step
    return x;
}

double gaussian_quantile(double mu, double sigma, double f) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_quantile: sigma must be >= 0");
    if (sigma == 0.0) {
        if (!(f > 0.0 && f < 1.0))
            throw std::invalid_argument("gaussian_quantile: f must lie strictly in (0,1)");
        return mu;
    }
    return mu + sigma * inv_norm_cdf(f);
}

// ---------------------------------------------------------------------------
// Paths

std::string method_name(QuantileMethod m) {
    switch (m) {
        case QuantileMethod::particle: return "particle";
        case QuantileMethod::sde: return "sde";
        case QuantileMethod::ode: return "ode";
        case QuantileMethod::closed_form: return "closed_form";
        case QuantileMethod::fpk: return "fpk";
    }
    return "?";
}

void write_quantile_csv(const QuantilePath& path, const std::string& file) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot open " + file);
    os << "t,quantile,common_noise,method\n";
    const std::string name = method_name(path.method);
    for (std::size_t k = 0; k < path.times.size(); ++k)
        os << fmt17(path.times[k]) << "," << fmt17(path.values[k]) << ","
           << fmt17(path.common_path[k]) << "," << name << "\n";
}

// ---------------------------------------------------------------------------
// Score sources

ScoreSource ScoreSource::analytic(std::function<double(double, double)> fn) {
    return ScoreSource([fn = std::move(fn)](std::int64_t, double t, double x) {
        return ScoreEval{fn(t, x), false};
    });
}

ScoreSource ScoreSource::particle_kde(const Scenario& scn, MollifierSpec spec) {
    struct Stream {
        Scenario scn;
        ParticleEnsemble ens;
        std::int64_t step = 0;
    };
    auto st = std::make_shared<Stream>();
    st->scn = scn;
    st->ens = init_ensemble(scn);
    return ScoreSource([st, spec](std::int64_t step, double, double x) {
        if (step < st->step - 1)
            throw std::logic_error("particle score stream cannot rewind");
        while (st->step < step) {
            st->ens = step_ensemble(st->ens, st->scn, std::uint32_t(st->step));
            ++st->step;
        }
        bool floored = false;
        const double v = log_density_gradient(st->ens.states, spec, x, &floored);
        return ScoreEval{v, floored};
    });
}

ScoreSource ScoreSource::from_fields(std::vector<DensityField> fields) {
    if (fields.empty()) throw std::invalid_argument("score: empty field sequence");
    struct Table {
        std::vector<DensityField> fields;
        std::vector<Eigen::ArrayXd> slopes;
    };
    auto tb = std::make_shared<Table>();
    tb->fields = std::move(fields);
    for (const auto& f : tb->fields) {
        const int n = f.grid.n;
        const double dx = f.grid.delta();
        Eigen::ArrayXd ms(n);
        for (int i = 0; i < n; ++i) {
            const double up = i + 1 < n ? f.values(i + 1) : 0.0;
            const double dn = i - 1 >= 0 ? f.values(i - 1) : 0.0;
            ms(i) = (up - dn) / (2.0 * dx);
        }
        tb->slopes.push_back(std::move(ms));
    }
    return ScoreSource([tb](std::int64_t, double t, double x) {
        std::size_t best = 0;
        double gap = std::abs(tb->fields[0].t - t);
        for (std::size_t k = 1; k < tb->fields.size(); ++k) {
            const double g = std::abs(tb->fields[k].t - t);
            if (g < gap) {
                gap = g;
                best = k;
            }
        }
        const auto& f = tb->fields[best];
        const double m = f.interp(x);
        const double ms = interp_uniform(f.grid.lo, f.grid.delta(), tb->slopes[best], x);
        const bool floored = m < 1e-12;
        return ScoreEval{ms / std::max(m, 1e-12), floored};
    });
}

// ---------------------------------------------------------------------------
// Quantile integrators

namespace {

// Deterministic part of the quantile drift at (t, q):
// b - sigma sigma_s - 1/2 score sigma^2 - Int gamma gamma_s mu - 1/2 score Int gamma^2 mu.
double quantile_drift(const Scenario& scn, std::int64_t step, double t, double q,
                      const ScoreSource& score, std::int64_t& floor_hits) {
    const double a = scn.control_policy.eval(t, q, q);
    const double b = scn.coeffs.drift(t, q, q, a);
    const double sig = scn.coeffs.diff_idio(t, q, q, a);
    const double sig_s = scn.coeffs.diff_idio_deriv(t, q, q, a);

    double jump_gg = 0.0, jump_g2 = 0.0;
    if (scn.levy.intensity > 0.0) {
        jump_gg = scn.levy.intensity * scn.levy.mean_of([&](double th) {
            return scn.coeffs.jump_gamma(t, q, q, a, th) *
                   scn.coeffs.jump_gamma_deriv(t, q, q, a, th);
        });
        jump_g2 = scn.levy.intensity * scn.levy.mean_of([&](double th) {
            const double g = scn.coeffs.jump_gamma(t, q, q, a, th);
            return g * g;
        });
    }

    const ScoreEval se = score(step, t, q);
    if (se.floored) ++floor_hits;
    return b - sig * sig_s - 0.5 * se.value * sig * sig - jump_gg - 0.5 * se.value * jump_g2;
}

void check_floor_budget(std::int64_t floor_hits, std::int64_t steps) {
    if (steps > 0 && double(floor_hits) > 0.10 * double(steps))
        throw std::runtime_error(
            "quantile integration: density floor hit on more than 10% of steps; "
            "use a less extreme f or a larger sample");
}

}  // namespace

QuantilePath integrate_quantile_sde(const Scenario& scn, const ScoreSource& score,
                                    const NoisePlan& common) {
    const std::int64_t n_steps = scn.n_steps();
    QuantilePath path;
    path.f = scn.f;
    path.method = QuantileMethod::sde;
    path.times.reserve(n_steps + 1);
    path.values.reserve(n_steps + 1);
    path.common_path.reserve(n_steps + 1);

    const NoisePlan plan{common.seed, common.stream_id, scn.dt};
    double q = scn.initial_law.quantile(scn.f);
    double B = 0.0;
    std::int64_t floor_hits = 0;
    path.times.push_back(0.0);
    path.values.push_back(q);
    path.common_path.push_back(0.0);

    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double t = double(k) * scn.dt;
        const double drift = quantile_drift(scn, k, t, q, score, floor_hits);
        const double a = scn.control_policy.eval(t, q, q);
        const double sigo = scn.coeffs.diff_common(t, q, q, a);
        const double dB = brownian_increment(plan, std::uint32_t(k));
        q = q + drift * scn.dt + sigo * dB;
        B = B + dB;
        if (!std::isfinite(q))
            throw std::runtime_error("integrate_quantile_sde: non-finite value at step " +
                                     std::to_string(k));
        path.times.push_back(double(k + 1) * scn.dt);
        path.values.push_back(q);
        path.common_path.push_back(B);
    }
    check_floor_budget(floor_hits, n_steps);
    return path;
}

QuantilePath integrate_quantile_ode(const Scenario& scn, const ScoreSource& score) {
    // The deterministic evolution needs sigma_o == 0; probe the state box.
    const auto& g = scn.state_grid;
    for (double t : {0.0, 0.5 * scn.horizon, scn.horizon})
        for (int i = 0; i < 9; ++i) {
            const double x = g.lo + (g.hi - g.lo) * i / 8.0;
            const double a = scn.control_policy.eval(t, x, x);
            if (scn.coeffs.diff_common(t, x, x, a) != 0.0)
                throw std::invalid_argument(
                    "integrate_quantile_ode: scenario has nonzero sigma_o");
        }

    const std::int64_t n_steps = scn.n_steps();
    QuantilePath path;
    path.f = scn.f;
    path.method = QuantileMethod::ode;

    double q = scn.initial_law.quantile(scn.f);
    std::int64_t floor_hits = 0;
    path.times.push_back(0.0);
    path.values.push_back(q);
    path.common_path.push_back(0.0);

    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double t = double(k) * scn.dt;
        const double k1 = quantile_drift(scn, k, t, q, score, floor_hits);
        const double k2 =
            quantile_drift(scn, k, t + 0.5 * scn.dt, q + 0.5 * scn.dt * k1, score, floor_hits);
        q += scn.dt * k2;
        if (!std::isfinite(q))
            throw std::runtime_error("integrate_quantile_ode: non-finite value at step " +
                                     std::to_string(k));
        path.times.push_back(double(k + 1) * scn.dt);
        path.values.push_back(q);
        path.common_path.push_back(0.0);
    }
    check_floor_budget(floor_hits, 2 * n_steps);
    return path;
}

// ---------------------------------------------------------------------------
// Mean-reverting closed forms

OuVariance ou_variance(double alpha, const std::function<double(double)>& sigma_fn, double t) {
    if (t < 0.0) throw std::invalid_argument("ou_variance: t must be >= 0");
    auto var_at = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double integral = adaptive_simpson(
            [&](double tp) {
                const double s = sigma_fn(tp);
                return std::exp(2.0 * alpha * (tp - u)) * s * s;
            },
            0.0, u, 1e-13);
        return integral;
    };
    OuVariance out;
    out.sigma_nc = std::sqrt(std::max(0.0, var_at(t)));
    if (t <= 1e-5 || out.sigma_nc == 0.0) {
        out.ode_residual = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double h = 1e-5;
    const double up = std::sqrt(std::max(0.0, var_at(t + h)));
    const double dn = std::sqrt(std::max(0.0, var_at(t - h)));
    const double deriv = (up - dn) / (2.0 * h);
    const double s = sigma_fn(t);
    out.ode_residual = alpha * out.sigma_nc + deriv - s * s / (2.0 * out.sigma_nc);
    return out;
}

QuantilePath ou_quantile_closed_form(double alpha, const std::function<double(double)>& sigma_fn,
                                     const std::function<double(double)>& sigma_o_fn,
                                     const InitialLaw& s0_law, double f,
                                     const std::vector<double>& times,
                                     const std::vector<double>& common_path) {
    if (times.size() != common_path.size() || times.size() < 1)
        throw std::invalid_argument("ou_quantile_closed_form: times/common grid mismatch");
    if (s0_law.kind == InitialLaw::Kind::empirical)
        throw std::invalid_argument("ou_quantile_closed_form: initial law must be point or Gaussian");

    const double Q = inv_norm_cdf(f);
    const double mu0 = s0_law.mean();
    const double sd0 = s0_law.stddev();

    const std::size_t K = times.size();
    // Individual-noise quantile g(t) = e^{-alpha t} mu0 + sigma_tot(t) Q with
    // sigma_tot^2 = e^{-2 alpha t} sd0^2 + Int_0^t e^{2 alpha (t'-t)} sigma^2 dt',
    // accumulated step by step with a Gauss rule per increment.
    std::vector<double> gpath(K), sigma_tot(K);
    double I = 0.0;  // Int_0^t e^{2 alpha t'} sigma^2 dt' , rescaled each step
    sigma_tot[0] = sd0;
    gpath[0] = mu0 + sd0 * Q;
    for (std::size_t k = 1; k < K; ++k) {
        const Quadrature qr = gauss_legendre(8, times[k - 1], times[k]);
        double inc = 0.0;
        for (int j = 0; j < qr.nodes.size(); ++j) {
            const double s = sigma_fn(qr.nodes(j));
            inc += qr.weights(j) * std::exp(2.0 * alpha * (qr.nodes(j) - times[k])) * s * s;
        }
        I = I * std::exp(-2.0 * alpha * (times[k] - times[k - 1])) + inc;
        const double var = std::exp(-2.0 * alpha * times[k]) * sd0 * sd0 + I;
        sigma_tot[k] = std::sqrt(std::max(0.0, var));
        gpath[k] = std::exp(-alpha * times[k]) * mu0 + sigma_tot[k] * Q;
    }

    // Volterra substitution for m(t) = v(t) + g(t), where
    // v(t) = e^{-alpha t}[alpha Int e^{alpha t'} m dt' + Int e^{alpha t'} sigma_o dB_o],
    // trapezoid on the drift integral, left point on the stochastic one.
    QuantilePath path;
    path.f = f;
    path.method = QuantileMethod::closed_form;
    path.times = times;
    path.common_path = common_path;
    path.values.resize(K);

    // Forward substitution in increment form: the common component v solves
    // dv = alpha (m - v) dt + sigma_o dB with m = v + g, so the bracket is g
    // itself (trapezoid) and each step is explicit.
    double v = 0.0;
    path.values[0] = gpath[0];
    for (std::size_t k = 1; k < K; ++k) {
        const double dt = times[k] - times[k - 1];
        const double dB = common_path[k] - common_path[k - 1];
        v += 0.5 * alpha * dt * (gpath[k - 1] + gpath[k]) + sigma_o_fn(times[k - 1]) * dB;
        path.values[k] = v + gpath[k];
    }
    return path;
}

// ---------------------------------------------------------------------------
// Jump-diffusion closed forms

namespace {

Eigen::ArrayXd gaussian_convolve(const GridSpec& grid, const Eigen::ArrayXd& f, double var) {
    const double dx = grid.delta();
    const double sd = std::sqrt(var);
    const auto r = std::int64_t(std::ceil(8.0 * sd / dx));
    Eigen::ArrayXd w(2 * r + 1);
    for (std::int64_t d = -r; d <= r; ++d) {
        const double u = double(d) * dx / sd;
        w(d + r) = std::exp(-0.5 * u * u);
    }
    w /= w.sum();
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(grid.n);
    for (std::int64_t d = -r; d <= r; ++d) {
        const double wd = w(d + r);
        if (wd == 0.0) continue;
        const std::int64_t j0 = std::max<std::int64_t>(0, d);
        const std::int64_t j1 = std::min<std::int64_t>(grid.n, grid.n + d);
        for (std::int64_t j = j0; j < j1; ++j) out(j) += wd * f(j - d);
    }
    return out;
}

double gauss_density(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TanhDensity tanh_closed_form_density(double delta, const LevySpec& levy, double t,
                                     const GridSpec& grid, double s0, double sigma_o_B_o) {
    grid.require_valid();
    if (!(t > 0.0)) throw std::invalid_argument("tanh_closed_form_density: t must be > 0");
    if (levy.intensity > 0.0 && !levy.symmetric)
        throw std::invalid_argument(
            "tanh_closed_form_density: mark law must be symmetric (odd tilt component "
            "must vanish)");
    if (levy.intensity > 0.0 && delta > levy.delta_max)
        throw std::invalid_argument(
            "tanh_closed_form_density: exponential moment certificate does not cover delta");

    const double shift = s0 + sigma_o_B_o;
    GridSpec centered{grid.lo - shift, grid.hi - shift, grid.n};

    Eigen::ArrayXd mixed(grid.n);
    if (levy.intensity == 0.0) {
        // no jumps: just the Gaussian marginal
        for (int i = 0; i < grid.n; ++i) mixed(i) = gauss_density(centered.point(i), t);
    } else {
        // cosh-tilted compound Poisson: intensity lambda*E[cosh(delta theta)],
        // marks reweighted by cosh(delta theta).
        LevySpec tilted = levy;
        if (delta != 0.0) {
            const double c_delta =
                levy.mean_of([delta](double th) { return std::cosh(delta * th); });
            MarkLaw tilted_mark = MarkLaw::custom(
                [base = levy.mark, delta, c_delta](double th) {
                    return std::cosh(delta * th) * base.density(th) / c_delta;
                },
                levy.mark.lo(), levy.mark.hi(), true);
            tilted = LevySpec(levy.intensity * c_delta, tilted_mark, levy.delta_max);
        }
        const CompoundPoissonDensity cp = compound_poisson_density(tilted, t, centered);
        mixed = gaussian_convolve(centered, cp.values, t);
        for (int i = 0; i < grid.n; ++i)
            mixed(i) += cp.atom_weight * gauss_density(centered.point(i), t);
    }

    Eigen::ArrayXd values(grid.n);
    const double damp = std::exp(-0.5 * delta * delta * t);
    for (int i = 0; i < grid.n; ++i)
        values(i) = std::cosh(delta * centered.point(i)) * damp * mixed(i);

    TanhDensity out{DensityField{}, trapz(values, grid.delta())};
    out.field = DensityField::normalized(grid, std::move(values), t);
    return out;
}

QuantilePath jump_free_drift_quantile_path(double sigma_o, const LevySpec& levy, double f,
                                           const std::vector<double>& times,
                                           const std::vector<double>& common_path) {
    if (times.size() != common_path.size() || times.empty())
        throw std::invalid_argument("jump_free_drift_quantile_path: grid mismatch");
    if (!(f > 0.0 && f < 1.0))
        throw std::invalid_argument("jump_free_drift_quantile_path: f must lie in (0,1)");

    double t_max = 0.0, t_min_pos = std::numeric_limits<double>::infinity();
    for (double t : times) {
        if (t < 0.0) throw std::invalid_argument("jump_free_drift_quantile_path: negative time");
        t_max = std::max(t_max, t);
        if (t > 0.0) t_min_pos = std::min(t_min_pos, t);
    }

    QuantilePath path;
    path.f = f;
    path.method = QuantileMethod::closed_form;
    path.times = times;
    path.common_path = common_path;
    path.values.resize(times.size());

    if (t_max == 0.0) {
        for (std::size_t k = 0; k < times.size(); ++k)
            path.values[k] = sigma_o * common_path[k];
        return path;
    }

    // Shared grid for the mixed density of B(t) + jumps over all times.
    double dx = 0.01;
    if (std::isfinite(t_min_pos)) dx = std::min(dx, std::sqrt(t_min_pos) / 6.0);
    dx = std::max(dx, 2e-4);
    double half = 6.0 * std::sqrt(t_max) + 1.0;
    int K = 0;
    const double lt_max = levy.intensity * t_max;
    if (lt_max > 0.0) {
        double pmf = std::exp(-lt_max), cum = pmf;
        K = 1;
        while (1.0 - cum > 1e-10 && K < 4096) {
            pmf *= lt_max / double(K);
            cum += pmf;
            ++K;
        }
        half += double(K) * std::max(std::abs(levy.mark.lo()), std::abs(levy.mark.hi()));
    }
    const int n = 2 * int(std::ceil(half / dx)) + 1;
    GridSpec grid{-dx * double((n - 1) / 2), dx * double((n - 1) / 2), n};

    // Convolution powers of the mark density, reused across times.
    std::vector<Eigen::ArrayXd> powers;
    if (levy.intensity > 0.0) {
        const auto d_lo = std::int64_t(std::floor(levy.mark.lo() / dx)) - 1;
        const auto d_hi = std::int64_t(std::ceil(levy.mark.hi() / dx)) + 1;
        const std::int64_t n_off = d_hi - d_lo + 1;
        Eigen::ArrayXd w(n_off);
        for (std::int64_t d = d_lo; d <= d_hi; ++d)
            w(d - d_lo) = levy.mark.density(double(d) * dx);
        w(0) *= 0.5;
        w(n_off - 1) *= 0.5;
        w *= dx;
        w /= w.sum();

        Eigen::ArrayXd power(n);
        for (int i = 0; i < n; ++i) power(i) = levy.mark.density(grid.point(i));
        power /= trapz(power, dx);
        powers.push_back(power);
        for (int k = 2; k <= K; ++k) {
            Eigen::ArrayXd r = Eigen::ArrayXd::Zero(n);
            for (std::int64_t d = d_lo; d <= d_hi; ++d) {
                const double wd = w(d - d_lo);
                if (wd == 0.0) continue;
                const std::int64_t j0 = std::max<std::int64_t>(0, d);
                const std::int64_t j1 = std::min<std::int64_t>(n, n + d);
                for (std::int64_t j = j0; j < j1; ++j) r(j) += wd * power(j - d);
            }
            power = std::move(r);
            powers.push_back(power);
        }
    }

    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        if (t == 0.0) {
            path.values[k] = sigma_o * common_path[k];
            continue;
        }
        Eigen::ArrayXd cont = Eigen::ArrayXd::Zero(n);
        double atom = 1.0;
        if (levy.intensity > 0.0) {
            const double lt = levy.intensity * t;
            atom = std::exp(-lt);
            double pois = atom;
            for (std::size_t j = 0; j < powers.size(); ++j) {
                pois *= lt / double(j + 1);
                cont += pois * powers[j];
            }
        }
        Eigen::ArrayXd density = gaussian_convolve(grid, cont, t);
        for (int i = 0; i < n; ++i) density(i) += atom * gauss_density(grid.point(i), t);

        // inf-rule quantile from the trapezoid CDF
        Eigen::ArrayXd cdf(n);
        cdf(0) = 0.0;
        for (int i = 1; i < n; ++i) cdf(i) = cdf(i - 1) + 0.5 * dx * (density(i - 1) + density(i));
        const double total = cdf(n - 1);
        double qz = grid.hi;
        for (int i = 0; i < n; ++i)
            if (cdf(i) >= f * total) {
                qz = grid.point(i);
                break;
            }
        path.values[k] = sigma_o * common_path[k] + qz;
    }
    return path;
}

double jump_free_drift_quantile(double sigma_o, const LevySpec& levy, double f, double t,
                                double common_value) {
    const QuantilePath p = jump_free_drift_quantile_path(sigma_o, levy, f, {t}, {common_value});
    return p.values[0];
}

// ---------------------------------------------------------------------------
// Wasserstein identity

double wasserstein2_from_quantiles(const std::function<double(double)>& q0,
                                   const std::function<double(double)>& q1) {
    // Graded panels toward both endpoints; 256 Gauss-Legendre nodes in total.
    static const double edges[] = {0.0,    1e-7,   1e-5,   1e-3, 1e-2, 0.1, 0.5,
                                   0.9,    0.99,   0.999,  0.99999, 0.9999999, 1.0};
    static const int nodes_per_panel[] = {21, 21, 21, 21, 21, 23, 23, 21, 21, 21, 21, 21};

    double acc = 0.0;
    for (int p = 0; p + 1 < int(std::size(edges)); ++p) {
        const Quadrature qr = gauss_legendre(nodes_per_panel[p], edges[p], edges[p + 1]);
        for (int i = 0; i < qr.nodes.size(); ++i) {
            const double f = qr.nodes(i);
            const double d = q0(f) - q1(f);
            if (!std::isfinite(d))
                throw std::runtime_error("wasserstein2: non-finite quantile at f = " + fmt17(f));
            acc += qr.weights(i) * d * d;
        }
    }
    return std::sqrt(std::max(0.0, acc));
}

}  // namespace qmfg
