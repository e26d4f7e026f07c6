#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qmfg/density.hpp"
#include "qmfg/model.hpp"
#include "qmfg/particles.hpp"
#include "qmfg/stochastics.hpp"

namespace qmfg {

enum class QuantileMethod { particle, sde, ode, closed_form, fpk };

std::string method_name(QuantileMethod m);

/// Time series of the conditional quantile m^f together with the common-noise
/// path it is conditioned on.
struct QuantilePath {
    std::vector<double> times;
    std::vector<double> values;
    double f = 0.5;
    std::vector<double> common_path;
    QuantileMethod method = QuantileMethod::closed_form;
};

void write_quantile_csv(const QuantilePath& path, const std::string& file);

/// Unit Gaussian quantile Q_Z(f): rational initial guess refined by one
/// Newton step on Phi, |Phi(Q_Z(f)) - f| < 1e-12.
double inv_norm_cdf(double f);

/// Standard normal CDF.
double norm_cdf(double x);

/// mu + sigma Q_Z(f); sigma must be nonnegative.
double gaussian_quantile(double mu, double sigma, double f);

struct ScoreEval {
    double value = 0.0;
    bool floored = false;
};

/// Source of the score (log m)_s along the quantile trajectory: an analytic
/// function, a streaming particle simulation smoothed by a mollifier, or a
/// precomputed density-field sequence.
class ScoreSource {
public:
    using Fn = std::function<ScoreEval(std::int64_t step, double t, double x)>;

    static ScoreSource analytic(std::function<double(double t, double x)> fn);
    /// Runs the scenario's particle system in lockstep (advanced lazily as
    /// steps are requested) and differentiates the mollified empirical law.
    static ScoreSource particle_kde(const Scenario& scn, MollifierSpec spec);
    static ScoreSource from_fields(std::vector<DensityField> fields);

    ScoreEval operator()(std::int64_t step, double t, double x) const { return fn_(step, t, x); }

private:
    explicit ScoreSource(Fn fn) : fn_(std::move(fn)) {}
    Fn fn_;
};

/// Euler-Maruyama integration of the quantile equation
///   dm^f = b dt - sigma sigma_s dt - 1/2 (log m)_s sigma^2 dt
///          - Int gamma gamma_s mu(d theta) dt
///          - 1/2 (log m)_s Int gamma^2 mu(d theta) dt + sigma_o dB_o,
/// all coefficients evaluated at (t, m^f, m^f, a(t, m^f, m^f)). Errors if the
/// score floor fires on more than 10% of steps.
QuantilePath integrate_quantile_sde(const Scenario& scn, const ScoreSource& score,
                                    const NoisePlan& common);

/// Deterministic variant (requires sigma_o identically zero; probed on the
/// validation grid), explicit midpoint (RK2) stepping.
QuantilePath integrate_quantile_ode(const Scenario& scn, const ScoreSource& score);

struct OuVariance {
    double sigma_nc = 0.0;
    double ode_residual = 0.0;
};

/// sigma_nc(t) = sqrt(e^{-2 a t} Int_0^t e^{2 a t'} sigma^2 dt') by adaptive
/// quadrature, plus the residual of a sigma_nc + sigma_nc' = sigma^2/(2 sigma_nc)
/// with the derivative by central differences (h = 1e-5).
OuVariance ou_variance(double alpha, const std::function<double(double)>& sigma_fn, double t);

/// Closed-form mean-reverting quantile path: resolves
///   m^f(t) = e^{-a t}[a Int e^{a t'} m^f dt' + Int e^{a t'} sigma_o dB_o] + m^f_nc(t)
/// by forward substitution on the grid (trapezoid in the Volterra kernel,
/// left-point stochastic integral). s0_law must be a point mass or Gaussian.
QuantilePath ou_quantile_closed_form(double alpha, const std::function<double(double)>& sigma_fn,
                                     const std::function<double(double)>& sigma_o_fn,
                                     const InitialLaw& s0_law, double f,
                                     const std::vector<double>& times,
                                     const std::vector<double>& common_path);

struct TanhDensity {
    DensityField field;
    double raw_mass = 1.0;  // grid mass before the final renormalization
};

/// Closed-form density for the tanh drift with unit idiosyncratic noise and
/// additive jumps: cosh(delta s) e^{-delta^2 t/2} times the density of
/// B(t) + (compound Poisson with cosh-tilted intensity and marks), shifted by
/// s0 + sigma_o B_o(t). Requires a symmetric mark law.
TanhDensity tanh_closed_form_density(double delta, const LevySpec& levy, double t,
                                     const GridSpec& grid, double s0, double sigma_o_B_o);

/// Quantile of s0 + sigma_o B_o(t) + (B(t) + compound Poisson(t)) for the
/// zero-drift jump case, from the gridded CDF by the inf rule.
double jump_free_drift_quantile(double sigma_o, const LevySpec& levy, double f, double t,
                                double common_value);

/// Path version; convolution powers of the mark density are computed once.
QuantilePath jump_free_drift_quantile_path(double sigma_o, const LevySpec& levy, double f,
                                           const std::vector<double>& times,
                                           const std::vector<double>& common_path);

/// W_2 from the one-dimensional quantile identity
/// W_2^2 = Int_0^1 (q0(f) - q1(f))^2 df, graded-panel composite Gauss-Legendre
/// with 256 nodes on (0, 1).
double wasserstein2_from_quantiles(const std::function<double(double)>& q0,
                                   const std::function<double(double)>& q1);

}  // namespace qmfg
