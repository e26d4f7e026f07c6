#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qmfg/grid.hpp"
#include "qmfg/rng.hpp"
#include "qmfg/util.hpp"

namespace qmfg {

/// Mark (jump-size) distribution. Continuous laws carry a density and an
/// inverse CDF for sampling; a point law is a single atom.
struct MarkLaw {
    enum class Kind { gaussian, uniform, point, custom };

    Kind kind = Kind::gaussian;
    double mu = 0.0;       // gaussian mean / point location
    double sigma = 1.0;    // gaussian
    double lo_ = -1.0;     // uniform / custom support
    double hi_ = 1.0;
    std::function<double(double)> custom_density;
    bool custom_symmetric = false;

    static MarkLaw gaussian(double mu, double sigma);
    static MarkLaw uniform(double lo, double hi);
    static MarkLaw point(double theta0);
    static MarkLaw custom(std::function<double(double)> density, double lo, double hi,
                          bool symmetric);

    bool is_point() const { return kind == Kind::point; }
    bool has_sampler() const { return kind != Kind::custom; }
    double lo() const;
    double hi() const;
    bool symmetric() const;
    double density(double theta) const;
    /// Inverse CDF; u in (0, 1].
    double icdf(double u) const;
};

/// Finite-activity Lévy measure mu(d theta) = intensity * mark_density d theta,
/// with an exponential-moment certificate E[e^{delta_max |theta|}].
struct LevySpec {
    double intensity = 0.0;
    MarkLaw mark = MarkLaw::point(0.0);
    double delta_max = 2.0;
    double exp_moment_bound = 1.0;
    bool symmetric = true;

    LevySpec() = default;
    LevySpec(double intensity_, MarkLaw mark_, double delta_max_ = 2.0);

    static LevySpec none() { return LevySpec(0.0, MarkLaw::point(0.0)); }

    /// E_mark[fn(theta)] by the cached 256-node rule (exact for point marks).
    double mean_of(const std::function<double(double)>& fn) const;
    /// Mark density mass captured by the quadrature rule (1 for point marks).
    double density_mass() const;

    Quadrature rule;  // nodes/weights on the mark support, weights absorbed density
};

using Coeff = std::function<double(double t, double s, double q, double a)>;
using JumpCoeff = std::function<double(double t, double s, double q, double a, double theta)>;

/// Drift, diffusion and jump-size coefficients of the state equation together
/// with their s-derivatives (analytic when supplied, central finite
/// differences with h = 1e-5 (1+|s|) otherwise).
struct CoefficientSet {
    Coeff drift;
    Coeff diff_idio;
    Coeff diff_common;
    JumpCoeff jump_gamma;

    Coeff drift_s;        // optional analytic derivatives
    Coeff diff_idio_s;
    Coeff diff_common_s;
    JumpCoeff jump_gamma_s;

    bool has_analytic() const { return bool(drift_s); }

    double drift_deriv(double t, double s, double q, double a) const;
    double diff_idio_deriv(double t, double s, double q, double a) const;
    double diff_common_deriv(double t, double s, double q, double a) const;
    double jump_gamma_deriv(double t, double s, double q, double a, double theta) const;
};

// Named coefficient builders ("tanh", "ou", "zero", constants).
Coeff coeff_const(double v);
Coeff coeff_zero();
Coeff drift_tanh(double delta);
/// alpha (q - s) + max(a - q, 0)
Coeff drift_ou(double alpha);
JumpCoeff gamma_zero();
/// gamma(theta) = theta
JumpCoeff gamma_mark();

struct ControlPolicy {
    std::string name = "zero";
    std::function<double(double t, double s, double q)> eval = [](double, double, double) {
        return 0.0;
    };
};

ControlPolicy zero_policy();

struct InitialLaw {
    enum class Kind { point, gaussian, empirical };

    Kind kind = Kind::point;
    double value = 0.0;  // point
    double mu = 0.0;     // gaussian
    double sigma = 1.0;
    std::vector<double> values;  // empirical

    static InitialLaw point(double v);
    static InitialLaw gaussian(double mu, double sigma);
    static InitialLaw empirical(std::vector<double> vs);

    double support_lo() const;
    double support_hi() const;
    double mean() const;
    double stddev() const;
    /// Analytic f-quantile of the law (inf rule for the empirical variant).
    double quantile(double f) const;
    double sample(CounterRng& rng) const;
};

/// Full problem description: coefficients, jumps, quantile fraction, horizon,
/// discretization, initial law, state grid, seed, control policy.
struct Scenario {
    CoefficientSet coeffs;
    LevySpec levy;
    double f = 0.5;
    double horizon = 1.0;
    double dt = 1e-3;
    std::int64_t n_particles = 1000;
    InitialLaw initial_law;
    GridSpec state_grid;
    std::uint64_t seed = 1;
    ControlPolicy control_policy;

    std::string desc;  // canonical JSON this scenario was built from (may be empty)

    std::int64_t n_steps() const { return std::int64_t(std::llround(horizon / dt)); }
};

struct ValidationReport {
    struct Item {
        std::string field;
        std::string message;
    };
    std::vector<Item> violations;
    std::vector<std::string> info;

    bool valid() const { return violations.empty(); }
    bool mentions(const std::string& needle) const;
    std::string to_string() const;
};

/// Checks every declared invariant; reports violations, never throws.
ValidationReport validate_scenario(const Scenario& s);

/// Max relative error between analytic and central-difference s-derivatives
/// over the (t, s, q, a) grid. Throws if a coefficient evaluates non-finite
/// (the message names the grid point) or if no analytic derivatives exist.
double derivative_check(const CoefficientSet& c,
                        const std::vector<std::array<double, 4>>& grid);

// JSON round trip. The schema mirrors the field names above; named drifts
// are available by string key ("tanh", "ou", "zero").
Scenario scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const Scenario& s);

}  // namespace qmfg
