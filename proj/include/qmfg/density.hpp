#pragma once

#include <Eigen/Core>

#include <string>

#include "qmfg/grid.hpp"
#include "qmfg/model.hpp"
#include "qmfg/stochastics.hpp"

namespace qmfg {

/// Gridded conditional density m(t, .): nonnegative nodal values with unit
/// trapezoid mass.
struct DensityField {
    GridSpec grid;
    Eigen::ArrayXd values;
    double t = 0.0;
    double clipped_mass = 0.0;   // negative mass removed by the last update
    double raw_mass = 1.0;       // pre-normalization mass of the last update

    /// Normalizes to unit mass; throws if the mass is not positive.
    static DensityField normalized(const GridSpec& grid, Eigen::ArrayXd values, double t);

    double mass() const { return trapz(values, grid.delta()); }
    double interp(double x) const;
    Eigen::ArrayXd cdf() const;
    /// inf rule: leftmost grid point whose CDF is >= f.
    double quantile(double f) const;
};

/// Gaussian mollifier with explicit bandwidth or the Silverman rule
/// eps = 1.06 * sd * n^{-1/5}.
struct MollifierSpec {
    double bandwidth = 0.0;
    bool use_silverman = true;

    static MollifierSpec silverman() { return {0.0, true}; }
    static MollifierSpec fixed(double eps);

    /// Bandwidth for a given sample; throws if Silverman is requested and the
    /// sample is degenerate.
    double resolve(const Eigen::ArrayXd& states) const;
};

/// Kernel density estimate (1/n) sum rho_eps(y - s_i), renormalized on the grid.
DensityField kde(const Eigen::ArrayXd& states, const MollifierSpec& spec, const GridSpec& grid);

/// Mollified score m_s(x) / max(m(x), 1e-12); *floored is set when the floor
/// was active.
double log_density_gradient(const Eigen::ArrayXd& states, const MollifierSpec& spec, double x,
                            bool* floored = nullptr);

/// J*[m](s) = -lambda m(s) + lambda Int mark(theta) m(s - theta) d theta for
/// state-independent jump sizes; m extended by zero outside the grid.
Eigen::ArrayXd jump_adjoint_apply(const DensityField& field, const LevySpec& levy);

/// Right-hand side of the deterministic part of the density equation
/// -(b m)_s + 1/2 (sigma^2 m)_ss + 1/2 sigma_o^2 m_ss + J*[m], with
/// coefficients evaluated at the field's own f-quantile q.
Eigen::ArrayXd fpk_rhs(const DensityField& field, const Scenario& scn, double q);

/// One explicit Euler-Maruyama update of the stochastic density equation,
/// including the common-noise term -sigma_o m_s dB_o. Enforces the CFL bound
/// (sigma^2 + sigma_o^2) dt / ds^2 <= 1/2; clips negatives and renormalizes,
/// recording both corrections on the result.
DensityField fpk_step(const DensityField& field, const Scenario& scn, double dB_o);

/// m(t, s) = m_nc(t, s - s0 - Int sigma_o dB_o) by linear interpolation.
/// Throws if more than 1e-3 of the mass leaves the grid.
DensityField shift_decompose(const DensityField& base, double s0, double sigma_o_path_integral);

void write_density_csv(const DensityField& field, const std::string& path);

}  // namespace qmfg
