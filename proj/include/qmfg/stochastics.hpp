#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "qmfg/grid.hpp"
#include "qmfg/model.hpp"
#include "qmfg/rng.hpp"

namespace qmfg {

/// Addresses one reproducible noise stream. Stream 0 is reserved for the
/// common noise; particle i uses stream i+1.
struct NoisePlan {
    std::uint64_t seed = 1;
    std::uint32_t stream_id = 0;
    double dt = 1e-3;
};

inline constexpr std::uint32_t kLaneBrownian = 0;
inline constexpr std::uint32_t kLaneJumps = 1;
inline constexpr std::uint32_t kLaneInit = 2;

/// Brownian increment ~ N(0, dt) for (seed, stream, step); bit-reproducible.
double brownian_increment(const NoisePlan& plan, std::uint32_t step);

/// Jump marks landing in one step plus the compensator contribution
/// dt * lambda * E[gamma(theta)] of the compensated measure.
struct JumpBatch {
    std::vector<double> marks;
    double compensator = 0.0;
};

/// Poisson(lambda*dt)-many i.i.d. marks from the mark law; compensator is
/// computed for the supplied gamma (default: gamma(theta) = theta).
JumpBatch sample_jumps(const NoisePlan& plan, const LevySpec& levy, std::uint32_t step,
                       const std::function<double(double)>& gamma = nullptr);

/// Density of a compound Poisson sum at time t on a grid: continuous part
/// values plus the separate atom weight e^{-lambda t} at zero.
struct CompoundPoissonDensity {
    GridSpec grid;
    Eigen::ArrayXd values;
    double atom_weight = 1.0;

    double continuous_mass() const { return trapz(values, grid.delta()); }
    double total_mass() const { return atom_weight + continuous_mass(); }
};

/// Truncated Poisson series sum_k e^{-lt}(lt)^k/k! mark^{*k}, K chosen so the
/// Poisson tail mass is < 1e-10; convolution powers by grid quadrature.
CompoundPoissonDensity compound_poisson_density(const LevySpec& levy, double t,
                                                const GridSpec& grid);

}  // namespace qmfg
