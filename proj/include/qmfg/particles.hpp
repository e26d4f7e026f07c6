#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "qmfg/model.hpp"
#include "qmfg/stochastics.hpp"

namespace qmfg {

/// n interacting particles at one time step plus the accumulated common-noise
/// quantities shared by all of them.
struct ParticleEnsemble {
    Eigen::ArrayXd states;
    double t = 0.0;
    double quantile_value = 0.0;
    double common_sum = 0.0;        // sum of dB_o increments so far
    double sigma_common_sum = 0.0;  // sum of sigma_o(t, q, q, a) dB_o increments
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> quantile_path;
    std::vector<double> common_path;  // B_o(t_k), starts at 0
    std::vector<double> moment_path;  // (1/n) sum |s_i|
    std::vector<double> snapshot_times;
    std::vector<Eigen::ArrayXd> snapshots;
    bool finite = true;
    std::string error;
};

/// k-th smallest state with k = ceil(f n): the inf-rule quantile of the
/// empirical distribution. Throws on an empty sample.
double empirical_quantile(const Eigen::ArrayXd& states, double f);

/// Order-statistic rank used by empirical_quantile (1-based).
std::int64_t quantile_rank(std::int64_t n, double f);

/// i.i.d. initial states from the scenario's initial law, quantile included.
ParticleEnsemble init_ensemble(const Scenario& scn);

/// One explicit Euler-Maruyama step: all coefficients at the pre-step state
/// and pre-step quantile, one shared common increment (stream 0), per-particle
/// idiosyncratic noise (stream i+1) and compensated jumps. Throws if a state
/// turns non-finite (names particle and step).
ParticleEnsemble step_ensemble(const ParticleEnsemble& e, const Scenario& scn,
                               std::uint32_t step);

struct SimulateOptions {
    bool record_snapshots = false;
    int max_snapshots = 65;
};

/// Runs horizon/dt steps. Deterministic per seed and independent of the
/// worker count. A mid-run explosion truncates the record, appends one NaN
/// sample and flags it instead of propagating.
TrajectoryRecord simulate(const Scenario& scn, const SimulateOptions& opts = {});

struct MomentBound {
    double sup = 0.0;
    bool finite = true;
};

/// Empirical counterpart of sup_t E[|s| + |m^f|] over the record.
MomentBound moment_bound_check(const TrajectoryRecord& rec);

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path);
void write_snapshots_csv(const TrajectoryRecord& rec, const std::string& path);

}  // namespace qmfg
