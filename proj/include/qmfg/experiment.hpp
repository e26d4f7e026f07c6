#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qmfg/model.hpp"
#include "qmfg/quantile.hpp"

namespace qmfg {

/// Scenarios with a closed-form quantile route, constructible by name.
/// Names: "gaussian_null", "ou", "tanh", "jump_drift_free".
Scenario named_scenario(const std::string& name);
bool has_closed_form(const std::string& name);

struct ExperimentConfig {
    Scenario scenario;
    std::string scenario_name;  // set when built from a named scenario
    std::set<QuantileMethod> routes = {QuantileMethod::particle};
    int replications = 1;
    std::string output_dir = ".";
    bool record_snapshots = false;
    int compare_points = 65;  // checkpoint count for expensive closed forms
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);

struct RouteGap {
    std::string a;
    std::string b;
    double sup = 0.0;
    double l2 = 0.0;
};

struct ExperimentReport {
    std::uint64_t scenario_hash = 0;
    std::uint64_t seed = 0;
    std::string version;
    std::vector<QuantilePath> paths;          // one per requested route
    std::vector<RouteGap> gaps;               // pairwise, on shared checkpoints
    std::map<std::string, double> runtimes;   // seconds per route (not persisted)
    std::vector<std::string> files;           // artifacts written
};

/// Runs every requested route against one shared common-noise stream
/// (stream 0 of the scenario seed), writes per-route CSV paths and a JSON
/// report into output_dir. Output bytes depend only on the config.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
    std::int64_t n = 0;
    double sup_gap = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope = 0.0;  // fitted log-log slope of gap vs n
};

/// Particle-vs-closed-form gap for each particle count; needs >= 3 counts and
/// a closed-form route for the scenario.
SweepResult convergence_sweep(const ExperimentConfig& cfg,
                              const std::vector<std::int64_t>& n_list);

}  // namespace qmfg
