#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qmfg/experiment.hpp"
#include "qmfg/model.hpp"

using namespace qmfg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(bool(is));
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

ExperimentConfig small_config(const std::string& name, std::int64_t n, double horizon,
                              double dt, const std::string& dir) {
    ExperimentConfig cfg;
    cfg.scenario_name = name;
    cfg.scenario = named_scenario(name);
    cfg.scenario.n_particles = n;
    cfg.scenario.horizon = horizon;
    cfg.scenario.dt = dt;
    cfg.output_dir = dir;
    return cfg;
}

}  // namespace

TEST_CASE("named scenarios validate cleanly") {
    for (const char* name : {"gaussian_null", "ou", "tanh", "jump_drift_free"}) {
        const Scenario s = named_scenario(name);
        const ValidationReport rep = validate_scenario(s);
        INFO(name, ": ", rep.to_string());
        CHECK(rep.valid());
    }
    CHECK_THROWS_AS(named_scenario("nope"), std::invalid_argument);
}

TEST_CASE("run_experiment: single route writes one path and no gaps") {
    ExperimentConfig cfg = small_config("gaussian_null", 400, 0.1, 1e-2, "test_out/single");
    cfg.routes = {QuantileMethod::particle};
    const ExperimentReport rep = run_experiment(cfg);
    CHECK(rep.paths.size() == 1);
    CHECK(rep.gaps.empty());
    CHECK(std::filesystem::exists("test_out/single/gaussian_null_particle.csv"));
    CHECK(std::filesystem::exists("test_out/single/gaussian_null_report.json"));
}

TEST_CASE("run_experiment: same seed reruns are byte-identical") {
    ExperimentConfig cfg = small_config("ou", 500, 0.1, 1e-2, "test_out/rerun_a");
    cfg.routes = {QuantileMethod::particle, QuantileMethod::closed_form};
    const ExperimentReport rep1 = run_experiment(cfg);
    CHECK_FALSE(rep1.gaps.empty());

    cfg.output_dir = "test_out/rerun_b";
    run_experiment(cfg);
    for (const char* file :
         {"ou_particle.csv", "ou_closed_form.csv", "ou_report.json"}) {
        CHECK(slurp("test_out/rerun_a/" + std::string(file)) ==
              slurp("test_out/rerun_b/" + std::string(file)));
    }
}

TEST_CASE("run_experiment: worker count does not change the artifacts") {
    ExperimentConfig cfg = small_config("jump_drift_free", 600, 0.1, 1e-2, "test_out/thr1");
    cfg.routes = {QuantileMethod::particle};
    setenv("QMFG_THREADS", "1", 1);
    run_experiment(cfg);
    cfg.output_dir = "test_out/thr2";
    setenv("QMFG_THREADS", "8", 1);
    run_experiment(cfg);
    unsetenv("QMFG_THREADS");
    CHECK(slurp("test_out/thr1/jump_drift_free_particle.csv") ==
          slurp("test_out/thr2/jump_drift_free_particle.csv"));
}

TEST_CASE("run_experiment: closed form on an unnamed scenario fails fast") {
    ExperimentConfig cfg = small_config("gaussian_null", 100, 0.1, 1e-2, "test_out/bad");
    cfg.scenario_name.clear();  // treat as custom
    cfg.routes = {QuantileMethod::closed_form};
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("named scenario"),
                         std::invalid_argument);
    CHECK_FALSE(std::filesystem::exists("test_out/bad/custom_closed_form.csv"));
}

TEST_CASE("run_experiment: ode route demands zero common diffusion") {
    ExperimentConfig cfg = small_config("ou", 100, 0.1, 1e-2, "test_out/ode");
    cfg.routes = {QuantileMethod::ode};
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("experiment config: named scenario with overrides") {
    const char* text = R"({
      "scenario": "gaussian_null",
      "routes": ["particle", "closed_form"],
      "replications": 1,
      "output_dir": "test_out/cfg",
      "overrides": {"n_particles": 1234, "dt": 0.01, "horizon": 0.5, "seed": 9}
    })";
    const ExperimentConfig cfg = experiment_config_from_json(text);
    CHECK(cfg.scenario.n_particles == 1234);
    CHECK(cfg.scenario.dt == 0.01);
    CHECK(cfg.scenario.horizon == 0.5);
    CHECK(cfg.scenario.seed == 9);
    CHECK(cfg.routes.count(QuantileMethod::closed_form) == 1);
    CHECK_THROWS_AS(experiment_config_from_json(R"({"scenario": "x", "routes": []})"),
                    std::invalid_argument);
}

TEST_CASE("convergence_sweep: decreasing gaps, sane slope, small-list guard") {
    ExperimentConfig cfg = small_config("gaussian_null", 0, 2.0, 1e-2, "test_out/sweep");
    CHECK_THROWS_WITH_AS(convergence_sweep(cfg, {100, 1000}), doctest::Contains("at least 3"),
                         std::invalid_argument);

    const SweepResult res = convergence_sweep(cfg, {500, 5000, 50'000});
    REQUIRE(res.rows.size() == 3);
    CHECK(res.rows[0].sup_gap > res.rows[2].sup_gap);
    CHECK(res.slope < -0.1);
    CHECK(res.slope > -1.2);

    // a second seed produces a compatible rate estimate
    cfg.scenario.seed += 1;
    const SweepResult res2 = convergence_sweep(cfg, {500, 5000, 50'000});
    CHECK(std::abs(res2.slope - res.slope) < 0.2);
}

TEST_CASE("run_experiment: fpk route tracks the closed form on the dilating Gaussian") {
    ExperimentConfig cfg = small_config("gaussian_null", 2000, 0.25, 0.05, "test_out/fpk");
    // coarse particle count; the density route does the work here
    cfg.routes = {QuantileMethod::fpk, QuantileMethod::closed_form};
    const ExperimentReport rep = run_experiment(cfg);
    REQUIRE(rep.gaps.size() == 1);
    CHECK(rep.gaps[0].sup < 0.05);
}
