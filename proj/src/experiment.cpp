#include "qmfg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qmfg/density.hpp"
#include "qmfg/market.hpp"
#include "qmfg/particles.hpp"
#include "qmfg/util.hpp"

namespace qmfg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Named scenarios

namespace {

std::string gaussian_null_json() {
    return R"({
  "coeffs": {
    "drift": {"name": "zero"},
    "diff_idio": {"name": "const", "value": 1.0},
    "diff_common": {"name": "zero"},
    "jump_gamma": {"name": "zero"}
  },
  "levy": {"intensity": 0.0, "mark": {"name": "point", "theta0": 0.0}},
  "f": 0.8413,
  "horizon": 3.0,
  "dt": 0.001,
  "n_particles": 100000,
  "initial_law": {"name": "gaussian", "mu": 0.0, "sigma": 1.0},
  "state_grid": {"lo": -14.0, "hi": 14.0, "n_cells": 1401},
  "seed": 20260808,
  "control_policy": {"name": "zero"}
})";
}

std::string ou_json() {
    return R"({
  "coeffs": {
    "drift": {"name": "ou", "alpha": 1.0},
    "diff_idio": {"name": "const", "value": 1.4142135623730951},
    "diff_common": {"name": "const", "value": 0.3},
    "jump_gamma": {"name": "zero"}
  },
  "levy": {"intensity": 0.0, "mark": {"name": "point", "theta0": 0.0}},
  "f": 0.8413,
  "horizon": 1.0,
  "dt": 0.001,
  "n_particles": 100000,
  "initial_law": {"name": "point", "value": 0.0},
  "state_grid": {"lo": -8.0, "hi": 8.0, "n_cells": 801},
  "seed": 20260808,
  "control_policy": {"name": "quantile_tracking"}
})";
}

std::string tanh_json() {
    return R"({
  "coeffs": {
    "drift": {"name": "tanh", "delta": 1.0},
    "diff_idio": {"name": "const", "value": 1.0},
    "diff_common": {"name": "const", "value": 0.2},
    "jump_gamma": {"name": "mark"}
  },
  "levy": {"intensity": 1.0, "mark": {"name": "uniform", "lo": -1.0, "hi": 1.0}, "delta_max": 2.0},
  "f": 0.7,
  "horizon": 1.0,
  "dt": 0.0005,
  "n_particles": 20000,
  "initial_law": {"name": "point", "value": 0.0},
  "state_grid": {"lo": -10.0, "hi": 10.0, "n_cells": 2001},
  "seed": 20260808,
  "control_policy": {"name": "zero"}
})";
}

std::string jump_drift_free_json() {
    return R"({
  "coeffs": {
    "drift": {"name": "zero"},
    "diff_idio": {"name": "const", "value": 1.0},
    "diff_common": {"name": "const", "value": 0.2},
    "jump_gamma": {"name": "mark"}
  },
  "levy": {"intensity": 1.0, "mark": {"name": "uniform", "lo": -1.0, "hi": 1.0}, "delta_max": 2.0},
  "f": 0.7,
  "horizon": 1.0,
  "dt": 0.001,
  "n_particles": 100000,
  "initial_law": {"name": "point", "value": 0.0},
  "state_grid": {"lo": -12.0, "hi": 12.0, "n_cells": 1201},
  "seed": 20260808,
  "control_policy": {"name": "zero"}
})";
}

}  // namespace

bool has_closed_form(const std::string& name) {
    return name == "gaussian_null" || name == "ou" || name == "tanh" ||
           name == "jump_drift_free";
}

Scenario named_scenario(const std::string& name) {
    if (name == "gaussian_null") return scenario_from_json(gaussian_null_json());
    if (name == "ou") return scenario_from_json(ou_json());
    if (name == "tanh") return scenario_from_json(tanh_json());
    if (name == "jump_drift_free") return scenario_from_json(jump_drift_free_json());
    throw std::invalid_argument("unknown scenario name: " + name);
}

// ---------------------------------------------------------------------------
// Config

namespace {

QuantileMethod route_from_string(const std::string& s) {
    if (s == "particle") return QuantileMethod::particle;
    if (s == "sde") return QuantileMethod::sde;
    if (s == "ode") return QuantileMethod::ode;
    if (s == "closed_form") return QuantileMethod::closed_form;
    if (s == "fpk") return QuantileMethod::fpk;
    throw std::invalid_argument("unknown route: " + s);
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    ExperimentConfig cfg;
    if (j.at("scenario").is_string()) {
        cfg.scenario_name = j.at("scenario").get<std::string>();
        cfg.scenario = named_scenario(cfg.scenario_name);
    } else {
        cfg.scenario = scenario_from_json(j.at("scenario").dump());
    }
    if (j.contains("overrides")) {
        json desc = json::parse(cfg.scenario.desc);
        for (auto it = j.at("overrides").begin(); it != j.at("overrides").end(); ++it)
            desc[it.key()] = it.value();
        cfg.scenario = scenario_from_json(desc.dump());
    }
    cfg.routes.clear();
    for (const auto& r : j.at("routes")) cfg.routes.insert(route_from_string(r.get<std::string>()));
    cfg.replications = j.value("replications", 1);
    if (cfg.replications < 1)
        throw std::invalid_argument("experiment config: replications must be >= 1");
    cfg.output_dir = j.value("output_dir", std::string("."));
    cfg.record_snapshots = j.value("record_snapshots", false);
    cfg.compare_points = j.value("compare_points", 65);
    return cfg;
}

// ---------------------------------------------------------------------------
// Closed forms and scores per named scenario

namespace {

std::vector<std::size_t> checkpoint_indices(std::size_t n, int wanted) {
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    const std::size_t count = std::min<std::size_t>(std::size_t(std::max(2, wanted)), n);
    for (std::size_t k = 0; k < count; ++k)
        idx.push_back(k * (n - 1) / (count - 1));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

QuantilePath closed_form_path(const std::string& name, const Scenario& scn,
                              const std::vector<double>& times,
                              const std::vector<double>& common, int compare_points) {
    const json desc = json::parse(scn.desc);
    QuantilePath path;
    path.f = scn.f;
    path.method = QuantileMethod::closed_form;

    if (name == "gaussian_null") {
        const double mu0 = scn.initial_law.mean();
        const double sd0 = scn.initial_law.stddev();
        const double sig = desc.at("coeffs").at("diff_idio").value("value", 0.0);
        path.times = times;
        path.common_path = common;
        path.values.resize(times.size());
        for (std::size_t k = 0; k < times.size(); ++k)
            path.values[k] =
                gaussian_quantile(mu0, std::sqrt(sd0 * sd0 + sig * sig * times[k]), scn.f);
        return path;
    }
    if (name == "ou") {
        const double alpha = desc.at("coeffs").at("drift").at("alpha").get<double>();
        const double sig = desc.at("coeffs").at("diff_idio").value("value", 0.0);
        const double sigo = desc.at("coeffs").at("diff_common").value("value", 0.0);
        return ou_quantile_closed_form(
            alpha, [sig](double) { return sig; }, [sigo](double) { return sigo; },
            scn.initial_law, scn.f, times, common);
    }
    if (name == "jump_drift_free") {
        const double sigo = desc.at("coeffs").at("diff_common").value("value", 0.0);
        const auto idx = checkpoint_indices(times.size(), compare_points);
        std::vector<double> ct, cb;
        for (auto i : idx) {
            ct.push_back(times[i]);
            cb.push_back(common[i]);
        }
        return jump_free_drift_quantile_path(sigo, scn.levy, scn.f, ct, cb);
    }
    if (name == "tanh") {
        const double delta = desc.at("coeffs").at("drift").at("delta").get<double>();
        const double sigo = desc.at("coeffs").at("diff_common").value("value", 0.0);
        const double s0 = scn.initial_law.mean();
        const auto idx = checkpoint_indices(times.size(), compare_points);
        path.times.clear();
        path.values.clear();
        path.common_path.clear();
        for (auto i : idx) {
            const double t = times[i];
            if (t == 0.0) {
                path.values.push_back(s0 + sigo * common[i]);
            } else {
                const TanhDensity td = tanh_closed_form_density(delta, scn.levy, t,
                                                                scn.state_grid, s0,
                                                                sigo * common[i]);
                path.values.push_back(td.field.quantile(scn.f));
            }
            path.times.push_back(t);
            path.common_path.push_back(common[i]);
        }
        return path;
    }
    throw std::invalid_argument("no closed form for scenario: " + name);
}

ScoreSource make_score(const std::string& name, const Scenario& scn) {
    if (name == "gaussian_null") {
        const json desc = json::parse(scn.desc);
        const double mu0 = scn.initial_law.mean();
        const double sd0 = scn.initial_law.stddev();
        const double sig = desc.at("coeffs").at("diff_idio").value("value", 0.0);
        return ScoreSource::analytic([mu0, sd0, sig](double t, double x) {
            return -(x - mu0) / (sd0 * sd0 + sig * sig * t);
        });
    }
    if (name == "ou") {
        const json desc = json::parse(scn.desc);
        const double alpha = desc.at("coeffs").at("drift").at("alpha").get<double>();
        const double sig = desc.at("coeffs").at("diff_idio").value("value", 0.0);
        const double sd0 = scn.initial_law.stddev();
        const double Q = inv_norm_cdf(scn.f);
        return ScoreSource::analytic([alpha, sig, sd0, Q](double t, double x) {
            (void)x;  // valid along the quantile trajectory
            const OuVariance ov = ou_variance(alpha, [sig](double) { return sig; }, t);
            const double var = std::exp(-2.0 * alpha * t) * sd0 * sd0 +
                               ov.sigma_nc * ov.sigma_nc;
            if (var <= 0.0) return 0.0;
            return -Q / std::sqrt(var);
        });
    }
    return ScoreSource::particle_kde(scn, MollifierSpec::silverman());
}

struct FpkRouteResult {
    QuantilePath path;
    DensityField terminal;
};

FpkRouteResult fpk_route(const Scenario& scn) {
    // Initial field: the initial law on the state grid (a point mass is
    // smoothed over three cells).
    const GridSpec grid = scn.state_grid;
    Eigen::ArrayXd v0(grid.n);
    const double sd0 = std::max(scn.initial_law.stddev(), 3.0 * grid.delta());
    const double mu0 = scn.initial_law.mean();
    for (int i = 0; i < grid.n; ++i) {
        const double z = (grid.point(i) - mu0) / sd0;
        v0(i) = std::exp(-0.5 * z * z);
    }
    DensityField field = DensityField::normalized(grid, std::move(v0), 0.0);

    QuantilePath path;
    path.f = scn.f;
    path.method = QuantileMethod::fpk;

    // CFL may force substeps; the common increment of one scenario step is
    // split evenly across them (linear interpolation of the path).
    double max_sig2 = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.point(i);
        const double a = scn.control_policy.eval(0.0, x, mu0);
        const double sg = scn.coeffs.diff_idio(0.0, x, mu0, a);
        const double so = scn.coeffs.diff_common(0.0, x, mu0, a);
        max_sig2 = std::max(max_sig2, sg * sg + so * so);
    }
    const double dx = grid.delta();
    const double dt_cfl = 0.45 * dx * dx / std::max(max_sig2, 1e-300);
    const int substeps = std::max(1, int(std::ceil(scn.dt / dt_cfl)));

    Scenario sub = scn;
    sub.dt = scn.dt / double(substeps);

    const NoisePlan common{scn.seed, 0, scn.dt};
    double B = 0.0;
    path.times.push_back(0.0);
    path.values.push_back(field.quantile(scn.f));
    path.common_path.push_back(0.0);
    const std::int64_t n_steps = scn.n_steps();
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double dB = brownian_increment(common, std::uint32_t(k));
        for (int s = 0; s < substeps; ++s)
            field = fpk_step(field, sub, dB / double(substeps));
        B += dB;
        path.times.push_back(double(k + 1) * scn.dt);
        path.values.push_back(field.quantile(scn.f));
        path.common_path.push_back(B);
    }
    return {std::move(path), std::move(field)};
}

RouteGap gap_between(const QuantilePath& a, const QuantilePath& b) {
    RouteGap g;
    g.a = method_name(a.method);
    g.b = method_name(b.method);
    // Compare on the time intersection (closed forms may be on checkpoints).
    std::size_t ia = 0, ib = 0, count = 0;
    double sum_sq = 0.0;
    while (ia < a.times.size() && ib < b.times.size()) {
        const double ta = a.times[ia], tb = b.times[ib];
        if (std::abs(ta - tb) <= 1e-12) {
            const double d = std::abs(a.values[ia] - b.values[ib]);
            g.sup = std::max(g.sup, d);
            sum_sq += d * d;
            ++count;
            ++ia;
            ++ib;
        } else if (ta < tb) {
            ++ia;
        } else {
            ++ib;
        }
    }
    g.l2 = count > 0 ? std::sqrt(sum_sq / double(count)) : 0.0;
    return g;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    // Route/scenario compatibility first, before any computation.
    if (cfg.routes.count(QuantileMethod::closed_form) && !has_closed_form(cfg.scenario_name))
        throw std::invalid_argument(
            "run_experiment: the closed_form route needs a named scenario "
            "(gaussian_null, ou, tanh, jump_drift_free)");
    if (cfg.routes.count(QuantileMethod::ode)) {
        const auto& g = cfg.scenario.state_grid;
        for (int i = 0; i < 9; ++i) {
            const double x = g.lo + (g.hi - g.lo) * i / 8.0;
            const double a = cfg.scenario.control_policy.eval(0.0, x, x);
            if (cfg.scenario.coeffs.diff_common(0.0, x, x, a) != 0.0)
                throw std::invalid_argument(
                    "run_experiment: the ode route needs sigma_o identically zero");
        }
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::string label = cfg.scenario_name.empty() ? "custom" : cfg.scenario_name;

    ExperimentReport rep;
    rep.seed = cfg.scenario.seed;
    rep.version = kVersion;
    rep.scenario_hash = fnv1a64(cfg.scenario.desc);

    json jreport;
    jreport["scenario"] = label;
    jreport["scenario_hash"] = rep.scenario_hash;
    jreport["seed"] = rep.seed;
    jreport["version"] = rep.version;
    jreport["f"] = cfg.scenario.f;
    jreport["replications"] = json::array();

    for (int r = 0; r < cfg.replications; ++r) {
        Scenario scn = cfg.scenario;
        scn.seed = cfg.scenario.seed + std::uint64_t(r);

        const std::int64_t n_steps = scn.n_steps();
        std::vector<double> times(n_steps + 1), common(n_steps + 1);
        const NoisePlan plan0{scn.seed, 0, scn.dt};
        times[0] = 0.0;
        common[0] = 0.0;
        for (std::int64_t k = 0; k < n_steps; ++k) {
            times[k + 1] = double(k + 1) * scn.dt;
            common[k + 1] = common[k] + brownian_increment(plan0, std::uint32_t(k));
        }

        std::vector<QuantilePath> paths;
        for (QuantileMethod m : cfg.routes) {
            const auto t0 = std::chrono::steady_clock::now();
            QuantilePath p;
            switch (m) {
                case QuantileMethod::particle: {
                    SimulateOptions opts;
                    opts.record_snapshots = cfg.record_snapshots;
                    const TrajectoryRecord rec = simulate(scn, opts);
                    p.times = rec.times;
                    p.values = rec.quantile_path;
                    p.common_path = rec.common_path;
                    p.f = scn.f;
                    p.method = QuantileMethod::particle;
                    if (cfg.record_snapshots && r == 0) {
                        const std::string snap =
                            cfg.output_dir + "/" + label + "_snapshots.csv";
                        write_snapshots_csv(rec, snap);
                        rep.files.push_back(snap);
                    }
                    break;
                }
                case QuantileMethod::sde:
                    p = integrate_quantile_sde(scn, make_score(cfg.scenario_name, scn), plan0);
                    break;
                case QuantileMethod::ode:
                    p = integrate_quantile_ode(scn, make_score(cfg.scenario_name, scn));
                    break;
                case QuantileMethod::closed_form:
                    p = closed_form_path(cfg.scenario_name, scn, times, common,
                                         cfg.compare_points);
                    break;
                case QuantileMethod::fpk: {
                    FpkRouteResult fr = fpk_route(scn);
                    p = std::move(fr.path);
                    if (r == 0) {
                        const std::string dens = cfg.output_dir + "/" + label + "_density.csv";
                        write_density_csv(fr.terminal, dens);
                        rep.files.push_back(dens);
                    }
                    break;
                }
            }
            const auto t1 = std::chrono::steady_clock::now();
            rep.runtimes[method_name(m) + (r > 0 ? "_rep" + std::to_string(r) : "")] =
                std::chrono::duration<double>(t1 - t0).count();
            paths.push_back(std::move(p));
        }

        json jgaps = json::array();
        for (std::size_t i = 0; i < paths.size(); ++i)
            for (std::size_t j = i + 1; j < paths.size(); ++j) {
                const RouteGap g = gap_between(paths[i], paths[j]);
                if (r == 0) rep.gaps.push_back(g);
                jgaps.push_back({{"a", g.a}, {"b", g.b}, {"sup", g.sup}, {"l2", g.l2}});
            }

        const std::string suffix = r == 0 ? "" : "_rep" + std::to_string(r);
        for (const auto& p : paths) {
            const std::string file =
                cfg.output_dir + "/" + label + "_" + method_name(p.method) + suffix + ".csv";
            write_quantile_csv(p, file);
            rep.files.push_back(file);
        }

        json jrep;
        jrep["seed"] = scn.seed;
        jrep["gaps"] = jgaps;
        jreport["replications"].push_back(jrep);

        if (r == 0) rep.paths = std::move(paths);
    }

    const std::string report_file = cfg.output_dir + "/" + label + "_report.json";
    {
        std::ofstream os(report_file);
        if (!os) throw std::runtime_error("cannot open " + report_file);
        os << jreport.dump(2) << "\n";
    }
    rep.files.push_back(report_file);
    return rep;
}

SweepResult convergence_sweep(const ExperimentConfig& cfg,
                              const std::vector<std::int64_t>& n_list) {
    if (n_list.size() < 3)
        throw std::invalid_argument("convergence_sweep: need at least 3 particle counts");
    if (!has_closed_form(cfg.scenario_name))
        throw std::invalid_argument("convergence_sweep: scenario has no closed form");

    SweepResult res;
    for (std::int64_t n : n_list) {
        Scenario scn = cfg.scenario;
        scn.n_particles = n;

        const TrajectoryRecord rec = simulate(scn);
        QuantilePath particle;
        particle.times = rec.times;
        particle.values = rec.quantile_path;
        particle.common_path = rec.common_path;
        particle.f = scn.f;
        particle.method = QuantileMethod::particle;

        const QuantilePath closed = closed_form_path(cfg.scenario_name, scn, rec.times,
                                                     rec.common_path, cfg.compare_points);
        const RouteGap g = gap_between(particle, closed);
        res.rows.push_back({n, g.sup});
    }

    // least-squares slope of log gap vs log n
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = double(res.rows.size());
    for (const auto& row : res.rows) {
        const double x = std::log(double(row.n));
        const double y = std::log(std::max(row.sup_gap, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return res;
}

}  // namespace qmfg
