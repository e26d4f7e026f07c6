#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qmfg/experiment.hpp"
#include "qmfg/market.hpp"
#include "qmfg/model.hpp"
#include "qmfg/particles.hpp"
#include "qmfg/util.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int cmd_validate(const std::string& file) {
    const qmfg::Scenario scn = qmfg::scenario_from_json(slurp(file));
    const qmfg::ValidationReport rep = qmfg::validate_scenario(scn);
    std::cout << rep.to_string();
    return rep.valid() ? 0 : 1;
}

struct GridOverride {
    double lo = 0.0, hi = 0.0;
    int cells = 0;
    bool any() const { return cells > 0 || lo != hi; }
};

void apply_grid_override(qmfg::ExperimentConfig& cfg, const GridOverride& g) {
    if (!g.any()) return;
    nlohmann::json desc = nlohmann::json::parse(cfg.scenario.desc);
    if (g.lo != g.hi) {
        desc["state_grid"]["lo"] = g.lo;
        desc["state_grid"]["hi"] = g.hi;
    }
    if (g.cells > 0) desc["state_grid"]["n_cells"] = g.cells;
    cfg.scenario = qmfg::scenario_from_json(desc.dump());
}

int cmd_run(const std::string& file, const GridOverride& grid) {
    qmfg::ExperimentConfig cfg = qmfg::experiment_config_from_json(slurp(file));
    apply_grid_override(cfg, grid);
    const qmfg::ValidationReport rep = qmfg::validate_scenario(cfg.scenario);
    if (!rep.valid()) {
        std::cerr << rep.to_string();
        return 1;
    }
    const qmfg::ExperimentReport out = qmfg::run_experiment(cfg);
    std::cout << "scenario hash: " << out.scenario_hash << "\n";
    for (const auto& [route, secs] : out.runtimes)
        std::cout << "route " << route << ": " << secs << " s\n";
    for (const auto& g : out.gaps)
        std::cout << "gap " << g.a << " vs " << g.b << ": sup=" << g.sup << " l2=" << g.l2
                  << "\n";
    for (const auto& f : out.files) std::cout << "wrote " << f << "\n";
    return 0;
}

int cmd_sweep(const std::string& file, const std::string& n_csv) {
    qmfg::ExperimentConfig cfg = qmfg::experiment_config_from_json(slurp(file));
    std::vector<std::int64_t> ns;
    std::stringstream ss(n_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) ns.push_back(std::stoll(tok));
    const qmfg::SweepResult res = qmfg::convergence_sweep(cfg, ns);
    std::cout << "n,sup_gap\n";
    for (const auto& row : res.rows)
        std::cout << row.n << "," << qmfg::fmt17(row.sup_gap) << "\n";
    std::cout << "log-log slope: " << res.slope << "\n";
    return 0;
}

int cmd_auction(const std::string& bids_csv, std::int64_t nbar) {
    std::ifstream is(bids_csv);
    if (!is) throw std::runtime_error("cannot read " + bids_csv);
    qmfg::AuctionRound round;
    round.nbar = nbar;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.find("bid") != std::string::npos) continue;
        }
        round.bids.push_back(std::stod(line));
    }
    const qmfg::ClearingResult res = qmfg::clearing_price(round);
    nlohmann::json j;
    j["log_price"] = res.log_price;
    j["winners"] = res.winners;
    j["f"] = double(round.nbar) / double(round.bids.size());
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantile-coupled mean-field simulation toolkit"};
    app.require_subcommand(1);

    std::string scenario_file, config_file, sweep_ns = "1000,10000,100000", bids_file;
    std::int64_t nbar = 1;

    auto* validate = app.add_subcommand("validate", "validate a scenario JSON file");
    validate->add_option("scenario", scenario_file, "scenario JSON")->required();

    auto* run = app.add_subcommand("run", "run the configured quantile routes");
    run->add_option("config", config_file, "experiment config JSON")->required();
    GridOverride grid;
    run->add_option("--grid-lo", grid.lo, "override state grid lower edge");
    run->add_option("--grid-hi", grid.hi, "override state grid upper edge");
    run->add_option("--grid-cells", grid.cells, "override state grid cell count");

    auto* sweep = app.add_subcommand("sweep", "particle-count convergence sweep");
    sweep->add_option("config", config_file, "experiment config JSON")->required();
    sweep->add_option("--n", sweep_ns, "comma-separated particle counts");

    auto* auction = app.add_subcommand("auction", "clear one auction round from a bid CSV");
    auction->add_option("bids", bids_file, "CSV with one bid per line (header 'bid')")
        ->required();
    auction->add_option("--nbar", nbar, "number of winners")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(scenario_file);
        if (run->parsed()) return cmd_run(config_file, grid);
        if (sweep->parsed()) return cmd_sweep(config_file, sweep_ns);
        if (auction->parsed()) return cmd_auction(bids_file, nbar);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
