// Command-line front end: single runs, seed/strategy batches, and the
// exhaustive grid oracle.
#include "pier/rendezvous.hpp"
#include "pier/report.hpp"
#include "pier/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace pier;

std::vector<Vec2> parse_robot_list(const std::string& text) {
    // "x,y;x,y;..." in meters, world frame.
    std::vector<Vec2> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        double x = 0, y = 0;
        if (std::sscanf(item.c_str(), "%lf,%lf", &x, &y) != 2)
            throw CLI::ValidationError("--robots", "expected x,y pairs separated by ';'");
        out.emplace_back(x, y);
    }
    if (out.empty()) throw CLI::ValidationError("--robots", "no positions given");
    return out;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& strategy, bool no_heat, const std::string& out_dir, bool render) {
    ScenarioConfig cfg = ScenarioConfig::load_file(config_path);
    if (seed) cfg.seed = *seed;
    if (!strategy.empty()) cfg.sim.strategy = strategy_from_string(strategy);
    if (no_heat) cfg.sim.selection.omega2 = 0.0;

    std::shared_ptr<Simulation> sim;
    const Metrics m = run_scenario(cfg, &sim);
    write_metrics_csv(std::cout, {m});
    if (!out_dir.empty()) write_run_outputs(out_dir, m, *sim, render);
    if (m.timed_out) {
        std::cerr << "timeout before rendezvous\n";
        return 2;
    }
    return m.reached ? 0 : 1;
}

int cmd_batch(const std::string& config_path, const std::string& seed_range,
              const std::string& strategies, bool no_heat, const std::string& out_dir,
              int workers) {
    unsigned long seed_lo = 1, seed_hi = 1;
    if (std::sscanf(seed_range.c_str(), "%lu..%lu", &seed_lo, &seed_hi) != 2) {
        if (std::sscanf(seed_range.c_str(), "%lu", &seed_lo) == 1)
            seed_hi = seed_lo;
        else
            throw CLI::ValidationError("--seeds", "expected A..B or a single seed");
    }
    std::vector<std::string> strategy_list;
    std::stringstream in(strategies);
    std::string item;
    while (std::getline(in, item, ',')) strategy_list.push_back(item);
    if (strategy_list.empty()) strategy_list.push_back("pier");

    const ScenarioConfig base = ScenarioConfig::load_file(config_path);
    std::vector<ScenarioConfig> configs;
    for (unsigned long seed = seed_lo; seed <= seed_hi; ++seed) {
        for (const auto& strat : strategy_list) {
            ScenarioConfig cfg = base;
            cfg.seed = seed;
            cfg.sim.strategy = strategy_from_string(strat);
            if (no_heat) cfg.sim.selection.omega2 = 0.0;
            configs.push_back(std::move(cfg));
        }
    }
    const auto metrics = run_batch(configs, workers);
    const auto rows = aggregate(metrics);
    write_aggregate_csv(std::cout, rows);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream all(out_dir + "/metrics.csv");
        write_metrics_csv(all, metrics);
        std::ofstream agg(out_dir + "/aggregate.csv");
        write_aggregate_csv(agg, rows);
    }
    for (const auto& m : metrics)
        if (m.timed_out) return 2;
    return 0;
}

int cmd_oracle(const std::string& world_path, const std::string& robots,
               const std::string& out_path) {
    const World world = World::load_file(world_path);
    const auto positions = parse_robot_list(robots);
    for (const auto& p : positions)
        if (!world.free_at(p))
            throw CLI::ValidationError("--robots", "position not in free space");
    const GridOracle oracle(world, positions);
    std::cout << "p_star " << oracle.p_star().x() << " " << oracle.p_star().y() << "\n"
              << "f_star " << oracle.f_star() << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << "{\n  \"p_star\": [" << oracle.p_star().x() << ", " << oracle.p_star().y()
            << "],\n  \"f_star\": " << oracle.f_star() << "\n}\n";
    }
    return std::isfinite(oracle.f_star()) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-robot rendezvous simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, strategy, seeds = "1", strategies = "pier";
    std::string world_path, robots, oracle_out;
    std::optional<std::uint64_t> seed;
    bool no_heat = false, render = false;
    int workers = 0;

    auto* run = app.add_subcommand("run", "Run one scenario to rendezvous");
    run->add_option("--config", config_path, "Scenario file")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--strategy", strategy, "pier | nbv-only | full-coverage | grid-share");
    run->add_flag("--no-heat", no_heat, "Disable the heat term (omega2 = 0)");
    run->add_option("--out", out_dir, "Directory for metrics/events/volume/result outputs");
    run->add_flag("--render", render, "Also write an SVG map to the output directory");

    auto* batch = app.add_subcommand("batch", "Run a seed x strategy sweep");
    batch->add_option("--config", config_path, "Scenario file")->required();
    batch->add_option("--seeds", seeds, "Seed range A..B");
    batch->add_option("--strategies", strategies, "Comma-separated strategy list");
    batch->add_flag("--no-heat", no_heat, "Disable the heat term in every run");
    batch->add_option("--out", out_dir, "Directory for per-run and aggregate CSVs");
    batch->add_option("--workers", workers, "Parallel scenario workers (0 = auto)");

    auto* oracle = app.add_subcommand("oracle", "Exhaustive grid optimum for given positions");
    oracle->add_option("--world", world_path, "World file")->required();
    oracle->add_option("--robots", robots, "Positions x,y;x,y;...")->required();
    oracle->add_option("--out", oracle_out, "Optional JSON output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed, strategy, no_heat, out_dir, render);
        if (batch->parsed())
            return cmd_batch(config_path, seeds, strategies, no_heat, out_dir, workers);
        if (oracle->parsed()) return cmd_oracle(world_path, robots, oracle_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
