#pragma once

#include "pier/controller.hpp"
#include "pier/netsim.hpp"
#include "pier/world.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pier {

/// Flat key = value scenario description; unknown keys are rejected.
struct ScenarioConfig {
    std::string world_path;
    std::string name;  // defaults to the world file stem
    std::uint64_t seed = 1;
    std::uint64_t descriptor_seed = 7;
    std::vector<Pose2> starts;           // world frame, theta in radians
    std::vector<std::pair<int, int>> comm_edges;  // empty = fully connected
    SimConfig sim;

    static ScenarioConfig load_file(const std::string& path);
    static ScenarioConfig parse(std::istream& in, const std::string& base_dir);
};

struct Metrics {
    std::string world_name;
    Strategy strategy = Strategy::Pier;
    std::uint64_t seed = 0;
    int robots = 0;

    double t0_s = -1.0;
    double t1_s = -1.0;
    bool reached = false;
    bool timed_out = false;

    std::size_t bytes_total = 0;
    std::array<std::size_t, static_cast<std::size_t>(MessageKind::kCount)> bytes_by_kind{};

    // Rendezvous-point quality versus the exhaustive grid optimum.
    Vec2 p_hat_world{0.0, 0.0};
    double f_hat = 0.0;   // topological estimate used for selection
    Vec2 p_star{0.0, 0.0};
    double f_star = 0.0;
    double dist_err = 0.0;
    double path_err = 0.0;  // grid-evaluated F(p_hat) - F(p_star)

    SimCounters counters;
    std::vector<EventRow> events;
};

/// Build and run one scenario end to end; `sim_out`, when given, receives the
/// finished simulation for rendering or inspection.
Metrics run_scenario(const ScenarioConfig& config, std::shared_ptr<Simulation>* sim_out = nullptr,
                     const World* preloaded = nullptr);

struct AggregateRow {
    std::string strategy;
    int runs = 0;
    double t0_avg = 0, t0_std = 0, t0_median = 0;
    double t1_avg = 0, t1_std = 0, t1_median = 0;
    double volume_avg = 0, volume_std = 0, volume_median = 0;
};

/// Run scenarios (parallel across scenarios, each internally deterministic)
/// and aggregate by strategy.
std::vector<Metrics> run_batch(const std::vector<ScenarioConfig>& configs, int max_workers = 0);
std::vector<AggregateRow> aggregate(const std::vector<Metrics>& metrics);

/// Seeded random start placement: free cell centers with wall clearance,
/// pairwise separation at least min_separation_m, axis-aligned headings.
std::vector<Pose2> sample_free_starts(const World& world, int robots, std::uint64_t seed,
                                      double min_separation_m);

}  // namespace pier
