#include "pier/grid.hpp"
#include "pier/world.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace pier;

std::string asset(const std::string& rel) { return std::string(PIER_SOURCE_DIR) + "/" + rel; }

void BM_RaycastScan(benchmark::State& state) {
    const World world = World::load_file(asset("worlds/office.world"));
    const Pose2 pose{24.0, 7.5, 0.0};
    for (auto _ : state) {
        Scan scan = raycast_scan(world, pose);
        benchmark::DoNotOptimize(scan);
    }
}
BENCHMARK(BM_RaycastScan);

void BM_IntegrateScan(benchmark::State& state) {
    const World world = World::load_file(asset("worlds/office.world"));
    const Pose2 pose{24.0, 7.5, 0.0};
    const Scan scan = raycast_scan(world, pose);
    RobotGrid grid(world.resolution(), world.width_m() + world.height_m());
    for (auto _ : state) {
        integrate_scan(grid, Pose2{0, 0, 0}, scan);
        benchmark::DoNotOptimize(grid);
    }
}
BENCHMARK(BM_IntegrateScan);

void BM_DetectAndClusterFrontiers(benchmark::State& state) {
    const World world = World::load_file(asset("worlds/office.world"));
    RobotGrid grid(world.resolution(), world.width_m() + world.height_m());
    // Partially revealed map with a realistic frontier boundary.
    for (double x = 6.0; x < 42.0; x += 4.0) {
        const Pose2 pose{x, 7.5, 0.0};
        integrate_scan(grid, Pose2{x - 24.0, 0.0, 0.0}, raycast_scan(world, pose));
    }
    for (auto _ : state) {
        const auto cells = detect_frontiers(grid);
        auto centers = cluster_frontiers(grid, cells, 5);
        benchmark::DoNotOptimize(centers);
    }
}
BENCHMARK(BM_DetectAndClusterFrontiers);

void BM_DescriptorSample(benchmark::State& state) {
    const DescriptorField field(7);
    double x = 0.0;
    for (auto _ : state) {
        Descriptor d = field.sample({x, 2.0 * x});
        benchmark::DoNotOptimize(d);
        x += 0.01;
    }
}
BENCHMARK(BM_DescriptorSample);

}  // namespace
