#include "pier/relpose.hpp"
#include "pier/world.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace pier;

std::string asset(const std::string& rel) { return std::string(PIER_SOURCE_DIR) + "/" + rel; }

void BM_IcpAlign(benchmark::State& state) {
    const World world = World::load_file(asset("worlds/rooms.world"));
    const Scan target = raycast_scan(world, Pose2{6.0, 5.0, 0.0});
    const Scan query = raycast_scan(world, Pose2{6.5, 5.2, 0.0});
    for (auto _ : state) {
        IcpResult r = icp_align(query, target);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_IcpAlign);

void BM_PgoSolve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SplitMix64 rng(5);
    std::vector<Pose2> truth(static_cast<std::size_t>(n));
    for (int i = 1; i < n; ++i)
        truth[i] = Pose2{rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-M_PI, M_PI)};
    PgoProblem problem;
    for (int i = 0; i < n; ++i) problem.robots.push_back(i);
    problem.omega = Eigen::Vector3d(4, 1, 1).asDiagonal();
    auto add = [&](int a, int b) {
        RpMeasurement m;
        m.from_robot = a;
        m.to_robot = b;
        m.transform = truth[a].inverse() * truth[b] *
                      Pose2{0.05 * rng.next_gaussian(), 0.05 * rng.next_gaussian(),
                            0.03 * rng.next_gaussian()};
        problem.measurements.push_back(m);
    };
    for (int i = 1; i < n; ++i) add(i - 1, i);
    add(0, n - 1);
    for (auto _ : state) {
        PgoResult r = pgo_solve(problem);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_PgoSolve)->Arg(3)->Arg(6)->Arg(8);

}  // namespace
