#include "pier/controller.hpp"
#include "pier/rendezvous.hpp"
#include "pier/scenario.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace pier;

std::string asset(const std::string& rel) { return std::string(PIER_SOURCE_DIR) + "/" + rel; }

struct StudyFixture {
    World world;
    MergedMap merged;
    std::vector<Vec2> positions;

    StudyFixture() : world(World::load_file(asset("worlds/office.world"), 3)) {
        SimConfig cfg;
        cfg.selection.support_spacing = 2.0;
        cfg.speed = 2.0;
        cfg.timeout_s = 6000.0;
        const Pose2 start = sample_free_starts(world, 1, 42, 1.0).front();
        CoverageResult walk = run_coverage_walk(world, start, cfg);
        merged = merge_maps({walk.map}, {}, {{walk.map.owner(), walk.frame}});
        for (const auto& s : sample_free_starts(world, 8, 5, 10.0))
            positions.push_back(s.position());
    }
};

StudyFixture& fixture() {
    static StudyFixture f;
    return f;
}

// The sampling-based point selection against the exhaustive grid optimum:
// the speed gap is the point of the topological route.
void BM_SelectRendezvousPoint(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        RendezvousResult r = select_rendezvous_point(f.merged, f.positions, 2.0);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_SelectRendezvousPoint)->Unit(benchmark::kMillisecond);

void BM_GridOracle(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        GridOracle oracle(f.world, f.positions);
        benchmark::DoNotOptimize(oracle.f_star());
    }
}
BENCHMARK(BM_GridOracle)->Unit(benchmark::kMillisecond);

void BM_ComputeF(benchmark::State& state) {
    auto& f = fixture();
    const RendezvousEvaluator eval(f.merged, f.positions);
    double x = 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval.evaluate({x, 7.5}));
        x = 10.0 + std::fmod(x, 20.0);
    }
}
BENCHMARK(BM_ComputeF);

}  // namespace
