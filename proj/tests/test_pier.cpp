#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pier/partition.hpp"
#include "pier/scenario.hpp"
#include "test_util.hpp"

#include <algorithm>

using namespace pier;
using namespace pier::testutil;

namespace {

ScenarioConfig load(const std::string& name) {
    return ScenarioConfig::load_file(asset("scenarios/" + name));
}

std::uint64_t first_event_tick(const Metrics& m, const std::string& type, int skip = 0) {
    for (const auto& e : m.events) {
        if (e.type == type) {
            if (skip-- > 0) continue;
            return e.tick;
        }
    }
    return UINT64_MAX;
}

}  // namespace

TEST_CASE("voronoi region membership with lowest-id tie-break") {
    std::map<int, Vec2> positions{{1, {0.0, 0.0}}, {2, {10.0, 0.0}}};
    CHECK(voronoi_region_test({4.0, 0.0}, 1, positions));
    CHECK(!voronoi_region_test({4.0, 0.0}, 2, positions));
    CHECK(voronoi_region_test({5.0, 0.0}, 1, positions));  // equidistant: lower id
    CHECK(!voronoi_region_test({5.0, 0.0}, 2, positions));
    CHECK(voronoi_region_test({6.0, 0.0}, 2, positions));

    SUBCASE("singleton component owns everything") {
        std::map<int, Vec2> solo{{3, {1.0, 1.0}}};
        CHECK(voronoi_region_test({100.0, -50.0}, 3, solo));
    }
    SUBCASE("cover and disjointness over random points") {
        std::map<int, Vec2> comp{{0, {2.0, 3.0}}, {1, {8.0, 1.0}}, {2, {5.0, 9.0}}};
        const Partition part = make_partition(comp);
        SplitMix64 rng(12);
        for (int i = 0; i < 200; ++i) {
            const Vec2 p{rng.uniform(-5, 15), rng.uniform(-5, 15)};
            int owners = 0;
            for (const auto& [id, base] : comp) owners += voronoi_region_test(p, id, comp);
            CHECK(owners == 1);
            CHECK(part.owner_of(p) >= 0);
        }
    }
}

TEST_CASE("nbv center choice is argmin with (y, x) tie-break") {
    CHECK(select_min_cost_center({{3.0, {5, 5}}, {7.5, {1, 1}}}) == Vec2{5, 5});
    CHECK(select_min_cost_center({{2.0, {4, 9}}, {2.0, {4, 2}}}) == Vec2{4, 2});
    CHECK(select_min_cost_center({{2.0, {7, 3}}, {2.0, {1, 3}}}) == Vec2{1, 3});
    CHECK(!select_min_cost_center({}));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(!select_min_cost_center({{inf, {1, 1}}}));
}

TEST_CASE("single robot: connected at t0 = 0, no exploration, no traffic") {
    const Metrics m = run_scenario(load("room1.cfg"));
    CHECK(m.reached);
    CHECK(m.t0_s == 0.0);
    CHECK(m.t1_s == 0.0);
    CHECK(m.bytes_total == 0);
    CHECK(first_event_tick(m, "connected") == 0);
}

TEST_CASE("two adjacent robots connect within a fraction of coverage time") {
    ScenarioConfig cfg = load("rooms2.cfg");
    cfg.starts = {Pose2{4.125, 4.125, 0.0}, Pose2{6.625, 4.125, 0.0}};  // same room
    const Metrics pier = run_scenario(cfg);
    REQUIRE(pier.reached);

    ScenarioConfig coverage = cfg;
    coverage.sim.strategy = Strategy::FullCoverage;
    const Metrics full = run_scenario(coverage);
    REQUIRE(full.reached);
    CHECK(pier.t0_s < 0.2 * full.t0_s);
    CHECK(pier.counters.measurements >= 1);
}

TEST_CASE("office run reproduces the phase sequence") {
    std::shared_ptr<Simulation> sim;
    const Metrics m = run_scenario(load("office3.cfg"), &sim);
    REQUIRE(m.reached);
    REQUIRE(!m.timed_out);

    // NBV first: exploration events precede any merge.
    const std::uint64_t first_merge = first_event_tick(m, "components_merged");
    const std::uint64_t first_partition = first_event_tick(m, "partition_update");
    const std::uint64_t second_merge = first_event_tick(m, "components_merged", 1);
    const std::uint64_t connected = first_event_tick(m, "connected");
    REQUIRE(first_merge != UINT64_MAX);
    REQUIRE(first_partition != UINT64_MAX);
    REQUIRE(second_merge != UINT64_MAX);
    REQUIRE(connected != UINT64_MAX);
    CHECK(first_event_tick(m, "main_node") < first_merge);
    CHECK(first_merge <= first_partition);  // partition reacts to the merge
    CHECK(first_partition < second_merge);
    CHECK(second_merge == connected);  // three robots: the second merge connects

    SUBCASE("mode legality: partitioned only in components of two or more") {
        for (int i = 0; i < sim->robot_count(); ++i) {
            const auto& r = sim->robot(i);
            if (r.mode == Mode::Partitioned) CHECK(r.component.size() >= 2);
        }
    }
    SUBCASE("main-node spacing invariant on final maps") {
        REQUIRE(m.counters.fallback_nodes == 0);
        for (int i = 0; i < sim->robot_count(); ++i) {
            const auto& map = sim->robot(i).map;
            for (const auto& a : map.nodes()) {
                if (!a.is_main()) continue;
                for (const auto& b : map.nodes()) {
                    if (!b.is_main() || a.id >= b.id) continue;
                    const double sigma = sim->config().selection.sigma_c;
                    const double overlap =
                        std::exp(-(a.p - b.p).squaredNorm() / (sigma * sigma));
                    const double similarity = dot(a.features->phi, b.features->phi);
                    const bool both = overlap > sim->config().selection.gamma1 &&
                                      similarity >= sim->config().selection.theta_sim;
                    CHECK(!both);
                }
            }
        }
    }
    SUBCASE("rp graph soundness: measurements match ground truth frames") {
        REQUIRE(!sim->robot(0).measurements.empty());
        for (const auto& meas : sim->robot(0).measurements) {
            const Pose2 truth = sim->robot(meas.from_robot).frame.inverse() *
                                sim->robot(meas.to_robot).frame;
            const Pose2 err = meas.transform.inverse() * truth;
            CHECK(std::hypot(err.x, err.y) < 0.3);
            CHECK(std::abs(err.theta) < 5.0 * M_PI / 180.0);
        }
    }
    SUBCASE("every rect contains its node") {
        for (int i = 0; i < sim->robot_count(); ++i) {
            const auto& map = sim->robot(i).map;
            for (const auto& n : map.nodes()) CHECK(n.rect.contains(n.p));
            CHECK(map.main_count() >= 2);
        }
    }
}

TEST_CASE("all robots of a component compute identical partitions") {
    std::shared_ptr<Simulation> sim;
    const Metrics m = run_scenario(load("rooms2.cfg"), &sim);
    REQUIRE(m.reached);
    const auto& a = sim->robot(0);
    const auto& b = sim->robot(1);
    REQUIRE(a.component == b.component);
    REQUIRE(a.component_frames.size() == b.component_frames.size());
    for (const auto& [id, pose] : a.component_frames) {
        const Pose2& other = b.component_frames.at(id);
        CHECK(pose.x == other.x);  // bitwise: same inputs, same computation
        CHECK(pose.y == other.y);
        CHECK(pose.theta == other.theta);
    }
    REQUIRE(a.partition.bases.size() == b.partition.bases.size());
    for (std::size_t i = 0; i < a.partition.bases.size(); ++i) {
        CHECK(a.partition.bases[i].first == b.partition.bases[i].first);
        CHECK(a.partition.bases[i].second.x() == b.partition.bases[i].second.x());
        CHECK(a.partition.bases[i].second.y() == b.partition.bases[i].second.y());
    }
}

TEST_CASE("partition updates react to merges within one tick") {
    // Two robots: the first merge connects the graph, so the repartition
    // coincides with the rendezvous kickoff one tick later.
    const Metrics m = run_scenario(load("rooms2.cfg"));
    REQUIRE(m.reached);
    const std::uint64_t merge = first_event_tick(m, "components_merged");
    const std::uint64_t partition = first_event_tick(m, "partition_update");
    REQUIRE(merge != UINT64_MAX);
    REQUIRE(partition != UINT64_MAX);
    CHECK(partition >= merge);
    CHECK(partition <= merge + 1);
    CHECK(m.counters.partition_updates >= 2);  // both robots repartition

    // With three robots the first merge happens mid-exploration: the
    // partition must update before the second merge.
    const Metrics office = run_scenario(load("office3.cfg"));
    const std::uint64_t m1 = first_event_tick(office, "components_merged");
    const std::uint64_t p1 = first_event_tick(office, "partition_update");
    CHECK(p1 >= m1);
    CHECK(p1 <= m1 + 1);
}

TEST_CASE("sampled starts respect separation and free space") {
    const World w = World::load_file(asset("worlds/office.world"));
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto starts = sample_free_starts(w, 6, seed, 8.0);
        REQUIRE(starts.size() == 6);
        for (std::size_t i = 0; i < starts.size(); ++i) {
            CHECK(w.free_at(starts[i].position()));
            for (std::size_t j = i + 1; j < starts.size(); ++j)
                CHECK((starts[i].position() - starts[j].position()).norm() >= 4.0);
        }
        const auto again = sample_free_starts(w, 6, seed, 8.0);
        for (std::size_t i = 0; i < starts.size(); ++i) {
            CHECK(starts[i].x == again[i].x);
            CHECK(starts[i].y == again[i].y);
        }
    }
}
