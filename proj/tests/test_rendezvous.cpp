#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pier/rendezvous.hpp"
#include "pier/scenario.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace pier;
using namespace pier::testutil;

namespace {

// Straight-line map: nodes every `step` meters along y = 0, wide rects.
FhtMap line_map(int owner, double length, double step) {
    FhtMap map(owner);
    int prev = -1;
    for (double x = 0.0; x <= length + 1e-9; x += step) {
        const int id = map.add_node(x == 0.0 ? NodeKind::Main : NodeKind::Support, {x, 0.0},
                                    {x - step, x + step, -1.0, 1.0});
        if (prev >= 0) map.add_edge(prev, id);
        prev = id;
    }
    return map;
}

std::map<int, Pose2> identity_frames(const std::vector<int>& robots) {
    std::map<int, Pose2> frames;
    for (int r : robots) frames[r] = Pose2{};
    return frames;
}

}  // namespace

TEST_CASE("merging a single map is the identity") {
    const FhtMap map = line_map(0, 6.0, 2.0);
    const MergedMap merged = merge_maps({map}, {}, identity_frames({0}));
    CHECK(merged.nodes().size() == map.nodes().size());
    CHECK(merged.inter_robot_edges() == 0);
    CHECK(merged.connected());
}

TEST_CASE("merge rule 1: a measurement links observer and source nodes") {
    FhtMap a(0), b(1);
    a.add_node(NodeKind::Main, {0, 0}, {-1, 1, -1, 1});
    b.add_node(NodeKind::Main, {0, 0}, {-1, 1, -1, 1});  // placed at (10,0) via its frame

    RpMeasurement m;
    m.from_robot = 0;
    m.to_robot = 1;
    m.transform = Pose2{10.0, 0.0, 0.0};
    m.source_robot = 1;
    m.source_node = 0;
    m.observer_node = 0;

    std::map<int, Pose2> frames{{0, Pose2{}}, {1, Pose2{10.0, 0.0, 0.0}}};
    const MergedMap merged = merge_maps({a, b}, {m}, frames);
    REQUIRE(merged.nodes().size() == 2);
    CHECK(merged.inter_robot_edges() == 1);  // rects are far apart: rule 1 only
    CHECK(merged.connected());

    SUBCASE("without node endpoints no rule-1 edge appears") {
        RpMeasurement anon = m;
        anon.source_node = -1;
        anon.observer_node = -1;
        const MergedMap plain = merge_maps({a, b}, {anon}, frames);
        CHECK(plain.inter_robot_edges() == 0);
        CHECK(!plain.connected());
    }
}

TEST_CASE("merge rule 2: containment links nodes across maps") {
    FhtMap a(0), b(1);
    a.add_node(NodeKind::Support, {0, 0}, {-3, 3, -3, 3});
    b.add_node(NodeKind::Support, {0, 0}, {-0.5, 0.5, -0.5, 0.5});
    // Robot 1's frame drops its node at (1, 0): inside a's rectangle.
    std::map<int, Pose2> frames{{0, Pose2{}}, {1, Pose2{1.0, 0.0, 0.0}}};
    const MergedMap merged = merge_maps({a, b}, {}, frames);
    CHECK(merged.inter_robot_edges() == 1);
    CHECK(merged.connected());

    SUBCASE("rotated frames keep exact rectangle containment") {
        std::map<int, Pose2> rotated{{0, Pose2{}}, {1, Pose2{2.9, 0.0, M_PI / 2}}};
        const MergedMap far = merge_maps({a, b}, {}, rotated);
        CHECK(far.inter_robot_edges() == 1);  // (2.9, 0) still inside a's rect
        std::map<int, Pose2> outside{{0, Pose2{}}, {1, Pose2{3.2, 0.0, M_PI / 2}}};
        CHECK(merge_maps({a, b}, {}, outside).inter_robot_edges() == 0);
    }
}

TEST_CASE("compute_F on a straight corridor") {
    const FhtMap map = line_map(0, 10.0, 2.0);
    const MergedMap merged = merge_maps({map}, {}, identity_frames({0}));
    const std::vector<Vec2> robots{{0.0, 0.0}, {10.0, 0.0}};

    CHECK(compute_F(merged, {5.0, 0.0}, robots) == doctest::Approx(5.0));
    CHECK(compute_F(merged, {0.0, 0.0}, robots) == doctest::Approx(10.0));
    CHECK(compute_F(merged, {10.0, 0.0}, robots) == doctest::Approx(10.0));

    SUBCASE("single robot at the point gives zero") {
        CHECK(compute_F(merged, {4.0, 0.0}, {{4.0, 0.0}}) == doctest::Approx(0.0));
    }
    SUBCASE("F equals the max of the per-robot path lengths") {
        const RendezvousEvaluator eval(merged, robots);
        const Vec2 p{3.0, 0.5};
        const auto per = eval.per_robot(p);
        CHECK(eval.evaluate(p) == doctest::Approx(std::max(per[0], per[1])));
    }
    SUBCASE("unattachable points evaluate to infinity") {
        CHECK(std::isinf(compute_F(merged, {50.0, 50.0}, robots)));
    }
}

TEST_CASE("select_rendezvous_point finds the corridor midpoint") {
    const FhtMap map = line_map(0, 10.0, 2.0);
    const MergedMap merged = merge_maps({map}, {}, identity_frames({0}));
    const std::vector<Vec2> robots{{0.0, 0.0}, {10.0, 0.0}};
    const RendezvousResult r = select_rendezvous_point(merged, robots, 2.0);
    CHECK(r.p_hat.x() == doctest::Approx(5.0).epsilon(0.26));  // within half a sample
    CHECK(r.f_value == doctest::Approx(5.0).epsilon(0.08));
    CHECK(r.samples_evaluated > merged.nodes().size());
    CHECK(r.per_robot_lengths.size() == 2);

    SUBCASE("the returned F matches a re-evaluation at the returned point") {
        CHECK(compute_F(merged, r.p_hat, robots) == doctest::Approx(r.f_value));
    }
    SUBCASE("single robot degenerates to its own position") {
        const RendezvousResult solo = select_rendezvous_point(merged, {{4.0, 0.0}}, 2.0);
        CHECK(solo.f_value == doctest::Approx(0.0).epsilon(1e-9));
        CHECK((solo.p_hat - Vec2{4.0, 0.0}).norm() < 0.51);
    }
    SUBCASE("densifying the samples never increases F") {
        const RendezvousResult fine = select_rendezvous_point(merged, robots, 4.0);
        CHECK(fine.f_value <= r.f_value + 1e-12);
    }
}

TEST_CASE("symmetric cross: four robots meet at the junction") {
    // Plus-shaped map centered at (5, 5), arms of 4 m.
    FhtMap map(0);
    const int c = map.add_node(NodeKind::Main, {5, 5}, {4, 6, 4, 6});
    const struct {
        Vec2 dir;
    } arms[] = {{{1, 0}}, {{-1, 0}}, {{0, 1}}, {{0, -1}}};
    std::vector<Vec2> robots;
    for (const auto& arm : arms) {
        int prev = c;
        for (int k = 1; k <= 2; ++k) {
            const Vec2 p = Vec2{5, 5} + 2.0 * k * arm.dir;
            const Rect rect{p.x() - 2 * std::abs(arm.dir.x()) - 0.8 * std::abs(arm.dir.y()),
                            p.x() + 2 * std::abs(arm.dir.x()) + 0.8 * std::abs(arm.dir.y()),
                            p.y() - 2 * std::abs(arm.dir.y()) - 0.8 * std::abs(arm.dir.x()),
                            p.y() + 2 * std::abs(arm.dir.y()) + 0.8 * std::abs(arm.dir.x())};
            const int id = map.add_node(NodeKind::Support, p, rect);
            map.add_edge(prev, id);
            prev = id;
        }
        robots.push_back(Vec2{5, 5} + 4.0 * arm.dir);
    }
    const MergedMap merged = merge_maps({map}, {}, identity_frames({0}));
    const RendezvousResult r = select_rendezvous_point(merged, robots, 2.0);
    CHECK((r.p_hat - Vec2{5, 5}).norm() <= 0.51);
    CHECK(r.f_value == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("grid oracle on the corridor world") {
    const World w = World::load_file(asset("worlds/corridor.world"));
    SUBCASE("single robot: its own cell, F = 0") {
        const GridOracle oracle(w, {{10.0, 2.0}});
        CHECK(oracle.f_star() == doctest::Approx(0.0));
        CHECK((oracle.p_star() - Vec2{10.0, 2.0}).norm() < 0.26);
    }
    SUBCASE("two robots 10 m apart: middle cell, F = 5 within a cell") {
        const GridOracle oracle(w, {{10.0, 2.0}, {20.0, 2.0}});
        CHECK(oracle.p_star().x() == doctest::Approx(15.0).epsilon(0.05));
        CHECK(oracle.f_star() == doctest::Approx(5.0).epsilon(0.06));
    }
    SUBCASE("the oracle minimum lower-bounds any evaluated point") {
        const GridOracle oracle(w, {{4.0, 2.0}, {26.0, 2.0}});
        SplitMix64 rng(77);
        for (int i = 0; i < 50; ++i) {
            const Vec2 p{rng.uniform(1.0, 29.0), rng.uniform(0.5, 3.5)};
            const double f = oracle.evaluate(p);
            if (std::isfinite(f)) CHECK(f >= oracle.f_star() - w.resolution());
        }
    }
}

TEST_CASE("end-to-end: selected point quality and travel on a shipped run") {
    const Metrics m =
        run_scenario(ScenarioConfig::load_file(asset("scenarios/corridor2.cfg")));
    REQUIRE(m.reached);
    CHECK(m.path_err >= 0.0);
    CHECK(m.path_err < 1.0);
    CHECK(std::isfinite(m.f_hat));
    // Straight corridor travel: t1 - t0 close to max path length / speed.
    const double travel = m.t1_s - m.t0_s;
    CHECK(travel >= 0.0);
    CHECK(travel < 60.0);
}
