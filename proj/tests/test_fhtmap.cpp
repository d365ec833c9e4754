#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pier/fhtmap.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace pier;
using namespace pier::testutil;

namespace {

Descriptor basis(int axis) {
    Descriptor d;
    d.values[axis % kDescriptorDim] = 1.0f;
    return d;
}

Descriptor mix(int a, int b, double wa) {
    Descriptor d;
    d.values[a] = static_cast<float>(wa);
    d.values[b] = static_cast<float>(std::sqrt(1.0 - wa * wa));
    return d;
}

std::shared_ptr<MainNodeData> features_with(const Descriptor& phi) {
    auto f = std::make_shared<MainNodeData>();
    f->phi = phi;
    return f;
}

Scan scan_with_openings(const std::vector<std::pair<int, int>>& open_sectors,
                        float open_range = 6.0f, float closed_range = 1.25f) {
    Scan s;
    s.ranges.fill(closed_range);
    for (const auto& [start, width] : open_sectors)
        for (int k = 0; k < width; ++k) s.ranges[(start + k) % kScanBeams] = open_range;
    return s;
}

Candidate candidate_at(const Vec2& p, const Descriptor& phi, double h, std::uint64_t tick) {
    Candidate c;
    c.position = p;
    c.phi = phi;
    c.heat_value = h;
    c.tick = tick;
    return c;
}

}  // namespace

TEST_CASE("density closed forms") {
    FhtMap map(0);
    SUBCASE("empty map has zero density") { CHECK(density(map, {1, 2}, 4.0) == 0.0); }

    map.add_node(NodeKind::Main, {0, 0}, {}, features_with(basis(0)));
    CHECK(density(map, {0, 0}, 4.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(density(map, {4, 0}, 4.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    map.add_node(NodeKind::Main, {4, 0}, {}, features_with(basis(1)));
    CHECK(density(map, {4, 0}, 4.0) == doctest::Approx(1.0 + std::exp(-1.0)).epsilon(1e-12));

    SUBCASE("support nodes do not contribute") {
        const double before = density(map, {2, 0}, 4.0);
        map.add_node(NodeKind::Support, {2, 0}, {});
        CHECK(density(map, {2, 0}, 4.0) == doctest::Approx(before));
    }
}

TEST_CASE("density rises with every main node and decays with distance") {
    FhtMap map(0);
    SplitMix64 rng(17);
    double last = 0.0;
    const Vec2 probe{1.0, 1.0};
    for (int i = 0; i < 10; ++i) {
        map.add_node(NodeKind::Main, {rng.uniform(-5, 5), rng.uniform(-5, 5)}, {},
                     features_with(basis(i)));
        const double d = density(map, probe, 4.0);
        CHECK(d > last);
        last = d;
    }
    // Moving away from all nodes decreases density.
    CHECK(density(map, {50, 50}, 4.0) < density(map, probe, 4.0));
}

TEST_CASE("heat counts wide openings, capped at four") {
    CHECK(heat(scan_with_openings({{330, 60}, {150, 60}})) == doctest::Approx(0.5));
    CHECK(heat(scan_with_openings({{340, 40}, {70, 40}, {160, 40}, {250, 40}})) ==
          doctest::Approx(1.0));
    CHECK(heat(scan_with_openings({})) == doctest::Approx(0.0));

    SUBCASE("narrow gaps below the angular width do not count") {
        CHECK(heat(scan_with_openings({{0, 15}, {180, 15}})) == doctest::Approx(0.0));
        CHECK(heat(scan_with_openings({{0, 21}})) == doctest::Approx(0.25));
        CHECK(heat(scan_with_openings({{0, 20}})) == doctest::Approx(0.0));  // strict >
    }
    SUBCASE("more than four openings still cap at 1") {
        CHECK(heat(scan_with_openings({{0, 30}, {60, 30}, {120, 30}, {200, 30}, {300, 30}})) ==
              doctest::Approx(1.0));
    }
    SUBCASE("fully open scan is a single opening") {
        Scan s;
        s.ranges.fill(11.0f);
        CHECK(heat(s) == doctest::Approx(0.25));
    }
    SUBCASE("openings from real scans: corridor vs junction") {
        const World corridor = World::load_file(asset("worlds/corridor.world"));
        const Scan mid = raycast_scan(corridor, Pose2{15.0, 2.0, 0.0});
        CHECK(heat(mid) == doctest::Approx(0.5));
        const World cross = World::load_file(asset("worlds/cross.world"));
        const Scan junction = raycast_scan(cross, Pose2{12.5, 11.0, 0.0});
        CHECK(heat(junction) == doctest::Approx(1.0));
    }
}

TEST_CASE("candidate buffer is a chronological ring") {
    CandidateBuffer buf(3);
    for (std::uint64_t t = 0; t < 5; ++t) buf.push(candidate_at({0, 0}, basis(0), 0.0, t));
    REQUIRE(buf.size() == 3);
    CHECK(buf[0].tick == 2);
    CHECK(buf[2].tick == 4);
    buf.clear();
    CHECK(buf.empty());
}

TEST_CASE("select_main_node follows the scalarized objective") {
    SelectionParams params;
    FhtMap map(0);
    map.add_node(NodeKind::Main, {0, 0}, {}, features_with(basis(0)));

    // Candidates 3.2 m out have density within (gamma2, gamma1).
    const double d = density(map, {3.2, 0}, params.sigma_c);
    REQUIRE(d > params.gamma2);
    REQUIRE(d < params.gamma1);

    SUBCASE("equal density: higher heat wins") {
        CandidateBuffer buf;
        buf.push(candidate_at({3.2, 0}, basis(1), 0.5, 0));
        buf.push(candidate_at({0, 3.2}, basis(2), 1.0, 1));
        const auto pick = select_main_node(buf, map, params);
        REQUIRE(pick);
        CHECK(*pick == 1);
    }
    SUBCASE("similarity filter removes near-duplicates of existing main nodes") {
        CandidateBuffer buf;
        buf.push(candidate_at({3.2, 0}, mix(0, 1, 0.95), 1.0, 0));  // dot 0.95 >= 0.94
        buf.push(candidate_at({0, 3.2}, basis(2), 0.1, 1));
        const auto pick = select_main_node(buf, map, params);
        REQUIRE(pick);
        CHECK(*pick == 1);  // survivor despite the worse objective
    }
    SUBCASE("single survivor is selected regardless of objective") {
        CandidateBuffer buf;
        buf.push(candidate_at({3.2, 0}, basis(3), 0.0, 0));
        const auto pick = select_main_node(buf, map, params);
        REQUIRE(pick);
        CHECK(*pick == 0);
    }
    SUBCASE("ties break to the earliest candidate") {
        CandidateBuffer buf;
        buf.push(candidate_at({3.2, 0}, basis(1), 0.5, 0));
        buf.push(candidate_at({0, -3.2}, basis(2), 0.5, 1));  // same D, same H
        const auto pick = select_main_node(buf, map, params);
        REQUIRE(pick);
        CHECK(*pick == 0);
    }
    SUBCASE("candidates outside the density window never survive") {
        CandidateBuffer buf;
        buf.push(candidate_at({0.5, 0}, basis(1), 1.0, 0));   // D too high
        buf.push(candidate_at({40.0, 0}, basis(2), 1.0, 1));  // D ~ 0, below gamma2
        CHECK(!select_main_node(buf, map, params));
    }
}

TEST_CASE("threshold arithmetic from the density window") {
    SelectionParams params;
    // 0.7 sits above gamma1 (~0.6065): tracked only below gamma1.
    CHECK(0.7 > params.gamma1);
    CHECK(0.5 < params.gamma1);
    CHECK(0.5 > params.gamma2);
}

TEST_CASE("scalarization argmin is invariant to positive scaling") {
    SelectionParams base;
    SplitMix64 rng(404);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        FhtMap map(0);
        const int n_nodes = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < n_nodes; ++i)
            map.add_node(NodeKind::Main, {rng.uniform(-8, 8), rng.uniform(-8, 8)}, {},
                         features_with(basis(i)));
        CandidateBuffer buf;
        const int n_cands = 2 + static_cast<int>(rng.next_below(10));
        for (int i = 0; i < n_cands; ++i)
            buf.push(candidate_at({rng.uniform(-10, 10), rng.uniform(-10, 10)}, basis(100 + i),
                                  rng.next_double(), static_cast<std::uint64_t>(i)));

        SelectionParams scaled = base;
        const double c = 0.01 + 100.0 * rng.next_double();
        scaled.omega1 *= c;
        scaled.omega2 *= c;
        const auto a = select_main_node(buf, map, base);
        const auto b = select_main_node(buf, map, scaled);
        CHECK(a == b);
        if (a) ++checked;
    }
    CHECK(checked > 20);  // the generator must exercise non-empty survivor sets
}

TEST_CASE("free_space_rect expands to walls and respects unknown cells") {
    const World w = empty_room(5.5);  // 22 cells; interior 20 free cells
    const RobotGrid grid = reveal_world(w, 3);
    const Rect rect = free_space_rect(grid, {2.75, 2.75});
    CHECK(rect.x_min == doctest::Approx(0.25));
    CHECK(rect.x_max == doctest::Approx(5.25));
    CHECK(rect.y_min == doctest::Approx(0.25));
    CHECK(rect.y_max == doctest::Approx(5.25));
    CHECK(rect.contains({2.75, 2.75}));

    SUBCASE("wall-adjacent seed halts that side immediately") {
        const Rect r2 = free_space_rect(grid, {0.4, 2.75});
        CHECK(r2.x_min == doctest::Approx(0.25));
    }
    SUBCASE("unknown cells block expansion like walls") {
        RobotGrid partial(0.25, 12.0);
        Scan scan;
        scan.ranges.fill(2.0f);
        integrate_scan(partial, Pose2{0, 0, 0}, scan);
        const Rect r3 = free_space_rect(partial, {0.0, 0.0});
        CHECK(r3.x_max <= 2.0 + 0.25);
        CHECK(r3.x_min >= -2.0 - 0.25);
    }
    SUBCASE("occupied seed throws") {
        CHECK_THROWS_AS(free_space_rect(grid, {0.1, 0.1}), std::invalid_argument);
    }
}

TEST_CASE("attach_node wires line-of-sight and containment edges") {
    const World w = empty_room(10.0);
    const RobotGrid grid = reveal_world(w, 3);
    FhtMap map(0);
    const int a =
        attach_node(map, NodeKind::Main, {2, 2}, free_space_rect(grid, {2, 2}), nullptr, grid);
    CHECK(map.edges().empty());
    const int b =
        attach_node(map, NodeKind::Support, {5, 5}, free_space_rect(grid, {5, 5}), nullptr, grid);
    CHECK(map.has_edge(a, b));  // direct visibility in one room

    // Containment: both rects span the room, so a third node links to both.
    const int c =
        attach_node(map, NodeKind::Support, {8, 2}, free_space_rect(grid, {8, 2}), nullptr, grid);
    CHECK(map.has_edge(b, c));
    CHECK(map.has_edge(a, c));
}

TEST_CASE("topo_path_length on chains and points") {
    FhtMap map(0);
    const Rect big{-1.0, 7.0, -1.0, 1.0};
    map.add_node(NodeKind::Main, {0, 0}, big);
    map.add_node(NodeKind::Support, {3, 0}, big);
    map.add_node(NodeKind::Support, {6, 0}, big);
    map.add_edge(0, 1);
    map.add_edge(1, 2);

    CHECK(*topo_path_length(map, TopoEndpoint::node(0), TopoEndpoint::node(0)) == 0.0);
    CHECK(*topo_path_length(map, TopoEndpoint::node(0), TopoEndpoint::node(2)) ==
          doctest::Approx(6.0));
    CHECK(*topo_path_length(map, TopoEndpoint::node(2), TopoEndpoint::node(0)) ==
          doctest::Approx(6.0));

    SUBCASE("points attach through containing rectangles") {
        const auto d = topo_path_length(map, TopoEndpoint::at({0.0, 0.5}), TopoEndpoint::at({6.0, 0.5}));
        REQUIRE(d);
        CHECK(*d >= (Vec2{0.0, 0.5} - Vec2{6.0, 0.5}).norm() - 1e-6);
    }
    SUBCASE("shared-rectangle chord is never beaten by a node detour") {
        const auto d = topo_path_length(map, TopoEndpoint::at({1.0, 0.2}), TopoEndpoint::at({1.4, 0.2}));
        REQUIRE(d);
        CHECK(*d == doctest::Approx(0.4));
    }
    SUBCASE("unattachable points are an error") {
        CHECK(!topo_path_length(map, TopoEndpoint::at({100, 100}), TopoEndpoint::node(0)));
    }
    SUBCASE("disconnected nodes give +inf") {
        map.add_node(NodeKind::Support, {20, 20}, {19, 21, 19, 21});
        const auto d = topo_path_length(map, TopoEndpoint::node(0), TopoEndpoint::node(3));
        REQUIRE(d);
        CHECK(std::isinf(*d));
    }
}

TEST_CASE("topo_path_length symmetry and lower bound on random maps") {
    SplitMix64 rng(555);
    FhtMap map(0);
    for (int i = 0; i < 12; ++i) {
        const Vec2 p{rng.uniform(0, 20), rng.uniform(0, 20)};
        map.add_node(i % 3 ? NodeKind::Support : NodeKind::Main, p,
                     {p.x() - 2, p.x() + 2, p.y() - 2, p.y() + 2});
    }
    for (int i = 1; i < 12; ++i) map.add_edge(i, static_cast<int>(rng.next_below(i)));
    for (int trial = 0; trial < 50; ++trial) {
        const int a = static_cast<int>(rng.next_below(12));
        const int b = static_cast<int>(rng.next_below(12));
        const auto ab = topo_path_length(map, TopoEndpoint::node(a), TopoEndpoint::node(b));
        const auto ba = topo_path_length(map, TopoEndpoint::node(b), TopoEndpoint::node(a));
        REQUIRE(ab);
        REQUIRE(ba);
        CHECK(*ab == doctest::Approx(*ba).epsilon(1e-9));
        CHECK(*ab >= (map.node(a).p - map.node(b).p).norm() - 1e-6);
    }
}
