#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pier/relpose.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <random>

using namespace pier;
using namespace pier::testutil;

namespace {

// Structured asymmetric cloud: two corner walls plus a clutter point row.
std::vector<Vec2> corner_cloud() {
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i) pts.emplace_back(-2.0 + i * 0.1, -1.5);   // horizontal wall
    for (int i = 0; i < 50; ++i) pts.emplace_back(4.0, -1.5 + i * 0.1);   // vertical wall
    for (int i = 0; i < 20; ++i) pts.emplace_back(-1.0 + i * 0.07, 2.0);  // shelf
    return pts;
}

std::vector<Vec2> transformed(const std::vector<Vec2>& pts, const Pose2& z) {
    // Build the query cloud so that z maps query coordinates onto `pts`.
    const Pose2 inv = z.inverse();
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(inv.apply(p));
    return out;
}

RpMeasurement meas(int from, int to, const Pose2& z, std::uint64_t tick = 0) {
    RpMeasurement m;
    m.from_robot = from;
    m.to_robot = to;
    m.transform = z;
    m.tick = tick;
    return m;
}

}  // namespace

TEST_CASE("descriptor matching is the dot product") {
    Descriptor a;
    a.values[0] = 1.0f;
    Descriptor b;
    b.values[1] = 1.0f;
    CHECK(match_descriptors(a, a) == doctest::Approx(1.0));
    CHECK(match_descriptors(a, b) == doctest::Approx(0.0));
}

TEST_CASE("icp recovers identity on identical clouds") {
    const auto target = corner_cloud();
    const IcpResult r = icp_align_points(target, target);
    REQUIRE(r.status == IcpStatus::Ok);
    CHECK(r.fitness == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(std::abs(r.transform.x) < 1e-6);
    CHECK(std::abs(r.transform.y) < 1e-6);
    CHECK(std::abs(r.transform.theta) < 1e-6);
}

TEST_CASE("icp recovers a pure translation") {
    const auto target = corner_cloud();
    const Pose2 z{0.3, 0.0, 0.0};
    const IcpResult r = icp_align_points(transformed(target, z), target);
    REQUIRE(r.status == IcpStatus::Ok);
    CHECK(r.transform.x == doctest::Approx(0.3).epsilon(1e-2));
    CHECK(std::abs(r.transform.y) < 1e-2);
    CHECK(std::abs(r.transform.theta) < M_PI / 180.0);
}

TEST_CASE("icp recovers a 30 degree rotation") {
    const auto target = corner_cloud();
    const Pose2 z{0.0, 0.0, 30.0 * M_PI / 180.0};
    const IcpResult r = icp_align_points(transformed(target, z), target);
    REQUIRE(r.status == IcpStatus::Ok);
    CHECK(r.transform.theta == doctest::Approx(z.theta).epsilon(0.02));
    CHECK(std::abs(r.transform.x) < 1e-2);
}

TEST_CASE("icp rejects degenerate inputs through its gates") {
    const auto target = corner_cloud();
    SUBCASE("too few points") {
        std::vector<Vec2> tiny(target.begin(), target.begin() + 10);
        CHECK(icp_align_points(tiny, target).status == IcpStatus::TooFewPoints);
        CHECK(icp_align_points(target, tiny).status == IcpStatus::TooFewPoints);
    }
    SUBCASE("unrelated geometry fails the fitness gate") {
        std::vector<Vec2> blob;
        SplitMix64 rng(9);
        for (int i = 0; i < 100; ++i)
            blob.push_back({rng.uniform(8.0, 16.0), rng.uniform(6.0, 14.0)});
        const IcpResult r = icp_align_points(blob, target);
        if (r.status == IcpStatus::Ok) CHECK(r.fitness <= 0.2);  // gate definition
        CHECK(r.fitness > 0.0);
    }
}

TEST_CASE("icp on raycast scans recovers the relative sensor pose") {
    // Asymmetric room from the shipped rooms world.
    const World w = World::load_file(asset("worlds/rooms.world"));
    const Pose2 a{6.0, 5.0, 0.0};
    const Pose2 b{6.4, 5.3, 0.0};
    const Scan scan_a = raycast_scan(w, a);
    const Scan scan_b = raycast_scan(w, b);
    const IcpResult r = icp_align(scan_a, scan_b);  // maps a-frame into b-frame
    REQUIRE(r.status == IcpStatus::Ok);
    const Pose2 expected = b.inverse() * a;
    CHECK(r.transform.x == doctest::Approx(expected.x).epsilon(0.1));
    CHECK(r.transform.y == doctest::Approx(expected.y).epsilon(0.1));
    CHECK(std::abs(normalize_angle(r.transform.theta - expected.theta)) < 2.0 * M_PI / 180.0);
}

TEST_CASE("icp scan wrapper enforces the minimum beam count") {
    Scan empty;
    empty.ranges.fill(12.0f);  // everything at max range: no points
    Scan full;
    full.ranges.fill(3.0f);
    CHECK(icp_align(empty, full).status == IcpStatus::TooFewPoints);
}

TEST_CASE("single_rp_estimation matches nodes and composes frames") {
    // Asymmetric surroundings so the scan alignment cannot alias under
    // rotation (an empty square room would).
    const World w = World::load_file(asset("worlds/rooms.world"), 31);
    const DescriptorField field(w.descriptor_seed());

    // Neighbor robot 1: map frame at world (12, 10, 90deg).
    const Pose2 frame_1{12.0, 10.0, M_PI / 2};
    const Vec2 node_world{10.0, 10.0};
    const Vec2 node_own = frame_1.inverse().apply(node_world);
    FhtMap neighbor(1);
    auto features = std::make_shared<MainNodeData>();
    features->phi = field.sample(node_world);
    features->psi = raycast_scan(w, Pose2{node_world.x(), node_world.y(), frame_1.theta});
    neighbor.add_node(NodeKind::Main, node_own,
                      {node_own.x() - 1, node_own.x() + 1, node_own.y() - 1, node_own.y() + 1},
                      features);

    // Estimating robot 0: map frame at world (4, 4, 0), standing 0.5 m from the node.
    const Pose2 frame_0{4.0, 4.0, 0.0};
    const Vec2 robot_world{10.5, 10.0};
    const Vec2 robot_own = frame_0.inverse().apply(robot_world);
    FhtMap own(0);
    own.add_node(NodeKind::Main, robot_own, {}, nullptr);

    const Descriptor phi = field.sample(robot_world);
    const Scan psi = raycast_scan(w, Pose2{robot_world.x(), robot_world.y(), frame_0.theta});

    SUBCASE("no neighbor maps yields nothing") {
        CHECK(single_rp_estimation(own, 0, robot_own, phi, psi, {}, 0.96).empty());
    }
    SUBCASE("a nearby node produces one measurement with the true transform") {
        const auto found =
            single_rp_estimation(own, 0, robot_own, phi, psi, {&neighbor}, 0.96);
        REQUIRE(found.size() == 1);
        const RpMeasurement& m = found.front();
        CHECK(m.from_robot == 0);
        CHECK(m.to_robot == 1);
        CHECK(m.source_node == 0);
        CHECK(m.observer_node == 0);
        const Pose2 truth = frame_0.inverse() * frame_1;
        CHECK(m.transform.x == doctest::Approx(truth.x).epsilon(0.05));
        CHECK(m.transform.y == doctest::Approx(truth.y).epsilon(0.05));
        CHECK(std::abs(normalize_angle(m.transform.theta - truth.theta)) < 2 * M_PI / 180.0);
    }
    SUBCASE("below-threshold similarity skips ICP entirely") {
        SingleRpStats stats;
        const Vec2 far_world{15.0, 16.0};  // ~8.5 m from the node: dot well below 0.96
        const auto found = single_rp_estimation(
            own, 0, frame_0.inverse().apply(far_world), field.sample(far_world),
            raycast_scan(w, Pose2{far_world.x(), far_world.y(), 0.0}), {&neighbor}, 0.96,
            nullptr, &stats);
        CHECK(found.empty());
        CHECK(stats.attempts == 0);
    }
    SUBCASE("skip predicate suppresses already-matched nodes") {
        const auto found = single_rp_estimation(own, 0, robot_own, phi, psi, {&neighbor}, 0.96,
                                                [](int, int) { return true; });
        CHECK(found.empty());
    }
}

TEST_CASE("connected components over the RP graph") {
    RpGraph g;
    g.robot_count = 3;
    CHECK(connected_components(g) ==
          std::vector<std::vector<int>>{{0}, {1}, {2}});

    g.measurements.push_back(meas(0, 1, {}));
    CHECK(connected_components(g) == std::vector<std::vector<int>>{{0, 1}, {2}});

    g.measurements.push_back(meas(1, 2, {}));
    const auto comps = connected_components(g);
    REQUIRE(comps.size() == 1);  // connected: the exploration loop terminates
    CHECK(comps[0] == std::vector<int>{0, 1, 2});
    CHECK(g.has_edge(0, 1));
    CHECK(!g.has_edge(0, 2));
}

TEST_CASE("pgo with one exact measurement is exactly determined") {
    PgoProblem problem;
    problem.robots = {0, 1};
    const Pose2 z{2.0, -1.0, 0.7};
    problem.measurements = {meas(0, 1, z)};
    const PgoResult r = pgo_solve(problem);
    CHECK(r.poses[0].x == 0.0);
    CHECK(r.poses[1].x == doctest::Approx(z.x).epsilon(1e-9));
    CHECK(r.poses[1].y == doctest::Approx(z.y).epsilon(1e-9));
    CHECK(r.poses[1].theta == doctest::Approx(z.theta).epsilon(1e-9));
    CHECK(r.pose_of(problem, 1).x == doctest::Approx(z.x));
}

TEST_CASE("pgo refines a noisy cycle toward ground truth") {
    // Ground-truth frames of three robots in the anchor's frame.
    const Pose2 t1{4.0, 1.0, 0.4};
    const Pose2 t2{1.0, 5.0, -0.9};
    PgoProblem problem;
    problem.robots = {0, 1, 2};
    problem.omega = Eigen::Vector3d(4, 1, 1).asDiagonal();
    problem.measurements = {
        meas(0, 1, t1),                          // exact
        meas(1, 2, t1.inverse() * t2),           // exact
        meas(0, 2, t2),                          // exact closes the cycle
        meas(0, 1, t1 * Pose2{0.08, -0.05, 0.03}, 1),  // perturbed duplicate
    };
    const PgoResult r = pgo_solve(problem);

    // Objective never increases and the result lands near the truth.
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
    CHECK(r.poses[1].x == doctest::Approx(t1.x).epsilon(1e-3));
    CHECK(r.poses[1].y == doctest::Approx(t1.y).epsilon(1e-3));
    CHECK(r.poses[2].x == doctest::Approx(t2.x).epsilon(1e-3));
    CHECK(std::abs(normalize_angle(r.poses[2].theta - t2.theta)) < 1e-3);
}

TEST_CASE("pgo argmin is invariant to scaling the information matrix") {
    PgoProblem problem;
    problem.robots = {0, 1, 2};
    problem.measurements = {
        meas(0, 1, {1.0, 0.5, 0.2}),
        meas(1, 2, {2.0, -0.5, -0.1}),
        meas(0, 2, {3.05, 0.02, 0.12}),  // slightly inconsistent
    };
    problem.omega = Eigen::Vector3d(4, 1, 1).asDiagonal();
    const PgoResult a = pgo_solve(problem);
    problem.omega *= 17.0;
    const PgoResult b = pgo_solve(problem);
    for (std::size_t i = 0; i < a.poses.size(); ++i) {
        CHECK(a.poses[i].x == doctest::Approx(b.poses[i].x).epsilon(1e-6));
        CHECK(a.poses[i].y == doctest::Approx(b.poses[i].y).epsilon(1e-6));
        CHECK(a.poses[i].theta == doctest::Approx(b.poses[i].theta).epsilon(1e-6));
    }
}

TEST_CASE("pgo is invariant to measurement list order") {
    PgoProblem problem;
    problem.robots = {0, 1, 2, 3};
    SplitMix64 rng(8);
    const Pose2 t1{2, 0, 0.3}, t2{4, 2, -0.4}, t3{1, 3, 1.2};
    problem.measurements = {
        meas(0, 1, t1), meas(1, 2, t1.inverse() * t2), meas(2, 3, t2.inverse() * t3),
        meas(0, 3, t3 * Pose2{0.05, 0.0, 0.01}, 9),
    };
    const PgoResult a = pgo_solve(problem);
    std::shuffle(problem.measurements.begin(), problem.measurements.end(),
                 std::mt19937{1234});
    const PgoResult b = pgo_solve(problem);
    for (std::size_t i = 0; i < a.poses.size(); ++i) {
        CHECK(a.poses[i].x == b.poses[i].x);
        CHECK(a.poses[i].y == b.poses[i].y);
        CHECK(a.poses[i].theta == b.poses[i].theta);
    }
}

TEST_CASE("pgo pairwise poses are path-independent on consistent inputs") {
    const Pose2 t1{3, 1, 0.5}, t2{-2, 4, -1.1}, t3{5, 5, 2.0};
    PgoProblem problem;
    problem.robots = {0, 1, 2, 3};
    problem.measurements = {
        meas(0, 1, t1), meas(0, 2, t2), meas(0, 3, t3),
        meas(1, 2, t1.inverse() * t2), meas(2, 3, t2.inverse() * t3),
        meas(1, 3, t1.inverse() * t3),
    };
    const PgoResult r = pgo_solve(problem);
    const Pose2 via_12 = r.poses[1].inverse() * r.poses[2];
    const Pose2 expected = t1.inverse() * t2;
    CHECK(via_12.x == doctest::Approx(expected.x).epsilon(1e-6));
    CHECK(via_12.y == doctest::Approx(expected.y).epsilon(1e-6));
    CHECK(via_12.theta == doctest::Approx(expected.theta).epsilon(1e-6));
}

TEST_CASE("pgo rejects disconnected components") {
    PgoProblem problem;
    problem.robots = {0, 1, 2};
    problem.measurements = {meas(0, 1, {1, 0, 0})};
    CHECK_THROWS_AS(pgo_solve(problem), std::invalid_argument);
}

TEST_CASE("plain Gauss-Newton mode also converges") {
    PgoProblem problem;
    problem.robots = {0, 1, 2};
    problem.measurements = {
        meas(0, 1, {1, 0, 0.1}), meas(1, 2, {1, 1, 0.2}), meas(0, 2, {2.1, 1.05, 0.28}),
    };
    PgoOptions options;
    options.robust_l1 = false;
    const PgoResult r = pgo_solve(problem, options);
    CHECK(r.converged);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
}
