#pragma once

#include "pier/fhtmap.hpp"
#include "pier/geometry.hpp"
#include "pier/world.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace pier {

/// Dot product of two unit descriptors (the r_match score).
inline double match_descriptors(const Descriptor& a, const Descriptor& b) { return dot(a, b); }

struct IcpParams {
    int max_iterations = 50;
    int rotation_starts = 8;       // k * 45 degree initializations
    int min_points = 30;           // finite beams required on both sides
    double reject_fitness = 0.2;   // mean residual gate, meters
    double convergence_tol = 1e-9;
    // Reject alignments whose surface normals leave a translation direction
    // unconstrained (straight featureless corridors slide along their axis).
    double min_constraint_ratio = 0.05;
};

enum class IcpStatus { Ok, TooFewPoints, PoorFit, Degenerate };

struct IcpResult {
    IcpStatus status = IcpStatus::PoorFit;
    Pose2 transform;     // maps query-frame coordinates into the target frame
    double fitness = 0;  // mean nearest-neighbor residual, meters
};

std::vector<Vec2> scan_points(const Scan& scan);

/// Multi-start point-to-point ICP between 2D clouds.
IcpResult icp_align_points(const std::vector<Vec2>& query, const std::vector<Vec2>& target,
                           const IcpParams& params = {});

/// Scan wrapper: converts beams to points and applies the min-point gate.
IcpResult icp_align(const Scan& query, const Scan& target, const IcpParams& params = {});

/// One estimated relative pose between two robots' map frames.
struct RpMeasurement {
    int from_robot = -1;
    int to_robot = -1;
    Pose2 transform;  // pose of `to` robot's frame expressed in `from`'s frame
    double fitness = 0.0;
    int source_robot = -1;  // matched main node: owner and id
    int source_node = -1;
    int observer_node = -1;  // nearest own node of the estimating robot
    std::uint64_t tick = 0;
};

/// Time-varying graph of which robot pairs have at least one measurement.
struct RpGraph {
    int robot_count = 0;
    std::vector<RpMeasurement> measurements;

    bool has_edge(int a, int b) const {
        for (const auto& m : measurements)
            if ((m.from_robot == a && m.to_robot == b) || (m.from_robot == b && m.to_robot == a))
                return true;
        return false;
    }
};

/// Disjoint components of the RP graph, each sorted, ordered by least member.
std::vector<std::vector<int>> connected_components(const RpGraph& graph);

struct SingleRpStats {
    int attempts = 0;
    int rejected = 0;
};

/// One pass of descriptor matching + scan alignment against the main nodes
/// of received neighbor maps (the per-robot estimation step). `position` and
/// the resulting transforms live in the estimating robot's map frame; `skip`
/// filters out already-matched (robot, node) pairs.
std::vector<RpMeasurement> single_rp_estimation(
    const FhtMap& own_map, int robot, const Vec2& position, const Descriptor& phi, const Scan& psi,
    const std::vector<const FhtMap*>& neighbor_maps, double theta_match,
    const std::function<bool(int, int)>& skip = nullptr, SingleRpStats* stats = nullptr,
    const IcpParams& icp = {});

struct PgoProblem {
    std::vector<int> robots;  // one connected component, sorted; front() is the anchor
    std::vector<RpMeasurement> measurements;
    Eigen::Matrix3d omega = Eigen::Matrix3d::Identity();  // information on [dtheta, dx, dy]
};

struct PgoOptions {
    bool robust_l1 = true;  // IRLS on the un-squared residual norm; false = plain Gauss-Newton
    int max_iterations = 100;
    double tol = 1e-8;
};

struct PgoResult {
    std::vector<Pose2> poses;  // parallel to problem.robots; anchor pinned to identity
    std::vector<double> objective_history;
    bool converged = false;

    Pose2 pose_of(const PgoProblem& problem, int robot) const;
};

/// Refine per-robot frames from pairwise measurements (Gauss-Newton on SE(2),
/// iteratively reweighted for the L1-of-L2 objective). Throws when the
/// component is not connected by the measurements.
PgoResult pgo_solve(const PgoProblem& problem, const PgoOptions& options = {});

}  // namespace pier
