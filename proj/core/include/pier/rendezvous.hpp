#pragma once

#include "pier/fhtmap.hpp"
#include "pier/geometry.hpp"
#include "pier/relpose.hpp"
#include "pier/world.hpp"

#include <map>
#include <optional>
#include <vector>

namespace pier {

/// One robot's node re-expressed in the reference frame. Rectangles stay in
/// the owner frame; containment queries rotate the point back, so rotated
/// frames keep exact rectangle geometry.
struct MergedNode {
    int robot = -1;
    int orig_id = -1;
    NodeKind kind = NodeKind::Support;
    Vec2 p_ref{0.0, 0.0};
    Rect rect_own;
};

class MergedMap {
public:
    const std::vector<MergedNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    int inter_robot_edges() const { return inter_edges_; }
    const std::map<int, Pose2>& frames() const { return frames_; }
    bool connected() const;

    bool node_contains(int index, const Vec2& p_ref) const;
    /// Indices of nodes whose rectangle contains the point (bin-indexed).
    std::vector<int> containing(const Vec2& p_ref) const;
    /// Superset of the nodes whose rectangle can intersect this node's
    /// (shared bin occupancy).
    std::vector<int> bin_superset(int index) const;
    /// Dijkstra over merged edges from (node, initial cost) seeds.
    std::vector<double> dijkstra(const std::vector<std::pair<int, double>>& seeds) const;
    const std::vector<std::vector<std::pair<int, double>>>& adjacency() const { return adj_; }

    friend MergedMap merge_maps(const std::vector<FhtMap>& maps,
                                const std::vector<RpMeasurement>& measurements,
                                const std::map<int, Pose2>& frames);

private:
    void add_edge_once(int a, int b, double length = -1.0);
    void build_index();

    std::vector<MergedNode> nodes_;
    std::vector<Pose2> node_inv_frame_;  // reference -> owner frame, per node
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
    std::map<int, Pose2> frames_;  // robot -> reference-frame pose of its map frame
    int inter_edges_ = 0;

    // Uniform bins over node bounding boxes for containment queries.
    double bin_size_ = 4.0;
    double bin_x0_ = 0.0, bin_y0_ = 0.0;
    int bins_x_ = 0, bins_y_ = 0;
    std::vector<std::vector<int>> bins_;
    std::vector<std::array<int, 4>> node_bins_;  // bx0, bx1, by0, by1 per node
};

/// Merge per-robot maps into the reference frame. Intra-map edges are kept;
/// cross edges come from (1) each measurement's observer/source node pair and
/// (2) any node lying inside another node's free rectangle.
MergedMap merge_maps(const std::vector<FhtMap>& maps,
                     const std::vector<RpMeasurement>& measurements,
                     const std::map<int, Pose2>& frames);

/// Reusable F(.) evaluator: per-robot shortest distances to every merged
/// node are computed once, so each query costs one leg addition per
/// containing rectangle.
class RendezvousEvaluator {
public:
    RendezvousEvaluator(const MergedMap& merged, const std::vector<Vec2>& robot_positions_ref);

    /// Max over robots of the topological path length to p; +inf when p is
    /// not attachable or some robot cannot reach it.
    double evaluate(const Vec2& p_ref) const;
    std::vector<double> per_robot(const Vec2& p_ref) const;

    std::size_t robot_count() const { return robot_positions_.size(); }
    double node_robot_distance(int node, std::size_t k) const {
        return node_dist_[node * robot_stride_ + k];
    }
    bool robot_hosted_by(std::size_t k, int node) const {
        return host_flags_[k][static_cast<std::size_t>(node)] != 0;
    }
    /// Lower bound of F over the whole rectangle of `node` (for pruning).
    double region_lower_bound(int node) const;

private:
    double robot_distance(std::size_t k, const Vec2& p_ref, const std::vector<int>& hosts) const;

    const MergedMap& merged_;
    std::vector<Vec2> robot_positions_;
    std::vector<std::vector<int>> robot_hosts_;   // rectangles containing each robot
    std::vector<std::vector<char>> host_flags_;   // robot_hosts_ as node-indexed flags
    std::vector<std::vector<int>> in_rect_nbrs_;  // graph neighbors inside each node's rect
    std::size_t robot_stride_ = 0;
    std::vector<double> node_dist_;  // [node * robots + k], node-major for locality
};

double compute_F(const MergedMap& merged, const Vec2& p_ref,
                 const std::vector<Vec2>& robot_positions_ref);

struct RendezvousResult {
    Vec2 p_hat{0.0, 0.0};
    double f_value = 0.0;
    std::vector<double> per_robot_lengths;
    std::size_t samples_evaluated = 0;
};

/// Sampling-based min-max point selection: evaluate F at every node position
/// and at a lattice of spacing 1/delta inside every rectangle; return the
/// argmin (lexicographic tie-break on x, then y).
RendezvousResult select_rendezvous_point(const MergedMap& merged,
                                         const std::vector<Vec2>& robot_positions_ref,
                                         double delta);

/// Exhaustive grid optimum: per-robot Dijkstra fields over ground-truth free
/// cells; p* = argmin over free cells of the max field value.
class GridOracle {
public:
    GridOracle(const World& world, const std::vector<Vec2>& robot_positions_world);

    const Vec2& p_star() const { return p_star_; }
    double f_star() const { return f_star_; }
    /// F at an arbitrary free point (value of its cell); +inf outside free space.
    double evaluate(const Vec2& p_world) const;

private:
    const World& world_;
    std::vector<std::vector<double>> fields_;
    Vec2 p_star_{0.0, 0.0};
    double f_star_ = 0.0;
};

}  // namespace pier
