#pragma once

#include "pier/geometry.hpp"
#include "pier/grid.hpp"
#include "pier/world.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace pier {

enum class NodeKind : std::uint8_t { Main, Support };

/// Feature payload carried only by main nodes; shared immutably between a
/// map and the snapshots other robots receive.
struct MainNodeData {
    Descriptor phi;
    Scan psi;
};

struct FhtNode {
    int id = -1;
    NodeKind kind = NodeKind::Support;
    Vec2 p{0.0, 0.0};  // owner map frame
    Rect rect;
    std::shared_ptr<const MainNodeData> features;

    bool is_main() const { return kind == NodeKind::Main; }
};

/// Traversable link; length is the straight segment for line-of-sight and
/// containment edges, or the validated path length for detour edges.
struct FhtEdge {
    int a = -1;
    int b = -1;
    double length = 0.0;
};

/// Topological map of one robot: main nodes (descriptor + scan), support
/// nodes (position + free rectangle), and traversable edges.
class FhtMap {
public:
    FhtMap() = default;
    explicit FhtMap(int owner) : owner_(owner) {}

    int owner() const { return owner_; }
    const std::vector<FhtNode>& nodes() const { return nodes_; }
    const std::vector<FhtEdge>& edges() const { return edges_; }
    const FhtNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    bool empty() const { return nodes_.empty(); }
    int last_node_id() const { return nodes_.empty() ? -1 : nodes_.back().id; }
    int main_count() const { return main_count_; }

    int add_node(NodeKind kind, const Vec2& p, const Rect& rect,
                 std::shared_ptr<const MainNodeData> features = nullptr);
    /// length < 0 means the Euclidean node distance.
    void add_edge(int a, int b, double length = -1.0);
    bool has_edge(int a, int b) const;
    const std::vector<std::vector<std::pair<int, double>>>& adjacency() const { return adj_; }

    /// Shortest distance from a set of (node, initial cost) seeds to every
    /// node, edges weighted by Euclidean node distance.
    std::vector<double> dijkstra(const std::vector<std::pair<int, double>>& seeds) const;

    /// Copy with feature payloads dropped (rendezvous-phase sharing).
    FhtMap structural_copy() const;

private:
    int owner_ = -1;
    int main_count_ = 0;
    std::vector<FhtNode> nodes_;
    std::vector<FhtEdge> edges_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
};

struct SelectionParams {
    double sigma_c = 4.0;
    double gamma1 = 0.606530659712633424;  // exp(-1/2)
    double gamma2 = 0.367879441171442322;  // exp(-1)
    double omega1 = 1.0;
    double omega2 = 2.0;
    double theta_sim = 0.94;
    double support_spacing = 2.0;  // also spawn a support node after this much travel
    std::size_t buffer_capacity = 512;
};

/// Main-node density at p: sum over main nodes of exp(-|p - p_i|^2 / sigma_c^2).
double density(const FhtMap& map, const Vec2& p, double sigma_c);

/// Junction-likeness of a scan in [0, 1]: count maximal angular openings
/// (wraparound runs with range > r_open and width > min_width_deg), capped
/// at four. A corridor scores 0.5, a four-way junction 1.0.
double heat(const Scan& scan, double r_open = 3.0, int min_width_deg = 20);

struct Candidate {
    Vec2 position;  // owner map frame
    Scan scan;
    Descriptor phi;
    double heat_value = 0.0;
    std::uint64_t tick = 0;
};

/// Chronological ring buffer of potential main nodes.
class CandidateBuffer {
public:
    explicit CandidateBuffer(std::size_t capacity = 512) : capacity_(capacity) {}

    void push(Candidate c);
    void clear() { items_.clear(); }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Candidate& operator[](std::size_t i) const { return items_[i]; }

private:
    std::size_t capacity_;
    std::vector<Candidate> items_;
};

/// Pick the next main node from the buffer: keep candidates with
/// gamma2 < density < gamma1 that are dissimilar (phi^T phi < theta_sim)
/// to every existing main node, then minimize omega1*D - omega2*H.
/// Ties go to the earliest candidate. nullopt when no candidate survives.
std::optional<std::size_t> select_main_node(const CandidateBuffer& buffer, const FhtMap& map,
                                            const SelectionParams& params);

/// Maximal axis-aligned free rectangle grown from p one cell per side in
/// round-robin order; unknown cells stop growth. Throws if p is not free.
Rect free_space_rect(const RobotGrid& grid, const Vec2& p, double max_half_m = 12.0);

/// Add a node and wire it up: edge to the most recently created node when
/// the segment is in known free space, otherwise to the nearest node with a
/// grid-validated path; plus edges to nodes whose rectangles contain each
/// other's positions (those segments are certified by the rectangles).
int attach_node(FhtMap& map, NodeKind kind, const Vec2& p, const Rect& rect,
                std::shared_ptr<const MainNodeData> features, const RobotGrid& grid);

struct TopoEndpoint {
    std::optional<int> node_id;
    Vec2 point{0.0, 0.0};

    static TopoEndpoint node(int id) { return {id, {}}; }
    static TopoEndpoint at(const Vec2& p) { return {std::nullopt, p}; }
};

/// Shortest path length across the map between two endpoints, points
/// attached through every rectangle that contains them. +inf when
/// disconnected, nullopt when a point endpoint is unattachable.
std::optional<double> topo_path_length(const FhtMap& map, const TopoEndpoint& a,
                                       const TopoEndpoint& b);

/// Navigation cost from a pose to a target over the topological map with
/// straight attachment legs validated against the grid; falls back to grid
/// A* when the topological route is unavailable. +inf when unreachable.
double nav_cost(const FhtMap& map, const RobotGrid& grid, const Vec2& from, const Vec2& to);

}  // namespace pier
