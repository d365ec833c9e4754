#pragma once

#include "pier/fhtmap.hpp"
#include "pier/relpose.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <variant>
#include <vector>

namespace pier {

/// Static, connected, undirected communication topology.
struct CommGraph {
    int robot_count = 0;
    std::set<std::pair<int, int>> edges;  // normalized (lo, hi)

    static CommGraph full(int n);
    void add_edge(int a, int b);
    bool has_edge(int a, int b) const;
    std::vector<int> neighbors(int robot) const;
    bool connected() const;
};

enum class MessageKind : std::uint8_t {
    MapDelta = 0,
    ScanPayload,
    RpEstimate,
    RobotPose,
    FrontierSummary,
    StructuralMap,
    kCount
};

const char* to_string(MessageKind kind);

struct MapDeltaPayload {
    int owner = -1;
    std::vector<FhtNode> nodes;
    std::vector<FhtEdge> edges;
    // Grid-sharing baseline: the same channel carries run-length encoded
    // occupancy rows instead of topological nodes.
    bool raw_grid = false;
    std::size_t grid_runs = 0;
};

struct ScanPayload {
    Scan scan;
};

struct RpEstimatePayload {
    std::vector<RpMeasurement> measurements;
};

struct RobotPosePayload {
    int robot = -1;
    Pose2 pose;  // robot's pose in its own map frame
};

struct FrontierSummaryPayload {
    int robot = -1;
    std::vector<Vec2> centers;  // owner map frame
};

struct StructuralMapPayload {
    FhtMap map;  // feature payloads stripped
};

struct Message {
    MessageKind kind = MessageKind::MapDelta;
    int src = -1;
    int dst = -1;  // -1 while broadcasting
    std::variant<MapDeltaPayload, ScanPayload, RpEstimatePayload, RobotPosePayload,
                 FrontierSummaryPayload, StructuralMapPayload>
        payload;
};

// Size model, bytes: 4 B scalars, 16 B header. Descriptor 2048, scan 1440,
// position 8, rectangle 16, SE(2) pose 12, edge 8. Main node = position +
// rectangle + descriptor + scan; support node = position + rectangle.
inline constexpr std::size_t kMessageHeaderBytes = 16;
inline constexpr std::size_t kDescriptorBytes = kDescriptorDim * 4;
inline constexpr std::size_t kScanBytes = kScanBeams * 4;
inline constexpr std::size_t kPositionBytes = 8;
inline constexpr std::size_t kRectBytes = 16;
inline constexpr std::size_t kPoseBytes = 12;
inline constexpr std::size_t kEdgeBytes = 8;
inline constexpr std::size_t kMainNodeBytes =
    kPositionBytes + kRectBytes + kDescriptorBytes + kScanBytes;
inline constexpr std::size_t kSupportNodeBytes = kPositionBytes + kRectBytes;

std::size_t message_size(const Message& msg);

/// Cumulative transmission accounting; monotone, reproducible.
class VolumeLedger {
public:
    void record(std::uint64_t tick, MessageKind kind, int src, std::size_t bytes);

    std::size_t total() const { return total_; }
    std::size_t by_kind(MessageKind kind) const {
        return by_kind_[static_cast<std::size_t>(kind)];
    }
    std::size_t upload_of(int robot) const;

    struct Row {
        std::uint64_t tick;
        MessageKind kind;
        std::size_t bytes;
    };
    const std::vector<Row>& rows() const { return rows_; }

private:
    std::size_t total_ = 0;
    std::array<std::size_t, static_cast<std::size_t>(MessageKind::kCount)> by_kind_{};
    std::map<int, std::size_t> upload_;
    std::vector<Row> rows_;  // aggregated per (tick, kind)
};

/// Zero-latency-within-a-tick delivery: everything sent during tick t is
/// readable at tick t+1. Broadcast floods a spanning tree, so each robot
/// other than the origin receives exactly one copy.
class Network {
public:
    explicit Network(CommGraph graph);

    const CommGraph& graph() const { return graph_; }
    VolumeLedger& ledger() { return ledger_; }
    const VolumeLedger& ledger() const { return ledger_; }

    void set_tick(std::uint64_t tick) { tick_ = tick; }

    /// Point-to-point send over an existing edge; throws otherwise.
    void send(Message msg);

    /// Deliver to every other robot; bytes = size * (n - 1).
    void broadcast(int origin, Message msg);

    /// Move messages sent before `tick` into the readable inboxes.
    void deliver_up_to(std::uint64_t tick);

    /// Drain the readable inbox of one robot (delivery order preserved).
    std::vector<Message> fetch_inbox(int robot);

private:
    CommGraph graph_;
    VolumeLedger ledger_;
    std::uint64_t tick_ = 0;

    struct Pending {
        std::uint64_t ready_tick;
        Message msg;
    };
    std::vector<std::vector<Pending>> pending_;  // per destination
    std::vector<std::vector<Message>> inbox_;
};

}  // namespace pier
