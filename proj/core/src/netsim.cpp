#include "pier/netsim.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace pier {

CommGraph CommGraph::full(int n) {
    CommGraph g;
    g.robot_count = n;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) g.edges.insert({a, b});
    return g;
}

void CommGraph::add_edge(int a, int b) {
    if (a == b) throw std::invalid_argument("comm graph: self loop");
    edges.insert({std::min(a, b), std::max(a, b)});
}

bool CommGraph::has_edge(int a, int b) const {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
}

std::vector<int> CommGraph::neighbors(int robot) const {
    std::vector<int> out;
    for (const auto& [a, b] : edges) {
        if (a == robot) out.push_back(b);
        if (b == robot) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool CommGraph::connected() const {
    if (robot_count <= 1) return true;
    std::vector<bool> seen(robot_count, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : neighbors(u)) {
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                q.push(v);
            }
        }
    }
    return count == robot_count;
}

const char* to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::MapDelta: return "map_delta";
        case MessageKind::ScanPayload: return "scan";
        case MessageKind::RpEstimate: return "rp_estimate";
        case MessageKind::RobotPose: return "robot_pose";
        case MessageKind::FrontierSummary: return "frontier_summary";
        case MessageKind::StructuralMap: return "structural_map";
        default: return "unknown";
    }
}

std::size_t message_size(const Message& msg) {
    std::size_t payload = 0;
    switch (msg.kind) {
        case MessageKind::MapDelta: {
            const auto& p = std::get<MapDeltaPayload>(msg.payload);
            if (p.raw_grid) {
                payload = p.grid_runs * kEdgeBytes;  // 8 B per run-length entry
            } else {
                for (const auto& n : p.nodes)
                    payload += n.is_main() ? kMainNodeBytes : kSupportNodeBytes;
                payload += p.edges.size() * kEdgeBytes;
            }
            break;
        }
        case MessageKind::ScanPayload:
            payload = kScanBytes;
            break;
        case MessageKind::RpEstimate:
            payload = std::get<RpEstimatePayload>(msg.payload).measurements.size() *
                      (kEdgeBytes + kPoseBytes);
            break;
        case MessageKind::RobotPose:
            payload = kPoseBytes;
            break;
        case MessageKind::FrontierSummary:
            payload = std::get<FrontierSummaryPayload>(msg.payload).centers.size() *
                      kPositionBytes;
            break;
        case MessageKind::StructuralMap: {
            const auto& p = std::get<StructuralMapPayload>(msg.payload);
            payload = p.map.nodes().size() * kSupportNodeBytes +
                      p.map.edges().size() * kEdgeBytes;
            break;
        }
        default:
            break;
    }
    return kMessageHeaderBytes + payload;
}

void VolumeLedger::record(std::uint64_t tick, MessageKind kind, int src, std::size_t bytes) {
    total_ += bytes;
    by_kind_[static_cast<std::size_t>(kind)] += bytes;
    upload_[src] += bytes;
    if (!rows_.empty() && rows_.back().tick == tick && rows_.back().kind == kind)
        rows_.back().bytes += bytes;
    else
        rows_.push_back({tick, kind, bytes});
}

std::size_t VolumeLedger::upload_of(int robot) const {
    const auto it = upload_.find(robot);
    return it == upload_.end() ? 0 : it->second;
}

Network::Network(CommGraph graph) : graph_(std::move(graph)) {
    if (!graph_.connected()) throw std::invalid_argument("comm graph must be connected");
    pending_.resize(graph_.robot_count);
    inbox_.resize(graph_.robot_count);
}

void Network::send(Message msg) {
    if (!graph_.has_edge(msg.src, msg.dst))
        throw std::invalid_argument("send: robots are not adjacent in the comm graph");
    ledger_.record(tick_, msg.kind, msg.src, message_size(msg));
    pending_[msg.dst].push_back({tick_ + 1, std::move(msg)});
}

void Network::broadcast(int origin, Message msg) {
    msg.src = origin;
    const std::size_t size = message_size(msg);
    // Spanning-tree flood: one copy crosses into each robot, none return.
    for (int r = 0; r < graph_.robot_count; ++r) {
        if (r == origin) continue;
        ledger_.record(tick_, msg.kind, origin, size);
        Message copy = msg;
        copy.dst = r;
        pending_[r].push_back({tick_ + 1, std::move(copy)});
    }
}

void Network::deliver_up_to(std::uint64_t tick) {
    for (int r = 0; r < graph_.robot_count; ++r) {
        auto& queue = pending_[r];
        auto it = queue.begin();
        while (it != queue.end()) {
            if (it->ready_tick <= tick) {
                inbox_[r].push_back(std::move(it->msg));
                it = queue.erase(it);
            } else {
                ++it;
            }
        }
    }
}

std::vector<Message> Network::fetch_inbox(int robot) {
    std::vector<Message> out;
    out.swap(inbox_[robot]);
    return out;
}

}  // namespace pier
