#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tse/common.hpp"

namespace tse {

using NodeId = int64_t;
using EdgeId = int64_t;
using SegmentId = int64_t;

constexpr int kSlotsPerDay = 96;  // 15-minute bins
constexpr int kNumClasses = 3;    // red / yellow / green
constexpr int kLags = 4;          // t-15, t-30, t-45, t-60 minutes

// Congestion class indices. kIgnore marks an unlabeled row; it is a sentinel,
// never a class.
enum CongestionClass : int { kRed = 0, kYellow = 1, kGreen = 2 };
constexpr int kIgnore = -1;

const char* class_name(int cls);
int parse_class(const std::string& s);  // accepts red/yellow/green/ignore

inline bool weekend_flag(int day_of_week) {
    if (day_of_week < 0 || day_of_week > 6)
        fail("validation", "day_of_week out of [0,6]: " + std::to_string(day_of_week));
    return day_of_week == 5 || day_of_week == 6;
}

// Calendar context of one prediction instant. Stage-1 target, stage-2 feature.
struct TimeContext {
    int month = 1;        // [1,12]
    int day_of_week = 0;  // [0,6], 0 = Monday
    int slot = 0;         // [0, kSlotsPerDay)
    bool is_weekend = false;

    static TimeContext from(const Date& date, int slot) {
        TimeContext c;
        c.month = date.month;
        c.day_of_week = date.day_of_week();
        c.slot = slot;
        c.is_weekend = weekend_flag(c.day_of_week);
        return c;
    }

    bool valid() const {
        return month >= 1 && month <= 12 && day_of_week >= 0 && day_of_week <= 6 &&
               slot >= 0 && slot < kSlotsPerDay &&
               is_weekend == (day_of_week == 5 || day_of_week == 6);
    }

    bool operator==(const TimeContext&) const = default;
};

struct EdgeAttributes {
    bool oneway = false;
    bool tunnel = false;
    int highway_class = 0;          // numerical mapping of the OSM class
    double speed_kph = 0.0;
    double maxspeed = 0.0;
    int lanes = 0;
    double length_m = 0.0;
    double highway_importance = 0.0;
    std::optional<int> counter_distance_hops;  // absent when no counter reachable
};

struct Edge {
    EdgeId id = 0;
    NodeId source = 0;
    NodeId sink = 0;
    EdgeAttributes attr;
};

struct Node {
    NodeId id = 0;
    bool is_counter = false;
};

// Ordered node path over which an ETA is defined.
struct SuperSegment {
    SegmentId id = 0;
    std::vector<NodeId> node_path;  // length >= 2
};

struct RoadGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<SuperSegment> supersegments;
};

// Every structural problem found in a graph, one human-readable line each.
// Violations are data, not failures: an empty list means a valid graph.
std::vector<std::string> validate_graph(const RoadGraph& graph);

// One hour of counter readings for a single instant. volumes[node][k] is the
// count 15*(k+1) minutes in the past; NaN marks a missing reading.
struct CounterSnapshot {
    std::string city;
    std::optional<TimeContext> true_context;  // present in training data only
    std::map<NodeId, std::array<double, kLags>> volumes;
};

struct CongestionLabel {
    EdgeId edge_id = 0;
    int cls = kIgnore;  // CongestionClass or kIgnore
};

struct EtaLabel {
    SegmentId supersegment_id = 0;
    double eta = 0.0;  // seconds, > 0
};

// ---------------------------------------------------------------------------
// Precomputed lookups over an immutable RoadGraph: node/edge indices, degree
// counts and the sorted counter list. Built once, shared by feature builders.
// ---------------------------------------------------------------------------
class GraphIndex {
public:
    explicit GraphIndex(const RoadGraph& graph);

    const RoadGraph& graph() const { return *graph_; }
    const std::vector<NodeId>& counter_nodes() const { return counter_nodes_; }
    bool is_counter(NodeId n) const { return counter_set_.count(n) > 0; }
    bool has_node(NodeId n) const { return node_pos_.count(n) > 0; }
    int in_degree(NodeId n) const;
    int out_degree(NodeId n) const;

private:
    const RoadGraph* graph_;
    std::unordered_map<NodeId, size_t> node_pos_;
    std::unordered_map<NodeId, int> in_degree_;
    std::unordered_map<NodeId, int> out_degree_;
    std::vector<NodeId> counter_nodes_;  // sorted ascending
    std::unordered_set<NodeId> counter_set_;
};

}  // namespace tse
