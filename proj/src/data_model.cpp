#include "tse/data_model.hpp"

#include <algorithm>
#include <set>

namespace tse {

const char* class_name(int cls) {
    switch (cls) {
        case kRed: return "red";
        case kYellow: return "yellow";
        case kGreen: return "green";
        case kIgnore: return "ignore";
    }
    fail("validation", "unknown congestion class " + std::to_string(cls));
}

int parse_class(const std::string& s) {
    if (s == "red") return kRed;
    if (s == "yellow") return kYellow;
    if (s == "green") return kGreen;
    if (s == "ignore") return kIgnore;
    fail("format", "unknown congestion class token '" + s + "'");
}

std::vector<std::string> validate_graph(const RoadGraph& graph) {
    std::vector<std::string> out;

    std::set<NodeId> node_ids;
    for (const auto& n : graph.nodes) {
        if (!node_ids.insert(n.id).second)
            out.push_back("duplicate node id " + std::to_string(n.id));
    }

    std::set<EdgeId> edge_ids;
    std::set<std::pair<NodeId, NodeId>> edge_pairs;
    for (const auto& e : graph.edges) {
        if (!edge_ids.insert(e.id).second)
            out.push_back("duplicate edge id " + std::to_string(e.id));
        if (!node_ids.count(e.source))
            out.push_back("edge " + std::to_string(e.id) + " references absent source node " +
                          std::to_string(e.source));
        if (!node_ids.count(e.sink))
            out.push_back("edge " + std::to_string(e.id) + " references absent sink node " +
                          std::to_string(e.sink));
        if (e.attr.length_m < 0)
            out.push_back("edge " + std::to_string(e.id) + " has negative length");
        if (e.attr.lanes < 0)
            out.push_back("edge " + std::to_string(e.id) + " has negative lane count");
        if (e.attr.speed_kph < 0 || e.attr.maxspeed < 0)
            out.push_back("edge " + std::to_string(e.id) + " has negative speed");
        if (e.attr.counter_distance_hops && *e.attr.counter_distance_hops < 0)
            out.push_back("edge " + std::to_string(e.id) + " has negative counter distance");
        edge_pairs.emplace(e.source, e.sink);
    }

    std::set<SegmentId> seg_ids;
    for (const auto& s : graph.supersegments) {
        if (!seg_ids.insert(s.id).second)
            out.push_back("duplicate supersegment id " + std::to_string(s.id));
        if (s.node_path.size() < 2) {
            out.push_back("supersegment " + std::to_string(s.id) + " has fewer than 2 nodes");
            continue;
        }
        for (size_t i = 0; i < s.node_path.size(); ++i) {
            if (!node_ids.count(s.node_path[i]))
                out.push_back("supersegment " + std::to_string(s.id) +
                              " references absent node " + std::to_string(s.node_path[i]));
        }
        for (size_t i = 0; i + 1 < s.node_path.size(); ++i) {
            if (!edge_pairs.count({s.node_path[i], s.node_path[i + 1]}))
                out.push_back("supersegment " + std::to_string(s.id) + " step " +
                              std::to_string(s.node_path[i]) + "->" +
                              std::to_string(s.node_path[i + 1]) +
                              " has no matching edge");
        }
    }

    return out;
}

GraphIndex::GraphIndex(const RoadGraph& graph) : graph_(&graph) {
    for (size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& n = graph.nodes[i];
        node_pos_[n.id] = i;
        if (n.is_counter) {
            counter_nodes_.push_back(n.id);
            counter_set_.insert(n.id);
        }
    }
    std::sort(counter_nodes_.begin(), counter_nodes_.end());
    for (const auto& e : graph.edges) {
        ++out_degree_[e.source];
        ++in_degree_[e.sink];
    }
}

int GraphIndex::in_degree(NodeId n) const {
    auto it = in_degree_.find(n);
    return it == in_degree_.end() ? 0 : it->second;
}

int GraphIndex::out_degree(NodeId n) const {
    auto it = out_degree_.find(n);
    return it == out_degree_.end() ? 0 : it->second;
}

}  // namespace tse
