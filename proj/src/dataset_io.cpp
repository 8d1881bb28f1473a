#include "tse/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace tse {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

struct Cursor {
    std::string file;
    int line = 0;
    [[noreturn]] void err(const std::string& msg) const {
        fail("format", file + ":" + std::to_string(line) + ": " + msg);
    }
};

int64_t parse_int(const std::string& s, const Cursor& at) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        at.err("expected an integer, got '" + s + "'");
    return v;
}

double parse_num(const std::string& s, const Cursor& at) {
    if (s.empty()) return missing_value();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) at.err("expected a number, got '" + s + "'");
    return v;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io", "cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io", "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("io", "cannot write " + tmp.string());
        out << content;
        if (!out) fail("io", "short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

// ---- graph file ---------------------------------------------------------

RoadGraph read_graph(const std::string& path) {
    auto lines = read_lines(path);
    RoadGraph g;
    Cursor at{path, 0};
    enum Section { kNone, kNodes, kEdges, kSegments } section = kNone;
    bool header_pending = false;

    for (size_t i = 0; i < lines.size(); ++i) {
        at.line = static_cast<int>(i) + 1;
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line == "[nodes]") { section = kNodes; header_pending = true; continue; }
        if (line == "[edges]") { section = kEdges; header_pending = true; continue; }
        if (line == "[supersegments]") { section = kSegments; header_pending = true; continue; }
        if (section == kNone) at.err("content before any section header");
        if (header_pending) { header_pending = false; continue; }

        auto f = split_line(line);
        if (section == kNodes) {
            if (f.size() != 2) at.err("node row needs 2 fields");
            g.nodes.push_back({parse_int(f[0], at), parse_int(f[1], at) != 0});
        } else if (section == kEdges) {
            if (f.size() != 12) at.err("edge row needs 12 fields");
            Edge e;
            e.id = parse_int(f[0], at);
            e.source = parse_int(f[1], at);
            e.sink = parse_int(f[2], at);
            e.attr.oneway = parse_int(f[3], at) != 0;
            e.attr.tunnel = parse_int(f[4], at) != 0;
            e.attr.highway_class = static_cast<int>(parse_int(f[5], at));
            e.attr.speed_kph = parse_num(f[6], at);
            e.attr.maxspeed = parse_num(f[7], at);
            e.attr.lanes = static_cast<int>(parse_int(f[8], at));
            e.attr.length_m = parse_num(f[9], at);
            e.attr.highway_importance = parse_num(f[10], at);
            if (!f[11].empty())
                e.attr.counter_distance_hops = static_cast<int>(parse_int(f[11], at));
            g.edges.push_back(std::move(e));
        } else {
            if (f.size() != 2) at.err("supersegment row needs 2 fields");
            SuperSegment s;
            s.id = parse_int(f[0], at);
            size_t start = 0;
            const std::string& p = f[1];
            while (start <= p.size()) {
                size_t pos = p.find('-', start);
                std::string tok =
                    pos == std::string::npos ? p.substr(start) : p.substr(start, pos - start);
                if (tok.empty()) at.err("empty node in path");
                s.node_path.push_back(parse_int(tok, at));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
            g.supersegments.push_back(std::move(s));
        }
    }

    auto violations = validate_graph(g);
    if (!violations.empty()) {
        std::string msg = path + ": invalid graph:";
        for (size_t i = 0; i < violations.size() && i < 5; ++i)
            msg += "\n  " + violations[i];
        if (violations.size() > 5)
            msg += "\n  (+" + std::to_string(violations.size() - 5) + " more)";
        fail("validation", msg);
    }
    return g;
}

void write_graph(const std::string& path, const RoadGraph& graph) {
    std::ostringstream os;
    os << "[nodes]\nid,is_counter\n";
    for (const auto& n : graph.nodes) os << n.id << "," << (n.is_counter ? 1 : 0) << "\n";
    os << "[edges]\n"
          "id,source,sink,oneway,tunnel,highway_class,speed_kph,maxspeed,lanes,"
          "length_m,highway_importance,counter_distance_hops\n";
    for (const auto& e : graph.edges) {
        os << e.id << "," << e.source << "," << e.sink << "," << (e.attr.oneway ? 1 : 0)
           << "," << (e.attr.tunnel ? 1 : 0) << "," << e.attr.highway_class << ","
           << format_double(e.attr.speed_kph) << "," << format_double(e.attr.maxspeed)
           << "," << e.attr.lanes << "," << format_double(e.attr.length_m) << ","
           << format_double(e.attr.highway_importance) << ",";
        if (e.attr.counter_distance_hops) os << *e.attr.counter_distance_hops;
        os << "\n";
    }
    os << "[supersegments]\nid,node_path\n";
    for (const auto& s : graph.supersegments) {
        os << s.id << ",";
        for (size_t i = 0; i < s.node_path.size(); ++i) {
            if (i) os << "-";
            os << s.node_path[i];
        }
        os << "\n";
    }
    write_file_atomic(path, os.str());
}

// ---- instances ------------------------------------------------------------

std::vector<Instance> read_instances(const std::string& dir, const RoadGraph& graph,
                                     const std::string& city) {
    std::unordered_set<NodeId> counter_nodes;
    for (const auto& n : graph.nodes)
        if (n.is_counter) counter_nodes.insert(n.id);
    std::unordered_set<EdgeId> edge_ids;
    for (const auto& e : graph.edges) edge_ids.insert(e.id);
    std::unordered_set<SegmentId> seg_ids;
    for (const auto& s : graph.supersegments) seg_ids.insert(s.id);

    // keyed by (date, slot), kept sorted
    std::map<std::pair<int32_t, int>, Instance> by_key;
    auto instance_at = [&](const Date& d, int slot) -> Instance& {
        auto key = std::make_pair(d.key(), slot);
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            Instance inst;
            inst.date = d;
            inst.slot = slot;
            inst.snapshot.city = city;
            inst.snapshot.true_context = TimeContext::from(d, slot);
            it = by_key.emplace(key, std::move(inst)).first;
        }
        return it->second;
    };

    // snapshots
    {
        std::string path = dir + "/snapshots.csv";
        auto lines = read_lines(path);
        Cursor at{path, 0};
        std::set<std::tuple<int32_t, int, NodeId>> seen;
        for (size_t i = 1; i < lines.size(); ++i) {
            at.line = static_cast<int>(i) + 1;
            if (lines[i].empty()) continue;
            auto f = split_line(lines[i]);
            if (f.size() != 3 + kLags) at.err("snapshot row needs 7 fields");
            Date d = Date::parse(f[0]);
            int slot = static_cast<int>(parse_int(f[1], at));
            if (slot < 0 || slot >= kSlotsPerDay) at.err("slot out of range");
            NodeId node = parse_int(f[2], at);
            if (!counter_nodes.count(node))
                at.err("node " + std::to_string(node) + " is not a counter node");
            if (!seen.insert({d.key(), slot, node}).second)
                at.err("duplicate snapshot row for node " + std::to_string(node));
            std::array<double, kLags> lags;
            for (int k = 0; k < kLags; ++k) {
                lags[k] = parse_num(f[3 + k], at);
                if (!is_missing(lags[k]) && lags[k] < 0) at.err("negative volume");
            }
            instance_at(d, slot).snapshot.volumes[node] = lags;
        }
    }

    // core labels
    {
        std::string path = dir + "/labels_core.csv";
        auto lines = read_lines(path);
        Cursor at{path, 0};
        std::set<std::tuple<int32_t, int, EdgeId>> seen;
        for (size_t i = 1; i < lines.size(); ++i) {
            at.line = static_cast<int>(i) + 1;
            if (lines[i].empty()) continue;
            auto f = split_line(lines[i]);
            if (f.size() != 4) at.err("core label row needs 4 fields");
            Date d = Date::parse(f[0]);
            int slot = static_cast<int>(parse_int(f[1], at));
            if (slot < 0 || slot >= kSlotsPerDay) at.err("slot out of range");
            EdgeId edge = parse_int(f[2], at);
            if (!edge_ids.count(edge)) at.err("unknown edge " + std::to_string(edge));
            if (!seen.insert({d.key(), slot, edge}).second)
                at.err("duplicate label for edge " + std::to_string(edge));
            int cls = parse_class(f[3]);
            instance_at(d, slot).core_labels.push_back({edge, cls});
        }
    }

    // extended labels
    {
        std::string path = dir + "/labels_extended.csv";
        auto lines = read_lines(path);
        Cursor at{path, 0};
        std::set<std::tuple<int32_t, int, SegmentId>> seen;
        for (size_t i = 1; i < lines.size(); ++i) {
            at.line = static_cast<int>(i) + 1;
            if (lines[i].empty()) continue;
            auto f = split_line(lines[i]);
            if (f.size() != 4) at.err("extended label row needs 4 fields");
            Date d = Date::parse(f[0]);
            int slot = static_cast<int>(parse_int(f[1], at));
            if (slot < 0 || slot >= kSlotsPerDay) at.err("slot out of range");
            SegmentId seg = parse_int(f[2], at);
            if (!seg_ids.count(seg))
                at.err("unknown supersegment " + std::to_string(seg));
            if (!seen.insert({d.key(), slot, seg}).second)
                at.err("duplicate label for supersegment " + std::to_string(seg));
            double eta = parse_num(f[3], at);
            if (is_missing(eta) || eta <= 0) at.err("eta must be a positive number");
            instance_at(d, slot).eta_labels.push_back({seg, eta});
        }
    }

    std::vector<Instance> out;
    out.reserve(by_key.size());
    for (auto& [_, inst] : by_key) out.push_back(std::move(inst));
    return out;
}

void write_instances(const std::string& dir, const std::vector<Instance>& instances) {
    std::ostringstream snap, core, ext;
    snap << "date,slot,node_id,lag15,lag30,lag45,lag60\n";
    core << "date,slot,edge_id,class\n";
    ext << "date,slot,supersegment_id,eta_seconds\n";
    for (const auto& inst : instances) {
        std::string prefix = inst.date.to_string() + "," + std::to_string(inst.slot) + ",";
        for (const auto& [node, lags] : inst.snapshot.volumes) {
            snap << prefix << node;
            for (double v : lags) {
                snap << ",";
                if (!is_missing(v)) snap << format_double(v);
            }
            snap << "\n";
        }
        for (const auto& l : inst.core_labels)
            core << prefix << l.edge_id << "," << class_name(l.cls) << "\n";
        for (const auto& l : inst.eta_labels)
            ext << prefix << l.supersegment_id << "," << format_double(l.eta) << "\n";
    }
    write_file_atomic(dir + "/snapshots.csv", snap.str());
    write_file_atomic(dir + "/labels_core.csv", core.str());
    write_file_atomic(dir + "/labels_extended.csv", ext.str());
}

Dataset ingest_dataset(const std::string& dir) {
    Dataset d;
    std::string meta = read_text_file(dir + "/meta.txt");
    size_t pos = meta.find("city: ");
    if (pos == std::string::npos) fail("format", dir + "/meta.txt: missing city field");
    size_t end = meta.find('\n', pos);
    d.city = meta.substr(pos + 6, end == std::string::npos ? end : end - pos - 6);
    d.graph = read_graph(dir + "/graph.csv");
    d.train = read_instances(dir + "/train", d.graph, d.city);
    d.test = read_instances(dir + "/test", d.graph, d.city);
    return d;
}

void write_dataset(const std::string& dir, const Dataset& data) {
    fs::create_directories(dir);
    write_file_atomic(dir + "/meta.txt", "city: " + data.city + "\n");
    write_graph(dir + "/graph.csv", data.graph);
    fs::create_directories(dir + "/train");
    fs::create_directories(dir + "/test");
    write_instances(dir + "/train", data.train);
    write_instances(dir + "/test", data.test);
}

}  // namespace tse
