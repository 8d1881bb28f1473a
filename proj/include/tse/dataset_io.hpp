#pragma once

#include <string>
#include <vector>

#include "tse/data_model.hpp"
#include "tse/staging.hpp"

namespace tse {

// On-disk dataset layout (line-oriented text, header + comma-delimited rows):
//   <dir>/meta.txt                     city: <name>
//   <dir>/graph.csv                    [nodes] / [edges] / [supersegments]
//   <dir>/{train,test}/snapshots.csv        date,slot,node_id,lag15..lag60
//   <dir>/{train,test}/labels_core.csv      date,slot,edge_id,class
//   <dir>/{train,test}/labels_extended.csv  date,slot,supersegment_id,eta_seconds
// Empty numeric cells are missing values.
struct Dataset {
    std::string city;
    RoadGraph graph;
    std::vector<Instance> train;
    std::vector<Instance> test;
};

std::string read_text_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);

// shortest round-trip decimal formatting; parsing it back is bit-exact
std::string format_double(double v);

RoadGraph read_graph(const std::string& path);
void write_graph(const std::string& path, const RoadGraph& graph);

std::vector<Instance> read_instances(const std::string& dir, const RoadGraph& graph,
                                     const std::string& city);
void write_instances(const std::string& dir, const std::vector<Instance>& instances);

// full round trip; ingest validates the graph and every cross reference and
// fails with file/line context, repairing nothing
Dataset ingest_dataset(const std::string& dir);
void write_dataset(const std::string& dir, const Dataset& data);

}  // namespace tse
