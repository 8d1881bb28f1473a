#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tse/data_model.hpp"
#include "tse/encoding.hpp"
#include "tse/gbdt.hpp"

namespace tse {

// One labeled timestamp of a city: the counter snapshot plus whatever core
// and extended labels exist for it.
struct Instance {
    Date date;
    int slot = 0;
    CounterSnapshot snapshot;
    std::vector<CongestionLabel> core_labels;
    std::vector<EtaLabel> eta_labels;

    TimeContext context() const { return TimeContext::from(date, slot); }
    std::string id() const { return date.to_string() + ":" + std::to_string(slot); }
};

struct StagePresets {
    gbdt::GbdtParams a = gbdt::preset_a();
    gbdt::GbdtParams b = gbdt::preset_b();
};

inline std::vector<const Instance*> instance_ptrs(const std::vector<Instance>& v) {
    std::vector<const Instance*> out;
    out.reserve(v.size());
    for (const auto& i : v) out.push_back(&i);
    return out;
}

// ---------------------------------------------------------------------------
// Stage one: recover month / day-of-week / slot from the counter volumes.
// Three regression targets, two ensemble members each, averaged and rounded.
// ---------------------------------------------------------------------------
std::vector<std::string> stage1_column_names(const std::vector<NodeId>& layout);

// one row: 4 lag columns per counter node in sorted-id order
std::vector<double> stage1_row(const CounterSnapshot& snapshot,
                               const std::vector<NodeId>& layout);

FeatureMatrix stage1_features(const CounterSnapshot& snapshot, const GraphIndex& graph);

struct StageOneModel {
    std::string city;
    std::vector<NodeId> counter_layout;        // persisted column layout
    std::vector<gbdt::GbdtModel> models;       // month a,b / dow a,b / slot a,b
    std::vector<int> best_rounds() const;
};

StageOneModel train_stage1(const std::vector<const Instance*>& train,
                           const GraphIndex& graph, const StagePresets& presets,
                           const std::string& city, uint64_t seed,
                           const std::vector<const Instance*>* validation = nullptr,
                           const std::vector<int>* fixed_rounds = nullptr);

// ensemble mean per target, rounded half away from zero, clamped to range
TimeContext predict_context(const StageOneModel& model, const CounterSnapshot& snapshot);

// ---------------------------------------------------------------------------
// Stage two: per-edge congestion probabilities and per-segment ETAs from
// target-encoded features plus the supplied context. Training always uses
// the true contexts with leave-one-day-out encoding lookups; predicted
// contexts only ever appear at inference.
// ---------------------------------------------------------------------------
struct StageTwoModel {
    std::string city;
    gbdt::GbdtModel core_a;
    gbdt::GbdtModel core_b;
    gbdt::GbdtModel extended;
    CcEncodingTable cc_table;
    EtaEncodingTable eta_table;
    std::vector<int> best_rounds() const;
};

StageTwoModel train_stage2(const std::vector<const Instance*>& train,
                           const GraphIndex& graph, const StagePresets& presets,
                           const std::string& city, double pseudocount, uint64_t seed,
                           const std::vector<const Instance*>* validation = nullptr,
                           const std::vector<int>* fixed_rounds = nullptr);

struct StageTwoPrediction {
    std::vector<double> core_probabilities;  // edges x 3, rows sum to 1
    std::vector<double> etas;                // per super-segment, >= 1 second
};

StageTwoPrediction predict_stage2(const StageTwoModel& model, const GraphIndex& graph,
                                  const CounterSnapshot& snapshot,
                                  const TimeContext& ctx);

// core label vector (class or ignore) aligned with the graph's edge order
std::vector<double> core_targets_for(const Instance& inst, const GraphIndex& graph);

// Stacked training matrices over an instance list. Core rows cover every
// edge of every instance (targets use the ignore sentinel for unlabeled
// edges); extended rows cover labeled segments only. With exclude_own_day
// set, encoding lookups drop the row's own calendar day.
FeatureMatrix build_core_matrix(const std::vector<const Instance*>& instances,
                                const GraphIndex& graph, const CcEncodingTable& table,
                                bool exclude_own_day, std::vector<double>* targets);
FeatureMatrix build_extended_matrix(const std::vector<const Instance*>& instances,
                                    const GraphIndex& graph,
                                    const EtaEncodingTable& table,
                                    bool exclude_own_day, std::vector<double>* targets);

}  // namespace tse
