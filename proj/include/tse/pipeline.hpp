#pragma once

#include <string>
#include <vector>

#include "tse/dataset_io.hpp"
#include "tse/metrics.hpp"
#include "tse/staging.hpp"

namespace tse {

StagePresets default_pipeline_presets();

struct PipelineConfig {
    std::string city = "synthtown";
    std::string data_dir = "data/synthtown";
    std::string out_dir = "out/synthtown";
    int slots_per_day = kSlotsPerDay;
    double pseudocount = 20.0;
    int early_stopping_rounds = 1000;
    int validation_weeks = 2;
    uint64_t seed = 7;
    StagePresets presets = default_pipeline_presets();

    void validate() const;
    // digest over the training-relevant fields; persisted in the bundle and
    // rechecked before predict/evaluate/ablate
    uint64_t digest() const;

    static PipelineConfig from_json_text(const std::string& text);
    static PipelineConfig from_json_file(const std::string& path);
};

struct ValidationSplit {
    std::vector<const Instance*> train;
    std::vector<const Instance*> valid;
};

// picks validation_weeks whole calendar weeks (Monday-based) uniformly at
// random; whole days never straddle the split
ValidationSplit split_validation(const std::vector<Instance>& instances,
                                 int validation_weeks, uint64_t seed);

struct ModelBundle {
    std::string city;
    uint64_t config_digest = 0;
    StageOneModel stage1;
    StageTwoModel stage2;
};

std::vector<uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::span<const uint8_t> bytes);
void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

// Two-phase protocol: train with early stopping against the validation
// split, then retrain on train+validation for exactly the recorded best
// rounds. The bundle holds the phase-2 models.
ModelBundle train_full(const PipelineConfig& cfg);
ModelBundle train_full_on(const PipelineConfig& cfg, const Dataset& data,
                          const ValidationSplit& split);

// Phase 2 alone: a pure function of the full training data and the recorded
// round counts (6 stage-1, 3 stage-2).
ModelBundle retrain_phase2(const PipelineConfig& cfg, const Dataset& data,
                           const std::vector<int>& stage1_rounds,
                           const std::vector<int>& stage2_rounds);

// writes contexts.csv, core_predictions.csv, extended_predictions.csv
void predict_cmd(const PipelineConfig& cfg);

// full-pipeline scoring on the test split with stage-1 predicted contexts
EvalReport evaluate_cmd(const PipelineConfig& cfg);
EvalReport evaluate_on(const PipelineConfig& cfg, const Dataset& data,
                       const ModelBundle& bundle);

struct ConditionScores {
    double core_loss = 0.0;
    double extended_mae = 0.0;
};

struct AblationReport {
    ConditionScores predicted;     // two-stage, stage-1 contexts
    ConditionScores nulled;        // context feature columns blanked at inference
    ConditionScores retrained;     // models retrained without context columns
    ConditionScores ground_truth;  // two-stage, true contexts
    ConditionScores te_only;       // table lookups alone
    double delta_core_pct = 0.0;       // (predicted - ground_truth) / predicted * 100
    double delta_extended_pct = 0.0;

    std::string to_text() const;
};

AblationReport ablate(const PipelineConfig& cfg);
AblationReport ablate_on(const PipelineConfig& cfg, const Dataset& data,
                         const ModelBundle& bundle);

}  // namespace tse
