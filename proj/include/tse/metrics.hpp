#pragma once

#include <array>
#include <string>
#include <vector>

#include "tse/data_model.hpp"

namespace tse {

// Per-target diagnostic for the context-recovery stage.
struct Stage1Score {
    double accuracy = 0.0;  // exact-match rate
    double mad = 0.0;       // mean absolute deviation, cyclic
};

struct EvalReport {
    std::string city;
    size_t snapshots = 0;
    size_t core_rows = 0;
    size_t core_ignored = 0;
    double core_loss = 0.0;
    size_t extended_rows = 0;
    double extended_mae = 0.0;
    Stage1Score month;
    Stage1Score day_of_week;
    Stage1Score slot;

    std::string to_text() const;
};

// Challenge core metric: identical code path to the training loss
// (class-weighted masked cross-entropy). Weights come from the evaluation
// labels.
double core_metric(const std::vector<double>& probabilities,
                   const std::vector<double>& labels,
                   const std::vector<double>& class_weights, double epsilon);

// Mean absolute error in seconds.
double extended_metric(const std::vector<double>& predicted_etas,
                       const std::vector<double>& true_etas);

// Exact-match accuracy and cyclic mean absolute deviation per target,
// in the order month, day_of_week, slot.
std::array<Stage1Score, 3> stage1_metric(const std::vector<TimeContext>& predicted,
                                         const std::vector<TimeContext>& truth);

}  // namespace tse
