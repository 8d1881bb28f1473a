#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tse/feature_matrix.hpp"
#include "tse/objective.hpp"

namespace tse::gbdt {

struct GbdtParams {
    int max_depth = 5;
    double learning_rate = 0.1;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double colsample_bylevel = 1.0;
    int num_rounds = 10000;
    int early_stopping_rounds = 1000;
    int min_samples_leaf = 20;
    double l2_reg = 1.0;
    int histogram_bins = 256;
    uint64_t seed = 0;

    void validate() const;
};

// The two ensemble member configurations used throughout the pipeline:
// a slow heavily-subsampled learner and a fast default one.
GbdtParams preset_a();
GbdtParams preset_b();

struct TreeNode {
    int32_t split_feature = -1;  // -1 marks a leaf
    double threshold = 0.0;      // finite value goes left when v <= threshold
    bool default_left = false;   // learned routing for missing values
    int32_t left = -1;
    int32_t right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return split_feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int leaf_for_row(const double* row) const {
        int i = 0;
        while (!nodes[i].is_leaf()) {
            const TreeNode& nd = nodes[i];
            double v = row[nd.split_feature];
            if (is_missing(v))
                i = nd.default_left ? nd.left : nd.right;
            else
                i = v <= nd.threshold ? nd.left : nd.right;
        }
        return i;
    }

    double value_for_row(const double* row) const {
        return nodes[leaf_for_row(row)].leaf_value;
    }
};

// Boosted ensemble. For the softmax objective there are outputs() trees per
// round, class-major within the round; predict uses the first best_round
// rounds only.
struct GbdtModel {
    Objective objective;
    GbdtParams params;
    std::vector<std::string> feature_names;
    std::vector<double> base_score;  // one per output
    int best_round = 0;
    std::vector<Tree> trees;
    std::vector<double> train_loss_history;
    std::vector<double> valid_loss_history;

    int rounds_built() const {
        int k = objective.outputs();
        return static_cast<int>(trees.size()) / k;
    }
};

// Fits an ensemble. Targets are reals for the regression objectives and
// class indices (or the ignore sentinel) for softmax. When a validation set
// is given, training stops once the validation loss has not improved for
// early_stopping_rounds rounds and best_round records the optimum; without
// one, best_round = num_rounds.
GbdtModel train(const FeatureMatrix& features, const std::vector<double>& targets,
                const Objective& objective, const GbdtParams& params,
                const FeatureMatrix* valid_features = nullptr,
                const std::vector<double>* valid_targets = nullptr);

// Row-major n_rows x outputs(); softmax probabilities for the multiclass
// objective, raw values otherwise.
std::vector<double> predict(const GbdtModel& model, const FeatureMatrix& features);

// Replaces each leaf value with learning_rate * median(residuals of the
// rows assigned to it). Step used by the absolute-error objective after the
// tree structure is grown with sign gradients.
void refine_leaves(Tree& tree, const std::vector<double>& residuals,
                   const std::vector<int>& leaf_of_row, double learning_rate);

// Versioned binary round trip; predictions are bit-identical across it.
std::vector<uint8_t> serialize(const GbdtModel& model);
GbdtModel deserialize(std::span<const uint8_t> bytes);
void write_model(BinWriter& w, const GbdtModel& model);
GbdtModel read_model(BinReader& r);

}  // namespace tse::gbdt
