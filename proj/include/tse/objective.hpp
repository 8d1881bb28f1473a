#pragma once

#include <string>
#include <vector>

#include "tse/common.hpp"

namespace tse::gbdt {

enum class ObjectiveKind : uint8_t {
    kSquaredError = 0,
    kAbsoluteError = 1,
    kMaskedWeightedSoftmax = 2,
};

// Loss configuration for the boosting engine. For the softmax objective the
// class weights are baked in here (computed from the training labels) and
// rows whose target is the ignore sentinel contribute zero gradient, zero
// hessian and nothing to the loss.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::kSquaredError;
    int num_classes = 1;
    std::vector<double> class_weights;  // size num_classes for softmax
    double epsilon = 1e-9;

    int outputs() const {
        return kind == ObjectiveKind::kMaskedWeightedSoftmax ? num_classes : 1;
    }

    static Objective squared_error() { return Objective{}; }
    static Objective absolute_error() {
        Objective o;
        o.kind = ObjectiveKind::kAbsoluteError;
        return o;
    }
    static Objective masked_weighted_softmax(int num_classes,
                                             std::vector<double> weights,
                                             double epsilon = 1e-9);

    void validate() const;
};

// w_c = N / (C * count_c), with N the number of non-ignored targets. Errors
// out naming the first class that never occurs.
std::vector<double> class_weights(const std::vector<double>& targets, int num_classes);

// In-place softmax over one row of raw scores.
void softmax_row(const double* raw, int n, double* out);

// Analytic gradients/hessians for raw-score predictions, row-major
// n_rows x outputs. Ignored softmax rows get all-zero g and h.
void gradients(const Objective& objective, const std::vector<double>& raw_scores,
               const std::vector<double>& targets, std::vector<double>& grad,
               std::vector<double>& hess);

// Per-row loss in raw-score space; what `gradients` differentiates. Used by
// the finite-difference checks and by validation scoring for regression.
double row_loss(const Objective& objective, const double* raw, double target);

// Class-weighted masked cross-entropy over probability rows:
// sum_n l_n / sum_n w_{y_n} with l_n = -w_{y_n} log((p_{n,y_n}+eps)/(sum_c p_{n,c}+eps)),
// ignored rows excluded from both sums. Errors when every row is ignored.
double masked_loss(const std::vector<double>& probabilities,
                   const std::vector<double>& targets,
                   const std::vector<double>& class_weights, double epsilon);

}  // namespace tse::gbdt
