#include "tse/objective.hpp"

#include <algorithm>
#include <cmath>

#include "tse/data_model.hpp"

namespace tse::gbdt {

Objective Objective::masked_weighted_softmax(int num_classes,
                                             std::vector<double> weights,
                                             double epsilon) {
    Objective o;
    o.kind = ObjectiveKind::kMaskedWeightedSoftmax;
    o.num_classes = num_classes;
    o.class_weights = std::move(weights);
    o.epsilon = epsilon;
    o.validate();
    return o;
}

void Objective::validate() const {
    if (epsilon <= 0) fail("validation", "objective epsilon must be > 0");
    if (kind == ObjectiveKind::kMaskedWeightedSoftmax) {
        if (num_classes < 2)
            fail("validation", "softmax objective needs num_classes >= 2");
        if (static_cast<int>(class_weights.size()) != num_classes)
            fail("validation", "class_weights size != num_classes");
        for (double w : class_weights)
            if (!(w > 0)) fail("validation", "class weights must be positive");
    } else if (num_classes != 1) {
        fail("validation", "regression objectives have num_classes == 1");
    }
}

std::vector<double> class_weights(const std::vector<double>& targets, int num_classes) {
    std::vector<int64_t> counts(num_classes, 0);
    int64_t n = 0;
    for (double t : targets) {
        if (t == kIgnore) continue;
        int cls = static_cast<int>(t);
        if (cls < 0 || cls >= num_classes || cls != t)
            fail("validation", "target is not a class index or ignore sentinel");
        ++counts[cls];
        ++n;
    }
    std::vector<double> w(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        if (counts[c] == 0)
            fail("validation",
                 "class " + std::string(class_name(c)) + " absent from targets");
        w[c] = static_cast<double>(n) / (num_classes * static_cast<double>(counts[c]));
    }
    return w;
}

void softmax_row(const double* raw, int n, double* out) {
    double mx = raw[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, raw[i]);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(raw[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
}

void gradients(const Objective& objective, const std::vector<double>& raw_scores,
               const std::vector<double>& targets, std::vector<double>& grad,
               std::vector<double>& hess) {
    objective.validate();
    const int k = objective.outputs();
    const size_t n = targets.size();
    if (raw_scores.size() != n * k)
        fail("validation", "raw score shape does not match targets");
    grad.assign(n * k, 0.0);
    hess.assign(n * k, 0.0);

    switch (objective.kind) {
        case ObjectiveKind::kSquaredError:
            for (size_t i = 0; i < n; ++i) {
                grad[i] = raw_scores[i] - targets[i];
                hess[i] = 1.0;
            }
            break;
        case ObjectiveKind::kAbsoluteError:
            for (size_t i = 0; i < n; ++i) {
                double d = raw_scores[i] - targets[i];
                grad[i] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                hess[i] = 1.0;
            }
            break;
        case ObjectiveKind::kMaskedWeightedSoftmax: {
            std::vector<double> p(k);
            for (size_t i = 0; i < n; ++i) {
                if (targets[i] == kIgnore) continue;  // zero g, zero h
                int y = static_cast<int>(targets[i]);
                if (y < 0 || y >= k || y != targets[i])
                    fail("validation", "softmax target is not a class index");
                double w = objective.class_weights[y];
                softmax_row(raw_scores.data() + i * k, k, p.data());
                for (int c = 0; c < k; ++c) {
                    grad[i * k + c] = w * (p[c] - (c == y ? 1.0 : 0.0));
                    hess[i * k + c] = w * p[c] * (1.0 - p[c]);
                }
            }
            break;
        }
    }
}

double row_loss(const Objective& objective, const double* raw, double target) {
    switch (objective.kind) {
        case ObjectiveKind::kSquaredError: {
            double d = raw[0] - target;
            return 0.5 * d * d;
        }
        case ObjectiveKind::kAbsoluteError:
            return std::fabs(raw[0] - target);
        case ObjectiveKind::kMaskedWeightedSoftmax: {
            if (target == kIgnore) return 0.0;
            int y = static_cast<int>(target);
            std::vector<double> p(objective.num_classes);
            softmax_row(raw, objective.num_classes, p.data());
            double sum = 0;
            for (double v : p) sum += v;
            return -objective.class_weights[y] *
                   std::log((p[y] + objective.epsilon) / (sum + objective.epsilon));
        }
    }
    fail("validation", "unknown objective kind");
}

double masked_loss(const std::vector<double>& probabilities,
                   const std::vector<double>& targets,
                   const std::vector<double>& class_weights, double epsilon) {
    if (epsilon < 0) fail("validation", "epsilon must be non-negative");
    const int k = static_cast<int>(class_weights.size());
    const size_t n = targets.size();
    if (probabilities.size() != n * k)
        fail("validation", "probability shape does not match targets");

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (targets[i] == kIgnore) continue;
        int y = static_cast<int>(targets[i]);
        if (y < 0 || y >= k)
            fail("validation", "target class out of range");
        double w = class_weights[y];
        double row_sum = 0.0;
        for (int c = 0; c < k; ++c) row_sum += probabilities[i * k + c];
        num += -w * std::log((probabilities[i * k + y] + epsilon) / (row_sum + epsilon));
        den += w;
    }
    if (den == 0.0) fail("validation", "masked loss undefined: every row is ignored");
    return num / den;
}

}  // namespace tse::gbdt
