#include "tse/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "tse/data_model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tse::gbdt {

namespace {

constexpr double kMinGain = 1e-12;

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

// ---- histogram binning ------------------------------------------------

struct FeatureBins {
    // finite value v lands in the first bin b with v <= uppers[b];
    // uppers.back() is +inf. The missing bin sits after the finite ones.
    std::vector<double> uppers;
    int finite_bins() const { return static_cast<int>(uppers.size()); }
    uint16_t missing_bin() const { return static_cast<uint16_t>(uppers.size()); }
};

FeatureBins build_bins(const FeatureMatrix& m, size_t col, int max_bins,
                       const std::vector<int>& rows) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (int r : rows) {
        double v = m.at(r, col);
        if (!is_missing(v)) vals.push_back(v);
    }
    FeatureBins fb;
    if (vals.empty()) return fb;  // all-missing column: missing bin only
    std::sort(vals.begin(), vals.end());

    size_t distinct = 1;
    for (size_t i = 1; i < vals.size(); ++i)
        if (vals[i] != vals[i - 1]) ++distinct;

    if (distinct <= static_cast<size_t>(max_bins)) {
        for (size_t i = 1; i < vals.size(); ++i)
            if (vals[i] != vals[i - 1])
                fb.uppers.push_back(0.5 * (vals[i - 1] + vals[i]));
    } else {
        // frequency quantile cuts
        for (int i = 1; i < max_bins; ++i) {
            size_t idx = vals.size() * static_cast<size_t>(i) / max_bins;
            if (idx == 0 || vals[idx] == vals[idx - 1]) continue;
            double cut = 0.5 * (vals[idx - 1] + vals[idx]);
            if (fb.uppers.empty() || cut > fb.uppers.back()) fb.uppers.push_back(cut);
        }
    }
    fb.uppers.push_back(std::numeric_limits<double>::infinity());
    return fb;
}

struct BinnedMatrix {
    size_t n_rows = 0;
    size_t n_cols = 0;
    std::vector<FeatureBins> bins;
    std::vector<uint16_t> codes;  // column-major: codes[f * n_rows + r]

    uint16_t code(size_t r, size_t f) const { return codes[f * n_rows + r]; }
};

// bins come from the rows that can carry gradient signal; codes cover all rows
BinnedMatrix bin_matrix(const FeatureMatrix& m, int max_bins,
                        const std::vector<int>& eligible) {
    BinnedMatrix b;
    b.n_rows = m.n_rows;
    b.n_cols = m.n_cols();
    b.bins.resize(b.n_cols);
    b.codes.resize(b.n_rows * b.n_cols);

#pragma omp parallel for schedule(dynamic)
    for (int64_t f = 0; f < static_cast<int64_t>(b.n_cols); ++f) {
        b.bins[f] = build_bins(m, f, max_bins, eligible);
        const auto& fb = b.bins[f];
        for (size_t r = 0; r < b.n_rows; ++r) {
            double v = m.at(r, f);
            uint16_t c;
            if (is_missing(v)) {
                c = fb.missing_bin();
            } else {
                auto it = std::lower_bound(fb.uppers.begin(), fb.uppers.end(), v);
                c = static_cast<uint16_t>(it - fb.uppers.begin());
            }
            b.codes[f * b.n_rows + r] = c;
        }
    }
    return b;
}

// ---- sampling ----------------------------------------------------------

std::vector<int> bernoulli_sample(const std::vector<int>& pool, double frac, Rng& rng) {
    if (frac >= 1.0) return pool;
    std::vector<int> out;
    for (int attempt = 0; attempt < 100; ++attempt) {
        out.clear();
        for (int x : pool)
            if (rng.uniform() < frac) out.push_back(x);
        if (!out.empty()) return out;
    }
    return pool;
}

// ---- split search ------------------------------------------------------

struct HistBin {
    double g = 0.0;
    double h = 0.0;
    int32_t c = 0;
};

struct SplitCand {
    double gain = kMinGain;
    int feature = -1;
    int bin = -1;
    bool default_left = false;
    double gl = 0.0, hl = 0.0;
    int cl = 0;

    bool found() const { return feature >= 0; }
};

struct BuildNode {
    int node_id = 0;
    int begin = 0, end = 0;  // range into the row order buffer
    double g = 0.0, h = 0.0;
    SplitCand split;
};

class TreeBuilder {
public:
    TreeBuilder(const BinnedMatrix& binned, const GbdtParams& params)
        : binned_(binned), params_(params) {
        hist_.resize(max_threads());
        for (auto& h : hist_) h.resize(params.histogram_bins + 2);
    }

    // grad/hess indexed by full row id; rows lists the sampled row ids.
    Tree build(const std::vector<double>& grad, const std::vector<double>& hess,
               const std::vector<int>& rows, const std::vector<int>& tree_cols,
               Rng& rng, std::vector<int>* leaf_of_sampled) {
        Tree tree;
        order_ = rows;
        scratch_.resize(order_.size());

        double g0 = 0, h0 = 0;
        for (int r : order_) {
            g0 += grad[r];
            h0 += hess[r];
        }
        tree.nodes.push_back(TreeNode{});
        std::vector<BuildNode> level{
            BuildNode{0, 0, static_cast<int>(order_.size()), g0, h0, {}}};
        std::vector<BuildNode> done;

        for (int depth = 0; depth < params_.max_depth && !level.empty(); ++depth) {
            std::vector<int> cols =
                bernoulli_sample(tree_cols, params_.colsample_bylevel, rng);
            std::vector<BuildNode> next;
            for (auto& node : level) {
                find_best_split(node, cols, grad, hess);
                if (!node.split.found()) {
                    done.push_back(node);
                    continue;
                }
                int mid = partition(node);
                const auto& fb = binned_.bins[node.split.feature];
                TreeNode& tn = tree.nodes[node.node_id];
                tn.split_feature = node.split.feature;
                tn.threshold = fb.uppers[node.split.bin];
                tn.default_left = node.split.default_left;
                tn.left = static_cast<int32_t>(tree.nodes.size());
                tn.right = tn.left + 1;
                tree.nodes.push_back(TreeNode{});
                tree.nodes.push_back(TreeNode{});

                BuildNode l{tn.left, node.begin, mid, node.split.gl, node.split.hl, {}};
                BuildNode r{tn.right, mid, node.end, node.g - node.split.gl,
                            node.h - node.split.hl, {}};
                next.push_back(l);
                next.push_back(r);
            }
            level = std::move(next);
        }
        for (auto& node : level) done.push_back(node);

        for (const auto& node : done) {
            tree.nodes[node.node_id].leaf_value =
                -node.g / (node.h + params_.l2_reg) * params_.learning_rate;
            if (leaf_of_sampled)
                for (int i = node.begin; i < node.end; ++i)
                    (*leaf_of_sampled)[i] = node.node_id;
        }
        if (leaf_of_sampled) {
            // leaf_of_sampled is aligned with the final row order
            sampled_order_ = order_;
        }
        return tree;
    }

    const std::vector<int>& final_order() const { return sampled_order_; }

private:
    void find_best_split(BuildNode& node, const std::vector<int>& cols,
                         const std::vector<double>& grad,
                         const std::vector<double>& hess) {
        int count = node.end - node.begin;
        if (count < 2 * params_.min_samples_leaf) return;

        std::vector<SplitCand> per_col(cols.size());

#pragma omp parallel for schedule(dynamic)
        for (int64_t ci = 0; ci < static_cast<int64_t>(cols.size()); ++ci) {
            per_col[ci] = best_for_feature(cols[ci], node, grad, hess);
        }

        // first strictly better candidate wins, columns scanned in order
        for (const auto& cand : per_col)
            if (cand.found() && cand.gain > node.split.gain) node.split = cand;
    }

    SplitCand best_for_feature(int f, const BuildNode& node,
                               const std::vector<double>& grad,
                               const std::vector<double>& hess) {
        const auto& fb = binned_.bins[f];
        const int nb = fb.finite_bins();
        SplitCand best;
        if (nb == 0) return best;  // feature entirely missing in training data

        auto& hist = hist_[thread_id()];
        for (int b = 0; b <= nb; ++b) hist[b] = HistBin{};
        const uint16_t* codes = binned_.codes.data() + static_cast<size_t>(f) * binned_.n_rows;
        for (int i = node.begin; i < node.end; ++i) {
            int r = order_[i];
            HistBin& hb = hist[codes[r]];
            hb.g += grad[r];
            hb.h += hess[r];
            ++hb.c;
        }
        const HistBin miss = hist[nb];
        const double lambda = params_.l2_reg;
        const int ct = node.end - node.begin;
        const double base = node.g * node.g / (node.h + lambda);

        double gl = 0, hl = 0;
        int cl = 0;
        auto consider = [&](double glx, double hlx, int clx, int bin, bool dleft) {
            int crx = ct - clx;
            if (clx < params_.min_samples_leaf || crx < params_.min_samples_leaf) return;
            double grx = node.g - glx, hrx = node.h - hlx;
            double gain =
                glx * glx / (hlx + lambda) + grx * grx / (hrx + lambda) - base;
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = f;
                best.bin = bin;
                best.default_left = dleft;
                best.gl = glx;
                best.hl = hlx;
                best.cl = clx;
            }
        };
        for (int b = 0; b < nb; ++b) {
            gl += hist[b].g;
            hl += hist[b].h;
            cl += hist[b].c;
            consider(gl, hl, cl, b, false);  // missing routed right
            if (miss.c > 0) consider(gl + miss.g, hl + miss.h, cl + miss.c, b, true);
        }
        return best;
    }

    // stable partition of the node's row range; returns the split point
    int partition(const BuildNode& node) {
        const auto& s = node.split;
        const uint16_t* codes =
            binned_.codes.data() + static_cast<size_t>(s.feature) * binned_.n_rows;
        const uint16_t miss = binned_.bins[s.feature].missing_bin();
        int l = node.begin;
        int ri = 0;
        for (int i = node.begin; i < node.end; ++i) {
            int r = order_[i];
            uint16_t c = codes[r];
            bool left = (c == miss) ? s.default_left : (c <= s.bin);
            if (left)
                order_[l++] = r;
            else
                scratch_[ri++] = r;
        }
        std::copy(scratch_.begin(), scratch_.begin() + ri, order_.begin() + l);
        return l;
    }

    const BinnedMatrix& binned_;
    const GbdtParams& params_;
    std::vector<int> order_;
    std::vector<int> scratch_;
    std::vector<int> sampled_order_;
    std::vector<std::vector<HistBin>> hist_;
};

double median_of(std::vector<double>& v) {
    size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// mean per-row loss over every row; ignored softmax rows contribute zero
double dataset_loss(const Objective& objective, const std::vector<double>& scores,
                    const std::vector<double>& targets) {
    const int k = objective.outputs();
    const size_t n = targets.size();
    if (objective.kind == ObjectiveKind::kMaskedWeightedSoftmax) {
        std::vector<double> probs(n * k);
        for (size_t i = 0; i < n; ++i)
            softmax_row(scores.data() + i * k, k, probs.data() + i * k);
        return masked_loss(probs, targets, objective.class_weights, objective.epsilon);
    }
    double sum = 0;
    for (size_t i = 0; i < n; ++i) sum += row_loss(objective, &scores[i], targets[i]);
    return sum / static_cast<double>(n);
}

void check_inputs(const FeatureMatrix& features, const std::vector<double>& targets,
                  const Objective& objective) {
    if (features.n_rows == 0 || features.n_cols() == 0)
        fail("train", "empty feature matrix");
    if (targets.size() != features.n_rows)
        fail("train", "target count does not match row count");
    std::unordered_set<std::string> seen;
    for (const auto& name : features.column_names)
        if (!seen.insert(name).second)
            fail("train", "duplicate feature column '" + name + "'");

    if (objective.kind == ObjectiveKind::kMaskedWeightedSoftmax) {
        bool any = false;
        for (double t : targets) {
            if (t == kIgnore) continue;
            if (!(t >= 0 && t < objective.num_classes &&
                  t == std::floor(t)))
                fail("train", "softmax target is not a class index or ignore");
            any = true;
        }
        if (!any) fail("train", "every target is ignored; nothing to train on");
    } else {
        for (double t : targets)
            if (!std::isfinite(t)) fail("train", "non-finite regression target");
    }
}

}  // namespace

void GbdtParams::validate() const {
    auto bad = [](const std::string& m) { fail("validation", "gbdt params: " + m); };
    if (max_depth < 1) bad("max_depth must be >= 1");
    if (!(learning_rate > 0)) bad("learning_rate must be > 0");
    if (!(subsample > 0 && subsample <= 1)) bad("subsample must be in (0,1]");
    if (!(colsample_bytree > 0 && colsample_bytree <= 1))
        bad("colsample_bytree must be in (0,1]");
    if (!(colsample_bylevel > 0 && colsample_bylevel <= 1))
        bad("colsample_bylevel must be in (0,1]");
    if (num_rounds < 1) bad("num_rounds must be >= 1");
    if (early_stopping_rounds < 1) bad("early_stopping_rounds must be >= 1");
    if (min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
    if (l2_reg < 0) bad("l2_reg must be >= 0");
    if (histogram_bins < 2 || histogram_bins > 60000)
        bad("histogram_bins out of range");
}

GbdtParams preset_a() {
    GbdtParams p;
    p.learning_rate = 0.01;
    p.subsample = 0.5;
    p.colsample_bytree = 0.9;
    p.colsample_bylevel = 0.9;
    return p;
}

GbdtParams preset_b() {
    GbdtParams p;
    p.learning_rate = 0.1;
    return p;
}

void refine_leaves(Tree& tree, const std::vector<double>& residuals,
                   const std::vector<int>& leaf_of_row, double learning_rate) {
    if (residuals.size() != leaf_of_row.size())
        fail("validation", "residuals and leaf assignments differ in length");
    std::unordered_map<int, std::vector<double>> by_leaf;
    for (size_t i = 0; i < residuals.size(); ++i)
        by_leaf[leaf_of_row[i]].push_back(residuals[i]);
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
        if (!tree.nodes[i].is_leaf()) continue;
        auto it = by_leaf.find(static_cast<int>(i));
        if (it == by_leaf.end() || it->second.empty())
            fail("train", "leaf " + std::to_string(i) + " has no rows to refine");
        tree.nodes[i].leaf_value = median_of(it->second) * learning_rate;
    }
}

GbdtModel train(const FeatureMatrix& features, const std::vector<double>& targets,
                const Objective& objective, const GbdtParams& params,
                const FeatureMatrix* valid_features,
                const std::vector<double>* valid_targets) {
    params.validate();
    objective.validate();
    check_inputs(features, targets, objective);

    const bool has_valid = valid_features != nullptr;
    if (has_valid != (valid_targets != nullptr))
        fail("train", "validation features and targets must be supplied together");
    if (has_valid) {
        if (valid_features->column_names != features.column_names)
            fail("train", "validation columns do not match training columns");
        if (valid_targets->size() != valid_features->n_rows)
            fail("train", "validation target count does not match row count");
        if (objective.kind == ObjectiveKind::kMaskedWeightedSoftmax) {
            bool any = false;
            for (double t : *valid_targets) any = any || t != kIgnore;
            if (!any) fail("train", "every validation target is ignored");
        }
    }

    const size_t n = features.n_rows;
    const int k = objective.outputs();

    GbdtModel model;
    model.objective = objective;
    model.params = params;
    model.feature_names = features.column_names;
    model.base_score.assign(k, 0.0);

    // base score: target mean for L2, median for L1, zero raw scores
    // (uniform probabilities) for softmax
    if (objective.kind == ObjectiveKind::kSquaredError) {
        double s = 0;
        for (double t : targets) s += t;
        model.base_score[0] = s / static_cast<double>(n);
    } else if (objective.kind == ObjectiveKind::kAbsoluteError) {
        std::vector<double> v(targets);
        model.base_score[0] = median_of(v);
    }

    // rows that can carry gradient signal
    std::vector<int> eligible;
    eligible.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (!(objective.kind == ObjectiveKind::kMaskedWeightedSoftmax &&
              targets[i] == kIgnore))
            eligible.push_back(static_cast<int>(i));

    BinnedMatrix binned = bin_matrix(features, params.histogram_bins, eligible);
    TreeBuilder builder(binned, params);
    Rng rng(params.seed);

    std::vector<int> all_cols(features.n_cols());
    std::iota(all_cols.begin(), all_cols.end(), 0);

    std::vector<double> scores(n * k);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) scores[i * k + c] = model.base_score[c];

    std::vector<double> valid_scores;
    if (has_valid) {
        valid_scores.resize(valid_features->n_rows * k);
        for (size_t i = 0; i < valid_features->n_rows; ++i)
            for (int c = 0; c < k; ++c) valid_scores[i * k + c] = model.base_score[c];
    }

    std::vector<double> grad, hess, gc(n), hc(n);
    double best_loss = std::numeric_limits<double>::infinity();
    int best_round = 0;
    int rounds_done = 0;

    for (int round = 1; round <= params.num_rounds; ++round) {
        gradients(objective, scores, targets, grad, hess);
        std::vector<int> rows = bernoulli_sample(eligible, params.subsample, rng);

        for (int cls = 0; cls < k; ++cls) {
            for (size_t i = 0; i < n; ++i) {
                gc[i] = grad[i * k + cls];
                hc[i] = hess[i * k + cls];
            }
            std::vector<int> tree_cols =
                bernoulli_sample(all_cols, params.colsample_bytree, rng);
            std::vector<int> leaf_of_sampled(rows.size());
            Tree tree = builder.build(gc, hc, rows, tree_cols, rng, &leaf_of_sampled);

            if (objective.kind == ObjectiveKind::kAbsoluteError) {
                const auto& order = builder.final_order();
                std::vector<double> residuals(order.size());
                for (size_t i = 0; i < order.size(); ++i)
                    residuals[i] = targets[order[i]] - scores[order[i]];
                refine_leaves(tree, residuals, leaf_of_sampled, params.learning_rate);
            }

            // update raw scores for every row (sampled or not)
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < static_cast<int64_t>(n); ++i)
                scores[i * k + cls] += tree.value_for_row(features.row(i));
            if (has_valid) {
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < static_cast<int64_t>(valid_features->n_rows); ++i)
                    valid_scores[i * k + cls] +=
                        tree.value_for_row(valid_features->row(i));
            }
            model.trees.push_back(std::move(tree));
        }
        rounds_done = round;
        model.train_loss_history.push_back(dataset_loss(objective, scores, targets));

        if (has_valid) {
            double vloss = dataset_loss(objective, valid_scores, *valid_targets);
            model.valid_loss_history.push_back(vloss);
            if (vloss < best_loss) {
                best_loss = vloss;
                best_round = round;
            } else if (round - best_round >= params.early_stopping_rounds) {
                break;
            }
        }
    }

    model.best_round = has_valid ? best_round : rounds_done;
    return model;
}

std::vector<double> predict(const GbdtModel& model, const FeatureMatrix& features) {
    if (features.column_names != model.feature_names)
        fail("validation", "feature columns do not match the model");
    const int k = model.objective.outputs();
    const size_t n = features.n_rows;
    const int rounds = std::min(model.best_round, model.rounds_built());

    std::vector<double> out(n * k);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
        const double* row = features.row(i);
        for (int c = 0; c < k; ++c) {
            double s = model.base_score[c];
            for (int r = 0; r < rounds; ++r)
                s += model.trees[static_cast<size_t>(r) * k + c].value_for_row(row);
            out[i * k + c] = s;
        }
        if (model.objective.kind == ObjectiveKind::kMaskedWeightedSoftmax) {
            std::vector<double> p(k);
            softmax_row(&out[i * k], k, p.data());
            std::copy(p.begin(), p.end(), &out[i * k]);
        }
    }
    return out;
}

}  // namespace tse::gbdt
