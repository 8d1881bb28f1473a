#include "tse/staging.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace tse {

namespace {

double round_half_away(double v) { return std::round(v); }

int clamp_round(double v, int lo, int hi) {
    int r = static_cast<int>(round_half_away(v));
    return std::clamp(r, lo, hi);
}

std::vector<double> ensemble_mean(const gbdt::GbdtModel& a, const gbdt::GbdtModel& b,
                                  const FeatureMatrix& rows) {
    std::vector<double> pa = gbdt::predict(a, rows);
    std::vector<double> pb = gbdt::predict(b, rows);
    for (size_t i = 0; i < pa.size(); ++i) pa[i] = 0.5 * (pa[i] + pb[i]);
    return pa;
}

}  // namespace

std::vector<std::string> stage1_column_names(const std::vector<NodeId>& layout) {
    static const char* suffix[kLags] = {"lag15", "lag30", "lag45", "lag60"};
    std::vector<std::string> names;
    names.reserve(layout.size() * kLags);
    for (NodeId n : layout)
        for (int k = 0; k < kLags; ++k)
            names.push_back("node" + std::to_string(n) + "_" + suffix[k]);
    return names;
}

std::vector<double> stage1_row(const CounterSnapshot& snapshot,
                               const std::vector<NodeId>& layout) {
    std::unordered_map<NodeId, const std::array<double, kLags>*> have;
    for (const auto& [node, lags] : snapshot.volumes) have[node] = &lags;

    std::vector<double> row;
    row.reserve(layout.size() * kLags);
    size_t matched = 0;
    for (NodeId n : layout) {
        auto it = have.find(n);
        if (it == have.end()) {
            for (int k = 0; k < kLags; ++k) row.push_back(missing_value());
        } else {
            ++matched;
            for (int k = 0; k < kLags; ++k) row.push_back((*it->second)[k]);
        }
    }
    if (matched != snapshot.volumes.size())
        fail("validation",
             "snapshot contains counter nodes outside the model layout "
             "(different city or graph?)");
    return row;
}

FeatureMatrix stage1_features(const CounterSnapshot& snapshot, const GraphIndex& graph) {
    FeatureMatrix m =
        FeatureMatrix::with_columns(stage1_column_names(graph.counter_nodes()));
    m.add_row(stage1_row(snapshot, graph.counter_nodes()));
    return m;
}

std::vector<int> StageOneModel::best_rounds() const {
    std::vector<int> out;
    for (const auto& m : models) out.push_back(m.best_round);
    return out;
}

StageOneModel train_stage1(const std::vector<const Instance*>& train,
                           const GraphIndex& graph, const StagePresets& presets,
                           const std::string& city, uint64_t seed,
                           const std::vector<const Instance*>* validation,
                           const std::vector<int>* fixed_rounds) {
    if (train.empty()) fail("train", "no training snapshots for stage 1");
    if (fixed_rounds && fixed_rounds->size() != 6)
        fail("train", "stage 1 expects 6 fixed round counts");
    if (validation && validation->empty()) validation = nullptr;

    StageOneModel model;
    model.city = city;
    model.counter_layout = graph.counter_nodes();

    auto build = [&](const std::vector<const Instance*>& insts) {
        FeatureMatrix m =
            FeatureMatrix::with_columns(stage1_column_names(model.counter_layout));
        for (const auto* inst : insts) {
            if (!inst->snapshot.true_context)
                fail("train", "training snapshot " + inst->id() +
                                   " is missing its true context");
            m.add_row(stage1_row(inst->snapshot, model.counter_layout));
        }
        return m;
    };

    FeatureMatrix train_m = build(train);
    FeatureMatrix valid_m;
    if (validation) valid_m = build(*validation);

    auto targets_of = [](const std::vector<const Instance*>& insts, int which) {
        std::vector<double> t;
        t.reserve(insts.size());
        for (const auto* inst : insts) {
            const TimeContext& c = *inst->snapshot.true_context;
            t.push_back(which == 0 ? c.month : which == 1 ? c.day_of_week : c.slot);
        }
        return t;
    };

    static const char* target_tag[3] = {"month", "dow", "slot"};
    for (int which = 0; which < 3; ++which) {
        std::vector<double> yt = targets_of(train, which);
        std::vector<double> yv;
        if (validation) yv = targets_of(*validation, which);
        for (int p = 0; p < 2; ++p) {
            gbdt::GbdtParams params = p == 0 ? presets.a : presets.b;
            params.seed = mix_seed(seed, std::string("stage1/") + target_tag[which] +
                                             (p == 0 ? "/a" : "/b"));
            if (fixed_rounds) {
                params.num_rounds = std::max(1, (*fixed_rounds)[which * 2 + p]);
                model.models.push_back(gbdt::train(train_m, yt,
                                                   gbdt::Objective::squared_error(),
                                                   params));
            } else {
                model.models.push_back(gbdt::train(
                    train_m, yt, gbdt::Objective::squared_error(), params,
                    validation ? &valid_m : nullptr, validation ? &yv : nullptr));
            }
        }
    }
    return model;
}

TimeContext predict_context(const StageOneModel& model, const CounterSnapshot& snapshot) {
    if (model.models.size() != 6) fail("validation", "stage 1 model is not fitted");
    FeatureMatrix row =
        FeatureMatrix::with_columns(stage1_column_names(model.counter_layout));
    row.add_row(stage1_row(snapshot, model.counter_layout));

    auto mean_of = [&](int which) {
        double a = gbdt::predict(model.models[which * 2], row)[0];
        double b = gbdt::predict(model.models[which * 2 + 1], row)[0];
        return 0.5 * (a + b);
    };

    TimeContext ctx;
    ctx.month = clamp_round(mean_of(0), 1, 12);
    ctx.day_of_week = clamp_round(mean_of(1), 0, 6);
    ctx.slot = clamp_round(mean_of(2), 0, kSlotsPerDay - 1);
    ctx.is_weekend = weekend_flag(ctx.day_of_week);
    return ctx;
}

std::vector<double> core_targets_for(const Instance& inst, const GraphIndex& graph) {
    std::unordered_map<EdgeId, int> labeled;
    for (const auto& l : inst.core_labels) labeled[l.edge_id] = l.cls;
    std::vector<double> t;
    t.reserve(graph.graph().edges.size());
    for (const auto& e : graph.graph().edges) {
        auto it = labeled.find(e.id);
        t.push_back(it == labeled.end() ? kIgnore : it->second);
    }
    return t;
}

std::vector<int> StageTwoModel::best_rounds() const {
    return {core_a.best_round, core_b.best_round, extended.best_round};
}

FeatureMatrix build_core_matrix(const std::vector<const Instance*>& instances,
                                const GraphIndex& graph, const CcEncodingTable& table,
                                bool exclude_own_day, std::vector<double>* targets) {
    FeatureMatrix m = FeatureMatrix::with_columns(core_feature_names());
    for (const auto* inst : instances) {
        std::optional<int32_t> ex;
        if (exclude_own_day) ex = inst->date.key();
        m.append(build_core_features(graph, inst->snapshot, inst->context(), table, ex));
        if (targets) {
            std::vector<double> t = core_targets_for(*inst, graph);
            targets->insert(targets->end(), t.begin(), t.end());
        }
    }
    return m;
}

FeatureMatrix build_extended_matrix(const std::vector<const Instance*>& instances,
                                    const GraphIndex& graph,
                                    const EtaEncodingTable& table,
                                    bool exclude_own_day, std::vector<double>* targets) {
    std::unordered_map<SegmentId, size_t> seg_row;
    for (size_t i = 0; i < graph.graph().supersegments.size(); ++i)
        seg_row[graph.graph().supersegments[i].id] = i;

    FeatureMatrix m = FeatureMatrix::with_columns(extended_feature_names());
    for (const auto* inst : instances) {
        if (inst->eta_labels.empty()) continue;
        std::optional<int32_t> ex;
        if (exclude_own_day) ex = inst->date.key();
        FeatureMatrix all = build_extended_features(graph, inst->context(), table, ex);
        for (const auto& l : inst->eta_labels) {
            auto it = seg_row.find(l.supersegment_id);
            if (it == seg_row.end())
                fail("train", "eta label references unknown super-segment " +
                                  std::to_string(l.supersegment_id));
            m.add_row(std::vector<double>(all.row(it->second),
                                          all.row(it->second) + all.n_cols()));
            if (targets) targets->push_back(l.eta);
        }
    }
    return m;
}

StageTwoModel train_stage2(const std::vector<const Instance*>& train,
                           const GraphIndex& graph, const StagePresets& presets,
                           const std::string& city, double pseudocount, uint64_t seed,
                           const std::vector<const Instance*>* validation,
                           const std::vector<int>* fixed_rounds) {
    if (train.empty()) fail("train", "no training instances for stage 2");
    if (fixed_rounds && fixed_rounds->size() != 3)
        fail("train", "stage 2 expects 3 fixed round counts");
    if (validation && validation->empty()) validation = nullptr;

    StageTwoModel model;
    model.city = city;

    // fit encoding tables on the training labels only
    std::vector<CcObservation> cc_obs;
    std::vector<EtaObservation> eta_obs;
    for (const auto* inst : train) {
        TimeContext ctx = inst->context();
        for (const auto& l : inst->core_labels)
            cc_obs.push_back({l.edge_id, inst->date.key(), ctx, l.cls});
        for (const auto& l : inst->eta_labels)
            eta_obs.push_back({l.supersegment_id, inst->date.key(), ctx, l.eta});
    }
    model.cc_table = CcEncodingTable::fit(cc_obs, pseudocount);
    if (eta_obs.empty()) fail("train", "no super-segment labels in the training data");
    model.eta_table = EtaEncodingTable::fit(eta_obs);

    std::vector<double> core_train_y;
    FeatureMatrix core_train_m =
        build_core_matrix(train, graph, model.cc_table, true, &core_train_y);
    std::vector<double> core_valid_y;
    FeatureMatrix core_valid_m;
    if (validation)
        core_valid_m =
            build_core_matrix(*validation, graph, model.cc_table, false, &core_valid_y);

    std::vector<double> weights = gbdt::class_weights(core_train_y, kNumClasses);
    gbdt::Objective core_obj =
        gbdt::Objective::masked_weighted_softmax(kNumClasses, weights);

    std::vector<double> ext_train_y;
    FeatureMatrix ext_train_m =
        build_extended_matrix(train, graph, model.eta_table, true, &ext_train_y);
    std::vector<double> ext_valid_y;
    FeatureMatrix ext_valid_m;
    if (validation)
        ext_valid_m =
            build_extended_matrix(*validation, graph, model.eta_table, false, &ext_valid_y);

    // ---- fit the three models ----
    auto fit = [&](const FeatureMatrix& tm, const std::vector<double>& ty,
                   const FeatureMatrix& vm, const std::vector<double>& vy,
                   const gbdt::Objective& obj, gbdt::GbdtParams params,
                   const std::string& tag, int fixed) {
        params.seed = mix_seed(seed, tag);
        if (fixed >= 0) {
            params.num_rounds = std::max(1, fixed);
            return gbdt::train(tm, ty, obj, params);
        }
        bool has_valid = validation && vm.n_rows > 0;
        return gbdt::train(tm, ty, obj, params, has_valid ? &vm : nullptr,
                           has_valid ? &vy : nullptr);
    };

    model.core_a = fit(core_train_m, core_train_y, core_valid_m, core_valid_y, core_obj,
                       presets.a, "stage2/core/a", fixed_rounds ? (*fixed_rounds)[0] : -1);
    model.core_b = fit(core_train_m, core_train_y, core_valid_m, core_valid_y, core_obj,
                       presets.b, "stage2/core/b", fixed_rounds ? (*fixed_rounds)[1] : -1);
    model.extended =
        fit(ext_train_m, ext_train_y, ext_valid_m, ext_valid_y,
            gbdt::Objective::absolute_error(), presets.b, "stage2/extended",
            fixed_rounds ? (*fixed_rounds)[2] : -1);
    return model;
}

StageTwoPrediction predict_stage2(const StageTwoModel& model, const GraphIndex& graph,
                                  const CounterSnapshot& snapshot,
                                  const TimeContext& ctx) {
    if (!model.cc_table.fitted() || !model.eta_table.fitted())
        fail("validation", "stage 2 model is not fitted");

    StageTwoPrediction out;
    FeatureMatrix core_m = build_core_features(graph, snapshot, ctx, model.cc_table);
    out.core_probabilities = ensemble_mean(model.core_a, model.core_b, core_m);
    // renormalize each probability row after averaging
    for (size_t r = 0; r < core_m.n_rows; ++r) {
        double* p = out.core_probabilities.data() + r * kNumClasses;
        double s = p[0] + p[1] + p[2];
        for (int c = 0; c < kNumClasses; ++c) p[c] /= s;
    }

    FeatureMatrix ext_m = build_extended_features(graph, ctx, model.eta_table);
    out.etas = gbdt::predict(model.extended, ext_m);
    for (double& e : out.etas) e = std::max(e, 1.0);  // positive floor
    return out;
}

}  // namespace tse
