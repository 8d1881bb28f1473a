#include "tse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tse/objective.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tse {

namespace {
constexpr char kBundleMagic[4] = {'T', 'S', 'E', 'B'};
constexpr uint32_t kBundleVersion = 1;
constexpr double kMetricEpsilon = 1e-9;
}  // namespace

StagePresets default_pipeline_presets() {
    StagePresets p;
    p.a = gbdt::preset_a();
    p.b = gbdt::preset_b();
    // desk-scale round caps; early stopping still decides best_round
    p.a.num_rounds = 500;
    p.b.num_rounds = 300;
    return p;
}

void PipelineConfig::validate() const {
    if (city.empty()) fail("config", "city must be set");
    if (slots_per_day != kSlotsPerDay)
        fail("config", "slots_per_day must be " + std::to_string(kSlotsPerDay));
    if (!(pseudocount > 0)) fail("config", "pseudocount must be > 0");
    if (early_stopping_rounds < 1) fail("config", "early_stopping_rounds must be >= 1");
    if (validation_weeks < 1) fail("config", "validation_weeks must be >= 1");
    presets.a.validate();
    presets.b.validate();
}

uint64_t PipelineConfig::digest() const {
    auto params_str = [](const gbdt::GbdtParams& p) {
        std::ostringstream os;
        os.precision(17);
        os << p.max_depth << "," << p.learning_rate << "," << p.subsample << ","
           << p.colsample_bytree << "," << p.colsample_bylevel << "," << p.num_rounds
           << "," << p.early_stopping_rounds << "," << p.min_samples_leaf << ","
           << p.l2_reg << "," << p.histogram_bins << "," << p.seed;
        return os.str();
    };
    std::ostringstream os;
    os.precision(17);
    os << "city=" << city << ";slots=" << slots_per_day << ";w=" << pseudocount
       << ";esr=" << early_stopping_rounds << ";vweeks=" << validation_weeks
       << ";seed=" << seed << ";pa=" << params_str(presets.a)
       << ";pb=" << params_str(presets.b);
    return fnv1a64(os.str());
}

namespace {

void apply_preset_json(const json& j, gbdt::GbdtParams& p, const std::string& tag) {
    for (const auto& [key, value] : j.items()) {
        if (key == "max_depth") p.max_depth = value.get<int>();
        else if (key == "learning_rate") p.learning_rate = value.get<double>();
        else if (key == "subsample") p.subsample = value.get<double>();
        else if (key == "colsample_bytree") p.colsample_bytree = value.get<double>();
        else if (key == "colsample_bylevel") p.colsample_bylevel = value.get<double>();
        else if (key == "num_rounds") p.num_rounds = value.get<int>();
        else if (key == "min_samples_leaf") p.min_samples_leaf = value.get<int>();
        else if (key == "l2_reg") p.l2_reg = value.get<double>();
        else if (key == "histogram_bins") p.histogram_bins = value.get<int>();
        else fail("config", "unknown key '" + key + "' in " + tag);
    }
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail("config", std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "city") cfg.city = value.get<std::string>();
        else if (key == "data_dir") cfg.data_dir = value.get<std::string>();
        else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
        else if (key == "slots_per_day") cfg.slots_per_day = value.get<int>();
        else if (key == "pseudocount") cfg.pseudocount = value.get<double>();
        else if (key == "early_stopping_rounds")
            cfg.early_stopping_rounds = value.get<int>();
        else if (key == "validation_weeks") cfg.validation_weeks = value.get<int>();
        else if (key == "seed") cfg.seed = value.get<uint64_t>();
        else if (key == "preset_a") apply_preset_json(value, cfg.presets.a, "preset_a");
        else if (key == "preset_b") apply_preset_json(value, cfg.presets.b, "preset_b");
        else fail("config", "unknown config key '" + key + "'");
    }
    cfg.presets.a.early_stopping_rounds = cfg.early_stopping_rounds;
    cfg.presets.b.early_stopping_rounds = cfg.early_stopping_rounds;
    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    return from_json_text(read_text_file(path));
}

// ---- validation split -----------------------------------------------------

ValidationSplit split_validation(const std::vector<Instance>& instances,
                                 int validation_weeks, uint64_t seed) {
    if (validation_weeks < 1) fail("validation", "validation_weeks must be >= 1");

    // Monday-based calendar week of each distinct date
    std::set<int64_t> weeks;
    for (const auto& inst : instances)
        weeks.insert((inst.date.serial() - inst.date.day_of_week()) / 7);
    if (static_cast<int>(weeks.size()) <= validation_weeks)
        fail("validation", "insufficient span: dataset covers " +
                               std::to_string(weeks.size()) + " weeks, need more than " +
                               std::to_string(validation_weeks));

    std::vector<int64_t> pool(weeks.begin(), weeks.end());
    Rng rng(mix_seed(seed, "validation-split"));
    rng.shuffle(pool);
    std::set<int64_t> chosen(pool.begin(), pool.begin() + validation_weeks);

    ValidationSplit split;
    for (const auto& inst : instances) {
        int64_t w = (inst.date.serial() - inst.date.day_of_week()) / 7;
        (chosen.count(w) ? split.valid : split.train).push_back(&inst);
    }
    return split;
}

// ---- bundle io --------------------------------------------------------------

std::vector<uint8_t> serialize_bundle(const ModelBundle& bundle) {
    BinWriter w;
    w.magic(kBundleMagic);
    w.u32(kBundleVersion);
    w.str(bundle.city);
    w.u64(bundle.config_digest);

    w.str(bundle.stage1.city);
    w.u32(static_cast<uint32_t>(bundle.stage1.counter_layout.size()));
    for (NodeId n : bundle.stage1.counter_layout) w.i64(n);
    w.u32(static_cast<uint32_t>(bundle.stage1.models.size()));
    for (const auto& m : bundle.stage1.models) gbdt::write_model(w, m);

    w.str(bundle.stage2.city);
    gbdt::write_model(w, bundle.stage2.core_a);
    gbdt::write_model(w, bundle.stage2.core_b);
    gbdt::write_model(w, bundle.stage2.extended);
    bundle.stage2.cc_table.write(w);
    bundle.stage2.eta_table.write(w);
    return w.take();
}

ModelBundle deserialize_bundle(std::span<const uint8_t> bytes) {
    BinReader r(bytes);
    r.expect_magic(kBundleMagic);
    uint32_t version = r.u32();
    if (version != kBundleVersion)
        fail("format", "unsupported bundle version " + std::to_string(version));

    ModelBundle b;
    b.city = r.str();
    b.config_digest = r.u64();

    b.stage1.city = r.str();
    b.stage1.counter_layout.resize(r.u32());
    for (NodeId& n : b.stage1.counter_layout) n = r.i64();
    uint32_t n_models = r.u32();
    for (uint32_t i = 0; i < n_models; ++i)
        b.stage1.models.push_back(gbdt::read_model(r));

    b.stage2.city = r.str();
    b.stage2.core_a = gbdt::read_model(r);
    b.stage2.core_b = gbdt::read_model(r);
    b.stage2.extended = gbdt::read_model(r);
    b.stage2.cc_table = CcEncodingTable::read(r);
    b.stage2.eta_table = EtaEncodingTable::read(r);
    if (!r.done()) fail("format", "trailing bytes after bundle payload");
    return b;
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
    auto bytes = serialize_bundle(bundle);
    write_file_atomic(path,
                      std::string(reinterpret_cast<const char*>(bytes.data()),
                                  bytes.size()));
}

ModelBundle load_bundle(const std::string& path) {
    std::string text = read_text_file(path);
    return deserialize_bundle(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

// ---- training protocol ------------------------------------------------------

ModelBundle retrain_phase2(const PipelineConfig& cfg, const Dataset& data,
                           const std::vector<int>& stage1_rounds,
                           const std::vector<int>& stage2_rounds) {
    GraphIndex gi(data.graph);
    auto all = instance_ptrs(data.train);
    ModelBundle bundle;
    bundle.city = cfg.city;
    bundle.config_digest = cfg.digest();
    bundle.stage1 = train_stage1(all, gi, cfg.presets, cfg.city, cfg.seed, nullptr,
                                 &stage1_rounds);
    bundle.stage2 = train_stage2(all, gi, cfg.presets, cfg.city, cfg.pseudocount,
                                 cfg.seed, nullptr, &stage2_rounds);
    return bundle;
}

ModelBundle train_full_on(const PipelineConfig& cfg, const Dataset& data,
                          const ValidationSplit& split) {
    cfg.validate();
    if (data.city != cfg.city)
        fail("config", "config city '" + cfg.city + "' does not match dataset city '" +
                           data.city + "'");
    GraphIndex gi(data.graph);

    // phase 1: early stopping against the validation days
    StageOneModel s1 = train_stage1(split.train, gi, cfg.presets, cfg.city, cfg.seed,
                                    &split.valid);
    StageTwoModel s2 = train_stage2(split.train, gi, cfg.presets, cfg.city,
                                    cfg.pseudocount, cfg.seed, &split.valid);

    if (split.valid.empty()) {
        // nothing held out: phase 2 would retrain on identical data for the
        // same rounds, so phase 1 already is the final model
        ModelBundle bundle;
        bundle.city = cfg.city;
        bundle.config_digest = cfg.digest();
        bundle.stage1 = std::move(s1);
        bundle.stage2 = std::move(s2);
        return bundle;
    }

    // phase 2: retrain on train+validation for the recorded best rounds
    return retrain_phase2(cfg, data, s1.best_rounds(), s2.best_rounds());
}

ModelBundle train_full(const PipelineConfig& cfg) {
    cfg.validate();
    Dataset data = ingest_dataset(cfg.data_dir);
    ValidationSplit split =
        split_validation(data.train, cfg.validation_weeks, cfg.seed);
    ModelBundle bundle = train_full_on(cfg, data, split);
    fs::create_directories(cfg.out_dir);
    save_bundle(cfg.out_dir + "/bundle.bin", bundle);

    std::ostringstream os;
    os << "city: " << cfg.city << "\n";
    os << "train_instances: " << split.train.size() << "\n";
    os << "validation_instances: " << split.valid.size() << "\n";
    os << "stage1_best_rounds:";
    for (int r : bundle.stage1.best_rounds()) os << " " << r;
    os << "\nstage2_best_rounds:";
    for (int r : bundle.stage2.best_rounds()) os << " " << r;
    os << "\nconfig_digest: " << bundle.config_digest << "\n";
    write_file_atomic(cfg.out_dir + "/train_summary.txt", os.str());
    return bundle;
}

// ---- prediction and evaluation ----------------------------------------------

namespace {

ModelBundle load_checked_bundle(const PipelineConfig& cfg) {
    ModelBundle bundle = load_bundle(cfg.out_dir + "/bundle.bin");
    if (bundle.config_digest != cfg.digest())
        fail("digest",
             "bundle was trained under a different configuration (digest mismatch)");
    if (bundle.city != cfg.city)
        fail("digest", "bundle city '" + bundle.city + "' does not match config");
    return bundle;
}

// per-condition outputs for one test instance
struct InstancePrediction {
    std::vector<double> core_probs;  // edges x 3
    std::vector<double> etas;        // per segment, graph order
};

// scores a sequence of per-instance predictions against the test labels
class TestScorer {
public:
    TestScorer(const Dataset& data, const GraphIndex& gi) : gi_(gi), data_(data) {
        for (size_t i = 0; i < gi.graph().supersegments.size(); ++i)
            seg_row_[gi.graph().supersegments[i].id] = i;
        for (const auto& inst : data.test) {
            auto t = core_targets_for(inst, gi);
            core_targets_.insert(core_targets_.end(), t.begin(), t.end());
        }
        core_weights_ = gbdt::class_weights(core_targets_, kNumClasses);
    }

    const std::vector<double>& core_weights() const { return core_weights_; }
    const std::vector<double>& core_targets() const { return core_targets_; }

    ConditionScores score(const std::vector<InstancePrediction>& preds) const {
        if (preds.size() != data_.test.size())
            fail("validation", "prediction count does not match test instances");
        std::vector<double> probs;
        std::vector<double> eta_pred, eta_true;
        for (size_t i = 0; i < preds.size(); ++i) {
            probs.insert(probs.end(), preds[i].core_probs.begin(),
                         preds[i].core_probs.end());
            for (const auto& l : data_.test[i].eta_labels) {
                eta_pred.push_back(preds[i].etas[seg_row_.at(l.supersegment_id)]);
                eta_true.push_back(l.eta);
            }
        }
        ConditionScores s;
        s.core_loss = core_metric(probs, core_targets_, core_weights_, kMetricEpsilon);
        s.extended_mae = extended_metric(eta_pred, eta_true);
        return s;
    }

private:
    const GraphIndex& gi_;
    const Dataset& data_;
    std::map<SegmentId, size_t> seg_row_;
    std::vector<double> core_targets_;
    std::vector<double> core_weights_;
};

std::vector<double> renormalized_mean(const std::vector<double>& pa,
                                      const std::vector<double>& pb) {
    std::vector<double> p(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) p[i] = 0.5 * (pa[i] + pb[i]);
    for (size_t r = 0; r * kNumClasses < p.size(); ++r) {
        double s = 0;
        for (int c = 0; c < kNumClasses; ++c) s += p[r * kNumClasses + c];
        for (int c = 0; c < kNumClasses; ++c) p[r * kNumClasses + c] /= s;
    }
    return p;
}

}  // namespace

void predict_cmd(const PipelineConfig& cfg) {
    cfg.validate();
    Dataset data = ingest_dataset(cfg.data_dir);
    ModelBundle bundle = load_checked_bundle(cfg);
    GraphIndex gi(data.graph);

    std::ostringstream ctxs, core, ext;
    ctxs << "snapshot_id,month,day_of_week,slot,is_weekend\n";
    core << "snapshot_id,edge_id,p_red,p_yellow,p_green,argmax\n";
    ext << "snapshot_id,supersegment_id,eta_seconds\n";

    for (const auto& inst : data.test) {
        TimeContext ctx = predict_context(bundle.stage1, inst.snapshot);
        StageTwoPrediction pred = predict_stage2(bundle.stage2, gi, inst.snapshot, ctx);
        std::string id = inst.id();
        ctxs << id << "," << ctx.month << "," << ctx.day_of_week << "," << ctx.slot
             << "," << (ctx.is_weekend ? 1 : 0) << "\n";
        for (size_t e = 0; e < gi.graph().edges.size(); ++e) {
            const double* p = pred.core_probabilities.data() + e * kNumClasses;
            int arg = 0;
            for (int c = 1; c < kNumClasses; ++c)
                if (p[c] > p[arg]) arg = c;
            core << id << "," << gi.graph().edges[e].id << "," << format_double(p[0])
                 << "," << format_double(p[1]) << "," << format_double(p[2]) << ","
                 << class_name(arg) << "\n";
        }
        for (size_t s = 0; s < gi.graph().supersegments.size(); ++s)
            ext << id << "," << gi.graph().supersegments[s].id << ","
                << format_double(pred.etas[s]) << "\n";
    }
    fs::create_directories(cfg.out_dir);
    write_file_atomic(cfg.out_dir + "/contexts.csv", ctxs.str());
    write_file_atomic(cfg.out_dir + "/core_predictions.csv", core.str());
    write_file_atomic(cfg.out_dir + "/extended_predictions.csv", ext.str());
}

EvalReport evaluate_on(const PipelineConfig& cfg, const Dataset& data,
                       const ModelBundle& bundle) {
    if (data.test.empty()) fail("validation", "no held-out labeled days to evaluate");
    GraphIndex gi(data.graph);
    TestScorer scorer(data, gi);

    std::vector<TimeContext> predicted, truth;
    std::vector<InstancePrediction> preds;
    for (const auto& inst : data.test) {
        TimeContext ctx = predict_context(bundle.stage1, inst.snapshot);
        predicted.push_back(ctx);
        truth.push_back(inst.context());
        StageTwoPrediction p = predict_stage2(bundle.stage2, gi, inst.snapshot, ctx);
        preds.push_back({std::move(p.core_probabilities), std::move(p.etas)});
    }
    ConditionScores s = scorer.score(preds);

    EvalReport report;
    report.city = cfg.city;
    report.snapshots = data.test.size();
    report.core_rows = scorer.core_targets().size();
    report.core_ignored = static_cast<size_t>(
        std::count(scorer.core_targets().begin(), scorer.core_targets().end(),
                   static_cast<double>(kIgnore)));
    report.core_loss = s.core_loss;
    size_t eta_rows = 0;
    for (const auto& inst : data.test) eta_rows += inst.eta_labels.size();
    report.extended_rows = eta_rows;
    report.extended_mae = s.extended_mae;
    auto stage1 = stage1_metric(predicted, truth);
    report.month = stage1[0];
    report.day_of_week = stage1[1];
    report.slot = stage1[2];
    return report;
}

EvalReport evaluate_cmd(const PipelineConfig& cfg) {
    cfg.validate();
    Dataset data = ingest_dataset(cfg.data_dir);
    ModelBundle bundle = load_checked_bundle(cfg);
    EvalReport report = evaluate_on(cfg, data, bundle);
    fs::create_directories(cfg.out_dir);
    write_file_atomic(cfg.out_dir + "/eval_report.txt", report.to_text());
    return report;
}

// ---- ablation ----------------------------------------------------------------

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os.precision(9);
    auto line = [&](const char* name, const ConditionScores& s) {
        os << "core_loss_" << name << ": " << s.core_loss << "\n";
        os << "extended_mae_" << name << ": " << s.extended_mae << "\n";
    };
    line("predicted", predicted);
    line("nulled", nulled);
    line("retrained", retrained);
    line("ground_truth", ground_truth);
    line("te_only", te_only);
    os << "delta_core_pct: " << delta_core_pct << "\n";
    os << "delta_extended_pct: " << delta_extended_pct << "\n";
    return os.str();
}

AblationReport ablate_on(const PipelineConfig& cfg, const Dataset& data,
                         const ModelBundle& bundle) {
    if (data.test.empty()) fail("validation", "no held-out labeled days to ablate");
    GraphIndex gi(data.graph);
    TestScorer scorer(data, gi);
    const StageTwoModel& s2 = bundle.stage2;
    AblationReport report;

    // (a) full two-stage with predicted contexts, (c) with true contexts
    std::vector<InstancePrediction> with_pred, with_truth;
    std::vector<TimeContext> pred_ctx;
    for (const auto& inst : data.test) {
        TimeContext ctx = predict_context(bundle.stage1, inst.snapshot);
        pred_ctx.push_back(ctx);
        StageTwoPrediction p = predict_stage2(s2, gi, inst.snapshot, ctx);
        with_pred.push_back({std::move(p.core_probabilities), std::move(p.etas)});
        StageTwoPrediction q = predict_stage2(s2, gi, inst.snapshot, inst.context());
        with_truth.push_back({std::move(q.core_probabilities), std::move(q.etas)});
    }
    report.predicted = scorer.score(with_pred);
    report.ground_truth = scorer.score(with_truth);

    // (b) same models, context columns blanked; context value is irrelevant
    // for the surviving columns, so any fixed one will do
    const TimeContext dummy = TimeContext::from(Date{2000, 1, 3}, 0);
    std::vector<InstancePrediction> nulled;
    for (const auto& inst : data.test) {
        FeatureMatrix core_m =
            build_core_features(gi, inst.snapshot, dummy, s2.cc_table);
        core_m = core_m.with_columns_nulled(core_context_columns());
        InstancePrediction p;
        p.core_probs = renormalized_mean(gbdt::predict(s2.core_a, core_m),
                                         gbdt::predict(s2.core_b, core_m));
        FeatureMatrix ext_m = build_extended_features(gi, dummy, s2.eta_table);
        ext_m = ext_m.with_columns_nulled(extended_context_columns());
        p.etas = gbdt::predict(s2.extended, ext_m);
        for (double& e : p.etas) e = std::max(e, 1.0);
        nulled.push_back(std::move(p));
    }
    report.nulled = scorer.score(nulled);

    // (b') retrained without the context columns, same two-phase protocol
    {
        ValidationSplit split =
            split_validation(data.train, cfg.validation_weeks, cfg.seed);
        auto all = instance_ptrs(data.train);

        std::vector<CcObservation> cc_obs;
        std::vector<EtaObservation> eta_obs;
        for (const auto* inst : split.train) {
            TimeContext ctx = inst->context();
            for (const auto& l : inst->core_labels)
                cc_obs.push_back({l.edge_id, inst->date.key(), ctx, l.cls});
            for (const auto& l : inst->eta_labels)
                eta_obs.push_back({l.supersegment_id, inst->date.key(), ctx, l.eta});
        }
        CcEncodingTable cc_p1 = CcEncodingTable::fit(cc_obs, cfg.pseudocount);
        EtaEncodingTable eta_p1 = EtaEncodingTable::fit(eta_obs);

        auto context_free_core = [&](const std::vector<const Instance*>& insts,
                                     const CcEncodingTable& table, bool exclude,
                                     std::vector<double>* y) {
            return build_core_matrix(insts, gi, table, exclude, y)
                .without_columns(core_context_columns());
        };
        auto context_free_ext = [&](const std::vector<const Instance*>& insts,
                                    const EtaEncodingTable& table, bool exclude,
                                    std::vector<double>* y) {
            return build_extended_matrix(insts, gi, table, exclude, y)
                .without_columns(extended_context_columns());
        };

        auto train_one = [&](const FeatureMatrix& tm, const std::vector<double>& ty,
                             const FeatureMatrix& vm, const std::vector<double>& vy,
                             const gbdt::Objective& obj, gbdt::GbdtParams params,
                             const std::string& tag, int fixed) {
            params.seed = mix_seed(cfg.seed, tag);
            if (fixed >= 0) {
                params.num_rounds = std::max(1, fixed);
                return gbdt::train(tm, ty, obj, params);
            }
            return gbdt::train(tm, ty, obj, params, vm.n_rows ? &vm : nullptr,
                               vm.n_rows ? &vy : nullptr);
        };

        std::vector<double> ty, vy;
        FeatureMatrix tm = context_free_core(split.train, cc_p1, true, &ty);
        FeatureMatrix vm = context_free_core(split.valid, cc_p1, false, &vy);
        gbdt::Objective obj = gbdt::Objective::masked_weighted_softmax(
            kNumClasses, gbdt::class_weights(ty, kNumClasses));
        gbdt::GbdtModel ca = train_one(tm, ty, vm, vy, obj, cfg.presets.a,
                                       "ablation/core/a", -1);
        gbdt::GbdtModel cb = train_one(tm, ty, vm, vy, obj, cfg.presets.b,
                                       "ablation/core/b", -1);

        std::vector<double> ety, evy;
        FeatureMatrix etm = context_free_ext(split.train, eta_p1, true, &ety);
        FeatureMatrix evm = context_free_ext(split.valid, eta_p1, false, &evy);
        gbdt::GbdtModel ce =
            train_one(etm, ety, evm, evy, gbdt::Objective::absolute_error(),
                      cfg.presets.b, "ablation/extended", -1);

        // phase 2 on train+validation for the recorded rounds
        std::vector<double> ty2, ety2;
        FeatureMatrix tm2 = context_free_core(all, s2.cc_table, true, &ty2);
        FeatureMatrix etm2 = context_free_ext(all, s2.eta_table, true, &ety2);
        gbdt::Objective obj2 = gbdt::Objective::masked_weighted_softmax(
            kNumClasses, gbdt::class_weights(ty2, kNumClasses));
        FeatureMatrix none;
        std::vector<double> none_y;
        ca = train_one(tm2, ty2, none, none_y, obj2, cfg.presets.a, "ablation/core/a",
                       ca.best_round);
        cb = train_one(tm2, ty2, none, none_y, obj2, cfg.presets.b, "ablation/core/b",
                       cb.best_round);
        ce = train_one(etm2, ety2, none, none_y, gbdt::Objective::absolute_error(),
                       cfg.presets.b, "ablation/extended", ce.best_round);

        std::vector<InstancePrediction> retrained;
        for (const auto& inst : data.test) {
            FeatureMatrix core_m =
                build_core_features(gi, inst.snapshot, dummy, s2.cc_table)
                    .without_columns(core_context_columns());
            InstancePrediction p;
            p.core_probs = renormalized_mean(gbdt::predict(ca, core_m),
                                             gbdt::predict(cb, core_m));
            FeatureMatrix ext_m = build_extended_features(gi, dummy, s2.eta_table)
                                      .without_columns(extended_context_columns());
            p.etas = gbdt::predict(ce, ext_m);
            for (double& e : p.etas) e = std::max(e, 1.0);
            retrained.push_back(std::move(p));
        }
        report.retrained = scorer.score(retrained);
    }

    // (d) table lookups alone, using the predicted context
    std::vector<InstancePrediction> te_only;
    for (size_t i = 0; i < data.test.size(); ++i) {
        const TimeContext& ctx = pred_ctx[i];
        InstancePrediction p;
        for (const auto& e : gi.graph().edges)
            for (int c = 0; c < kNumClasses; ++c)
                p.core_probs.push_back(
                    s2.cc_table.lookup(e.id, CondSet::kSlotWeekend, ctx, c));
        for (const auto& seg : gi.graph().supersegments)
            p.etas.push_back(s2.eta_table.lookup(seg.id, CondSet::kSlotDow, ctx));
        te_only.push_back(std::move(p));
    }
    report.te_only = scorer.score(te_only);

    report.delta_core_pct = (report.predicted.core_loss - report.ground_truth.core_loss) /
                            report.predicted.core_loss * 100.0;
    report.delta_extended_pct =
        (report.predicted.extended_mae - report.ground_truth.extended_mae) /
        report.predicted.extended_mae * 100.0;
    return report;
}

AblationReport ablate(const PipelineConfig& cfg) {
    cfg.validate();
    Dataset data = ingest_dataset(cfg.data_dir);
    ModelBundle bundle = load_checked_bundle(cfg);
    AblationReport report = ablate_on(cfg, data, bundle);
    fs::create_directories(cfg.out_dir);
    write_file_atomic(cfg.out_dir + "/ablation_report.txt", report.to_text());
    return report;
}

}  // namespace tse
