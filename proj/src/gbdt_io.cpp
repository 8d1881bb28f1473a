#include "tse/gbdt.hpp"

namespace tse::gbdt {

namespace {
constexpr char kModelMagic[4] = {'T', 'S', 'E', 'M'};
constexpr uint32_t kModelVersion = 1;
}  // namespace

void write_model(BinWriter& w, const GbdtModel& model) {
    w.magic(kModelMagic);
    w.u32(kModelVersion);

    w.u8(static_cast<uint8_t>(model.objective.kind));
    w.u32(static_cast<uint32_t>(model.objective.num_classes));
    w.f64(model.objective.epsilon);
    w.u32(static_cast<uint32_t>(model.objective.class_weights.size()));
    for (double v : model.objective.class_weights) w.f64(v);

    const GbdtParams& p = model.params;
    w.i32(p.max_depth);
    w.f64(p.learning_rate);
    w.f64(p.subsample);
    w.f64(p.colsample_bytree);
    w.f64(p.colsample_bylevel);
    w.i32(p.num_rounds);
    w.i32(p.early_stopping_rounds);
    w.i32(p.min_samples_leaf);
    w.f64(p.l2_reg);
    w.i32(p.histogram_bins);
    w.u64(p.seed);

    w.u32(static_cast<uint32_t>(model.feature_names.size()));
    for (const auto& s : model.feature_names) w.str(s);
    w.u32(static_cast<uint32_t>(model.base_score.size()));
    for (double v : model.base_score) w.f64(v);
    w.i32(model.best_round);

    w.u32(static_cast<uint32_t>(model.trees.size()));
    for (const auto& t : model.trees) {
        w.u32(static_cast<uint32_t>(t.nodes.size()));
        for (const auto& nd : t.nodes) {
            w.i32(nd.split_feature);
            w.f64(nd.threshold);
            w.u8(nd.default_left ? 1 : 0);
            w.i32(nd.left);
            w.i32(nd.right);
            w.f64(nd.leaf_value);
        }
    }

    w.u32(static_cast<uint32_t>(model.train_loss_history.size()));
    for (double v : model.train_loss_history) w.f64(v);
    w.u32(static_cast<uint32_t>(model.valid_loss_history.size()));
    for (double v : model.valid_loss_history) w.f64(v);
}

GbdtModel read_model(BinReader& r) {
    r.expect_magic(kModelMagic);
    uint32_t version = r.u32();
    if (version != kModelVersion)
        fail("format", "unsupported model version " + std::to_string(version));

    GbdtModel m;
    m.objective.kind = static_cast<ObjectiveKind>(r.u8());
    m.objective.num_classes = static_cast<int>(r.u32());
    m.objective.epsilon = r.f64();
    m.objective.class_weights.resize(r.u32());
    for (double& v : m.objective.class_weights) v = r.f64();

    GbdtParams& p = m.params;
    p.max_depth = r.i32();
    p.learning_rate = r.f64();
    p.subsample = r.f64();
    p.colsample_bytree = r.f64();
    p.colsample_bylevel = r.f64();
    p.num_rounds = r.i32();
    p.early_stopping_rounds = r.i32();
    p.min_samples_leaf = r.i32();
    p.l2_reg = r.f64();
    p.histogram_bins = r.i32();
    p.seed = r.u64();

    m.feature_names.resize(r.u32());
    for (auto& s : m.feature_names) s = r.str();
    m.base_score.resize(r.u32());
    for (double& v : m.base_score) v = r.f64();
    m.best_round = r.i32();

    m.trees.resize(r.u32());
    for (auto& t : m.trees) {
        t.nodes.resize(r.u32());
        for (auto& nd : t.nodes) {
            nd.split_feature = r.i32();
            nd.threshold = r.f64();
            nd.default_left = r.u8() != 0;
            nd.left = r.i32();
            nd.right = r.i32();
            nd.leaf_value = r.f64();
        }
    }

    m.train_loss_history.resize(r.u32());
    for (double& v : m.train_loss_history) v = r.f64();
    m.valid_loss_history.resize(r.u32());
    for (double& v : m.valid_loss_history) v = r.f64();
    return m;
}

std::vector<uint8_t> serialize(const GbdtModel& model) {
    BinWriter w;
    write_model(w, model);
    return w.take();
}

GbdtModel deserialize(std::span<const uint8_t> bytes) {
    BinReader r(bytes);
    GbdtModel m = read_model(r);
    if (!r.done()) fail("format", "trailing bytes after model payload");
    return m;
}

}  // namespace tse::gbdt
