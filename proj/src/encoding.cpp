#include "tse/encoding.hpp"

#include <algorithm>
#include <cmath>

namespace tse {

uint32_t cond_value(CondSet set, const TimeContext& ctx) {
    switch (set) {
        case CondSet::kNone: return 0;
        case CondSet::kSlot: return static_cast<uint32_t>(ctx.slot);
        case CondSet::kWeekend: return ctx.is_weekend ? 1u : 0u;
        case CondSet::kDow: return static_cast<uint32_t>(ctx.day_of_week);
        case CondSet::kSlotWeekend:
            return static_cast<uint32_t>(ctx.slot) * 2u + (ctx.is_weekend ? 1u : 0u);
        case CondSet::kSlotDow:
            return static_cast<uint32_t>(ctx.slot) * 7u +
                   static_cast<uint32_t>(ctx.day_of_week);
    }
    fail("validation", "unknown conditioning set");
}

// ---- congestion-class table ---------------------------------------------

CcEncodingTable CcEncodingTable::fit(const std::vector<CcObservation>& observations,
                                     double pseudocount) {
    if (!(pseudocount > 0)) fail("validation", "pseudocount must be > 0");
    CcEncodingTable t;
    t.w_ = pseudocount;
    size_t used = 0;
    for (const auto& o : observations) {
        if (o.cls == kIgnore) continue;
        if (o.cls < 0 || o.cls >= kNumClasses)
            fail("validation", "congestion class out of range");
        if (!o.ctx.valid()) fail("validation", "invalid time context in labels");
        ++used;
        ++t.global_total_[o.cls];
        ++t.global_by_day_[o.date_key][o.cls];
        for (CondSet s : kCondSets) {
            TableKey key{o.edge, static_cast<uint8_t>(s), cond_value(s, o.ctx)};
            Cell& cell = t.cells_[key];
            ++cell.total[o.cls];
            ++cell.by_day[o.date_key][o.cls];
        }
    }
    if (used == 0) fail("validation", "empty congestion label set");
    t.fitted_ = true;
    return t;
}

double CcEncodingTable::lookup(EdgeId edge, CondSet set, const TimeContext& ctx,
                               int cls, std::optional<int32_t> exclude_day) const {
    if (!fitted_) fail("validation", "encoding table not fitted");
    if (cls < 0 || cls >= kNumClasses)
        fail("validation", "congestion class out of range");

    std::array<int64_t, kNumClasses> global = global_total_;
    if (exclude_day) {
        auto it = global_by_day_.find(*exclude_day);
        if (it != global_by_day_.end())
            for (int c = 0; c < kNumClasses; ++c) global[c] -= it->second[c];
    }
    int64_t global_n = global[0] + global[1] + global[2];
    double mean_global;
    if (global_n > 0) {
        mean_global = static_cast<double>(global[cls]) / static_cast<double>(global_n);
    } else {
        // exclusion removed the whole training set; fall back to the full fractions
        int64_t n = global_total_[0] + global_total_[1] + global_total_[2];
        mean_global = static_cast<double>(global_total_[cls]) / static_cast<double>(n);
    }

    int64_t count_cls = 0, count_all = 0;
    auto it = cells_.find(TableKey{edge, static_cast<uint8_t>(set), cond_value(set, ctx)});
    if (it != cells_.end()) {
        std::array<int64_t, kNumClasses> c = it->second.total;
        if (exclude_day) {
            auto d = it->second.by_day.find(*exclude_day);
            if (d != it->second.by_day.end())
                for (int i = 0; i < kNumClasses; ++i) c[i] -= d->second[i];
        }
        count_cls = c[cls];
        count_all = c[0] + c[1] + c[2];
    }
    return (static_cast<double>(count_cls) + w_ * mean_global) /
           (static_cast<double>(count_all) + w_);
}

void CcEncodingTable::write(BinWriter& w) const {
    w.magic("TSET");
    w.u32(1);
    w.u8(0);  // table kind: congestion
    w.f64(w_);
    w.u32(static_cast<uint32_t>(global_by_day_.size()));
    for (const auto& [day, counts] : global_by_day_) {
        w.i32(day);
        for (int64_t c : counts) w.i64(c);
    }
    std::vector<TableKey> keys;
    keys.reserve(cells_.size());
    for (const auto& [k, _] : cells_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    w.u32(static_cast<uint32_t>(keys.size()));
    for (const auto& k : keys) {
        const Cell& cell = cells_.at(k);
        w.i64(k.entity);
        w.u8(k.set);
        w.u32(k.value);
        w.u32(static_cast<uint32_t>(cell.by_day.size()));
        for (const auto& [day, counts] : cell.by_day) {
            w.i32(day);
            for (int32_t c : counts) w.i32(c);
        }
    }
}

CcEncodingTable CcEncodingTable::read(BinReader& r) {
    r.expect_magic("TSET");
    uint32_t version = r.u32();
    if (version != 1) fail("format", "unsupported table version");
    if (r.u8() != 0) fail("format", "expected congestion table payload");
    CcEncodingTable t;
    t.w_ = r.f64();
    uint32_t days = r.u32();
    for (uint32_t i = 0; i < days; ++i) {
        int32_t day = r.i32();
        auto& counts = t.global_by_day_[day];
        for (int c = 0; c < kNumClasses; ++c) {
            counts[c] = r.i64();
            t.global_total_[c] += counts[c];
        }
    }
    uint32_t n_cells = r.u32();
    for (uint32_t i = 0; i < n_cells; ++i) {
        TableKey k;
        k.entity = r.i64();
        k.set = r.u8();
        k.value = r.u32();
        Cell& cell = t.cells_[k];
        uint32_t nd = r.u32();
        for (uint32_t d = 0; d < nd; ++d) {
            int32_t day = r.i32();
            auto& counts = cell.by_day[day];
            for (int c = 0; c < kNumClasses; ++c) {
                counts[c] = r.i32();
                cell.total[c] += counts[c];
            }
        }
    }
    t.fitted_ = true;
    return t;
}

// ---- eta table ------------------------------------------------------------

EtaEncodingTable EtaEncodingTable::fit(const std::vector<EtaObservation>& observations) {
    if (observations.empty()) fail("validation", "empty eta label set");
    EtaEncodingTable t;
    for (const auto& o : observations) {
        if (!(o.eta > 0)) fail("validation", "eta labels must be positive");
        if (!o.ctx.valid()) fail("validation", "invalid time context in labels");
        auto& g = t.global_.by_day[o.date_key];
        g.first += o.eta;
        g.second += 1;
        for (CondSet s : kCondSets) {
            TableKey key{o.segment, static_cast<uint8_t>(s), cond_value(s, o.ctx)};
            auto& c = t.cells_[key].by_day[o.date_key];
            c.first += o.eta;
            c.second += 1;
        }
    }
    t.fitted_ = true;
    return t;
}

std::pair<double, int64_t> EtaEncodingTable::reduce(const Cell& c,
                                                    std::optional<int32_t> exclude) {
    double sum = 0;
    int64_t cnt = 0;
    for (const auto& [day, sc] : c.by_day) {
        if (exclude && day == *exclude) continue;
        sum += sc.first;
        cnt += sc.second;
    }
    return {sum, cnt};
}

double EtaEncodingTable::lookup(SegmentId segment, CondSet set, const TimeContext& ctx,
                                std::optional<int32_t> exclude_day) const {
    if (!fitted_) fail("validation", "encoding table not fitted");

    auto it = cells_.find(
        TableKey{segment, static_cast<uint8_t>(set), cond_value(set, ctx)});
    if (it != cells_.end()) {
        auto [sum, cnt] = reduce(it->second, exclude_day);
        if (cnt > 0) return sum / static_cast<double>(cnt);
    }
    // fall back to the segment's unconditional mean
    if (set != CondSet::kNone) {
        auto un = cells_.find(TableKey{segment, static_cast<uint8_t>(CondSet::kNone), 0});
        if (un != cells_.end()) {
            auto [sum, cnt] = reduce(un->second, exclude_day);
            if (cnt > 0) return sum / static_cast<double>(cnt);
        }
    }
    auto [gsum, gcnt] = reduce(global_, exclude_day);
    if (gcnt > 0) return gsum / static_cast<double>(gcnt);
    auto [asum, acnt] = reduce(global_, std::nullopt);
    return asum / static_cast<double>(acnt);
}

void EtaEncodingTable::write(BinWriter& w) const {
    w.magic("TSET");
    w.u32(1);
    w.u8(1);  // table kind: eta
    auto write_cell = [&](const Cell& c) {
        w.u32(static_cast<uint32_t>(c.by_day.size()));
        for (const auto& [day, sc] : c.by_day) {
            w.i32(day);
            w.f64(sc.first);
            w.i64(sc.second);
        }
    };
    write_cell(global_);
    std::vector<TableKey> keys;
    keys.reserve(cells_.size());
    for (const auto& [k, _] : cells_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    w.u32(static_cast<uint32_t>(keys.size()));
    for (const auto& k : keys) {
        w.i64(k.entity);
        w.u8(k.set);
        w.u32(k.value);
        write_cell(cells_.at(k));
    }
}

EtaEncodingTable EtaEncodingTable::read(BinReader& r) {
    r.expect_magic("TSET");
    uint32_t version = r.u32();
    if (version != 1) fail("format", "unsupported table version");
    if (r.u8() != 1) fail("format", "expected eta table payload");
    EtaEncodingTable t;
    auto read_cell = [&](Cell& c) {
        uint32_t nd = r.u32();
        for (uint32_t d = 0; d < nd; ++d) {
            int32_t day = r.i32();
            double sum = r.f64();
            int64_t cnt = r.i64();
            c.by_day[day] = {sum, cnt};
        }
    };
    read_cell(t.global_);
    uint32_t n_cells = r.u32();
    for (uint32_t i = 0; i < n_cells; ++i) {
        TableKey k;
        k.entity = r.i64();
        k.set = r.u8();
        k.value = r.u32();
        read_cell(t.cells_[k]);
    }
    t.fitted_ = true;
    return t;
}

// ---- smoothed TE ------------------------------------------------------

double smoothed_te_denominator() {
    double s = 0;
    for (int i = 1; i <= 4; ++i) s += std::pow(i + 1.0, 4.0);
    return 1.0 + 2.0 * s;
}

std::vector<double> smoothed_te(const std::vector<double>& te_by_slot) {
    if (te_by_slot.size() != static_cast<size_t>(kSlotsPerDay))
        fail("validation", "smoothed_te expects one value per time slot");
    const double denom = smoothed_te_denominator();
    std::vector<double> out(kSlotsPerDay);
    for (int t = 0; t < kSlotsPerDay; ++t) {
        double acc = te_by_slot[t];
        for (int i = 1; i <= 4; ++i) {
            double w = std::pow(i + 1.0, 4.0);
            acc += w * (te_by_slot[(t - i + kSlotsPerDay) % kSlotsPerDay] +
                        te_by_slot[(t + i) % kSlotsPerDay]);
        }
        out[t] = acc / denom;
    }
    return out;
}

// ---- feature builders ------------------------------------------------

const std::vector<std::string>& core_feature_names() {
    static const std::vector<std::string> names = {
        "te_green_slot_weekend", "te_red_slot",         "te_green_slot",
        "highway_importance",    "te_red_slot_weekend", "te_yellow_slot_weekend",
        "te_red_weekend",        "is_weekend",          "te_yellow_slot",
        "te_yellow_weekend",     "slot",                "month",
        "te_green_slot_dow",     "te_green_dow",        "te_red_dow",
        "day_of_week",           "oneway",              "highway_class",
        "te_red_slot_dow",       "te_red",              "te_green_weekend",
        "tunnel",                "te_yellow_dow",       "speed_kph",
        "maxspeed",              "te_yellow",           "te_green",
        "counter_distance_hops", "lanes",               "length_m",
        "source_node_id",        "sink_node_id",        "edge_id",
        "sink_in_degree",        "source_out_degree",   "source_in_degree",
        "sink_out_degree",       "te_yellow_slot_dow",  "vol_sink_15",
        "vol_source_15",         "vol_sink_45",         "vol_sink_60",
        "vol_source_60",         "vol_source_45",       "vol_sink_30",
        "vol_source_30",
    };
    return names;
}

const std::vector<std::string>& extended_feature_names() {
    static const std::vector<std::string> names = {
        "smoothed_te_slot_dow", "supersegment_id", "smoothed_te_slot",
        "slot",                 "te_slot_dow",     "month",
        "te_dow",               "te_slot",         "node_count",
        "te_segment",           "day_of_week",     "te_weekend",
        "is_weekend",           "smoothed_te_slot_weekend",
        "te_slot_weekend",
    };
    return names;
}

const std::vector<size_t>& core_context_columns() {
    static const std::vector<size_t> cols = {0,  1,  2,  4,  5,  6,  7,  8,  9, 10,
                                             11, 12, 13, 14, 15, 18, 20, 22, 37};
    return cols;
}

const std::vector<size_t>& extended_context_columns() {
    static const std::vector<size_t> cols = {0, 2, 3, 4, 5, 6, 7, 10, 11, 12, 13, 14};
    return cols;
}

FeatureMatrix build_core_features(const GraphIndex& graph,
                                  const CounterSnapshot& snapshot,
                                  const TimeContext& ctx,
                                  const CcEncodingTable& table,
                                  std::optional<int32_t> exclude_day) {
    if (!ctx.valid()) fail("validation", "missing or invalid time context");
    if (!table.fitted()) fail("validation", "encoding table not fitted");

    auto vol = [&](NodeId node, int lag) -> double {
        if (!graph.is_counter(node)) return missing_value();
        auto it = snapshot.volumes.find(node);
        if (it == snapshot.volumes.end()) return missing_value();
        return it->second[lag];
    };

    FeatureMatrix m = FeatureMatrix::with_columns(core_feature_names());
    m.values.reserve(graph.graph().edges.size() * m.n_cols());
    for (const auto& e : graph.graph().edges) {
        auto te = [&](int cls, CondSet s) {
            return table.lookup(e.id, s, ctx, cls, exclude_day);
        };
        const EdgeAttributes& a = e.attr;
        m.add_row({
            te(kGreen, CondSet::kSlotWeekend),
            te(kRed, CondSet::kSlot),
            te(kGreen, CondSet::kSlot),
            a.highway_importance,
            te(kRed, CondSet::kSlotWeekend),
            te(kYellow, CondSet::kSlotWeekend),
            te(kRed, CondSet::kWeekend),
            ctx.is_weekend ? 1.0 : 0.0,
            te(kYellow, CondSet::kSlot),
            te(kYellow, CondSet::kWeekend),
            static_cast<double>(ctx.slot),
            static_cast<double>(ctx.month),
            te(kGreen, CondSet::kSlotDow),
            te(kGreen, CondSet::kDow),
            te(kRed, CondSet::kDow),
            static_cast<double>(ctx.day_of_week),
            a.oneway ? 1.0 : 0.0,
            static_cast<double>(a.highway_class),
            te(kRed, CondSet::kSlotDow),
            te(kRed, CondSet::kNone),
            te(kGreen, CondSet::kWeekend),
            a.tunnel ? 1.0 : 0.0,
            te(kYellow, CondSet::kDow),
            a.speed_kph,
            a.maxspeed,
            te(kYellow, CondSet::kNone),
            te(kGreen, CondSet::kNone),
            a.counter_distance_hops ? static_cast<double>(*a.counter_distance_hops)
                                    : missing_value(),
            static_cast<double>(a.lanes),
            a.length_m,
            static_cast<double>(e.source),
            static_cast<double>(e.sink),
            static_cast<double>(e.id),
            static_cast<double>(graph.in_degree(e.sink)),
            static_cast<double>(graph.out_degree(e.source)),
            static_cast<double>(graph.in_degree(e.source)),
            static_cast<double>(graph.out_degree(e.sink)),
            te(kYellow, CondSet::kSlotDow),
            vol(e.sink, 0),
            vol(e.source, 0),
            vol(e.sink, 2),
            vol(e.sink, 3),
            vol(e.source, 3),
            vol(e.source, 2),
            vol(e.sink, 1),
            vol(e.source, 1),
        });
    }
    return m;
}

FeatureMatrix build_extended_features(const GraphIndex& graph,
                                      const TimeContext& ctx,
                                      const EtaEncodingTable& table,
                                      std::optional<int32_t> exclude_day) {
    if (!ctx.valid()) fail("validation", "missing or invalid time context");
    if (!table.fitted()) fail("validation", "encoding table not fitted");

    FeatureMatrix m = FeatureMatrix::with_columns(extended_feature_names());
    m.values.reserve(graph.graph().supersegments.size() * m.n_cols());
    std::vector<double> by_slot(kSlotsPerDay);
    for (const auto& seg : graph.graph().supersegments) {
        auto te = [&](CondSet s) { return table.lookup(seg.id, s, ctx, exclude_day); };
        auto smoothed_at_slot = [&](CondSet s) {
            TimeContext c = ctx;
            for (int t = 0; t < kSlotsPerDay; ++t) {
                c.slot = t;
                by_slot[t] = table.lookup(seg.id, s, c, exclude_day);
            }
            return smoothed_te(by_slot)[ctx.slot];
        };
        m.add_row({
            smoothed_at_slot(CondSet::kSlotDow),
            static_cast<double>(seg.id),
            smoothed_at_slot(CondSet::kSlot),
            static_cast<double>(ctx.slot),
            te(CondSet::kSlotDow),
            static_cast<double>(ctx.month),
            te(CondSet::kDow),
            te(CondSet::kSlot),
            static_cast<double>(seg.node_path.size()),
            te(CondSet::kNone),
            static_cast<double>(ctx.day_of_week),
            te(CondSet::kWeekend),
            ctx.is_weekend ? 1.0 : 0.0,
            smoothed_at_slot(CondSet::kSlotWeekend),
            te(CondSet::kSlotWeekend),
        });
    }
    return m;
}

}  // namespace tse
