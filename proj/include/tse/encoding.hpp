#pragma once

#include <array>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tse/data_model.hpp"
#include "tse/feature_matrix.hpp"

namespace tse {

// The six conditioning sets a target statistic can be keyed by, always scoped
// per edge (congestion) or per super-segment (ETA).
enum class CondSet : uint8_t {
    kNone = 0,
    kSlot,
    kWeekend,
    kDow,
    kSlotWeekend,
    kSlotDow,
};
constexpr std::array<CondSet, 6> kCondSets = {
    CondSet::kNone,        CondSet::kSlot,        CondSet::kWeekend,
    CondSet::kDow,         CondSet::kSlotWeekend, CondSet::kSlotDow,
};

// packs the concrete category values of a conditioning set into one integer
uint32_t cond_value(CondSet set, const TimeContext& ctx);

struct TableKey {
    int64_t entity = 0;  // edge or super-segment id
    uint8_t set = 0;
    uint32_t value = 0;
    bool operator==(const TableKey&) const = default;
    bool operator<(const TableKey& o) const {
        return std::tie(entity, set, value) < std::tie(o.entity, o.set, o.value);
    }
};

struct TableKeyHash {
    size_t operator()(const TableKey& k) const {
        uint64_t x = static_cast<uint64_t>(k.entity) * 0x9e3779b97f4a7c15ULL;
        x ^= (static_cast<uint64_t>(k.set) << 32) | k.value;
        x ^= x >> 29;
        x *= 0xbf58476d1ce4e5b9ULL;
        return static_cast<size_t>(x ^ (x >> 32));
    }
};

struct CcObservation {
    EdgeId edge = 0;
    int32_t date_key = 0;
    TimeContext ctx;
    int cls = kIgnore;
};

struct EtaObservation {
    SegmentId segment = 0;
    int32_t date_key = 0;
    TimeContext ctx;
    double eta = 0.0;
};

// ---------------------------------------------------------------------------
// Congestion-class target encoding with pseudocount smoothing toward the
// global class fractions. Per-day counts are kept so a lookup can exclude a
// calendar day; the excluded lookup is integer-exact against refitting on
// the reduced data.
// ---------------------------------------------------------------------------
class CcEncodingTable {
public:
    CcEncodingTable() = default;

    static CcEncodingTable fit(const std::vector<CcObservation>& observations,
                               double pseudocount);

    // smoothed fraction of `cls` for the key (edge, set, categories-of-ctx)
    double lookup(EdgeId edge, CondSet set, const TimeContext& ctx, int cls,
                  std::optional<int32_t> exclude_day = std::nullopt) const;

    double pseudocount() const { return w_; }
    bool fitted() const { return fitted_; }

    void write(BinWriter& w) const;
    static CcEncodingTable read(BinReader& r);

private:
    struct Cell {
        std::array<int64_t, kNumClasses> total{};
        std::map<int32_t, std::array<int32_t, kNumClasses>> by_day;
    };

    double w_ = 20.0;
    bool fitted_ = false;
    std::array<int64_t, kNumClasses> global_total_{};
    std::map<int32_t, std::array<int64_t, kNumClasses>> global_by_day_;
    std::unordered_map<TableKey, Cell, TableKeyHash> cells_;
};

// ---------------------------------------------------------------------------
// ETA target encoding: plain per-key means with an unseen-key fallback chain
// key -> per-segment mean -> global mean. Sums are always accumulated per day
// in date order so an excluded lookup is bit-exact against a refit.
// ---------------------------------------------------------------------------
class EtaEncodingTable {
public:
    EtaEncodingTable() = default;

    static EtaEncodingTable fit(const std::vector<EtaObservation>& observations);

    double lookup(SegmentId segment, CondSet set, const TimeContext& ctx,
                  std::optional<int32_t> exclude_day = std::nullopt) const;

    bool fitted() const { return fitted_; }

    void write(BinWriter& w) const;
    static EtaEncodingTable read(BinReader& r);

private:
    struct Cell {
        std::map<int32_t, std::pair<double, int64_t>> by_day;  // sum, count
    };

    // sum/count over a cell minus the excluded day, in date order
    static std::pair<double, int64_t> reduce(const Cell& c,
                                             std::optional<int32_t> exclude);

    bool fitted_ = false;
    Cell global_;
    std::unordered_map<TableKey, Cell, TableKeyHash> cells_;
};

// Cyclic +-4 slot window average with weights 1 for the center and (i+1)^4
// for the neighbors at distance i, normalized by 1 + 2*sum_i (i+1)^4.
std::vector<double> smoothed_te(const std::vector<double>& te_by_slot);
double smoothed_te_denominator();

// ---------------------------------------------------------------------------
// Feature builders. One row per edge (46 columns) / per super-segment
// (15 columns), in a fixed column order shared by training and inference.
// ---------------------------------------------------------------------------
const std::vector<std::string>& core_feature_names();
const std::vector<std::string>& extended_feature_names();

// columns computed from the time context; the single-stage ablation blanks
// or drops exactly these
const std::vector<size_t>& core_context_columns();
const std::vector<size_t>& extended_context_columns();

FeatureMatrix build_core_features(const GraphIndex& graph,
                                  const CounterSnapshot& snapshot,
                                  const TimeContext& ctx,
                                  const CcEncodingTable& table,
                                  std::optional<int32_t> exclude_day = std::nullopt);

FeatureMatrix build_extended_features(const GraphIndex& graph,
                                      const TimeContext& ctx,
                                      const EtaEncodingTable& table,
                                      std::optional<int32_t> exclude_day = std::nullopt);

}  // namespace tse
