#pragma once

#include <string>

#include "tse/dataset_io.hpp"

namespace tse {

// Desk-scale city generator with planted daily/weekly/seasonal structure:
// double-peaked volume curves per counter, slot- and weekend-dependent
// congestion class mixtures, and sinusoidal ETA modulation. The planted
// contexts are the (date, slot) keys of the emitted snapshots.
struct SyntheticSpec {
    std::string city = "synthtown";
    int nodes = 32;
    int extra_edges = 8;       // chords on top of the ring backbone
    int counter_every = 3;     // every k-th node carries a counter
    int supersegments = 10;
    int train_days = 70;       // 10 whole weeks starting on a Monday
    int test_days = 7;
    Date start_date{2022, 3, 7};
    int snapshots_per_day = 10;
    double volume_amplitude = 120.0;
    double volume_noise = 0.10;  // sigma as a fraction of a node's amplitude
    double missing_rate = 0.05;
    double label_coverage = 0.85;
    double eta_base = 60.0;      // seconds scale
    double eta_modulation = 0.5;
    double eta_noise = 0.05;     // sigma as a fraction of the segment base
    bool weekday_signal = true;  // false: identical weekday factors, dow carries no signal
    uint64_t seed = 1;

    void validate() const;
};

Dataset synthesize(const SyntheticSpec& spec);

// synthesize + write; round-trips bit-exactly through ingest_dataset
void synthesize_to_dir(const SyntheticSpec& spec, const std::string& dir);

}  // namespace tse
