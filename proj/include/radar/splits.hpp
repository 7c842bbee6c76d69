#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radar/manifest.hpp"

namespace radar::data {

// Train/test partitions mirroring the four single-object experiment shapes:
// a seeded random 70/30 split, hold out one receiver, hold out one capture
// range, or train on aspect quadrants 1+3 and test on 2+4.
enum class SplitMode { kRandom7030, kByReceiver, kByRange, kByQuadrant };

struct ExperimentSpec {
    SplitMode split = SplitMode::kRandom7030;
    int test_receiver = 1;      // kByReceiver: receiver held out for testing
    double test_range_m = 6.3;  // kByRange: capture range held out (matched within 1 mm)
    uint64_t seed = 0;          // kRandom7030 shuffle seed
    std::string transfer_weights;  // optional source weights for fine-tuning
};

struct SplitResult {
    std::vector<int> train_idx;  // indices into the manifest, ascending
    std::vector<int> test_idx;
};

// Partitions are always disjoint and cover every record; a mode that leaves
// either side empty for the given manifest throws InvalidInputError.
SplitResult split_manifest(const std::vector<ManifestRecord>& records, const ExperimentSpec& spec);

// Parses "random_70_30", "by_receiver:<id>", "by_range:<meters>" or
// "by_quadrant" into the split fields of a spec (seed/transfer untouched).
void parse_split(const std::string& text, ExperimentSpec& spec);
std::string split_name(const ExperimentSpec& spec);

}  // namespace radar::data
