#pragma once

#include <vector>

#include "radar/image.hpp"
#include "radar/rng.hpp"

namespace radar::augment {

// A labelled object chip plus the metadata needed for split experiments.
struct Chip {
    CartesianImage image;
    int label = 0;
    double range_m = 0.0;
    int receiver_id = 0;
    double aspect_deg = 0.0;
};

// Random sub-window of crop_size x crop_size at offsets drawn uniformly from
// the valid range (row offset first, then column). The chip must be at least
// crop_size in both dimensions.
Chip random_crop(const Chip& chip, Rng& rng, int crop_size = 88);

// Mirrors columns; label and metadata are unchanged.
Chip flip_lr(const Chip& chip);

// Expands each chip into crops_per_chip random crops, each followed by its
// mirror (x16 for the default 8 crops). With flip_originals_only, the crops
// are followed by a single mirrored full chip instead (x9). Chip i draws
// from rng.split(i), so the output is independent of scheduling.
std::vector<Chip> augment_dataset(const std::vector<Chip>& chips, int crops_per_chip,
                                  const Rng& rng, bool flip_originals_only = false,
                                  int crop_size = 88);

}  // namespace radar::augment
