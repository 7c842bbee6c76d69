#include "radar/augment.hpp"

#include <cstdint>

#include "radar/errors.hpp"

namespace radar::augment {

Chip random_crop(const Chip& chip, Rng& rng, int crop_size) {
    const CartesianImage& src = chip.image;
    if (crop_size < 1) throw InvalidInputError("random_crop: crop_size must be >= 1");
    if (src.rows < crop_size || src.cols < crop_size)
        throw InvalidInputError("random_crop: chip " + std::to_string(src.rows) + "x" +
                                std::to_string(src.cols) + " smaller than crop size " +
                                std::to_string(crop_size));
    const int r0 = static_cast<int>(rng.bounded(static_cast<uint64_t>(src.rows - crop_size + 1)));
    const int c0 = static_cast<int>(rng.bounded(static_cast<uint64_t>(src.cols - crop_size + 1)));
    Chip out = chip;
    out.image = CartesianImage::zeros(crop_size, crop_size, src.cell_size,
                                      src.origin_x + c0 * src.cell_size,
                                      src.origin_y + r0 * src.cell_size);
    for (int r = 0; r < crop_size; ++r)
        for (int c = 0; c < crop_size; ++c)
            out.image.values[static_cast<int64_t>(r) * crop_size + c] = src.at(r0 + r, c0 + c);
    return out;
}

Chip flip_lr(const Chip& chip) {
    Chip out = chip;
    const int rows = chip.image.rows, cols = chip.image.cols;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out.image.values[static_cast<int64_t>(r) * cols + c] = chip.image.at(r, cols - 1 - c);
    return out;
}

std::vector<Chip> augment_dataset(const std::vector<Chip>& chips, int crops_per_chip,
                                  const Rng& rng, bool flip_originals_only, int crop_size) {
    if (crops_per_chip < 1)
        throw InvalidInputError("augment_dataset: crops_per_chip must be >= 1");
    const int per_chip = flip_originals_only ? crops_per_chip + 1 : crops_per_chip * 2;
    std::vector<Chip> out(chips.size() * static_cast<size_t>(per_chip));
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(chips.size()); ++i) {
        Rng sub = rng.split(static_cast<uint64_t>(i));
        Chip* dst = out.data() + i * per_chip;
        for (int c = 0; c < crops_per_chip; ++c) {
            Chip cropped = random_crop(chips[i], sub, crop_size);
            if (flip_originals_only) {
                dst[c] = std::move(cropped);
            } else {
                dst[2 * c + 1] = flip_lr(cropped);
                dst[2 * c] = std::move(cropped);
            }
        }
        if (flip_originals_only) dst[crops_per_chip] = flip_lr(chips[i]);
    }
    return out;
}

}  // namespace radar::augment
