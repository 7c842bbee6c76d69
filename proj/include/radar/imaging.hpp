#pragma once

#include "radar/image.hpp"

namespace radar::imaging {

// Per-azimuth power spectrum over the positive-frequency half of the sweep.
// num_range_bins = samples_per_sweep / 2; bin j holds |FFT bin j|^2.
PolarImage range_fft(const PolarFrame& frame);

enum class Interp { Bilinear, Nearest };

// Resamples the polar power image onto a metric cartesian grid. The grid has
// a column exactly on boresight (x = 0), row 0 at the sensor (y = 0), and
// spans y in [0, max_range], x in [-R sin(halfspan), +R sin(halfspan)] where
// halfspan is half the angular extent covered by the azimuth sweep. Each
// output cell samples the polar image at (r, theta) = (sqrt(x^2+y^2),
// atan2(x, y)) with bilinear interpolation in continuous (range-bin,
// azimuth-index) coordinates; cells outside the sector or beyond the last
// range bin are 0. Nearest-neighbour interpolation is available for
// cross-checking.
CartesianImage polar_to_cartesian(const PolarImage& img, double cell_size,
                                  Interp method = Interp::Bilinear);
CartesianImage polar_to_cartesian_serial(const PolarImage& img, double cell_size,
                                         Interp method = Interp::Bilinear);

// Mean of all cell values, accumulated in double in row-major order.
double image_mean(const CartesianImage& img);

// Subtracts the per-image mean (or an externally supplied dataset mean).
CartesianImage whiten(const CartesianImage& img);
CartesianImage whiten_with_mean(const CartesianImage& img, double mean);

// size_cells x size_cells window whose top-left corner sits at
// center - floor(size/2); cells falling outside the source are zero. The
// origin moves with the window so cell centers keep their metric positions.
CartesianImage crop_window(const CartesianImage& img, int center_row, int center_col,
                           int size_cells);

// Corner-aligned bilinear resize. cell_size is rescaled by the row ratio
// (chips are square in practice); origin is preserved.
CartesianImage resize_bilinear(const CartesianImage& img, int out_rows, int out_cols);

}  // namespace radar::imaging
