#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace radar {

// Sweep-level sensor description. Defaults follow the 300 GHz prototype this
// toolkit models: 20 GHz sweep bandwidth (0.75 cm range resolution), 1.2
// degree azimuth beamwidth.
struct RadarParams {
    double sweep_bandwidth_hz = 20e9;
    double range_resolution_m = 0.0075;
    double azimuth_beamwidth_deg = 1.2;
    double azimuth_step_deg = 0.6;
    double max_range_m = 12.0;

    // All fields strictly positive and range resolution consistent with
    // c / (2 * bandwidth) within 1%.
    void validate() const;
};

// Raw time-domain beat signal, one row per azimuth direction.
struct PolarFrame {
    int num_azimuths = 0;
    int samples_per_sweep = 0;
    std::vector<float> data;  // [azimuth][sample] row-major
    RadarParams params;

    float& at(int a, int s) { return data[static_cast<size_t>(a) * samples_per_sweep + s]; }
    float at(int a, int s) const { return data[static_cast<size_t>(a) * samples_per_sweep + s]; }
};

// Power-vs-range profile per azimuth (positive-frequency FFT bins).
struct PolarImage {
    int num_azimuths = 0;
    int num_range_bins = 0;
    std::vector<float> power;  // [azimuth][bin] row-major, non-negative
    RadarParams params;

    float& at(int a, int b) { return power[static_cast<size_t>(a) * num_range_bins + b]; }
    float at(int a, int b) const { return power[static_cast<size_t>(a) * num_range_bins + b]; }
};

// Metric raster. Cell (r, c) has its center at
//   x = origin_x + c * cell_size   (cross-range, sensor boresight at x = 0)
//   y = origin_y + r * cell_size   (downrange, sensor at y = 0)
// so row 0 is the nearest row and origin is the metric center of cell (0,0).
// Values are power (linear scale), possibly signed after whitening.
struct CartesianImage {
    int rows = 0;
    int cols = 0;
    double cell_size = 0.0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    std::vector<float> values;  // row-major

    static CartesianImage zeros(int rows, int cols, double cell_size,
                                double origin_x = 0.0, double origin_y = 0.0);

    float& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }

    double cell_x(int c) const { return origin_x + c * cell_size; }
    double cell_y(int r) const { return origin_y + r * cell_size; }
};

// RADR raster file, the one image format used across the toolkit.
// Little-endian: magic "RADR", u32 version=1, u32 rows, u32 cols,
// f64 cell_size_m, f64 origin_x_m, f64 origin_y_m, rows*cols f32 row-major.
void radr_write(const std::string& path, const CartesianImage& img);
CartesianImage radr_read(const std::string& path);

}  // namespace radar
