#include "radar/imaging.hpp"

#include <cmath>
#include <cstdint>

#include "radar/errors.hpp"
#include "radar/kernels.hpp"

namespace radar::imaging {

PolarImage range_fft(const PolarFrame& frame) {
    if (frame.num_azimuths < 1 || frame.samples_per_sweep < 2)
        throw InvalidInputError("range_fft: frame must have >=1 azimuth and >=2 samples");
    if (frame.data.size() !=
        static_cast<size_t>(frame.num_azimuths) * frame.samples_per_sweep)
        throw ShapeError("range_fft: frame data size does not match declared dimensions");
    PolarImage out;
    out.num_azimuths = frame.num_azimuths;
    out.num_range_bins = frame.samples_per_sweep / 2;
    out.params = frame.params;
    out.power.resize(static_cast<size_t>(out.num_azimuths) * out.num_range_bins);
    kernels::fft_power_rows(frame.data.data(), frame.num_azimuths, frame.samples_per_sweep,
                            out.num_range_bins, out.power.data());
    return out;
}

namespace {

struct PolarGrid {
    int n_az, n_bins;
    double step_rad;     // angular spacing between azimuth beams
    double half_span;    // angle of the outermost beams from boresight
    double inv_res;      // 1 / range_resolution
    double max_range;
};

PolarGrid make_grid(const PolarImage& img) {
    img.params.validate();
    if (img.num_azimuths < 1 || img.num_range_bins < 1)
        throw InvalidInputError("polar_to_cartesian: empty polar image");
    PolarGrid g;
    g.n_az = img.num_azimuths;
    g.n_bins = img.num_range_bins;
    g.step_rad = img.params.azimuth_step_deg * M_PI / 180.0;
    g.half_span = 0.5 * (g.n_az - 1) * g.step_rad;
    g.inv_res = 1.0 / img.params.range_resolution_m;
    g.max_range = img.params.max_range_m;
    return g;
}

inline float sample_polar(const PolarImage& img, const PolarGrid& g, double x, double y,
                          Interp method) {
    const double r = std::sqrt(x * x + y * y);
    const double theta = std::atan2(x, y);  // 0 on boresight, positive toward +x
    if (r > g.max_range || theta < -g.half_span || theta > g.half_span) return 0.0f;
    const double b = r * g.inv_res;                          // continuous range-bin
    const double a = theta / g.step_rad + 0.5 * (g.n_az - 1);  // continuous azimuth index
    if (b > g.n_bins - 1 || a < 0.0 || a > g.n_az - 1) return 0.0f;
    if (method == Interp::Nearest) {
        const int bi = std::min(static_cast<int>(std::lround(b)), g.n_bins - 1);
        const int ai = std::min(static_cast<int>(std::lround(a)), g.n_az - 1);
        return img.at(ai, bi);
    }
    int b0 = static_cast<int>(b);
    int a0 = static_cast<int>(a);
    if (b0 > g.n_bins - 2) b0 = g.n_bins - 2;
    if (a0 > g.n_az - 2) a0 = g.n_az - 2;
    if (b0 < 0) b0 = 0;
    if (a0 < 0) a0 = 0;
    const int b1 = g.n_bins > 1 ? b0 + 1 : b0;
    const int a1 = g.n_az > 1 ? a0 + 1 : a0;
    const double fb = g.n_bins > 1 ? b - b0 : 0.0;
    const double fa = g.n_az > 1 ? a - a0 : 0.0;
    const double v00 = img.at(a0, b0), v01 = img.at(a0, b1);
    const double v10 = img.at(a1, b0), v11 = img.at(a1, b1);
    const double lo = v00 + fb * (v01 - v00);
    const double hi = v10 + fb * (v11 - v10);
    return static_cast<float>(lo + fa * (hi - lo));
}

CartesianImage make_cart_frame(const PolarImage& img, double cell_size, const PolarGrid& g) {
    const int rows = static_cast<int>(std::floor(g.max_range / cell_size)) + 1;
    const double xmax = g.max_range * std::sin(g.half_span);
    const int half_cols = static_cast<int>(std::floor(xmax / cell_size));
    const int cols = 2 * half_cols + 1;
    CartesianImage out = CartesianImage::zeros(rows, cols, cell_size,
                                               -half_cols * cell_size, 0.0);
    (void)img;
    return out;
}

inline void resample_one_row(const PolarImage& img, const PolarGrid& g, CartesianImage& out,
                             int r, Interp method) {
    const double y = out.cell_y(r);
    float* row = out.values.data() + static_cast<int64_t>(r) * out.cols;
    for (int c = 0; c < out.cols; ++c) row[c] = sample_polar(img, g, out.cell_x(c), y, method);
}

}  // namespace

CartesianImage polar_to_cartesian(const PolarImage& img, double cell_size, Interp method) {
    if (cell_size <= 0) throw InvalidInputError("polar_to_cartesian: cell_size must be > 0");
    const PolarGrid g = make_grid(img);
    CartesianImage out = make_cart_frame(img, cell_size, g);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < out.rows; ++r) resample_one_row(img, g, out, r, method);
    return out;
}

CartesianImage polar_to_cartesian_serial(const PolarImage& img, double cell_size,
                                         Interp method) {
    if (cell_size <= 0) throw InvalidInputError("polar_to_cartesian: cell_size must be > 0");
    const PolarGrid g = make_grid(img);
    CartesianImage out = make_cart_frame(img, cell_size, g);
    for (int r = 0; r < out.rows; ++r) resample_one_row(img, g, out, r, method);
    return out;
}

double image_mean(const CartesianImage& img) {
    if (img.values.empty()) throw InvalidInputError("image_mean: empty image");
    double s = 0.0;
    for (float v : img.values) s += v;
    return s / static_cast<double>(img.values.size());
}

CartesianImage whiten_with_mean(const CartesianImage& img, double mean) {
    CartesianImage out = img;
    const float m = static_cast<float>(mean);
    for (float& v : out.values) v -= m;
    return out;
}

CartesianImage whiten(const CartesianImage& img) {
    return whiten_with_mean(img, image_mean(img));
}

CartesianImage crop_window(const CartesianImage& img, int center_row, int center_col,
                           int size_cells) {
    if (size_cells < 1) throw InvalidInputError("crop_window: size_cells must be >= 1");
    const int r0 = center_row - size_cells / 2;
    const int c0 = center_col - size_cells / 2;
    CartesianImage out =
        CartesianImage::zeros(size_cells, size_cells, img.cell_size,
                              img.origin_x + c0 * img.cell_size,
                              img.origin_y + r0 * img.cell_size);
    for (int r = 0; r < size_cells; ++r) {
        const int sr = r0 + r;
        if (sr < 0 || sr >= img.rows) continue;
        for (int c = 0; c < size_cells; ++c) {
            const int sc = c0 + c;
            if (sc < 0 || sc >= img.cols) continue;
            out.values[static_cast<int64_t>(r) * size_cells + c] = img.at(sr, sc);
        }
    }
    return out;
}

CartesianImage resize_bilinear(const CartesianImage& img, int out_rows, int out_cols) {
    if (out_rows < 1 || out_cols < 1)
        throw InvalidInputError("resize_bilinear: output dims must be >= 1");
    double cs = img.cell_size;
    if (out_rows > 1 && img.rows > 1)
        cs = img.cell_size * static_cast<double>(img.rows - 1) / (out_rows - 1);
    CartesianImage out = CartesianImage::zeros(out_rows, out_cols, cs, img.origin_x,
                                               img.origin_y);
    kernels::resize_bilinear(img.values.data(), img.rows, img.cols, out.values.data(),
                             out_rows, out_cols);
    return out;
}

}  // namespace radar::imaging
