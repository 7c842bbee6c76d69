#include "radar/image.hpp"

#include <cmath>
#include <cstring>

#include "binio.hpp"
#include "radar/errors.hpp"

namespace radar {

void RadarParams::validate() const {
    if (sweep_bandwidth_hz <= 0 || range_resolution_m <= 0 || azimuth_beamwidth_deg <= 0 ||
        azimuth_step_deg <= 0 || max_range_m <= 0) {
        throw InvalidInputError("radar parameters must be strictly positive");
    }
    constexpr double kC = 299792458.0;
    double expected = kC / (2.0 * sweep_bandwidth_hz);
    double rel = std::abs(range_resolution_m - expected) / expected;
    if (rel > 0.01) {
        throw InvalidInputError("range_resolution_m " + std::to_string(range_resolution_m) +
                                " inconsistent with c/(2*bandwidth) = " + std::to_string(expected));
    }
}

CartesianImage CartesianImage::zeros(int rows, int cols, double cell_size, double origin_x,
                                     double origin_y) {
    if (rows <= 0 || cols <= 0 || cell_size <= 0) {
        throw InvalidInputError("image dimensions and cell size must be positive");
    }
    CartesianImage img;
    img.rows = rows;
    img.cols = cols;
    img.cell_size = cell_size;
    img.origin_x = origin_x;
    img.origin_y = origin_y;
    img.values.assign(static_cast<size_t>(rows) * cols, 0.0f);
    return img;
}

void radr_write(const std::string& path, const CartesianImage& img) {
    if (static_cast<size_t>(img.rows) * img.cols != img.values.size()) {
        throw ShapeError("image size " + std::to_string(img.values.size()) + " does not match " +
                         std::to_string(img.rows) + "x" + std::to_string(img.cols));
    }
    std::string buf;
    buf.reserve(36 + img.values.size() * 4);
    buf.append("RADR");
    binio::put_u32(buf, 1);
    binio::put_u32(buf, static_cast<uint32_t>(img.rows));
    binio::put_u32(buf, static_cast<uint32_t>(img.cols));
    binio::put_f64(buf, img.cell_size);
    binio::put_f64(buf, img.origin_x);
    binio::put_f64(buf, img.origin_y);
    for (float v : img.values) binio::put_f32(buf, v);
    binio::write_file(path, buf);
}

CartesianImage radr_read(const std::string& path) {
    std::string buf = binio::read_file(path);
    binio::Cursor c{reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), "RADR"};
    c.need(4, "magic");
    if (std::memcmp(c.p, "RADR", 4) != 0) throw FormatError(path + ": not a RADR file");
    c.p += 4;
    c.left -= 4;
    uint32_t version = c.u32("version");
    if (version != 1) throw FormatError(path + ": unsupported RADR version");
    CartesianImage img;
    img.rows = static_cast<int>(c.u32("rows"));
    img.cols = static_cast<int>(c.u32("cols"));
    img.cell_size = c.f64("cell_size");
    img.origin_x = c.f64("origin_x");
    img.origin_y = c.f64("origin_y");
    if (img.rows <= 0 || img.cols <= 0 || img.cell_size <= 0) {
        throw FormatError(path + ": invalid RADR header");
    }
    size_t n = static_cast<size_t>(img.rows) * img.cols;
    if (c.left != n * 4) throw FormatError(path + ": RADR payload size mismatch");
    img.values.resize(n);
    for (size_t i = 0; i < n; ++i) img.values[i] = c.f32("values");
    return img;
}

}  // namespace radar
