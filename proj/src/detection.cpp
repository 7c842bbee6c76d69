#include "radar/detection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "radar/errors.hpp"
#include "radar/imaging.hpp"
#include "radar/kernels.hpp"

namespace radar::detection {

// ---- Config ----------------------------------------------------------------------

void CfarConfig::validate() const {
    if (mode == Mode::Global) {
        if (level <= 0.0 || level > 1.0)
            throw InvalidInputError("cfar: global level must be in (0,1]");
    } else {
        if (train_cells < 1) throw InvalidInputError("cfar: train_cells must be >= 1");
        if (guard_cells < 0) throw InvalidInputError("cfar: guard_cells must be >= 0");
        if (scale_factor < 0.0) throw InvalidInputError("cfar: scale_factor must be >= 0");
        if (scale_factor == 0.0 && (pfa <= 0.0 || pfa >= 1.0))
            throw InvalidInputError("cfar: design pfa must be in (0,1)");
    }
}

double ca_scale_for_pfa(double pfa, int n_train) {
    if (pfa <= 0.0 || pfa >= 1.0) throw InvalidInputError("pfa must be in (0,1)");
    if (n_train < 1) throw InvalidInputError("training-cell count must be >= 1");
    const double n = static_cast<double>(n_train);
    return n * (std::pow(pfa, -1.0 / n) - 1.0);
}

void DbscanConfig::validate() const {
    if (epsilon_m <= 0.0) throw InvalidInputError("dbscan: epsilon must be > 0");
    if (min_points < 1) throw InvalidInputError("dbscan: min_points must be >= 1");
}

size_t Mask::count() const {
    size_t n = 0;
    for (uint8_t v : on) n += v;
    return n;
}

// ---- CFAR -------------------------------------------------------------------------

namespace {

Mask global_cfar(const CartesianImage& img, double level) {
    Mask m;
    m.rows = img.rows;
    m.cols = img.cols;
    m.on.assign(img.values.size(), 0);
    float mx = 0.0f;
    for (float v : img.values) mx = std::max(mx, v);
    const double thr = level * static_cast<double>(mx);
    for (size_t i = 0; i < img.values.size(); ++i)
        m.on[i] = static_cast<double>(img.values[i]) > thr ? 1 : 0;
    return m;
}

// Clipped ring geometry shared by the SAT and direct implementations: the
// training region is the outer square minus the guard square, both
// intersected with the image.
struct Ring {
    int or0, or1, oc0, oc1;  // outer box, half-open
    int gr0, gr1, gc0, gc1;  // guard box (includes the cell under test)
};

inline Ring ring_at(int r, int c, int rows, int cols, int guard, int train) {
    const int outer = guard + train;
    Ring g;
    g.or0 = std::max(0, r - outer);
    g.or1 = std::min(rows, r + outer + 1);
    g.oc0 = std::max(0, c - outer);
    g.oc1 = std::min(cols, c + outer + 1);
    g.gr0 = std::max(0, r - guard);
    g.gr1 = std::min(rows, r + guard + 1);
    g.gc0 = std::max(0, c - guard);
    g.gc1 = std::min(cols, c + guard + 1);
    return g;
}

Mask ca_cfar_sat(const CartesianImage& img, const CfarConfig& cfg) {
    const int rows = img.rows, cols = img.cols;
    const int full_ring = (2 * (cfg.guard_cells + cfg.train_cells) + 1) *
                              (2 * (cfg.guard_cells + cfg.train_cells) + 1) -
                          (2 * cfg.guard_cells + 1) * (2 * cfg.guard_cells + 1);
    const double scale =
        cfg.scale_factor > 0.0 ? cfg.scale_factor : ca_scale_for_pfa(cfg.pfa, full_ring);
    std::vector<double> sat(static_cast<size_t>(rows + 1) * (cols + 1));
    kernels::summed_area(img.values.data(), rows, cols, sat.data());
    Mask m;
    m.rows = rows;
    m.cols = cols;
    m.on.assign(img.values.size(), 0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Ring g = ring_at(r, c, rows, cols, cfg.guard_cells, cfg.train_cells);
            const double outer = kernels::sat_rect_sum(sat.data(), cols, g.or0, g.oc0, g.or1, g.oc1);
            const double guard = kernels::sat_rect_sum(sat.data(), cols, g.gr0, g.gc0, g.gr1, g.gc1);
            const int n = (g.or1 - g.or0) * (g.oc1 - g.oc0) - (g.gr1 - g.gr0) * (g.gc1 - g.gc0);
            if (n <= 0) continue;
            const double mean = (outer - guard) / n;
            if (static_cast<double>(img.at(r, c)) > scale * mean)
                m.on[static_cast<size_t>(r) * cols + c] = 1;
        }
    }
    return m;
}

Mask ca_cfar_direct(const CartesianImage& img, const CfarConfig& cfg) {
    const int rows = img.rows, cols = img.cols;
    const int full_ring = (2 * (cfg.guard_cells + cfg.train_cells) + 1) *
                              (2 * (cfg.guard_cells + cfg.train_cells) + 1) -
                          (2 * cfg.guard_cells + 1) * (2 * cfg.guard_cells + 1);
    const double scale =
        cfg.scale_factor > 0.0 ? cfg.scale_factor : ca_scale_for_pfa(cfg.pfa, full_ring);
    Mask m;
    m.rows = rows;
    m.cols = cols;
    m.on.assign(img.values.size(), 0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Ring g = ring_at(r, c, rows, cols, cfg.guard_cells, cfg.train_cells);
            double sum = 0.0;
            int n = 0;
            for (int rr = g.or0; rr < g.or1; ++rr) {
                for (int cc = g.oc0; cc < g.oc1; ++cc) {
                    if (rr >= g.gr0 && rr < g.gr1 && cc >= g.gc0 && cc < g.gc1) continue;
                    sum += img.at(rr, cc);
                    ++n;
                }
            }
            if (n <= 0) continue;
            if (static_cast<double>(img.at(r, c)) > scale * (sum / n))
                m.on[static_cast<size_t>(r) * cols + c] = 1;
        }
    }
    return m;
}

}  // namespace

Mask cfar_detect(const CartesianImage& img, const CfarConfig& cfg) {
    cfg.validate();
    if (cfg.mode == CfarConfig::Mode::Global) return global_cfar(img, cfg.level);
    return ca_cfar_sat(img, cfg);
}

Mask cfar_detect_serial(const CartesianImage& img, const CfarConfig& cfg) {
    cfg.validate();
    if (cfg.mode == CfarConfig::Mode::Global) return global_cfar(img, cfg.level);
    return ca_cfar_direct(img, cfg);
}

// ---- DBSCAN -------------------------------------------------------------------------

namespace {

struct PointGrid {
    double eps, eps2;
    std::unordered_map<int64_t, std::vector<int>> buckets;
    const std::vector<std::pair<double, double>>* pts;

    static int64_t key(int ix, int iy) {
        return (static_cast<int64_t>(ix) << 32) ^ (static_cast<int64_t>(iy) & 0xffffffffll);
    }

    explicit PointGrid(const std::vector<std::pair<double, double>>& points, double epsilon)
        : eps(epsilon), eps2(epsilon * epsilon), pts(&points) {
        buckets.reserve(points.size());
        for (size_t i = 0; i < points.size(); ++i) {
            const int ix = static_cast<int>(std::floor(points[i].first / eps));
            const int iy = static_cast<int>(std::floor(points[i].second / eps));
            buckets[key(ix, iy)].push_back(static_cast<int>(i));
        }
    }

    // All points within eps of point i (inclusive, i itself included),
    // ascending index order.
    void neighbors(int i, std::vector<int>& out) const {
        out.clear();
        const auto [x, y] = (*pts)[i];
        const int ix = static_cast<int>(std::floor(x / eps));
        const int iy = static_cast<int>(std::floor(y / eps));
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                const auto it = buckets.find(key(ix + dx, iy + dy));
                if (it == buckets.end()) continue;
                for (int j : it->second) {
                    const double ddx = (*pts)[j].first - x;
                    const double ddy = (*pts)[j].second - y;
                    if (ddx * ddx + ddy * ddy <= eps2) out.push_back(j);
                }
            }
        }
        std::sort(out.begin(), out.end());
    }
};

}  // namespace

std::vector<int> dbscan(const std::vector<std::pair<double, double>>& points,
                        const DbscanConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(n, kNoise);
    if (n == 0) return labels;
    const PointGrid grid(points, cfg.epsilon_m);

    std::vector<uint8_t> core(n, 0);
#pragma omp parallel
    {
        std::vector<int> nb;
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            grid.neighbors(i, nb);
            core[i] = static_cast<int>(nb.size()) >= cfg.min_points ? 1 : 0;
        }
    }

    int next_cluster = 0;
    std::vector<int> nb;
    std::deque<int> queue;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || labels[i] != kNoise) continue;
        const int cid = next_cluster++;
        labels[i] = cid;
        queue.clear();
        queue.push_back(i);
        while (!queue.empty()) {
            const int j = queue.front();
            queue.pop_front();
            grid.neighbors(j, nb);
            for (int t : nb) {
                if (labels[t] != kNoise) continue;
                labels[t] = cid;
                if (core[t]) queue.push_back(t);
            }
        }
    }
    return labels;
}

// ---- Proposals -----------------------------------------------------------------------

std::vector<DetectionBox> propose_boxes(const Mask& mask, const CartesianImage& img,
                                        const DbscanConfig& cfg, int size_cells) {
    if (mask.rows != img.rows || mask.cols != img.cols)
        throw ShapeError("propose_boxes: mask " + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + " does not match image " +
                         std::to_string(img.rows) + "x" + std::to_string(img.cols));
    if (size_cells < 1) throw InvalidInputError("propose_boxes: size_cells must be >= 1");
    std::vector<std::pair<double, double>> pts;
    std::vector<std::pair<int, int>> cells;
    for (int r = 0; r < mask.rows; ++r) {
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            pts.emplace_back(img.cell_x(c), img.cell_y(r));
            cells.emplace_back(r, c);
        }
    }
    const std::vector<int> labels = dbscan(pts, cfg);
    int nclusters = 0;
    for (int l : labels) nclusters = std::max(nclusters, l + 1);

    std::vector<double> sum_r(nclusters, 0.0), sum_c(nclusters, 0.0);
    std::vector<int> cnt(nclusters, 0);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kNoise) continue;
        sum_r[labels[i]] += cells[i].first;
        sum_c[labels[i]] += cells[i].second;
        ++cnt[labels[i]];
    }
    std::vector<DetectionBox> boxes;
    boxes.reserve(nclusters);
    for (int k = 0; k < nclusters; ++k) {
        DetectionBox b;
        b.center_row = sum_r[k] / cnt[k];
        b.center_col = sum_c[k] / cnt[k];
        b.size_cells = size_cells;
        const double x = img.origin_x + b.center_col * img.cell_size;
        const double y = img.origin_y + b.center_row * img.cell_size;
        b.range_m = std::hypot(x, y);
        boxes.push_back(b);
    }
    std::sort(boxes.begin(), boxes.end(), [](const DetectionBox& a, const DetectionBox& b) {
        if (a.center_row != b.center_row) return a.center_row < b.center_row;
        return a.center_col < b.center_col;
    });
    return boxes;
}

std::vector<DetectionBox> detect_and_classify(const CartesianImage& img,
                                              const net::NetworkWeights& weights,
                                              const CfarConfig& cfar, const DbscanConfig& db,
                                              const DetectConfig& cfg) {
    const Mask mask = cfar_detect(img, cfar);
    std::vector<DetectionBox> proposals = propose_boxes(mask, img, db, cfg.box_size_cells);
    const int bg = cfg.drop_background
                       ? (cfg.background_class >= 0 ? cfg.background_class
                                                    : weights.num_classes() - 1)
                       : -1;
    std::vector<DetectionBox> out;
    for (DetectionBox& b : proposals) {
        const CartesianImage chip =
            imaging::crop_window(img, static_cast<int>(std::lround(b.center_row)),
                                 static_cast<int>(std::lround(b.center_col)), b.size_cells);
        const auto [cls, probs] = net::predict(weights, imaging::whiten(chip));
        if (cfg.drop_background && cls == bg) continue;
        b.cls = cls;
        b.confidence = probs[cls];
        out.push_back(b);
    }
    return out;
}

// ---- Background sampling --------------------------------------------------------------

namespace {

inline bool rects_intersect(double ar0, double ac0, double ar1, double ac1, double br0,
                            double bc0, double br1, double bc1) {
    return ar0 < br1 && br0 < ar1 && ac0 < bc1 && bc0 < ac1;
}

}  // namespace

BackgroundSample sample_background_boxes(const CartesianImage& scene,
                                         const std::vector<DetectionBox>& truths, int k,
                                         Rng& rng, int box_size_cells, int background_label,
                                         int chip_size) {
    if (k < 0) throw InvalidInputError("sample_background_boxes: k must be >= 0");
    BackgroundSample out;
    if (k == 0) return out;
    if (scene.rows < box_size_cells || scene.cols < box_size_cells) {
        out.cap_exhausted = true;
        return out;
    }
    const double half = box_size_cells / 2.0;

    // scene median, for the brightness bias
    std::vector<float> sorted(scene.values);
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];

    const int lo_r = box_size_cells / 2;
    const int hi_r = scene.rows - 1 - (box_size_cells - 1 - box_size_cells / 2);
    const int lo_c = box_size_cells / 2;
    const int hi_c = scene.cols - 1 - (box_size_cells - 1 - box_size_cells / 2);

    const int want_bright = (k + 1) / 2;
    const int dim_quota = k - want_bright;
    int n_bright = 0, n_dim = 0;
    std::vector<std::pair<int, int>> accepted, dim_reserve;

    constexpr int kMaxAttempts = 1000;
    for (int attempt = 0; attempt < kMaxAttempts && static_cast<int>(accepted.size()) < k;
         ++attempt) {
        const int r = lo_r + static_cast<int>(rng.bounded(static_cast<uint64_t>(hi_r - lo_r + 1)));
        const int c = lo_c + static_cast<int>(rng.bounded(static_cast<uint64_t>(hi_c - lo_c + 1)));
        const double r0 = r - half, c0 = c - half;
        bool hits = false;
        for (const DetectionBox& t : truths) {
            const double th = t.size_cells / 2.0;
            if (rects_intersect(r0, c0, r0 + box_size_cells, c0 + box_size_cells,
                                t.center_row - th, t.center_col - th, t.center_row + th,
                                t.center_col + th)) {
                hits = true;
                break;
            }
        }
        if (hits) continue;
        // brightness of the candidate
        double sum = 0.0;
        const int rr0 = r - box_size_cells / 2, cc0 = c - box_size_cells / 2;
        for (int rr = 0; rr < box_size_cells; ++rr) {
            const float* row = scene.values.data() +
                               static_cast<int64_t>(rr0 + rr) * scene.cols + cc0;
            for (int cc = 0; cc < box_size_cells; ++cc) sum += row[cc];
        }
        const bool bright = sum / (static_cast<double>(box_size_cells) * box_size_cells) > median;
        if (bright) {
            accepted.emplace_back(r, c);
            ++n_bright;
        } else if (n_dim < dim_quota) {
            accepted.emplace_back(r, c);
            ++n_dim;
        } else {
            dim_reserve.emplace_back(r, c);
        }
    }
    // The bright quota could not be filled: fall back to dim candidates that
    // were held back, so "at least half bright" yields only when impossible.
    for (const auto& rc : dim_reserve) {
        if (static_cast<int>(accepted.size()) >= k) break;
        accepted.push_back(rc);
    }
    if (static_cast<int>(accepted.size()) < k) out.cap_exhausted = true;

    for (const auto& [r, c] : accepted) {
        DetectionBox b;
        b.center_row = r;
        b.center_col = c;
        b.size_cells = box_size_cells;
        b.cls = background_label;
        const double x = scene.origin_x + c * scene.cell_size;
        const double y = scene.origin_y + r * scene.cell_size;
        b.range_m = std::hypot(x, y);
        out.boxes.push_back(b);

        augment::Chip chip;
        chip.image = imaging::resize_bilinear(imaging::crop_window(scene, r, c, box_size_cells),
                                              chip_size, chip_size);
        chip.label = background_label;
        chip.range_m = b.range_m;
        out.chips.push_back(std::move(chip));
    }
    return out;
}

// ---- Detection files ----------------------------------------------------------------------

void boxes_write(const std::string& path, const std::vector<SceneBox>& boxes,
                 bool with_confidence) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write detections: " + path);
    for (const SceneBox& s : boxes) {
        nlohmann::json j;
        j["scene_id"] = s.scene_id;
        j["center_row"] = s.box.center_row;
        j["center_col"] = s.box.center_col;
        j["size_cells"] = s.box.size_cells;
        j["class"] = s.box.cls;
        j["range_m"] = s.box.range_m;
        if (with_confidence) j["confidence"] = s.box.confidence;
        f << j.dump() << '\n';
    }
    if (!f) throw IoError("failed writing detections: " + path);
}

std::vector<SceneBox> boxes_read(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open detections: " + path);
    std::vector<SceneBox> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            SceneBox s;
            s.scene_id = j.at("scene_id").get<std::string>();
            s.box.center_row = j.at("center_row").get<double>();
            s.box.center_col = j.at("center_col").get<double>();
            s.box.size_cells = j.at("size_cells").get<int>();
            s.box.cls = j.at("class").get<int>();
            s.box.range_m = j.value("range_m", 0.0);
            s.box.confidence = j.value("confidence", 1.0);
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("detections " + path + " line " + std::to_string(lineno) + ": " +
                              e.what());
        }
    }
    return out;
}

}  // namespace radar::detection
