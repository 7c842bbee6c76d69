#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radar/augment.hpp"
#include "radar/image.hpp"
#include "radar/net.hpp"
#include "radar/rng.hpp"

namespace radar::detection {

// ---- Configuration ------------------------------------------------------------

struct CfarConfig {
    enum class Mode { Global, CellAveraging };
    Mode mode = Mode::Global;
    // Global mode: a cell fires when value > level * max(image).
    double level = 0.22;
    // Cell-averaging mode: square training ring of train_cells beyond a
    // guard ring of guard_cells around the cell under test; the ring shrinks
    // at image edges. A cell fires when value > scale * ring mean, with
    // scale either given or derived from the design false-alarm rate.
    int train_cells = 8;
    int guard_cells = 2;
    double scale_factor = 0.0;  // 0 -> use ca_scale_for_pfa(pfa, ring size)
    double pfa = 1e-3;

    void validate() const;
};

// Exact CA-CFAR threshold multiplier for exponentially distributed power
// cells: N * (pfa^(-1/N) - 1).
double ca_scale_for_pfa(double pfa, int n_train);

struct DbscanConfig {
    double epsilon_m = 0.3;
    int min_points = 40;

    void validate() const;
};

struct DetectionBox {
    double center_row = 0.0;
    double center_col = 0.0;
    int size_cells = 275;
    int cls = -1;               // class id; -1 when not yet classified
    double confidence = 1.0;    // softmax probability of cls
    double range_m = 0.0;       // metric distance of the center from the sensor
};

// ---- CFAR -------------------------------------------------------------------------

struct Mask {
    int rows = 0, cols = 0;
    std::vector<uint8_t> on;  // row-major, 0/1

    bool at(int r, int c) const { return on[static_cast<size_t>(r) * cols + c] != 0; }
    size_t count() const;
};

// Input must be a non-negative power image (whitening happens later, on
// classifier chips only). The serial twin computes ring means by direct
// summation instead of a summed-area table; tests compare the two.
Mask cfar_detect(const CartesianImage& img, const CfarConfig& cfg);
Mask cfar_detect_serial(const CartesianImage& img, const CfarConfig& cfg);

// ---- DBSCAN -------------------------------------------------------------------------

inline constexpr int kNoise = -1;

// Standard DBSCAN over metric points: a point is core iff at least
// min_points points (itself included) lie within epsilon. Clusters are
// discovered by scanning points in index order and flood-filling from each
// unassigned core, expanding neighbour lists in ascending index order, so
// cluster ids are ordered by their smallest core index and a border point
// reachable from several clusters joins the one with the smallest id. Output
// is one label per point (kNoise for outliers).
std::vector<int> dbscan(const std::vector<std::pair<double, double>>& points,
                        const DbscanConfig& cfg);

// ---- Proposals and classification --------------------------------------------------------

// Detected mask cells become metric points, DBSCAN groups them, and each
// cluster yields one size_cells-square box at the cluster centroid. Sorted by
// ascending (center_row, center_col).
std::vector<DetectionBox> propose_boxes(const Mask& mask, const CartesianImage& img,
                                        const DbscanConfig& cfg, int size_cells = 275);

struct DetectConfig {
    int box_size_cells = 275;
    bool drop_background = true;
    int background_class = -1;  // -1: highest class id of the network
};

// Full two-stage pass over one scene: CFAR -> DBSCAN -> crop (zero-padded)
// -> whiten -> classify. Proposals classified as background are dropped when
// configured; confidence is the softmax probability of the emitted class.
std::vector<DetectionBox> detect_and_classify(const CartesianImage& img,
                                              const net::NetworkWeights& weights,
                                              const CfarConfig& cfar, const DbscanConfig& db,
                                              const DetectConfig& cfg = {});

// ---- Background sampling -------------------------------------------------------------------

struct BackgroundSample {
    std::vector<augment::Chip> chips;     // resized to chip_size, label = background_label
    std::vector<DetectionBox> boxes;      // where each chip was cut from
    bool cap_exhausted = false;           // fewer than k found within the attempt cap
};

// Rejection-samples k box_size boxes that lie fully inside the scene and do
// not intersect any truth box (at most 1000 attempts). At least half of the
// accepted boxes have mean power above the scene median when such boxes can
// be found, so the background class sees structured clutter, not just noise
// floor.
BackgroundSample sample_background_boxes(const CartesianImage& scene,
                                         const std::vector<DetectionBox>& truths, int k,
                                         Rng& rng, int box_size_cells = 275,
                                         int background_label = 6, int chip_size = 128);

// ---- Detection files -------------------------------------------------------------------------

// JSON-lines, one box per line: {scene_id, center_row, center_col,
// size_cells, class, range_m} plus confidence for detections. Truth files
// use the same schema without the confidence key.
struct SceneBox {
    std::string scene_id;
    DetectionBox box;
};

void boxes_write(const std::string& path, const std::vector<SceneBox>& boxes,
                 bool with_confidence);
std::vector<SceneBox> boxes_read(const std::string& path);

}  // namespace radar::detection
