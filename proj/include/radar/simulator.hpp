#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radar/detection.hpp"
#include "radar/image.hpp"
#include "radar/manifest.hpp"
#include "radar/rng.hpp"

namespace radar::simulator {

// Synthetic stand-in for the unavailable sensor data: point scatterers with
// a range/cross-range Gaussian point-spread function, 1/r^2 power falloff,
// optional occlusion and a Rayleigh noise floor.

struct ObjectTemplate {
    int class_id = 0;
    std::string name;
    // scatterer offsets from the object center, in meters, plus reflectivity
    struct Scatterer {
        double dx, dy, reflectivity;
    };
    std::vector<Scatterer> scatterers;
    double footprint_m = 1.0;
};

// The six object classes, distinguishable by scatterer layout. The trolley
// carries the strongest single reflector (metal corner sections); class ids
// 0..5 are bike, trolley, cone, mannequin, sign, dog.
const std::vector<ObjectTemplate>& builtin_templates();

// Procedurally generated layouts for pretraining source domains with a
// different class count (ring/line/cross patterns parameterised by id).
std::vector<ObjectTemplate> synthetic_source_templates(int n_classes);

// ---- Low-level rendering -----------------------------------------------------------

struct WorldScatterer {
    double x, y;  // meters; sensor at origin, +y is boresight
    double reflectivity;
};

// Template scatterers rotated by rotation_deg about the object center and
// translated to (x, y).
std::vector<WorldScatterer> place_template(const ObjectTemplate& tpl, double x, double y,
                                           double rotation_deg);

// Attenuates (factor 0.2) every scatterer whose line of sight to the sensor
// passes within 0.1 m of a strictly nearer scatterer.
std::vector<WorldScatterer> apply_occlusion(std::vector<WorldScatterer> scatterers);

// Adds each scatterer's blob to the image: peak power gain*refl/r^2, Gaussian
// psf with sigma_range = range resolution and sigma_cross = r*tan(beamwidth),
// oriented along the line of sight. Deposits are summed in scatterer order.
void deposit_scatterers(CartesianImage& img, const std::vector<WorldScatterer>& scatterers,
                        const RadarParams& params, double gain = 1.0);

// Adds an independent Rayleigh(sigma) sample per cell, keyed by (key, cell
// index) so the result is identical regardless of evaluation order.
void add_rayleigh_noise(CartesianImage& img, double sigma, uint64_t key);

// cells x cells window whose central cell (cells/2, cells/2) sits exactly at
// (center_x, center_y).
CartesianImage render_window(const std::vector<WorldScatterer>& scatterers, double center_x,
                             double center_y, int cells, const RadarParams& params,
                             double gain = 1.0, double noise_sigma = 0.0,
                             uint64_t noise_key = 0);

// ---- Scenes -----------------------------------------------------------------------

struct Placement {
    int template_id = 0;
    double x = 0.0, y = 0.0;  // meters
    double rotation_deg = 0.0;
};

struct Wall {
    double x0, y0, x1, y1;  // segment endpoints, meters
    double reflectivity = 3.0;
};

struct SceneSpec {
    std::vector<Placement> placements;
    double noise_sigma = 0.0;
    std::optional<Wall> wall;
    double width_m = 10.0;  // cross-range extent, centered on boresight
    double depth_m = 12.0;  // downrange extent from the sensor
    uint64_t seed = 0;      // keys the noise
};

struct RenderedScene {
    CartesianImage image;
    std::vector<detection::DetectionBox> truths;  // 275-cell boxes at object centers
};

RenderedScene render_scene(const SceneSpec& spec, const RadarParams& params,
                           const std::vector<ObjectTemplate>& templates = builtin_templates(),
                           int truth_box_cells = 275);

// ---- Datasets -----------------------------------------------------------------------

struct ChipDatasetConfig {
    RadarParams params;
    int n_per_class = 90;
    std::vector<double> ranges_m = {3.8, 6.3};
    bool aspect_grid_4deg = false;  // true: aspects on the 0,4,8,... grid
    std::vector<double> receiver_gains = {0.9, 1.0, 1.15};
    double noise_sigma = 0.005;
    int chip_cells = 128;
    uint64_t seed = 0;
};

// Renders n_per_class aspects per (class, range), repeated across the
// receiver gains (same aspect for all receivers of one capture). Writes
// chips/NNNNNN.radr plus manifest.jsonl under out_dir and returns the
// records.
std::vector<data::ManifestRecord> generate_chip_dataset(
    const ChipDatasetConfig& cfg, const std::string& out_dir,
    const std::vector<ObjectTemplate>& templates = builtin_templates());

struct SceneDatasetConfig {
    RadarParams params;
    int n_scenes = 198;
    double mean_objects = 3.27;  // Poisson(mean) clipped to [1, max_objects]...
    int fixed_objects = 0;       // ...unless fixed_objects > 0
    int max_objects = 9;
    bool with_wall = false;      // "Hard" scenes carry a wall
    double wall_probability = 1.0;
    double wall_reflectivity = 3.0;
    double noise_sigma = 0.001;
    double width_m = 10.0, depth_m = 12.0;
    // Downrange band objects are placed in; y_max 0 means depth_m - 1.
    double y_min_m = 1.5, y_max_m = 0.0;
    double min_separation_m = 0.5;
    uint64_t seed = 0;
};

struct SceneDatasetResult {
    std::vector<std::string> scene_ids;      // "scene_0000", ...
    std::vector<std::string> scene_paths;    // RADR files, relative to out_dir
    std::vector<detection::SceneBox> truths; // across all scenes
    int skipped_placements = 0;  // objects dropped after 1000 placement attempts
};

// Writes scenes/scene_NNNN.radr, scenes.jsonl (label = object count) and
// truths.jsonl under out_dir.
SceneDatasetResult generate_scene_dataset(
    const SceneDatasetConfig& cfg, const std::string& out_dir,
    const std::vector<ObjectTemplate>& templates = builtin_templates());

}  // namespace radar::simulator
