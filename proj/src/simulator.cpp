#include "radar/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "radar/errors.hpp"

namespace radar::simulator {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Uniform (0,1] from a stateless hash; never 0 so log() is safe.
double hash_unit(uint64_t key, uint64_t idx) {
    uint64_t u = Rng::hash_u64(key, idx) >> 11;
    if (u == 0) u = 1;
    return static_cast<double>(u) * 0x1.0p-53;
}

int poisson_clipped(Rng& rng, double mean, int lo, int hi) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.next_double();
    } while (p > limit);
    return std::clamp(k - 1, lo, hi);
}

}  // namespace

const std::vector<ObjectTemplate>& builtin_templates() {
    // Layouts are plan-view scatterer sets; reflectivities are relative power
    // units. The trolley's metal frame corners are deliberately the single
    // strongest reflectors of any template.
    static const std::vector<ObjectTemplate> tpls = [] {
        std::vector<ObjectTemplate> v;

        ObjectTemplate bike;
        bike.class_id = 0;
        bike.name = "bike";
        bike.footprint_m = 1.6;
        bike.scatterers = {{-0.55, 0.0, 1.2}, {0.55, 0.0, 1.2},   // wheel hubs
                           {-0.25, 0.05, 0.7}, {0.1, 0.08, 0.8},  // frame tubes
                           {0.3, -0.05, 0.6}, {0.0, -0.08, 0.5}};
        v.push_back(bike);

        ObjectTemplate trolley;
        trolley.class_id = 1;
        trolley.name = "trolley";
        trolley.footprint_m = 1.0;
        trolley.scatterers = {{-0.4, -0.25, 3.5}, {0.4, -0.25, 3.3},  // cage corners
                              {-0.4, 0.25, 3.3},  {0.4, 0.25, 3.5},
                              {0.0, 0.0, 1.5},    {0.0, -0.3, 1.0}};  // basket, handle
        v.push_back(trolley);

        ObjectTemplate cone;
        cone.class_id = 2;
        cone.name = "cone";
        cone.footprint_m = 0.4;
        cone.scatterers = {{0.0, 0.0, 0.9}, {-0.12, 0.0, 0.35}, {0.12, 0.0, 0.35}};
        v.push_back(cone);

        ObjectTemplate mannequin;
        mannequin.class_id = 3;
        mannequin.name = "mannequin";
        mannequin.footprint_m = 0.6;
        mannequin.scatterers = {{0.0, 0.0, 1.4},   {-0.18, 0.06, 0.6},
                                {0.18, 0.06, 0.6}, {-0.1, -0.12, 0.5},
                                {0.1, -0.12, 0.5}};
        v.push_back(mannequin);

        ObjectTemplate sign;
        sign.class_id = 4;
        sign.name = "sign";
        sign.footprint_m = 0.8;
        sign.scatterers = {{-0.3, 0.0, 2.2}, {-0.1, 0.0, 2.2},  // flat panel
                           {0.1, 0.0, 2.2},  {0.3, 0.0, 2.2},
                           {0.0, -0.05, 0.8}};  // post
        v.push_back(sign);

        ObjectTemplate dog;
        dog.class_id = 5;
        dog.name = "dog";
        dog.footprint_m = 0.7;
        dog.scatterers = {{-0.25, 0.0, 0.5}, {0.0, 0.04, 0.65}, {0.25, 0.0, 0.45},
                          {0.12, -0.06, 0.3}};
        v.push_back(dog);

        return v;
    }();
    return tpls;
}

std::vector<ObjectTemplate> synthetic_source_templates(int n_classes) {
    if (n_classes <= 0) throw InvalidInputError("synthetic_source_templates: n_classes must be positive");
    std::vector<ObjectTemplate> out;
    out.reserve(n_classes);
    for (int id = 0; id < n_classes; ++id) {
        ObjectTemplate tpl;
        tpl.class_id = id;
        tpl.name = "synthetic_" + std::to_string(id);
        const int pattern = id % 3;
        const double radius = 0.25 + 0.07 * (id / 3);
        const double refl = 1.0 + 0.2 * (id % 4);
        tpl.footprint_m = 2.0 * radius + 0.2;
        if (pattern == 0) {  // ring
            const int n = 5 + id % 4;
            for (int i = 0; i < n; ++i) {
                const double a = 2.0 * kPi * i / n;
                tpl.scatterers.push_back({radius * std::cos(a), radius * std::sin(a), refl});
            }
        } else if (pattern == 1) {  // line
            const int n = 4 + id % 3;
            for (int i = 0; i < n; ++i) {
                const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
                tpl.scatterers.push_back({radius * (2.0 * t - 1.0), 0.0, refl * (i == 0 ? 1.4 : 1.0)});
            }
        } else {  // cross
            tpl.scatterers.push_back({0.0, 0.0, refl * 1.5});
            tpl.scatterers.push_back({radius, 0.0, refl});
            tpl.scatterers.push_back({-radius, 0.0, refl});
            tpl.scatterers.push_back({0.0, radius, refl});
            tpl.scatterers.push_back({0.0, -radius, refl});
        }
        out.push_back(std::move(tpl));
    }
    return out;
}

std::vector<WorldScatterer> place_template(const ObjectTemplate& tpl, double x, double y,
                                           double rotation_deg) {
    const double a = deg2rad(rotation_deg);
    const double ca = std::cos(a), sa = std::sin(a);
    std::vector<WorldScatterer> out;
    out.reserve(tpl.scatterers.size());
    for (const auto& s : tpl.scatterers) {
        out.push_back({x + ca * s.dx - sa * s.dy, y + sa * s.dx + ca * s.dy, s.reflectivity});
    }
    return out;
}

std::vector<WorldScatterer> apply_occlusion(std::vector<WorldScatterer> scatterers) {
    const int n = static_cast<int>(scatterers.size());
    std::vector<double> range(n);
    for (int i = 0; i < n; ++i) range[i] = std::hypot(scatterers[i].x, scatterers[i].y);

    std::vector<uint8_t> blocked(n, 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double ri = range[i];
        if (ri <= 0.0) continue;
        const double ux = scatterers[i].x / ri, uy = scatterers[i].y / ri;
        for (int j = 0; j < n; ++j) {
            if (j == i || range[j] >= ri - 1e-9) continue;
            // closest approach of scatterer j to the segment sensor->i
            const double t = scatterers[j].x * ux + scatterers[j].y * uy;
            if (t <= 0.0 || t >= ri) continue;
            const double dx = scatterers[j].x - t * ux;
            const double dy = scatterers[j].y - t * uy;
            if (dx * dx + dy * dy < 0.1 * 0.1) {
                blocked[i] = 1;
                break;
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (blocked[i]) scatterers[i].reflectivity *= 0.2;
    return scatterers;
}

void deposit_scatterers(CartesianImage& img, const std::vector<WorldScatterer>& scatterers,
                        const RadarParams& params, double gain) {
    params.validate();
    if (img.rows <= 0 || img.cols <= 0 || img.cell_size <= 0.0)
        throw InvalidInputError("deposit_scatterers: empty target image");
    const double cell = img.cell_size;
    const double sigma_r = params.range_resolution_m;
    const double tan_bw = std::tan(deg2rad(params.azimuth_beamwidth_deg));

    for (const auto& s : scatterers) {
        const double r = std::hypot(s.x, s.y);
        if (r < 0.1) continue;  // inside the antenna near field; nothing sane to render
        const double ux = s.x / r, uy = s.y / r;  // line-of-sight direction
        const double sigma_c = r * tan_bw;
        const double peak = gain * s.reflectivity / (r * r);
        const double inv2sr = 1.0 / (2.0 * sigma_r * sigma_r);
        const double inv2sc = 1.0 / (2.0 * sigma_c * sigma_c);

        const double half = 4.0 * std::max(sigma_r, sigma_c);
        const int r0 = std::max(0, static_cast<int>(std::floor((s.y - half - img.origin_y) / cell)));
        const int r1 = std::min(img.rows - 1,
                                static_cast<int>(std::ceil((s.y + half - img.origin_y) / cell)));
        const int c0 = std::max(0, static_cast<int>(std::floor((s.x - half - img.origin_x) / cell)));
        const int c1 = std::min(img.cols - 1,
                                static_cast<int>(std::ceil((s.x + half - img.origin_x) / cell)));
        if (r0 > r1 || c0 > c1) continue;

#pragma omp parallel for schedule(static)
        for (int row = r0; row <= r1; ++row) {
            const double cy = img.origin_y + row * cell;
            float* line = &img.at(row, 0);
            for (int col = c0; col <= c1; ++col) {
                const double dx = img.origin_x + col * cell - s.x;
                const double dy = cy - s.y;
                const double dr = dx * ux + dy * uy;   // along the line of sight
                const double dc = -dx * uy + dy * ux;  // across it
                const double e = dr * dr * inv2sr + dc * dc * inv2sc;
                if (e > 32.0) continue;  // beyond 8 sigma; exp underflows anyway
                line[col] += static_cast<float>(peak * std::exp(-e));
            }
        }
    }
}

void add_rayleigh_noise(CartesianImage& img, double sigma, uint64_t key) {
    if (sigma < 0.0) throw InvalidInputError("add_rayleigh_noise: sigma must be non-negative");
    if (sigma == 0.0) return;
    const int64_t n = static_cast<int64_t>(img.rows) * img.cols;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const double u = hash_unit(key, static_cast<uint64_t>(i));
        img.values[static_cast<size_t>(i)] +=
            static_cast<float>(sigma * std::sqrt(-2.0 * std::log(u)));
    }
}

CartesianImage render_window(const std::vector<WorldScatterer>& scatterers, double center_x,
                             double center_y, int cells, const RadarParams& params, double gain,
                             double noise_sigma, uint64_t noise_key) {
    if (cells <= 0) throw InvalidInputError("render_window: cells must be positive");
    const double cell = params.range_resolution_m;
    const int half = cells / 2;
    CartesianImage img = CartesianImage::zeros(cells, cells, cell, center_x - half * cell,
                                               center_y - half * cell);
    deposit_scatterers(img, scatterers, params, gain);
    add_rayleigh_noise(img, noise_sigma, noise_key);
    return img;
}

RenderedScene render_scene(const SceneSpec& spec, const RadarParams& params,
                           const std::vector<ObjectTemplate>& templates, int truth_box_cells) {
    params.validate();
    if (spec.width_m <= 0.0 || spec.depth_m <= 0.0)
        throw InvalidInputError("render_scene: scene extent must be positive");
    if (truth_box_cells <= 0) throw InvalidInputError("render_scene: truth box size must be positive");

    const double cell = params.range_resolution_m;
    const int rows = static_cast<int>(std::floor(spec.depth_m / cell)) + 1;
    const int half_cols = static_cast<int>(std::floor(spec.width_m / 2.0 / cell));
    const int cols = 2 * half_cols + 1;
    CartesianImage img = CartesianImage::zeros(rows, cols, cell, -half_cols * cell, 0.0);

    std::vector<WorldScatterer> scatterers;
    for (const auto& pl : spec.placements) {
        if (pl.template_id < 0 || pl.template_id >= static_cast<int>(templates.size()))
            throw InvalidInputError("render_scene: placement references unknown template id " +
                                    std::to_string(pl.template_id));
        auto placed = place_template(templates[pl.template_id], pl.x, pl.y, pl.rotation_deg);
        scatterers.insert(scatterers.end(), placed.begin(), placed.end());
    }
    if (spec.wall) {
        const auto& w = *spec.wall;
        const double len = std::hypot(w.x1 - w.x0, w.y1 - w.y0);
        const double spacing = 4.0 * cell;
        const int n = std::max(1, static_cast<int>(std::floor(len / spacing))) + 1;
        for (int i = 0; i < n; ++i) {
            const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
            scatterers.push_back(
                {w.x0 + t * (w.x1 - w.x0), w.y0 + t * (w.y1 - w.y0), w.reflectivity});
        }
    }

    deposit_scatterers(img, apply_occlusion(std::move(scatterers)), params);
    add_rayleigh_noise(img, spec.noise_sigma, spec.seed);

    RenderedScene out;
    out.image = std::move(img);
    out.truths.reserve(spec.placements.size());
    for (const auto& pl : spec.placements) {
        detection::DetectionBox box;
        box.center_row = (pl.y - out.image.origin_y) / cell;
        box.center_col = (pl.x - out.image.origin_x) / cell;
        box.size_cells = truth_box_cells;
        box.cls = templates[pl.template_id].class_id;
        box.confidence = 1.0;
        box.range_m = std::hypot(pl.x, pl.y);
        out.truths.push_back(box);
    }
    return out;
}

std::vector<data::ManifestRecord> generate_chip_dataset(const ChipDatasetConfig& cfg,
                                                        const std::string& out_dir,
                                                        const std::vector<ObjectTemplate>& templates) {
    cfg.params.validate();
    if (cfg.n_per_class <= 0 || cfg.chip_cells <= 0 || cfg.ranges_m.empty() ||
        cfg.receiver_gains.empty() || templates.empty())
        throw InvalidInputError("generate_chip_dataset: empty configuration");
    for (double r : cfg.ranges_m)
        if (r < 0.5) throw InvalidInputError("generate_chip_dataset: chip range too close to the sensor");

    ensure_dir(data::join_path(out_dir, "chips"));

    Rng root(cfg.seed);
    std::vector<data::ManifestRecord> records;
    records.reserve(templates.size() * cfg.ranges_m.size() * cfg.n_per_class *
                    cfg.receiver_gains.size());
    int chip_index = 0;
    for (size_t t = 0; t < templates.size(); ++t) {
        for (size_t ri = 0; ri < cfg.ranges_m.size(); ++ri) {
            Rng aspect_rng = root.split(t).split(ri);
            for (int i = 0; i < cfg.n_per_class; ++i) {
                const double aspect = cfg.aspect_grid_4deg
                                          ? std::fmod(4.0 * i, 360.0)
                                          : aspect_rng.uniform(0.0, 360.0);
                const double range = cfg.ranges_m[ri];
                const auto scatterers =
                    apply_occlusion(place_template(templates[t], 0.0, range, aspect));
                for (size_t g = 0; g < cfg.receiver_gains.size(); ++g) {
                    CartesianImage chip = render_window(
                        scatterers, 0.0, range, cfg.chip_cells, cfg.params,
                        cfg.receiver_gains[g], cfg.noise_sigma,
                        Rng::hash_u64(cfg.seed, static_cast<uint64_t>(chip_index)));
                    char name[64];
                    std::snprintf(name, sizeof name, "chips/chip_%06d.radr", chip_index);
                    radr_write(data::join_path(out_dir, name), chip);

                    data::ManifestRecord rec;
                    rec.path = name;
                    rec.label = templates[t].class_id;
                    rec.range_m = range;
                    rec.receiver_id = static_cast<int>(g) + 1;
                    rec.aspect_deg = aspect;
                    rec.quadrant = data::quadrant_of(aspect);
                    records.push_back(std::move(rec));
                    ++chip_index;
                }
            }
        }
    }
    data::manifest_write(data::join_path(out_dir, "manifest.jsonl"), records);
    return records;
}

SceneDatasetResult generate_scene_dataset(const SceneDatasetConfig& cfg, const std::string& out_dir,
                                          const std::vector<ObjectTemplate>& templates) {
    cfg.params.validate();
    if (cfg.n_scenes <= 0 || templates.empty())
        throw InvalidInputError("generate_scene_dataset: empty configuration");
    if (cfg.fixed_objects <= 0 && (cfg.mean_objects <= 0.0 || cfg.max_objects < 1))
        throw InvalidInputError("generate_scene_dataset: mean_objects must be positive");
    const double x_lo = -cfg.width_m / 2.0 + 1.0, x_hi = cfg.width_m / 2.0 - 1.0;
    const double y_lo = cfg.y_min_m;
    const double y_hi = cfg.y_max_m > 0.0 ? cfg.y_max_m : cfg.depth_m - 1.0;
    if (x_lo >= x_hi || y_lo >= y_hi || y_lo < 0.5 || y_hi > cfg.depth_m)
        throw InvalidInputError("generate_scene_dataset: scene extent too small to place objects");

    ensure_dir(data::join_path(out_dir, "scenes"));

    Rng root(cfg.seed);
    SceneDatasetResult result;
    std::vector<data::ManifestRecord> scene_records;
    for (int s = 0; s < cfg.n_scenes; ++s) {
        Rng rng = root.split(static_cast<uint64_t>(s));
        const int want = cfg.fixed_objects > 0
                             ? cfg.fixed_objects
                             : poisson_clipped(rng, cfg.mean_objects, 1, cfg.max_objects);

        SceneSpec spec;
        spec.width_m = cfg.width_m;
        spec.depth_m = cfg.depth_m;
        spec.noise_sigma = cfg.noise_sigma;
        spec.seed = Rng::hash_u64(cfg.seed, static_cast<uint64_t>(s));
        for (int k = 0; k < want; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                const double x = rng.uniform(x_lo, x_hi);
                const double y = rng.uniform(y_lo, y_hi);
                bool clear = true;
                for (const auto& other : spec.placements) {
                    if (std::hypot(x - other.x, y - other.y) < cfg.min_separation_m) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
                Placement pl;
                pl.template_id = static_cast<int>(rng.bounded(templates.size()));
                pl.x = x;
                pl.y = y;
                pl.rotation_deg = rng.uniform(0.0, 360.0);
                spec.placements.push_back(pl);
                placed = true;
            }
            if (!placed) {
                ++result.skipped_placements;
                std::fprintf(stderr,
                             "warning: scene %d: no room for object %d after 1000 attempts, "
                             "skipping it\n",
                             s, k);
            }
        }
        if (cfg.with_wall && rng.next_double() < cfg.wall_probability) {
            Wall w;
            w.reflectivity = cfg.wall_reflectivity;
            const int side = static_cast<int>(rng.bounded(3));
            const double xw = cfg.width_m / 2.0 - 0.5;
            if (side == 0)
                w = {-xw, 0.5, -xw, cfg.depth_m - 0.5, cfg.wall_reflectivity};
            else if (side == 1)
                w = {xw, 0.5, xw, cfg.depth_m - 0.5, cfg.wall_reflectivity};
            else
                w = {-xw, cfg.depth_m - 0.5, xw, cfg.depth_m - 0.5, cfg.wall_reflectivity};
            spec.wall = w;
        }

        RenderedScene scene = render_scene(spec, cfg.params, templates);
        char sid[32], rel[64];
        std::snprintf(sid, sizeof sid, "scene_%04d", s);
        std::snprintf(rel, sizeof rel, "scenes/scene_%04d.radr", s);
        radr_write(data::join_path(out_dir, rel), scene.image);

        result.scene_ids.emplace_back(sid);
        result.scene_paths.emplace_back(rel);
        for (const auto& box : scene.truths) result.truths.push_back({sid, box});

        data::ManifestRecord rec;
        rec.path = rel;
        rec.label = static_cast<int>(spec.placements.size());
        scene_records.push_back(std::move(rec));
    }

    data::manifest_write(data::join_path(out_dir, "scenes.jsonl"), scene_records);
    detection::boxes_write(data::join_path(out_dir, "truths.jsonl"), result.truths,
                           /*with_confidence=*/false);
    return result;
}

}  // namespace radar::simulator
