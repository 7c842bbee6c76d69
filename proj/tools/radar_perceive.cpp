// Command-line front end for the radar perception library. Subcommands cover
// the whole pipeline: synthetic dataset generation, classifier training over
// the four experiment splits, single-chip classification, two-stage scene
// detection, AP/accuracy scoring, t-SNE feature maps, and a side-by-side
// report over finished runs.
//
// Every stage derives its randomness from --seed through labelled sub-streams,
// so repeating a command line reproduces its artifacts byte for byte. Errors
// map to distinct exit codes: 2 I/O, 3 file format, 4 architecture/weight
// mismatch, 5 invalid input or state, 1 anything else.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "radar/analysis.hpp"
#include "radar/augment.hpp"
#include "radar/detection.hpp"
#include "radar/errors.hpp"
#include "radar/evaluation.hpp"
#include "radar/image.hpp"
#include "radar/imaging.hpp"
#include "radar/kernels.hpp"
#include "radar/manifest.hpp"
#include "radar/net.hpp"
#include "radar/rng.hpp"
#include "radar/simulator.hpp"
#include "radar/splits.hpp"

namespace radar {
namespace {

using nlohmann::ordered_json;

// Labels for Rng::split / Rng::hash_u64 off the one --seed flag; adding a
// stage never shifts another stage's stream.
enum SeedLabel : uint64_t {
    kSeedAugment = 1,
    kSeedTrain = 2,
    kSeedTransfer = 3,
    kSeedTsne = 4,
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir + ": cannot create directory: " + ec.message());
}

std::string path_join(const std::string& dir, const std::string& name) {
    return data::join_path(dir, name);
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

// Class names for stdout tables and CSV headers. The six-class layout is the
// built-in template set; seven adds the clutter/background class detectors
// train with. Anything else gets neutral names.
std::vector<std::string> class_names(int n) {
    static const std::vector<std::string> six = {"bike", "trolley",   "cone",
                                                 "mannequin", "sign", "dog"};
    std::vector<std::string> names;
    if (n == 6 || n == 7) {
        names = six;
        if (n == 7) names.push_back("background");
        return names;
    }
    for (int i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
    return names;
}

augment::Chip load_chip(const std::string& base_dir, const data::ManifestRecord& rec) {
    augment::Chip chip;
    chip.image = radr_read(path_join(base_dir, rec.path));
    chip.label = rec.label;
    chip.range_m = rec.range_m;
    chip.receiver_id = rec.receiver_id;
    chip.aspect_deg = rec.aspect_deg;
    return chip;
}

std::vector<augment::Chip> load_chips(const std::string& base_dir,
                                      const std::vector<data::ManifestRecord>& records,
                                      const std::vector<int>& indices) {
    std::vector<augment::Chip> chips;
    chips.reserve(indices.size());
    for (int i : indices) chips.push_back(load_chip(base_dir, records[i]));
    return chips;
}

std::vector<int> all_indices(size_t n) {
    std::vector<int> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    return idx;
}

int infer_class_count(const std::vector<data::ManifestRecord>& records) {
    int c = 0;
    for (const auto& r : records) c = std::max(c, r.label + 1);
    return c;
}

// The preprocessing every chip sees before the network: bring it to the
// net's input size, then zero the mean. Matches what the detector does to
// its proposal crops.
CartesianImage net_ready(const CartesianImage& img, int input) {
    if (img.rows == input && img.cols == input) return imaging::whiten(img);
    return imaging::whiten(imaging::resize_bilinear(img, input, input));
}

struct Predictions {
    std::vector<int> labels;  // argmax class per chip
    std::vector<double> confidence;
};

Predictions predict_chips(const net::NetworkWeights& w,
                          const std::vector<augment::Chip>& chips) {
    const int input = net::input_size(w);
    Predictions out;
    out.labels.reserve(chips.size());
    out.confidence.reserve(chips.size());
    for (const auto& chip : chips) {
        auto [cls, probs] = net::predict(w, net_ready(chip.image, input));
        out.labels.push_back(cls);
        out.confidence.push_back(probs[static_cast<size_t>(cls)]);
    }
    return out;
}

void print_confusion(const evaluation::ConfusionResult& conf,
                     const std::vector<std::string>& names) {
    std::printf("%-12s", "truth\\pred");
    for (const auto& n : names) std::printf(" %10s", n.c_str());
    std::printf("\n");
    for (int r = 0; r < conf.num_classes; ++r) {
        std::printf("%-12s", names[static_cast<size_t>(r)].c_str());
        for (int c = 0; c < conf.num_classes; ++c)
            std::printf(" %10.4f",
                        conf.matrix[static_cast<size_t>(r) * conf.num_classes + c]);
        std::printf("\n");
    }
}

// ---- simulate ------------------------------------------------------------------

struct SimulateOpts {
    bool chips = false;
    int scenes = 0;
    std::string out = "dataset";
    uint64_t seed = 0;
    int classes = 0;  // 0: built-in six; N: procedural N-class set
    double noise = -1.0;
    // chip datasets
    int per_class = 90;
    std::vector<double> ranges;
    std::vector<double> gains;
    bool grid_aspects = false;
    int chip_cells = 128;
    // scene datasets
    double mean_objects = 3.27;
    int fixed_objects = 0;
    int max_objects = 9;
    bool wall = false;
    double wall_prob = 1.0;
    double width = 10.0;
    double depth = 12.0;
    double y_min = 1.5;
    double y_max = 0.0;
};

int cmd_simulate(const SimulateOpts& o) {
    if (o.chips == (o.scenes > 0)) {
        std::fprintf(stderr, "simulate: pass exactly one of --chips / --scenes N\n");
        return 1;
    }
    const std::vector<simulator::ObjectTemplate> templates =
        o.classes > 0 ? simulator::synthetic_source_templates(o.classes)
                      : simulator::builtin_templates();

    if (o.chips) {
        simulator::ChipDatasetConfig cfg;
        cfg.n_per_class = o.per_class;
        if (!o.ranges.empty()) cfg.ranges_m = o.ranges;
        if (!o.gains.empty()) cfg.receiver_gains = o.gains;
        cfg.aspect_grid_4deg = o.grid_aspects;
        cfg.chip_cells = o.chip_cells;
        if (o.noise >= 0.0) cfg.noise_sigma = o.noise;
        cfg.seed = o.seed;
        auto records = simulator::generate_chip_dataset(cfg, o.out, templates);
        std::printf("chips      %zu (%zu classes x %d aspects x %zu ranges x %zu receivers)\n",
                    records.size(), templates.size(), cfg.n_per_class, cfg.ranges_m.size(),
                    cfg.receiver_gains.size());
        std::printf("wrote %s\n", path_join(o.out, "manifest.jsonl").c_str());
        return 0;
    }

    simulator::SceneDatasetConfig cfg;
    cfg.n_scenes = o.scenes;
    cfg.mean_objects = o.mean_objects;
    cfg.fixed_objects = o.fixed_objects;
    cfg.max_objects = o.max_objects;
    cfg.with_wall = o.wall;
    cfg.wall_probability = o.wall_prob;
    if (o.noise >= 0.0) cfg.noise_sigma = o.noise;
    cfg.width_m = o.width;
    cfg.depth_m = o.depth;
    cfg.y_min_m = o.y_min;
    cfg.y_max_m = o.y_max;
    cfg.seed = o.seed;
    auto result = simulator::generate_scene_dataset(cfg, o.out, templates);
    std::printf("scenes     %zu\n", result.scene_ids.size());
    std::printf("objects    %zu (skipped placements %d)\n", result.truths.size(),
                result.skipped_placements);
    std::printf("wrote %s, %s\n", path_join(o.out, "scenes.jsonl").c_str(),
                path_join(o.out, "truths.jsonl").c_str());
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
    std::string manifest = "dataset/manifest.jsonl";
    std::string out = "run";
    std::string split = "random_70_30";
    std::string transfer;
    uint64_t seed = 0;
    int epochs = 100;
    double lr = 0.001;
    double momentum = 0.9;
    int batch = 100;
    double val_fraction = 0.2;
    double stop_at_val = 0.0;
    int classes = 0;  // 0: infer from manifest labels
    int crops = 8;    // random crops per chip; each crop is also mirrored
    bool no_augment = false;
};

int cmd_train(const TrainOpts& o) {
    auto records = data::manifest_read(o.manifest);
    data::ExperimentSpec spec;
    spec.seed = o.seed;
    data::parse_split(o.split, spec);
    spec.transfer_weights = o.transfer;
    auto split = data::split_manifest(records, spec);

    const std::string base = data::parent_dir(o.manifest);
    auto train_chips = load_chips(base, records, split.train_idx);
    auto test_chips = load_chips(base, records, split.test_idx);
    const int classes = o.classes > 0 ? o.classes : infer_class_count(records);

    net::NetworkWeights init;
    if (!o.transfer.empty()) {
        auto source = net::load_weights(o.transfer);
        init = net::transfer_init(source, classes, Rng::hash_u64(o.seed, kSeedTransfer));
    } else {
        init = net::init_weights(net::default_architecture(classes),
                                 Rng::hash_u64(o.seed, kSeedTrain));
    }
    const int input = net::input_size(init);

    std::vector<augment::Chip> samples;
    if (o.no_augment) {
        samples = train_chips;
        for (auto& s : samples)
            if (s.image.rows != input || s.image.cols != input)
                s.image = imaging::resize_bilinear(s.image, input, input);
    } else {
        samples = augment::augment_dataset(train_chips, o.crops, Rng(o.seed).split(kSeedAugment),
                                           false, input);
    }
    for (auto& s : samples) s.image = imaging::whiten(s.image);

    net::TrainConfig cfg;
    cfg.learning_rate = o.lr;
    cfg.momentum = o.momentum;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.validation_fraction = o.val_fraction;
    cfg.stop_at_val_accuracy = o.stop_at_val;
    cfg.seed = Rng::hash_u64(o.seed, kSeedTrain);
    auto result = net::train(samples, cfg, init);

    auto preds = predict_chips(result.best, test_chips);
    std::vector<int> truth;
    truth.reserve(test_chips.size());
    for (const auto& c : test_chips) truth.push_back(c.label);
    auto conf = evaluation::accuracy_confusion(preds.labels, truth, classes);
    const auto names = class_names(classes);

    ensure_dir(o.out);
    net::save_weights(result.best, path_join(o.out, "weights.acnw"));
    net::write_history_csv(path_join(o.out, "history.csv"), result.history);
    evaluation::confusion_write_csv(conf, names, path_join(o.out, "confusion.csv"));

    ordered_json summary;
    summary["command"] = "train";
    summary["manifest"] = o.manifest;
    summary["split"] = data::split_name(spec);
    summary["transfer"] = o.transfer;
    summary["seed"] = o.seed;
    summary["classes"] = classes;
    summary["train_chips"] = split.train_idx.size();
    summary["train_samples"] = samples.size();
    summary["test_chips"] = split.test_idx.size();
    summary["epochs_run"] = result.history.size();
    summary["best_epoch"] = result.best_epoch;
    summary["best_val_accuracy"] = result.best_val_accuracy;
    summary["test_accuracy"] = conf.accuracy;
    {
        std::ofstream out(path_join(o.out, "summary.json"), std::ios::binary);
        out << summary.dump(2) << "\n";
        if (!out) throw IoError(path_join(o.out, "summary.json") + ": write failed");
    }

    std::printf("split            %s\n", data::split_name(spec).c_str());
    std::printf("train chips      %zu (%zu samples after augmentation)\n",
                split.train_idx.size(), samples.size());
    std::printf("test chips       %zu\n", split.test_idx.size());
    if (!o.transfer.empty()) std::printf("warm start       %s\n", o.transfer.c_str());
    std::printf("best epoch       %d/%zu (val accuracy %.4f)\n", result.best_epoch,
                result.history.size(), result.best_val_accuracy);
    std::printf("test accuracy    %.4f\n", conf.accuracy);
    print_confusion(conf, names);
    std::printf("wrote %s/{weights.acnw,history.csv,confusion.csv,summary.json}\n",
                o.out.c_str());
    return 0;
}

// ---- classify ------------------------------------------------------------------

struct ClassifyOpts {
    std::string manifest;
    std::string weights;
    std::string out;
};

int run_classify(const ClassifyOpts& o) {
    auto records = data::manifest_read(o.manifest);
    auto w = net::load_weights(o.weights);
    const int classes = w.num_classes();
    auto chips = load_chips(data::parent_dir(o.manifest), records, all_indices(records.size()));

    auto preds = predict_chips(w, chips);
    std::vector<int> truth;
    truth.reserve(chips.size());
    for (const auto& c : chips) truth.push_back(c.label);
    for (int t : truth)
        if (t >= classes)
            throw InvalidInputError("classify: manifest label " + std::to_string(t) +
                                    " outside the network's " + std::to_string(classes) +
                                    " classes");
    auto conf = evaluation::accuracy_confusion(preds.labels, truth, classes);
    const auto names = class_names(classes);

    std::printf("chips            %zu\n", chips.size());
    std::printf("accuracy         %.4f\n", conf.accuracy);
    print_confusion(conf, names);

    if (!o.out.empty()) {
        ensure_dir(o.out);
        evaluation::confusion_write_csv(conf, names, path_join(o.out, "confusion.csv"));
        std::ofstream f(path_join(o.out, "predictions.csv"), std::ios::binary);
        f << "path,label,pred,confidence\n";
        for (size_t i = 0; i < records.size(); ++i) {
            char line[64];
            std::snprintf(line, sizeof line, ",%d,%d,%.6f\n", records[i].label,
                          preds.labels[i], preds.confidence[i]);
            f << records[i].path << line;
        }
        if (!f) throw IoError(path_join(o.out, "predictions.csv") + ": write failed");
        std::printf("wrote %s/{confusion.csv,predictions.csv}\n", o.out.c_str());
    }
    return 0;
}

// ---- detect ------------------------------------------------------------------

struct DetectOpts {
    std::string manifest;
    std::string weights;
    std::string out = "detections";
    double cfar_level = 0.22;
    bool cfar_ca = false;
    int cfar_train = 8;
    int cfar_guard = 2;
    double cfar_pfa = 1e-3;
    double cfar_scale = 0.0;
    double dbscan_eps = 0.3;
    int dbscan_min_pts = 40;
    int box_size = 275;
    bool keep_background = false;
};

int cmd_detect(const DetectOpts& o) {
    auto records = data::manifest_read(o.manifest);
    auto w = net::load_weights(o.weights);
    const std::string base = data::parent_dir(o.manifest);

    detection::CfarConfig cfar;
    if (o.cfar_ca) {
        cfar.mode = detection::CfarConfig::Mode::CellAveraging;
        cfar.train_cells = o.cfar_train;
        cfar.guard_cells = o.cfar_guard;
        cfar.pfa = o.cfar_pfa;
        cfar.scale_factor = o.cfar_scale;
    } else {
        cfar.level = o.cfar_level;
    }
    detection::DbscanConfig db;
    db.epsilon_m = o.dbscan_eps;
    db.min_points = o.dbscan_min_pts;
    detection::DetectConfig dcfg;
    dcfg.box_size_cells = o.box_size;
    dcfg.drop_background = !o.keep_background;

    std::vector<detection::SceneBox> found;
    for (const auto& rec : records) {
        auto img = radr_read(path_join(base, rec.path));
        auto boxes = detection::detect_and_classify(img, w, cfar, db, dcfg);
        const std::string id = stem_of(rec.path);
        for (auto& b : boxes) found.push_back({id, b});
    }

    ensure_dir(o.out);
    detection::boxes_write(path_join(o.out, "detections.jsonl"), found, true);

    std::vector<size_t> per_class(static_cast<size_t>(w.num_classes()), 0);
    for (const auto& s : found) ++per_class[static_cast<size_t>(s.box.cls)];
    const auto names = class_names(w.num_classes());
    std::printf("scenes           %zu\n", records.size());
    std::printf("detections       %zu\n", found.size());
    for (size_t c = 0; c < per_class.size(); ++c)
        if (per_class[c] > 0)
            std::printf("  %-12s   %zu\n", names[c].c_str(), per_class[c]);
    std::printf("wrote %s\n", path_join(o.out, "detections.jsonl").c_str());
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
    std::string mode = "detect";
    std::string detections;
    std::string truths;
    std::string manifest;
    std::string weights;
    std::string out;
    double iou = 0.5;
    bool strata = false;
};

std::string format_ap(const std::optional<double>& ap) {
    if (!ap) return "N/A";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *ap);
    return buf;
}

int cmd_eval(const EvalOpts& o) {
    if (o.mode == "classify") {
        if (o.manifest.empty() || o.weights.empty()) {
            std::fprintf(stderr, "eval: --mode classify needs --manifest and --weights\n");
            return 1;
        }
        return run_classify({o.manifest, o.weights, o.out});
    }
    if (o.mode != "detect") {
        std::fprintf(stderr, "eval: unknown --mode '%s' (detect or classify)\n",
                     o.mode.c_str());
        return 1;
    }
    if (o.detections.empty() || o.truths.empty()) {
        std::fprintf(stderr, "eval: --mode detect needs --detections and --truths\n");
        return 1;
    }

    auto dets = detection::boxes_read(o.detections);
    auto truths = detection::boxes_read(o.truths);
    int classes = 0;
    for (const auto& s : dets) classes = std::max(classes, s.box.cls + 1);
    for (const auto& s : truths) classes = std::max(classes, s.box.cls + 1);
    if (classes == 0) throw InvalidInputError("eval: no boxes in either file");
    const auto names = class_names(classes);

    auto table = evaluation::map_stratified(dets, truths, names, o.iou);
    for (size_t c = 0; c < names.size(); ++c)
        std::printf("AP  %-12s %s\n", names[c].c_str(), format_ap(table.ap[c][0]).c_str());
    std::printf("mAP              %s\n", format_ap(table.map_row[0]).c_str());

    if (!o.out.empty()) {
        ensure_dir(o.out);
        if (o.strata) {
            evaluation::ap_table_write_csv(table, path_join(o.out, "ap_stratified.csv"));
            std::printf("wrote %s\n", path_join(o.out, "ap_stratified.csv").c_str());
        } else {
            evaluation::ApTable overall;
            overall.class_names = table.class_names;
            overall.columns = {table.columns[0]};
            for (const auto& row : table.ap) overall.ap.push_back({row[0]});
            overall.map_row = {table.map_row[0]};
            evaluation::ap_table_write_csv(overall, path_join(o.out, "ap.csv"));
            std::printf("wrote %s\n", path_join(o.out, "ap.csv").c_str());
        }
    }
    return 0;
}

// ---- tsne ------------------------------------------------------------------

struct TsneOpts {
    std::string manifest;
    std::string weights;
    std::string out = "tsne";
    uint64_t seed = 0;
    double perplexity = 30.0;
    int iterations = 1000;
    int max_samples = 0;  // 0: all chips
};

int cmd_tsne(const TsneOpts& o) {
    auto records = data::manifest_read(o.manifest);
    auto w = net::load_weights(o.weights);
    const int input = net::input_size(w);

    std::vector<int> indices = all_indices(records.size());
    if (o.max_samples > 0 && static_cast<int>(indices.size()) > o.max_samples) {
        // evenly spaced subsample; manifests are class-ordered so this keeps
        // every class represented
        std::vector<int> picked(static_cast<size_t>(o.max_samples));
        for (int i = 0; i < o.max_samples; ++i)
            picked[static_cast<size_t>(i)] = static_cast<int>(
                static_cast<size_t>(i) * indices.size() / static_cast<size_t>(o.max_samples));
        indices = std::move(picked);
    }
    auto chips = load_chips(data::parent_dir(o.manifest), records, indices);
    for (auto& c : chips) c.image = net_ready(c.image, input);

    auto features = analysis::extract_features(w, chips);
    analysis::TsneConfig cfg;
    cfg.perplexity = o.perplexity;
    cfg.iterations = o.iterations;
    cfg.seed = Rng::hash_u64(o.seed, kSeedTsne);
    auto result = analysis::tsne(features, cfg);

    ensure_dir(o.out);
    analysis::write_embedding_csv(result.y, features.labels,
                                  path_join(o.out, "embedding.csv"));
    analysis::plot_embedding(result.y, features.labels, path_join(o.out, "embedding.ppm"));
    std::printf("chips            %d (%d features each)\n", features.n, features.d);
    std::printf("final KL         %.6f\n", result.final_kl);
    std::printf("wrote %s/{embedding.csv,embedding.ppm}\n", o.out.c_str());
    return 0;
}

// ---- report ------------------------------------------------------------------

struct ReportOpts {
    std::vector<std::string> runs;
    std::string out;
};

int cmd_report(const ReportOpts& o) {
    struct Row {
        std::optional<double> plain, transfer;
    };
    std::vector<std::string> order;
    std::map<std::string, Row> rows;

    for (const auto& dir : o.runs) {
        const std::string path = path_join(dir, "summary.json");
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError(path + ": cannot open");
        ordered_json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ": " + e.what());
        }
        if (!j.contains("split") || !j.contains("test_accuracy") || !j.contains("transfer"))
            throw FormatError(path + ": not a training summary");
        const std::string split = j["split"].get<std::string>();
        const bool with_transfer = !j["transfer"].get<std::string>().empty();
        const double acc = j["test_accuracy"].get<double>();
        if (!rows.count(split)) order.push_back(split);
        auto& row = rows[split];
        (with_transfer ? row.transfer : row.plain) = acc;
    }

    auto cell = [](const std::optional<double>& v) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
        return buf;
    };
    std::string text;
    char line[96];
    std::snprintf(line, sizeof line, "%-18s %12s %12s\n", "experiment", "without TL",
                  "with TL");
    text += line;
    for (const auto& split : order) {
        const Row& row = rows[split];
        std::snprintf(line, sizeof line, "%-18s %12s %12s\n", split.c_str(),
                      cell(row.plain).c_str(), cell(row.transfer).c_str());
        text += line;
    }

    std::fputs(text.c_str(), stdout);
    if (!o.out.empty()) {
        std::ofstream f(o.out, std::ios::binary);
        f << text;
        if (!f) throw IoError(o.out + ": write failed");
    }
    return 0;
}

}  // namespace
}  // namespace radar

int main(int argc, char** argv) {
    radar::kernels::init_threads_from_env();

    CLI::App app{"synthetic 300 GHz radar perception: simulate, train, detect, evaluate"};
    app.require_subcommand(1);

    radar::SimulateOpts sim;
    auto* s = app.add_subcommand("simulate", "generate a synthetic chip or scene dataset");
    s->add_flag("--chips", sim.chips, "one-object chips with a manifest");
    s->add_option("--scenes", sim.scenes, "multi-object scenes (count)");
    s->add_option("--out", sim.out, "output directory (default dataset)");
    s->add_option("--seed", sim.seed, "master seed");
    s->add_option("--classes", sim.classes,
                  "0 = the six built-in objects, N = procedural N-class set");
    s->add_option("--noise", sim.noise, "noise sigma (default per dataset kind)");
    s->add_option("--per-class", sim.per_class, "aspects per class and range (default 90)");
    s->add_option("--ranges", sim.ranges, "capture ranges in meters (default 3.8 6.3)");
    s->add_option("--gains", sim.gains, "receiver gains (default 0.9 1.0 1.15)");
    s->add_flag("--grid-aspects", sim.grid_aspects, "aspects on the 4-degree grid");
    s->add_option("--chip-cells", sim.chip_cells, "chip side in cells (default 128)");
    s->add_option("--mean-objects", sim.mean_objects, "Poisson mean objects per scene");
    s->add_option("--fixed-objects", sim.fixed_objects, "exact objects per scene (overrides)");
    s->add_option("--max-objects", sim.max_objects, "cap on objects per scene");
    s->add_flag("--wall", sim.wall, "add wall clutter");
    s->add_option("--wall-prob", sim.wall_prob, "probability a scene gets the wall");
    s->add_option("--width", sim.width, "scene width in meters");
    s->add_option("--depth", sim.depth, "scene depth in meters");
    s->add_option("--y-min", sim.y_min, "nearest object range");
    s->add_option("--y-max", sim.y_max, "farthest object range (0 = depth - 1)");

    radar::TrainOpts tr;
    auto* t = app.add_subcommand("train", "train the chip classifier over a split");
    t->add_option("--manifest", tr.manifest, "chip manifest (default dataset/manifest.jsonl)");
    t->add_option("--out", tr.out, "run directory (default run)");
    t->add_option("--split", tr.split,
                  "random_70_30 | by_receiver:<id> | by_range:<m> | by_quadrant");
    t->add_option("--transfer", tr.transfer, "warm-start weights (.acnw)");
    t->add_option("--seed", tr.seed, "master seed");
    t->add_option("--epochs", tr.epochs, "training epochs (default 100)");
    t->add_option("--lr", tr.lr, "learning rate (default 0.001)");
    t->add_option("--momentum", tr.momentum, "momentum (default 0.9)");
    t->add_option("--batch", tr.batch, "minibatch size (default 100)");
    t->add_option("--val-fraction", tr.val_fraction, "held-out fraction per class (default 0.2)");
    t->add_option("--stop-at-val", tr.stop_at_val, "stop once val accuracy reaches this");
    t->add_option("--classes", tr.classes, "class count (default: infer from labels)");
    t->add_option("--crops", tr.crops, "random crops per chip, each also mirrored (default 8)");
    t->add_flag("--no-augment", tr.no_augment, "train on resized chips only");

    radar::ClassifyOpts cl;
    auto* c = app.add_subcommand("classify", "run the classifier over a chip manifest");
    c->add_option("--manifest", cl.manifest, "chip manifest")->required();
    c->add_option("--weights", cl.weights, "trained weights (.acnw)")->required();
    c->add_option("--out", cl.out, "write confusion.csv and predictions.csv here");

    radar::DetectOpts de;
    auto* d = app.add_subcommand("detect", "CFAR + clustering + classification over scenes");
    d->add_option("--manifest", de.manifest, "scene manifest (scenes.jsonl)")->required();
    d->add_option("--weights", de.weights, "classifier weights (.acnw)")->required();
    d->add_option("--out", de.out, "output directory (default detections)");
    d->add_option("--cfar-level", de.cfar_level, "global CFAR level (default 0.22)");
    d->add_flag("--cfar-ca", de.cfar_ca, "cell-averaging CFAR instead of global");
    d->add_option("--cfar-train", de.cfar_train, "CA training ring cells (default 8)");
    d->add_option("--cfar-guard", de.cfar_guard, "CA guard ring cells (default 2)");
    d->add_option("--cfar-pfa", de.cfar_pfa, "CA design false-alarm rate (default 1e-3)");
    d->add_option("--cfar-scale", de.cfar_scale, "CA scale override (0 = derive from pfa)");
    d->add_option("--dbscan-eps", de.dbscan_eps, "cluster radius in meters (default 0.3)");
    d->add_option("--dbscan-min-pts", de.dbscan_min_pts, "core point threshold (default 40)");
    d->add_option("--box-size", de.box_size, "proposal box side in cells (default 275)");
    d->add_flag("--keep-background", de.keep_background, "emit background-class boxes too");

    radar::EvalOpts ev;
    auto* e = app.add_subcommand("eval", "score detections or classifications");
    e->add_option("--mode", ev.mode, "detect (default) or classify");
    e->add_option("--detections", ev.detections, "detections.jsonl from detect");
    e->add_option("--truths", ev.truths, "truth boxes (truths.jsonl)");
    e->add_option("--manifest", ev.manifest, "chip manifest (classify mode)");
    e->add_option("--weights", ev.weights, "classifier weights (classify mode)");
    e->add_option("--out", ev.out, "output directory for CSV tables");
    e->add_option("--iou", ev.iou, "IoU match threshold (default 0.5)");
    e->add_flag("--strata", ev.strata, "write the range/density-stratified AP table");

    radar::TsneOpts ts;
    auto* n = app.add_subcommand("tsne", "2-D embedding of classifier features");
    n->add_option("--manifest", ts.manifest, "chip manifest")->required();
    n->add_option("--weights", ts.weights, "classifier weights (.acnw)")->required();
    n->add_option("--out", ts.out, "output directory (default tsne)");
    n->add_option("--seed", ts.seed, "embedding init seed");
    n->add_option("--perplexity", ts.perplexity, "target perplexity (default 30)");
    n->add_option("--iterations", ts.iterations, "gradient steps (default 1000)");
    n->add_option("--max-samples", ts.max_samples, "subsample cap (0 = all chips)");

    radar::ReportOpts re;
    auto* r = app.add_subcommand("report", "side-by-side accuracy over finished runs");
    r->add_option("runs", re.runs, "run directories with summary.json")->required();
    r->add_option("--out", re.out, "also write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (s->parsed()) return radar::cmd_simulate(sim);
        if (t->parsed()) return radar::cmd_train(tr);
        if (c->parsed()) return radar::run_classify(cl);
        if (d->parsed()) return radar::cmd_detect(de);
        if (e->parsed()) return radar::cmd_eval(ev);
        if (n->parsed()) return radar::cmd_tsne(ts);
        if (r->parsed()) return radar::cmd_report(re);
    } catch (const radar::IoError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    } catch (const radar::FormatError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 3;
    } catch (const radar::ArchitectureError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 4;
    } catch (const radar::RadarError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 5;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 1;
}
