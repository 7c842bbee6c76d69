#include "radar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "radar/errors.hpp"

namespace radar::evaluation {

Rect box_rect(const DetectionBox& b) {
    const double h = b.size_cells / 2.0;
    return {b.center_row - h, b.center_col - h, b.center_row + h, b.center_col + h};
}

Rect clip_rect(const Rect& r, double rows, double cols) {
    return {std::max(r.r0, 0.0), std::max(r.c0, 0.0), std::min(r.r1, rows),
            std::min(r.c1, cols)};
}

double iou(const DetectionBox& a, const DetectionBox& b) {
    const Rect ra = box_rect(a), rb = box_rect(b);
    const double aa = ra.area(), ab = rb.area();
    if (aa <= 0.0 || ab <= 0.0) return 0.0;
    const double ir0 = std::max(ra.r0, rb.r0), ic0 = std::max(ra.c0, rb.c0);
    const double ir1 = std::min(ra.r1, rb.r1), ic1 = std::min(ra.c1, rb.c1);
    const double inter =
        (ir1 > ir0 && ic1 > ic0) ? (ir1 - ir0) * (ic1 - ic0) : 0.0;
    return inter / (aa + ab - inter);
}

int range_bin_of(double range_m) { return range_m < 3.5 ? 0 : (range_m < 7.0 ? 1 : 2); }

int density_bin_of(int num_objects) { return num_objects < 4 ? 0 : (num_objects < 7 ? 1 : 2); }

namespace {

// detections ranked by descending confidence, stable on ties
std::vector<int> confidence_order(const std::vector<DetectionBox>& dets) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&dets](int a, int b) {
        return dets[a].confidence > dets[b].confidence;
    });
    return order;
}

// Matches one detection against the unmatched same-class truths; returns the
// winning truth index or -1.
int match_one(const DetectionBox& det, const std::vector<DetectionBox>& truths,
              const std::vector<uint8_t>& truth_used, double thr) {
    int best = -1;
    double best_iou = thr;  // must be strictly exceeded
    for (size_t t = 0; t < truths.size(); ++t) {
        if (truth_used[t] || truths[t].cls != det.cls) continue;
        const double v = iou(det, truths[t]);
        if (v > best_iou) {
            best_iou = v;
            best = static_cast<int>(t);
        }
    }
    return best;
}

}  // namespace

MatchResult match_detections(const std::vector<DetectionBox>& dets,
                             const std::vector<DetectionBox>& truths, double iou_threshold) {
    MatchResult r;
    r.det_to_truth.assign(dets.size(), -1);
    std::vector<uint8_t> used(truths.size(), 0);
    for (int i : confidence_order(dets)) {
        const int t = match_one(dets[i], truths, used, iou_threshold);
        if (t >= 0) {
            used[t] = 1;
            r.det_to_truth[i] = t;
            ++r.tp;
        } else {
            ++r.fp;
        }
    }
    r.fn = static_cast<int>(truths.size()) - r.tp;
    return r;
}

std::pair<double, double> precision_recall(int tp, int fp, int fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw InvalidInputError("counts must be >= 0");
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    return {p, r};
}

std::optional<double> average_precision(const std::vector<SceneBox>& dets,
                                        const std::vector<SceneBox>& truths,
                                        double iou_threshold) {
    if (truths.empty()) return std::nullopt;

    // truths grouped by scene; the used flag lives alongside
    std::map<std::string, std::vector<int>> truth_of_scene;
    for (size_t t = 0; t < truths.size(); ++t)
        truth_of_scene[truths[t].scene_id].push_back(static_cast<int>(t));
    std::vector<uint8_t> used(truths.size(), 0);

    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&dets](int a, int b) {
        return dets[a].box.confidence > dets[b].box.confidence;
    });

    std::vector<uint8_t> is_tp(dets.size(), 0);
    for (int i : order) {
        const auto it = truth_of_scene.find(dets[i].scene_id);
        if (it == truth_of_scene.end()) continue;  // FP
        int best = -1;
        double best_iou = iou_threshold;
        for (int t : it->second) {
            if (used[t] || truths[t].box.cls != dets[i].box.cls) continue;
            const double v = iou(dets[i].box, truths[t].box);
            if (v > best_iou) {
                best_iou = v;
                best = t;
            }
        }
        if (best >= 0) {
            used[best] = 1;
            is_tp[i] = 1;
        }
    }

    // precision/recall prefix points in rank order
    const double nt = static_cast<double>(truths.size());
    const size_t n = dets.size();
    std::vector<double> prec(n), rec(n);
    int tp = 0;
    for (size_t r = 0; r < n; ++r) {
        tp += is_tp[order[r]];
        prec[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
        rec[r] = static_cast<double>(tp) / nt;
    }
    // all-points interpolation: precision envelope from the right
    for (size_t r = n; r-- > 1;) prec[r - 1] = std::max(prec[r - 1], prec[r]);
    double ap = 0.0;
    double prev_rec = 0.0;
    for (size_t r = 0; r < n; ++r) {
        if (rec[r] > prev_rec) {
            ap += (rec[r] - prev_rec) * prec[r];
            prev_rec = rec[r];
        }
    }
    return ap;
}

namespace {

std::vector<SceneBox> filter_class(const std::vector<SceneBox>& in, int cls) {
    std::vector<SceneBox> out;
    for (const SceneBox& s : in)
        if (s.box.cls == cls) out.push_back(s);
    return out;
}

}  // namespace

ApTable map_stratified(const std::vector<SceneBox>& dets, const std::vector<SceneBox>& truths,
                       const std::vector<std::string>& class_names, double iou_threshold) {
    if (class_names.empty()) throw InvalidInputError("map_stratified: no classes");
    const int C = static_cast<int>(class_names.size());

    // scene density = number of truth boxes in the scene
    std::map<std::string, int> density;
    for (const SceneBox& t : truths) ++density[t.scene_id];
    auto density_bin = [&density](const std::string& scene) {
        const auto it = density.find(scene);
        return density_bin_of(it == density.end() ? 0 : it->second);
    };

    // column filters over (density bin, range bin); -1 = no constraint
    struct Stratum {
        const char* name;
        int dens, range;
    };
    static constexpr Stratum kStrata[] = {
        {"Overall", -1, -1},
        {"Objects<4 Overall", 0, -1},
        {"Objects<4 Short", 0, 0},
        {"Objects<4 Mid", 0, 1},
        {"Objects<4 Long", 0, 2},
        {"Objects4-6 Overall", 1, -1},
        {"Objects4-6 Short", 1, 0},
        {"Objects4-6 Mid", 1, 1},
        {"Objects4-6 Long", 1, 2},
        {"Objects>=7 Overall", 2, -1},
        {"Objects>=7 Short", 2, 0},
        {"Objects>=7 Mid", 2, 1},
        {"Objects>=7 Long", 2, 2},
        {"Short", -1, 0},
        {"Mid", -1, 1},
        {"Long", -1, 2},
    };

    ApTable table;
    table.class_names = class_names;
    for (const Stratum& s : kStrata) table.columns.push_back(s.name);
    table.ap.assign(C, std::vector<std::optional<double>>(std::size(kStrata)));
    table.map_row.assign(std::size(kStrata), std::nullopt);

    for (int c = 0; c < C; ++c) {
        const std::vector<SceneBox> cd = filter_class(dets, c);
        const std::vector<SceneBox> ct = filter_class(truths, c);
        for (size_t s = 0; s < std::size(kStrata); ++s) {
            const Stratum& st = kStrata[s];
            auto keep = [&](const SceneBox& b) {
                if (st.dens >= 0 && density_bin(b.scene_id) != st.dens) return false;
                if (st.range >= 0 && range_bin_of(b.box.range_m) != st.range) return false;
                return true;
            };
            std::vector<SceneBox> sd, stt;
            for (const SceneBox& b : cd)
                if (keep(b)) sd.push_back(b);
            for (const SceneBox& b : ct)
                if (keep(b)) stt.push_back(b);
            table.ap[c][s] = average_precision(sd, stt, iou_threshold);
        }
    }
    for (size_t s = 0; s < std::size(kStrata); ++s) {
        double sum = 0.0;
        int n = 0;
        for (int c = 0; c < C; ++c) {
            if (table.ap[c][s]) {
                sum += *table.ap[c][s];
                ++n;
            }
        }
        if (n > 0) table.map_row[s] = sum / n;
    }
    return table;
}

void ap_table_write_csv(const ApTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write AP table: " + path);
    f << "class";
    for (const auto& c : table.columns) f << ',' << c;
    f << '\n';
    char cell[32];
    auto put = [&f, &cell](const std::optional<double>& v) {
        if (v) {
            std::snprintf(cell, sizeof(cell), ",%.2f", *v * 100.0);
            f << cell;
        } else {
            f << ",N/A";
        }
    };
    for (size_t c = 0; c < table.class_names.size(); ++c) {
        f << table.class_names[c];
        for (const auto& v : table.ap[c]) put(v);
        f << '\n';
    }
    f << "mAP";
    for (const auto& v : table.map_row) put(v);
    f << '\n';
    if (!f) throw IoError("failed writing AP table: " + path);
}

ConfusionResult accuracy_confusion(const std::vector<int>& preds,
                                   const std::vector<int>& truths, int num_classes) {
    if (preds.size() != truths.size())
        throw InvalidInputError("accuracy_confusion: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(truths.size()) + " truths");
    if (preds.empty()) throw InvalidInputError("accuracy_confusion: empty input");
    if (num_classes < 1) throw InvalidInputError("accuracy_confusion: need >= 1 class");

    ConfusionResult r;
    r.num_classes = num_classes;
    r.matrix.assign(static_cast<size_t>(num_classes) * num_classes, 0.0);
    std::vector<int> row_counts(num_classes, 0);
    int correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= num_classes || truths[i] < 0 ||
            truths[i] >= num_classes)
            throw InvalidInputError("accuracy_confusion: label outside [0," +
                                    std::to_string(num_classes) + ")");
        r.matrix[static_cast<size_t>(truths[i]) * num_classes + preds[i]] += 1.0;
        ++row_counts[truths[i]];
        if (preds[i] == truths[i]) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / preds.size();
    for (int t = 0; t < num_classes; ++t) {
        if (row_counts[t] == 0) continue;
        for (int p = 0; p < num_classes; ++p)
            r.matrix[static_cast<size_t>(t) * num_classes + p] /= row_counts[t];
    }
    return r;
}

void confusion_write_csv(const ConfusionResult& result,
                         const std::vector<std::string>& class_names,
                         const std::string& path) {
    if (static_cast<int>(class_names.size()) != result.num_classes)
        throw InvalidInputError("confusion_write_csv: class name count mismatch");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write confusion matrix: " + path);
    f << "truth\\pred";
    for (const auto& n : class_names) f << ',' << n;
    f << '\n';
    char cell[32];
    for (int t = 0; t < result.num_classes; ++t) {
        f << class_names[t];
        for (int p = 0; p < result.num_classes; ++p) {
            std::snprintf(cell, sizeof(cell), ",%.4f",
                          result.matrix[static_cast<size_t>(t) * result.num_classes + p]);
            f << cell;
        }
        f << '\n';
    }
    std::snprintf(cell, sizeof(cell), "%.6f", result.accuracy);
    f << "accuracy," << cell << '\n';
    if (!f) throw IoError("failed writing confusion matrix: " + path);
}

}  // namespace radar::evaluation
