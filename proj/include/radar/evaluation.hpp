#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radar/detection.hpp"

namespace radar::evaluation {

using detection::DetectionBox;
using detection::SceneBox;

// Boxes live on the cell grid as real-valued rects center +/- size/2.
struct Rect {
    double r0, c0, r1, c1;
    double area() const { return (r1 > r0 && c1 > c0) ? (r1 - r0) * (c1 - c0) : 0.0; }
};

Rect box_rect(const DetectionBox& b);
Rect clip_rect(const Rect& r, double rows, double cols);

// |a n b| / |a u b|; 0 when either box has zero area.
double iou(const DetectionBox& a, const DetectionBox& b);

// Range strata (m): Short < 3.5, Mid [3.5, 7), Long >= 7.
// Scene-density strata (objects/scene): < 4, [4, 7), >= 7.
int range_bin_of(double range_m);    // 0/1/2
int density_bin_of(int num_objects);  // 0/1/2

struct MatchResult {
    int tp = 0, fp = 0, fn = 0;
    // per input detection (original order): matched truth index or -1
    std::vector<int> det_to_truth;
};

// Greedy matching in descending-confidence order (stable on ties): a
// detection is a true positive iff some unmatched truth of the same class
// overlaps it with IoU strictly greater than the threshold; among candidates
// the highest-IoU truth wins, ties to the lowest truth index. Each truth
// matches at most once.
MatchResult match_detections(const std::vector<DetectionBox>& dets,
                             const std::vector<DetectionBox>& truths,
                             double iou_threshold = 0.5);

// Precision = TP/(TP+FP), Recall = TP/(TP+FN); 0/0 is defined as precision
// 1, recall 0.
std::pair<double, double> precision_recall(int tp, int fp, int fn);

// All-points interpolated average precision for one class over a dataset of
// scenes: detections are ranked by confidence globally, matched greedily
// within their scene, and AP sums (r_i - r_{i-1}) * max precision at recall
// >= r_i. Returns nullopt ("N/A") when the class has no truth boxes.
std::optional<double> average_precision(const std::vector<SceneBox>& dets,
                                        const std::vector<SceneBox>& truths,
                                        double iou_threshold = 0.5);

// AP per class x stratum. Columns: Overall, then each density stratum's
// {Overall, Short, Mid, Long}, then Short, Mid, Long; a final mAP row
// averages the defined per-class entries of each column.
struct ApTable {
    std::vector<std::string> class_names;                 // one row per class id
    std::vector<std::string> columns;                     // 16 column labels
    std::vector<std::vector<std::optional<double>>> ap;   // [class][column], fractions
    std::vector<std::optional<double>> map_row;           // per column
};

ApTable map_stratified(const std::vector<SceneBox>& dets, const std::vector<SceneBox>& truths,
                       const std::vector<std::string>& class_names,
                       double iou_threshold = 0.5);

// CSV with AP as percentages (2 decimals) and the literal "N/A" for
// undefined cells.
void ap_table_write_csv(const ApTable& table, const std::string& path);

struct ConfusionResult {
    double accuracy = 0.0;
    int num_classes = 0;
    std::vector<double> matrix;  // row-major C x C, rows normalized to 1 (or all-zero)
};

ConfusionResult accuracy_confusion(const std::vector<int>& preds,
                                   const std::vector<int>& truths, int num_classes);

void confusion_write_csv(const ConfusionResult& result,
                         const std::vector<std::string>& class_names,
                         const std::string& path);

}  // namespace radar::evaluation
