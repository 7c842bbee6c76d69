#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "radar/errors.hpp"
#include "radar/evaluation.hpp"
#include "radar/rng.hpp"

using namespace radar;
using testutil::TmpDir;
using detection::DetectionBox;
using detection::SceneBox;

namespace {

DetectionBox box(double r, double c, int size, int cls = 0, double conf = 1.0,
                 double range = 0.0) {
    DetectionBox b;
    b.center_row = r;
    b.center_col = c;
    b.size_cells = size;
    b.cls = cls;
    b.confidence = conf;
    b.range_m = range;
    return b;
}

SceneBox scene_box(const std::string& scene, const DetectionBox& b) {
    SceneBox s;
    s.scene_id = scene;
    s.box = b;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("iou covers the identical, disjoint, and partial cases") {
    CHECK(evaluation::iou(box(10, 10, 4), box(10, 10, 4)) == 1.0);
    CHECK(evaluation::iou(box(0, 0, 2), box(100, 100, 2)) == 0.0);
    // unit squares offset by half a side: 0.5 / 1.5
    CHECK(evaluation::iou(box(0.5, 0.5, 1), box(0.5, 1.0, 1)) == doctest::Approx(1.0 / 3.0));
    // zero-size boxes never overlap anything
    CHECK(evaluation::iou(box(5, 5, 0), box(5, 5, 4)) == 0.0);
}

TEST_CASE("range and density strata") {
    CHECK(evaluation::range_bin_of(2.0) == 0);
    CHECK(evaluation::range_bin_of(3.49) == 0);
    CHECK(evaluation::range_bin_of(3.5) == 1);
    CHECK(evaluation::range_bin_of(6.99) == 1);
    CHECK(evaluation::range_bin_of(7.0) == 2);
    CHECK(evaluation::density_bin_of(3) == 0);
    CHECK(evaluation::density_bin_of(4) == 1);
    CHECK(evaluation::density_bin_of(6) == 1);
    CHECK(evaluation::density_bin_of(7) == 2);
}

TEST_CASE("matching walks detections by confidence and gates on class") {
    // Higher confidence claims the truth even with the smaller IoU.
    const std::vector<DetectionBox> truths = {box(10, 10, 8, 0)};
    std::vector<DetectionBox> dets = {box(10, 12, 8, 0, 0.5),   // IoU 0.6
                                      box(10, 13, 8, 0, 0.9)};  // IoU ~0.45... still > thr?
    // shift 3 of 8: inter 5*8=40, union 128-40=88 -> 0.4545 < 0.5 would be FP;
    // use threshold 0.3 so both overlap and only rank decides.
    auto r = evaluation::match_detections(dets, truths, 0.3);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 0);
    CHECK(r.det_to_truth == std::vector<int>{-1, 0});

    // Wrong class never matches.
    auto wrong = evaluation::match_detections({box(10, 10, 8, 1, 0.9)}, truths, 0.5);
    CHECK(wrong.tp == 0);
    CHECK(wrong.fp == 1);
    CHECK(wrong.fn == 1);

    // A truth is consumed at most once.
    auto twice = evaluation::match_detections(
        {box(10, 10, 8, 0, 0.9), box(10, 11, 8, 0, 0.8)}, truths, 0.3);
    CHECK(twice.tp == 1);
    CHECK(twice.fp == 1);
}

TEST_CASE("matching requires IoU strictly above the threshold") {
    // size-3 squares offset by one row: inter 6, union 12, IoU exactly 0.5
    const std::vector<DetectionBox> dets = {box(0, 0, 3, 0, 0.9)};
    const std::vector<DetectionBox> truths = {box(1, 0, 3, 0)};
    CHECK(evaluation::iou(dets[0], truths[0]) == 0.5);
    CHECK(evaluation::match_detections(dets, truths, 0.5).tp == 0);
    CHECK(evaluation::match_detections(dets, truths, 0.49).tp == 1);
}

TEST_CASE("matching breaks IoU ties toward the lowest truth index") {
    const std::vector<DetectionBox> truths = {box(10, 10, 8, 0), box(10, 10, 8, 0)};
    auto r = evaluation::match_detections({box(10, 10, 8, 0, 0.9)}, truths, 0.5);
    CHECK(r.tp == 1);
    CHECK(r.det_to_truth == std::vector<int>{0});
}

TEST_CASE("precision_recall defines 0/0 as precision 1, recall 0") {
    CHECK(evaluation::precision_recall(0, 0, 0) == std::pair{1.0, 0.0});
    CHECK(evaluation::precision_recall(3, 1, 2) == std::pair{0.75, 0.6});
    CHECK_THROWS_AS(evaluation::precision_recall(-1, 0, 0), InvalidInputError);
}

TEST_CASE("average precision on the worked example") {
    // Two truths; detections at confidence .9 (TP), .8 (FP), .7 (TP):
    // PR points (1, 1/2), (1/2, 1/2), (2/3, 1) -> AP = 1/2 + 1/2 * 2/3 = 0.8333
    const std::vector<SceneBox> truths = {scene_box("s", box(10, 10, 10)),
                                          scene_box("s", box(50, 50, 10))};
    const std::vector<SceneBox> dets = {scene_box("s", box(10, 10, 10, 0, 0.9)),
                                        scene_box("s", box(90, 30, 10, 0, 0.8)),
                                        scene_box("s", box(50, 50, 10, 0, 0.7))};
    const auto ap = evaluation::average_precision(dets, truths, 0.5);
    REQUIRE(ap.has_value());
    CHECK(*ap == doctest::Approx(0.833333).epsilon(1e-4));
    const auto ref = oracles::brute_ap(dets, truths, 0.5);
    REQUIRE(ref.has_value());
    CHECK(std::fabs(*ap - *ref) <= 1e-9);
}

TEST_CASE("average precision edge cases") {
    CHECK_FALSE(evaluation::average_precision({scene_box("s", box(1, 1, 4, 0, 0.9))}, {}, 0.5)
                    .has_value());
    // no detections at all: zero recall, zero area
    const std::vector<SceneBox> truths = {scene_box("s", box(10, 10, 10))};
    const auto ap = evaluation::average_precision({}, truths, 0.5);
    REQUIRE(ap.has_value());
    CHECK(*ap == 0.0);
    // detection in a scene with no truths is a plain FP
    const auto lost = evaluation::average_precision(
        {scene_box("other", box(10, 10, 10, 0, 0.9))}, truths, 0.5);
    REQUIRE(lost.has_value());
    CHECK(*lost == 0.0);
}

TEST_CASE("average precision equals threshold enumeration on random instances") {
    Rng rng(909);
    const char* scenes[] = {"sc0", "sc1", "sc2", "sc3"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SceneBox> truths, dets;
        const int nt = 1 + static_cast<int>(rng.bounded(6));
        for (int t = 0; t < nt; ++t) {
            const double r = rng.next_double() * 100.0;
            const double c = rng.next_double() * 100.0;
            const int cls = static_cast<int>(rng.bounded(2));
            truths.push_back(scene_box(scenes[rng.bounded(4)], box(r, c, 10, cls)));
            if (rng.next_double() < 0.75) {
                // jittered copy: IoU lands on either side of 0.5
                const double jr = r + rng.next_double() * 6.0 - 3.0;
                const double jc = c + rng.next_double() * 6.0 - 3.0;
                dets.push_back(
                    scene_box(truths.back().scene_id, box(jr, jc, 10, cls, rng.next_double())));
            }
        }
        const int extra = static_cast<int>(rng.bounded(4));
        for (int f = 0; f < extra; ++f)
            dets.push_back(scene_box(scenes[rng.bounded(4)],
                                     box(rng.next_double() * 100.0, rng.next_double() * 100.0,
                                         10, static_cast<int>(rng.bounded(2)),
                                         rng.next_double())));

        const auto got = evaluation::average_precision(dets, truths, 0.5);
        const auto want = oracles::brute_ap(dets, truths, 0.5);
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(std::fabs(*got - *want) <= 1e-9);
    }
}

TEST_CASE("stratified table marks empty strata N/A and averages the rest") {
    const std::vector<std::string> names = {"bike", "cone"};
    // scene a holds 2 objects (density bin 0), scene b holds 5 (bin 1)
    std::vector<SceneBox> truths = {
        scene_box("a", box(10, 10, 10, 0, 1.0, 2.0)),  // bike, short
        scene_box("a", box(40, 40, 10, 1, 1.0, 5.0)),  // cone, mid
        scene_box("b", box(10, 10, 10, 0, 1.0, 2.0)),  // bike, short
        scene_box("b", box(20, 60, 10, 0, 1.0, 8.0)),  // bike, long
        scene_box("b", box(40, 40, 10, 1, 1.0, 5.0)),  // cone, mid
        scene_box("b", box(60, 20, 10, 1, 1.0, 5.0)),  // cone, mid
        scene_box("b", box(80, 80, 10, 1, 1.0, 8.0)),  // cone, long
    };
    // perfect detections: every AP that exists is 1
    std::vector<SceneBox> dets;
    for (const auto& t : truths) {
        dets.push_back(t);
        dets.back().box.confidence = 0.9;
    }

    const auto table = evaluation::map_stratified(dets, truths, names, 0.5);
    REQUIRE(table.columns.size() == 16);
    REQUIRE(table.ap.size() == 2);
    REQUIRE(table.ap[0].size() == 16);
    REQUIRE(table.map_row.size() == 16);
    CHECK(table.columns[0] == "Overall");

    auto col = [&](const char* name) {
        for (size_t i = 0; i < table.columns.size(); ++i)
            if (table.columns[i] == name) return static_cast<int>(i);
        FAIL("missing column ", name);
        return -1;
    };

    const int overall = col("Overall");
    CHECK(*table.ap[0][overall] == doctest::Approx(1.0));
    CHECK(*table.ap[1][overall] == doctest::Approx(1.0));
    CHECK(*table.map_row[overall] == doctest::Approx(1.0));

    // scene a is the only low-density scene: it has a short bike, no short cone
    const int lo_short = col("Objects<4 Short");
    REQUIRE(table.ap[0][lo_short].has_value());
    CHECK(*table.ap[0][lo_short] == doctest::Approx(1.0));
    CHECK_FALSE(table.ap[1][lo_short].has_value());
    CHECK(*table.map_row[lo_short] == doctest::Approx(1.0));  // averages the defined entries

    // nothing long in scene a
    const int lo_long = col("Objects<4 Long");
    CHECK_FALSE(table.ap[0][lo_long].has_value());
    CHECK_FALSE(table.ap[1][lo_long].has_value());
    CHECK_FALSE(table.map_row[lo_long].has_value());

    // no scene has 7+ objects
    const int hi = col("Objects>=7 Overall");
    CHECK_FALSE(table.map_row[hi].has_value());

    CHECK_THROWS_AS(evaluation::map_stratified(dets, truths, {}, 0.5), InvalidInputError);
}

TEST_CASE("AP table CSV uses percent cells and literal N/A") {
    evaluation::ApTable table;
    table.class_names = {"bike"};
    table.columns = {"Overall", "Short"};
    table.ap = {{0.833333, std::nullopt}};
    table.map_row = {0.833333, std::nullopt};

    TmpDir tmp;
    const auto path = tmp.file("ap.csv");
    evaluation::ap_table_write_csv(table, path);
    const std::string text = slurp(path);
    CHECK(text == "class,Overall,Short\nbike,83.33,N/A\nmAP,83.33,N/A\n");

    CHECK_THROWS_AS(evaluation::ap_table_write_csv(table, tmp.file("no/such/dir/x.csv")),
                    IoError);
}

TEST_CASE("accuracy_confusion normalizes rows over the truth counts") {
    const auto r = evaluation::accuracy_confusion({0, 1, 1, 2}, {0, 1, 2, 2}, 4);
    CHECK(r.accuracy == 0.75);
    CHECK(r.num_classes == 4);
    CHECK(r.matrix[0 * 4 + 0] == 1.0);
    CHECK(r.matrix[1 * 4 + 1] == 1.0);
    CHECK(r.matrix[2 * 4 + 1] == 0.5);
    CHECK(r.matrix[2 * 4 + 2] == 0.5);
    for (int p = 0; p < 4; ++p) CHECK(r.matrix[3 * 4 + p] == 0.0);  // class 3 never occurs

    CHECK_THROWS_AS(evaluation::accuracy_confusion({0}, {0, 1}, 2), InvalidInputError);
    CHECK_THROWS_AS(evaluation::accuracy_confusion({}, {}, 2), InvalidInputError);
    CHECK_THROWS_AS(evaluation::accuracy_confusion({2}, {0}, 2), InvalidInputError);
    CHECK_THROWS_AS(evaluation::accuracy_confusion({0}, {0}, 0), InvalidInputError);
}

TEST_CASE("confusion CSV layout") {
    const auto r = evaluation::accuracy_confusion({0, 1}, {0, 0}, 2);
    TmpDir tmp;
    const auto path = tmp.file("confusion.csv");
    evaluation::confusion_write_csv(r, {"bike", "cone"}, path);
    const std::string text = slurp(path);
    CHECK(text ==
          "truth\\pred,bike,cone\n"
          "bike,0.5000,0.5000\n"
          "cone,0.0000,0.0000\n"
          "accuracy,0.500000\n");
    CHECK_THROWS_AS(evaluation::confusion_write_csv(r, {"only-one"}, path), InvalidInputError);
}

TEST_SUITE_END();
