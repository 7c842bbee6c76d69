#include <omp.h>

#include <cmath>
#include <fstream>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "radar/detection.hpp"
#include "radar/errors.hpp"
#include "radar/net.hpp"
#include "radar/rng.hpp"

using namespace radar;
using testutil::TmpDir;
using testutil::make_image;
using detection::CfarConfig;
using detection::DbscanConfig;
using detection::DetectionBox;
using detection::Mask;

namespace {

CfarConfig ca_config(int train = 8, int guard = 2, double pfa = 1e-3) {
    CfarConfig cfg;
    cfg.mode = CfarConfig::Mode::CellAveraging;
    cfg.train_cells = train;
    cfg.guard_cells = guard;
    cfg.pfa = pfa;
    return cfg;
}

// 16x16-input stack whose prediction is fully determined by the head bias:
// every weight is zeroed, so the logits equal the bias vector regardless of
// the chip content.
net::NetworkWeights bias_only_net(int n_classes, int winner, float logit = 5.0f) {
    net::Architecture arch;
    arch.push_back(net::LayerSpec::conv(4, 5));
    arch.push_back(net::LayerSpec::relu());
    arch.push_back(net::LayerSpec::maxpool(2));
    net::LayerSpec head;
    head.kind = net::LayerKind::Conv;
    head.out_channels = n_classes;
    head.kernel_rows = head.kernel_cols = 6;
    arch.push_back(head);
    arch.push_back(net::LayerSpec::softmax());
    auto w = net::init_weights(arch, 1);
    for (auto& layer : w.conv) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0f);
        std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0f);
    }
    w.conv.back().bias.data[winner] = logit;
    return w;
}

}  // namespace

TEST_SUITE_BEGIN("detection");

TEST_CASE("config validation catches bad knobs") {
    CfarConfig g;
    g.level = 0.0;
    CHECK_THROWS_AS(g.validate(), InvalidInputError);
    g.level = 1.5;
    CHECK_THROWS_AS(g.validate(), InvalidInputError);
    g.level = 1.0;
    CHECK_NOTHROW(g.validate());

    auto ca = ca_config();
    CHECK_NOTHROW(ca.validate());
    ca.train_cells = 0;
    CHECK_THROWS_AS(ca.validate(), InvalidInputError);
    ca = ca_config();
    ca.guard_cells = -1;
    CHECK_THROWS_AS(ca.validate(), InvalidInputError);
    ca = ca_config();
    ca.scale_factor = -2.0;
    CHECK_THROWS_AS(ca.validate(), InvalidInputError);
    ca = ca_config();
    ca.pfa = 1.0;
    CHECK_THROWS_AS(ca.validate(), InvalidInputError);
    ca.scale_factor = 3.0;  // explicit scale: pfa no longer consulted
    CHECK_NOTHROW(ca.validate());

    DbscanConfig db;
    CHECK_NOTHROW(db.validate());
    db.epsilon_m = 0.0;
    CHECK_THROWS_AS(db.validate(), InvalidInputError);
    db = {};
    db.min_points = 0;
    CHECK_THROWS_AS(db.validate(), InvalidInputError);
}

TEST_CASE("ca_scale_for_pfa matches the closed form") {
    CHECK(detection::ca_scale_for_pfa(0.5, 1) == doctest::Approx(1.0));
    CHECK(detection::ca_scale_for_pfa(0.25, 2) == doctest::Approx(2.0));
    // 64 * (1000^(1/64) - 1)
    CHECK(detection::ca_scale_for_pfa(1e-3, 64) == doctest::Approx(7.294323).epsilon(1e-5));
    CHECK_THROWS_AS(detection::ca_scale_for_pfa(0.0, 8), InvalidInputError);
    CHECK_THROWS_AS(detection::ca_scale_for_pfa(1.0, 8), InvalidInputError);
    CHECK_THROWS_AS(detection::ca_scale_for_pfa(0.1, 0), InvalidInputError);
}

TEST_CASE("global CFAR thresholds against the image maximum") {
    CfarConfig cfg;  // Global, level 0.22

    auto uniform = make_image(6, 6, [](int, int) { return 0.5; });
    CHECK(detection::cfar_detect(uniform, cfg).count() == 36);  // 0.5 > 0.22 * 0.5

    auto silent = make_image(6, 6, [](int, int) { return 0.0; });
    CHECK(detection::cfar_detect(silent, cfg).count() == 0);  // 0 > 0 never holds

    auto mixed = make_image(2, 2, [](int r, int c) { return r == 0 ? (c == 0 ? 0.0 : 0.1) : (c == 0 ? 0.5 : 1.0); });
    const Mask m = detection::cfar_detect(mixed, cfg);
    CHECK_FALSE(m.at(0, 0));
    CHECK_FALSE(m.at(0, 1));  // 0.1 < 0.22
    CHECK(m.at(1, 0));
    CHECK(m.at(1, 1));
}

TEST_CASE("global CFAR mask is invariant to power-of-two rescaling") {
    Rng rng(404);
    auto img = make_image(40, 50, [&](int, int) { return rng.next_double(); });
    CfarConfig cfg;
    const Mask base = detection::cfar_detect(img, cfg);
    CHECK(base.count() > 0);
    CHECK(base.count() < base.on.size());

    for (double s : {8.0, 0.25}) {
        CartesianImage scaled = img;
        for (float& v : scaled.values) v = static_cast<float>(v * s);
        const Mask m = detection::cfar_detect(scaled, cfg);
        CHECK(m.on == base.on);
    }
}

TEST_CASE("cell-averaging CFAR stays quiet on a constant image") {
    auto flat = make_image(40, 40, [](int, int) { return 0.7; });
    const Mask m = detection::cfar_detect(flat, ca_config());
    CHECK(m.count() == 0);  // cell == ring mean, scale > 1
}

TEST_CASE("cell-averaging CFAR fires exactly on an isolated hot cell") {
    auto img = make_image(48, 48, [](int r, int c) { return (r == 20 && c == 30) ? 4.0 : 0.0; });
    const Mask m = detection::cfar_detect(img, ca_config());
    CHECK(m.count() == 1);
    CHECK(m.at(20, 30));
}

TEST_CASE("summed-area and direct ring means produce the same mask") {
    Rng rng(11);
    auto img = make_image(70, 90, [&](int, int) { return rng.next_double(); });
    for (int k = 0; k < 15; ++k)  // targets the noise cannot mask
        img.at(static_cast<int>(rng.bounded(70)), static_cast<int>(rng.bounded(90))) = 30.0f;
    const auto cfg = ca_config();
    const Mask fast = detection::cfar_detect(img, cfg);
    const Mask slow = detection::cfar_detect_serial(img, cfg);
    CHECK(fast.on == slow.on);
    CHECK(fast.count() > 0);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    const Mask threaded = detection::cfar_detect(img, cfg);
    omp_set_num_threads(saved);
    CHECK(threaded.on == fast.on);
}

TEST_CASE("dbscan matches the brute-force oracle on random point sets") {
    Rng rng(2024);
    const std::pair<double, int> params[] = {{0.3, 40}, {0.3, 3}, {0.5, 5}, {0.1, 2}, {1.0, 10}};
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 20 + static_cast<int>(rng.bounded(180));
        std::vector<std::pair<double, double>> pts;
        pts.reserve(n);
        for (int i = 0; i < n; ++i)
            pts.emplace_back(rng.next_double() * 3.0, rng.next_double() * 3.0);
        if (trial % 3 == 0) pts.push_back(pts.front());  // duplicates must not confuse either side

        const auto [eps, min_pts] = params[trial % 5];
        DbscanConfig cfg;
        cfg.epsilon_m = eps;
        cfg.min_points = min_pts;
        CHECK(detection::dbscan(pts, cfg) == oracles::brute_dbscan(pts, eps, min_pts));
    }
}

TEST_CASE("dbscan treats the epsilon ball as closed") {
    DbscanConfig cfg;
    cfg.epsilon_m = 0.25;  // exactly representable, as are the coordinates
    cfg.min_points = 2;
    std::vector<std::pair<double, double>> touching = {{0.0, 0.0}, {0.25, 0.0}};
    CHECK(detection::dbscan(touching, cfg) == std::vector<int>{0, 0});

    std::vector<std::pair<double, double>> apart = {{0.0, 0.0}, {0.3125, 0.0}};
    CHECK(detection::dbscan(apart, cfg) == std::vector<int>(2, detection::kNoise));

    CHECK(detection::dbscan({}, cfg).empty());
}

TEST_CASE("border points join the lowest-id cluster") {
    // Two chains of cores bridged by one border point equidistant from both.
    // All coordinates are multiples of 0.5, so every distance is exact.
    std::vector<std::pair<double, double>> pts = {
        {-0.5, 0.0}, {0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0},  // cluster 0 (cores 1..3)
        {2.0, 0.0},                                       // border, touches both chains
        {3.0, 0.0}, {3.5, 0.0}, {4.0, 0.0}, {4.5, 0.0},   // cluster 1 (cores 5..7)
        {10.0, 10.0},                                     // noise
    };
    DbscanConfig cfg;
    cfg.epsilon_m = 1.0;
    cfg.min_points = 4;
    const auto labels = detection::dbscan(pts, cfg);
    CHECK(labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, detection::kNoise});
    CHECK(labels == oracles::brute_dbscan(pts, 1.0, 4));
}

TEST_CASE("propose_boxes turns mask clusters into centered boxes") {
    auto img = make_image(60, 60, [](int, int) { return 0.0; });
    img.cell_size = 0.05;
    img.origin_x = -1.5;
    img.origin_y = 0.5;
    Mask mask;
    mask.rows = mask.cols = 60;
    mask.on.assign(3600, 0);
    auto blob = [&](int r0, int c0) {
        for (int r = r0; r < r0 + 3; ++r)
            for (int c = c0; c < c0 + 3; ++c) mask.on[static_cast<size_t>(r) * 60 + c] = 1;
    };
    blob(10, 20);
    blob(40, 5);

    DbscanConfig db;
    db.epsilon_m = 0.08;  // joins 8-neighbours at 0.05 cell pitch
    db.min_points = 5;
    const auto boxes = detection::propose_boxes(mask, img, db, 7);
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[0].center_row == doctest::Approx(11.0));
    CHECK(boxes[0].center_col == doctest::Approx(21.0));
    CHECK(boxes[1].center_row == doctest::Approx(41.0));
    CHECK(boxes[1].center_col == doctest::Approx(6.0));
    for (const auto& b : boxes) {
        CHECK(b.size_cells == 7);
        CHECK(b.cls == -1);
        CHECK(b.confidence == 1.0);
    }
    CHECK(boxes[0].range_m ==
          doctest::Approx(std::hypot(-1.5 + 21 * 0.05, 0.5 + 11 * 0.05)).epsilon(1e-12));

    // Fewer on-cells than min_points: everything is noise, no proposals.
    Mask sparse;
    sparse.rows = sparse.cols = 60;
    sparse.on.assign(3600, 0);
    sparse.on[100] = 1;
    CHECK(detection::propose_boxes(sparse, img, db, 7).empty());

    Mask wrong;
    wrong.rows = wrong.cols = 10;
    wrong.on.assign(100, 0);
    CHECK_THROWS_AS(detection::propose_boxes(wrong, img, db, 7), ShapeError);
    CHECK_THROWS_AS(detection::propose_boxes(mask, img, db, 0), InvalidInputError);
}

TEST_CASE("detect_and_classify crops, classifies, and filters background") {
    // One bright blob over a faint floor; global CFAR isolates the blob.
    auto img = make_image(100, 100, [](int r, int c) {
        return (r >= 49 && r <= 51 && c >= 49 && c <= 51) ? 10.0 : 0.1;
    });
    CfarConfig cfar;  // Global 0.22: threshold 2.2 keeps only the blob
    DbscanConfig db;
    db.epsilon_m = 0.02;
    db.min_points = 5;
    detection::DetectConfig cfg;
    cfg.box_size_cells = 20;

    const auto w3 = bias_only_net(6, 3);
    SUBCASE("background kept") {
        cfg.drop_background = false;
        const auto out = detection::detect_and_classify(img, w3, cfar, db, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0].cls == 3);
        CHECK(out[0].center_row == doctest::Approx(50.0));
        CHECK(out[0].center_col == doctest::Approx(50.0));
        // softmax over {0,0,0,5,0,0}
        CHECK(out[0].confidence == doctest::Approx(std::exp(5.0) / (std::exp(5.0) + 5.0)).epsilon(1e-5));
    }
    SUBCASE("default background is the highest class id") {
        const auto kept = detection::detect_and_classify(img, w3, cfar, db, cfg);
        REQUIRE(kept.size() == 1);  // class 3 != default background 5
        CHECK(kept[0].cls == 3);

        const auto w5 = bias_only_net(6, 5);
        CHECK(detection::detect_and_classify(img, w5, cfar, db, cfg).empty());
    }
    SUBCASE("explicit background class") {
        cfg.background_class = 3;
        CHECK(detection::detect_and_classify(img, w3, cfar, db, cfg).empty());
    }
}

TEST_CASE("background sampling avoids truths and favors bright patches") {
    // Left quarter of the scene is bright, so the scene median is 0 and a
    // patch counts as bright exactly when it touches a column below 20.
    auto scene = make_image(80, 80, [](int, int c) { return c < 20 ? 1.0 : 0.0; });
    DetectionBox truth;
    truth.center_row = 40;
    truth.center_col = 60;
    truth.size_cells = 16;

    Rng rng(77);
    const auto got = detection::sample_background_boxes(scene, {truth}, 8, rng, 16, 6, 32);
    CHECK_FALSE(got.cap_exhausted);
    REQUIRE(got.boxes.size() == 8);
    REQUIRE(got.chips.size() == 8);

    int bright = 0;
    for (const auto& b : got.boxes) {
        CHECK(b.size_cells == 16);
        CHECK(b.cls == 6);
        CHECK(b.center_row >= 8);
        CHECK(b.center_row <= 72);
        CHECK(b.center_col >= 8);
        CHECK(b.center_col <= 72);
        // no overlap with the truth box (both 16 cells square)
        const bool clear = std::abs(b.center_row - truth.center_row) >= 16 ||
                           std::abs(b.center_col - truth.center_col) >= 16;
        CHECK(clear);
        if (b.center_col <= 27) ++bright;  // box spans a bright column
    }
    CHECK(bright >= 4);
    for (const auto& chip : got.chips) {
        CHECK(chip.image.rows == 32);
        CHECK(chip.image.cols == 32);
        CHECK(chip.label == 6);
    }

    Rng replay(77);
    const auto again = detection::sample_background_boxes(scene, {truth}, 8, replay, 16, 6, 32);
    REQUIRE(again.boxes.size() == 8);
    for (size_t i = 0; i < 8; ++i) {
        CHECK(again.boxes[i].center_row == got.boxes[i].center_row);
        CHECK(again.boxes[i].center_col == got.boxes[i].center_col);
    }
}

TEST_CASE("background sampling reports when it cannot deliver") {
    auto tiny = make_image(30, 30, [](int, int) { return 0.0; });
    Rng rng(5);
    const auto too_big = detection::sample_background_boxes(tiny, {}, 4, rng, 40);
    CHECK(too_big.cap_exhausted);
    CHECK(too_big.boxes.empty());

    // A truth covering the whole scene rejects every candidate.
    DetectionBox blanket;
    blanket.center_row = 15;
    blanket.center_col = 15;
    blanket.size_cells = 200;
    const auto blocked = detection::sample_background_boxes(tiny, {blanket}, 4, rng, 10);
    CHECK(blocked.cap_exhausted);
    CHECK(blocked.boxes.empty());

    const auto none = detection::sample_background_boxes(tiny, {}, 0, rng, 10);
    CHECK_FALSE(none.cap_exhausted);
    CHECK(none.boxes.empty());

    CHECK_THROWS_AS(detection::sample_background_boxes(tiny, {}, -1, rng, 10), InvalidInputError);
}

TEST_CASE("detection files round-trip") {
    TmpDir tmp;
    std::vector<detection::SceneBox> boxes(2);
    boxes[0].scene_id = "scene_000";
    boxes[0].box.center_row = 120.5;
    boxes[0].box.center_col = 88.25;
    boxes[0].box.size_cells = 275;
    boxes[0].box.cls = 2;
    boxes[0].box.confidence = 0.875;
    boxes[0].box.range_m = 4.5;
    boxes[1].scene_id = "scene_001";
    boxes[1].box.cls = 5;
    boxes[1].box.confidence = 0.5;

    const auto dets = tmp.file("dets.jsonl");
    detection::boxes_write(dets, boxes, true);
    const auto back = detection::boxes_read(dets);
    REQUIRE(back.size() == 2);
    CHECK(back[0].scene_id == "scene_000");
    CHECK(back[0].box.center_row == 120.5);
    CHECK(back[0].box.center_col == 88.25);
    CHECK(back[0].box.size_cells == 275);
    CHECK(back[0].box.cls == 2);
    CHECK(back[0].box.confidence == 0.875);
    CHECK(back[0].box.range_m == 4.5);
    CHECK(back[1].box.cls == 5);

    // Truth files omit confidence; readers default it to 1.
    const auto truths = tmp.file("truths.jsonl");
    detection::boxes_write(truths, boxes, false);
    const auto t = detection::boxes_read(truths);
    REQUIRE(t.size() == 2);
    CHECK(t[0].box.confidence == 1.0);

    CHECK_THROWS_AS(detection::boxes_read(tmp.file("nope.jsonl")), IoError);
    {
        std::ofstream f(tmp.file("bad.jsonl"));
        f << R"({"scene_id":"s","center_row":1,"center_col":2,"size_cells":3,"class":0,"range_m":1.0})" << "\n";
        f << "{\"scene_id\":\n";
    }
    try {
        detection::boxes_read(tmp.file("bad.jsonl"));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_SUITE_END();
