#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "radar/analysis.hpp"
#include "radar/errors.hpp"
#include "radar/net.hpp"
#include "radar/rng.hpp"

using namespace radar;
using testutil::TmpDir;
using testutil::make_image;

namespace {

net::Architecture two_conv_arch(int n_classes) {
    // conv4@5 -> relu -> pool2 -> conv@6 -> softmax on 16x16 chips
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
    return arch;
}

// Three tight, well-separated blobs in feature space.
analysis::FeatureSet cluster_features(int per_cluster = 5) {
    const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
    analysis::FeatureSet f;
    f.n = 3 * per_cluster;
    f.d = 2;
    Rng rng(7);
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < per_cluster; ++k) {
            f.rows.push_back(centers[c][0] + 0.1 * rng.normal());
            f.rows.push_back(centers[c][1] + 0.1 * rng.normal());
            f.labels.push_back(c);
        }
    }
    return f;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("extract_features flattens the head input, resizing chips as needed") {
    const auto w = net::init_weights(two_conv_arch(3), 99);
    std::vector<augment::Chip> chips;
    for (int i = 0; i < 4; ++i) {
        augment::Chip chip;
        const int side = i == 3 ? 24 : 16;  // odd one out gets resized
        chip.image = make_image(side, side, [i](int r, int c) {
            return 0.1f * static_cast<float>((r * 31 + c * 17 + i) % 10);
        });
        chip.label = i % 3;
        chips.push_back(std::move(chip));
    }

    const auto fs = analysis::extract_features(w, chips);
    CHECK(fs.n == 4);
    CHECK(fs.d == 4 * 6 * 6);  // pooled 4-channel 6x6 map feeding the head
    CHECK(fs.rows.size() == static_cast<size_t>(4) * 144);
    CHECK(fs.labels == std::vector<int>{0, 1, 2, 0});
    // different chips produce different rows
    bool differ = false;
    for (int j = 0; j < fs.d && !differ; ++j) differ = fs.rows[j] != fs.rows[fs.d + j];
    CHECK(differ);

    const auto empty = analysis::extract_features(w, {});
    CHECK(empty.n == 0);
    CHECK(empty.d == 0);

    net::Architecture single = {net::LayerSpec::conv(3, 16), net::LayerSpec::softmax()};
    const auto shallow = net::init_weights(single, 1);
    CHECK_THROWS_AS(analysis::extract_features(shallow, chips), ArchitectureError);
}

TEST_CASE("joint_p is a symmetric distribution with zero diagonal") {
    const int n = 10, d = 3;
    Rng rng(21);
    std::vector<double> rows(static_cast<size_t>(n) * d);
    for (double& v : rows) v = rng.next_double() * 4.0;

    const auto p = analysis::detail::joint_p(rows, n, d, 3.0);
    REQUIRE(p.size() == static_cast<size_t>(n) * n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        CHECK(p[static_cast<size_t>(i) * n + i] == 0.0);
        for (int j = 0; j < n; ++j) {
            CHECK(p[static_cast<size_t>(i) * n + j] >= 0.0);
            CHECK(p[static_cast<size_t>(i) * n + j] == p[static_cast<size_t>(j) * n + i]);
            sum += p[static_cast<size_t>(i) * n + j];
        }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(analysis::detail::joint_p(rows, n, d, 10.0), InvalidInputError);   // >= n
    CHECK_THROWS_AS(analysis::detail::joint_p(rows, n, d, 0.5), InvalidInputError);    // < 1
    std::vector<double> three(rows.begin(), rows.begin() + 3 * d);
    CHECK_THROWS_AS(analysis::detail::joint_p(three, 3, d, 2.0), InvalidInputError);   // n < 4
}

TEST_CASE("joint_p rejects data where the target entropy is unreachable") {
    // identical points: the conditional entropy is log(n-1) at every
    // bandwidth, so no perplexity below that can ever be hit
    const int n = 6, d = 2;
    std::vector<double> rows(static_cast<size_t>(n) * d, 1.0);
    CHECK_THROWS_AS(analysis::detail::joint_p(rows, n, d, 2.0), InvalidInputError);
}

TEST_CASE("kl_gradient agrees with finite differences of kl_divergence") {
    const int n = 12, d = 3;
    Rng rng(5150);
    std::vector<double> rows(static_cast<size_t>(n) * d);
    for (double& v : rows) v = rng.next_double() * 3.0;
    const auto p = analysis::detail::joint_p(rows, n, d, 4.0);

    std::vector<double> y(static_cast<size_t>(n) * 2);
    for (double& v : y) v = rng.next_double() * 4.0 - 2.0;

    const auto grad = analysis::detail::kl_gradient(p, y, n);
    REQUIRE(grad.size() == y.size());
    const double eps = 1e-5;
    for (size_t k = 0; k < y.size(); ++k) {
        std::vector<double> yp = y, ym = y;
        yp[k] += eps;
        ym[k] -= eps;
        const double fd = (analysis::detail::kl_divergence(p, yp, n) -
                           analysis::detail::kl_divergence(p, ym, n)) /
                          (2.0 * eps);
        CHECK(std::fabs(grad[k] - fd) <= 1e-6 * std::max(1.0, std::fabs(grad[k])));
    }
}

TEST_CASE("tsne pulls KL down and keeps clusters apart") {
    const auto f = cluster_features();
    analysis::TsneConfig cfg;
    cfg.perplexity = 4.0;
    cfg.iterations = 300;
    cfg.exaggeration_iters = 50;
    cfg.momentum_switch_iter = 100;
    cfg.seed = 3;

    const auto result = analysis::tsne(f, cfg);
    REQUIRE(result.y.size() == static_cast<size_t>(f.n) * 2);
    for (double v : result.y) CHECK(std::isfinite(v));

    // the optimizer must improve on the random init
    const auto p = analysis::detail::joint_p(f.rows, f.n, f.d, cfg.perplexity);
    Rng rng(cfg.seed);
    std::vector<double> y0(result.y.size());
    for (double& v : y0) v = 1e-4 * rng.normal();
    CHECK(result.final_kl < analysis::detail::kl_divergence(p, y0, f.n));
    CHECK(result.final_kl <= result.kl_after_exaggeration + 1e-12);

    // same-cluster pairs end up closer than cross-cluster pairs
    double intra = 0.0, inter = 0.0;
    int n_intra = 0, n_inter = 0;
    for (int i = 0; i < f.n; ++i) {
        for (int j = i + 1; j < f.n; ++j) {
            const double dx = result.y[2 * i] - result.y[2 * j];
            const double dy = result.y[2 * i + 1] - result.y[2 * j + 1];
            const double dist = std::hypot(dx, dy);
            if (f.labels[i] == f.labels[j]) {
                intra += dist;
                ++n_intra;
            } else {
                inter += dist;
                ++n_inter;
            }
        }
    }
    CHECK(intra / n_intra < inter / n_inter);

    // bit-for-bit deterministic, seed-sensitive
    const auto replay = analysis::tsne(f, cfg);
    CHECK(replay.y == result.y);
    CHECK(replay.final_kl == result.final_kl);
    cfg.seed = 4;
    CHECK(analysis::tsne(f, cfg).y != result.y);
}

TEST_CASE("tsne validates its inputs") {
    const auto f = cluster_features();
    analysis::TsneConfig cfg;
    cfg.perplexity = 4.0;
    cfg.iterations = 0;
    CHECK_THROWS_AS(analysis::tsne(f, cfg), InvalidInputError);

    cfg.iterations = 10;
    cfg.perplexity = static_cast<double>(f.n);
    CHECK_THROWS_AS(analysis::tsne(f, cfg), InvalidInputError);

    analysis::FeatureSet flat;
    flat.n = 6;
    flat.d = 2;
    flat.rows.assign(12, 0.25);
    flat.labels.assign(6, 0);
    cfg.perplexity = 2.0;
    CHECK_THROWS_AS(analysis::tsne(flat, cfg), InvalidInputError);
}

TEST_CASE("plot_embedding writes a P6 scatter") {
    const std::vector<double> y = {0.0, 0.0, 1.0, 1.0, -1.0, 0.5, 0.25, -0.75};
    const std::vector<int> labels = {0, 1, 2, 12};  // 12 wraps around the palette
    TmpDir tmp;
    const auto path = tmp.file("embed.ppm");
    analysis::plot_embedding(y, labels, path, 200, 150);

    const std::string ppm = slurp(path);
    const std::string header = "P6\n200 150\n255\n";
    REQUIRE(ppm.size() == header.size() + 200 * 150 * 3);
    CHECK(ppm.compare(0, header.size(), header) == 0);
    bool ink = false;
    for (size_t i = header.size(); i < ppm.size() && !ink; ++i)
        ink = static_cast<uint8_t>(ppm[i]) != 255;
    CHECK(ink);

    CHECK_THROWS_AS(analysis::plot_embedding(y, {0, 1}, path), InvalidInputError);
    CHECK_THROWS_AS(analysis::plot_embedding({}, {}, path), InvalidInputError);
    CHECK_THROWS_AS(analysis::plot_embedding(y, labels, path, 8, 800), InvalidInputError);
}

TEST_CASE("embedding CSV layout") {
    TmpDir tmp;
    const auto path = tmp.file("embed.csv");
    analysis::write_embedding_csv({1.5, -2.25, 0.5, 4.0}, {3, 1}, path);
    CHECK(slurp(path) == "sample_id,x,y,label\n0,1.5,-2.25,3\n1,0.5,4,1\n");
    CHECK_THROWS_AS(analysis::write_embedding_csv({1.0}, {0}, path), InvalidInputError);
    CHECK_THROWS_AS(analysis::write_embedding_csv({1.0, 2.0}, {0}, tmp.file("no/dir/x.csv")),
                    IoError);
}

TEST_SUITE_END();
