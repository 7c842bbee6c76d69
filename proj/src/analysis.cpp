#include "radar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "radar/errors.hpp"
#include "radar/imaging.hpp"
#include "radar/kernels.hpp"

namespace radar::analysis {

FeatureSet extract_features(const net::NetworkWeights& weights,
                            const std::vector<augment::Chip>& chips) {
    int conv_layers = 0, last_conv = -1;
    for (size_t i = 0; i < weights.arch.size(); ++i) {
        if (weights.arch[i].kind == net::LayerKind::Conv) {
            ++conv_layers;
            last_conv = static_cast<int>(i);
        }
    }
    if (conv_layers < 2)
        throw ArchitectureError(
            "extract_features: need at least two conv layers for a penultimate representation");

    FeatureSet fs;
    fs.n = static_cast<int>(chips.size());
    fs.labels.reserve(chips.size());
    for (const augment::Chip& chip : chips) fs.labels.push_back(chip.label);
    if (chips.empty()) return fs;

    const int input = net::input_size(weights);
    for (int i = 0; i < fs.n; ++i) {
        const CartesianImage* img = &chips[i].image;
        CartesianImage resized;
        if (img->rows != input || img->cols != input) {
            resized = imaging::resize_bilinear(*img, input, input);
            img = &resized;
        }
        Tensor t = Tensor::zeros({1, img->rows, img->cols});
        std::copy(img->values.begin(), img->values.end(), t.data.begin());
        net::Activations acts;
        net::forward(weights, t, net::Mode::Infer, &acts);
        const Tensor& feat = acts.inputs[last_conv];
        if (fs.d == 0) {
            fs.d = static_cast<int>(feat.numel());
            fs.rows.assign(static_cast<size_t>(fs.n) * fs.d, 0.0);
        } else if (static_cast<int>(feat.numel()) != fs.d) {
            throw ShapeError("extract_features: inconsistent feature sizes across chips");
        }
        double* row = fs.rows.data() + static_cast<int64_t>(i) * fs.d;
        for (int j = 0; j < fs.d; ++j) row[j] = feat.data[j];
    }
    return fs;
}

// ---- t-SNE -----------------------------------------------------------------------

namespace detail {

std::vector<double> joint_p(const std::vector<double>& rows, int n, int d, double perplexity) {
    if (n < 4) throw InvalidInputError("tsne: need at least 4 samples");
    if (perplexity >= n)
        throw InvalidInputError("tsne: perplexity " + std::to_string(perplexity) +
                                " must be below the sample count " + std::to_string(n));
    if (perplexity < 1.0) throw InvalidInputError("tsne: perplexity must be >= 1");

    std::vector<double> d2(static_cast<size_t>(n) * n);
    kernels::pairwise_sqdist(rows.data(), n, d, d2.data());

    const double target_h = std::log(perplexity);
    std::vector<double> cond(static_cast<size_t>(n) * n, 0.0);

    // per-point bandwidth search; rows are independent. Failures are
    // collected and thrown after the loop (exceptions must not cross the
    // parallel region).
    int failed = -1;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* di = d2.data() + static_cast<int64_t>(i) * n;
        double* pi = cond.data() + static_cast<int64_t>(i) * n;
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        bool ok = false;
        for (int it = 0; it < 50; ++it) {
            // H(P_i) and P_{j|i} at this beta
            double sum = 0.0, dot = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    pi[j] = 0.0;
                    continue;
                }
                pi[j] = std::exp(-beta * di[j]);
                sum += pi[j];
                dot += pi[j] * di[j];
            }
            if (sum <= 0.0) {  // beta far too large
                hi = beta;
                beta = (lo + hi) / 2.0;
                continue;
            }
            const double h = std::log(sum) + beta * dot / sum;
            for (int j = 0; j < n; ++j) pi[j] /= sum;
            if (std::abs(h - target_h) < 1e-5) {
                ok = true;
                break;
            }
            if (h > target_h) {  // entropy too high -> sharpen
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (lo + hi) / 2.0;
            } else {
                hi = beta;
                beta = (lo + hi) / 2.0;
            }
        }
        if (!ok) {
#pragma omp critical
            {
                if (failed < 0 || i < failed) failed = i;
            }
        }
    }
    if (failed >= 0)
        throw InvalidInputError(
            "tsne: bandwidth search did not reach the target entropy for sample " +
            std::to_string(failed) + "; perplexity infeasible for this data");

    // symmetrize: P_ij = (P_{j|i} + P_{i|j}) / 2n
    std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
    const double inv = 1.0 / (2.0 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            p[static_cast<size_t>(i) * n + j] =
                (cond[static_cast<size_t>(i) * n + j] + cond[static_cast<size_t>(j) * n + i]) *
                inv;
    return p;
}

namespace {

// Unnormalized student-t weights and their sum over i != j.
double student_weights(const std::vector<double>& y, int n, std::vector<double>& w) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                w[static_cast<size_t>(i) * n + j] = 0.0;
                continue;
            }
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[static_cast<size_t>(i) * n + j] = v;
            sum += v;
        }
    }
    return sum;
}

}  // namespace

double kl_divergence(const std::vector<double>& p, const std::vector<double>& y, int n) {
    std::vector<double> w(static_cast<size_t>(n) * n);
    const double wsum = student_weights(y, n, w);
    double kl = 0.0;
    for (size_t k = 0; k < w.size(); ++k) {
        if (p[k] <= 0.0) continue;
        const double q = std::max(w[k] / wsum, 1e-300);
        kl += p[k] * std::log(p[k] / q);
    }
    return kl;
}

std::vector<double> kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                int n) {
    std::vector<double> w(static_cast<size_t>(n) * n);
    const double wsum = student_weights(y, n, w);
    std::vector<double> grad(static_cast<size_t>(n) * 2, 0.0);
    for (int i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const size_t k = static_cast<size_t>(i) * n + j;
            const double q = w[k] / wsum;
            const double mult = 4.0 * (p[k] - q) * w[k];
            gx += mult * (y[2 * i] - y[2 * j]);
            gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = gx;
        grad[2 * i + 1] = gy;
    }
    return grad;
}

}  // namespace detail

TsneResult tsne(const FeatureSet& f, const TsneConfig& cfg) {
    if (cfg.iterations < 1) throw InvalidInputError("tsne: iterations must be >= 1");
    const int n = f.n;
    std::vector<double> p = detail::joint_p(f.rows, n, f.d, cfg.perplexity);

    // seeded small-variance init
    Rng rng(cfg.seed);
    std::vector<double> y(static_cast<size_t>(n) * 2);
    for (double& v : y) v = 1e-4 * rng.normal();

    std::vector<double> vel(y.size(), 0.0);
    std::vector<double> pex = p;
    for (double& v : pex) v *= cfg.exaggeration;

    TsneResult result;
    bool exaggerated = cfg.exaggeration_iters > 0;
    if (!exaggerated) result.kl_after_exaggeration = detail::kl_divergence(p, y, n);
    for (int it = 0; it < cfg.iterations; ++it) {
        if (exaggerated && it >= cfg.exaggeration_iters) {
            exaggerated = false;
            result.kl_after_exaggeration = detail::kl_divergence(p, y, n);
        }
        const std::vector<double>& pcur = exaggerated ? pex : p;
        const std::vector<double> grad = detail::kl_gradient(pcur, y, n);
        const double mom =
            it < cfg.momentum_switch_iter ? cfg.momentum_start : cfg.momentum_late;
        for (size_t k = 0; k < y.size(); ++k) {
            vel[k] = mom * vel[k] - cfg.learning_rate * grad[k];
            y[k] += vel[k];
        }
        // keep the embedding centered
        double mx = 0.0, my = 0.0;
        for (int i = 0; i < n; ++i) {
            mx += y[2 * i];
            my += y[2 * i + 1];
        }
        mx /= n;
        my /= n;
        for (int i = 0; i < n; ++i) {
            y[2 * i] -= mx;
            y[2 * i + 1] -= my;
        }
    }
    if (exaggerated) result.kl_after_exaggeration = detail::kl_divergence(p, y, n);
    result.final_kl = detail::kl_divergence(p, y, n);
    result.y = std::move(y);
    return result;
}

// ---- Plot -----------------------------------------------------------------------------

namespace {

struct Color {
    uint8_t r, g, b;
};

// distinguishable palette; wraps for label counts beyond 10
constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
    {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
};

}  // namespace

void plot_embedding(const std::vector<double>& y, const std::vector<int>& labels,
                    const std::string& path, int width, int height) {
    if (y.size() != labels.size() * 2)
        throw InvalidInputError("plot_embedding: embedding/label size mismatch");
    if (labels.empty()) throw InvalidInputError("plot_embedding: nothing to plot");
    if (width < 16 || height < 16) throw InvalidInputError("plot_embedding: image too small");

    double xmin = y[0], xmax = y[0], ymin = y[1], ymax = y[1];
    for (size_t i = 0; i < labels.size(); ++i) {
        xmin = std::min(xmin, y[2 * i]);
        xmax = std::max(xmax, y[2 * i]);
        ymin = std::min(ymin, y[2 * i + 1]);
        ymax = std::max(ymax, y[2 * i + 1]);
    }
    const double xspan = xmax > xmin ? xmax - xmin : 1.0;
    const double yspan = ymax > ymin ? ymax - ymin : 1.0;
    const int margin = std::min(width, height) / 20;

    std::vector<uint8_t> img(static_cast<size_t>(width) * height * 3, 255);
    auto dot = [&](int cx, int cy, Color col) {
        for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
                if (dx * dx + dy * dy > 5) continue;
                const int px = cx + dx, py = cy + dy;
                if (px < 0 || px >= width || py < 0 || py >= height) continue;
                uint8_t* p = img.data() + (static_cast<size_t>(py) * width + px) * 3;
                p[0] = col.r;
                p[1] = col.g;
                p[2] = col.b;
            }
        }
    };
    for (size_t i = 0; i < labels.size(); ++i) {
        const int px = margin + static_cast<int>((y[2 * i] - xmin) / xspan * (width - 2 * margin));
        const int py =
            height - 1 - margin -
            static_cast<int>((y[2 * i + 1] - ymin) / yspan * (height - 2 * margin));
        const int lab = labels[i] >= 0 ? labels[i] : 0;
        dot(px, py, kPalette[lab % (sizeof(kPalette) / sizeof(kPalette[0]))]);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write plot: " + path);
    f << "P6\n" << width << ' ' << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!f) throw IoError("failed writing plot: " + path);
}

void write_embedding_csv(const std::vector<double>& y, const std::vector<int>& labels,
                         const std::string& path) {
    if (y.size() != labels.size() * 2)
        throw InvalidInputError("write_embedding_csv: embedding/label size mismatch");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write embedding: " + path);
    f << "sample_id,x,y,label\n";
    char line[96];
    for (size_t i = 0; i < labels.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%d\n", i, y[2 * i], y[2 * i + 1],
                      labels[i]);
        f << line;
    }
    if (!f) throw IoError("failed writing embedding: " + path);
}

}  // namespace radar::analysis
