#pragma once

#include <string>
#include <vector>

#include "radar/augment.hpp"
#include "radar/net.hpp"

namespace radar::analysis {

struct FeatureSet {
    int n = 0, d = 0;
    std::vector<double> rows;  // row-major [n x d]
    std::vector<int> labels;
};

// Flattened input of the final conv layer (the classifier head), one row per
// chip; chips are resized to the network input size first. Needs at least
// two conv layers so a "penultimate" representation exists.
FeatureSet extract_features(const net::NetworkWeights& weights,
                            const std::vector<augment::Chip>& chips);

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double momentum_start = 0.5;
    double momentum_late = 0.8;
    int momentum_switch_iter = 250;
    double exaggeration = 4.0;
    int exaggeration_iters = 100;
    uint64_t seed = 0;
};

struct TsneResult {
    std::vector<double> y;  // row-major [n x 2]
    double final_kl = 0.0;
    double kl_after_exaggeration = 0.0;  // measured when the x4 phase ends
};

// Exact O(n^2) symmetric t-SNE: Gaussian input affinities with per-point
// bandwidths found by binary search to the target entropy (1e-5 tolerance,
// <= 50 iterations, otherwise the perplexity is infeasible), Student-t
// low-dimensional kernel, plain momentum gradient descent with early
// exaggeration. Deterministic given the seed.
TsneResult tsne(const FeatureSet& f, const TsneConfig& cfg);

// Internals exposed for gradient-checking tests.
namespace detail {
// Joint symmetric P from raw feature rows (includes bandwidth search).
std::vector<double> joint_p(const std::vector<double>& rows, int n, int d, double perplexity);
double kl_divergence(const std::vector<double>& p, const std::vector<double>& y, int n);
// dKL/dY, 4*(p-q)*student_t weights form.
std::vector<double> kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                int n);
}  // namespace detail

// P6 binary PPM scatter plot, one color per class, white background.
void plot_embedding(const std::vector<double>& y, const std::vector<int>& labels,
                    const std::string& path, int width = 900, int height = 900);

// sample_id,x,y,label rows.
void write_embedding_csv(const std::vector<double>& y, const std::vector<int>& labels,
                         const std::string& path);

}  // namespace radar::analysis
