#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radar/augment.hpp"
#include "radar/image.hpp"
#include "radar/rng.hpp"
#include "radar/tensor.hpp"

namespace radar::net {

// ---- Architecture -----------------------------------------------------------

enum class LayerKind { Conv, Relu, Maxpool, Dropout, Softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int out_channels = 0, kernel_rows = 0, kernel_cols = 0, stride = 1;  // conv
    int window = 0, pool_stride = 0;  // maxpool; pool_stride 0 means window
    double rate = 0.0;                // dropout

    static LayerSpec conv(int out_channels, int kernel, int stride = 1);
    static LayerSpec relu();
    static LayerSpec maxpool(int window, int stride = 0);
    static LayerSpec dropout(double rate);
    static LayerSpec softmax();
    bool operator==(const LayerSpec&) const = default;
};

using Architecture = std::vector<LayerSpec>;

// conv16@5x5 / pool2 / conv32@5x5 / pool2 / conv64@6x6 / pool2 / conv128@5x5 /
// dropout0.5 / convC@3x3 / softmax — takes an 88x88 single-channel chip to a
// 1x1xC class map.
Architecture default_architecture(int num_classes);

// Order-sensitive hash of every LayerSpec field; stored in weight files so a
// weight blob can never be loaded into a different layer stack.
uint64_t fingerprint(const Architecture& arch);

// Walks the shape chain from [in_channels, in_h, in_w]; throws
// ArchitectureError unless the stack is conv-containing, ends with softmax on
// a 1x1 map, and every layer fits. Returns the class count.
int check_chain(const Architecture& arch, int in_channels = 1, int in_h = 88, int in_w = 88);

// ---- Weights ------------------------------------------------------------------

struct ConvLayerParams {
    Tensor weights;  // [out_channels, in_channels, M, N]
    Tensor bias;     // [out_channels]
};

struct NetworkWeights {
    Architecture arch;
    std::vector<ConvLayerParams> conv;  // one entry per conv layer, in order
    uint64_t fp = 0;

    int num_classes() const;
};

// Uniform(-b, +b) with b = sqrt(6 / (fan_in + fan_out)) per conv layer, zero
// biases. Layer l draws from seed-split stream l, so re-initialising one
// layer reproduces exactly.
NetworkWeights init_weights(const Architecture& arch, uint64_t seed, int in_channels = 1);

// ---- Primitive ops (exposed so tests can pin them individually) -----------------

enum class Mode { Train, Infer };

// Valid-mode cross-correlation plus bias (no kernel flip).
Tensor conv_forward(const Tensor& x, const ConvLayerParams& p, int stride);
Tensor relu(const Tensor& x);
Tensor maxpool(const Tensor& x, int window, int stride, std::vector<int>* argmax = nullptr);
// Inverted dropout: train mode zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); infer mode is the identity. The mask
// (0 or the scale factor) is written for backprop when requested.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng,
               std::vector<float>* mask = nullptr);
// Max-subtracted softmax evaluated in double so the output sums to 1 to
// near machine precision.
std::vector<double> softmax(const std::vector<float>& logits);
double cross_entropy(const std::vector<double>& pred, const std::vector<float>& onehot);

// ---- Forward / backward -----------------------------------------------------------

struct Activations {
    std::vector<Tensor> inputs;                   // input tensor to each layer
    std::vector<std::vector<float>> drop_masks;   // per layer; empty unless dropout
    std::vector<std::vector<int>> pool_argmax;    // per layer; empty unless maxpool
    std::vector<float> logits;                    // input to the softmax head
    std::vector<double> probs;
    uint64_t fp = 0;
    bool valid = false;
};

// Runs the stack; caches activations for backward when `acts` is given.
// Train-mode dropout draws from `drop_rng` (required if any dropout layer has
// rate > 0 in train mode).
std::vector<double> forward(const NetworkWeights& net, const Tensor& x, Mode mode,
                            Activations* acts = nullptr, Rng* drop_rng = nullptr);

struct Gradients {
    std::vector<ConvLayerParams> conv;  // same shapes as NetworkWeights::conv

    void add_scaled(const Gradients& g, float s);  // this += s*g, fixed order
    void scale(float s);
};

// Exact gradients of cross-entropy(softmax(...)) w.r.t. all weights/biases.
// The softmax+cross-entropy head is fused: d(loss)/d(logit_i) is computed as
// float(probs[i] - y[i]).
Gradients backward(const NetworkWeights& net, const Activations& acts,
                   const std::vector<float>& onehot);

Gradients zero_gradients(const NetworkWeights& net);

// ---- Training ------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.001;
    double momentum = 0.9;
    int epochs = 100;
    int batch_size = 100;
    double validation_fraction = 0.2;
    uint64_t seed = 0;
    // Stop once validation accuracy reaches this (0 disables); used by the
    // warm-start comparison runs that measure epochs-to-threshold.
    double stop_at_val_accuracy = 0.0;

    void validate() const;
};

struct EpochStats {
    int epoch;            // 1-based
    double train_loss;    // mean per-sample cross-entropy over the epoch
    double val_accuracy;  // fraction correct on the held-out split
};

struct TrainResult {
    NetworkWeights best;  // weights from the epoch with highest val accuracy
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
};

// Momentum SGD: delta' = -lr*grad + momentum*delta; W += delta'. `velocity`
// holds the previous delta and is updated in place.
void sgd_step(NetworkWeights& w, const Gradients& grads, Gradients& velocity,
              double learning_rate, double momentum);

// Holds out validation_fraction per class (stratified, seeded), then runs
// minibatch SGD with mean-over-batch gradients. Every class the architecture
// knows must appear in the training split. If the stratified hold-out comes
// out empty (tiny datasets), validation accuracy is measured on the training
// split instead.
TrainResult train(const std::vector<augment::Chip>& dataset, const TrainConfig& cfg,
                  const Architecture& arch);
TrainResult train(const std::vector<augment::Chip>& dataset, const TrainConfig& cfg,
                  const NetworkWeights& init);

// Copies every layer; when target_classes differs from the source's class
// count the final conv layer is re-initialised from `seed` (same scheme as
// init_weights). Any other architectural difference is an error.
NetworkWeights transfer_init(const NetworkWeights& source, const Architecture& target_arch,
                             uint64_t seed);
NetworkWeights transfer_init(const NetworkWeights& source, int target_classes, uint64_t seed);

// Smallest square chip side the stack maps to a 1x1 class map (88 for the
// default family). Memoized per fingerprint.
int input_size(const NetworkWeights& net);

// Resize to the net's input size, forward in infer mode, argmax with ties to
// the lowest class id.
std::pair<int, std::vector<double>> predict(const NetworkWeights& net,
                                            const CartesianImage& img);

// ---- Artifacts --------------------------------------------------------------------

// ACNW file: magic "ACNW", u32 version=1, u64 fingerprint, u32 conv-layer
// count, then per layer u32x4 weight dims, u32 bias dim, f32 weights, f32
// biases. Little-endian.
void save_weights(const NetworkWeights& net, const std::string& path);
// Verifies the stored fingerprint against `arch` (ArchitectureError on
// mismatch). The single-argument form assumes the default architecture family
// and infers the class count from the final layer.
NetworkWeights load_weights(const std::string& path, const Architecture& arch);
NetworkWeights load_weights(const std::string& path);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace radar::net
