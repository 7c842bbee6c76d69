#include "radar/net.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "binio.hpp"
#include "radar/errors.hpp"
#include "radar/imaging.hpp"
#include "radar/kernels.hpp"

namespace radar::net {

// ---- Architecture ---------------------------------------------------------------

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.out_channels = out_channels;
    s.kernel_rows = kernel;
    s.kernel_cols = kernel;
    s.stride = stride;
    return s;
}
LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}
LayerSpec LayerSpec::maxpool(int window, int stride) {
    LayerSpec s;
    s.kind = LayerKind::Maxpool;
    s.window = window;
    s.pool_stride = stride;
    return s;
}
LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}
LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
}

Architecture default_architecture(int num_classes) {
    if (num_classes < 1)
        throw InvalidInputError("default_architecture: need at least one class");
    return {
        LayerSpec::conv(16, 5),  LayerSpec::relu(), LayerSpec::maxpool(2),
        LayerSpec::conv(32, 5),  LayerSpec::relu(), LayerSpec::maxpool(2),
        LayerSpec::conv(64, 6),  LayerSpec::relu(), LayerSpec::maxpool(2),
        LayerSpec::conv(128, 5), LayerSpec::relu(), LayerSpec::dropout(0.5),
        LayerSpec::conv(num_classes, 3), LayerSpec::softmax(),
    };
}

uint64_t fingerprint(const Architecture& arch) {
    uint64_t h = 0x41434e5731ull;  // arbitrary nonzero start
    auto mix = [&h](uint64_t v) { h = Rng::mix64(h ^ (v + 0x9e3779b97f4a7c15ull)); };
    mix(arch.size());
    for (const LayerSpec& s : arch) {
        mix(static_cast<uint64_t>(s.kind));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.out_channels)));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.kernel_rows)));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.kernel_cols)));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.stride)));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.window)));
        mix(static_cast<uint64_t>(static_cast<int64_t>(s.pool_stride)));
        uint64_t rate_bits;
        static_assert(sizeof(double) == 8);
        std::memcpy(&rate_bits, &s.rate, 8);
        mix(rate_bits);
    }
    return h;
}

namespace {

struct Dims {
    int c, h, w;
};

int pool_stride_of(const LayerSpec& s) { return s.pool_stride > 0 ? s.pool_stride : s.window; }

Dims layer_out_dims(const LayerSpec& s, Dims in, size_t layer_idx) {
    auto bad = [&](const std::string& why) {
        throw ArchitectureError("layer " + std::to_string(layer_idx) + ": " + why +
                                " (input " + std::to_string(in.c) + "x" + std::to_string(in.h) +
                                "x" + std::to_string(in.w) + ")");
    };
    switch (s.kind) {
        case LayerKind::Conv: {
            if (s.out_channels < 1 || s.kernel_rows < 1 || s.kernel_cols < 1 || s.stride < 1)
                bad("malformed conv spec");
            if (in.h < s.kernel_rows || in.w < s.kernel_cols)
                bad("conv kernel " + std::to_string(s.kernel_rows) + "x" +
                    std::to_string(s.kernel_cols) + " larger than input");
            return {s.out_channels, (in.h - s.kernel_rows) / s.stride + 1,
                    (in.w - s.kernel_cols) / s.stride + 1};
        }
        case LayerKind::Relu:
            return in;
        case LayerKind::Maxpool: {
            if (s.window < 1) bad("malformed maxpool spec");
            const int st = pool_stride_of(s);
            if (in.h < s.window || in.w < s.window)
                bad("pool window " + std::to_string(s.window) + " larger than input");
            return {in.c, (in.h - s.window) / st + 1, (in.w - s.window) / st + 1};
        }
        case LayerKind::Dropout:
            if (s.rate < 0.0 || s.rate > 1.0) bad("dropout rate outside [0,1]");
            return in;
        case LayerKind::Softmax:
            return in;
    }
    bad("unknown layer kind");
    return in;
}

}  // namespace

int check_chain(const Architecture& arch, int in_channels, int in_h, int in_w) {
    if (arch.empty()) throw ArchitectureError("empty architecture");
    if (arch.back().kind != LayerKind::Softmax)
        throw ArchitectureError("architecture must end with softmax");
    int convs = 0;
    Dims d{in_channels, in_h, in_w};
    for (size_t i = 0; i < arch.size(); ++i) {
        if (arch[i].kind == LayerKind::Softmax && i + 1 != arch.size())
            throw ArchitectureError("softmax must be the final layer");
        if (arch[i].kind == LayerKind::Conv) ++convs;
        d = layer_out_dims(arch[i], d, i);
    }
    if (convs == 0) throw ArchitectureError("architecture has no conv layer");
    if (d.h != 1 || d.w != 1)
        throw ArchitectureError("architecture does not reduce " + std::to_string(in_h) + "x" +
                                std::to_string(in_w) + " input to a 1x1 class map (got " +
                                std::to_string(d.h) + "x" + std::to_string(d.w) + ")");
    return d.c;
}

// ---- Weights -----------------------------------------------------------------------

int NetworkWeights::num_classes() const {
    if (conv.empty()) throw InvalidStateError("network has no conv layers");
    return conv.back().weights.dim(0);
}

NetworkWeights init_weights(const Architecture& arch, uint64_t seed, int in_channels) {
    NetworkWeights net;
    net.arch = arch;
    net.fp = fingerprint(arch);
    Rng root = Rng(seed).split(2);
    int d = in_channels;
    int conv_idx = 0;
    for (const LayerSpec& s : arch) {
        if (s.kind != LayerKind::Conv) continue;
        Rng r = root.split(static_cast<uint64_t>(conv_idx));
        const int fan_in = d * s.kernel_rows * s.kernel_cols;
        const int fan_out = s.out_channels * s.kernel_rows * s.kernel_cols;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        ConvLayerParams p;
        p.weights = Tensor::zeros({s.out_channels, d, s.kernel_rows, s.kernel_cols});
        p.bias = Tensor::zeros({s.out_channels});
        for (float& wv : p.weights.data)
            wv = static_cast<float>(r.uniform(-bound, bound));
        net.conv.push_back(std::move(p));
        d = s.out_channels;
        ++conv_idx;
    }
    return net;
}

// ---- Primitive ops --------------------------------------------------------------------

Tensor conv_forward(const Tensor& x, const ConvLayerParams& p, int stride) {
    if (x.ndim() != 3)
        throw ShapeError("conv_forward: input " + x.shape_str() + " is not [C,H,W]");
    if (p.weights.ndim() != 4)
        throw ShapeError("conv_forward: weights " + p.weights.shape_str() +
                         " are not [K,D,M,N]");
    const int D = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int K = p.weights.dim(0), wd = p.weights.dim(1);
    const int kh = p.weights.dim(2), kw = p.weights.dim(3);
    if (wd != D || H < kh || W < kw)
        throw ShapeError("conv_forward: input " + x.shape_str() +
                         " incompatible with weights " + p.weights.shape_str());
    if (p.bias.numel() != K)
        throw ShapeError("conv_forward: bias " + p.bias.shape_str() + " does not match " +
                         std::to_string(K) + " output channels");
    if (stride < 1) throw InvalidInputError("conv_forward: stride must be >= 1");
    const int OH = (H - kh) / stride + 1, OW = (W - kw) / stride + 1;
    Tensor out = Tensor::zeros({K, OH, OW});
    kernels::conv2d_forward(x.data.data(), D, H, W, p.weights.data.data(), p.bias.data.data(),
                            K, kh, kw, stride, out.data.data());
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor maxpool(const Tensor& x, int window, int stride, std::vector<int>* argmax) {
    if (x.ndim() != 3) throw ShapeError("maxpool: input " + x.shape_str() + " is not [C,H,W]");
    if (window < 1) throw InvalidInputError("maxpool: window must be >= 1");
    if (stride < 1) stride = window;
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H < window || W < window)
        throw ShapeError("maxpool: window " + std::to_string(window) + " larger than input " +
                         x.shape_str());
    const int OH = (H - window) / stride + 1, OW = (W - window) / stride + 1;
    Tensor out = Tensor::zeros({C, OH, OW});
    std::vector<int> am(static_cast<size_t>(C) * OH * OW);
    kernels::maxpool_forward(x.data.data(), C, H, W, window, stride, out.data.data(), am.data());
    if (argmax) *argmax = std::move(am);
    return out;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng, std::vector<float>* mask) {
    if (rate < 0.0 || rate > 1.0)
        throw InvalidInputError("dropout: rate " + std::to_string(rate) + " outside [0,1]");
    if (mode == Mode::Infer || rate == 0.0) {
        if (mask) mask->assign(x.data.size(), 1.0f);
        return x;
    }
    Tensor out = x;
    const float scale = rate < 1.0 ? static_cast<float>(1.0 / (1.0 - rate)) : 0.0f;
    std::vector<float> m(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        const bool keep = rng.next_double() >= rate;
        m[i] = keep ? scale : 0.0f;
        out.data[i] *= m[i];
    }
    if (mask) *mask = std::move(m);
    return out;
}

std::vector<double> softmax(const std::vector<float>& logits) {
    if (logits.empty()) throw InvalidInputError("softmax: empty input");
    float mx = logits[0];
    for (float v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(mx));
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace {

int one_hot_index(const std::vector<float>& y) {
    int idx = -1;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1.0f) {
            if (idx >= 0) throw InvalidInputError("label vector has more than one 1");
            idx = static_cast<int>(i);
        } else if (y[i] != 0.0f) {
            throw InvalidInputError("label vector is not one-hot (entry " + std::to_string(i) +
                                    " = " + std::to_string(y[i]) + ")");
        }
    }
    if (idx < 0) throw InvalidInputError("label vector has no 1");
    return idx;
}

}  // namespace

double cross_entropy(const std::vector<double>& pred, const std::vector<float>& onehot) {
    if (pred.size() != onehot.size())
        throw ShapeError("cross_entropy: prediction size " + std::to_string(pred.size()) +
                         " vs label size " + std::to_string(onehot.size()));
    const int k = one_hot_index(onehot);
    if (!(pred[k] > 0.0))
        throw InvalidInputError("cross_entropy: predicted probability must be positive");
    return -std::log(pred[k]);
}

// ---- Forward / backward ------------------------------------------------------------------

std::vector<double> forward(const NetworkWeights& net, const Tensor& x, Mode mode,
                            Activations* acts, Rng* drop_rng) {
    if (net.arch.empty() || net.arch.back().kind != LayerKind::Softmax)
        throw ArchitectureError("forward: architecture must end with softmax");
    if (acts) {
        *acts = Activations{};
        acts->inputs.reserve(net.arch.size());
        acts->drop_masks.resize(net.arch.size());
        acts->pool_argmax.resize(net.arch.size());
    }
    Tensor cur = x;
    size_t conv_idx = 0;
    for (size_t i = 0; i + 1 < net.arch.size(); ++i) {
        const LayerSpec& s = net.arch[i];
        Tensor next;
        switch (s.kind) {
            case LayerKind::Conv: {
                if (conv_idx >= net.conv.size())
                    throw ArchitectureError("forward: weights have fewer conv layers than spec");
                next = conv_forward(cur, net.conv[conv_idx], s.stride);
                ++conv_idx;
                break;
            }
            case LayerKind::Relu:
                next = relu(cur);
                break;
            case LayerKind::Maxpool: {
                std::vector<int> am;
                next = maxpool(cur, s.window, pool_stride_of(s), acts ? &am : nullptr);
                if (acts) acts->pool_argmax[i] = std::move(am);
                break;
            }
            case LayerKind::Dropout: {
                if (mode == Mode::Train && s.rate > 0.0 && !drop_rng)
                    throw InvalidStateError("forward: train-mode dropout needs an rng");
                Rng dummy(0);
                std::vector<float> m;
                next = dropout(cur, s.rate, mode, drop_rng ? *drop_rng : dummy,
                               acts ? &m : nullptr);
                if (acts) acts->drop_masks[i] = std::move(m);
                break;
            }
            case LayerKind::Softmax:
                throw ArchitectureError("forward: softmax before the end of the stack");
        }
        if (acts) acts->inputs.push_back(std::move(cur));
        cur = std::move(next);
    }
    if (conv_idx != net.conv.size())
        throw ArchitectureError("forward: weights have more conv layers than spec");
    std::vector<float> logits(cur.data.begin(), cur.data.end());
    std::vector<double> probs = softmax(logits);
    if (acts) {
        acts->inputs.push_back(std::move(cur));  // input to the softmax layer
        acts->logits = std::move(logits);
        acts->probs = probs;
        acts->fp = net.fp;
        acts->valid = true;
    }
    return probs;
}

Gradients zero_gradients(const NetworkWeights& net) {
    Gradients g;
    g.conv.reserve(net.conv.size());
    for (const ConvLayerParams& p : net.conv) {
        ConvLayerParams z;
        z.weights = Tensor::zeros(p.weights.shape);
        z.bias = Tensor::zeros(p.bias.shape);
        g.conv.push_back(std::move(z));
    }
    return g;
}

void Gradients::add_scaled(const Gradients& g, float s) {
    if (g.conv.size() != conv.size()) throw ShapeError("gradient layer count mismatch");
    for (size_t l = 0; l < conv.size(); ++l) {
        for (size_t i = 0; i < conv[l].weights.data.size(); ++i)
            conv[l].weights.data[i] += s * g.conv[l].weights.data[i];
        for (size_t i = 0; i < conv[l].bias.data.size(); ++i)
            conv[l].bias.data[i] += s * g.conv[l].bias.data[i];
    }
}

void Gradients::scale(float s) {
    for (auto& l : conv) {
        for (float& v : l.weights.data) v *= s;
        for (float& v : l.bias.data) v *= s;
    }
}

Gradients backward(const NetworkWeights& net, const Activations& acts,
                   const std::vector<float>& onehot) {
    if (!acts.valid) throw InvalidStateError("backward: activations not produced by forward");
    if (acts.fp != net.fp)
        throw InvalidStateError("backward: activations are from a different network");
    if (acts.inputs.size() != net.arch.size())
        throw InvalidStateError("backward: activation cache incomplete");
    if (onehot.size() != acts.probs.size())
        throw ShapeError("backward: label size " + std::to_string(onehot.size()) +
                         " vs class count " + std::to_string(acts.probs.size()));
    one_hot_index(onehot);

    Gradients grads = zero_gradients(net);

    // Fused softmax + cross-entropy head: d(loss)/d(logit_i) = probs_i - y_i.
    const Tensor& head_in = acts.inputs.back();
    Tensor dcur = Tensor::zeros(head_in.shape);
    for (size_t i = 0; i < onehot.size(); ++i)
        dcur.data[i] = static_cast<float>(acts.probs[i]) - onehot[i];

    // conv-layer index of each layer, for indexing grads while walking backwards
    std::vector<int> conv_of(net.arch.size(), -1);
    {
        int ci = 0;
        for (size_t i = 0; i < net.arch.size(); ++i)
            if (net.arch[i].kind == LayerKind::Conv) conv_of[i] = ci++;
    }

    for (size_t ii = net.arch.size() - 1; ii-- > 0;) {
        const LayerSpec& s = net.arch[ii];
        const Tensor& in = acts.inputs[ii];
        switch (s.kind) {
            case LayerKind::Conv: {
                const ConvLayerParams& p = net.conv[conv_of[ii]];
                ConvLayerParams& g = grads.conv[conv_of[ii]];
                const int D = in.dim(0), H = in.dim(1), W = in.dim(2);
                const int K = dcur.dim(0), OH = dcur.dim(1), OW = dcur.dim(2);
                kernels::conv2d_backward_params(dcur.data.data(), K, OH, OW, in.data.data(), D,
                                                H, W, p.weights.dim(2), p.weights.dim(3),
                                                s.stride, g.weights.data.data(),
                                                g.bias.data.data());
                if (ii > 0) {  // the bottom layer has no one to hand dx to
                    Tensor dx = Tensor::zeros(in.shape);
                    kernels::conv2d_backward_input(dcur.data.data(), K, OH, OW,
                                                   p.weights.data.data(), D, p.weights.dim(2),
                                                   p.weights.dim(3), s.stride, dx.data.data(),
                                                   H, W);
                    dcur = std::move(dx);
                }
                break;
            }
            case LayerKind::Relu: {
                Tensor dx = Tensor::zeros(in.shape);
                for (size_t i = 0; i < in.data.size(); ++i)
                    dx.data[i] = in.data[i] > 0.0f ? dcur.data[i] : 0.0f;
                dcur = std::move(dx);
                break;
            }
            case LayerKind::Maxpool: {
                const auto& am = acts.pool_argmax[ii];
                if (am.size() != dcur.data.size())
                    throw InvalidStateError("backward: pool argmax cache missing");
                Tensor dx = Tensor::zeros(in.shape);
                kernels::maxpool_backward(dcur.data.data(), dcur.dim(0), dcur.dim(1),
                                          dcur.dim(2), am.data(), dx.data.data(),
                                          static_cast<int64_t>(dx.data.size()));
                dcur = std::move(dx);
                break;
            }
            case LayerKind::Dropout: {
                const auto& m = acts.drop_masks[ii];
                if (!m.empty()) {
                    if (m.size() != dcur.data.size())
                        throw InvalidStateError("backward: dropout mask cache mismatched");
                    Tensor dx = dcur;
                    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= m[i];
                    dcur = std::move(dx);
                }
                break;
            }
            case LayerKind::Softmax:
                throw ArchitectureError("backward: softmax before the end of the stack");
        }
    }
    return grads;
}

// ---- Training ----------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw InvalidInputError("learning_rate must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidInputError("momentum must be in [0,1)");
    if (epochs < 1) throw InvalidInputError("epochs must be >= 1");
    if (batch_size < 1) throw InvalidInputError("batch_size must be >= 1");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw InvalidInputError("validation_fraction must be in [0,1)");
    if (stop_at_val_accuracy < 0.0 || stop_at_val_accuracy > 1.0)
        throw InvalidInputError("stop_at_val_accuracy must be in [0,1]");
}

void sgd_step(NetworkWeights& w, const Gradients& grads, Gradients& velocity,
              double learning_rate, double momentum) {
    if (grads.conv.size() != w.conv.size() || velocity.conv.size() != w.conv.size())
        throw ShapeError("sgd_step: layer count mismatch");
    const float lr = static_cast<float>(learning_rate);
    const float mu = static_cast<float>(momentum);
    for (size_t l = 0; l < w.conv.size(); ++l) {
        auto step = [lr, mu](std::vector<float>& wv, const std::vector<float>& gv,
                             std::vector<float>& vv) {
            if (wv.size() != gv.size() || wv.size() != vv.size())
                throw ShapeError("sgd_step: parameter shape mismatch");
            for (size_t i = 0; i < wv.size(); ++i) {
                vv[i] = -lr * gv[i] + mu * vv[i];
                wv[i] += vv[i];
            }
        };
        step(w.conv[l].weights.data, grads.conv[l].weights.data, velocity.conv[l].weights.data);
        step(w.conv[l].bias.data, grads.conv[l].bias.data, velocity.conv[l].bias.data);
    }
}

namespace {

Tensor chip_to_tensor(const augment::Chip& chip) {
    Tensor t = Tensor::zeros({1, chip.image.rows, chip.image.cols});
    std::copy(chip.image.values.begin(), chip.image.values.end(), t.data.begin());
    return t;
}

void fisher_yates(std::vector<int>& v, Rng rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.bounded(static_cast<uint64_t>(i)));
        std::swap(v[i - 1], v[j]);
    }
}

int argmax_lowest(const std::vector<double>& p) {
    int best = 0;
    for (size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = static_cast<int>(i);
    return best;
}

TrainResult train_impl(const std::vector<augment::Chip>& dataset, const TrainConfig& cfg,
                       NetworkWeights w) {
    cfg.validate();
    if (dataset.empty()) throw InvalidInputError("train: empty dataset");
    const int C = w.num_classes();
    for (const auto& chip : dataset)
        if (chip.label < 0 || chip.label >= C)
            throw InvalidInputError("train: label " + std::to_string(chip.label) +
                                    " outside [0," + std::to_string(C) + ")");
    check_chain(w.arch, 1, dataset.front().image.rows, dataset.front().image.cols);

    Rng root(cfg.seed);

    // stratified hold-out, seeded per class
    std::vector<std::vector<int>> by_class(C);
    for (size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset[i].label].push_back(static_cast<int>(i));
    std::vector<int> train_idx, val_idx;
    for (int c = 0; c < C; ++c) {
        auto& idx = by_class[c];
        if (idx.empty())
            throw InvalidInputError("train: class " + std::to_string(c) +
                                    " absent from the dataset");
        fisher_yates(idx, root.split(0).split(static_cast<uint64_t>(c)));
        const int take =
            static_cast<int>(std::floor(cfg.validation_fraction * idx.size() + 0.5));
        for (int i = 0; i < static_cast<int>(idx.size()); ++i)
            (i < take ? val_idx : train_idx).push_back(idx[i]);
        if (static_cast<int>(idx.size()) - take < 1)
            throw InvalidInputError("train: class " + std::to_string(c) +
                                    " absent from the training split");
    }
    const bool val_on_train = val_idx.empty();
    const std::vector<int>& eval_idx = val_on_train ? train_idx : val_idx;

    // per-sample tensors and one-hot labels, built once
    std::vector<Tensor> tensors(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) tensors[i] = chip_to_tensor(dataset[i]);

    Gradients velocity = zero_gradients(w);
    const Rng shuffle_root = root.split(1);
    const Rng drop_root = root.split(3);

    TrainResult result;
    result.best = w;
    result.best_epoch = 0;
    result.best_val_accuracy = -1.0;

    const int T = std::max(1, omp_get_max_threads());
    std::vector<Gradients> slot(T);
    std::vector<double> slot_loss(T);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> perm = train_idx;
        fisher_yates(perm, shuffle_root.split(static_cast<uint64_t>(epoch)));

        double loss_sum = 0.0;
        const int n = static_cast<int>(perm.size());
        for (int b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const int bn = std::min(cfg.batch_size, n - b0);
            Gradients batch_grad = zero_gradients(w);
            // Samples are processed in chunks of up to T in parallel, then
            // reduced in sample order, so the sum is identical for any thread
            // count.
            for (int c0 = 0; c0 < bn; c0 += T) {
                const int cn = std::min(T, bn - c0);
#pragma omp parallel for schedule(static) if (cn > 1)
                for (int t = 0; t < cn; ++t) {
                    const int pos = b0 + c0 + t;  // position within the epoch
                    const int si = perm[pos];
                    Rng drng =
                        drop_root.split(static_cast<uint64_t>(epoch)).split(static_cast<uint64_t>(pos));
                    Activations acts;
                    std::vector<double> probs =
                        forward(w, tensors[si], Mode::Train, &acts, &drng);
                    std::vector<float> y(C, 0.0f);
                    y[dataset[si].label] = 1.0f;
                    slot_loss[t] = cross_entropy(probs, y);
                    slot[t] = backward(w, acts, y);
                }
                for (int t = 0; t < cn; ++t) {
                    batch_grad.add_scaled(slot[t], 1.0f);
                    loss_sum += slot_loss[t];
                }
            }
            batch_grad.scale(1.0f / static_cast<float>(bn));
            sgd_step(w, batch_grad, velocity, cfg.learning_rate, cfg.momentum);
        }

        // validation accuracy, infer mode
        const int vn = static_cast<int>(eval_idx.size());
        std::vector<uint8_t> correct(vn, 0);
#pragma omp parallel for schedule(static) if (vn > 1)
        for (int v = 0; v < vn; ++v) {
            const int si = eval_idx[v];
            std::vector<double> probs = forward(w, tensors[si], Mode::Infer);
            correct[v] = argmax_lowest(probs) == dataset[si].label ? 1 : 0;
        }
        int ncorrect = 0;
        for (uint8_t c : correct) ncorrect += c;
        const double val_acc = static_cast<double>(ncorrect) / vn;

        result.history.push_back({epoch, loss_sum / n, val_acc});
        if (val_acc > result.best_val_accuracy) {
            result.best_val_accuracy = val_acc;
            result.best_epoch = epoch;
            result.best = w;
        }
        if (cfg.stop_at_val_accuracy > 0.0 && val_acc >= cfg.stop_at_val_accuracy) break;
    }
    return result;
}

}  // namespace

TrainResult train(const std::vector<augment::Chip>& dataset, const TrainConfig& cfg,
                  const Architecture& arch) {
    return train_impl(dataset, cfg, init_weights(arch, cfg.seed));
}

TrainResult train(const std::vector<augment::Chip>& dataset, const TrainConfig& cfg,
                  const NetworkWeights& init) {
    return train_impl(dataset, cfg, init);
}

// ---- Transfer learning -----------------------------------------------------------------

NetworkWeights transfer_init(const NetworkWeights& source, const Architecture& target_arch,
                             uint64_t seed) {
    const Architecture& src = source.arch;
    if (src.size() != target_arch.size())
        throw ArchitectureError("transfer_init: layer counts differ (" +
                                std::to_string(src.size()) + " vs " +
                                std::to_string(target_arch.size()) + ")");
    int last_conv = -1;
    for (size_t i = 0; i < target_arch.size(); ++i)
        if (target_arch[i].kind == LayerKind::Conv) last_conv = static_cast<int>(i);
    if (last_conv < 0) throw ArchitectureError("transfer_init: target has no conv layer");
    for (size_t i = 0; i < src.size(); ++i) {
        if (static_cast<int>(i) == last_conv) {
            LayerSpec a = src[i], b = target_arch[i];
            a.out_channels = b.out_channels = 0;  // everything else must agree
            if (!(a == b))
                throw ArchitectureError(
                    "transfer_init: final conv layers differ beyond class count");
        } else if (!(src[i] == target_arch[i])) {
            throw ArchitectureError("transfer_init: layer " + std::to_string(i) +
                                    " differs between source and target");
        }
    }

    NetworkWeights out;
    out.arch = target_arch;
    out.fp = fingerprint(target_arch);
    out.conv = source.conv;

    const int src_classes = src[last_conv].out_channels;
    const int dst_classes = target_arch[last_conv].out_channels;
    if (src_classes == dst_classes) return out;  // bitwise copy

    // re-initialise the class head exactly as init_weights would
    const int conv_count = static_cast<int>(out.conv.size());
    const int d = out.conv.back().weights.dim(1);
    const LayerSpec& fs = target_arch[last_conv];
    Rng r = Rng(seed).split(2).split(static_cast<uint64_t>(conv_count - 1));
    const int fan_in = d * fs.kernel_rows * fs.kernel_cols;
    const int fan_out = fs.out_channels * fs.kernel_rows * fs.kernel_cols;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    ConvLayerParams head;
    head.weights = Tensor::zeros({fs.out_channels, d, fs.kernel_rows, fs.kernel_cols});
    head.bias = Tensor::zeros({fs.out_channels});
    for (float& wv : head.weights.data) wv = static_cast<float>(r.uniform(-bound, bound));
    out.conv.back() = std::move(head);
    return out;
}

NetworkWeights transfer_init(const NetworkWeights& source, int target_classes, uint64_t seed) {
    Architecture target = source.arch;
    for (size_t i = target.size(); i-- > 0;) {
        if (target[i].kind == LayerKind::Conv) {
            target[i].out_channels = target_classes;
            break;
        }
    }
    return transfer_init(source, target, seed);
}

// ---- Prediction ---------------------------------------------------------------------------

int input_size(const NetworkWeights& net) {
    static std::mutex mu;
    static std::map<uint64_t, int> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(net.fp);
        if (it != cache.end()) return it->second;
    }
    const int in_c = net.conv.empty() ? 1 : net.conv.front().weights.dim(1);
    for (int s = 1; s <= 512; ++s) {
        try {
            check_chain(net.arch, in_c, s, s);
            std::lock_guard<std::mutex> lock(mu);
            cache.emplace(net.fp, s);
            return s;
        } catch (const ArchitectureError&) {
        }
    }
    throw ArchitectureError("no square input size up to 512 fits this layer stack");
}

std::pair<int, std::vector<double>> predict(const NetworkWeights& net,
                                            const CartesianImage& img) {
    const int want = input_size(net);
    const CartesianImage* in = &img;
    CartesianImage resized;
    if (img.rows != want || img.cols != want) {
        resized = imaging::resize_bilinear(img, want, want);
        in = &resized;
    }
    Tensor t = Tensor::zeros({1, in->rows, in->cols});
    std::copy(in->values.begin(), in->values.end(), t.data.begin());
    std::vector<double> probs = forward(net, t, Mode::Infer);
    return {argmax_lowest(probs), std::move(probs)};
}

// ---- Artifacts ------------------------------------------------------------------------------

void save_weights(const NetworkWeights& net, const std::string& path) {
    for (const auto& p : net.conv)
        if (!p.weights.all_finite() || !p.bias.all_finite())
            throw InvalidStateError("save_weights: non-finite parameter values");
    std::string buf;
    buf.append("ACNW");
    binio::put_u32(buf, 1);
    binio::put_u64(buf, net.fp);
    binio::put_u32(buf, static_cast<uint32_t>(net.conv.size()));
    for (const auto& p : net.conv) {
        for (int d = 0; d < 4; ++d) binio::put_u32(buf, static_cast<uint32_t>(p.weights.dim(d)));
        binio::put_u32(buf, static_cast<uint32_t>(p.bias.numel()));
        for (float v : p.weights.data) binio::put_f32(buf, v);
        for (float v : p.bias.data) binio::put_f32(buf, v);
    }
    binio::write_file(path, buf);
}

namespace {

struct RawAcnw {
    uint64_t fp;
    std::vector<ConvLayerParams> conv;
};

RawAcnw read_acnw(const std::string& path) {
    std::string buf = binio::read_file(path);
    binio::Cursor c{reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), "ACNW"};
    c.need(4, "magic");
    if (std::memcmp(c.p, "ACNW", 4) != 0) throw FormatError(path + ": not an ACNW file");
    c.p += 4;
    c.left -= 4;
    if (c.u32("version") != 1) throw FormatError(path + ": unsupported ACNW version");
    RawAcnw raw;
    raw.fp = c.u64("fingerprint");
    const uint32_t layers = c.u32("layer count");
    for (uint32_t l = 0; l < layers; ++l) {
        int dims[4];
        for (int d = 0; d < 4; ++d) {
            dims[d] = static_cast<int>(c.u32("weight dims"));
            if (dims[d] < 1 || dims[d] > (1 << 20))
                throw FormatError(path + ": implausible weight dimension");
        }
        const uint32_t bias_n = c.u32("bias dim");
        if (bias_n != static_cast<uint32_t>(dims[0]))
            throw FormatError(path + ": bias count does not match output channels");
        ConvLayerParams p;
        p.weights = Tensor::zeros({dims[0], dims[1], dims[2], dims[3]});
        p.bias = Tensor::zeros({dims[0]});
        for (float& v : p.weights.data) v = c.f32("weights");
        for (float& v : p.bias.data) v = c.f32("biases");
        raw.conv.push_back(std::move(p));
    }
    if (c.left != 0) throw FormatError(path + ": trailing bytes after weights");
    return raw;
}

NetworkWeights assemble(const std::string& path, RawAcnw raw, const Architecture& arch) {
    if (raw.fp != fingerprint(arch))
        throw ArchitectureError(path + ": weight fingerprint does not match the architecture");
    NetworkWeights net;
    net.arch = arch;
    net.fp = raw.fp;
    net.conv = std::move(raw.conv);
    size_t ci = 0;
    for (const LayerSpec& s : arch) {
        if (s.kind != LayerKind::Conv) continue;
        if (ci >= net.conv.size())
            throw FormatError(path + ": fewer conv layers than the architecture expects");
        const Tensor& w = net.conv[ci].weights;
        if (w.dim(0) != s.out_channels || w.dim(2) != s.kernel_rows || w.dim(3) != s.kernel_cols)
            throw ArchitectureError(path + ": stored layer " + std::to_string(ci) + " shape " +
                                    w.shape_str() + " does not match the architecture");
        ++ci;
    }
    if (ci != net.conv.size())
        throw FormatError(path + ": more conv layers than the architecture expects");
    return net;
}

}  // namespace

NetworkWeights load_weights(const std::string& path, const Architecture& arch) {
    return assemble(path, read_acnw(path), arch);
}

NetworkWeights load_weights(const std::string& path) {
    RawAcnw raw = read_acnw(path);
    if (raw.conv.empty()) throw FormatError(path + ": no conv layers");
    const int classes = raw.conv.back().weights.dim(0);
    Architecture arch = default_architecture(classes);
    if (raw.fp != fingerprint(arch))
        throw ArchitectureError(path +
                                ": weights do not use the default architecture; "
                                "pass the layer stack explicitly");
    return assemble(path, std::move(raw), arch);
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write history: " + path);
    out << "epoch,train_loss,val_accuracy\n";
    char line[128];
    for (const auto& e : history) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", e.epoch, e.train_loss,
                      e.val_accuracy);
        out << line;
    }
    if (!out) throw IoError("failed writing history: " + path);
}

}  // namespace radar::net
