#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>

using namespace radar;

namespace oracles {

std::vector<double> dft_power(const std::vector<float>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> out(static_cast<size_t>(n / 2));
    for (int k = 0; k < n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int j = 0; j < n; ++j) {
            const double a = -2.0 * M_PI * j * k / n;
            re += x[j] * std::cos(a);
            im += x[j] * std::sin(a);
        }
        out[k] = re * re + im * im;
    }
    return out;
}

namespace {

struct Buf {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;
    double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const {
        return v[(static_cast<size_t>(ci) * h + y) * w + x];
    }
};

}  // namespace

double ref_loss(const net::NetworkWeights& netw, const Tensor& x,
                const std::vector<float>& onehot, const net::Activations& acts) {
    Buf cur;
    cur.c = x.dim(0);
    cur.h = x.dim(1);
    cur.w = x.dim(2);
    cur.v.assign(x.data.begin(), x.data.end());

    int conv_idx = 0;
    for (size_t li = 0; li < netw.arch.size(); ++li) {
        const auto& layer = netw.arch[li];
        switch (layer.kind) {
            case net::LayerKind::Conv: {
                const auto& p = netw.conv[conv_idx++];
                const int K = p.weights.dim(0), D = p.weights.dim(1);
                const int M = p.weights.dim(2), N = p.weights.dim(3);
                const int s = layer.stride;
                Buf next;
                next.c = K;
                next.h = (cur.h - M) / s + 1;
                next.w = (cur.w - N) / s + 1;
                next.v.assign(static_cast<size_t>(next.c) * next.h * next.w, 0.0);
                for (int k = 0; k < K; ++k)
                    for (int i = 0; i < next.h; ++i)
                        for (int j = 0; j < next.w; ++j) {
                            double acc = p.bias.data[static_cast<size_t>(k)];
                            for (int d = 0; d < D; ++d)
                                for (int u = 0; u < M; ++u)
                                    for (int v2 = 0; v2 < N; ++v2)
                                        acc += static_cast<double>(
                                                   p.weights.data[((static_cast<size_t>(k) * D +
                                                                    d) * M + u) * N + v2]) *
                                               cur.at(d, i * s + u, j * s + v2);
                            next.at(k, i, j) = acc;
                        }
                cur = std::move(next);
                break;
            }
            case net::LayerKind::Relu:
                for (auto& v : cur.v) v = v > 0.0 ? v : 0.0;
                break;
            case net::LayerKind::Maxpool: {
                const int win = layer.window;
                const int s = layer.pool_stride > 0 ? layer.pool_stride : win;
                Buf next;
                next.c = cur.c;
                next.h = (cur.h - win) / s + 1;
                next.w = (cur.w - win) / s + 1;
                next.v.resize(static_cast<size_t>(next.c) * next.h * next.w);
                for (int c = 0; c < cur.c; ++c)
                    for (int i = 0; i < next.h; ++i)
                        for (int j = 0; j < next.w; ++j) {
                            double best = cur.at(c, i * s, j * s);
                            for (int u = 0; u < win; ++u)
                                for (int v2 = 0; v2 < win; ++v2)
                                    best = std::max(best, cur.at(c, i * s + u, j * s + v2));
                            next.at(c, i, j) = best;
                        }
                cur = std::move(next);
                break;
            }
            case net::LayerKind::Dropout: {
                const auto& mask = acts.drop_masks[li];
                if (!mask.empty())
                    for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] *= mask[i];
                break;
            }
            case net::LayerKind::Softmax: {
                double mx = cur.v[0];
                for (double v : cur.v) mx = std::max(mx, v);
                double denom = 0.0;
                for (double v : cur.v) denom += std::exp(v - mx);
                double loss = 0.0;
                for (size_t i = 0; i < cur.v.size(); ++i)
                    if (onehot[i] != 0.0f)
                        loss -= onehot[i] * (cur.v[i] - mx - std::log(denom));
                return loss;
            }
        }
    }
    return 0.0;
}

net::Gradients fd_gradients(net::NetworkWeights netw, const Tensor& x,
                            const std::vector<float>& onehot, const net::Activations& acts) {
    net::Gradients out = net::zero_gradients(netw);
    for (size_t l = 0; l < netw.conv.size(); ++l) {
        auto probe = [&](Tensor& param, Tensor& slot) {
            for (size_t i = 0; i < param.data.size(); ++i) {
                const float orig = param.data[i];
                const double scale = std::max(std::fabs(static_cast<double>(orig)), 0.05);
                // The step shrinks until two consecutive quotients agree: a
                // relu or pool-argmax kink inside the probe interval shows up
                // as non-convergence rather than polluting the estimate.
                double q = 0.0;
                bool have = false;
                for (double eps = 1e-3 * scale; eps > 1e-8 * scale; eps /= 8) {
                    param.data[i] = static_cast<float>(orig + eps);
                    const double hi = static_cast<double>(param.data[i]);
                    const double lp = ref_loss(netw, x, onehot, acts);
                    param.data[i] = static_cast<float>(orig - eps);
                    const double lo = static_cast<double>(param.data[i]);
                    const double lm = ref_loss(netw, x, onehot, acts);
                    param.data[i] = orig;
                    if (hi == lo) break;
                    const double q2 = (lp - lm) / (hi - lo);
                    const bool settled =
                        have && std::fabs(q2 - q) <=
                                    1e-6 + 1e-4 * std::max(std::fabs(q), std::fabs(q2));
                    q = q2;
                    have = true;
                    if (settled) break;
                }
                slot.data[i] = static_cast<float>(q);
            }
        };
        probe(netw.conv[l].weights, out.conv[l].weights);
        probe(netw.conv[l].bias, out.conv[l].bias);
    }
    return out;
}

net::Architecture random_tiny_arch(Rng& rng, int& in_h, int& in_w) {
    net::Architecture arch;
    in_h = 6 + static_cast<int>(rng.bounded(7));
    in_w = 6 + static_cast<int>(rng.bounded(7));
    int h = in_h, w = in_w;
    const int body_convs = static_cast<int>(rng.bounded(3));  // head conv comes extra
    for (int i = 0; i < body_convs; ++i) {
        const int kmax = std::min({3, h - 1, w - 1});
        if (kmax < 1) break;
        const int k = 1 + static_cast<int>(rng.bounded(static_cast<uint64_t>(kmax)));
        arch.push_back(net::LayerSpec::conv(1 + static_cast<int>(rng.bounded(3)), k));
        h -= k - 1;
        w -= k - 1;
        if (rng.bounded(2)) arch.push_back(net::LayerSpec::relu());
        if (h >= 4 && w >= 4 && rng.bounded(2)) {
            arch.push_back(net::LayerSpec::maxpool(2));
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
        if (rng.bounded(3) == 0)
            arch.push_back(net::LayerSpec::dropout(rng.bounded(2) ? 0.5 : 0.25));
    }
    net::LayerSpec head;
    head.kind = net::LayerKind::Conv;
    head.out_channels = 2 + static_cast<int>(rng.bounded(4));
    head.kernel_rows = h;
    head.kernel_cols = w;
    head.stride = 1;
    arch.push_back(head);
    arch.push_back(net::LayerSpec::softmax());
    return arch;
}

std::vector<int> brute_dbscan(const std::vector<std::pair<double, double>>& points, double eps,
                              int min_points) {
    const int n = static_cast<int>(points.size());
    const double eps2 = eps * eps;
    auto close = [&](int a, int b) {
        const double dx = points[a].first - points[b].first;
        const double dy = points[a].second - points[b].second;
        return dx * dx + dy * dy <= eps2;
    };

    std::vector<std::vector<int>> nbrs(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (close(i, j)) nbrs[i].push_back(j);  // includes i itself

    std::vector<bool> core(n);
    for (int i = 0; i < n; ++i) core[i] = static_cast<int>(nbrs[i].size()) >= min_points;

    // connected components over core points (union-find)
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (int i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (int j : nbrs[i])
            if (core[j]) parent[find(i)] = find(j);
    }

    // cluster ids in order of each component's smallest core index
    std::map<int, int> comp_to_id;
    for (int i = 0; i < n; ++i)
        if (core[i]) comp_to_id.emplace(find(i), -1);
    // (map iterates roots in arbitrary numeric order; we want min-core order)
    std::vector<int> min_core(n, n);
    for (int i = n - 1; i >= 0; --i)
        if (core[i]) min_core[find(i)] = i;
    std::vector<std::pair<int, int>> order;  // (min core index, root)
    for (auto& [root, id] : comp_to_id) order.emplace_back(min_core[root], root);
    std::sort(order.begin(), order.end());
    for (size_t k = 0; k < order.size(); ++k) comp_to_id[order[k].second] = static_cast<int>(k);

    std::vector<int> label(n, radar::detection::kNoise);
    for (int i = 0; i < n; ++i)
        if (core[i]) label[i] = comp_to_id[find(i)];
    for (int i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = radar::detection::kNoise;
        for (int j : nbrs[i])
            if (core[j]) {
                const int id = comp_to_id[find(j)];
                if (best == radar::detection::kNoise || id < best) best = id;
            }
        label[i] = best;
    }
    return label;
}

namespace {

double rect_iou(const detection::DetectionBox& a, const detection::DetectionBox& b) {
    const double ar0 = a.center_row - a.size_cells / 2.0, ar1 = a.center_row + a.size_cells / 2.0;
    const double ac0 = a.center_col - a.size_cells / 2.0, ac1 = a.center_col + a.size_cells / 2.0;
    const double br0 = b.center_row - b.size_cells / 2.0, br1 = b.center_row + b.size_cells / 2.0;
    const double bc0 = b.center_col - b.size_cells / 2.0, bc1 = b.center_col + b.size_cells / 2.0;
    const double ih = std::max(0.0, std::min(ar1, br1) - std::max(ar0, br0));
    const double iw = std::max(0.0, std::min(ac1, bc1) - std::max(ac0, bc0));
    const double inter = ih * iw;
    const double a_area = std::max(0.0, ar1 - ar0) * std::max(0.0, ac1 - ac0);
    const double b_area = std::max(0.0, br1 - br0) * std::max(0.0, bc1 - bc0);
    const double uni = a_area + b_area - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// Greedy matching of one scene's detections (given in confidence-descending
// order) against its truths; returns the TP count.
int greedy_tp(const std::vector<detection::DetectionBox>& dets,
              const std::vector<detection::DetectionBox>& truths, double thr) {
    std::vector<bool> used(truths.size(), false);
    int tp = 0;
    for (const auto& d : dets) {
        int best = -1;
        double best_iou = thr;
        for (size_t t = 0; t < truths.size(); ++t) {
            if (used[t] || truths[t].cls != d.cls) continue;
            const double v = rect_iou(d, truths[t]);
            if (v > best_iou) {  // strict: IoU must exceed thr; ties keep lowest t
                best_iou = v;
                best = static_cast<int>(t);
            }
        }
        if (best >= 0) {
            used[best] = true;
            ++tp;
        }
    }
    return tp;
}

}  // namespace

std::optional<double> brute_ap(const std::vector<detection::SceneBox>& dets,
                               const std::vector<detection::SceneBox>& truths,
                               double iou_threshold) {
    if (truths.empty()) return std::nullopt;
    const double npos = static_cast<double>(truths.size());

    std::map<std::string, std::vector<detection::DetectionBox>> truth_by_scene;
    for (const auto& t : truths) truth_by_scene[t.scene_id].push_back(t.box);

    std::vector<double> cuts;
    for (const auto& d : dets) cuts.push_back(d.box.confidence);
    std::sort(cuts.begin(), cuts.end(), std::greater<>());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<std::pair<double, double>> pr;  // (recall, precision)
    for (double cut : cuts) {
        std::map<std::string, std::vector<detection::DetectionBox>> kept;
        int n_kept = 0;
        // keep confidence-descending order within each scene
        std::vector<const detection::SceneBox*> ranked;
        for (const auto& d : dets)
            if (d.box.confidence >= cut) ranked.push_back(&d);
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
            return a->box.confidence > b->box.confidence;
        });
        for (const auto* d : ranked) {
            kept[d->scene_id].push_back(d->box);
            ++n_kept;
        }
        int tp = 0;
        for (auto& [scene, boxes] : kept) {
            auto it = truth_by_scene.find(scene);
            tp += greedy_tp(boxes, it == truth_by_scene.end()
                                       ? std::vector<detection::DetectionBox>{}
                                       : it->second,
                            iou_threshold);
        }
        const double recall = tp / npos;
        const double precision = n_kept > 0 ? static_cast<double>(tp) / n_kept : 1.0;
        pr.emplace_back(recall, precision);
    }

    std::sort(pr.begin(), pr.end());
    // right-to-left precision envelope, then area under the recall steps
    for (int i = static_cast<int>(pr.size()) - 2; i >= 0; --i)
        pr[i].second = std::max(pr[i].second, pr[i + 1].second);
    double ap = 0.0, prev_recall = 0.0;
    for (const auto& [r, p] : pr) {
        if (r > prev_recall) ap += (r - prev_recall) * p;
        prev_recall = std::max(prev_recall, r);
    }
    return ap;
}

double ref_bilinear(const std::vector<float>& v, int rows, int cols, double r, double c) {
    r = std::clamp(r, 0.0, static_cast<double>(rows - 1));
    c = std::clamp(c, 0.0, static_cast<double>(cols - 1));
    const int r0 = std::min(static_cast<int>(r), rows - 1);
    const int c0 = std::min(static_cast<int>(c), cols - 1);
    const int r1 = std::min(r0 + 1, rows - 1);
    const int c1 = std::min(c0 + 1, cols - 1);
    const double fr = r - r0, fc = c - c0;
    auto at = [&](int rr, int cc) { return static_cast<double>(v[static_cast<size_t>(rr) * cols + cc]); };
    return (1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c1)) +
           fr * ((1 - fc) * at(r1, c0) + fc * at(r1, c1));
}

}  // namespace oracles
