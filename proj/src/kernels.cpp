#include "radar/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "radar/errors.hpp"

namespace radar::kernels {

void init_threads_from_env() {
    const char* s = std::getenv("RADAR_PERCEIVE_THREADS");
    if (!s || !*s) return;
    int n = std::atoi(s);
    if (n > 0) {
        omp_set_dynamic(0);
        omp_set_num_threads(n);
    }
}

// ---- FFT --------------------------------------------------------------------

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Twiddle table w[j] = exp(-2*pi*i*j/n), each entry computed directly from its
// angle so the table is identical regardless of evaluation order.
std::vector<std::complex<double>> twiddles(int n) {
    std::vector<std::complex<double>> w(n);
    const double step = -2.0 * M_PI / static_cast<double>(n);
    for (int j = 0; j < n; ++j) w[j] = std::polar(1.0, step * j);
    return w;
}

void fft_pow2(std::vector<std::complex<double>>& a) {
    const int n = static_cast<int>(a.size());
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto w = twiddles(n);
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len >> 1;
        const int tstep = n / len;
        for (int i = 0; i < n; i += len) {
            for (int j = 0; j < half; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + half] * w[j * tstep];
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

}  // namespace

void fft_power(const float* x, int n, double* power) {
    if (n <= 0) throw InvalidInputError("fft_power: length must be positive");
    if (is_pow2(n)) {
        std::vector<std::complex<double>> a(n);
        for (int i = 0; i < n; ++i) a[i] = std::complex<double>(x[i], 0.0);
        fft_pow2(a);
        for (int j = 0; j < n; ++j) power[j] = std::norm(a[j]);
        return;
    }
    // direct DFT for non power-of-two lengths
    const auto w = twiddles(n);
    for (int j = 0; j < n; ++j) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
            const auto& tw = w[static_cast<int>((static_cast<int64_t>(j) * t) % n)];
            re += x[t] * tw.real();
            im += x[t] * tw.imag();
        }
        power[j] = re * re + im * im;
    }
}

namespace {

void fft_power_one_row(const float* x, int n, int n_keep, float* out) {
    std::vector<double> p(n);
    fft_power(x, n, p.data());
    for (int j = 0; j < n_keep; ++j) out[j] = static_cast<float>(p[j]);
}

}  // namespace

void fft_power_rows(const float* x, int rows, int n, int n_keep, float* out) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
        fft_power_one_row(x + static_cast<int64_t>(r) * n, n, n_keep,
                          out + static_cast<int64_t>(r) * n_keep);
}

void fft_power_rows_serial(const float* x, int rows, int n, int n_keep, float* out) {
    for (int r = 0; r < rows; ++r)
        fft_power_one_row(x + static_cast<int64_t>(r) * n, n, n_keep,
                          out + static_cast<int64_t>(r) * n_keep);
}

// ---- Convolution --------------------------------------------------------------
//
// Forward and the parameter gradient share one im2col layout: patch row
// (i,j) gathers the receptive field of that output position as a contiguous
// (d,u,v) vector of length D*kh*kw — the same order the weights of one
// filter are stored in. Both kernels then reduce along that long axis with
// unit-stride loads, which vectorises far better than walking the (often
// very short) output rows. The input gradient instead transposes the weight
// and output-gradient tables to put the filter index innermost. The parallel
// and serial entry points run the same builders and per-channel workers, so
// they compute identical floats; only the omp pragmas differ.

namespace {

// The patch layout only pays off once the receptive field is at least as
// long as an output row; below that (early layers: few channels, wide maps)
// sweeping output rows vectorises better and skips the gather entirely. Both
// entry points of a kernel share this choice, so the twins stay bitwise
// equal.
inline bool patch_path(int len, int OW) { return len >= OW; }

inline void conv_fwd_one_row(const float* x, int D, int H, int W, const float* w,
                             const float* bias, int kh, int kw, int stride, int k, int i,
                             int OW, float* orow) {
    const float b = bias ? bias[k] : 0.0f;
    for (int j = 0; j < OW; ++j) orow[j] = b;
    for (int d = 0; d < D; ++d) {
        for (int u = 0; u < kh; ++u) {
            const float* xrow = x + (static_cast<int64_t>(d) * H + (i * stride + u)) * W;
            const float* wrow = w + ((static_cast<int64_t>(k) * D + d) * kh + u) * kw;
            for (int v = 0; v < kw; ++v) {
                const float wv = wrow[v];
                if (stride == 1) {
                    const float* xs = xrow + v;
#pragma omp simd
                    for (int j = 0; j < OW; ++j) orow[j] += wv * xs[j];
                } else {
                    for (int j = 0; j < OW; ++j) orow[j] += wv * xrow[j * stride + v];
                }
            }
        }
    }
}

inline void conv_bwd_params_one_filter_rows(const float* dout, int OH, int OW, const float* x,
                                            int D, int H, int W, int kh, int kw, int stride,
                                            int k, float* dwk, float* dbk) {
    const float* dbase = dout + static_cast<int64_t>(k) * OH * OW;
    double db = 0.0;
    for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) db += dbase[static_cast<int64_t>(i) * OW + j];
    *dbk = static_cast<float>(db);
    for (int d = 0; d < D; ++d) {
        for (int u = 0; u < kh; ++u) {
            for (int v = 0; v < kw; ++v) {
                float acc = 0.0f;
                for (int i = 0; i < OH; ++i) {
                    const float* drow = dbase + static_cast<int64_t>(i) * OW;
                    const float* xrow =
                        x + (static_cast<int64_t>(d) * H + (i * stride + u)) * W + v;
                    if (stride == 1) {
                        float s = 0.0f;
#pragma omp simd reduction(+ : s)
                        for (int j = 0; j < OW; ++j) s += drow[j] * xrow[j];
                        acc += s;
                    } else {
                        for (int j = 0; j < OW; ++j) acc += drow[j] * xrow[j * stride];
                    }
                }
                dwk[(static_cast<int64_t>(d) * kh + u) * kw + v] = acc;
            }
        }
    }
}

inline void build_patches(const float* x, int D, int H, int W, int kh, int kw, int stride,
                          int OH, int OW, float* patches) {
    float* row = patches;
    for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j)
            for (int d = 0; d < D; ++d)
                for (int u = 0; u < kh; ++u) {
                    const float* src =
                        x + (static_cast<int64_t>(d) * H + i * stride + u) * W + j * stride;
                    for (int v = 0; v < kw; ++v) *row++ = src[v];
                }
}

// a[K][n] -> aT[n][K]
inline void transpose_k_inner(const float* a, int K, int n, float* aT) {
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < n; ++p)
            aT[static_cast<int64_t>(p) * K + k] = a[static_cast<int64_t>(k) * n + p];
}

inline void conv_fwd_one_filter(const float* patches, int n_pos, int len, const float* wk,
                                float b, float* outk) {
    for (int p = 0; p < n_pos; ++p) {
        const float* row = patches + static_cast<int64_t>(p) * len;
        float s = 0.0f;
#pragma omp simd reduction(+ : s)
        for (int t = 0; t < len; ++t) s += wk[t] * row[t];
        outk[p] = b + s;
    }
}

// dx[d][p][q] = sum over (u,v) in range of w[k][d][u][v] * dout[k][p-u][q-v],
// reduced over the (contiguous, transposed) filter axis.
inline void conv_bwd_input_one_row(const float* doutT, const float* wT, int K, int OH, int OW,
                                   int kh, int kw, int d, int p, int W, float* dxrow) {
    for (int q = 0; q < W; ++q) {
        float acc = 0.0f;
        for (int u = 0; u < kh; ++u) {
            const int i = p - u;
            if (i < 0 || i >= OH) continue;
            for (int v = 0; v < kw; ++v) {
                const int j = q - v;
                if (j < 0 || j >= OW) continue;
                const float* wrow = wT + ((static_cast<int64_t>(d) * kh + u) * kw + v) * K;
                const float* drow = doutT + (static_cast<int64_t>(i) * OW + j) * K;
                float s = 0.0f;
#pragma omp simd reduction(+ : s)
                for (int k = 0; k < K; ++k) s += wrow[k] * drow[k];
                acc += s;
            }
        }
        dxrow[q] = acc;
    }
}

// Strided twin of the above; only tests and non-default stacks take this
// path, so clarity wins over speed here.
inline void conv_bwd_input_one_row_strided(const float* dout, int K, int OH, int OW,
                                           const float* w, int D, int kh, int kw, int stride,
                                           int d, int p, int W, float* dxrow) {
    for (int q = 0; q < W; ++q) dxrow[q] = 0.0f;
    for (int k = 0; k < K; ++k) {
        for (int u = 0; u < kh; ++u) {
            const int pu = p - u;
            if (pu < 0 || pu % stride != 0) continue;
            const int i = pu / stride;
            if (i >= OH) continue;
            const float* drow = dout + (static_cast<int64_t>(k) * OH + i) * OW;
            const float* wrow = w + ((static_cast<int64_t>(k) * D + d) * kh + u) * kw;
            for (int q = 0; q < W; ++q) {
                for (int v = 0; v < kw; ++v) {
                    if (q - v < 0 || (q - v) % stride != 0) continue;
                    const int j = (q - v) / stride;
                    if (j >= OW) continue;
                    dxrow[q] += wrow[v] * drow[j];
                }
            }
        }
    }
}

inline void conv_bwd_params_one_filter(const float* dout, int n_pos, const float* patches,
                                       int len, int k, float* dwk, float* dbk) {
    const float* dbase = dout + static_cast<int64_t>(k) * n_pos;
    double db = 0.0;
    for (int p = 0; p < n_pos; ++p) db += dbase[p];
    *dbk = static_cast<float>(db);
    for (int t = 0; t < len; ++t) dwk[t] = 0.0f;
    for (int p = 0; p < n_pos; ++p) {
        const float g = dbase[p];
        const float* row = patches + static_cast<int64_t>(p) * len;
#pragma omp simd
        for (int t = 0; t < len; ++t) dwk[t] += g * row[t];
    }
}

}  // namespace

void conv2d_forward(const float* x, int D, int H, int W, const float* w, const float* bias,
                    int K, int kh, int kw, int stride, float* out) {
    const int OH = (H - kh) / stride + 1;
    const int OW = (W - kw) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: kernel larger than input");
    const int len = D * kh * kw, n = OH * OW;
    if (!patch_path(len, OW)) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < OH; ++i)
                conv_fwd_one_row(x, D, H, W, w, bias, kh, kw, stride, k, i, OW,
                                 out + (static_cast<int64_t>(k) * OH + i) * OW);
        return;
    }
    std::vector<float> patches(static_cast<size_t>(n) * len);
    build_patches(x, D, H, W, kh, kw, stride, OH, OW, patches.data());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k)
        conv_fwd_one_filter(patches.data(), n, len, w + static_cast<int64_t>(k) * len,
                            bias ? bias[k] : 0.0f, out + static_cast<int64_t>(k) * n);
}

void conv2d_forward_serial(const float* x, int D, int H, int W, const float* w,
                           const float* bias, int K, int kh, int kw, int stride, float* out) {
    const int OH = (H - kh) / stride + 1;
    const int OW = (W - kw) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: kernel larger than input");
    const int len = D * kh * kw, n = OH * OW;
    if (!patch_path(len, OW)) {
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < OH; ++i)
                conv_fwd_one_row(x, D, H, W, w, bias, kh, kw, stride, k, i, OW,
                                 out + (static_cast<int64_t>(k) * OH + i) * OW);
        return;
    }
    std::vector<float> patches(static_cast<size_t>(n) * len);
    build_patches(x, D, H, W, kh, kw, stride, OH, OW, patches.data());
    for (int k = 0; k < K; ++k)
        conv_fwd_one_filter(patches.data(), n, len, w + static_cast<int64_t>(k) * len,
                            bias ? bias[k] : 0.0f, out + static_cast<int64_t>(k) * n);
}

void conv2d_backward_input(const float* dout, int K, int OH, int OW, const float* w, int D,
                           int kh, int kw, int stride, float* dx, int H, int W) {
    if (stride == 1) {
        std::vector<float> wT(static_cast<size_t>(D) * kh * kw * K);
        std::vector<float> doutT(static_cast<size_t>(OH) * OW * K);
        transpose_k_inner(w, K, D * kh * kw, wT.data());
        transpose_k_inner(dout, K, OH * OW, doutT.data());
#pragma omp parallel for collapse(2) schedule(static)
        for (int d = 0; d < D; ++d)
            for (int p = 0; p < H; ++p)
                conv_bwd_input_one_row(doutT.data(), wT.data(), K, OH, OW, kh, kw, d, p, W,
                                       dx + (static_cast<int64_t>(d) * H + p) * W);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int d = 0; d < D; ++d)
        for (int p = 0; p < H; ++p)
            conv_bwd_input_one_row_strided(dout, K, OH, OW, w, D, kh, kw, stride, d, p, W,
                                           dx + (static_cast<int64_t>(d) * H + p) * W);
}

void conv2d_backward_input_serial(const float* dout, int K, int OH, int OW, const float* w,
                                  int D, int kh, int kw, int stride, float* dx, int H, int W) {
    if (stride == 1) {
        std::vector<float> wT(static_cast<size_t>(D) * kh * kw * K);
        std::vector<float> doutT(static_cast<size_t>(OH) * OW * K);
        transpose_k_inner(w, K, D * kh * kw, wT.data());
        transpose_k_inner(dout, K, OH * OW, doutT.data());
        for (int d = 0; d < D; ++d)
            for (int p = 0; p < H; ++p)
                conv_bwd_input_one_row(doutT.data(), wT.data(), K, OH, OW, kh, kw, d, p, W,
                                       dx + (static_cast<int64_t>(d) * H + p) * W);
        return;
    }
    for (int d = 0; d < D; ++d)
        for (int p = 0; p < H; ++p)
            conv_bwd_input_one_row_strided(dout, K, OH, OW, w, D, kh, kw, stride, d, p, W,
                                           dx + (static_cast<int64_t>(d) * H + p) * W);
}

void conv2d_backward_params(const float* dout, int K, int OH, int OW, const float* x, int D,
                            int H, int W, int kh, int kw, int stride, float* dw, float* db) {
    const int len = D * kh * kw, n = OH * OW;
    if (!patch_path(len, OW)) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < K; ++k)
            conv_bwd_params_one_filter_rows(dout, OH, OW, x, D, H, W, kh, kw, stride, k,
                                            dw + static_cast<int64_t>(k) * len, db + k);
        return;
    }
    std::vector<float> patches(static_cast<size_t>(n) * len);
    build_patches(x, D, H, W, kh, kw, stride, OH, OW, patches.data());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k)
        conv_bwd_params_one_filter(dout, n, patches.data(), len, k,
                                   dw + static_cast<int64_t>(k) * len, db + k);
}

void conv2d_backward_params_serial(const float* dout, int K, int OH, int OW, const float* x,
                                   int D, int H, int W, int kh, int kw, int stride, float* dw,
                                   float* db) {
    const int len = D * kh * kw, n = OH * OW;
    if (!patch_path(len, OW)) {
        for (int k = 0; k < K; ++k)
            conv_bwd_params_one_filter_rows(dout, OH, OW, x, D, H, W, kh, kw, stride, k,
                                            dw + static_cast<int64_t>(k) * len, db + k);
        return;
    }
    std::vector<float> patches(static_cast<size_t>(n) * len);
    build_patches(x, D, H, W, kh, kw, stride, OH, OW, patches.data());
    for (int k = 0; k < K; ++k)
        conv_bwd_params_one_filter(dout, n, patches.data(), len, k,
                                   dw + static_cast<int64_t>(k) * len, db + k);
}

// ---- Max pooling ----------------------------------------------------------------

namespace {

inline void maxpool_one_row(const float* x, int H, int W, int window, int stride, int c, int i,
                            int OW, float* orow, int* arow) {
    for (int j = 0; j < OW; ++j) {
        const int r0 = i * stride, c0 = j * stride;
        float best = x[(static_cast<int64_t>(c) * H + r0) * W + c0];
        int64_t besti = (static_cast<int64_t>(c) * H + r0) * W + c0;
        for (int u = 0; u < window; ++u) {
            const float* xrow = x + (static_cast<int64_t>(c) * H + (r0 + u)) * W + c0;
            for (int v = 0; v < window; ++v) {
                if (xrow[v] > best) {
                    best = xrow[v];
                    besti = (static_cast<int64_t>(c) * H + (r0 + u)) * W + (c0 + v);
                }
            }
        }
        orow[j] = best;
        arow[j] = static_cast<int>(besti);
    }
}

}  // namespace

void maxpool_forward(const float* x, int C, int H, int W, int window, int stride, float* out,
                     int* argmax) {
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("maxpool: window larger than input");
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < OH; ++i)
            maxpool_one_row(x, H, W, window, stride, c, i, OW,
                            out + (static_cast<int64_t>(c) * OH + i) * OW,
                            argmax + (static_cast<int64_t>(c) * OH + i) * OW);
}

void maxpool_forward_serial(const float* x, int C, int H, int W, int window, int stride,
                            float* out, int* argmax) {
    const int OH = (H - window) / stride + 1;
    const int OW = (W - window) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("maxpool: window larger than input");
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < OH; ++i)
            maxpool_one_row(x, H, W, window, stride, c, i, OW,
                            out + (static_cast<int64_t>(c) * OH + i) * OW,
                            argmax + (static_cast<int64_t>(c) * OH + i) * OW);
}

void maxpool_backward(const float* dout, int C, int OH, int OW, const int* argmax, float* dx,
                      int64_t dx_len) {
    std::memset(dx, 0, static_cast<size_t>(dx_len) * sizeof(float));
    const int64_t n = static_cast<int64_t>(C) * OH * OW;
    // Serial scatter: windows can overlap when stride < window, so a parallel
    // scatter would race. Pooling backward is a tiny fraction of a training
    // step; not worth an atomic.
    for (int64_t t = 0; t < n; ++t) dx[argmax[t]] += dout[t];
}

// ---- Summed-area table -------------------------------------------------------------

void summed_area(const float* v, int rows, int cols, double* sat) {
    const int stride = cols + 1;
    for (int c = 0; c <= cols; ++c) sat[c] = 0.0;
    // row-wise prefix sums (rows independent)
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        double* srow = sat + static_cast<int64_t>(r + 1) * stride;
        const float* vrow = v + static_cast<int64_t>(r) * cols;
        srow[0] = 0.0;
        for (int c = 0; c < cols; ++c) {
            acc += vrow[c];
            srow[c + 1] = acc;
        }
    }
    // column-wise accumulation (columns independent)
#pragma omp parallel for schedule(static)
    for (int c = 1; c <= cols; ++c) {
        double acc = 0.0;
        for (int r = 1; r <= rows; ++r) {
            acc += sat[static_cast<int64_t>(r) * stride + c];
            sat[static_cast<int64_t>(r) * stride + c] = acc;
        }
    }
}

// ---- Bilinear resize ------------------------------------------------------------------

namespace {

inline void resize_one_row(const float* src, int sr, int sc, int dr, int dc, int i,
                           float* drow) {
    // corner-aligned: source coordinate of output (i,j)
    const double ry = dr > 1 ? static_cast<double>(sr - 1) / (dr - 1) : 0.0;
    const double rx = dc > 1 ? static_cast<double>(sc - 1) / (dc - 1) : 0.0;
    const double sy = dr > 1 ? i * ry : 0.5 * (sr - 1);
    const int y0 = std::min(static_cast<int>(sy), sr - 1);
    const int y1 = std::min(y0 + 1, sr - 1);
    const double fy = sy - y0;
    const float* row0 = src + static_cast<int64_t>(y0) * sc;
    const float* row1 = src + static_cast<int64_t>(y1) * sc;
    for (int j = 0; j < dc; ++j) {
        const double sx = dc > 1 ? j * rx : 0.5 * (sc - 1);
        const int x0 = std::min(static_cast<int>(sx), sc - 1);
        const int x1 = std::min(x0 + 1, sc - 1);
        const double fx = sx - x0;
        const double top = row0[x0] + fx * (row0[x1] - row0[x0]);
        const double bot = row1[x0] + fx * (row1[x1] - row1[x0]);
        drow[j] = static_cast<float>(top + fy * (bot - top));
    }
}

}  // namespace

void resize_bilinear(const float* src, int sr, int sc, float* dst, int dr, int dc) {
    if (sr <= 0 || sc <= 0 || dr <= 0 || dc <= 0)
        throw ShapeError("resize_bilinear: dimensions must be positive");
#pragma omp parallel for schedule(static)
    for (int i = 0; i < dr; ++i)
        resize_one_row(src, sr, sc, dr, dc, i, dst + static_cast<int64_t>(i) * dc);
}

void resize_bilinear_serial(const float* src, int sr, int sc, float* dst, int dr, int dc) {
    if (sr <= 0 || sc <= 0 || dr <= 0 || dc <= 0)
        throw ShapeError("resize_bilinear: dimensions must be positive");
    for (int i = 0; i < dr; ++i)
        resize_one_row(src, sr, sc, dr, dc, i, dst + static_cast<int64_t>(i) * dc);
}

// ---- Pairwise squared distances -----------------------------------------------------------

namespace {

inline void pairwise_one_row(const double* x, int n, int d, int i, double* orow) {
    const double* xi = x + static_cast<int64_t>(i) * d;
    for (int j = 0; j < n; ++j) {
        const double* xj = x + static_cast<int64_t>(j) * d;
        double s = 0.0;
        for (int t = 0; t < d; ++t) {
            const double diff = xi[t] - xj[t];
            s += diff * diff;
        }
        orow[j] = s;
    }
}

}  // namespace

void pairwise_sqdist(const double* x, int n, int d, double* out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) pairwise_one_row(x, n, d, i, out + static_cast<int64_t>(i) * n);
}

void pairwise_sqdist_serial(const double* x, int n, int d, double* out) {
    for (int i = 0; i < n; ++i) pairwise_one_row(x, n, d, i, out + static_cast<int64_t>(i) * n);
}

}  // namespace radar::kernels
