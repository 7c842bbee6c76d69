#pragma once

#include <cstdint>
#include <vector>

namespace radar::kernels {

// Data-parallel inner loops shared by the imaging, network and detection
// modules. Each kernel has an OpenMP-parallel entry point and a *_serial
// twin with identical per-element arithmetic; the twins exist so tests can
// pin the parallel versions bitwise and the bench tool can compare them.
//
// Accumulation order inside one output element is fixed, so results do not
// depend on thread count.

// Caps OpenMP parallelism from RADAR_PERCEIVE_THREADS if set.
void init_threads_from_env();

// ---- FFT ----------------------------------------------------------------

// Full power spectrum |X_j|^2, j in [0, n). Radix-2 for powers of two,
// direct DFT otherwise; double precision throughout.
void fft_power(const float* x, int n, double* power);

// Batched over rows (one row per azimuth), writing the first n_keep bins of
// each row's power spectrum as float.
void fft_power_rows(const float* x, int rows, int n, int n_keep, float* out);
void fft_power_rows_serial(const float* x, int rows, int n, int n_keep, float* out);

// ---- 2-D convolution (valid cross-correlation) ---------------------------

// x: [D,H,W], w: [K,D,kh,kw], bias: [K] (may be null), out: [K,OH,OW]
// with OH = (H-kh)/stride + 1, OW = (W-kw)/stride + 1.
void conv2d_forward(const float* x, int D, int H, int W, const float* w, const float* bias,
                    int K, int kh, int kw, int stride, float* out);
void conv2d_forward_serial(const float* x, int D, int H, int W, const float* w,
                           const float* bias, int K, int kh, int kw, int stride, float* out);

// dx: [D,H,W] (overwritten), gather form so each input cell is summed in a
// fixed order.
void conv2d_backward_input(const float* dout, int K, int OH, int OW, const float* w, int D,
                           int kh, int kw, int stride, float* dx, int H, int W);
void conv2d_backward_input_serial(const float* dout, int K, int OH, int OW, const float* w,
                                  int D, int kh, int kw, int stride, float* dx, int H, int W);

// dw: [K,D,kh,kw], db: [K] (both overwritten).
void conv2d_backward_params(const float* dout, int K, int OH, int OW, const float* x, int D,
                            int H, int W, int kh, int kw, int stride, float* dw, float* db);
void conv2d_backward_params_serial(const float* dout, int K, int OH, int OW, const float* x,
                                   int D, int H, int W, int kh, int kw, int stride, float* dw,
                                   float* db);

// ---- Max pooling ----------------------------------------------------------

// out: [C,OH,OW]; argmax holds the flat index into x of each maximum
// (first-in-scan-order on ties).
void maxpool_forward(const float* x, int C, int H, int W, int window, int stride, float* out,
                     int* argmax);
void maxpool_forward_serial(const float* x, int C, int H, int W, int window, int stride,
                            float* out, int* argmax);
void maxpool_backward(const float* dout, int C, int OH, int OW, const int* argmax, float* dx,
                      int64_t dx_len);

// ---- Summed-area table -----------------------------------------------------

// sat has (rows+1)*(cols+1) doubles; sat[(r+1)*(cols+1)+(c+1)] = sum of the
// inclusive rectangle [0,r]x[0,c].
void summed_area(const float* v, int rows, int cols, double* sat);

inline double sat_rect_sum(const double* sat, int cols, int r0, int c0, int r1, int c1) {
    // half-open [r0,r1) x [c0,c1)
    const int stride = cols + 1;
    return sat[r1 * stride + c1] - sat[r0 * stride + c1] - sat[r1 * stride + c0] +
           sat[r0 * stride + c0];
}

// ---- Bilinear resize (corner-aligned) --------------------------------------

void resize_bilinear(const float* src, int sr, int sc, float* dst, int dr, int dc);
void resize_bilinear_serial(const float* src, int sr, int sc, float* dst, int dr, int dc);

// ---- Pairwise squared Euclidean distances ----------------------------------

// x: [n,d] doubles; out: [n,n] with out[i*n+j] = |x_i - x_j|^2.
void pairwise_sqdist(const double* x, int n, int d, double* out);
void pairwise_sqdist_serial(const double* x, int n, int d, double* out);

}  // namespace radar::kernels
