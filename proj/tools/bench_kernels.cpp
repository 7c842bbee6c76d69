// Times every kernel that ships a serial twin against its OpenMP entry point
// and checks the two produce bitwise-identical output. Shapes mirror the real
// workloads: the classifier's conv layers on an 88x88 chip, scene-sized CFAR
// and imaging grids, and a t-SNE-sized distance matrix.
//
// Usage: bench_kernels [reps]   (default 5; best-of-reps is reported)

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "radar/detection.hpp"
#include "radar/image.hpp"
#include "radar/imaging.hpp"
#include "radar/kernels.hpp"
#include "radar/rng.hpp"

using namespace radar;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.next_float() - 0.5f;
    return v;
}

struct Row {
    std::string name;
    double serial_ms = 0.0, parallel_ms = 0.0;
    bool match = false;
};

double best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best * 1e3;
}

template <typename T>
Row bench(const std::string& name, int reps, std::vector<T>& out_par, std::vector<T>& out_ser,
          const std::function<void()>& parallel, const std::function<void()>& serial) {
    Row row;
    row.name = name;
    row.parallel_ms = best_of(reps, parallel);
    row.serial_ms = best_of(reps, serial);
    row.match = out_par == out_ser;
    return row;
}

}  // namespace

int main(int argc, char** argv) {
    kernels::init_threads_from_env();
    const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    Rng rng(20260817);
    std::vector<Row> rows;

    {  // range FFT over a full frame
        const int n_az = 400, n = 2048, keep = n / 2;
        auto x = random_vec(static_cast<size_t>(n_az) * n, rng);
        std::vector<float> a(static_cast<size_t>(n_az) * keep), b(a.size());
        rows.push_back(bench<float>(
            "fft_power_rows 400x2048", reps, a, b,
            [&] { kernels::fft_power_rows(x.data(), n_az, n, keep, a.data()); },
            [&] { kernels::fft_power_rows_serial(x.data(), n_az, n, keep, b.data()); }));
    }

    // the three chip-classifier conv layers that dominate training
    struct ConvShape {
        const char* name;
        int D, H, W, K, k;
    };
    for (const ConvShape s : {ConvShape{"conv2d 1x88x88 -> 16 (k5)", 1, 88, 88, 16, 5},
                              ConvShape{"conv2d 16x42x42 -> 32 (k5)", 16, 42, 42, 32, 5},
                              ConvShape{"conv2d 32x19x19 -> 64 (k6)", 32, 19, 19, 64, 6}}) {
        const int OH = s.H - s.k + 1, OW = s.W - s.k + 1;
        auto x = random_vec(static_cast<size_t>(s.D) * s.H * s.W, rng);
        auto w = random_vec(static_cast<size_t>(s.K) * s.D * s.k * s.k, rng);
        auto bias = random_vec(static_cast<size_t>(s.K), rng);
        auto dout = random_vec(static_cast<size_t>(s.K) * OH * OW, rng);

        std::vector<float> fa(dout.size()), fb(dout.size());
        rows.push_back(bench<float>(
            std::string(s.name) + " fwd", reps, fa, fb,
            [&] {
                kernels::conv2d_forward(x.data(), s.D, s.H, s.W, w.data(), bias.data(), s.K,
                                        s.k, s.k, 1, fa.data());
            },
            [&] {
                kernels::conv2d_forward_serial(x.data(), s.D, s.H, s.W, w.data(), bias.data(),
                                               s.K, s.k, s.k, 1, fb.data());
            }));

        std::vector<float> dxa(x.size()), dxb(x.size());
        rows.push_back(bench<float>(
            std::string(s.name) + " bwd dx", reps, dxa, dxb,
            [&] {
                kernels::conv2d_backward_input(dout.data(), s.K, OH, OW, w.data(), s.D, s.k,
                                               s.k, 1, dxa.data(), s.H, s.W);
            },
            [&] {
                kernels::conv2d_backward_input_serial(dout.data(), s.K, OH, OW, w.data(), s.D,
                                                      s.k, s.k, 1, dxb.data(), s.H, s.W);
            }));

        std::vector<float> dwa(w.size()), dwb(w.size()), dba(bias.size()), dbb(bias.size());
        rows.push_back(bench<float>(
            std::string(s.name) + " bwd dw", reps, dwa, dwb,
            [&] {
                kernels::conv2d_backward_params(dout.data(), s.K, OH, OW, x.data(), s.D, s.H,
                                                s.W, s.k, s.k, 1, dwa.data(), dba.data());
            },
            [&] {
                kernels::conv2d_backward_params_serial(dout.data(), s.K, OH, OW, x.data(),
                                                       s.D, s.H, s.W, s.k, s.k, 1, dwb.data(),
                                                       dbb.data());
            }));
    }

    {  // pooling after the first conv layer
        const int C = 16, H = 84, W = 84, win = 2;
        const int OH = (H - win) / win + 1, OW = (W - win) / win + 1;
        auto x = random_vec(static_cast<size_t>(C) * H * W, rng);
        std::vector<float> a(static_cast<size_t>(C) * OH * OW), b(a.size());
        std::vector<int> arg_a(a.size()), arg_b(a.size());
        rows.push_back(bench<float>(
            "maxpool 16x84x84 w2", reps, a, b,
            [&] {
                kernels::maxpool_forward(x.data(), C, H, W, win, win, a.data(), arg_a.data());
            },
            [&] {
                kernels::maxpool_forward_serial(x.data(), C, H, W, win, win, b.data(),
                                                arg_b.data());
            }));
    }

    {  // cell-averaging CFAR over a mid-sized scene, summed-area vs direct
        CartesianImage img;
        img.rows = 800;
        img.cols = 667;
        img.cell_size = 0.0075;
        img.values.resize(static_cast<size_t>(img.rows) * img.cols);
        for (auto& v : img.values) v = rng.next_float();
        detection::CfarConfig cfg;
        cfg.mode = detection::CfarConfig::Mode::CellAveraging;
        detection::Mask ma, mb;
        rows.push_back(bench<uint8_t>(
            "ca-cfar 800x667 (sat|direct)", reps, ma.on, mb.on,
            [&] { ma = detection::cfar_detect(img, cfg); },
            [&] { mb = detection::cfar_detect_serial(img, cfg); }));
    }

    {  // polar resampling of a full frame
        PolarImage img;
        img.num_azimuths = 400;
        img.num_range_bins = 800;
        img.params.azimuth_step_deg = 0.05;
        img.power.resize(static_cast<size_t>(img.num_azimuths) * img.num_range_bins);
        for (auto& v : img.power) v = rng.next_float();
        CartesianImage a, b;
        rows.push_back(bench<float>(
            "polar_to_cartesian 400x800", reps, a.values, b.values,
            [&] { a = imaging::polar_to_cartesian(img, 0.0075); },
            [&] { b = imaging::polar_to_cartesian_serial(img, 0.0075); }));
    }

    {  // chip resize, detection window -> network input
        const int sr = 275, sc = 275, dr = 88, dc = 88;
        auto src = random_vec(static_cast<size_t>(sr) * sc, rng);
        std::vector<float> a(static_cast<size_t>(dr) * dc), b(a.size());
        rows.push_back(bench<float>(
            "resize 275x275 -> 88x88", reps, a, b,
            [&] { kernels::resize_bilinear(src.data(), sr, sc, a.data(), dr, dc); },
            [&] { kernels::resize_bilinear_serial(src.data(), sr, sc, b.data(), dr, dc); }));
    }

    {  // t-SNE-sized pairwise distances
        const int n = 720, d = 64;
        std::vector<double> x(static_cast<size_t>(n) * d);
        for (auto& v : x) v = rng.next_double() - 0.5;
        std::vector<double> a(static_cast<size_t>(n) * n), b(a.size());
        rows.push_back(bench<double>(
            "pairwise_sqdist 720x64", reps, a, b,
            [&] { kernels::pairwise_sqdist(x.data(), n, d, a.data()); },
            [&] { kernels::pairwise_sqdist_serial(x.data(), n, d, b.data()); }));
    }

    std::printf("threads: %d, reps: %d (best shown)\n\n", omp_get_max_threads(), reps);
    std::printf("%-34s %12s %12s %9s %7s\n", "kernel", "serial ms", "parallel ms", "speedup",
                "match");
    bool all_match = true;
    for (const auto& r : rows) {
        std::printf("%-34s %12.3f %12.3f %8.2fx %7s\n", r.name.c_str(), r.serial_ms,
                    r.parallel_ms, r.serial_ms / r.parallel_ms, r.match ? "yes" : "NO");
        all_match = all_match && r.match;
    }
    if (!all_match) {
        std::fprintf(stderr, "\nserial/parallel outputs differ\n");
        return 1;
    }
    return 0;
}
