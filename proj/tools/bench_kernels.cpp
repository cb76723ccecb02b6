// Compares the sequential path against the OpenMP task path on the training
// kernels and on a full train_step, and checks the results stay bit-equal.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "idr/adam.hpp"
#include "idr/kernels.hpp"
#include "idr/rng.hpp"
#include "idr/tensor.hpp"
#include "idr/unet.hpp"

using namespace idr;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::vector<float> random_buf(std::size_t n, RngStream& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

struct ConvCase {
    const char* label;
    kernels::Conv2dDims d;
};

// One pass over a conv case; returns seconds per call and fills `out`.
template <typename F>
double time_loop(int reps, F&& fn) {
    fn();  // warm
    const double t0 = now_s();
    for (int r = 0; r < reps; ++r) fn();
    return (now_s() - t0) / reps;
}

void bench_conv(const ConvCase& c, int nthreads) {
    RngStream rng(7, 1);
    const auto& d = c.d;
    const std::size_t in_n = static_cast<std::size_t>(d.n) * d.ci * d.h * d.w;
    const std::size_t out_n = static_cast<std::size_t>(d.n) * d.co * d.h * d.w;
    const std::size_t w_n = static_cast<std::size_t>(d.co) * d.ci * d.k * d.k;
    auto in = random_buf(in_n, rng);
    auto w = random_buf(w_n, rng);
    auto b = random_buf(static_cast<std::size_t>(d.co), rng);
    auto dout = random_buf(out_n, rng);
    std::vector<float> out(out_n), out_ref(out_n);
    std::vector<float> din(in_n), dw(w_n), db(static_cast<std::size_t>(d.co));

    const double flops_fwd = 2.0 * d.n * d.co * d.ci * d.h * d.w * d.k * d.k;
    const int reps = 20;

    kernels::set_threads(1);
    kernels::conv2d_forward(in.data(), w.data(), b.data(), out_ref.data(), d);
    const double t_seq = time_loop(reps, [&] { kernels::conv2d_forward(in.data(), w.data(), b.data(), out.data(), d); });

    kernels::set_threads(nthreads);
    const double t_par = time_loop(reps, [&] { kernels::conv2d_forward(in.data(), w.data(), b.data(), out.data(), d); });
    const bool same = std::memcmp(out.data(), out_ref.data(), out_n * sizeof(float)) == 0;

    std::fill(din.begin(), din.end(), 0.f);
    const double t_bi = time_loop(reps, [&] {
        std::fill(din.begin(), din.end(), 0.f);
        kernels::conv2d_backward_input(dout.data(), w.data(), din.data(), d);
    });
    const double t_bp = time_loop(reps, [&] {
        std::fill(dw.begin(), dw.end(), 0.f);
        std::fill(db.begin(), db.end(), 0.f);
        kernels::conv2d_backward_params(dout.data(), in.data(), dw.data(), db.data(), d);
    });
    kernels::set_threads(1);

    std::printf("%-22s fwd seq %7.3f ms  omp %7.3f ms  x%.2f  %s  %6.2f GFLOP/s\n", c.label,
                1e3 * t_seq, 1e3 * t_par, t_seq / t_par, same ? "bit-equal" : "MISMATCH",
                flops_fwd / t_seq / 1e9);
    std::printf("%-22s bwd-in %6.3f ms  bwd-par %6.3f ms\n", "", 1e3 * t_bi, 1e3 * t_bp);
}

double bench_train_step(int nthreads, int iters, std::vector<float>* final_params) {
    ModelConfig cfg;
    cfg.init_seed = 11;
    UNet net = UNet::build(cfg);
    AdamState<float> state;

    RngStream rng(13, 2);
    Tensor<float> x({4, cfg.in_channels, 48, 48});
    Tensor<float> y({4, cfg.in_channels, 48, 48});
    for (auto& v : x.v) v = static_cast<float>(rng.uniform());
    for (auto& v : y.v) v = static_cast<float>(rng.uniform());

    kernels::set_threads(nthreads);
    net.train_step(state, x, y);  // warm + allocate moments
    const double t0 = now_s();
    for (int i = 0; i < iters; ++i) net.train_step(state, x, y);
    const double dt = now_s() - t0;
    kernels::set_threads(1);

    if (final_params) {
        final_params->clear();
        for (const auto& p : net.params) final_params->insert(final_params->end(), p.v.begin(), p.v.end());
    }
    return iters / dt;
}

}  // namespace

int main(int argc, char** argv) {
    int nthreads = 0;  // auto
    int iters = 60;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) nthreads = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--iters") == 0 && i + 1 < argc) iters = std::atoi(argv[++i]);
    }
    kernels::set_threads(nthreads);
    const int resolved = kernels::threads();
    std::printf("worker threads: %d (sequential baseline vs %d-thread OpenMP path)\n\n", resolved, resolved);

    const std::vector<ConvCase> cases = {
        {"conv 4x8x48x48 ->8", {4, 8, 48, 48, 8, 3}},
        {"conv 4x16x24x24 ->16", {4, 16, 24, 24, 16, 3}},
        {"conv 4x32x12x12 ->32", {4, 32, 12, 12, 32, 3}},
        {"conv 1x1x128x128 ->8", {1, 1, 128, 128, 8, 3}},
    };
    for (const auto& c : cases) bench_conv(c, resolved);

    std::printf("\ntrain_step (batch 4, patch 48, 3 levels, base 8):\n");
    std::vector<float> p_seq, p_par;
    const double ips_seq = bench_train_step(1, iters, &p_seq);
    const double ips_par = bench_train_step(resolved, iters, &p_par);
    const bool same = p_seq.size() == p_par.size() &&
                      std::memcmp(p_seq.data(), p_par.data(), p_seq.size() * sizeof(float)) == 0;
    std::printf("  sequential %.1f it/s   %d-thread %.1f it/s   params %s\n", ips_seq, resolved, ips_par,
                same ? "bit-equal" : "MISMATCH");
    return same ? 0 : 1;
}
