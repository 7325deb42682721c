// Benchmark the OpenMP kernels against the serial reference implementations
// and verify both produce identical results.

#include "speechmap/common.hpp"
#include "speechmap/kernels.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

std::vector<float> random_matrix(size_t n, sm::rng& r) {
    std::vector<float> v(n);
    for (auto& x : v) x = float(r.normal());
    return v;
}

struct timing {
    double serial_ms = 0.0;
    double parallel_ms = 0.0;
    bool identical = false;
};

void report(const char* name, const timing& t) {
    std::printf("%-16s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   identical %s\n",
                name, t.serial_ms, t.parallel_ms,
                t.parallel_ms > 0 ? t.serial_ms / t.parallel_ms : 0.0,
                t.identical ? "yes" : "NO");
}

template <class SerialFn, class ParallelFn>
timing run_pair(SerialFn serial_fn, ParallelFn parallel_fn, std::vector<float>& out_serial,
                std::vector<float>& out_parallel, int iters) {
    timing t;
    // warmup
    serial_fn();
    parallel_fn();
    auto t0 = clock_type::now();
    for (int i = 0; i < iters; ++i) serial_fn();
    t.serial_ms = ms_since(t0) / iters;
    t0 = clock_type::now();
    for (int i = 0; i < iters; ++i) parallel_fn();
    t.parallel_ms = ms_since(t0) / iters;
    t.identical = std::memcmp(out_serial.data(), out_parallel.data(),
                              out_serial.size() * sizeof(float)) == 0;
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    int iters = 20;
    if (argc > 1) iters = std::max(1, std::atoi(argv[1]));
    std::printf("threads: %d, iterations per kernel: %d\n\n", sm::kernels::num_threads(), iters);

    sm::rng r(42);

    {
        const int m = 256, k = 256, n = 256;
        auto a = random_matrix(size_t(m) * k, r);
        auto b = random_matrix(size_t(k) * n, r);
        std::vector<float> cs(size_t(m) * n), cp(size_t(m) * n);
        auto t = run_pair([&] { sm::kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n); },
                          [&] { sm::kernels::matmul(a.data(), b.data(), cp.data(), m, k, n); },
                          cs, cp, iters);
        report("matmul", t);
    }
    {
        const int m = 256, k = 256, n = 256;
        auto a = random_matrix(size_t(m) * k, r);
        auto b = random_matrix(size_t(n) * k, r);
        std::vector<float> cs(size_t(m) * n), cp(size_t(m) * n);
        auto t = run_pair([&] { sm::kernels::serial::matmul_a_bt(a.data(), b.data(), cs.data(), m, k, n); },
                          [&] { sm::kernels::matmul_a_bt(a.data(), b.data(), cp.data(), m, k, n); },
                          cs, cp, iters);
        report("matmul_a_bt", t);
    }
    {
        const int m = 256, k = 256, n = 256;
        auto a = random_matrix(size_t(m) * k, r);
        auto b = random_matrix(size_t(m) * n, r);
        std::vector<float> cs(size_t(k) * n), cp(size_t(k) * n);
        auto t = run_pair([&] { sm::kernels::serial::matmul_at_b(a.data(), b.data(), cs.data(), m, k, n); },
                          [&] { sm::kernels::matmul_at_b(a.data(), b.data(), cp.data(), m, k, n); },
                          cs, cp, iters);
        report("matmul_at_b", t);
    }
    {
        const int t_in = 2048, d_in = 64, d_out = 64, kernel = 6, stride = 2, pad = 2;
        const int t_out = (t_in + 2 * pad - kernel) / stride + 1;
        auto x = random_matrix(size_t(t_in) * d_in, r);
        auto w = random_matrix(size_t(d_out) * kernel * d_in, r);
        auto b = random_matrix(size_t(d_out), r);
        std::vector<float> ys(size_t(t_out) * d_out), yp(size_t(t_out) * d_out);
        auto t = run_pair(
            [&] {
                sm::kernels::serial::conv1d_fwd(x.data(), w.data(), b.data(), ys.data(),
                                                t_in, d_in, d_out, kernel, stride, pad, t_out);
            },
            [&] {
                sm::kernels::conv1d_fwd(x.data(), w.data(), b.data(), yp.data(),
                                        t_in, d_in, d_out, kernel, stride, pad, t_out);
            },
            ys, yp, iters);
        report("conv1d_fwd", t);
    }
    {
        const int t_in = 2048, d_in = 64, d_out = 64, kernel = 6, stride = 2, pad = 2;
        const int t_out = (t_in + 2 * pad - kernel) / stride + 1;
        auto dy = random_matrix(size_t(t_out) * d_out, r);
        auto w = random_matrix(size_t(d_out) * kernel * d_in, r);
        std::vector<float> dxs(size_t(t_in) * d_in, 0.0f), dxp(size_t(t_in) * d_in, 0.0f);
        auto t = run_pair(
            [&] {
                std::fill(dxs.begin(), dxs.end(), 0.0f);
                sm::kernels::serial::conv1d_bwd_x(dy.data(), w.data(), dxs.data(),
                                                  t_in, d_in, d_out, kernel, stride, pad, t_out);
            },
            [&] {
                std::fill(dxp.begin(), dxp.end(), 0.0f);
                sm::kernels::conv1d_bwd_x(dy.data(), w.data(), dxp.data(),
                                          t_in, d_in, d_out, kernel, stride, pad, t_out);
            },
            dxs, dxp, iters);
        report("conv1d_bwd_x", t);
    }
    return 0;
}
