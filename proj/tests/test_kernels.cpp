#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "speechmap/common.hpp"
#include "speechmap/kernels.hpp"

#include <vector>

using namespace sm;

namespace {

std::vector<float> random_vec(size_t n, rng& r) {
    std::vector<float> v(n);
    for (auto& x : v) x = float(r.normal());
    return v;
}

}  // namespace

TEST_CASE("openmp matmul variants match the serial reference exactly") {
    rng r(7);
    for (int trial = 0; trial < 5; ++trial) {
        const int m = 3 + int(r.bounded(60));
        const int k = 3 + int(r.bounded(60));
        const int n = 3 + int(r.bounded(60));
        auto a = random_vec(size_t(m) * k, r);
        auto b = random_vec(size_t(k) * n, r);
        std::vector<float> cs(size_t(m) * n), cp(size_t(m) * n);
        kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
        kernels::matmul(a.data(), b.data(), cp.data(), m, k, n);
        CHECK(cs == cp);

        auto bt = random_vec(size_t(n) * k, r);
        std::vector<float> ds(size_t(m) * n), dp(size_t(m) * n);
        kernels::serial::matmul_a_bt(a.data(), bt.data(), ds.data(), m, k, n);
        kernels::matmul_a_bt(a.data(), bt.data(), dp.data(), m, k, n);
        CHECK(ds == dp);

        auto b2 = random_vec(size_t(m) * n, r);
        std::vector<float> es(size_t(k) * n), ep(size_t(k) * n);
        kernels::serial::matmul_at_b(a.data(), b2.data(), es.data(), m, k, n);
        kernels::matmul_at_b(a.data(), b2.data(), ep.data(), m, k, n);
        CHECK(es == ep);
    }
}

TEST_CASE("openmp conv1d kernels match the serial reference exactly") {
    rng r(11);
    const int t_in = 37, d_in = 5, d_out = 7, kernel = 6, stride = 2, pad = 2;
    const int t_out = (t_in + 2 * pad - kernel) / stride + 1;
    auto x = random_vec(size_t(t_in) * d_in, r);
    auto w = random_vec(size_t(d_out) * kernel * d_in, r);
    auto b = random_vec(size_t(d_out), r);

    std::vector<float> ys(size_t(t_out) * d_out), yp(size_t(t_out) * d_out);
    kernels::serial::conv1d_fwd(x.data(), w.data(), b.data(), ys.data(),
                                t_in, d_in, d_out, kernel, stride, pad, t_out);
    kernels::conv1d_fwd(x.data(), w.data(), b.data(), yp.data(),
                        t_in, d_in, d_out, kernel, stride, pad, t_out);
    CHECK(ys == yp);

    auto dy = random_vec(size_t(t_out) * d_out, r);
    std::vector<float> dxs(size_t(t_in) * d_in, 0.0f), dxp(size_t(t_in) * d_in, 0.0f);
    kernels::serial::conv1d_bwd_x(dy.data(), w.data(), dxs.data(),
                                  t_in, d_in, d_out, kernel, stride, pad, t_out);
    kernels::conv1d_bwd_x(dy.data(), w.data(), dxp.data(),
                          t_in, d_in, d_out, kernel, stride, pad, t_out);
    CHECK(dxs == dxp);

    std::vector<float> dws(size_t(d_out) * kernel * d_in, 0.0f), dwp(dws), dbs(size_t(d_out), 0.0f),
        dbp(dbs);
    kernels::serial::conv1d_bwd_w(dy.data(), x.data(), dws.data(), dbs.data(),
                                  t_in, d_in, d_out, kernel, stride, pad, t_out);
    kernels::conv1d_bwd_w(dy.data(), x.data(), dwp.data(), dbp.data(),
                          t_in, d_in, d_out, kernel, stride, pad, t_out);
    CHECK(dws == dwp);
    CHECK(dbs == dbp);
}

TEST_CASE("matmul against a hand-checked 2x2 product") {
    const std::vector<float> a = {1, 2, 3, 4};
    const std::vector<float> b = {5, 6, 7, 8};
    std::vector<float> c(4);
    kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
    CHECK(c == std::vector<float>{19, 22, 43, 50});
}

TEST_CASE("conv1d forward against a hand-computed stride-2 case") {
    // x: length 4, one channel; kernel 2, stride 2, no padding
    const std::vector<float> x = {1, 2, 3, 4};
    const std::vector<float> w = {1, -1};  // single output channel
    const std::vector<float> b = {0.5f};
    std::vector<float> y(2);
    kernels::conv1d_fwd(x.data(), w.data(), b.data(), y.data(), 4, 1, 1, 2, 2, 0, 2);
    CHECK(y[0] == doctest::Approx(1 - 2 + 0.5));
    CHECK(y[1] == doctest::Approx(3 - 4 + 0.5));
}
