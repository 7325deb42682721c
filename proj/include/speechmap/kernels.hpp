// Dense compute kernels. The primary versions parallelize over independent
// output elements with OpenMP, so results are bitwise identical to the serial
// reference for any thread count. kernels::serial holds the reference
// implementations used by the unit tests and the benchmark tool.
#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sm {
namespace kernels {

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + size_t(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + size_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const T av = ai[kk];
            const T* bk = b + size_t(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

// c[m x n] = a[m x k] * b[n x k]^T   (rows of b are dotted with rows of a)
template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + size_t(i) * k;
        T* ci = c + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + size_t(j) * k;
            T acc = T(0);
            for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            ci[j] = acc;
        }
    }
}

// c[k x n] = a[m x k]^T * b[m x n]
template <class T>
void matmul_at_b(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int kk = 0; kk < k; ++kk) {
        T* ck = c + size_t(kk) * n;
        for (int j = 0; j < n; ++j) ck[j] = T(0);
        for (int i = 0; i < m; ++i) {
            const T av = a[size_t(i) * k + kk];
            const T* bi = b + size_t(i) * n;
            for (int j = 0; j < n; ++j) ck[j] += av * bi[j];
        }
    }
}

// y[t_out x d_out] from x[t_in x d_in], w[d_out x kernel x d_in], bias[d_out]
template <class T>
void conv1d_fwd(const T* x, const T* w, const T* bias, T* y,
                int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    for (int t = 0; t < t_out; ++t) {
        T* yt = y + size_t(t) * d_out;
        for (int oc = 0; oc < d_out; ++oc) {
            T acc = bias ? bias[oc] : T(0);
            const T* woc = w + size_t(oc) * kernel * d_in;
            for (int kk = 0; kk < kernel; ++kk) {
                const int ti = t * stride + kk - pad;
                if (ti < 0 || ti >= t_in) continue;
                const T* xt = x + size_t(ti) * d_in;
                const T* wk = woc + size_t(kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) acc += xt[ic] * wk[ic];
            }
            yt[oc] = acc;
        }
    }
}

// dx[t_in x d_in] += gather over contributing output positions
template <class T>
void conv1d_bwd_x(const T* dy, const T* w, T* dx,
                  int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    for (int ti = 0; ti < t_in; ++ti) {
        T* dxt = dx + size_t(ti) * d_in;
        for (int kk = 0; kk < kernel; ++kk) {
            const int num = ti + pad - kk;
            if (num < 0 || num % stride != 0) continue;
            const int t = num / stride;
            if (t < 0 || t >= t_out) continue;
            const T* dyt = dy + size_t(t) * d_out;
            for (int oc = 0; oc < d_out; ++oc) {
                const T g = dyt[oc];
                const T* wk = w + (size_t(oc) * kernel + kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) dxt[ic] += g * wk[ic];
            }
        }
    }
}

// dw[d_out x kernel x d_in] +=, db[d_out] +=
template <class T>
void conv1d_bwd_w(const T* dy, const T* x, T* dw, T* db,
                  int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    for (int oc = 0; oc < d_out; ++oc) {
        T db_acc = T(0);
        T* dwoc = dw + size_t(oc) * kernel * d_in;
        for (int t = 0; t < t_out; ++t) {
            const T g = dy[size_t(t) * d_out + oc];
            db_acc += g;
            for (int kk = 0; kk < kernel; ++kk) {
                const int ti = t * stride + kk - pad;
                if (ti < 0 || ti >= t_in) continue;
                const T* xt = x + size_t(ti) * d_in;
                T* dwk = dwoc + size_t(kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) dwk[ic] += g * xt[ic];
            }
        }
        if (db) db[oc] += db_acc;
    }
}

}  // namespace serial

// ------------------------------------------------------------------ primary

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
    #pragma omp parallel for schedule(static) if (size_t(m) * k * n > 16384)
    for (int i = 0; i < m; ++i) {
        T* ci = c + size_t(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + size_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const T av = ai[kk];
            const T* bk = b + size_t(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n) {
    #pragma omp parallel for schedule(static) if (size_t(m) * k * n > 16384)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + size_t(i) * k;
        T* ci = c + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + size_t(j) * k;
            T acc = T(0);
            for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            ci[j] = acc;
        }
    }
}

template <class T>
void matmul_at_b(const T* a, const T* b, T* c, int m, int k, int n) {
    #pragma omp parallel for schedule(static) if (size_t(m) * k * n > 16384)
    for (int kk = 0; kk < k; ++kk) {
        T* ck = c + size_t(kk) * n;
        for (int j = 0; j < n; ++j) ck[j] = T(0);
        for (int i = 0; i < m; ++i) {
            const T av = a[size_t(i) * k + kk];
            const T* bi = b + size_t(i) * n;
            for (int j = 0; j < n; ++j) ck[j] += av * bi[j];
        }
    }
}

template <class T>
void conv1d_fwd(const T* x, const T* w, const T* bias, T* y,
                int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    #pragma omp parallel for schedule(static) if (size_t(t_out) * d_out * kernel * d_in > 16384)
    for (int t = 0; t < t_out; ++t) {
        T* yt = y + size_t(t) * d_out;
        for (int oc = 0; oc < d_out; ++oc) {
            T acc = bias ? bias[oc] : T(0);
            const T* woc = w + size_t(oc) * kernel * d_in;
            for (int kk = 0; kk < kernel; ++kk) {
                const int ti = t * stride + kk - pad;
                if (ti < 0 || ti >= t_in) continue;
                const T* xt = x + size_t(ti) * d_in;
                const T* wk = woc + size_t(kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) acc += xt[ic] * wk[ic];
            }
            yt[oc] = acc;
        }
    }
}

template <class T>
void conv1d_bwd_x(const T* dy, const T* w, T* dx,
                  int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    #pragma omp parallel for schedule(static) if (size_t(t_in) * d_out * kernel * d_in > 16384)
    for (int ti = 0; ti < t_in; ++ti) {
        T* dxt = dx + size_t(ti) * d_in;
        for (int kk = 0; kk < kernel; ++kk) {
            const int num = ti + pad - kk;
            if (num < 0 || num % stride != 0) continue;
            const int t = num / stride;
            if (t < 0 || t >= t_out) continue;
            const T* dyt = dy + size_t(t) * d_out;
            for (int oc = 0; oc < d_out; ++oc) {
                const T g = dyt[oc];
                const T* wk = w + (size_t(oc) * kernel + kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) dxt[ic] += g * wk[ic];
            }
        }
    }
}

template <class T>
void conv1d_bwd_w(const T* dy, const T* x, T* dw, T* db,
                  int t_in, int d_in, int d_out, int kernel, int stride, int pad, int t_out) {
    #pragma omp parallel for schedule(static) if (size_t(t_out) * d_out * kernel * d_in > 16384)
    for (int oc = 0; oc < d_out; ++oc) {
        T db_acc = T(0);
        T* dwoc = dw + size_t(oc) * kernel * d_in;
        for (int t = 0; t < t_out; ++t) {
            const T g = dy[size_t(t) * d_out + oc];
            db_acc += g;
            for (int kk = 0; kk < kernel; ++kk) {
                const int ti = t * stride + kk - pad;
                if (ti < 0 || ti >= t_in) continue;
                const T* xt = x + size_t(ti) * d_in;
                T* dwk = dwoc + size_t(kk) * d_in;
                for (int ic = 0; ic < d_in; ++ic) dwk[ic] += g * xt[ic];
            }
        }
        if (db) db[oc] += db_acc;
    }
}

inline int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace kernels
}  // namespace sm
