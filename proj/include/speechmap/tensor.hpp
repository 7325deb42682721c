// Reverse-mode autodiff over dense row-major tensors.
//
// Every op computes its forward value eagerly and, when any input requires
// gradients, records a closure that routes the output gradient back to the
// inputs. backward() runs the closures in reverse topological order and then
// releases the graph, so a second backward through the same loss is a state
// error. Numerics: each op validates that its output is finite.
#pragma once

#include "speechmap/common.hpp"
#include "speechmap/kernels.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

namespace sm {

template <class T>
struct tensor_node {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<tensor_node<T>>> parents;
    std::function<void(tensor_node<T>&)> backprop;

    size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <class T>
class tensor {
public:
    tensor() = default;
    explicit tensor(std::shared_ptr<tensor_node<T>> node) : p_(std::move(node)) {}

    static tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        auto n = std::make_shared<tensor_node<T>>();
        size_t total = 1;
        for (int d : shape) {
            if (d <= 0) throw dim_error("tensor dimensions must be positive");
            total *= size_t(d);
        }
        n->shape = std::move(shape);
        n->value.assign(total, T(0));
        n->requires_grad = requires_grad;
        return tensor(std::move(n));
    }

    static tensor from(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
        auto t = zeros(std::move(shape), requires_grad);
        if (data.size() != t.numel()) throw dim_error("tensor data length does not match shape");
        t.p_->value = std::move(data);
        return t;
    }

    static tensor scalar(T v, bool requires_grad = false) {
        auto t = zeros({1}, requires_grad);
        t.p_->value[0] = v;
        return t;
    }

    bool valid() const { return p_ != nullptr; }
    tensor_node<T>* node() const { return p_.get(); }
    const std::shared_ptr<tensor_node<T>>& ptr() const { return p_; }

    const std::vector<int>& shape() const { return p_->shape; }
    int dim(int i) const { return p_->shape[size_t(i)]; }
    int rank() const { return int(p_->shape.size()); }
    size_t numel() const { return p_->numel(); }

    std::vector<T>& data() { return p_->value; }
    const std::vector<T>& data() const { return p_->value; }
    std::vector<T>& grad() { p_->ensure_grad(); return p_->grad; }

    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool rg) { p_->requires_grad = rg; }

    T item() const {
        if (numel() != 1) throw dim_error("item() requires a scalar tensor");
        return p_->value[0];
    }

    // rows/cols of a rank-2 tensor
    int rows() const {
        if (rank() != 2) throw dim_error("rows() requires a rank-2 tensor");
        return dim(0);
    }
    int cols() const {
        if (rank() != 2) throw dim_error("cols() requires a rank-2 tensor");
        return dim(1);
    }

private:
    std::shared_ptr<tensor_node<T>> p_;
};

// ---------------------------------------------------------------- helpers

template <class T>
inline void check_finite(const std::vector<T>& v, const char* op) {
    for (const T x : v) {
        if (!std::isfinite(double(x))) throw numeric_error(std::string(op) + ": non-finite output");
    }
}

template <class T>
inline tensor<T> make_op_node(std::vector<int> shape,
                              std::initializer_list<tensor<T>> inputs,
                              std::function<void(tensor_node<T>&)> backprop) {
    auto out = tensor<T>::zeros(std::move(shape));
    bool rg = false;
    for (const auto& in : inputs) rg = rg || in.requires_grad();
    if (rg) {
        out.node()->requires_grad = true;
        for (const auto& in : inputs) out.node()->parents.push_back(in.ptr());
        out.node()->backprop = std::move(backprop);
    }
    return out;
}

inline bool same_shape(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

// ---------------------------------------------------------------- basic ops

template <class T>
tensor<T> matmul(const tensor<T>& a, const tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw dim_error("matmul: shapes not conformable");
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    auto ap = a.ptr(), bp = b.ptr();
    auto out = make_op_node<T>({m, n}, {a, b}, [ap, bp, m, k, n](tensor_node<T>& o) {
        if (ap->requires_grad) {
            ap->ensure_grad();
            std::vector<T> da(size_t(m) * k);
            kernels::matmul_a_bt(o.grad.data(), bp->value.data(), da.data(), m, n, k);
            for (size_t i = 0; i < da.size(); ++i) ap->grad[i] += da[i];
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            std::vector<T> db(size_t(k) * n);
            kernels::matmul_at_b(ap->value.data(), o.grad.data(), db.data(), m, k, n);
            for (size_t i = 0; i < db.size(); ++i) bp->grad[i] += db[i];
        }
    });
    kernels::matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    check_finite(out.data(), "matmul");
    return out;
}

// add: same shape, or b broadcast across rows of a (bias)
template <class T>
tensor<T> add(const tensor<T>& a, const tensor<T>& b) {
    auto ap = a.ptr(), bp = b.ptr();
    if (same_shape(a.shape(), b.shape())) {
        auto out = make_op_node<T>(a.shape(), {a, b}, [ap, bp](tensor_node<T>& o) {
            if (ap->requires_grad) {
                ap->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i];
            }
            if (bp->requires_grad) {
                bp->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) bp->grad[i] += o.grad[i];
            }
        });
        for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
        check_finite(out.data(), "add");
        return out;
    }
    if (a.rank() == 2 && b.rank() == 1 && a.cols() == b.dim(0)) {
        const int m = a.rows(), n = a.cols();
        auto out = make_op_node<T>({m, n}, {a, b}, [ap, bp, m, n](tensor_node<T>& o) {
            if (ap->requires_grad) {
                ap->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i];
            }
            if (bp->requires_grad) {
                bp->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const T* g = o.grad.data() + size_t(i) * n;
                    for (int j = 0; j < n; ++j) bp->grad[size_t(j)] += g[j];
                }
            }
        });
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                out.data()[size_t(i) * n + j] = a.data()[size_t(i) * n + j] + b.data()[size_t(j)];
            }
        }
        check_finite(out.data(), "add");
        return out;
    }
    throw dim_error("add: shapes not conformable");
}

template <class T>
tensor<T> sub(const tensor<T>& a, const tensor<T>& b) {
    if (!same_shape(a.shape(), b.shape())) throw dim_error("sub: shape mismatch");
    auto ap = a.ptr(), bp = b.ptr();
    auto out = make_op_node<T>(a.shape(), {a, b}, [ap, bp](tensor_node<T>& o) {
        if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i];
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bp->grad[i] -= o.grad[i];
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    check_finite(out.data(), "sub");
    return out;
}

template <class T>
tensor<T> mul(const tensor<T>& a, const tensor<T>& b) {
    if (!same_shape(a.shape(), b.shape())) throw dim_error("mul: shape mismatch");
    auto ap = a.ptr(), bp = b.ptr();
    auto out = make_op_node<T>(a.shape(), {a, b}, [ap, bp](tensor_node<T>& o) {
        if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i] * bp->value[i];
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) bp->grad[i] += o.grad[i] * ap->value[i];
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    check_finite(out.data(), "mul");
    return out;
}

template <class T>
tensor<T> scale(const tensor<T>& a, T c) {
    auto ap = a.ptr();
    auto out = make_op_node<T>(a.shape(), {a}, [ap, c](tensor_node<T>& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i] * c;
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * c;
    check_finite(out.data(), "scale");
    return out;
}

// softmax over the last dimension of a rank-2 tensor; causal=true masks
// column j > row i (scores must then be square)
template <class T>
tensor<T> softmax_rows(const tensor<T>& a, bool causal = false) {
    if (a.rank() != 2) throw dim_error("softmax_rows: rank-2 input required");
    if (causal && a.rows() != a.cols()) throw dim_error("softmax_rows: causal mask needs square input");
    const int m = a.rows(), n = a.cols();
    auto ap = a.ptr();
    auto out = make_op_node<T>({m, n}, {a}, [ap, m, n](tensor_node<T>& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const T* p = o.value.data() + size_t(i) * n;
            const T* g = o.grad.data() + size_t(i) * n;
            T dot = T(0);
            for (int j = 0; j < n; ++j) dot += p[j] * g[j];
            T* da = ap->grad.data() + size_t(i) * n;
            for (int j = 0; j < n; ++j) da[j] += p[j] * (g[j] - dot);
        }
    });
    for (int i = 0; i < m; ++i) {
        const T* x = a.data().data() + size_t(i) * n;
        T* y = out.data().data() + size_t(i) * n;
        const int limit = causal ? i + 1 : n;
        T mx = x[0];
        for (int j = 1; j < limit; ++j) mx = std::max(mx, x[j]);
        T sum = T(0);
        for (int j = 0; j < limit; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < limit; ++j) y[j] /= sum;
        for (int j = limit; j < n; ++j) y[j] = T(0);
    }
    check_finite(out.data(), "softmax");
    return out;
}

template <class T>
tensor<T> layernorm_rows(const tensor<T>& x, const tensor<T>& gamma, const tensor<T>& beta, T eps = T(1e-5)) {
    if (x.rank() != 2) throw dim_error("layernorm: rank-2 input required");
    const int m = x.rows(), n = x.cols();
    if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 || beta.dim(0) != n) {
        throw dim_error("layernorm: gamma/beta must match feature dim");
    }
    auto xp = x.ptr(), gp = gamma.ptr(), bp = beta.ptr();
    // cache normalized values and 1/sigma per row for the backward pass
    auto xhat = std::make_shared<std::vector<T>>(size_t(m) * n);
    auto rsig = std::make_shared<std::vector<T>>(size_t(m));

    auto out = make_op_node<T>({m, n}, {x, gamma, beta}, [xp, gp, bp, xhat, rsig, m, n](tensor_node<T>& o) {
        for (int i = 0; i < m; ++i) {
            const T* dy = o.grad.data() + size_t(i) * n;
            const T* xh = xhat->data() + size_t(i) * n;
            if (gp->requires_grad) {
                gp->ensure_grad();
                for (int j = 0; j < n; ++j) gp->grad[size_t(j)] += dy[j] * xh[j];
            }
            if (bp->requires_grad) {
                bp->ensure_grad();
                for (int j = 0; j < n; ++j) bp->grad[size_t(j)] += dy[j];
            }
            if (xp->requires_grad) {
                xp->ensure_grad();
                T mean_g = T(0), mean_gx = T(0);
                for (int j = 0; j < n; ++j) {
                    const T g = dy[j] * gp->value[size_t(j)];
                    mean_g += g;
                    mean_gx += g * xh[j];
                }
                mean_g /= T(n);
                mean_gx /= T(n);
                T* dx = xp->grad.data() + size_t(i) * n;
                const T rs = (*rsig)[size_t(i)];
                for (int j = 0; j < n; ++j) {
                    const T g = dy[j] * gp->value[size_t(j)];
                    dx[j] += (g - mean_g - xh[j] * mean_gx) * rs;
                }
            }
        }
    });
    for (int i = 0; i < m; ++i) {
        const T* xi = x.data().data() + size_t(i) * n;
        T mean = T(0);
        for (int j = 0; j < n; ++j) mean += xi[j];
        mean /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
        var /= T(n);
        const T rs = T(1) / std::sqrt(var + eps);
        (*rsig)[size_t(i)] = rs;
        T* xh = xhat->data() + size_t(i) * n;
        T* y = out.data().data() + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            xh[j] = (xi[j] - mean) * rs;
            y[j] = xh[j] * gamma.data()[size_t(j)] + beta.data()[size_t(j)];
        }
    }
    check_finite(out.data(), "layernorm");
    return out;
}

// rms normalization (no mean subtraction), the decoder-family convention
template <class T>
tensor<T> rmsnorm_rows(const tensor<T>& x, const tensor<T>& gamma, T eps = T(1e-5)) {
    if (x.rank() != 2) throw dim_error("rmsnorm: rank-2 input required");
    const int m = x.rows(), n = x.cols();
    if (gamma.rank() != 1 || gamma.dim(0) != n) throw dim_error("rmsnorm: gamma must match feature dim");
    auto xp = x.ptr(), gp = gamma.ptr();
    auto xhat = std::make_shared<std::vector<T>>(size_t(m) * n);
    auto rinv = std::make_shared<std::vector<T>>(size_t(m));

    auto out = make_op_node<T>({m, n}, {x, gamma}, [xp, gp, xhat, rinv, m, n](tensor_node<T>& o) {
        for (int i = 0; i < m; ++i) {
            const T* dy = o.grad.data() + size_t(i) * n;
            const T* xh = xhat->data() + size_t(i) * n;
            if (gp->requires_grad) {
                gp->ensure_grad();
                for (int j = 0; j < n; ++j) gp->grad[size_t(j)] += dy[j] * xh[j];
            }
            if (xp->requires_grad) {
                xp->ensure_grad();
                T mean_gx = T(0);
                for (int j = 0; j < n; ++j) mean_gx += dy[j] * gp->value[size_t(j)] * xh[j];
                mean_gx /= T(n);
                T* dx = xp->grad.data() + size_t(i) * n;
                const T r = (*rinv)[size_t(i)];
                for (int j = 0; j < n; ++j) {
                    dx[j] += (dy[j] * gp->value[size_t(j)] - xh[j] * mean_gx) * r;
                }
            }
        }
    });
    for (int i = 0; i < m; ++i) {
        const T* xi = x.data().data() + size_t(i) * n;
        T ms = T(0);
        for (int j = 0; j < n; ++j) ms += xi[j] * xi[j];
        ms /= T(n);
        const T r = T(1) / std::sqrt(ms + eps);
        (*rinv)[size_t(i)] = r;
        T* xh = xhat->data() + size_t(i) * n;
        T* y = out.data().data() + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            xh[j] = xi[j] * r;
            y[j] = xh[j] * gamma.data()[size_t(j)];
        }
    }
    check_finite(out.data(), "rmsnorm");
    return out;
}

template <class T>
tensor<T> gelu(const tensor<T>& x) {
    auto xp = x.ptr();
    auto out = make_op_node<T>(x.shape(), {x}, [xp](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (size_t i = 0; i < o.grad.size(); ++i) {
            const double v = double(xp->value[i]);
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            xp->grad[i] += o.grad[i] * T(cdf + v * pdf);
        }
    });
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (size_t i = 0; i < out.numel(); ++i) {
        const double v = double(x.data()[i]);
        out.data()[i] = T(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
    }
    check_finite(out.data(), "gelu");
    return out;
}

inline int conv1d_output_length(int t_in, int kernel, int stride, int pad) {
    const int span = t_in + 2 * pad - kernel;
    if (span < 0) throw dim_error("conv1d: input too short for kernel");
    return span / stride + 1;
}

// x: [t_in x d_in], w: [d_out x kernel x d_in], b: [d_out]
template <class T>
tensor<T> conv1d(const tensor<T>& x, const tensor<T>& w, const tensor<T>& b, int stride, int pad) {
    if (x.rank() != 2 || w.rank() != 3) throw dim_error("conv1d: x must be rank-2, w rank-3");
    const int t_in = x.dim(0), d_in = x.dim(1);
    const int d_out = w.dim(0), kernel = w.dim(1);
    if (w.dim(2) != d_in) throw dim_error("conv1d: weight input-channel mismatch");
    if (b.rank() != 1 || b.dim(0) != d_out) throw dim_error("conv1d: bias shape mismatch");
    if (stride < 1) throw dim_error("conv1d: stride must be >= 1");
    const int t_out = conv1d_output_length(t_in, kernel, stride, pad);

    auto xp = x.ptr(), wp = w.ptr(), bp = b.ptr();
    auto out = make_op_node<T>({t_out, d_out}, {x, w, b},
                               [xp, wp, bp, t_in, d_in, d_out, kernel, stride, pad, t_out](tensor_node<T>& o) {
        if (xp->requires_grad) {
            xp->ensure_grad();
            kernels::conv1d_bwd_x(o.grad.data(), wp->value.data(), xp->grad.data(),
                                  t_in, d_in, d_out, kernel, stride, pad, t_out);
        }
        if (wp->requires_grad || bp->requires_grad) {
            std::vector<T> scratch;
            T* dw = nullptr;
            if (wp->requires_grad) {
                wp->ensure_grad();
                dw = wp->grad.data();
            } else {
                scratch.assign(wp->value.size(), T(0));
                dw = scratch.data();
            }
            T* db = nullptr;
            if (bp->requires_grad) {
                bp->ensure_grad();
                db = bp->grad.data();
            }
            kernels::conv1d_bwd_w(o.grad.data(), xp->value.data(), dw, db,
                                  t_in, d_in, d_out, kernel, stride, pad, t_out);
        }
    });
    kernels::conv1d_fwd(x.data().data(), w.data().data(), b.data().data(), out.data().data(),
                        t_in, d_in, d_out, kernel, stride, pad, t_out);
    check_finite(out.data(), "conv1d");
    return out;
}

// gather rows of an embedding table; grad scatters back when the table is trainable
template <class T>
tensor<T> embedding_rows(const tensor<T>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw dim_error("embedding_rows: table must be rank-2");
    const int v = table.rows(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || id >= v) throw argument_error("embedding_rows: id out of range");
    }
    const int n = int(ids.size());
    if (n == 0) throw argument_error("embedding_rows: empty id list");
    auto tp = table.ptr();
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    auto out = make_op_node<T>({n, d}, {table}, [tp, ids_copy, d](tensor_node<T>& o) {
        if (!tp->requires_grad) return;
        tp->ensure_grad();
        for (size_t i = 0; i < ids_copy->size(); ++i) {
            const T* g = o.grad.data() + i * size_t(d);
            T* dst = tp->grad.data() + size_t((*ids_copy)[i]) * d;
            for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
    });
    for (int i = 0; i < n; ++i) {
        std::copy_n(table.data().data() + size_t(ids[size_t(i)]) * d, size_t(d),
                    out.data().data() + size_t(i) * d);
    }
    return out;
}

template <class T>
tensor<T> slice_cols(const tensor<T>& x, int c0, int c1) {
    if (x.rank() != 2) throw dim_error("slice_cols: rank-2 input required");
    const int m = x.rows(), n = x.cols();
    if (c0 < 0 || c1 > n || c0 >= c1) throw dim_error("slice_cols: bad column range");
    const int w = c1 - c0;
    auto xp = x.ptr();
    auto out = make_op_node<T>({m, w}, {x}, [xp, c0, w, n, m](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const T* g = o.grad.data() + size_t(i) * w;
            T* dst = xp->grad.data() + size_t(i) * n + c0;
            for (int j = 0; j < w; ++j) dst[j] += g[j];
        }
    });
    for (int i = 0; i < m; ++i) {
        std::copy_n(x.data().data() + size_t(i) * n + c0, size_t(w), out.data().data() + size_t(i) * w);
    }
    return out;
}

template <class T>
tensor<T> concat_cols(const std::vector<tensor<T>>& parts) {
    if (parts.empty()) throw argument_error("concat_cols: no inputs");
    const int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.rows() != m) throw dim_error("concat_cols: row mismatch");
        total += p.cols();
    }
    auto out = tensor<T>::zeros({m, total});
    bool rg = false;
    for (const auto& p : parts) rg = rg || p.requires_grad();
    std::vector<std::shared_ptr<tensor_node<T>>> ptrs;
    for (const auto& p : parts) ptrs.push_back(p.ptr());
    if (rg) {
        out.node()->requires_grad = true;
        out.node()->parents = ptrs;
        out.node()->backprop = [ptrs, m, total](tensor_node<T>& o) {
            int off = 0;
            for (const auto& pp : ptrs) {
                const int w = pp->shape[1];
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        const T* g = o.grad.data() + size_t(i) * total + off;
                        T* dst = pp->grad.data() + size_t(i) * w;
                        for (int j = 0; j < w; ++j) dst[j] += g[j];
                    }
                }
                off += w;
            }
        };
    }
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.cols();
        for (int i = 0; i < m; ++i) {
            std::copy_n(p.data().data() + size_t(i) * w, size_t(w),
                        out.data().data() + size_t(i) * total + off);
        }
        off += w;
    }
    return out;
}

template <class T>
tensor<T> slice_rows(const tensor<T>& x, int r0, int r1) {
    if (x.rank() != 2) throw dim_error("slice_rows: rank-2 input required");
    const int m = x.rows(), n = x.cols();
    if (r0 < 0 || r1 > m || r0 >= r1) throw dim_error("slice_rows: bad row range");
    const int h = r1 - r0;
    auto xp = x.ptr();
    auto out = make_op_node<T>({h, n}, {x}, [xp, r0, h, n](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (int i = 0; i < h; ++i) {
            const T* g = o.grad.data() + size_t(i) * n;
            T* dst = xp->grad.data() + size_t(i + r0) * n;
            for (int j = 0; j < n; ++j) dst[j] += g[j];
        }
    });
    std::copy_n(x.data().data() + size_t(r0) * n, size_t(h) * n, out.data().data());
    return out;
}

template <class T>
tensor<T> concat_rows(const std::vector<tensor<T>>& parts) {
    if (parts.empty()) throw argument_error("concat_rows: no inputs");
    const int n = parts[0].cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.cols() != n) throw dim_error("concat_rows: column mismatch");
        total += p.rows();
    }
    auto out = tensor<T>::zeros({total, n});
    bool rg = false;
    for (const auto& p : parts) rg = rg || p.requires_grad();
    std::vector<std::shared_ptr<tensor_node<T>>> ptrs;
    for (const auto& p : parts) ptrs.push_back(p.ptr());
    if (rg) {
        out.node()->requires_grad = true;
        out.node()->parents = ptrs;
        out.node()->backprop = [ptrs, n](tensor_node<T>& o) {
            int off = 0;
            for (const auto& pp : ptrs) {
                const int h = pp->shape[0];
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    for (size_t i = 0; i < size_t(h) * n; ++i) {
                        pp->grad[i] += o.grad[size_t(off) * n + i];
                    }
                }
                off += h;
            }
        };
    }
    int off = 0;
    for (const auto& p : parts) {
        std::copy_n(p.data().data(), p.numel(), out.data().data() + size_t(off) * n);
        off += p.rows();
    }
    return out;
}

template <class T>
tensor<T> transpose(const tensor<T>& x) {
    if (x.rank() != 2) throw dim_error("transpose: rank-2 input required");
    const int m = x.rows(), n = x.cols();
    auto xp = x.ptr();
    auto out = make_op_node<T>({n, m}, {x}, [xp, m, n](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                xp->grad[size_t(j) * n + i] += o.grad[size_t(i) * m + j];
            }
        }
    });
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.data()[size_t(j) * m + i] = x.data()[size_t(i) * n + j];
    }
    return out;
}

template <class T>
tensor<T> sum_all(const tensor<T>& x) {
    auto xp = x.ptr();
    auto out = make_op_node<T>({1}, {x}, [xp](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += o.grad[0];
    });
    T acc = T(0);
    for (const T v : x.data()) acc += v;
    out.data()[0] = acc;
    check_finite(out.data(), "sum_all");
    return out;
}

template <class T>
tensor<T> mean_all(const tensor<T>& x) {
    return scale(sum_all(x), T(1) / T(x.numel()));
}

// mean cross-entropy over rows of logits against integer targets
template <class T>
tensor<T> cross_entropy_rows(const tensor<T>& logits, const std::vector<int>& targets) {
    if (logits.rank() != 2) throw dim_error("cross_entropy: rank-2 logits required");
    const int n = logits.rows(), v = logits.cols();
    if (int(targets.size()) != n) throw dim_error("cross_entropy: target count mismatch");
    for (int t : targets) {
        if (t < 0 || t >= v) throw argument_error("cross_entropy: target id out of range");
    }
    auto lp = logits.ptr();
    auto probs = std::make_shared<std::vector<T>>(size_t(n) * v);
    auto tgt = std::make_shared<std::vector<int>>(targets);
    auto out = make_op_node<T>({1}, {logits}, [lp, probs, tgt, n, v](tensor_node<T>& o) {
        if (!lp->requires_grad) return;
        lp->ensure_grad();
        const T g = o.grad[0] / T(n);
        for (int i = 0; i < n; ++i) {
            const T* p = probs->data() + size_t(i) * v;
            T* dl = lp->grad.data() + size_t(i) * v;
            for (int j = 0; j < v; ++j) dl[j] += g * p[j];
            dl[(*tgt)[size_t(i)]] -= g;
        }
    });
    T total = T(0);
    for (int i = 0; i < n; ++i) {
        const T* x = logits.data().data() + size_t(i) * v;
        T mx = x[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        T sum = T(0);
        T* p = probs->data() + size_t(i) * v;
        for (int j = 0; j < v; ++j) {
            p[j] = std::exp(x[j] - mx);
            sum += p[j];
        }
        for (int j = 0; j < v; ++j) p[j] /= sum;
        total += std::log(sum) + mx - x[targets[size_t(i)]];
    }
    out.data()[0] = total / T(n);
    check_finite(out.data(), "cross_entropy");
    return out;
}

// mean over masked rows and all dims of (scale*(pred-target))^2;
// empty mask yields exactly zero with no gradient
template <class T>
tensor<T> masked_scaled_mse(const tensor<T>& pred, const tensor<T>& target,
                            const std::vector<uint8_t>& row_mask, T value_scale) {
    if (!same_shape(pred.shape(), target.shape())) throw dim_error("masked_scaled_mse: shape mismatch");
    if (pred.rank() != 2) throw dim_error("masked_scaled_mse: rank-2 inputs required");
    const int m = pred.rows(), d = pred.cols();
    if (int(row_mask.size()) != m) throw dim_error("masked_scaled_mse: mask length mismatch");
    int cnt = 0;
    for (uint8_t b : row_mask) cnt += (b != 0);

    auto pp = pred.ptr(), tp = target.ptr();
    auto mask = std::make_shared<std::vector<uint8_t>>(row_mask);
    auto out = make_op_node<T>({1}, {pred, target}, [pp, tp, mask, m, d, cnt, value_scale](tensor_node<T>& o) {
        if (cnt == 0) return;
        const T coef = o.grad[0] * T(2) * value_scale * value_scale / (T(cnt) * T(d));
        if (pp->requires_grad) {
            pp->ensure_grad();
            for (int i = 0; i < m; ++i) {
                if (!(*mask)[size_t(i)]) continue;
                const T* pv = pp->value.data() + size_t(i) * d;
                const T* tv = tp->value.data() + size_t(i) * d;
                T* g = pp->grad.data() + size_t(i) * d;
                for (int j = 0; j < d; ++j) g[j] += coef * (pv[j] - tv[j]);
            }
        }
        if (tp->requires_grad) {
            tp->ensure_grad();
            for (int i = 0; i < m; ++i) {
                if (!(*mask)[size_t(i)]) continue;
                const T* pv = pp->value.data() + size_t(i) * d;
                const T* tv = tp->value.data() + size_t(i) * d;
                T* g = tp->grad.data() + size_t(i) * d;
                for (int j = 0; j < d; ++j) g[j] -= coef * (pv[j] - tv[j]);
            }
        }
    });
    T acc = T(0);
    if (cnt > 0) {
        for (int i = 0; i < m; ++i) {
            if (!row_mask[size_t(i)]) continue;
            const T* pv = pred.data().data() + size_t(i) * d;
            const T* tv = target.data().data() + size_t(i) * d;
            for (int j = 0; j < d; ++j) {
                const T e = value_scale * (pv[j] - tv[j]);
                acc += e * e;
            }
        }
        acc /= T(cnt) * T(d);
    }
    out.data()[0] = acc;
    check_finite(out.data(), "masked_scaled_mse");
    return out;
}

// mean cosine similarity over masked rows; rows where either side has zero
// norm contribute 0 and are counted in *zero_norm_rows when provided
template <class T>
tensor<T> masked_mean_cosine(const tensor<T>& pred, const tensor<T>& target,
                             const std::vector<uint8_t>& row_mask, int* zero_norm_rows = nullptr) {
    if (!same_shape(pred.shape(), target.shape())) throw dim_error("masked_mean_cosine: shape mismatch");
    if (pred.rank() != 2) throw dim_error("masked_mean_cosine: rank-2 inputs required");
    const int m = pred.rows(), d = pred.cols();
    if (int(row_mask.size()) != m) throw dim_error("masked_mean_cosine: mask length mismatch");
    int cnt = 0;
    for (uint8_t b : row_mask) cnt += (b != 0);
    if (cnt == 0) throw argument_error("masked_mean_cosine: empty mask");

    auto pp = pred.ptr(), tp = target.ptr();
    auto mask = std::make_shared<std::vector<uint8_t>>(row_mask);
    // per-row cached cosines and norms for the backward pass
    auto cos_cache = std::make_shared<std::vector<T>>(size_t(m), T(0));
    auto pn_cache = std::make_shared<std::vector<T>>(size_t(m), T(0));
    auto tn_cache = std::make_shared<std::vector<T>>(size_t(m), T(0));

    auto out = make_op_node<T>({1}, {pred, target},
                               [pp, tp, mask, cos_cache, pn_cache, tn_cache, m, d, cnt](tensor_node<T>& o) {
        if (!pp->requires_grad) return;
        pp->ensure_grad();
        const T g = o.grad[0] / T(cnt);
        for (int i = 0; i < m; ++i) {
            if (!(*mask)[size_t(i)]) continue;
            const T pn = (*pn_cache)[size_t(i)];
            const T tn = (*tn_cache)[size_t(i)];
            if (pn == T(0) || tn == T(0)) continue;
            const T c = (*cos_cache)[size_t(i)];
            const T* pv = pp->value.data() + size_t(i) * d;
            const T* tv = tp->value.data() + size_t(i) * d;
            T* gp = pp->grad.data() + size_t(i) * d;
            for (int j = 0; j < d; ++j) {
                gp[j] += g * (tv[j] / (pn * tn) - c * pv[j] / (pn * pn));
            }
        }
    });
    T acc = T(0);
    int zeroes = 0;
    for (int i = 0; i < m; ++i) {
        if (!row_mask[size_t(i)]) continue;
        const T* pv = pred.data().data() + size_t(i) * d;
        const T* tv = target.data().data() + size_t(i) * d;
        T pn = T(0), tn = T(0), dot = T(0);
        for (int j = 0; j < d; ++j) {
            pn += pv[j] * pv[j];
            tn += tv[j] * tv[j];
            dot += pv[j] * tv[j];
        }
        pn = std::sqrt(pn);
        tn = std::sqrt(tn);
        (*pn_cache)[size_t(i)] = pn;
        (*tn_cache)[size_t(i)] = tn;
        if (pn == T(0) || tn == T(0)) {
            ++zeroes;
            continue;
        }
        const T c = dot / (pn * tn);
        (*cos_cache)[size_t(i)] = c;
        acc += c;
    }
    if (zero_norm_rows) *zero_norm_rows += zeroes;
    out.data()[0] = acc / T(cnt);
    check_finite(out.data(), "masked_mean_cosine");
    return out;
}

// inverted dropout, active only when training
template <class T>
tensor<T> dropout(const tensor<T>& x, double p, rng& rand, bool training) {
    if (p < 0.0 || p >= 1.0) throw argument_error("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return x;
    auto keep = std::make_shared<std::vector<T>>(x.numel());
    const T scale_keep = T(1.0 / (1.0 - p));
    for (size_t i = 0; i < x.numel(); ++i) {
        (*keep)[i] = (rand.uniform() < p) ? T(0) : scale_keep;
    }
    auto xp = x.ptr();
    auto out = make_op_node<T>(x.shape(), {x}, [xp, keep](tensor_node<T>& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) xp->grad[i] += o.grad[i] * (*keep)[i];
    });
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * (*keep)[i];
    return out;
}

// ---------------------------------------------------------------- backward

template <class T>
void backward(const tensor<T>& loss) {
    if (loss.numel() != 1) throw argument_error("backward: loss must be scalar");
    if (!loss.requires_grad()) throw state_error("backward: loss does not require gradients");
    auto* root = loss.node();
    if (root->consumed) throw state_error("backward: graph already consumed; rebuild the forward pass first");

    // iterative post-order topological sort
    std::vector<tensor_node<T>*> order;
    std::unordered_set<tensor_node<T>*> visited;
    std::vector<std::pair<tensor_node<T>*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            tensor_node<T>* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        tensor_node<T>* node = *it;
        if (node->backprop) {
            node->ensure_grad();
            node->backprop(*node);
        }
    }
    // release the graph; leaves keep their grads
    for (tensor_node<T>* node : order) {
        if (node->backprop) {
            node->backprop = nullptr;
            node->parents.clear();
            node->consumed = true;
        }
    }
    root->consumed = true;
}

}  // namespace sm
