// Model building blocks: linear / layernorm / multi-head attention / FFN,
// the post-norm encoder layer and pre-norm causal decoder layer, and
// sinusoidal positions.
#pragma once

#include "speechmap/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sm {

template <class T>
struct named_param {
    std::string name;
    tensor<T> t;
};

template <class T>
using param_list = std::vector<named_param<T>>;

// forward-pass context: training toggles dropout, rand drives the masks
template <class T = float>
struct fwd_ctx {
    bool training = false;
    rng* rand = nullptr;
};

template <class T>
inline void init_uniform(tensor<T>& t, rng& r, double limit) {
    for (auto& v : t.data()) v = T((r.uniform() * 2.0 - 1.0) * limit);
}

template <class T>
inline void init_normal(tensor<T>& t, rng& r, double stddev) {
    for (auto& v : t.data()) v = T(r.normal() * stddev);
}

// ---------------------------------------------------------------- linear

template <class T>
struct linear {
    tensor<T> w;  // [in x out]
    tensor<T> b;  // [out]
    int in = 0, out = 0;

    linear() = default;
    linear(int in_dim, int out_dim, rng& r) : in(in_dim), out(out_dim) {
        w = tensor<T>::zeros({in, out}, true);
        b = tensor<T>::zeros({out}, true);
        init_uniform(w, r, std::sqrt(6.0 / double(in + out)));
    }

    tensor<T> forward(const tensor<T>& x) const { return add(matmul(x, w), b); }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        out_list.push_back({prefix + ".w", w});
        out_list.push_back({prefix + ".b", b});
    }
};

// ---------------------------------------------------------------- layer norm

template <class T>
struct layer_norm {
    tensor<T> gamma, beta;

    layer_norm() = default;
    explicit layer_norm(int dim) {
        gamma = tensor<T>::zeros({dim}, true);
        beta = tensor<T>::zeros({dim}, true);
        for (auto& v : gamma.data()) v = T(1);
    }

    tensor<T> forward(const tensor<T>& x) const { return layernorm_rows(x, gamma, beta); }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        out_list.push_back({prefix + ".gamma", gamma});
        out_list.push_back({prefix + ".beta", beta});
    }
};

// ---------------------------------------------------------------- attention

template <class T>
struct multihead_attention {
    linear<T> wq, wk, wv, wo;
    int dim = 0, heads = 0;
    double dropout_p = 0.0;

    multihead_attention() = default;
    multihead_attention(int d, int h, double drop, rng& r)
        : wq(d, d, r), wk(d, d, r), wv(d, d, r), wo(d, d, r), dim(d), heads(h), dropout_p(drop) {
        if (d % h != 0) throw config_error("attention: dim must be divisible by heads");
    }

    tensor<T> forward(const tensor<T>& x, bool causal, const fwd_ctx<T>& ctx) const {
        const int hd = dim / heads;
        auto q = wq.forward(x);
        auto k = wk.forward(x);
        auto v = wv.forward(x);
        std::vector<tensor<T>> head_outs;
        head_outs.reserve(size_t(heads));
        const T inv_sqrt_hd = T(1.0 / std::sqrt(double(hd)));
        for (int h = 0; h < heads; ++h) {
            auto qh = slice_cols(q, h * hd, (h + 1) * hd);
            auto kh = slice_cols(k, h * hd, (h + 1) * hd);
            auto vh = slice_cols(v, h * hd, (h + 1) * hd);
            auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_hd);
            auto probs = softmax_rows(scores, causal);
            if (ctx.training && dropout_p > 0.0) probs = dropout(probs, dropout_p, *ctx.rand, true);
            head_outs.push_back(matmul(probs, vh));
        }
        return wo.forward(concat_cols(head_outs));
    }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        wq.params(out_list, prefix + ".wq");
        wk.params(out_list, prefix + ".wk");
        wv.params(out_list, prefix + ".wv");
        wo.params(out_list, prefix + ".wo");
    }
};

// ---------------------------------------------------------------- ffn

template <class T>
struct feed_forward {
    linear<T> up, down;
    double dropout_p = 0.0;

    feed_forward() = default;
    // up_gain > 1 pushes pre-activations into gelu's nonlinear range at init
    feed_forward(int d, int mult, double drop, rng& r, double up_gain = 1.0)
        : up(d, d * mult, r), down(d * mult, d, r), dropout_p(drop) {
        if (up_gain != 1.0) {
            for (auto& wv : up.w.data()) wv = T(double(wv) * up_gain);
        }
    }

    tensor<T> forward(const tensor<T>& x, const fwd_ctx<T>& ctx) const {
        auto h = gelu(up.forward(x));
        if (ctx.training && dropout_p > 0.0) h = dropout(h, dropout_p, *ctx.rand, true);
        return down.forward(h);
    }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        up.params(out_list, prefix + ".up");
        down.params(out_list, prefix + ".down");
    }
};

// ------------------------------------------------- post-norm encoder layer

template <class T>
struct encoder_layer {
    multihead_attention<T> attn;
    feed_forward<T> ffn;
    layer_norm<T> ln1, ln2;

    encoder_layer() = default;
    encoder_layer(int d, int heads, int ffn_mult, double drop, rng& r, double ffn_up_gain = 1.0)
        : attn(d, heads, drop, r), ffn(d, ffn_mult, drop, r, ffn_up_gain), ln1(d), ln2(d) {}

    tensor<T> forward(tensor<T> x, const fwd_ctx<T>& ctx) const {
        x = add(x, attn.forward(ln1.forward(x), false, ctx));
        x = add(x, ffn.forward(ln2.forward(x), ctx));
        return x;
    }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        attn.params(out_list, prefix + ".attn");
        ffn.params(out_list, prefix + ".ffn");
        ln1.params(out_list, prefix + ".ln1");
        ln2.params(out_list, prefix + ".ln2");
    }
};

// ---------------------------------------------------------------- rms norm

template <class T>
struct rms_norm {
    tensor<T> gamma;

    rms_norm() = default;
    explicit rms_norm(int dim) {
        gamma = tensor<T>::zeros({dim}, true);
        for (auto& v : gamma.data()) v = T(1);
    }

    tensor<T> forward(const tensor<T>& x) const { return rmsnorm_rows(x, gamma); }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        out_list.push_back({prefix + ".gamma", gamma});
    }
};

// ------------------------------------------------- pre-norm decoder layer
// rms normalization, matching the decoder-only family this stands in for

template <class T>
struct decoder_layer {
    multihead_attention<T> attn;
    feed_forward<T> ffn;
    rms_norm<T> ln1, ln2;

    decoder_layer() = default;
    decoder_layer(int d, int heads, int ffn_mult, double drop, rng& r)
        : attn(d, heads, drop, r), ffn(d, ffn_mult, drop, r), ln1(d), ln2(d) {}

    tensor<T> forward(tensor<T> x, const fwd_ctx<T>& ctx) const {
        x = add(x, attn.forward(ln1.forward(x), true, ctx));
        x = add(x, ffn.forward(ln2.forward(x), ctx));
        return x;
    }

    void params(param_list<T>& out_list, const std::string& prefix) const {
        attn.params(out_list, prefix + ".attn");
        ffn.params(out_list, prefix + ".ffn");
        ln1.params(out_list, prefix + ".ln1");
        ln2.params(out_list, prefix + ".ln2");
    }
};

// ---------------------------------------------------------------- positions

// classic sin/cos table, returned as a constant (non-trainable) tensor
template <class T>
tensor<T> sinusoidal_positions(int length, int dim) {
    auto pe = tensor<T>::zeros({length, dim});
    for (int t = 0; t < length; ++t) {
        for (int i = 0; i < dim; i += 2) {
            // base 64 spreads the usable wavelengths over desk-scale lengths
            const double angle = double(t) / std::pow(64.0, double(i) / double(dim));
            pe.data()[size_t(t) * dim + i] = T(std::sin(angle));
            if (i + 1 < dim) pe.data()[size_t(t) * dim + i + 1] = T(std::cos(angle));
        }
    }
    return pe;
}

template <class T>
inline std::vector<tensor<T>> tensors_of(const param_list<T>& named) {
    std::vector<tensor<T>> out;
    out.reserve(named.size());
    for (const auto& np : named) out.push_back(np.t);
    return out;
}

template <class T>
inline size_t param_count(const param_list<T>& named) {
    size_t n = 0;
    for (const auto& np : named) n += np.t.numel();
    return n;
}

}  // namespace sm
