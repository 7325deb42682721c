// The trainable projector: frame averaging in front of two compression
// blocks (strided conv -> encoder stack -> widening FC) and a final square
// FC. Each block halves the sequence (kernel 6 / stride 2 / pad 2) and the
// widening FCs double the embedding width, so d_in -> d_mid -> d_out.
#pragma once

#include "speechmap/nn.hpp"

#include <string>
#include <vector>

namespace sm {

struct projector_config {
    int d_in = 16;
    int d_mid = 32;
    int d_out = 64;
    int layers_per_block = 2;
    int heads = 4;
    int ffn_mult = 4;
    int kernel = 6;
    int stride = 2;
    int pad = 2;
    double dropout = 0.1;
    int avg_factor = 2;

    void validate() const {
        if (d_in < 1 || d_mid < d_in || d_out < d_mid) {
            throw config_error("projector: dims must satisfy d_in <= d_mid <= d_out");
        }
        if (layers_per_block < 1) throw config_error("projector.layers_per_block must be >= 1");
        if (heads < 1 || d_in % heads != 0 || d_mid % heads != 0) {
            throw config_error("projector.heads must divide d_in and d_mid");
        }
        if (ffn_mult < 1) throw config_error("projector.ffn_mult must be >= 1");
        if (kernel <= stride || stride < 1) throw config_error("projector: kernel > stride >= 1 required");
        if (pad < 0) throw config_error("projector.pad must be non-negative");
        if (dropout < 0.0 || dropout >= 1.0) throw config_error("projector.dropout must be in [0,1)");
        if (avg_factor < 1) throw config_error("projector.avg_factor must be >= 1");
    }
};

// mean over groups of `factor` frames; a shorter trailing group is averaged
// as-is, so the output length is ceil(T/factor)
template <class T>
std::vector<T> average_frames(const std::vector<T>& frames, int t, int d, int factor) {
    if (factor < 1) throw argument_error("average_frames: factor must be >= 1");
    if (t == 0) return {};
    const int t_out = (t + factor - 1) / factor;
    std::vector<T> out(size_t(t_out) * d, T(0));
    for (int g = 0; g < t_out; ++g) {
        const int start = g * factor;
        const int end = std::min(start + factor, t);
        T* dst = out.data() + size_t(g) * d;
        for (int i = start; i < end; ++i) {
            const T* src = frames.data() + size_t(i) * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
        const T inv = T(1) / T(end - start);
        for (int j = 0; j < d; ++j) dst[j] *= inv;
    }
    return out;
}

inline int averaged_length(int t, int factor) { return t == 0 ? 0 : (t + factor - 1) / factor; }

template <class T>
struct projector_block {
    tensor<T> conv_w, conv_b;
    std::vector<encoder_layer<T>> layers;
    linear<T> widen;
    int dim = 0;

    projector_block() = default;
    projector_block(int d, int d_next, const projector_config& cfg, rng& r) : dim(d) {
        conv_w = tensor<T>::zeros({d, cfg.kernel, d}, true);
        conv_b = tensor<T>::zeros({d}, true);
        // conv gain keeps frame content comparable to the added positions;
        // the ffn gain starts those units in gelu's nonlinear range, which
        // the word-to-embedding lookup needs from the first steps
        init_uniform(conv_w, r, 3.0 * std::sqrt(6.0 / double(cfg.kernel * d + cfg.kernel * d)));
        for (int i = 0; i < cfg.layers_per_block; ++i) {
            layers.emplace_back(d, cfg.heads, cfg.ffn_mult, cfg.dropout, r, 3.0);
        }
        widen = linear<T>(d, d_next, r);
    }

    tensor<T> forward(const tensor<T>& x, const projector_config& cfg, const fwd_ctx<T>& ctx) const {
        auto h = conv1d(x, conv_w, conv_b, cfg.stride, cfg.pad);
        h = add(h, sinusoidal_positions<T>(h.rows(), dim));
        for (const auto& layer : layers) h = layer.forward(h, ctx);
        return widen.forward(h);
    }

    void params(param_list<T>& out, const std::string& prefix) const {
        out.push_back({prefix + ".conv.w", conv_w});
        out.push_back({prefix + ".conv.b", conv_b});
        for (size_t i = 0; i < layers.size(); ++i) {
            layers[i].params(out, prefix + ".enc" + std::to_string(i));
        }
        widen.params(out, prefix + ".widen");
    }
};

template <class T>
class projector_model {
public:
    projector_model() = default;

    projector_model(const projector_config& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        rng r(seed_stream(seed, 0x9105));
        block1_ = projector_block<T>(cfg.d_in, cfg.d_mid, cfg, r);
        block2_ = projector_block<T>(cfg.d_mid, cfg.d_out, cfg, r);
        final_fc_ = linear<T>(cfg.d_out, cfg.d_out, r);
        // start the output head small: token-embedding targets are much
        // smaller than unit scale, and a large initial output pushes early
        // training into the constant-pad solution
        init_normal(final_fc_.w, r, 0.02);
    }

    const projector_config& config() const { return cfg_; }

    // smallest averaged input length that survives both convolutions
    int min_input_length() const {
        const int need = std::max(1, cfg_.kernel - 2 * cfg_.pad);
        for (int t = need;; ++t) {
            const int l1 = (t + 2 * cfg_.pad - cfg_.kernel) / cfg_.stride + 1;
            if (l1 >= need) return t;
        }
    }

    // pure length arithmetic matching forward()
    int output_length(int t_avg) const {
        check_length(t_avg);
        const int l1 = conv1d_output_length(t_avg, cfg_.kernel, cfg_.stride, cfg_.pad);
        return conv1d_output_length(l1, cfg_.kernel, cfg_.stride, cfg_.pad);
    }

    // frames must already be averaged; returns [output_length x d_out]
    tensor<T> forward(const tensor<T>& frames, const fwd_ctx<T>& ctx = {}) const {
        if (frames.rank() != 2 || frames.cols() != cfg_.d_in) {
            throw dim_error("projector: input must be [T x d_in]");
        }
        check_length(frames.rows());
        auto h = block1_.forward(frames, cfg_, ctx);
        h = block2_.forward(h, cfg_, ctx);
        return final_fc_.forward(h);
    }

    param_list<T> params() const {
        param_list<T> out;
        block1_.params(out, "proj.block1");
        block2_.params(out, "proj.block2");
        final_fc_.params(out, "proj.final");
        return out;
    }

    size_t parameter_count() const { return param_count(params()); }

private:
    void check_length(int t_avg) const {
        const int min_t = min_input_length();
        if (t_avg < min_t) {
            throw length_error("projector: input length " + std::to_string(t_avg) +
                               " too short for two convolutions (minimum " +
                               std::to_string(min_t) + ")");
        }
    }

    projector_config cfg_;
    projector_block<T> block1_, block2_;
    linear<T> final_fc_;
};

}  // namespace sm
