// Training objectives.
//
// Split masked MSE:  l_mse = alpha * mse_word + (10 - alpha) * mse_pad,
// with both sides scaled by mse_scale before squaring. The cosine term is
// computed over word positions only and is scale-invariant, so it is never
// scaled. Stage 1 totals l_mse - gamma * l_cosine; stage 2 totals
// (1 - sigma) * ce + sigma * l_mse.
#pragma once

#include "speechmap/targets.hpp"
#include "speechmap/tensor.hpp"

namespace sm {

struct loss_weights {
    double alpha = 5.0;       // word-to-pad MSE ratio, in [1, 9]
    double gamma = 100.0;     // cosine weight, >= 0
    double sigma = 0.9;       // stage-2 MSE share, in [0, 1]
    double mse_scale = 1e3;   // embedding scale applied inside the MSE only

    void validate() const {
        if (alpha < 1.0 || alpha > 9.0) throw config_error("loss.alpha must be in [1, 9]");
        if (gamma < 0.0) throw config_error("loss.gamma must be non-negative");
        if (sigma < 0.0 || sigma > 1.0) throw config_error("loss.sigma must be in [0, 1]");
        if (mse_scale <= 0.0) throw config_error("loss.mse_scale must be positive");
    }
};

template <class T>
struct loss_breakdown {
    T mse_word = T(0);
    T mse_pad = T(0);
    T l_mse = T(0);
    T l_cosine = T(0);
    T l_ce = T(0);
    T total = T(0);
    int word_count = 0;
    int pad_count = 0;
    int zero_norm_rows = 0;
    tensor<T> total_node;  // differentiable total
};

// Eq-style split MSE; fills the mse_* and l_mse fields and returns the
// l_mse graph node. An empty pad mask contributes exactly zero.
template <class T>
tensor<T> split_mse(const tensor<T>& pred, const tensor<T>& target,
                    const std::vector<uint8_t>& word_mask, const std::vector<uint8_t>& pad_mask,
                    const loss_weights& w, loss_breakdown<T>& out) {
    w.validate();
    if (word_mask.size() != pad_mask.size()) throw dim_error("split_mse: mask length mismatch");
    for (size_t i = 0; i < word_mask.size(); ++i) {
        if (word_mask[i] && pad_mask[i]) throw dim_error("split_mse: masks overlap");
    }
    int wc = 0, pc = 0;
    for (uint8_t b : word_mask) wc += (b != 0);
    for (uint8_t b : pad_mask) pc += (b != 0);
    out.word_count = wc;
    out.pad_count = pc;

    auto mse_word = masked_scaled_mse(pred, target, word_mask, T(w.mse_scale));
    out.mse_word = mse_word.item();
    tensor<T> l_mse;
    if (pc > 0) {
        auto mse_pad = masked_scaled_mse(pred, target, pad_mask, T(w.mse_scale));
        out.mse_pad = mse_pad.item();
        l_mse = add(scale(mse_word, T(w.alpha)), scale(mse_pad, T(10.0 - w.alpha)));
    } else {
        out.mse_pad = T(0);
        l_mse = scale(mse_word, T(w.alpha));
    }
    out.l_mse = l_mse.item();
    return l_mse;
}

// mean cosine similarity over the word-masked rows (unscaled embeddings)
template <class T>
tensor<T> cosine_term(const tensor<T>& pred, const tensor<T>& target,
                      const std::vector<uint8_t>& word_mask, loss_breakdown<T>& out) {
    auto cos = masked_mean_cosine(pred, target, word_mask, &out.zero_norm_rows);
    out.l_cosine = cos.item();
    return cos;
}

template <class T>
loss_breakdown<T> stage1_loss(const tensor<T>& pred, const target_sequence<T>& tgt,
                              const loss_weights& w) {
    if (pred.rank() != 2 || pred.rows() != tgt.length || pred.cols() != tgt.dim) {
        throw dim_error("stage1_loss: prediction shape does not match target");
    }
    loss_breakdown<T> out;
    auto target = tgt.embeddings_tensor();
    auto l_mse = split_mse(pred, target, tgt.word_mask, tgt.pad_mask, w, out);
    auto cos = cosine_term(pred, target, tgt.word_mask, out);
    out.total_node = sub(l_mse, scale(cos, T(w.gamma)));
    out.total = out.total_node.item();
    return out;
}

// ce must come from the decoder forward on the same sample
template <class T>
loss_breakdown<T> stage2_loss(const tensor<T>& ce, const tensor<T>& pred,
                              const target_sequence<T>& tgt, const loss_weights& w) {
    if (ce.numel() != 1) throw dim_error("stage2_loss: ce must be scalar");
    if (pred.rank() != 2 || pred.rows() != tgt.length || pred.cols() != tgt.dim) {
        throw dim_error("stage2_loss: prediction shape does not match target");
    }
    w.validate();
    loss_breakdown<T> out;
    out.l_ce = ce.item();
    if (w.sigma == 0.0) {
        // pure CE adaptation; the MSE branch is skipped entirely
        out.total_node = ce;
        out.total = ce.item();
        return out;
    }
    auto target = tgt.embeddings_tensor();
    auto l_mse = split_mse(pred, target, tgt.word_mask, tgt.pad_mask, w, out);
    out.total_node = add(scale(ce, T(1.0 - w.sigma)), scale(l_mse, T(w.sigma)));
    out.total = out.total_node.item();
    return out;
}

}  // namespace sm
