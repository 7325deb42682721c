// Small decoder-only transformer used as the frozen target model. It owns
// the embedding table that stage-1 targets are built from, counts forward
// calls (so stage-1 independence can be asserted), and refuses parameter
// updates once frozen.
#pragma once

#include "speechmap/nn.hpp"
#include "speechmap/vocab.hpp"

#include <atomic>
#include <string>
#include <vector>

namespace sm {

struct decoder_config {
    int d_model = 64;
    int layers = 4;
    int heads = 4;
    int ffn_mult = 4;
    int max_len = 96;
    double dropout = 0.0;

    void validate() const {
        if (d_model < 1 || layers < 1) throw config_error("decoder: d_model/layers must be positive");
        if (heads < 1 || d_model % heads != 0) throw config_error("decoder.heads must divide d_model");
        if (ffn_mult < 1) throw config_error("decoder.ffn_mult must be >= 1");
        if (max_len < 4) throw config_error("decoder.max_len too small");
        if (dropout < 0.0 || dropout >= 1.0) throw config_error("decoder.dropout must be in [0,1)");
    }
};

template <class T>
struct greedy_result {
    std::vector<int> ids;
    bool truncated = false;
};

template <class T>
class toy_decoder {
public:
    toy_decoder() = default;

    toy_decoder(const vocab& v, const decoder_config& cfg, uint64_t seed) : vocab_(v), cfg_(cfg) {
        cfg.validate();
        rng r(seed_stream(seed, 0xdec0));
        embed_ = tensor<T>::zeros({v.size(), cfg.d_model}, true);
        init_normal(embed_, r, 0.1);
        pos_ = tensor<T>::zeros({cfg.max_len, cfg.d_model}, true);
        init_normal(pos_, r, 0.05);
        for (int i = 0; i < cfg.layers; ++i) {
            layers_.emplace_back(cfg.d_model, cfg.heads, cfg.ffn_mult, cfg.dropout, r);
        }
        final_ln_ = rms_norm<T>(cfg.d_model);
        head_ = linear<T>(cfg.d_model, v.size(), r);
        // small head init keeps untrained logits near uniform
        init_normal(head_.w, r, 0.02);
    }

    const vocab& vocabulary() const { return vocab_; }
    const decoder_config& config() const { return cfg_; }
    const tensor<T>& embedding_table() const { return embed_; }
    bool frozen() const { return frozen_; }
    uint64_t forward_calls() const { return forward_calls_->load(); }
    void reset_forward_calls() { forward_calls_->store(0); }

    void freeze() {
        for (auto& np : params()) np.t.set_requires_grad(false);
        frozen_ = true;
    }

    // rows of the embedding table as a constant tensor (no graph)
    tensor<T> embed_const(const std::vector<int>& ids) const {
        auto out = tensor<T>::zeros({int(ids.size()), cfg_.d_model});
        for (size_t i = 0; i < ids.size(); ++i) {
            const int id = ids[i];
            if (id < 0 || id >= vocab_.size()) throw argument_error("decoder: token id out of range");
            std::copy_n(embed_.data().data() + size_t(id) * cfg_.d_model, size_t(cfg_.d_model),
                        out.data().data() + i * size_t(cfg_.d_model));
        }
        return out;
    }

    tensor<T> pad_row() const { return embed_const({vocab::pad_emb}); }

    // causal forward over a sequence of input embeddings; returns logits
    // for every position
    tensor<T> forward_logits(const tensor<T>& input_embeddings, const fwd_ctx<T>& ctx = {}) const {
        forward_calls_->fetch_add(1);
        if (input_embeddings.rank() != 2 || input_embeddings.cols() != cfg_.d_model) {
            throw dim_error("decoder: input must be [N x d_model]");
        }
        const int n = input_embeddings.rows();
        if (n > cfg_.max_len) {
            throw length_error("decoder: sequence length " + std::to_string(n) +
                               " exceeds max_len " + std::to_string(cfg_.max_len));
        }
        auto x = add(input_embeddings, slice_rows(pos_, 0, n));
        for (const auto& layer : layers_) x = layer.forward(x, ctx);
        x = final_ln_.forward(x);
        return head_.forward(x);
    }

    // teacher-forced CE: input = context ++ embeddings(targets[:-1]) with the
    // label row i predicted at position ctx_len-1+i; labels are targets + EOS
    struct ce_result {
        tensor<T> ce;      // scalar
        tensor<T> logits;  // label positions only
    };

    ce_result teacher_forced_ce(const tensor<T>& context_embeddings,
                                const std::vector<int>& target_ids,
                                const fwd_ctx<T>& ctx = {}) const {
        const int c = context_embeddings.rows();
        std::vector<int> labels = target_ids;
        labels.push_back(vocab::eos);
        tensor<T> input = target_ids.empty()
            ? context_embeddings
            : concat_rows<T>({context_embeddings, embed_const(target_ids)});
        auto logits = forward_logits(input, ctx);
        auto label_logits = slice_rows(logits, c - 1, c + int(target_ids.size()));
        auto ce = cross_entropy_rows(label_logits, labels);
        return {ce, label_logits};
    }

    // argmax decoding until EOS or max_tokens; EOS is not included in ids.
    // truncated marks hitting the cap (including stuck repetition loops).
    greedy_result<T> greedy_decode(const tensor<T>& context_embeddings, int max_tokens = 150) const {
        if (max_tokens < 1) throw argument_error("greedy_decode: max_tokens must be >= 1");
        greedy_result<T> out;
        std::vector<T> seq(context_embeddings.data());
        int n = context_embeddings.rows();
        const int d = cfg_.d_model;
        for (int step = 0; step < max_tokens; ++step) {
            auto input = tensor<T>::from({n, d}, seq);
            auto logits = forward_logits(input);
            const T* last = logits.data().data() + size_t(n - 1) * vocab_.size();
            int best = 0;
            for (int j = 1; j < vocab_.size(); ++j) {
                if (last[j] > last[best]) best = j;
            }
            if (best == vocab::eos) return out;
            out.ids.push_back(best);
            if (n >= cfg_.max_len) {
                out.truncated = true;
                return out;
            }
            seq.insert(seq.end(),
                       embed_.data().begin() + size_t(best) * d,
                       embed_.data().begin() + size_t(best + 1) * d);
            ++n;
        }
        out.truncated = true;
        return out;
    }

    param_list<T> params() const {
        param_list<T> out;
        out.push_back({"dec.embed", embed_});
        out.push_back({"dec.pos", pos_});
        for (size_t i = 0; i < layers_.size(); ++i) {
            layers_[i].params(out, "dec.layer" + std::to_string(i));
        }
        final_ln_.params(out, "dec.final_ln");
        head_.params(out, "dec.head");
        return out;
    }

    // sha256 over all parameter bytes, for the frozen-weights contract
    std::array<uint8_t, 32> checksum() const {
        std::vector<uint8_t> blob;
        for (const auto& np : params()) {
            const auto& v = np.t.data();
            const size_t off = blob.size();
            blob.resize(off + v.size() * sizeof(T));
            std::memcpy(blob.data() + off, v.data(), v.size() * sizeof(T));
        }
        return sha256(blob.data(), blob.size());
    }

private:
    vocab vocab_;
    decoder_config cfg_;
    tensor<T> embed_, pos_;
    std::vector<decoder_layer<T>> layers_;
    rms_norm<T> final_ln_;
    linear<T> head_;
    bool frozen_ = false;
    std::shared_ptr<std::atomic<uint64_t>> forward_calls_ = std::make_shared<std::atomic<uint64_t>>(0);
};

}  // namespace sm
