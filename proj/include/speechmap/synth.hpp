// Synthetic frame generator standing in for a frozen speech encoder. Each
// token id is expanded into a run of noisy copies of a fixed acoustic vector
// plus a word-order phase component (contextual encoders carry temporal
// structure in their states, not just local content), followed by a trailing
// run of noisy silence frames. The true frame-to-token mapping is known
// exactly.
#pragma once

#include "speechmap/common.hpp"
#include "speechmap/vocab.hpp"

#include <vector>

namespace sm {

struct synth_config {
    int d_in = 16;
    int repeat_min = 8;
    int repeat_max = 12;
    double noise_sigma = 0.05;
    // trailing silence keeps every utterance long enough that the projector
    // output has room for all tokens plus at least one pad
    int silence_frames = 16;
    // L2 norm of each acoustic row; speech-encoder features sit well above
    // unit scale, and the margin over noise_sigma comes from this
    double acoustic_norm = 4.0;
    // strength of the word-index phase mixed into every frame of a token
    double order_scale = 1.0;

    void validate() const {
        if (d_in < 1) throw config_error("synth.d_in must be positive");
        if (repeat_min < 1 || repeat_max < repeat_min) {
            throw config_error("synth.repeat_min/repeat_max must satisfy 1 <= min <= max");
        }
        if (noise_sigma < 0) throw config_error("synth.noise_sigma must be non-negative");
        if (silence_frames < 0) throw config_error("synth.silence_frames must be non-negative");
        if (acoustic_norm <= 0) throw config_error("synth.acoustic_norm must be positive");
        if (order_scale < 0) throw config_error("synth.order_scale must be non-negative");
    }
};

template <class T>
class synth_sfm {
public:
    synth_sfm(const vocab& v, const synth_config& cfg, uint64_t seed)
        : cfg_(cfg), vocab_size_(v.size()), seed_(seed) {
        cfg.validate();
        // unit-norm acoustic rows, one per vocabulary entry
        table_.assign(size_t(vocab_size_) * cfg.d_in, T(0));
        rng r(seed_stream(seed, 0xac057));
        for (int i = 0; i < vocab_size_; ++i) {
            T* row = table_.data() + size_t(i) * cfg.d_in;
            double sq = 0.0;
            for (int j = 0; j < cfg.d_in; ++j) {
                row[j] = T(r.normal());
                sq += double(row[j]) * double(row[j]);
            }
            const T inv = T(1.0 / std::sqrt(sq > 0 ? sq : 1.0));
            for (int j = 0; j < cfg.d_in; ++j) row[j] *= inv;
        }
        decorrelate_rows_();
        for (auto& x : table_) x *= T(cfg.acoustic_norm);
    }

    const synth_config& config() const { return cfg_; }
    const std::vector<T>& acoustic_table() const { return table_; }

    // per-token repetition counts for one sample (drawn from its own stream,
    // so lengths are computable without generating frames)
    std::vector<int> repeats(const std::vector<int>& token_ids, uint64_t sample_seed) const {
        rng r(seed_stream(seed_, 0x4e9ea7, sample_seed));
        std::vector<int> reps(token_ids.size());
        for (auto& rep : reps) rep = int(r.uniform_int(cfg_.repeat_min, cfg_.repeat_max));
        return reps;
    }

    int frame_count(const std::vector<int>& token_ids, uint64_t sample_seed) const {
        int total = cfg_.silence_frames;
        for (int rep : repeats(token_ids, sample_seed)) total += rep;
        return total;
    }

    // sinusoidal word-index phase for the t-th word of an utterance
    std::vector<T> order_phase(int word_index) const {
        std::vector<T> out(size_t(cfg_.d_in), T(0));
        for (int j = 0; j < cfg_.d_in; j += 2) {
            const double angle = double(word_index) / std::pow(64.0, double(j) / double(cfg_.d_in));
            out[size_t(j)] = T(cfg_.order_scale * std::sin(angle));
            if (j + 1 < cfg_.d_in) out[size_t(j) + 1] = T(cfg_.order_scale * std::cos(angle));
        }
        return out;
    }

    // frames for one utterance: row-major [frame_count x d_in]
    std::vector<T> synth(const std::vector<int>& token_ids, uint64_t sample_seed) const {
        for (int id : token_ids) {
            if (id < 0 || id >= vocab_size_) throw argument_error("synth: token id out of range");
            if (id < vocab::num_reserved) throw argument_error("synth: reserved token id in input");
        }
        const auto reps = repeats(token_ids, sample_seed);
        rng noise(seed_stream(seed_, 0x015e7, sample_seed));

        int total = cfg_.silence_frames;
        for (int rep : reps) total += rep;
        std::vector<T> frames(size_t(total) * cfg_.d_in);
        T* dst = frames.data();
        auto emit = [&](const T* row, const T* phase) {
            for (int j = 0; j < cfg_.d_in; ++j) {
                T v = row ? row[j] : T(0);
                if (phase) v += phase[j];
                if (cfg_.noise_sigma > 0) v += T(noise.normal() * cfg_.noise_sigma);
                *dst++ = v;
            }
        };
        for (size_t t = 0; t < token_ids.size(); ++t) {
            const T* row = table_.data() + size_t(token_ids[t]) * cfg_.d_in;
            const auto phase = order_phase(int(t));
            for (int rep = 0; rep < reps[t]; ++rep) {
                emit(row, cfg_.order_scale > 0 ? phase.data() : nullptr);
            }
        }
        for (int s = 0; s < cfg_.silence_frames; ++s) emit(nullptr, nullptr);
        return frames;
    }

private:
    // Push apart near-collinear acoustic rows so distinct words stay
    // acoustically separable, the way a discriminative speech encoder keeps
    // them. Plain gaussian rows in a small d_in leave word pairs with
    // cosine similarity up to ~0.8, which the projector cannot untangle.
    void decorrelate_rows_() {
        const int d = cfg_.d_in;
        const double tau = 0.35;
        auto renorm = [&](int i) {
            T* row = table_.data() + size_t(i) * d;
            double sq = 0.0;
            for (int j = 0; j < d; ++j) sq += double(row[j]) * double(row[j]);
            const T inv = T(1.0 / std::sqrt(sq > 0 ? sq : 1.0));
            for (int j = 0; j < d; ++j) row[j] *= inv;
        };
        for (int it = 0; it < 400; ++it) {
            bool any = false;
            for (int i = 0; i < vocab_size_; ++i) {
                for (int j = i + 1; j < vocab_size_; ++j) {
                    T* a = table_.data() + size_t(i) * d;
                    T* b = table_.data() + size_t(j) * d;
                    double dot = 0.0;
                    for (int k = 0; k < d; ++k) dot += double(a[k]) * double(b[k]);
                    if (std::abs(dot) <= tau) continue;
                    any = true;
                    const T step = T(0.5 * (std::abs(dot) - tau) * (dot > 0 ? 1.0 : -1.0));
                    for (int k = 0; k < d; ++k) {
                        const T ak = a[k], bk = b[k];
                        a[k] = ak - step * bk;
                        b[k] = bk - step * ak;
                    }
                }
            }
            for (int i = 0; i < vocab_size_; ++i) renorm(i);
            if (!any) break;
        }
    }

    synth_config cfg_;
    int vocab_size_;
    uint64_t seed_;
    std::vector<T> table_;
};

// stable per-sample seed derived from the sample id
inline uint64_t sample_seed_of(const std::string& sample_id) { return fnv1a64(sample_id); }

}  // namespace sm
