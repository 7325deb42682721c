// Training loops: decoder pretraining on the repeat task, stage-1
// embedding-matching against the frozen table, stage-2 adaptation against
// the frozen decoder, and the sigma sweep built on top of stage 2.
#pragma once

#include "speechmap/batching.hpp"
#include "speechmap/checkpoint.hpp"
#include "speechmap/losses.hpp"
#include "speechmap/metrics.hpp"
#include "speechmap/optimizer.hpp"
#include "speechmap/probe.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace sm {

struct loss_scalars {
    long step = 0;
    double lr = 0.0;
    double mse_word = 0.0;
    double mse_pad = 0.0;
    double l_mse = 0.0;
    double l_cosine = 0.0;
    double l_ce = 0.0;
    double total = 0.0;
    long batch_frames = 0;
};

// one line per step, space-separated key=value
inline std::string format_log_line(const loss_scalars& s) {
    char buf[360];
    std::snprintf(buf, sizeof(buf),
                  "step=%ld lr=%.10g mse_word=%.10g mse_pad=%.10g l_mse=%.10g "
                  "l_cosine=%.10g l_ce=%.10g total=%.10g batch_frames=%ld\n",
                  s.step, s.lr, s.mse_word, s.mse_pad, s.l_mse, s.l_cosine, s.l_ce, s.total,
                  s.batch_frames);
    return buf;
}

// ------------------------------------------------------------ sample prep

template <class T>
struct prepped_sample {
    std::string id;
    std::vector<int> token_ids;
    std::vector<T> avg_frames;  // [t_avg x d_in]
    int t_avg = 0;
    int out_len = 0;  // projector output length
    target_sequence<T> target;
    bool has_target = false;
};

// synthesize, average and (optionally) build targets for every sample.
// Samples whose target cannot be built are dropped under skip_warn.
template <class T>
std::vector<prepped_sample<T>> prepare_samples(const std::vector<corpus_sample>& samples,
                                               const vocab& v, const synth_sfm<T>& synth,
                                               const projector_model<T>& proj,
                                               const std::vector<T>* embed_table, int table_rows,
                                               int d_model, length_mismatch_policy policy,
                                               std::ostream* log = nullptr) {
    std::vector<prepped_sample<T>> out;
    out.reserve(samples.size());
    const int d_in = synth.config().d_in;
    const int factor = proj.config().avg_factor;
    for (const auto& s : samples) {
        prepped_sample<T> ps;
        ps.id = s.id;
        ps.token_ids = tokenize(v, normalize(s.text));
        const uint64_t ss = sample_seed_of(s.id);
        const auto raw = synth.synth(ps.token_ids, ss);
        const int t_raw = int(raw.size()) / d_in;
        ps.avg_frames = average_frames(raw, t_raw, d_in, factor);
        ps.t_avg = averaged_length(t_raw, factor);
        ps.out_len = proj.output_length(ps.t_avg);
        if (embed_table) {
            if (ps.out_len < int(ps.token_ids.size()) + 1) {
                if (policy == length_mismatch_policy::abort_run) {
                    throw length_error("sample " + s.id + ": output length " +
                                       std::to_string(ps.out_len) + " cannot hold " +
                                       std::to_string(ps.token_ids.size()) + " tokens plus one pad");
                }
                if (log) *log << "warn: skipping sample " << s.id << " (target does not fit)\n";
                continue;
            }
            ps.target = build_target(s.text, v, *embed_table, table_rows, d_model, ps.out_len);
            ps.has_target = true;
        }
        out.push_back(std::move(ps));
    }
    return out;
}

// ------------------------------------------------------------ decoder pretrain

struct decoder_pretrain_config {
    double lr = 1e-3;
    int batch_sentences = 24;
    long max_steps = 8000;
    long eval_every = 250;
    int eval_samples = 150;
    double target_wer = 2.0;
    double pad_augment_prob = 0.5;
    double grad_clip = 1.0;

    void validate() const {
        if (lr <= 0) throw config_error("decoder_pretrain.lr must be positive");
        if (batch_sentences < 1) throw config_error("decoder_pretrain.batch_sentences must be positive");
        if (max_steps < 1) throw config_error("decoder_pretrain.max_steps must be positive");
        if (eval_every < 1) throw config_error("decoder_pretrain.eval_every must be positive");
        if (eval_samples < 1) throw config_error("decoder_pretrain.eval_samples must be positive");
        if (target_wer < 0) throw config_error("decoder_pretrain.target_wer must be non-negative");
        if (pad_augment_prob < 0 || pad_augment_prob > 1) {
            throw config_error("decoder_pretrain.pad_augment_prob must be in [0,1]");
        }
    }
};

struct pretrain_result {
    long steps = 0;
    double final_wer = 0.0;
};

// repeat-task WER on clean embeddings; optionally with appended pads
template <class T>
double repeat_task_wer(const toy_decoder<T>& dec, const std::vector<corpus_sample>& samples,
                       int limit, int max_tokens = 150) {
    const vocab& v = dec.vocabulary();
    const int n = std::min(int(samples.size()), limit);
    if (n == 0) throw argument_error("repeat_task_wer: empty corpus");
    std::vector<std::array<long, 2>> counts(static_cast<size_t>(n));
    #pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)n; ++i) {
        const auto& s = samples[size_t(i)];
        const auto ids = tokenize(v, normalize(s.text));
        auto context = concat_rows<T>({dec.embed_const({vocab::task}), dec.embed_const(ids),
                                       dec.embed_const({vocab::sep})});
        auto decoded = dec.greedy_decode(context, max_tokens);
        const auto rw = split_words(normalize(s.text));
        const auto hw = split_words(detokenize(v, decoded.ids));
        counts[size_t(i)] = {long(edit_distance(rw, hw)), long(rw.size())};
    }
    long edits = 0, words = 0;
    for (const auto& c : counts) {
        edits += c[0];
        words += c[1];
    }
    return words > 0 ? 100.0 * double(edits) / double(words) : 0.0;
}

// train the decoder on the repeat task until held-out WER reaches the gate.
// Context layout: [task] e(w1..wn) [k pads with prob pad_augment_prob] [sep],
// teacher-forced labels w1..wn eos.
template <class T>
pretrain_result pretrain_decoder(toy_decoder<T>& dec, const std::vector<corpus_sample>& train,
                                 const std::vector<corpus_sample>& dev,
                                 const decoder_pretrain_config& cfg, uint64_t seed,
                                 std::ostream* log = nullptr) {
    cfg.validate();
    if (dec.frozen()) throw contract_error("pretrain_decoder: decoder already frozen");
    if (train.empty() || dev.empty()) throw argument_error("pretrain_decoder: empty corpus");

    const vocab& v = dec.vocabulary();
    std::vector<std::vector<int>> train_ids;
    train_ids.reserve(train.size());
    for (const auto& s : train) train_ids.push_back(tokenize(v, normalize(s.text)));

    auto params = dec.params();
    adamw<T> opt(tensors_of(params), 0.9, 0.999, 1e-8, 0.0);
    rng pick(seed_stream(seed, 0x91c));
    rng aug(seed_stream(seed, 0xa06));

    pretrain_result result;
    for (long step = 1; step <= cfg.max_steps; ++step) {
        tensor<T> batch_loss;
        for (int b = 0; b < cfg.batch_sentences; ++b) {
            const auto& ids = train_ids[pick.bounded(train_ids.size())];
            std::vector<int> ctx_ids;
            ctx_ids.push_back(vocab::task);
            ctx_ids.insert(ctx_ids.end(), ids.begin(), ids.end());
            if (aug.uniform() < cfg.pad_augment_prob) {
                const int k = int(aug.uniform_int(1, std::max<int64_t>(1, int64_t(ids.size()))));
                for (int p = 0; p < k; ++p) ctx_ids.push_back(vocab::pad_emb);
            }
            ctx_ids.push_back(vocab::sep);
            auto context = embedding_rows(dec.embedding_table(), ctx_ids);
            auto ce = dec.teacher_forced_ce(context, ids).ce;
            batch_loss = batch_loss.valid() ? add(batch_loss, ce) : ce;
        }
        auto loss = scale(batch_loss, T(1) / T(cfg.batch_sentences));
        opt.zero_grad();
        backward(loss);
        opt.clip_grad_norm(cfg.grad_clip);
        opt.step(cfg.lr);

        if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
            const double w = repeat_task_wer(dec, dev, cfg.eval_samples);
            if (log) {
                *log << "pretrain step=" << step << " loss=" << loss.item()
                     << " dev_wer=" << w << "\n";
            }
            result.steps = step;
            result.final_wer = w;
            if (w <= cfg.target_wer) return result;
        }
    }
    throw training_error("pretrain_decoder: WER gate " + std::to_string(cfg.target_wer) +
                         " not reached within " + std::to_string(cfg.max_steps) +
                         " steps (final WER " + std::to_string(result.final_wer) + ")");
}

// ------------------------------------------------------------ stage 1

struct stage1_config {
    schedule_config schedule{1e-4, 500, 5000, 1e-8, schedule_mode::warmup_cosine};
    long total_steps = 5000;
    long batch_cap = 1024;
    loss_weights weights{5.0, 100.0, 0.9, 1e3};
    double grad_clip = 1.0;
    long checkpoint_every = 1000;
    length_mismatch_policy on_length_mismatch = length_mismatch_policy::skip_warn;

    void validate() const {
        schedule_config sc = schedule;
        sc.total_steps = std::max(sc.total_steps, total_steps);
        sc.validate();
        if (total_steps < 1) throw config_error("stage1.total_steps must be positive");
        if (batch_cap < 1) throw config_error("stage1.batch_cap must be positive");
        weights.validate();
        if (grad_clip <= 0) throw config_error("stage1.grad_clip must be positive");
        if (checkpoint_every < 1) throw config_error("stage1.checkpoint_every must be positive");
    }
};

template <class T>
struct stage1_result {
    long steps = 0;
    std::vector<loss_scalars> history;
};

// embedding-matching pretraining: no decoder forward pass is involved, only
// the (read-only) embedding table consumed through the prepared targets
template <class T>
stage1_result<T> train_stage1(projector_model<T>& proj, std::vector<prepped_sample<T>>& data,
                              const stage1_config& cfg, uint64_t seed, adamw<T>& opt,
                              long start_step, std::ostream* log,
                              const std::function<void(long)>& on_checkpoint = {}) {
    cfg.validate();
    if (data.empty()) throw argument_error("train_stage1: no usable samples");
    for (const auto& ps : data) {
        if (!ps.has_target) throw state_error("train_stage1: samples were prepared without targets");
    }

    schedule_config sched = cfg.schedule;
    sched.total_steps = std::max(sched.total_steps, cfg.total_steps);

    std::vector<int> lengths;
    lengths.reserve(data.size());
    for (const auto& ps : data) lengths.push_back(ps.t_avg);

    rng drop_rng(0);
    fwd_ctx<T> train_ctx{true, &drop_rng};

    stage1_result<T> result;
    result.history.reserve(size_t(cfg.total_steps - start_step));

    // The epoch/batch plan and the per-step dropout stream depend only on
    // (seed, step), so a resumed run replays the identical trajectory: steps
    // below start_step are skipped without executing them.
    long step = 0;
    long epoch = 0;
    while (step < cfg.total_steps) {
        rng epoch_rng(seed_stream(seed, 0xba7c4, uint64_t(epoch)));
        auto epoch_plan = make_epoch_batches(lengths, cfg.batch_cap, epoch_rng, cfg.on_length_mismatch);
        if (epoch_plan.batches.empty()) throw argument_error("train_stage1: batching produced no batches");
        for (const auto& b : epoch_plan.batches) {
            if (step >= cfg.total_steps) break;
            if (step < start_step) {
                ++step;
                continue;
            }
            const double lr = lr_at(step, sched);
            drop_rng.reseed(seed_stream(seed, 0xd209, uint64_t(step)));
            tensor<T> batch_total;
            loss_scalars sc;
            const int bs = int(b.sample_indices.size());
            try {
                for (int idx : b.sample_indices) {
                    auto& ps = data[size_t(idx)];
                    auto frames = tensor<T>::from({ps.t_avg, proj.config().d_in}, ps.avg_frames);
                    auto pred = proj.forward(frames, train_ctx);
                    auto lb = stage1_loss(pred, ps.target, cfg.weights);
                    sc.mse_word += double(lb.mse_word);
                    sc.mse_pad += double(lb.mse_pad);
                    sc.l_mse += double(lb.l_mse);
                    sc.l_cosine += double(lb.l_cosine);
                    sc.total += double(lb.total);
                    batch_total = batch_total.valid() ? add(batch_total, lb.total_node) : lb.total_node;
                }
                auto loss = scale(batch_total, T(1) / T(bs));
                opt.zero_grad();
                backward(loss);
                opt.clip_grad_norm(cfg.grad_clip);
                opt.step(lr);
            } catch (const numeric_error& e) {
                throw numeric_error(std::string(e.what()) + " at step " + std::to_string(step + 1) +
                                    "; last checkpoint at step " +
                                    std::to_string((step / cfg.checkpoint_every) * cfg.checkpoint_every));
            }
            ++step;

            sc.step = step;
            sc.lr = lr;
            sc.mse_word /= bs;
            sc.mse_pad /= bs;
            sc.l_mse /= bs;
            sc.l_cosine /= bs;
            sc.total /= bs;
            sc.l_ce = 0.0;
            sc.batch_frames = b.total_frames;
            if (log) *log << format_log_line(sc);
            result.history.push_back(sc);

            if (on_checkpoint && step % cfg.checkpoint_every == 0) on_checkpoint(step);
        }
        ++epoch;
    }
    result.steps = step;
    return result;
}

// ------------------------------------------------------------ stage 2

struct stage2_config {
    double lr = 1e-4;  // constant schedule
    long steps = 1000;
    int grad_accum = 8;
    int batch_size = 12;
    loss_weights weights{5.0, 100.0, 0.9, 1e3};
    double grad_clip = 1.0;

    void validate() const {
        if (lr <= 0) throw config_error("stage2.lr must be positive");
        if (steps < 1) throw config_error("stage2.steps must be positive");
        if (grad_accum < 1) throw config_error("stage2.grad_accum must be positive");
        if (batch_size < 1) throw config_error("stage2.batch_size must be positive");
        weights.validate();
        if (grad_clip <= 0) throw config_error("stage2.grad_clip must be positive");
    }
};

template <class T>
struct stage2_result {
    long optimizer_steps = 0;
    long micro_batches = 0;
    std::vector<loss_scalars> history;  // one entry per optimizer step
};

// adapt the projector against the frozen decoder with
// (1 - sigma) * CE + sigma * split-MSE; decoder weights must not move
template <class T>
stage2_result<T> train_stage2(projector_model<T>& proj, const toy_decoder<T>& dec,
                              std::vector<prepped_sample<T>>& data, const stage2_config& cfg,
                              uint64_t seed, std::ostream* log = nullptr) {
    cfg.validate();
    if (!dec.frozen()) throw contract_error("train_stage2: decoder must be frozen before adaptation");
    if (data.empty()) throw argument_error("train_stage2: no usable samples");
    const bool need_targets = cfg.weights.sigma != 0.0;
    if (need_targets) {
        for (const auto& ps : data) {
            if (!ps.has_target) throw state_error("train_stage2: samples lack targets but sigma > 0");
        }
    }

    const auto checksum_before = dec.checksum();
    auto params = proj.params();
    adamw<T> opt(tensors_of(params), 0.9, 0.999, 1e-8, 0.0);
    rng order_rng(seed_stream(seed, 0x57a6e2));
    rng drop_rng(seed_stream(seed, 0xd209b));
    fwd_ctx<T> train_ctx{true, &drop_rng};

    std::vector<int> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    size_t cursor = order.size();  // forces a shuffle on first use

    stage2_result<T> result;
    result.history.reserve(size_t(cfg.steps));
    opt.zero_grad();

    for (long step = 1; step <= cfg.steps; ++step) {
        loss_scalars sc;
        long frames = 0;
        for (int micro = 0; micro < cfg.grad_accum; ++micro) {
            tensor<T> micro_total;
            for (int b = 0; b < cfg.batch_size; ++b) {
                if (cursor >= order.size()) {
                    for (size_t i = order.size(); i > 1; --i) {
                        std::swap(order[i - 1], order[size_t(order_rng.bounded(i))]);
                    }
                    cursor = 0;
                }
                auto& ps = data[order[cursor++]];
                frames += ps.t_avg;
                auto in = tensor<T>::from({ps.t_avg, proj.config().d_in}, ps.avg_frames);
                auto pred = proj.forward(in, train_ctx);
                auto context = concat_rows<T>({dec.embed_const({vocab::task}), pred,
                                               dec.embed_const({vocab::sep})});
                auto ce = dec.teacher_forced_ce(context, ps.token_ids, train_ctx).ce;
                auto lb = stage2_loss(ce, pred, ps.target, cfg.weights);
                sc.mse_word += double(lb.mse_word);
                sc.mse_pad += double(lb.mse_pad);
                sc.l_mse += double(lb.l_mse);
                sc.l_cosine += double(lb.l_cosine);
                sc.l_ce += double(lb.l_ce);
                sc.total += double(lb.total);
                micro_total = micro_total.valid() ? add(micro_total, lb.total_node) : lb.total_node;
            }
            // mean over the effective batch: gradients accumulate across micro-batches
            auto micro_loss = scale(micro_total, T(1) / T(cfg.batch_size * cfg.grad_accum));
            backward(micro_loss);
            ++result.micro_batches;
        }
        opt.clip_grad_norm(cfg.grad_clip);
        opt.step(cfg.lr);
        opt.zero_grad();
        ++result.optimizer_steps;

        const int denom = cfg.grad_accum * cfg.batch_size;
        sc.step = step;
        sc.lr = cfg.lr;
        sc.mse_word /= denom;
        sc.mse_pad /= denom;
        sc.l_mse /= denom;
        sc.l_cosine /= denom;
        sc.l_ce /= denom;
        sc.total /= denom;
        sc.batch_frames = frames;
        if (log) *log << format_log_line(sc);
        result.history.push_back(sc);
    }

    if (dec.checksum() != checksum_before) {
        throw contract_error("train_stage2: decoder parameters changed during adaptation");
    }
    return result;
}

// ------------------------------------------------------------ sigma sweep

template <class T>
projector_model<T> clone_projector(const projector_model<T>& src) {
    projector_model<T> dst(src.config(), 0);
    auto sp = src.params();
    auto dp = dst.params();
    for (size_t i = 0; i < sp.size(); ++i) dp[i].t.data() = sp[i].t.data();
    return dst;
}

struct sweep_row {
    double sigma = 0.0;
    double wer = 0.0;
    double cer = 0.0;
};

// clone the stage-1 projector, adapt once per sigma (same seed), evaluate
template <class T>
std::vector<sweep_row> sigma_sweep(const projector_model<T>& stage1_proj, const toy_decoder<T>& dec,
                                   std::vector<prepped_sample<T>>& train_data,
                                   const std::vector<corpus_sample>& eval_samples,
                                   const synth_sfm<T>& synth, const std::vector<double>& sigmas,
                                   const stage2_config& base_cfg, uint64_t seed,
                                   std::ostream* log = nullptr) {
    std::vector<sweep_row> rows;
    for (double s : sigmas) {
        stage2_config cfg = base_cfg;
        cfg.weights.sigma = s;
        auto proj = clone_projector(stage1_proj);
        train_stage2(proj, dec, train_data, cfg, seed, nullptr);
        auto report = evaluate<T>(&proj, &synth, dec, eval_samples);
        rows.push_back({s, report.corpus_wer, report.corpus_cer});
        if (log) {
            *log << "sigma=" << s << " wer=" << report.corpus_wer << " cer=" << report.corpus_cer
                 << "\n";
        }
    }
    return rows;
}

inline std::string sweep_table(const std::vector<sweep_row>& rows) {
    std::string out = "sigma     wer       cer\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-9.4g %-9.4f %-9.4f\n", r.sigma, r.wer, r.cer);
        out += buf;
    }
    return out;
}

}  // namespace sm
