#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "speechmap/synth.hpp"
#include "speechmap/train.hpp"

#include <cmath>

using namespace sm;

namespace {

vocab small_vocab(int content = 20) { return vocab::make_synthetic(content, 11); }

decoder_config small_decoder_cfg() {
    decoder_config cfg;
    cfg.d_model = 32;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.ffn_mult = 2;
    cfg.max_len = 64;
    return cfg;
}

std::vector<corpus_sample> small_corpus(const vocab& v, int n, int min_w, int max_w, uint64_t seed) {
    corpus_config cc;
    cc.samples = n;
    cc.min_words = min_w;
    cc.max_words = max_w;
    return generate_corpus(v, cc, seed);
}

}  // namespace

TEST_CASE("zero-noise synth repeats the acoustic row exactly") {
    const vocab v = small_vocab();
    synth_config cfg;
    cfg.d_in = 8;
    cfg.repeat_min = 8;
    cfg.repeat_max = 8;
    cfg.noise_sigma = 0.0;
    cfg.silence_frames = 0;
    synth_sfm<double> sfm(v, cfg, 3);

    const int token = vocab::num_reserved + 5;
    auto frames = sfm.synth({token}, 77);
    REQUIRE(frames.size() == 8 * 8);
    const double* row = sfm.acoustic_table().data() + size_t(token) * 8;
    for (int t = 0; t < 8; ++t) {
        for (int j = 0; j < 8; ++j) CHECK(frames[size_t(t) * 8 + j] == row[j]);
    }
}

TEST_CASE("frame count is the sum of per-token repeats plus silence") {
    const vocab v = small_vocab();
    synth_config cfg;
    cfg.d_in = 4;
    synth_sfm<double> sfm(v, cfg, 3);
    const std::vector<int> ids = {vocab::num_reserved, vocab::num_reserved + 1};
    const auto reps = sfm.repeats(ids, 123);
    REQUIRE(reps.size() == 2);
    int expect = cfg.silence_frames;
    for (int r : reps) {
        CHECK(r >= cfg.repeat_min);
        CHECK(r <= cfg.repeat_max);
        expect += r;
    }
    auto frames = sfm.synth(ids, 123);
    CHECK(int(frames.size()) == expect * cfg.d_in);
    CHECK(sfm.frame_count(ids, 123) == expect);
}

TEST_CASE("synth is bitwise deterministic in its seeds") {
    const vocab v = small_vocab();
    synth_config cfg;
    cfg.d_in = 8;
    synth_sfm<double> a(v, cfg, 3), b(v, cfg, 3);
    const std::vector<int> ids = {8, 9, 10};
    CHECK(a.synth(ids, 5) == b.synth(ids, 5));
    CHECK(a.synth(ids, 5) != a.synth(ids, 6));  // different sample stream
}

TEST_CASE("reserved ids are rejected by synth") {
    const vocab v = small_vocab();
    synth_config cfg;
    synth_sfm<double> sfm(v, cfg, 3);
    CHECK_THROWS_AS(sfm.synth({vocab::pad_emb}, 1), argument_error);
    CHECK_THROWS_AS(sfm.synth({vocab::sep}, 1), argument_error);
}

TEST_CASE("untrained decoder scores near ln(V) cross entropy") {
    const vocab v = small_vocab(26);  // V = 32
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    const std::vector<int> ids = {8, 9, 10, 11};
    auto context = dec.embed_const({vocab::task});
    auto res = dec.teacher_forced_ce(concat_rows<double>({context, dec.embed_const(ids),
                                                          dec.embed_const({vocab::sep})}),
                                     ids);
    const double expect = std::log(double(v.size()));
    CHECK(std::fabs(res.ce.item() - expect) < 0.5);
}

TEST_CASE("a saturated head drives cross entropy to zero") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    // pin the head bias hard toward EOS, which every label row ends with
    auto params = dec.params();
    for (auto& np : params) {
        if (np.name == "dec.head.b") {
            tensor<double> b = np.t;
            for (auto& x : b.data()) x = -50.0;
            b.data()[size_t(vocab::eos)] = 50.0;
        }
    }
    auto ce = dec.teacher_forced_ce(dec.embed_const({vocab::task, 8, vocab::sep}), {}).ce;
    CHECK(ce.item() < 1e-6);
}

TEST_CASE("frozen decoder accumulates no parameter gradients") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    dec.freeze();
    CHECK(dec.frozen());

    auto context = tensor<double>::zeros({4, 32}, true);
    rng r(3);
    for (auto& x : context.data()) x = r.normal() * 0.1;
    auto res = dec.teacher_forced_ce(context, {8, 9});
    backward(res.ce);

    // gradients flowed into the context but not into any decoder parameter
    double ctx_norm = 0;
    for (double g : context.grad()) ctx_norm += g * g;
    CHECK(ctx_norm > 0.0);
    for (const auto& np : dec.params()) {
        CHECK_FALSE(np.t.requires_grad());
        CHECK(np.t.node()->grad.empty());
    }
}

TEST_CASE("frozen decoder forward twice gives identical logits") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    dec.freeze();
    auto ctx = dec.embed_const({vocab::task, 8, 9, vocab::sep});
    auto a = dec.forward_logits(ctx);
    auto b = dec.forward_logits(ctx);
    CHECK(a.data() == b.data());
}

TEST_CASE("decoder forward rejects mismatched embedding width") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    auto bad = tensor<double>::zeros({3, 16});
    CHECK_THROWS_AS(dec.forward_logits(bad), dim_error);
}

TEST_CASE("greedy decode caps at max_tokens and flags truncation") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    // pin the argmax away from EOS so the cap always binds
    auto params = dec.params();
    for (auto& np : params) {
        if (np.name == "dec.head.b") {
            tensor<double> b = np.t;
            b.data()[9] = 50.0;
        }
    }
    auto ctx = dec.embed_const({vocab::task, 8, vocab::sep});
    auto one = dec.greedy_decode(ctx, 1);
    CHECK(one.ids.size() == 1);
    CHECK(one.truncated);

    auto stuck = dec.greedy_decode(ctx, 12);
    CHECK(stuck.ids.size() == 12);
    CHECK(stuck.truncated);
    // classic stuck decoding: the same token over and over
    for (int id : stuck.ids) CHECK(id == 9);
    CHECK_THROWS_AS(dec.greedy_decode(ctx, 0), argument_error);
}

TEST_CASE("forward call counter tracks decoder usage") {
    const vocab v = small_vocab();
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);
    dec.reset_forward_calls();
    CHECK(dec.forward_calls() == 0);
    (void)dec.forward_logits(dec.embed_const({vocab::task, 8, vocab::sep}));
    (void)dec.forward_logits(dec.embed_const({vocab::task, 9, vocab::sep}));
    CHECK(dec.forward_calls() == 2);
}

TEST_CASE("short pretraining improves repeat-task WER") {
    const vocab v = small_vocab(12);
    auto corpus = small_corpus(v, 80, 2, 4, 21);
    auto split = split_corpus(corpus, 0.25);

    decoder_config dcfg;
    dcfg.d_model = 32;
    dcfg.layers = 2;
    dcfg.heads = 4;
    dcfg.ffn_mult = 2;
    dcfg.max_len = 32;
    toy_decoder<double> dec(v, dcfg, 5);

    const double before = repeat_task_wer(dec, split.dev, 20);

    decoder_pretrain_config pcfg;
    pcfg.lr = 3e-3;
    pcfg.batch_sentences = 8;
    pcfg.max_steps = 150;
    pcfg.eval_every = 150;
    pcfg.eval_samples = 20;
    pcfg.target_wer = 1000.0;  // smoke run: stop at the first evaluation
    const auto result = pretrain_decoder(dec, split.train, split.dev, pcfg, 13);

    CHECK(result.final_wer < before);
}

TEST_CASE("pretraining past max_steps without reaching the gate is an error") {
    const vocab v = small_vocab(12);
    auto corpus = small_corpus(v, 40, 2, 4, 22);
    auto split = split_corpus(corpus, 0.25);
    toy_decoder<double> dec(v, small_decoder_cfg(), 5);

    decoder_pretrain_config pcfg;
    pcfg.max_steps = 4;
    pcfg.eval_every = 4;
    pcfg.eval_samples = 8;
    pcfg.batch_sentences = 4;
    pcfg.target_wer = 0.0;
    CHECK_THROWS_AS(pretrain_decoder(dec, split.train, split.dev, pcfg, 13), training_error);
}
