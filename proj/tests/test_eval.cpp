#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "speechmap/metrics.hpp"

using namespace sm;

namespace {

std::vector<std::string> words(const std::string& s) { return split_words(s); }

}  // namespace

TEST_CASE("edit distance basics") {
    CHECK(edit_distance(words("a b c"), words("a b c")) == 0);
    CHECK(edit_distance(words("a b c"), words("a x c")) == 1);
    CHECK(edit_distance(words("a b"), words("")) == 2);
    CHECK(edit_distance(words(""), words("x y z")) == 3);
}

TEST_CASE("the cutter example scores 22.2 WER and 5.0 CER") {
    const std::string ref = "i am from the cutter lying off the coast";
    const std::string hyp = "i'm from the cutter lying off the coast";
    CHECK(edit_distance(words(ref), words(hyp)) == 2);
    CHECK(wer(ref, hyp) == doctest::Approx(100.0 * 2 / 9).epsilon(1e-9));  // 22.2
    CHECK(cer(ref, hyp) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("equal strings score zero") {
    CHECK(wer("a b c", "a b c") == 0.0);
    CHECK(cer("a b c", "a b c") == 0.0);
}

TEST_CASE("wer is unbounded above under repetition loops") {
    std::string hyp = "x";
    for (int i = 0; i < 40; ++i) hyp += " x";
    CHECK(wer("y", hyp) > 1000.0);
}

TEST_CASE("empty reference convention") {
    CHECK(wer("", "") == 0.0);
    CHECK(wer("", "a b") == 200.0);
    CHECK(cer("", "ab") == 200.0);
}

TEST_CASE("cer counts characters including spaces") {
    CHECK(cer("ab", "ac") == doctest::Approx(50.0));
    CHECK(cer("a b", "a c") == doctest::Approx(100.0 / 3));
}

TEST_CASE("edit distance is symmetric and obeys the triangle inequality") {
    rng r(8);
    auto random_words = [&](int max_len) {
        std::vector<std::string> out;
        const int n = int(r.bounded(uint64_t(max_len)));
        for (int i = 0; i < n; ++i) out.push_back(std::string(1, char('a' + r.bounded(4))));
        return out;
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_words(8), b = random_words(8), c = random_words(8);
        CHECK(edit_distance(a, b) == edit_distance(b, a));
        CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
        CHECK(edit_distance(a, a) == 0);
    }
}

TEST_CASE("corpus scores micro-average over reference words") {
    eval_report r;
    sample_score s1;
    s1.word_edits = 1;
    s1.ref_words = 9;
    s1.char_edits = 2;
    s1.ref_chars = 40;
    sample_score s2;
    s2.word_edits = 3;
    s2.ref_words = 1;
    s2.char_edits = 5;
    s2.ref_chars = 10;
    s2.truncated = true;
    r.samples = {s1, s2};
    r.finalize();
    CHECK(r.corpus_wer == doctest::Approx(100.0 * 4 / 10));
    CHECK(r.corpus_cer == doctest::Approx(100.0 * 7 / 50));
    CHECK(r.truncations == 1);
}

TEST_CASE("oracle evaluation is deterministic and rejects empty corpora") {
    const vocab v = vocab::make_synthetic(12, 11);
    decoder_config cfg;
    cfg.d_model = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.max_len = 48;
    toy_decoder<float> dec(v, cfg, 5);
    dec.freeze();

    corpus_config cc;
    cc.samples = 6;
    cc.min_words = 2;
    cc.max_words = 3;
    auto samples = generate_corpus(v, cc, 7);

    eval_options opts;
    opts.oracle = true;
    opts.max_tokens = 8;
    auto a = evaluate<float>(nullptr, nullptr, dec, samples, opts);
    auto b = evaluate<float>(nullptr, nullptr, dec, samples, opts);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].hypothesis == b.samples[i].hypothesis);
        CHECK(a.samples[i].wer == b.samples[i].wer);
    }
    CHECK_THROWS_AS(evaluate<float>(nullptr, nullptr, dec, {}, opts), argument_error);
    CHECK_THROWS_AS(evaluate<float>(nullptr, nullptr, dec, samples, eval_options{}), argument_error);
}

TEST_CASE("report TSV and summary carry the expected fields") {
    eval_report r;
    sample_score s;
    s.id = "s1";
    s.reference = "a b";
    s.hypothesis = "a";
    s.word_edits = 1;
    s.ref_words = 2;
    s.char_edits = 2;
    s.ref_chars = 3;
    s.wer = 50.0;
    s.cer = 200.0 / 3;
    r.samples = {s};
    r.finalize();
    const auto tsv = eval_report_tsv(r);
    CHECK(tsv.find("id\twer\tcer\ttruncated\treference\thypothesis") != std::string::npos);
    CHECK(tsv.find("s1\t50.0000") != std::string::npos);
    const auto summary = eval_report_summary(r);
    CHECK(summary.find("corpus_wer=50.0000") != std::string::npos);
    CHECK(summary.find("truncations=0") != std::string::npos);
}
