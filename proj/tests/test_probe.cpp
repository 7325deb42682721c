#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "speechmap/probe.hpp"
#include "speechmap/train.hpp"

#include <cmath>

using namespace sm;

namespace {

vocab small_vocab() { return vocab::make_synthetic(16, 11); }

toy_decoder<double> frozen_decoder() {
    decoder_config cfg;
    cfg.d_model = 32;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.ffn_mult = 2;
    cfg.max_len = 48;
    toy_decoder<double> dec(small_vocab(), cfg, 5);
    dec.freeze();
    return dec;
}

std::vector<corpus_sample> probe_corpus(const vocab& v, int n) {
    corpus_config cc;
    cc.samples = n;
    cc.min_words = 2;
    cc.max_words = 4;
    return generate_corpus(v, cc, 19);
}

}  // namespace

TEST_CASE("degree zero injects nothing, bit for bit") {
    rng r(1);
    std::vector<double> emb(24);
    for (auto& x : emb) x = r.normal();
    rng noise(2);
    auto out = inject_noise(emb, 4, 6, 0.0, noise);
    CHECK(out == emb);
}

TEST_CASE("perturbations at degree 1e-2 live on the 1..9 ladder") {
    std::vector<double> zeros(5 * 7, 0.0);
    rng noise(3);
    auto out = inject_noise(zeros, 5, 7, 1e-2, noise);
    for (double x : out) {
        const double steps = x / 1e-2;
        const long k = std::lround(steps);
        CHECK(k >= 1);
        CHECK(k <= 9);
        CHECK(std::fabs(steps - double(k)) < 1e-9);
    }
}

TEST_CASE("mean perturbation approaches 5 * degree") {
    const int n = 200, d = 50;
    std::vector<double> zeros(size_t(n) * d, 0.0);
    rng noise(4);
    auto out = inject_noise(zeros, n, d, 1e-3, noise);
    double mean = 0;
    for (double x : out) mean += x;
    mean /= double(out.size());
    // E[U{1..9}] = 5, sd of the mean ~ 2.58e-3/sqrt(10000)
    CHECK(std::fabs(mean - 5e-3) < 2e-4);
}

TEST_CASE("signed noise flag draws both signs") {
    std::vector<double> zeros(400, 0.0);
    rng noise(5);
    auto out = inject_noise(zeros, 20, 20, 1e-2, noise, true);
    int pos = 0, neg = 0;
    for (double x : out) (x > 0 ? pos : neg)++;
    CHECK(pos > 0);
    CHECK(neg > 0);
}

TEST_CASE("probe rejects unfrozen decoders and empty corpora") {
    decoder_config cfg;
    cfg.d_model = 32;
    cfg.layers = 1;
    cfg.heads = 4;
    cfg.ffn_mult = 2;
    toy_decoder<double> dec(small_vocab(), cfg, 5);
    probe_config pc;
    pc.samples = 4;
    auto corpus = probe_corpus(dec.vocabulary(), 4);
    CHECK_THROWS_AS(run_probe(dec, corpus, pc, 1e3, 1), contract_error);
    dec.freeze();
    CHECK_THROWS_AS(run_probe(dec, {}, pc, 1e3, 1), argument_error);
}

TEST_CASE("probe is deterministic and its degree-0 row equals the clean WER") {
    auto dec = frozen_decoder();
    auto corpus = probe_corpus(dec.vocabulary(), 8);
    probe_config pc;
    pc.degrees = {0.0, 1e-1, 1e-3};
    pc.samples = 8;
    pc.max_tokens = 12;

    auto a = run_probe(dec, corpus, pc, 1e3, 7);
    auto b = run_probe(dec, corpus, pc, 1e3, 7);
    REQUIRE(a.rows.size() == 3);
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].wer == b.rows[i].wer);
        CHECK(a.rows[i].cer == b.rows[i].cer);
        CHECK(a.rows[i].truncations == b.rows[i].truncations);
    }
    CHECK(a.clean_wer == a.rows[0].wer);

    // the degree-0 row is exactly the clean repeat-task evaluation
    const double clean = repeat_task_wer(dec, corpus, pc.samples, pc.max_tokens);
    CHECK(a.rows[0].wer == clean);
}

TEST_CASE("probe config rejects duplicate or negative degrees") {
    probe_config pc;
    pc.degrees = {0.0, 1e-2, 1e-2};
    CHECK_THROWS_AS(pc.validate(), config_error);
    pc.degrees = {-1e-3};
    CHECK_THROWS_AS(pc.validate(), config_error);
}

TEST_CASE("report text carries the table and the key=value summary") {
    eet_report r;
    r.rows = {{0.0, 0.0, 1.5, 0.7, 0}, {1e-2, 3e-3, 55.0, 40.0, 2}};
    r.clean_wer = 1.5;
    r.eet = 3e-3;
    r.mse_target = 9.0;
    r.eet_found = true;
    const auto text = probe_report_text(r);
    CHECK(text.find("degree") != std::string::npos);
    CHECK(text.find("eet=0.003") != std::string::npos);
    CHECK(text.find("mse_target=9") != std::string::npos);
}
