#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "speechmap/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace sm;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream f(path);
    f << body;
    return path;
}

}  // namespace

TEST_CASE("defaults load and validate cleanly") {
    std::vector<std::string> warnings;
    auto cfg = load_config("", {}, &warnings);
    CHECK(cfg.content_words == 250);
    CHECK(cfg.projector.d_out == cfg.decoder.d_model);
    CHECK(warnings.empty());
}

TEST_CASE("unknown keys are hard errors naming the path") {
    const auto path = write_temp("sm_cfg_unknown.json", R"({"stage1": {"alphaa": 7}})");
    try {
        load_config(path, {});
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("stage1.alphaa") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("file values and dotted overrides land in the struct") {
    const auto path = write_temp("sm_cfg_vals.json", R"({"stage1": {"alpha": 7}, "seed": 99})");
    auto cfg = load_config(path, {"stage2.sigma=0", "probe.samples=33"});
    CHECK(cfg.stage1.weights.alpha == 7.0);
    CHECK(cfg.seed == 99);
    CHECK(cfg.stage2.weights.sigma == 0.0);
    CHECK(cfg.probe.samples == 33);
    std::filesystem::remove(path);
}

TEST_CASE("override with an unknown path is rejected") {
    CHECK_THROWS_AS(load_config("", {"stage1.alphaa=7"}), config_error);
    CHECK_THROWS_AS(load_config("", {"nonsense"}), config_error);
}

TEST_CASE("cross-module dimension checks fire with field names") {
    try {
        load_config("", {"synth.d_in=24"});
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("projector.d_in") != std::string::npos);
    }
    try {
        load_config("", {"decoder.d_model=32"});
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("d_model") != std::string::npos);
    }
    try {
        load_config("", {"stage1.batch_cap=10"});
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("batch_cap") != std::string::npos);
    }
}

TEST_CASE("sigma outside the declared modes warns but passes") {
    std::vector<std::string> warnings;
    auto cfg = load_config("", {"stage2.sigma=0.5"}, &warnings);
    CHECK(cfg.stage2.weights.sigma == 0.5);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("sigma") != std::string::npos);
}

TEST_CASE("config hashes react to the hashed sections only") {
    auto a = load_config("", {});
    auto b = load_config("", {"projector.stride=1", "projector.kernel=3"});
    const std::vector<std::string> cache_sections = {"seed", "content_words", "corpus", "synth",
                                                     "projector"};
    CHECK(config_hash(a, cache_sections) != config_hash(b, cache_sections));
    // stage-2 sigma is invisible to the cache hash but visible to the stage-2 hash
    auto c = load_config("", {"stage2.sigma=0"});
    CHECK(config_hash(a, cache_sections) == config_hash(c, cache_sections));
    CHECK(config_hash(a, {"stage2"}) != config_hash(c, {"stage2"}));
}

TEST_CASE("resolved config serializes and parses back unchanged") {
    auto cfg = load_config("", {"stage1.alpha=7", "stage2.lr=5e-05"});
    auto again = config_from_json(to_json(cfg));
    CHECK(to_json(again) == to_json(cfg));
}

TEST_CASE("synthetic vocabulary is deterministic with distinct reserved ids") {
    auto v1 = vocab::make_synthetic(250, 7);
    auto v2 = vocab::make_synthetic(250, 7);
    CHECK(v1.words == v2.words);
    CHECK(v1.size() == 256);
    std::set<int> reserved = {vocab::pad_emb, vocab::bos, vocab::eos,
                              vocab::task, vocab::sep, vocab::unk};
    CHECK(reserved.size() == 6);
    for (int id : reserved) CHECK(v1.is_reserved(id));
    CHECK_FALSE(v1.is_reserved(vocab::num_reserved));
    // the pad token can never come out of normalize()
    CHECK(normalize(v1.word(vocab::pad_emb)) == "pad");
}

TEST_CASE("generated corpora respect length bounds, coverage, and determinism") {
    auto cfg = load_config("", {});
    const vocab v = vocab::make_synthetic(cfg.content_words, cfg.seed);
    auto samples = generate_corpus(v, cfg.corpus, cfg.seed);
    REQUIRE(int(samples.size()) == cfg.corpus.samples);

    std::set<std::string> ids;
    std::set<std::string> used_words;
    for (const auto& s : samples) {
        ids.insert(s.id);
        const auto w = split_words(s.text);
        CHECK(int(w.size()) >= cfg.corpus.min_words);
        CHECK(int(w.size()) <= cfg.corpus.max_words);
        for (const auto& word : w) used_words.insert(word);
    }
    CHECK(ids.size() == samples.size());
    // coverage of the content vocabulary at N=2000
    CHECK(double(used_words.size()) >= 0.95 * double(v.content_words()));

    auto samples2 = generate_corpus(v, cfg.corpus, cfg.seed);
    CHECK(corpus_to_tsv(samples) == corpus_to_tsv(samples2));

    // round-trip through the TSV format
    auto back = corpus_from_tsv(corpus_to_tsv(samples));
    REQUIRE(back.size() == samples.size());
    CHECK(back[0].id == samples[0].id);
    CHECK(back.back().text == samples.back().text);
}

TEST_CASE("train/dev split is deterministic and disjoint") {
    auto cfg = load_config("", {});
    const vocab v = vocab::make_synthetic(cfg.content_words, cfg.seed);
    auto samples = generate_corpus(v, cfg.corpus, cfg.seed);
    auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    CHECK(split.train.size() + split.dev.size() == samples.size());
    CHECK(split.dev.size() == size_t(double(samples.size()) * cfg.corpus.dev_fraction));
    CHECK(split.train.front().id == samples.front().id);
    CHECK(split.dev.back().id == samples.back().id);
}
