// Synthetic transcript corpus: generation, TSV persistence, train/dev split.
#pragma once

#include "speechmap/common.hpp"
#include "speechmap/vocab.hpp"

#include <string>
#include <vector>

namespace sm {

struct corpus_sample {
    std::string id;
    std::string text;  // normalized transcript
};

struct corpus_config {
    int samples = 2000;
    int min_words = 3;
    int max_words = 10;
    double dev_fraction = 0.1;

    void validate() const {
        if (samples < 1) throw config_error("corpus.samples must be positive");
        if (min_words < 1 || max_words < min_words) {
            throw config_error("corpus.min_words/max_words must satisfy 1 <= min <= max");
        }
        if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
            throw config_error("corpus.dev_fraction must be in [0,1)");
        }
    }
};

std::vector<corpus_sample> generate_corpus(const vocab& v, const corpus_config& cfg, uint64_t seed);

std::string corpus_to_tsv(const std::vector<corpus_sample>& samples);
std::vector<corpus_sample> corpus_from_tsv(const std::string& text);

void save_corpus(const std::string& path, const std::vector<corpus_sample>& samples);
std::vector<corpus_sample> load_corpus(const std::string& path);

// deterministic split: the trailing dev_fraction of samples is held out
struct corpus_split {
    std::vector<corpus_sample> train;
    std::vector<corpus_sample> dev;
};
corpus_split split_corpus(const std::vector<corpus_sample>& samples, double dev_fraction);

}  // namespace sm
