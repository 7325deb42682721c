#include "speechmap/corpus.hpp"

#include <cstdio>

namespace sm {

std::vector<corpus_sample> generate_corpus(const vocab& v, const corpus_config& cfg, uint64_t seed) {
    cfg.validate();
    rng r(seed_stream(seed, 0xc0495));
    std::vector<corpus_sample> out;
    out.reserve(size_t(cfg.samples));
    char idbuf[32];
    for (int i = 0; i < cfg.samples; ++i) {
        const int n = int(r.uniform_int(cfg.min_words, cfg.max_words));
        std::string text;
        for (int w = 0; w < n; ++w) {
            if (w) text.push_back(' ');
            const int id = vocab::num_reserved + int(r.bounded(uint64_t(v.content_words())));
            text += v.word(id);
        }
        std::snprintf(idbuf, sizeof(idbuf), "s%06d", i);
        out.push_back({idbuf, std::move(text)});
    }
    return out;
}

std::string corpus_to_tsv(const std::vector<corpus_sample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += s.id;
        out.push_back('\t');
        out += s.text;
        out.push_back('\n');
    }
    return out;
}

std::vector<corpus_sample> corpus_from_tsv(const std::string& text) {
    std::vector<corpus_sample> out;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        ++line_no;
        if (eol > pos) {
            const std::string line = text.substr(pos, eol - pos);
            const size_t tab = line.find('\t');
            if (tab == std::string::npos) {
                throw io_error("corpus: malformed line " + std::to_string(line_no) + " (no tab)");
            }
            out.push_back({line.substr(0, tab), line.substr(tab + 1)});
        }
        pos = eol + 1;
    }
    return out;
}

void save_corpus(const std::string& path, const std::vector<corpus_sample>& samples) {
    write_file_text(path, corpus_to_tsv(samples));
}

std::vector<corpus_sample> load_corpus(const std::string& path) {
    return corpus_from_tsv(read_file_text(path));
}

corpus_split split_corpus(const std::vector<corpus_sample>& samples, double dev_fraction) {
    if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
        throw config_error("split_corpus: dev_fraction must be in [0,1)");
    }
    const size_t dev_n = size_t(double(samples.size()) * dev_fraction);
    const size_t train_n = samples.size() - dev_n;
    corpus_split out;
    out.train.assign(samples.begin(), samples.begin() + long(train_n));
    out.dev.assign(samples.begin() + long(train_n), samples.end());
    return out;
}

}  // namespace sm
