#include "speechmap/vocab.hpp"

#include <algorithm>
#include <cctype>

namespace sm {

const std::string& vocab::word(int id) const {
    if (id < 0 || id >= size()) throw argument_error("vocab: id out of range");
    return words[size_t(id)];
}

int vocab::id_of(const std::string& w) const {
    auto it = ids.find(w);
    return it == ids.end() ? -1 : it->second;
}

vocab vocab::make_synthetic(int content, uint64_t seed) {
    if (content < 1) throw config_error("vocab: need at least one content word");
    vocab v;
    v.words = {"<pad>", "<bos>", "<eos>", "<task>", "<sep>", "<unk>"};

    static const char* consonants[] = {"b", "d", "f", "g", "k", "l", "m",
                                       "n", "p", "r", "s", "t", "v", "z"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    const int nc = 14, nv = 5;

    rng r(seed_stream(seed, 0x70c4b));
    std::unordered_map<std::string, int> seen;
    while (int(v.words.size()) < content + num_reserved) {
        const int syllables = 2 + int(r.bounded(2));
        std::string w;
        for (int s = 0; s < syllables; ++s) {
            w += consonants[r.bounded(nc)];
            w += vowels[r.bounded(nv)];
        }
        if (seen.count(w)) continue;
        seen[w] = 1;
        v.words.push_back(w);
    }
    for (int i = 0; i < int(v.words.size()); ++i) v.ids[v.words[size_t(i)]] = i;
    return v;
}

uint64_t vocab::checksum() const {
    std::string blob;
    for (const auto& w : words) {
        blob += w;
        blob.push_back('\n');
    }
    return fnv1a64(blob);
}

std::string normalize(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    auto is_word_char = [](unsigned char c) {
        return std::isalnum(c) != 0 || c >= 0x80;  // keep non-ascii bytes as-is
    };
    for (size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = (unsigned char)text[i];
        if (is_word_char(c)) {
            out.push_back(char(std::tolower(c)));
        } else if (c == '\'') {
            // keep apostrophes only between word characters
            const bool prev_word = !out.empty() && is_word_char((unsigned char)out.back());
            const bool next_word = i + 1 < text.size() && is_word_char((unsigned char)text[i + 1]);
            if (prev_word && next_word) out.push_back('\'');
        } else {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<int> tokenize(const vocab& v, const std::string& normalized_text) {
    std::vector<int> out;
    for (const auto& w : split_words(normalized_text)) {
        const int id = v.id_of(w);
        if (id < 0) throw vocab_error("tokenize: out-of-vocabulary token '" + w + "'");
        out.push_back(id);
    }
    return out;
}

std::string detokenize(const vocab& v, const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += v.word(ids[i]);
    }
    return out;
}

}  // namespace sm
