// Closed word-level vocabulary with the reserved control tokens, plus the
// text normalization applied before tokenizing.
#pragma once

#include "speechmap/common.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace sm {

struct vocab {
    // reserved ids, fixed positions at the front of the table
    static constexpr int pad_emb = 0;  // the reserved pad-embedding token
    static constexpr int bos = 1;
    static constexpr int eos = 2;
    static constexpr int task = 3;  // repeat-task marker
    static constexpr int sep = 4;
    static constexpr int unk = 5;
    static constexpr int num_reserved = 6;

    std::vector<std::string> words;  // index == id
    std::unordered_map<std::string, int> ids;

    int size() const { return int(words.size()); }
    bool is_reserved(int id) const { return id >= 0 && id < num_reserved; }
    int content_words() const { return size() - num_reserved; }

    const std::string& word(int id) const;
    // -1 when unknown
    int id_of(const std::string& w) const;

    // deterministic synthetic vocabulary: reserved tokens followed by
    // `content` unique pronounceable words
    static vocab make_synthetic(int content, uint64_t seed);

    uint64_t checksum() const;
};

// lowercase, strip punctuation except intra-word apostrophes, collapse
// whitespace; idempotent
std::string normalize(const std::string& text);

std::vector<std::string> split_words(const std::string& text);

// normalized text -> ids; throws vocab_error naming the offending token
std::vector<int> tokenize(const vocab& v, const std::string& normalized_text);

std::string detokenize(const vocab& v, const std::vector<int>& ids);

}  // namespace sm
