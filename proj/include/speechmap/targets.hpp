// Supervision construction: tokenize a transcript, embed it with the frozen
// table, pad-extend to the projector output length, and emit the word/pad
// masks (words + first pad in word_mask, remaining pads in pad_mask).
// Also the precomputed-target cache file ("SMTC").
#pragma once

#include "speechmap/common.hpp"
#include "speechmap/tensor.hpp"
#include "speechmap/vocab.hpp"

#include <array>
#include <string>
#include <vector>

namespace sm {

template <class T>
struct target_sequence {
    std::vector<int> token_ids;       // n content tokens
    std::vector<T> embeddings;        // L x d rows, rows >= n are the pad row
    int first_pad_index = 0;          // == n
    std::vector<uint8_t> word_mask;   // true on [0, n] inclusive
    std::vector<uint8_t> pad_mask;    // true on [n+1, L-1]
    int length = 0;                   // L
    int dim = 0;

    tensor<T> embeddings_tensor() const {
        return tensor<T>::from({length, dim}, embeddings);
    }
};

// embed_table: [V x d] row-major values of the frozen embedding table
template <class T>
target_sequence<T> build_target(const std::string& transcript, const vocab& v,
                                const std::vector<T>& embed_table, int table_rows, int dim, int L) {
    const auto token_ids = tokenize(v, normalize(transcript));
    const int n = int(token_ids.size());
    if (L < n + 1) {
        throw length_error("build_target: output length " + std::to_string(L) +
                           " cannot hold " + std::to_string(n) + " tokens plus one pad");
    }
    if (int(embed_table.size()) != table_rows * dim || table_rows < v.size()) {
        throw dim_error("build_target: embedding table shape mismatch");
    }
    target_sequence<T> out;
    out.token_ids = token_ids;
    out.first_pad_index = n;
    out.length = L;
    out.dim = dim;
    out.embeddings.resize(size_t(L) * dim);
    for (int i = 0; i < n; ++i) {
        std::copy_n(embed_table.data() + size_t(token_ids[size_t(i)]) * dim, size_t(dim),
                    out.embeddings.data() + size_t(i) * dim);
    }
    const T* pad_row = embed_table.data() + size_t(vocab::pad_emb) * dim;
    for (int i = n; i < L; ++i) {
        std::copy_n(pad_row, size_t(dim), out.embeddings.data() + size_t(i) * dim);
    }
    out.word_mask.assign(size_t(L), 0);
    out.pad_mask.assign(size_t(L), 0);
    for (int i = 0; i <= n; ++i) out.word_mask[size_t(i)] = 1;
    for (int i = n + 1; i < L; ++i) out.pad_mask[size_t(i)] = 1;
    return out;
}

// ------------------------------------------------------------- cache file
//
// header: magic "SMTC", version u32, config-hash 32 bytes
// record: id-length u16, id bytes, n u32, L u32, d u32,
//         token ids u32[n], float32 embeddings [L x d]

struct target_cache_record {
    std::string sample_id;
    target_sequence<float> target;
};

inline constexpr uint32_t target_cache_version = 1;

inline std::vector<uint8_t> serialize_target_cache(const std::array<uint8_t, 32>& config_hash,
                                                   const std::vector<target_cache_record>& records) {
    std::vector<uint8_t> out;
    out.push_back('S'); out.push_back('M'); out.push_back('T'); out.push_back('C');
    put_u32(out, target_cache_version);
    out.insert(out.end(), config_hash.begin(), config_hash.end());
    for (const auto& rec : records) {
        const auto& t = rec.target;
        put_u16(out, uint16_t(rec.sample_id.size()));
        out.insert(out.end(), rec.sample_id.begin(), rec.sample_id.end());
        put_u32(out, uint32_t(t.token_ids.size()));
        put_u32(out, uint32_t(t.length));
        put_u32(out, uint32_t(t.dim));
        for (int id : t.token_ids) put_u32(out, uint32_t(id));
        const size_t off = out.size();
        out.resize(off + t.embeddings.size() * sizeof(float));
        std::memcpy(out.data() + off, t.embeddings.data(), t.embeddings.size() * sizeof(float));
    }
    return out;
}

inline std::vector<target_cache_record> deserialize_target_cache(
    const std::vector<uint8_t>& bytes, const std::array<uint8_t, 32>& expected_hash) {
    byte_reader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4, "target cache magic");
    if (std::memcmp(magic, "SMTC", 4) != 0) throw io_error("target cache: bad magic");
    const uint32_t version = r.u32("target cache version");
    if (version != target_cache_version) {
        throw ckpt_error("target cache: stale cache (version " + std::to_string(version) + ")");
    }
    std::array<uint8_t, 32> hash{};
    r.bytes(hash.data(), 32, "target cache config hash");
    if (hash != expected_hash) {
        throw ckpt_error("target cache: stale cache (configuration hash mismatch)");
    }
    std::vector<target_cache_record> records;
    while (r.pos < r.n) {
        target_cache_record rec;
        const uint16_t id_len = r.u16("record id length");
        rec.sample_id.resize(id_len);
        r.bytes(rec.sample_id.data(), id_len, "record id");
        const uint32_t n = r.u32("record token count");
        const uint32_t L = r.u32("record length");
        const uint32_t d = r.u32("record dim");
        auto& t = rec.target;
        t.token_ids.resize(n);
        for (uint32_t i = 0; i < n; ++i) t.token_ids[i] = int(r.u32("record token id"));
        t.first_pad_index = int(n);
        t.length = int(L);
        t.dim = int(d);
        t.embeddings.resize(size_t(L) * d);
        r.bytes(t.embeddings.data(), t.embeddings.size() * sizeof(float), "record embeddings");
        t.word_mask.assign(size_t(L), 0);
        t.pad_mask.assign(size_t(L), 0);
        for (uint32_t i = 0; i <= n && i < L; ++i) t.word_mask[i] = 1;
        for (uint32_t i = n + 1; i < L; ++i) t.pad_mask[i] = 1;
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_target_cache(const std::string& path, const std::array<uint8_t, 32>& config_hash,
                               const std::vector<target_cache_record>& records) {
    write_file_bytes(path, serialize_target_cache(config_hash, records));
}

inline std::vector<target_cache_record> read_target_cache(const std::string& path,
                                                          const std::array<uint8_t, 32>& expected_hash) {
    return deserialize_target_cache(read_file_bytes(path), expected_hash);
}

}  // namespace sm
