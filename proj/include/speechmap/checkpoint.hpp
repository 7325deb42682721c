// Versioned binary checkpoints.
//
// header:  magic "SMCK", version u32, config-hash 32 bytes, step u64,
//          record count u32
// record:  name-length u16, utf8 name, dtype u8 (0=f32, 1=f64), rank u8,
//          dims u32[rank], little-endian row-major payload
#pragma once

#include "speechmap/nn.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace sm {

inline constexpr uint32_t checkpoint_version = 1;

struct ckpt_record {
    uint8_t dtype = 0;  // 0 = f32, 1 = f64
    std::vector<uint32_t> dims;
    std::vector<uint8_t> payload;

    size_t numel() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

struct checkpoint {
    std::array<uint8_t, 32> config_hash{};
    uint64_t step = 0;
    std::vector<std::pair<std::string, ckpt_record>> records;  // ordered

    const ckpt_record* find(const std::string& name) const {
        for (const auto& [n, r] : records) {
            if (n == name) return &r;
        }
        return nullptr;
    }
};

template <class T>
constexpr uint8_t dtype_code() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "checkpoints support float and double tensors");
    return std::is_same_v<T, float> ? 0 : 1;
}

template <class T>
inline void add_record(checkpoint& ck, const std::string& name,
                       const std::vector<int>& shape, const std::vector<T>& values) {
    ckpt_record rec;
    rec.dtype = dtype_code<T>();
    for (int d : shape) rec.dims.push_back(uint32_t(d));
    rec.payload.resize(values.size() * sizeof(T));
    std::memcpy(rec.payload.data(), values.data(), rec.payload.size());
    ck.records.emplace_back(name, std::move(rec));
}

template <class T>
inline void add_params(checkpoint& ck, const param_list<T>& params, const std::string& prefix = "") {
    for (const auto& np : params) add_record(ck, prefix + np.name, np.t.shape(), np.t.data());
}

std::vector<uint8_t> serialize_checkpoint(const checkpoint& ck);
checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes);

inline void save_checkpoint(const std::string& path, const checkpoint& ck) {
    write_file_bytes(path, serialize_checkpoint(ck));
}

inline checkpoint load_checkpoint(const std::string& path) {
    return deserialize_checkpoint(read_file_bytes(path));
}

// copy a record into an existing tensor; the shape must match exactly
template <class T>
inline void apply_record(const checkpoint& ck, const std::string& name, tensor<T>& dst) {
    const ckpt_record* rec = ck.find(name);
    if (!rec) throw ckpt_error("checkpoint: missing tensor '" + name + "'");
    if (rec->dtype != dtype_code<T>()) {
        throw ckpt_error("checkpoint: dtype mismatch for tensor '" + name + "'");
    }
    std::vector<uint32_t> want;
    for (int d : dst.shape()) want.push_back(uint32_t(d));
    if (rec->dims != want) {
        std::string got = "[", exp = "[";
        for (size_t i = 0; i < rec->dims.size(); ++i) got += (i ? "," : "") + std::to_string(rec->dims[i]);
        for (size_t i = 0; i < want.size(); ++i) exp += (i ? "," : "") + std::to_string(want[i]);
        throw ckpt_error("checkpoint: shape mismatch for tensor '" + name + "' (file " + got +
                         "], model " + exp + "])");
    }
    std::memcpy(dst.data().data(), rec->payload.data(), rec->payload.size());
}

template <class T>
inline void apply_params(const checkpoint& ck, const param_list<T>& params, const std::string& prefix = "") {
    for (const auto& np : params) {
        tensor<T> t = np.t;
        apply_record(ck, prefix + np.name, t);
    }
}

}  // namespace sm
