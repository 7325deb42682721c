// Shared plumbing: error taxonomy, deterministic RNG, hashing, binary IO helpers.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace sm {

// ---------------------------------------------------------------- errors

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dim_error : error { using error::error; };        // shape / mask mismatch
struct numeric_error : error { using error::error; };    // NaN/Inf or aborted step
struct state_error : error { using error::error; };      // backward without reset, etc.
struct range_error : error { using error::error; };      // schedule step out of range
struct vocab_error : error { using error::error; };      // out-of-vocabulary token
struct length_error : error { using error::error; };     // sequence too short / L < n+1
struct argument_error : error { using error::error; };   // bad call arguments
struct io_error : error { using error::error; };         // file system failures
struct config_error : error { using error::error; };     // invalid configuration
struct prereq_error : error { using error::error; };     // missing upstream artifact
struct ckpt_error : error { using error::error; };       // incompatible checkpoint
struct training_error : error { using error::error; };   // failed to reach a gate
struct contract_error : error { using error::error; };   // frozen-model contract broken

// ---------------------------------------------------------------- rng
//
// Self-contained xoshiro256++ so runs are reproducible independent of the
// standard library's distribution internals.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class rng {
public:
    explicit rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm_state = seed;
        for (auto& w : s_) w = splitmix64(sm_state);
        has_spare_ = false;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl_(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl_(s_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // unbiased uniform in [0, n)
    uint64_t bounded(uint64_t n) {
        if (n == 0) throw argument_error("rng::bounded: n must be positive");
        #if defined(__SIZEOF_INT128__)
        uint64_t x = next_u64();
        __uint128_t m = (__uint128_t)x * n;
        uint64_t lo = (uint64_t)m;
        if (lo < n) {
            const uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next_u64();
                m = (__uint128_t)x * n;
                lo = (uint64_t)m;
            }
        }
        return (uint64_t)(m >> 64);
        #else
        return next_u64() % n;
        #endif
    }

    // uniform integer in [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw argument_error("rng::uniform_int: empty range");
        return lo + (int64_t)bounded(uint64_t(hi - lo) + 1);
    }

    // standard normal via Box-Muller with cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        u1 = 1.0 - u1;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static uint64_t rotl_(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derive an independent stream seed from a base seed and stream tags.
inline uint64_t seed_stream(uint64_t base, uint64_t tag_a, uint64_t tag_b = 0) {
    uint64_t st = base;
    (void)splitmix64(st);
    st ^= 0x5851f42d4c957f2dull * (tag_a + 1);
    (void)splitmix64(st);
    st ^= 0x14057b7ef767814full * (tag_b + 1);
    return splitmix64(st);
}

inline uint64_t fnv1a64(const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// ---------------------------------------------------------------- sha256

std::array<uint8_t, 32> sha256(const void* data, size_t len);

inline std::array<uint8_t, 32> sha256(const std::string& s) { return sha256(s.data(), s.size()); }

std::string hex_string(const std::array<uint8_t, 32>& digest);

// ---------------------------------------------------------------- little-endian IO helpers

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

struct byte_reader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;

    byte_reader(const uint8_t* data, size_t len) : p(data), n(len) {}

    void need(size_t k, const char* what) const {
        if (pos + k > n) throw io_error(std::string("truncated data while reading ") + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return p[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = uint16_t(p[pos]) | uint16_t(p[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    void bytes(void* dst, size_t k, const char* what) {
        need(k, what);
        std::memcpy(dst, p + pos, k);
        pos += k;
    }
};

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

}  // namespace sm
