#include "speechmap/checkpoint.hpp"

namespace sm {

std::vector<uint8_t> serialize_checkpoint(const checkpoint& ck) {
    std::vector<uint8_t> out;
    out.push_back('S'); out.push_back('M'); out.push_back('C'); out.push_back('K');
    put_u32(out, checkpoint_version);
    out.insert(out.end(), ck.config_hash.begin(), ck.config_hash.end());
    put_u64(out, ck.step);
    put_u32(out, uint32_t(ck.records.size()));
    for (const auto& [name, rec] : ck.records) {
        put_u16(out, uint16_t(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(rec.dtype);
        out.push_back(uint8_t(rec.dims.size()));
        for (uint32_t d : rec.dims) put_u32(out, d);
        out.insert(out.end(), rec.payload.begin(), rec.payload.end());
    }
    return out;
}

checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
    byte_reader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4, "checkpoint magic");
    if (std::memcmp(magic, "SMCK", 4) != 0) throw ckpt_error("checkpoint: bad magic");
    const uint32_t version = r.u32("checkpoint version");
    if (version != checkpoint_version) {
        throw ckpt_error("checkpoint: unsupported version " + std::to_string(version));
    }
    checkpoint ck;
    r.bytes(ck.config_hash.data(), 32, "checkpoint config hash");
    ck.step = r.u64("checkpoint step");
    const uint32_t count = r.u32("checkpoint record count");
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16("record name length");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len, "record name");
        ckpt_record rec;
        rec.dtype = r.u8("record dtype");
        if (rec.dtype > 1) throw ckpt_error("checkpoint: unknown dtype code");
        const uint8_t rank = r.u8("record rank");
        rec.dims.resize(rank);
        for (uint8_t d = 0; d < rank; ++d) rec.dims[d] = r.u32("record dim");
        const size_t elem = rec.dtype == 0 ? 4 : 8;
        rec.payload.resize(rec.numel() * elem);
        r.bytes(rec.payload.data(), rec.payload.size(), "record payload");
        ck.records.emplace_back(std::move(name), std::move(rec));
    }
    if (r.pos != r.n) throw ckpt_error("checkpoint: trailing bytes after last record");
    return ck;
}

}  // namespace sm
