#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "posekit/errors.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// CRC-32 (IEEE, reflected 0xEDB88320), table built once.
inline uint32_t crc32_update(uint32_t crc, const void* buf, size_t len) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const unsigned char*>(buf);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

inline uint32_t crc32_of(const void* buf, size_t len) { return crc32_update(0, buf, len); }

// Tensor container format ("MLT1"):
//   magic   - 4 bytes "MLT1"
//   dtype   - u8, 0 = float32
//   ndim    - u8
//   reserved- u16, zero
//   dims    - ndim x u32, little endian
//   payload - row-major float32, little endian
//   crc32   - u32, little endian, over every byte before it
//
// The checksum makes silent truncation or corruption a loader error instead
// of a training-time mystery.

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

} // namespace detail

inline std::string encode_tensor(const Tensor& t) {
    if (t.dims.empty()) throw ConfigError("cannot serialize rank-0 tensor");
    std::string out;
    out.reserve(12 + 4 * t.dims.size() + 4 * t.numel());
    out += "MLT1";
    out.push_back(0); // dtype float32
    out.push_back(static_cast<char>(t.dims.size()));
    detail::put_u16(out, 0);
    for (int d : t.dims) detail::put_u32(out, static_cast<uint32_t>(d));
    static_assert(sizeof(float) == 4);
    // host is little endian on every target this builds on
    const size_t payload = 4 * t.numel();
    const size_t head = out.size();
    out.resize(head + payload);
    if (payload) std::memcpy(out.data() + head, t.data.data(), payload);
    detail::put_u32(out, crc32_of(out.data(), out.size()));
    return out;
}

inline void save_tensor(const std::string& path, const Tensor& t) {
    const std::string bytes = encode_tensor(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline Tensor decode_tensor(const std::string& bytes, const std::string& origin) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 8) throw TruncatedFileError("tensor file too short: " + origin);
    if (std::memcmp(p, "MLT1", 4) != 0) throw BadMagicError("bad tensor magic: " + origin);
    if (p[4] != 0) throw ParseError("unsupported dtype in " + origin);
    const int ndim = p[5];
    if (ndim < 1) throw ParseError("rank-0 tensor in " + origin);
    const size_t header = 8 + 4 * static_cast<size_t>(ndim);
    if (bytes.size() < header + 4) throw TruncatedFileError("truncated tensor header: " + origin);
    std::vector<int> dims(static_cast<size_t>(ndim));
    size_t numel = 1;
    for (int i = 0; i < ndim; ++i) {
        const uint32_t d = detail::get_u32(p + 8 + 4 * static_cast<size_t>(i));
        if (d == 0 || d > (1u << 24)) throw ParseError("bad dim in " + origin);
        dims[static_cast<size_t>(i)] = static_cast<int>(d);
        numel *= d;
    }
    const size_t want = header + 4 * numel + 4;
    if (bytes.size() < want) throw TruncatedFileError("truncated tensor payload: " + origin);
    if (bytes.size() > want) throw ParseError("trailing bytes in " + origin);
    const uint32_t stored = detail::get_u32(p + bytes.size() - 4);
    const uint32_t actual = crc32_of(bytes.data(), bytes.size() - 4);
    if (stored != actual) throw ChecksumError("tensor checksum mismatch: " + origin);
    Tensor t(dims);
    std::memcpy(t.data.data(), p + header, 4 * numel);
    return t;
}

inline Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open tensor file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes, path);
}

} // namespace posekit
