#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

// Binary occupancy image. Serialized as 8-bit binary PGM (P5, maxval 255);
// on load, any value >= 128 is foreground.
struct Mask {
    int width = 0, height = 0;
    std::vector<uint8_t> bits; // 0 or 1, row-major

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {
        if (w < 1 || h < 1) throw ConfigError("mask dims must be positive");
    }

    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, bool fg) { bits[static_cast<size_t>(y) * width + x] = fg ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }
    bool empty_fg() const { return count() == 0; }

    bool operator==(const Mask& o) const {
        return width == o.width && height == o.height && bits == o.bits;
    }

    // tight foreground bounding box; false if no foreground
    bool bbox(int& x0, int& y0, int& x1, int& y1) const {
        x0 = width; y0 = height; x1 = -1; y1 = -1;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (at(x, y)) {
                    x0 = std::min(x0, x); y0 = std::min(y0, y);
                    x1 = std::max(x1, x); y1 = std::max(y1, y);
                }
        return x1 >= 0;
    }
};

inline double mask_iou(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height)
        throw ConfigError("mask_iou: dimension mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        inter += a.bits[i] & b.bits[i];
        uni += a.bits[i] | b.bits[i];
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Reads one PGM header token, skipping whitespace and # comments.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

struct PgmHeader {
    int width = 0, height = 0, maxval = 0;
};

inline PgmHeader read_pgm_header(std::istream& in, const std::string& origin) {
    if (pgm_token(in) != "P5") throw BadMagicError("not a binary PGM (P5): " + origin);
    PgmHeader h;
    try {
        h.width = std::stoi(pgm_token(in));
        h.height = std::stoi(pgm_token(in));
        h.maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw ParseError("bad PGM header: " + origin);
    }
    if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535)
        throw ParseError("bad PGM geometry: " + origin);
    return h;
}

} // namespace detail

inline void save_mask_pgm(const std::string& path, const Mask& m) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << m.width << " " << m.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(m.width));
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) row[static_cast<size_t>(x)] = m.at(x, y) ? 255 : 0;
        f.write(reinterpret_cast<const char*>(row.data()), m.width);
    }
    if (!f) throw IoError("write failed: " + path);
}

inline Mask load_mask_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open mask file: " + path);
    const auto h = detail::read_pgm_header(f, path);
    if (h.maxval != 255) throw ParseError("mask PGM must have maxval 255: " + path);
    Mask m(h.width, h.height);
    std::vector<uint8_t> row(static_cast<size_t>(h.width));
    for (int y = 0; y < h.height; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), h.width);
        if (f.gcount() != h.width) throw TruncatedFileError("truncated PGM: " + path);
        for (int x = 0; x < h.width; ++x) m.set(x, y, row[static_cast<size_t>(x)] >= 128);
    }
    return m;
}

// 16-bit PGM depth image, millimeters, most significant byte first (netpbm
// convention). Zero means no measurement.
inline void save_depth_pgm16(const std::string& path, int width, int height,
                             const std::vector<uint16_t>& mm) {
    if (static_cast<size_t>(width) * height != mm.size())
        throw ConfigError("depth buffer size mismatch");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    std::vector<uint8_t> row(static_cast<size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const uint16_t v = mm[static_cast<size_t>(y) * width + x];
            row[static_cast<size_t>(2 * x)] = static_cast<uint8_t>(v >> 8);
            row[static_cast<size_t>(2 * x + 1)] = static_cast<uint8_t>(v & 0xFF);
        }
        f.write(reinterpret_cast<const char*>(row.data()), 2 * width);
    }
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<uint16_t> load_depth_pgm16(const std::string& path, int& width, int& height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open depth file: " + path);
    const auto h = detail::read_pgm_header(f, path);
    if (h.maxval != 65535) throw ParseError("depth PGM must have maxval 65535: " + path);
    width = h.width;
    height = h.height;
    std::vector<uint16_t> mm(static_cast<size_t>(h.width) * h.height);
    std::vector<uint8_t> row(static_cast<size_t>(h.width) * 2);
    for (int y = 0; y < h.height; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), 2 * h.width);
        if (f.gcount() != 2 * h.width) throw TruncatedFileError("truncated depth PGM: " + path);
        for (int x = 0; x < h.width; ++x)
            mm[static_cast<size_t>(y) * h.width + x] = static_cast<uint16_t>(
                (row[static_cast<size_t>(2 * x)] << 8) | row[static_cast<size_t>(2 * x + 1)]);
    }
    return mm;
}

} // namespace posekit
