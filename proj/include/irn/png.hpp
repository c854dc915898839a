#pragma once

// Minimal PNG reader/writer on top of zlib: 8-bit greyscale and truecolor,
// no interlacing, no ancillary chunk interpretation. Lossless roundtrip is
// part of the contract; saved byte counts feed the storage accounting.

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "irn/image.hpp"
#include "irn/tensor.hpp"

namespace irn {
namespace pngio {

inline void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

inline uint32_t get_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void append_chunk(std::vector<uint8_t>& out, const char type[4],
                         const std::vector<uint8_t>& payload) {
    put_be32(out, uint32_t(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = uint32_t(::crc32(0L, out.data() + start, uInt(out.size() - start)));
    put_be32(out, crc);
}

inline std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& in, int level) {
    uLongf bound = compressBound(uLong(in.size()));
    std::vector<uint8_t> out(bound);
    int rc = compress2(out.data(), &bound, in.data(), uLong(in.size()), level);
    check(rc == Z_OK, "png: deflate failed");
    out.resize(bound);
    return out;
}

inline std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf len = uLongf(expected);
    int rc = uncompress(out.data(), &len, in.data(), uLong(in.size()));
    check(rc == Z_OK && len == expected, "png: corrupt compressed stream");
    return out;
}

inline uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return uint8_t(a);
    if (pb <= pc) return uint8_t(b);
    return uint8_t(c);
}

}  // namespace pngio

inline std::vector<uint8_t> encode_png(const ImageBuffer& img) {
    check(img.channels == 1 || img.channels == 3, "save_png: channels must be 1 or 3");
    const int bpp = img.channels;
    const size_t stride = size_t(img.width) * bpp;

    // Per-row filter chosen by the minimum-sum-of-absolute-values heuristic.
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * size_t(img.height));
    std::vector<uint8_t> trial(stride);
    const uint8_t* prev = nullptr;
    for (int y = 0; y < img.height; ++y) {
        const uint8_t* row = img.data.data() + size_t(y) * stride;
        int best_filter = 0;
        long best_score = -1;
        std::vector<uint8_t> best(stride);
        for (int f = 0; f < 5; ++f) {
            long score = 0;
            for (size_t x = 0; x < stride; ++x) {
                int left = x >= size_t(bpp) ? row[x - bpp] : 0;
                int up = prev ? prev[x] : 0;
                int ul = (prev && x >= size_t(bpp)) ? prev[x - bpp] : 0;
                int v = row[x];
                int enc = 0;
                switch (f) {
                    case 0: enc = v; break;
                    case 1: enc = v - left; break;
                    case 2: enc = v - up; break;
                    case 3: enc = v - (left + up) / 2; break;
                    case 4: enc = v - pngio::paeth(left, up, ul); break;
                }
                trial[x] = uint8_t(enc);
                int sv = int(int8_t(uint8_t(enc)));
                score += std::abs(sv);
            }
            if (best_score < 0 || score < best_score) {
                best_score = score;
                best_filter = f;
                best = trial;
            }
        }
        raw.push_back(uint8_t(best_filter));
        raw.insert(raw.end(), best.begin(), best.end());
        prev = row;
    }

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<uint8_t> ihdr;
    pngio::put_be32(ihdr, uint32_t(img.width));
    pngio::put_be32(ihdr, uint32_t(img.height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);            // color type
    ihdr.push_back(0);                                    // compression
    ihdr.push_back(0);                                    // filter method
    ihdr.push_back(0);                                    // no interlace
    pngio::append_chunk(out, "IHDR", ihdr);
    pngio::append_chunk(out, "IDAT", pngio::zlib_deflate(raw, 9));
    pngio::append_chunk(out, "IEND", {});
    return out;
}

inline ImageBuffer decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    check(bytes.size() > 8 && std::memcmp(bytes.data(), sig, 8) == 0,
          "load_png: not a PNG file");

    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_ihdr = false, saw_iend = false;
    while (pos + 12 <= bytes.size()) {
        uint32_t len = pngio::get_be32(bytes.data() + pos);
        check(pos + 12 + len <= bytes.size(), "load_png: truncated chunk");
        const uint8_t* type = bytes.data() + pos + 4;
        const uint8_t* payload = bytes.data() + pos + 8;
        uint32_t crc_stored = pngio::get_be32(payload + len);
        uint32_t crc_actual = uint32_t(::crc32(0L, type, uInt(4 + len)));
        check(crc_stored == crc_actual, "load_png: chunk CRC mismatch");
        std::string t(reinterpret_cast<const char*>(type), 4);
        if (t == "IHDR") {
            check(len == 13, "load_png: bad IHDR");
            width = int(pngio::get_be32(payload));
            height = int(pngio::get_be32(payload + 4));
            int depth = payload[8];
            int color = payload[9];
            check(depth == 8, "load_png: unsupported bit depth " + std::to_string(depth) +
                                  " (only 8-bit supported)");
            check(color == 0 || color == 2,
                  "load_png: unsupported color type " + std::to_string(color) +
                      " (only greyscale and RGB supported)");
            check(payload[10] == 0 && payload[11] == 0, "load_png: bad compression/filter method");
            check(payload[12] == 0, "load_png: interlaced PNG not supported");
            channels = color == 0 ? 1 : 3;
            check(width > 0 && height > 0, "load_png: bad dimensions");
            saw_ihdr = true;
        } else if (t == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (t == "IEND") {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    check(saw_ihdr && saw_iend && !idat.empty(), "load_png: missing required chunks");

    size_t stride = size_t(width) * channels;
    std::vector<uint8_t> raw = pngio::zlib_inflate(idat, (stride + 1) * size_t(height));

    ImageBuffer img(width, height, channels, channels == 1 ? Colorspace::Grayscale
                                                           : Colorspace::RGB);
    const int bpp = channels;
    std::vector<uint8_t> prev(stride, 0);
    for (int y = 0; y < height; ++y) {
        const uint8_t* src = raw.data() + size_t(y) * (stride + 1);
        uint8_t filter = src[0];
        check(filter <= 4, "load_png: bad filter type");
        uint8_t* dst = img.data.data() + size_t(y) * stride;
        for (size_t x = 0; x < stride; ++x) {
            int left = x >= size_t(bpp) ? dst[x - bpp] : 0;
            int up = prev[x];
            int ul = x >= size_t(bpp) ? prev[x - bpp] : 0;
            int v = src[1 + x];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += up; break;
                case 3: v += (left + up) / 2; break;
                case 4: v += pngio::paeth(left, up, ul); break;
            }
            dst[x] = uint8_t(v);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

inline void save_png(const ImageBuffer& img, const std::string& path) {
    std::vector<uint8_t> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "save_png: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    check(f.good(), "save_png: write failed for '" + path + "'");
}

inline ImageBuffer load_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "load_png: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

// Saved size in bytes, for storage accounting.
inline size_t png_encoded_size(const ImageBuffer& img) { return encode_png(img).size(); }

}  // namespace irn
