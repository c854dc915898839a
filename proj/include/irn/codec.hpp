#pragma once

// Block-DCT lossy codec: per-channel (YCbCr) 8x8 type-II DCT, quantization by
// the standard luminance table scaled with the usual quality mapping, and a
// little-endian "IRNL" coefficient container. The rate is reported as the
// zero-order entropy of the quantized symbols rather than an implemented
// entropy coder, i.e. an idealized rate. Bit-exact interchange with external
// codecs is out of scope; the quality-to-table mapping follows the published
// standard so degradation statistics are comparable.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <vector>

#include "irn/image.hpp"

namespace irn {
namespace codec {

// Standard luminance quantization table (Annex K).
inline const std::array<int, 64>& base_table() {
    static const std::array<int, 64> t = {
        16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    return t;
}

// Quality 1..100 -> scaled table; q=50 leaves the base table unscaled.
inline std::array<int, 64> scaled_table(int q) {
    check(q >= 1 && q <= 100, "codec: quality " + std::to_string(q) + " out of range [1,100]");
    double scale = q < 50 ? 5000.0 / q : 200.0 - 2.0 * q;
    std::array<int, 64> out{};
    for (int i = 0; i < 64; ++i) {
        int v = int(std::floor((base_table()[size_t(i)] * scale + 50.0) / 100.0));
        out[size_t(i)] = std::min(255, std::max(1, v));
    }
    return out;
}

// Orthonormal 1-D DCT-II basis, D[k][n].
inline const std::array<double, 64>& dct_basis() {
    static const std::array<double, 64> d = [] {
        std::array<double, 64> m{};
        for (int k = 0; k < 8; ++k) {
            double c = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                m[size_t(k * 8 + n)] = c * std::cos(M_PI * (2 * n + 1) * k / 16.0);
        }
        return m;
    }();
    return d;
}

// F = D B D^T
inline void dct8_forward(const double* block, double* out) {
    const auto& d = dct_basis();
    double tmp[64];
    for (int k = 0; k < 8; ++k)
        for (int n = 0; n < 8; ++n) {
            double acc = 0;
            for (int j = 0; j < 8; ++j) acc += d[size_t(k * 8 + j)] * block[j * 8 + n];
            tmp[k * 8 + n] = acc;
        }
    for (int k = 0; k < 8; ++k)
        for (int l = 0; l < 8; ++l) {
            double acc = 0;
            for (int j = 0; j < 8; ++j) acc += tmp[k * 8 + j] * d[size_t(l * 8 + j)];
            out[k * 8 + l] = acc;
        }
}

// B = D^T F D
inline void dct8_inverse(const double* coef, double* out) {
    const auto& d = dct_basis();
    double tmp[64];
    for (int n = 0; n < 8; ++n)
        for (int l = 0; l < 8; ++l) {
            double acc = 0;
            for (int k = 0; k < 8; ++k) acc += d[size_t(k * 8 + n)] * coef[k * 8 + l];
            tmp[n * 8 + l] = acc;
        }
    for (int n = 0; n < 8; ++n)
        for (int m = 0; m < 8; ++m) {
            double acc = 0;
            for (int l = 0; l < 8; ++l) acc += tmp[n * 8 + l] * d[size_t(l * 8 + m)];
            out[n * 8 + m] = acc;
        }
}

inline int reflect_index(int i, int n) {
    if (i < n) return i;
    int r = 2 * n - 1 - i;  // symmetric reflection
    return r < 0 ? 0 : r;
}

}  // namespace codec

struct LossyStream {
    std::vector<uint8_t> bytes;  // IRNL container
    long symbol_bits = 0;        // idealized rate: entropy-coded size in bits
    double bpp = 0.0;            // symbol_bits / source pixel count
};

namespace codec {

inline void wr_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
inline uint32_t rd_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
}

// Zero-order entropy in bits for one coefficient plane.
inline double plane_entropy_bits(const std::vector<int16_t>& plane) {
    std::map<int16_t, long> hist;
    for (int16_t v : plane) ++hist[v];
    double n = double(plane.size());
    double h = 0.0;
    for (const auto& [sym, cnt] : hist) {
        double p = cnt / n;
        h -= p * std::log2(p);
    }
    return h * n;
}

}  // namespace codec

// Encode an RGB (via YCbCr) or grayscale image. Dimensions are reflectively
// padded to multiples of 8 internally and cropped again on decode.
inline LossyStream lossy_encode(const ImageBuffer& img, int q) {
    auto table = codec::scaled_table(q);
    int pw = (img.width + 7) / 8 * 8;
    int ph = (img.height + 7) / 8 * 8;

    // Channel planes in the 255 domain, level-shifted by 128.
    std::vector<std::vector<double>> planes;
    if (img.channels == 3) {
        planes.assign(3, std::vector<double>(size_t(pw) * ph));
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) {
                int sy = codec::reflect_index(y, img.height);
                int sx = codec::reflect_index(x, img.width);
                double yy, cb, cr;
                bt601::rgb_to_ycbcr_f(img.at(sy, sx, 0) / 255.0, img.at(sy, sx, 1) / 255.0,
                                      img.at(sy, sx, 2) / 255.0, yy, cb, cr);
                planes[0][size_t(y) * pw + x] = yy * 255.0 - 128.0;
                planes[1][size_t(y) * pw + x] = cb * 255.0 - 128.0;
                planes[2][size_t(y) * pw + x] = cr * 255.0 - 128.0;
            }
    } else {
        planes.assign(1, std::vector<double>(size_t(pw) * ph));
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                planes[0][size_t(y) * pw + x] =
                    img.at(codec::reflect_index(y, img.height), codec::reflect_index(x, img.width),
                           0) -
                    128.0;
    }

    LossyStream out;
    out.bytes.reserve(size_t(pw) * ph * img.channels * 2 + 32);
    out.bytes.insert(out.bytes.end(), {'I', 'R', 'N', 'L'});
    codec::wr_u32(out.bytes, uint32_t(q));
    codec::wr_u32(out.bytes, uint32_t(img.width));
    codec::wr_u32(out.bytes, uint32_t(img.height));
    codec::wr_u32(out.bytes, uint32_t(img.channels));

    double total_bits = 0.0;
    for (const auto& plane : planes) {
        std::vector<int16_t> coeffs(size_t(pw) * ph);
        double block[64], freq[64];
        for (int by = 0; by < ph; by += 8)
            for (int bx = 0; bx < pw; bx += 8) {
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        block[y * 8 + x] = plane[size_t(by + y) * pw + bx + x];
                codec::dct8_forward(block, freq);
                for (int i = 0; i < 64; ++i) {
                    long qv = std::lround(freq[i] / table[size_t(i)]);
                    qv = std::min(32767L, std::max(-32768L, qv));
                    coeffs[size_t((by + (i / 8)) * pw + bx + (i % 8))] = int16_t(qv);
                }
            }
        total_bits += codec::plane_entropy_bits(coeffs);
        for (int16_t v : coeffs) {
            out.bytes.push_back(uint8_t(uint16_t(v)));
            out.bytes.push_back(uint8_t(uint16_t(v) >> 8));
        }
    }
    out.symbol_bits = long(std::ceil(total_bits));
    out.bpp = total_bits / (double(img.width) * img.height);
    return out;
}

inline ImageBuffer lossy_decode(const std::vector<uint8_t>& bytes) {
    check(bytes.size() >= 20 && std::memcmp(bytes.data(), "IRNL", 4) == 0,
          "lossy_decode: not an IRNL stream");
    int q = int(codec::rd_u32(bytes.data() + 4));
    int w = int(codec::rd_u32(bytes.data() + 8));
    int h = int(codec::rd_u32(bytes.data() + 12));
    int channels = int(codec::rd_u32(bytes.data() + 16));
    check(w > 0 && h > 0 && (channels == 1 || channels == 3), "lossy_decode: bad header");
    auto table = codec::scaled_table(q);
    int pw = (w + 7) / 8 * 8, ph = (h + 7) / 8 * 8;
    size_t plane_bytes = size_t(pw) * ph * 2;
    check(bytes.size() == 20 + plane_bytes * size_t(channels), "lossy_decode: truncated stream");

    std::vector<std::vector<double>> planes(size_t(channels),
                                            std::vector<double>(size_t(pw) * ph));
    for (int c = 0; c < channels; ++c) {
        const uint8_t* src = bytes.data() + 20 + plane_bytes * size_t(c);
        double freq[64], block[64];
        for (int by = 0; by < ph; by += 8)
            for (int bx = 0; bx < pw; bx += 8) {
                for (int i = 0; i < 64; ++i) {
                    size_t idx = (size_t(by + (i / 8)) * pw + bx + (i % 8)) * 2;
                    int16_t v = int16_t(uint16_t(src[idx]) | (uint16_t(src[idx + 1]) << 8));
                    freq[i] = double(v) * table[size_t(i)];
                }
                codec::dct8_inverse(freq, block);
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        planes[size_t(c)][size_t(by + y) * pw + bx + x] = block[y * 8 + x];
            }
    }

    ImageBuffer img(w, h, channels, channels == 1 ? Colorspace::Grayscale : Colorspace::RGB);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (channels == 3) {
                double r, g, b;
                bt601::ycbcr_to_rgb_f((planes[0][size_t(y) * pw + x] + 128.0) / 255.0,
                                      (planes[1][size_t(y) * pw + x] + 128.0) / 255.0,
                                      (planes[2][size_t(y) * pw + x] + 128.0) / 255.0, r, g, b);
                img.at(y, x, 0) = quantize_u8(r);
                img.at(y, x, 1) = quantize_u8(g);
                img.at(y, x, 2) = quantize_u8(b);
            } else {
                img.at(y, x, 0) = quantize_u8((planes[0][size_t(y) * pw + x] + 128.0) / 255.0);
            }
        }
    return img;
}

// Convenience roundtrip used by the restoration pipelines.
inline ImageBuffer lossy_roundtrip(const ImageBuffer& img, int q, double* bpp_out = nullptr) {
    LossyStream s = lossy_encode(img, q);
    if (bpp_out) *bpp_out = s.bpp;
    return lossy_decode(s.bytes);
}

}  // namespace irn
