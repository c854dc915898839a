#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "irn/tensor.hpp"

namespace irn {

enum class Colorspace { RGB, Grayscale, YCbCr };

inline std::string colorspace_name(Colorspace c) {
    switch (c) {
        case Colorspace::RGB: return "RGB";
        case Colorspace::Grayscale: return "Grayscale";
        case Colorspace::YCbCr: return "YCbCr";
    }
    return "?";
}

// 8-bit raster image, row-major interleaved channels.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    Colorspace colorspace = Colorspace::RGB;
    std::vector<uint8_t> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, Colorspace cs)
        : width(w), height(h), channels(c), colorspace(cs),
          data(size_t(w) * h * c, 0) {
        check((c == 1 || c == 3) && w > 0 && h > 0, "ImageBuffer: bad dimensions");
    }

    uint8_t& at(int y, int x, int c) {
        return data[size_t((long(y) * width + x) * channels + c)];
    }
    uint8_t at(int y, int x, int c) const {
        return data[size_t((long(y) * width + x) * channels + c)];
    }
    long pixels() const { return long(width) * height; }
};

// BT.601 studio-swing constants. Forward and inverse are both derived from
// (Kr, Kg, Kb) so the float-domain pair is exactly mutually inverse.
namespace bt601 {

constexpr double kR = 0.299;
constexpr double kG = 0.587;
constexpr double kB = 0.114;

// rgb in [0,1] -> (Y, Cb, Cr) in [0,1] (studio swing: Y in [16,235]/255).
inline void rgb_to_ycbcr_f(double r, double g, double b, double& y, double& cb, double& cr) {
    double yf = kR * r + kG * g + kB * b;
    y = (16.0 + 219.0 * yf) / 255.0;
    cb = (128.0 + 112.0 * (b - yf) / (1.0 - kB)) / 255.0;
    cr = (128.0 + 112.0 * (r - yf) / (1.0 - kR)) / 255.0;
}

inline void ycbcr_to_rgb_f(double y, double cb, double cr, double& r, double& g, double& b) {
    double yf = (255.0 * y - 16.0) / 219.0;
    double pb = (255.0 * cb - 128.0) / 224.0;
    double pr = (255.0 * cr - 128.0) / 224.0;
    r = yf + pr * 2.0 * (1.0 - kR);
    b = yf + pb * 2.0 * (1.0 - kB);
    g = (yf - kR * r - kB * b) / kG;
}

// Luma of an 8-bit RGB triple in the 255 domain, unquantized.
inline double luma255(uint8_t r, uint8_t g, uint8_t b) {
    return 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
}

}  // namespace bt601

inline uint8_t quantize_u8(double v) {
    double x = std::round(v * 255.0);
    if (x < 0) x = 0;
    if (x > 255) x = 255;
    return uint8_t(x);
}

inline ImageBuffer rgb_to_ycbcr(const ImageBuffer& img) {
    check(img.colorspace == Colorspace::RGB && img.channels == 3,
          "rgb_to_ycbcr: expected RGB input, got " + colorspace_name(img.colorspace));
    ImageBuffer out(img.width, img.height, 3, Colorspace::YCbCr);
    for (long i = 0; i < img.pixels(); ++i) {
        double y, cb, cr;
        bt601::rgb_to_ycbcr_f(img.data[size_t(3 * i)] / 255.0, img.data[size_t(3 * i + 1)] / 255.0,
                              img.data[size_t(3 * i + 2)] / 255.0, y, cb, cr);
        out.data[size_t(3 * i)] = quantize_u8(y);
        out.data[size_t(3 * i + 1)] = quantize_u8(cb);
        out.data[size_t(3 * i + 2)] = quantize_u8(cr);
    }
    return out;
}

inline ImageBuffer ycbcr_to_rgb(const ImageBuffer& img) {
    check(img.colorspace == Colorspace::YCbCr && img.channels == 3,
          "ycbcr_to_rgb: expected YCbCr input, got " + colorspace_name(img.colorspace));
    ImageBuffer out(img.width, img.height, 3, Colorspace::RGB);
    for (long i = 0; i < img.pixels(); ++i) {
        double r, g, b;
        bt601::ycbcr_to_rgb_f(img.data[size_t(3 * i)] / 255.0, img.data[size_t(3 * i + 1)] / 255.0,
                              img.data[size_t(3 * i + 2)] / 255.0, r, g, b);
        out.data[size_t(3 * i)] = quantize_u8(r);
        out.data[size_t(3 * i + 1)] = quantize_u8(g);
        out.data[size_t(3 * i + 2)] = quantize_u8(b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tensor bridge: images map to (1, H, W, C) tensors in [0, 1].
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> image_to_tensor(const ImageBuffer& img) {
    std::vector<T> v(img.data.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = T(img.data[i] / 255.0);
    return Tensor<T>::from({1, img.height, img.width, img.channels}, std::move(v));
}

template <typename T>
inline ImageBuffer tensor_to_image(const Tensor<T>& t, Colorspace cs) {
    check(t.rank() == 4 && t.dim(0) == 1, "tensor_to_image: expected (1,H,W,C), got " +
                                              shape_str(t.shape()));
    int h = t.dim(1), w = t.dim(2), c = t.dim(3);
    check(c == 1 || c == 3, "tensor_to_image: channels must be 1 or 3");
    ImageBuffer img(w, h, c, cs);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = quantize_u8(double(t.data()[i]));
    return img;
}

}  // namespace irn
