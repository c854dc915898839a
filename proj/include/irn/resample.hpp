#pragma once

// Cubic-convolution resampler (Keys kernel, a = -0.5). When downscaling, the
// kernel support is widened by the scale factor so the filter antialiases,
// matching common bicubic tooling. Per-pixel weights are normalized to sum
// to 1, so constants are preserved for every phase.

#include <cmath>
#include <vector>

#include "irn/image.hpp"
#include "irn/tensor.hpp"

namespace irn {

inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
    if (x < 2.0) return a * (x * x * x - 5.0 * x * x + 8.0 * x - 4.0);
    return 0.0;
}

struct ResampleTaps {
    int lo = 0;                  // first source index (may be out of range; clamp on use)
    std::vector<double> weight;  // normalized
};

// Tap table for one axis. `out_size / in_size` is the scale; source
// coordinates follow the align-centers convention.
inline std::vector<ResampleTaps> build_taps(int in_size, int out_size) {
    check(in_size >= 1 && out_size >= 1, "bicubic_resize: degenerate output size");
    double scale = double(out_size) / double(in_size);
    double ks = scale < 1.0 ? scale : 1.0;  // kernel shrink when downscaling
    double radius = 2.0 / ks;
    std::vector<ResampleTaps> taps(static_cast<size_t>(out_size));
    for (int o = 0; o < out_size; ++o) {
        double center = (o + 0.5) / scale - 0.5;
        int lo = int(std::ceil(center - radius));
        int hi = int(std::floor(center + radius));
        ResampleTaps t;
        t.lo = lo;
        t.weight.resize(size_t(hi - lo + 1));
        double sum = 0.0;
        for (int i = lo; i <= hi; ++i) {
            double w = cubic_kernel((center - i) * ks);
            t.weight[size_t(i - lo)] = w;
            sum += w;
        }
        check(sum > 0.0, "bicubic_resize: empty kernel support");
        for (auto& w : t.weight) w /= sum;
        taps[size_t(o)] = std::move(t);
    }
    return taps;
}

namespace detail {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// One separable pass along x for a single plane stored row-major (h x w).
inline std::vector<double> resample_rows(const std::vector<double>& src, int h, int w,
                                         const std::vector<ResampleTaps>& taps) {
    int ow = int(taps.size());
    std::vector<double> dst(size_t(h) * ow);
    for (int y = 0; y < h; ++y) {
        const double* row = src.data() + size_t(y) * w;
        for (int o = 0; o < ow; ++o) {
            const ResampleTaps& t = taps[size_t(o)];
            double acc = 0.0;
            for (size_t k = 0; k < t.weight.size(); ++k)
                acc += t.weight[k] * row[clamp_index(t.lo + int(k), w)];
            dst[size_t(y) * ow + o] = acc;
        }
    }
    return dst;
}

inline std::vector<double> transpose_plane(const std::vector<double>& src, int h, int w) {
    std::vector<double> dst(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) dst[size_t(x) * h + y] = src[size_t(y) * w + x];
    return dst;
}

inline std::vector<double> resample_plane(const std::vector<double>& src, int h, int w, int oh,
                                          int ow) {
    auto tx = build_taps(w, ow);
    auto ty = build_taps(h, oh);
    auto pass1 = resample_rows(src, h, w, tx);         // h x ow
    auto t1 = transpose_plane(pass1, h, ow);           // ow x h
    auto pass2 = resample_rows(t1, ow, h, ty);         // ow x oh
    return transpose_plane(pass2, ow, oh);             // oh x ow
}

}  // namespace detail

inline ImageBuffer bicubic_resize(const ImageBuffer& img, int out_w, int out_h) {
    check(out_w >= 1 && out_h >= 1, "bicubic_resize: degenerate output size");
    ImageBuffer out(out_w, out_h, img.channels, img.colorspace);
    std::vector<double> plane(size_t(img.width) * img.height);
    for (int c = 0; c < img.channels; ++c) {
        for (long i = 0; i < img.pixels(); ++i)
            plane[size_t(i)] = img.data[size_t(i * img.channels + c)] / 255.0;
        auto res = detail::resample_plane(plane, img.height, img.width, out_h, out_w);
        for (long i = 0; i < out.pixels(); ++i)
            out.data[size_t(i * out.channels + c)] = quantize_u8(res[size_t(i)]);
    }
    return out;
}

// Scale given as a ratio of output to input size (e.g. 0.5 halves).
inline ImageBuffer bicubic_resize_scale(const ImageBuffer& img, double scale) {
    check(scale > 0.0, "bicubic_resize: scale must be positive");
    int ow = int(std::lround(img.width * scale));
    int oh = int(std::lround(img.height * scale));
    check(ow >= 1 && oh >= 1, "bicubic_resize: degenerate output size");
    return bicubic_resize(img, ow, oh);
}

// Float-domain resize of an (N,H,W,C) tensor; returns a detached tensor.
// This is the reference path that produces training guides.
template <typename T>
inline Tensor<T> bicubic_resize(const Tensor<T>& t, int out_h, int out_w) {
    check(t.rank() == 4, "bicubic_resize: expected (N,H,W,C) tensor");
    int n = t.dim(0), h = t.dim(1), w = t.dim(2), c = t.dim(3);
    std::vector<T> out(size_t(n) * out_h * out_w * c);
    std::vector<double> plane(size_t(h) * w);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const T* src = t.data().data();
            for (long i = 0; i < long(h) * w; ++i)
                plane[size_t(i)] = double(src[(long(b) * h * w + i) * c + ch]);
            auto res = detail::resample_plane(plane, h, w, out_h, out_w);
            for (long i = 0; i < long(out_h) * out_w; ++i)
                out[size_t((long(b) * out_h * out_w + i) * c + ch)] = T(res[size_t(i)]);
        }
    return Tensor<T>::from({n, out_h, out_w, c}, std::move(out));
}

}  // namespace irn
