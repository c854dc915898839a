#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "irn/image.hpp"

namespace irn {

enum class ChannelMode { YOfYCbCr, RgbMean };

namespace detail {

// Planes are extracted in the 255 domain as doubles; luma stays unquantized.
inline std::vector<std::vector<double>> metric_planes(const ImageBuffer& img, ChannelMode mode) {
    std::vector<std::vector<double>> planes;
    if (mode == ChannelMode::YOfYCbCr) {
        std::vector<double> y(size_t(img.pixels()));
        if (img.channels == 1) {
            for (long i = 0; i < img.pixels(); ++i) y[size_t(i)] = img.data[size_t(i)];
        } else {
            for (long i = 0; i < img.pixels(); ++i)
                y[size_t(i)] = bt601::luma255(img.data[size_t(3 * i)], img.data[size_t(3 * i + 1)],
                                              img.data[size_t(3 * i + 2)]);
        }
        planes.push_back(std::move(y));
    } else {
        for (int c = 0; c < img.channels; ++c) {
            std::vector<double> p(size_t(img.pixels()));
            for (long i = 0; i < img.pixels(); ++i)
                p[size_t(i)] = img.data[size_t(i * img.channels + c)];
            planes.push_back(std::move(p));
        }
    }
    return planes;
}

inline void require_same_size(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
    check(a.width == b.width && a.height == b.height && a.channels == b.channels,
          std::string(op) + ": size mismatch " + std::to_string(a.width) + "x" +
              std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
              std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
              std::to_string(b.channels));
}

}  // namespace detail

// PSNR in dB against MAX=255. Identical images return +inf.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b,
                   ChannelMode mode = ChannelMode::RgbMean) {
    detail::require_same_size(a, b, "psnr");
    auto pa = detail::metric_planes(a, mode);
    auto pb = detail::metric_planes(b, mode);
    double se = 0.0;
    long n = 0;
    for (size_t p = 0; p < pa.size(); ++p) {
        for (size_t i = 0; i < pa[p].size(); ++i) {
            double d = pa[p][i] - pb[p][i];
            se += d * d;
        }
        n += long(pa[p].size());
    }
    double mse = se / double(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window11() {
    const double sigma = 1.5;
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        w[size_t(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[size_t(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Valid-mode separable filtering: output is (h-10) x (w-10).
inline std::vector<double> gauss_valid(const std::vector<double>& src, int h, int w) {
    static const std::vector<double> win = gaussian_window11();
    int ow = w - 10, oh = h - 10;
    std::vector<double> tmp(size_t(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[size_t(k)] * src[size_t(y) * w + x + k];
            tmp[size_t(y) * ow + x] = acc;
        }
    std::vector<double> out(size_t(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[size_t(k)] * tmp[size_t(y + k) * ow + x];
            out[size_t(y) * ow + x] = acc;
        }
    return out;
}

inline double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h,
                         int w) {
    check(h >= 11 && w >= 11, "ssim: image smaller than the 11x11 window");
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    auto mu_a = gauss_valid(a, h, w);
    auto mu_b = gauss_valid(b, h, w);
    auto m_aa = gauss_valid(aa, h, w);
    auto m_bb = gauss_valid(bb, h, w);
    auto m_ab = gauss_valid(ab, h, w);
    double total = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        double ma = mu_a[i], mb = mu_b[i];
        double va = m_aa[i] - ma * ma;
        double vb = m_bb[i] - mb * mb;
        double cov = m_ab[i] - ma * mb;
        double num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
        double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    return total / double(mu_a.size());
}

}  // namespace detail

// Mean SSIM (Wang et al. style: 11x11 Gaussian window, sigma 1.5, K1=0.01,
// K2=0.03) over valid window positions.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b,
                   ChannelMode mode = ChannelMode::RgbMean) {
    detail::require_same_size(a, b, "ssim");
    auto pa = detail::metric_planes(a, mode);
    auto pb = detail::metric_planes(b, mode);
    double total = 0.0;
    for (size_t p = 0; p < pa.size(); ++p)
        total += detail::ssim_plane(pa[p], pb[p], a.height, a.width);
    return total / double(pa.size());
}

inline std::string format_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// CSV row: image_id,psnr_db,ssim
inline std::string metric_csv_row(const std::string& id, double psnr_db, double ssim_v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), ",%s,%.6f", format_db(psnr_db).c_str(), ssim_v);
    return id + buf;
}

}  // namespace irn
