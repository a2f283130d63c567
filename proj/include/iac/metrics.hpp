#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "iac/image.hpp"

namespace iac {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrCap = 99.0;

inline double mse_unit(const ImageBuf& a, const ImageBuf& b)
{
    detail::require_same_shape(a, b);
    auto x = a.data();
    auto y = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return sum / static_cast<double>(x.size());
}

/// 10 log10(1 / MSE) on the [0,1] scale.
inline double psnr(const ImageBuf& a, const ImageBuf& b)
{
    const double mse = mse_unit(a, b);
    if (mse <= 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

struct ErrorStats {
    double mse = 0.0; // on the 0-255 scale
    double mae = 0.0; // on the 0-255 scale
};

/// Mean squared / absolute error, reported on the 0-255 scale.
inline ErrorStats error_stats(const ImageBuf& a, const ImageBuf& b)
{
    detail::require_same_shape(a, b);
    auto x = a.data();
    auto y = b.data();
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = (x[i] - y[i]) * 255.0;
        se += d * d;
        ae += std::abs(d);
    }
    const double n = static_cast<double>(x.size());
    return {se / n, ae / n};
}

// SSIM --------------------------------------------------------------------

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Rec.709 luma of a [0,1] image, as a row-major plane.
inline std::vector<double> luma709(const ImageBuf& image)
{
    std::vector<double> y(image.pixel_count());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const Rgb p = image.pixel(i);
        y[i] = 0.2126 * p.r + 0.7152 * p.g + 0.0722 * p.b;
    }
    return y;
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
inline std::array<double, kSsimWindow> ssim_taps()
{
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - kSsimWindow / 2;
        w[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w)
        v /= sum;
    return w;
}

/// Mean SSIM over every fully contained 11x11 window of the luma plane
/// (Gaussian sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1).
inline double ssim(const ImageBuf& a, const ImageBuf& b)
{
    detail::require_same_shape(a, b);
    const std::size_t h = a.height(), w = a.width();
    if (h < kSsimWindow || w < kSsimWindow)
        throw Error(ErrorCode::InvalidInput, "image smaller than the 11x11 SSIM window");
    const auto taps = ssim_taps();
    const std::vector<double> ya = luma709(a), yb = luma709(b);

    // Separable filtering of the five moment planes, valid region only.
    const std::size_t ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    std::array<std::vector<double>, 5> horiz;
    for (auto& p : horiz)
        p.assign(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < kSsimWindow; ++k) {
                const double u = ya[y * w + x + k], v = yb[y * w + x + k], t = taps[k];
                s[0] += t * u;
                s[1] += t * v;
                s[2] += t * u * u;
                s[3] += t * v * v;
                s[4] += t * u * v;
            }
            for (int m = 0; m < 5; ++m)
                horiz[m][y * ow + x] = s[m];
        }
    }
    const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    double total = 0.0;
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < kSsimWindow; ++k)
                for (int m = 0; m < 5; ++m)
                    s[m] += taps[k] * horiz[m][(y + k) * ow + x];
            const double mu_a = s[0], mu_b = s[1];
            const double var_a = s[2] - mu_a * mu_a;
            const double var_b = s[3] - mu_b * mu_b;
            const double cov = s[4] - mu_a * mu_b;
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    return total / static_cast<double>(oh * ow);
}

// CIEDE2000 ------------------------------------------------------------------

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

inline double srgb_to_linear(double v)
{
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

/// sRGB in [0,1] to CIELAB under D65.
inline Lab srgb_to_lab(const Rgb& p)
{
    const double r = srgb_to_linear(p.r), g = srgb_to_linear(p.g), b = srgb_to_linear(p.b);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    constexpr double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
    auto f = [](double t) { return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0; };
    const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// CIEDE2000 color difference with kL = kC = kH = 1.
inline double ciede2000(const Lab& c1, const Lab& c2)
{
    constexpr double pi = std::numbers::pi;
    constexpr double deg = pi / 180.0;
    const double cab1 = std::hypot(c1.a, c1.b);
    const double cab2 = std::hypot(c2.a, c2.b);
    const double cab_mean = 0.5 * (cab1 + cab2);
    const double c7 = std::pow(cab_mean, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(c7 / (c7 + std::pow(25.0, 7.0))));
    const double a1p = (1.0 + g) * c1.a;
    const double a2p = (1.0 + g) * c2.a;
    const double c1p = std::hypot(a1p, c1.b);
    const double c2p = std::hypot(a2p, c2.b);

    auto hue = [&](double b, double ap) {
        if (b == 0.0 && ap == 0.0)
            return 0.0;
        double h = std::atan2(b, ap);
        if (h < 0.0)
            h += 2.0 * pi;
        return h;
    };
    const double h1p = hue(c1.b, a1p);
    const double h2p = hue(c2.b, a2p);

    const double dlp = c2.l - c1.l;
    const double dcp = c2p - c1p;
    double dhp = 0.0;
    if (c1p * c2p != 0.0) {
        dhp = h2p - h1p;
        if (dhp > pi)
            dhp -= 2.0 * pi;
        else if (dhp < -pi)
            dhp += 2.0 * pi;
    }
    const double dHp = 2.0 * std::sqrt(c1p * c2p) * std::sin(dhp / 2.0);

    const double lp_mean = 0.5 * (c1.l + c2.l);
    const double cp_mean = 0.5 * (c1p + c2p);
    double hp_mean = h1p + h2p;
    if (c1p * c2p != 0.0) {
        if (std::abs(h1p - h2p) <= pi)
            hp_mean = 0.5 * (h1p + h2p);
        else if (h1p + h2p < 2.0 * pi)
            hp_mean = 0.5 * (h1p + h2p + 2.0 * pi);
        else
            hp_mean = 0.5 * (h1p + h2p - 2.0 * pi);
    }

    const double t = 1.0 - 0.17 * std::cos(hp_mean - 30.0 * deg) + 0.24 * std::cos(2.0 * hp_mean) +
                     0.32 * std::cos(3.0 * hp_mean + 6.0 * deg) - 0.20 * std::cos(4.0 * hp_mean - 63.0 * deg);
    const double dtheta = 30.0 * deg * std::exp(-std::pow((hp_mean / deg - 275.0) / 25.0, 2.0));
    const double cp7 = std::pow(cp_mean, 7.0);
    const double rc = 2.0 * std::sqrt(cp7 / (cp7 + std::pow(25.0, 7.0)));
    const double l50 = (lp_mean - 50.0) * (lp_mean - 50.0);
    const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    const double sc = 1.0 + 0.045 * cp_mean;
    const double sh = 1.0 + 0.015 * cp_mean * t;
    const double rt = -std::sin(2.0 * dtheta) * rc;

    const double tl = dlp / sl, tc = dcp / sc, th = dHp / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

/// Mean and quartiles of a batch of values.
struct MetricSummary {
    double mean = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
};

/// Quartiles use linear interpolation between order statistics.
inline MetricSummary summarize(std::vector<double> values)
{
    if (values.empty())
        throw Error(ErrorCode::InvalidInput, "cannot summarize an empty batch");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double f = pos - static_cast<double>(lo);
        return values[lo] + f * (values[hi] - values[lo]);
    };
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return {sum / static_cast<double>(values.size()), quantile(0.25), quantile(0.5), quantile(0.75)};
}

/// Per-pixel CIEDE2000 between two sRGB images, summarized over pixels.
inline MetricSummary delta_e2000(const ImageBuf& a, const ImageBuf& b)
{
    detail::require_same_shape(a, b);
    std::vector<double> de(a.pixel_count());
    detail::parallel_for(de.size(), [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p)
            de[p] = ciede2000(srgb_to_lab(a.pixel(p)), srgb_to_lab(b.pixel(p)));
    });
    return summarize(std::move(de));
}

} // namespace iac
