#pragma once

// Independent straight-line reference computations used as test oracles.
// Nothing here calls into the library's kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "iac/image.hpp"

namespace iac::oracle {

/// min / max of t = r*a + g*b + b*c over the 8 corners of the unit cube.
inline std::pair<double, double> corner_extrema(double a, double b, double c)
{
    double lo = INFINITY, hi = -INFINITY;
    for (int corner = 0; corner < 8; ++corner) {
        const double t = (corner & 1) * a + ((corner >> 1) & 1) * b + ((corner >> 2) & 1) * c;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    return {lo, hi};
}

/// Gauss-Jordan inverse with partial pivoting on a plain 3x3 array.
inline std::array<std::array<double, 3>, 3> gauss_jordan_inverse(std::array<std::array<double, 3>, 3> a)
{
    std::array<std::array<double, 3>, 3> inv{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col]))
                pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        const double p = a[col][col];
        for (int c = 0; c < 3; ++c) {
            a[col][c] /= p;
            inv[col][c] /= p;
        }
        for (int r = 0; r < 3; ++r) {
            if (r == col)
                continue;
            const double f = a[r][col];
            for (int c = 0; c < 3; ++c) {
                a[r][c] -= f * a[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    return inv;
}

/// Scalar transform of one pixel: basis columns n_i = (m[0][i], m[1][i], m[2][i]),
/// curves sampled at K evenly spaced points, linear interpolation.
inline std::array<double, 3> iac_pixel(const std::array<double, 3>& px, const std::array<std::array<double, 3>, 3>& m,
                                       const std::array<std::vector<double>, 3>& curves)
{
    const auto inv = gauss_jordan_inverse(m);
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) {
        const double t = px[0] * m[0][i] + px[1] * m[1][i] + px[2] * m[2][i];
        auto [lo, hi] = corner_extrema(m[0][i], m[1][i], m[2][i]);
        double tn = (t - lo) / (hi - lo);
        tn = std::min(1.0, std::max(0.0, tn));
        const auto& c = curves[i];
        const double pos = tn * (c.size() - 1);
        double out;
        if (pos >= c.size() - 1) {
            out = c.back();
        } else {
            const int j = static_cast<int>(std::floor(pos));
            const double f = pos - j;
            out = c[j] + f * (c[j + 1] - c[j]);
        }
        s[i] = out * (hi - lo) + lo;
    }
    std::array<double, 3> y{};
    for (int j = 0; j < 3; ++j) {
        y[j] = s[0] * inv[0][j] + s[1] * inv[1][j] + s[2] * inv[2][j];
        y[j] = std::min(1.0, std::max(0.0, y[j]));
    }
    return y;
}

inline ImageBuf random_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    ImageBuf img(h, w);
    for (double& v : img.data())
        v = u(rng);
    return img;
}

/// Direct 11x11 Gaussian-window SSIM on Rec.709 luma, no separable passes.
inline double ssim_direct(const ImageBuf& a, const ImageBuf& b)
{
    const int h = static_cast<int>(a.height()), w = static_cast<int>(a.width());
    auto luma = [](const ImageBuf& im, int y, int x) {
        return 0.2126 * im.at(y, x, 0) + 0.7152 * im.at(y, x, 1) + 0.0722 * im.at(y, x, 2);
    };
    double win[11][11];
    double norm = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
            norm += win[i][j];
        }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + 11 <= h; ++y)
        for (int x = 0; x + 11 <= w; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double wt = win[i][j] / norm;
                    const double u = luma(a, y + i, x + j), v = luma(b, y + i, x + j);
                    ma += wt * u;
                    mb += wt * v;
                    saa += wt * u * u;
                    sbb += wt * v * v;
                    sab += wt * u * v;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

} // namespace iac::oracle
