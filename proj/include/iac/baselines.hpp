#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "iac/curve.hpp"
#include "iac/image.hpp"
#include "iac/transform.hpp"

namespace iac {

/// Three curves applied directly on the R, G and B axes.
struct RgbCurves {
    CurveSet curves = identity_curves(kDefaultCurveDims);
};

inline ImageBuf apply_rgb_curves(const ImageBuf& image, const RgbCurves& rgb)
{
    detail::require_finite(image, "image");
    ImageBuf out(image.height(), image.width());
    auto in = image.data();
    auto o = out.data();
    detail::parallel_for(o.size(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            o[i] = curve_eval(rgb.curves[i % 3], in[i]);
    });
    return out;
}

/// n^3 lattice over the RGB cube. Entry (i, j, k) indexes (R, G, B) and is
/// stored with R varying fastest, matching the .cube text layout.
class Lut3d {
public:
    Lut3d(std::size_t n, std::vector<Rgb> grid) : n_(n), grid_(std::move(grid))
    {
        if (n_ < 2)
            throw Error(ErrorCode::InvalidInput, "LUT needs at least 2 points per axis");
        if (grid_.size() != n_ * n_ * n_)
            throw Error(ErrorCode::InvalidInput, "LUT grid size does not match n^3");
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept { return (k * n_ + j) * n_ + i; }

    const Rgb& at(std::size_t i, std::size_t j, std::size_t k) const { return grid_[index(i, j, k)]; }
    Rgb& at(std::size_t i, std::size_t j, std::size_t k) { return grid_[index(i, j, k)]; }

    const std::vector<Rgb>& entries() const noexcept { return grid_; }

    bool all_finite() const
    {
        return std::all_of(grid_.begin(), grid_.end(), [](const Rgb& p) {
            return std::isfinite(p.r) && std::isfinite(p.g) && std::isfinite(p.b);
        });
    }

private:
    std::size_t n_;
    std::vector<Rgb> grid_;
};

inline Lut3d lut3d_identity(std::size_t n)
{
    if (n < 2)
        throw Error(ErrorCode::InvalidInput, "LUT needs at least 2 points per axis");
    std::vector<Rgb> grid(n * n * n);
    const double d = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                grid[(k * n + j) * n + i] = {i / d, j / d, k / d};
    return Lut3d(n, std::move(grid));
}

/// Samples a fitted transform on the n^3 lattice, for export as a .cube
/// table. Output is clamped to [0,1].
inline Lut3d lut3d_bake(const IacParams& params, std::size_t n)
{
    ImageBuf lattice(n * n, n);
    const Lut3d id = lut3d_identity(n);
    for (std::size_t p = 0; p < id.entries().size(); ++p)
        lattice.set_pixel(p, id.entries()[p]);
    const ImageBuf out = apply_iac(lattice, params);
    std::vector<Rgb> grid(out.pixel_count());
    for (std::size_t p = 0; p < grid.size(); ++p)
        grid[p] = out.pixel(p);
    return Lut3d(n, std::move(grid));
}

namespace detail {

/// Lower lattice index and fractional offset along one axis. Values of
/// exactly 1.0 land in the last cell.
inline std::pair<std::size_t, double> lattice_cell(double v, std::size_t n)
{
    const double u = std::clamp(v, 0.0, 1.0) * static_cast<double>(n - 1);
    std::size_t i = static_cast<std::size_t>(u);
    if (i > n - 2)
        i = n - 2;
    return {i, u - static_cast<double>(i)};
}

} // namespace detail

inline Rgb lut3d_lookup(const Lut3d& lut, const Rgb& p)
{
    const std::size_t n = lut.size();
    const auto [i, fr] = detail::lattice_cell(p.r, n);
    const auto [j, fg] = detail::lattice_cell(p.g, n);
    const auto [k, fb] = detail::lattice_cell(p.b, n);
    Rgb out;
    for (int dk = 0; dk < 2; ++dk) {
        const double wb = dk ? fb : 1.0 - fb;
        for (int dj = 0; dj < 2; ++dj) {
            const double wg = dj ? fg : 1.0 - fg;
            for (int di = 0; di < 2; ++di) {
                const double w = wb * wg * (di ? fr : 1.0 - fr);
                const Rgb& c = lut.at(i + di, j + dj, k + dk);
                out.r += w * c.r;
                out.g += w * c.g;
                out.b += w * c.b;
            }
        }
    }
    return out;
}

inline ImageBuf lut3d_trilinear(const ImageBuf& image, const Lut3d& lut)
{
    detail::require_finite(image, "image");
    if (!lut.all_finite())
        throw Error(ErrorCode::InvalidInput, "LUT contains non-finite entries");
    ImageBuf out(image.height(), image.width());
    detail::parallel_for(image.pixel_count(), [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p)
            out.set_pixel(p, lut3d_lookup(lut, image.pixel(p)));
    });
    return out;
}

/// Fraction of lattice vertices that are a corner of at least one pixel's
/// enclosing cell, i.e. the vertices trilinear interpolation reads.
inline double lut_occupancy(const ImageBuf& image, std::size_t n)
{
    if (n < 2)
        throw Error(ErrorCode::InvalidInput, "LUT needs at least 2 points per axis");
    detail::require_finite(image, "image");
    std::vector<char> used(n * n * n, 0);
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        const Rgb px = image.pixel(p);
        const std::size_t i = detail::lattice_cell(px.r, n).first;
        const std::size_t j = detail::lattice_cell(px.g, n).first;
        const std::size_t k = detail::lattice_cell(px.b, n).first;
        for (std::size_t dk = 0; dk < 2; ++dk)
            for (std::size_t dj = 0; dj < 2; ++dj)
                for (std::size_t di = 0; di < 2; ++di)
                    used[((k + dk) * n + (j + dj)) * n + (i + di)] = 1;
    }
    const auto count = std::count(used.begin(), used.end(), 1);
    return static_cast<double>(count) / static_cast<double>(used.size());
}

/// Direct (non-learned) LUT fit: each vertex is its own lattice color plus
/// the trilinear-weighted mean offset (target - input) of the pixels whose
/// cell touches it. Vertices no pixel touches keep the identity value.
inline Lut3d lut3d_fit_splat(const ImageBuf& input, const ImageBuf& target, std::size_t n)
{
    detail::require_same_shape(input, target);
    detail::require_finite(input, "input");
    detail::require_finite(target, "target");
    Lut3d lut = lut3d_identity(n);
    std::vector<Rgb> acc(n * n * n);
    std::vector<double> weight(n * n * n, 0.0);
    for (std::size_t p = 0; p < input.pixel_count(); ++p) {
        const Rgb px = input.pixel(p);
        const Rgb tg = target.pixel(p);
        const auto [i, fr] = detail::lattice_cell(px.r, n);
        const auto [j, fg] = detail::lattice_cell(px.g, n);
        const auto [k, fb] = detail::lattice_cell(px.b, n);
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const double w = (dk ? fb : 1 - fb) * (dj ? fg : 1 - fg) * (di ? fr : 1 - fr);
                    const std::size_t idx = lut.index(i + di, j + dj, k + dk);
                    acc[idx].r += w * (tg.r - px.r);
                    acc[idx].g += w * (tg.g - px.g);
                    acc[idx].b += w * (tg.b - px.b);
                    weight[idx] += w;
                }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = lut.index(i, j, k);
                if (weight[idx] > 1e-12) {
                    Rgb& v = lut.at(i, j, k);
                    v.r += acc[idx].r / weight[idx];
                    v.g += acc[idx].g / weight[idx];
                    v.b += acc[idx].b / weight[idx];
                }
            }
    return lut;
}

// .cube text format: optional TITLE / DOMAIN lines, LUT_3D_SIZE n, then n^3
// "r g b" lines with R varying fastest.

inline void write_cube(const Lut3d& lut, std::ostream& os, const std::string& title = "")
{
    if (!title.empty())
        os << "TITLE \"" << title << "\"\n";
    os << "LUT_3D_SIZE " << lut.size() << "\n";
    os << std::setprecision(10);
    for (const Rgb& e : lut.entries())
        os << e.r << ' ' << e.g << ' ' << e.b << '\n';
}

inline void save_cube(const Lut3d& lut, const std::string& path, const std::string& title = "")
{
    std::ofstream os(path);
    if (!os)
        throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    write_cube(lut, os, title);
    if (!os)
        throw Error(ErrorCode::Io, "write failed: " + path);
}

inline Lut3d read_cube(std::istream& is)
{
    std::size_t n = 0;
    std::vector<Rgb> grid;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "LUT_3D_SIZE") {
            if (!(ls >> n) || n < 2)
                throw Error(ErrorCode::Format, "bad LUT_3D_SIZE line");
            grid.reserve(n * n * n);
            continue;
        }
        if (head == "TITLE" || head == "DOMAIN_MIN" || head == "DOMAIN_MAX")
            continue;
        if (head == "LUT_1D_SIZE")
            throw Error(ErrorCode::Format, "1D .cube tables are not supported");
        std::istringstream vs(line);
        Rgb e;
        if (!(vs >> e.r >> e.g >> e.b))
            throw Error(ErrorCode::Format, "malformed LUT entry: " + line);
        if (n == 0)
            throw Error(ErrorCode::Format, "LUT entry before LUT_3D_SIZE");
        grid.push_back(e);
    }
    if (n == 0)
        throw Error(ErrorCode::Format, "missing LUT_3D_SIZE");
    if (grid.size() != n * n * n)
        throw Error(ErrorCode::Format, "expected " + std::to_string(n * n * n) + " entries, found " +
                                           std::to_string(grid.size()));
    return Lut3d(n, std::move(grid));
}

inline Lut3d load_cube(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorCode::Io, "cannot open " + path);
    return read_cube(is);
}

} // namespace iac
