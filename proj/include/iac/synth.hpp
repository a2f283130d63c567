#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <variant>

#include "iac/basis.hpp"
#include "iac/image.hpp"
#include "iac/transform.hpp"

namespace iac {

// Synthetic target kinds.

struct HueRotate {
    double degrees = 0.0;
};
struct Gamma {
    std::array<double, 3> gamma{1.0, 1.0, 1.0};
};
struct ChannelMix {
    Mat3 matrix = kIdentity3; // applied as pixel * matrix
};
struct ExposureShift {
    double ev = 0.0;
};
struct Permute {
    std::array<int, 3> source{0, 1, 2}; // output channel c takes input channel source[c]
};
/// A random well-conditioned transform from the IAC family itself, drawn
/// from the seed passed to synth_target.
struct RandomIac {
    std::size_t curve_dims = kDefaultCurveDims;
};

using SynthKind = std::variant<HueRotate, Gamma, ChannelMix, ExposureShift, Permute, RandomIac>;

/// Rotation about the gray axis (1,1,1)/sqrt(3), arranged for row-vector
/// pixels: out = pixel * hue_rotation_matrix(deg).
inline Mat3 hue_rotation_matrix(double degrees)
{
    const double th = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(th), s = std::sin(th) / std::sqrt(3.0), o = (1.0 - c) / 3.0;
    // Column-vector rotation R = c I + s' [k]x + (1 - c) k k^T; transposed for row vectors.
    const Mat3 r = {c + o, o - s, o + s, o + s, c + o, o - s, o - s, o + s, c + o};
    return transpose3(r);
}

/// Parses a permutation written as three letters over {R,G,B}, e.g. "GBR"
/// means output (G, B, R).
inline Permute parse_permutation(const std::string& text)
{
    if (text.size() != 3)
        throw Error(ErrorCode::InvalidInput, "permutation must have three letters, got '" + text + "'");
    Permute p;
    bool seen[3] = {false, false, false};
    for (int c = 0; c < 3; ++c) {
        int src = -1;
        switch (text[c]) {
        case 'R': case 'r': src = 0; break;
        case 'G': case 'g': src = 1; break;
        case 'B': case 'b': src = 2; break;
        default: break;
        }
        if (src < 0 || seen[src])
            throw Error(ErrorCode::InvalidInput, "'" + text + "' is not a permutation of RGB");
        seen[src] = true;
        p.source[c] = src;
    }
    return p;
}

/// Draws a well-conditioned basis (identity plus uniform +-0.35 entries,
/// |det| >= 0.5, Frobenius condition <= 6) and three smooth monotone curves
/// (power law blended with smoothstep).
inline IacParams random_iac_params(std::uint64_t seed, std::size_t curve_dims = kDefaultCurveDims)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> off(-0.35, 0.35);
    Basis basis;
    for (;;) {
        basis = Basis::identity();
        for (double& v : basis.m)
            v += off(rng);
        if (std::abs(basis.det()) >= 0.5 && condition_number(basis) <= 6.0)
            break;
    }
    std::uniform_real_distribution<double> gamma(0.6, 1.6);
    std::uniform_real_distribution<double> blend(0.0, 0.5);
    CurveSet curves;
    for (auto& c : curves) {
        const double g = gamma(rng), w = blend(rng);
        c = Curve::sample(curve_dims, [g, w](double t) {
            return (1.0 - w) * std::pow(t, g) + w * t * t * (3.0 - 2.0 * t);
        });
    }
    return IacParams(basis, std::move(curves));
}

namespace detail {

inline ImageBuf map_pixels(const ImageBuf& image, auto&& fn)
{
    ImageBuf out(image.height(), image.width());
    for (std::size_t p = 0; p < image.pixel_count(); ++p)
        out.set_pixel(p, fn(image.pixel(p)));
    return out;
}

inline Rgb clamp_rgb(Rgb p)
{
    for (std::size_t c = 0; c < 3; ++c)
        p[c] = std::clamp(p[c], 0.0, 1.0);
    return p;
}

} // namespace detail

inline ImageBuf synth_target(const ImageBuf& image, const SynthKind& kind, std::uint64_t seed = 0)
{
    detail::require_finite(image, "image");
    return std::visit(
        [&](const auto& k) -> ImageBuf {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, HueRotate>) {
                if (!std::isfinite(k.degrees))
                    throw Error(ErrorCode::InvalidInput, "hue angle must be finite");
                const Mat3 r = hue_rotation_matrix(k.degrees);
                return detail::map_pixels(image, [&](const Rgb& p) { return detail::clamp_rgb(row_times(p, r)); });
            } else if constexpr (std::is_same_v<K, Gamma>) {
                for (double g : k.gamma)
                    if (!(g > 0.0) || !std::isfinite(g))
                        throw Error(ErrorCode::InvalidInput, "gamma must be positive and finite");
                return detail::map_pixels(image, [&](const Rgb& p) {
                    Rgb o;
                    for (std::size_t c = 0; c < 3; ++c)
                        o[c] = std::pow(std::clamp(p[c], 0.0, 1.0), k.gamma[c]);
                    return o;
                });
            } else if constexpr (std::is_same_v<K, ChannelMix>) {
                for (double v : k.matrix)
                    if (!std::isfinite(v))
                        throw Error(ErrorCode::InvalidInput, "mix matrix must be finite");
                return detail::map_pixels(image,
                                          [&](const Rgb& p) { return detail::clamp_rgb(row_times(p, k.matrix)); });
            } else if constexpr (std::is_same_v<K, ExposureShift>) {
                if (!std::isfinite(k.ev))
                    throw Error(ErrorCode::InvalidInput, "EV must be finite");
                const double gain = std::exp2(k.ev);
                return detail::map_pixels(image, [&](const Rgb& p) {
                    return detail::clamp_rgb({p.r * gain, p.g * gain, p.b * gain});
                });
            } else if constexpr (std::is_same_v<K, Permute>) {
                return detail::map_pixels(image, [&](const Rgb& p) {
                    return Rgb{p[k.source[0]], p[k.source[1]], p[k.source[2]]};
                });
            } else {
                return apply_iac(image, random_iac_params(seed, k.curve_dims));
            }
        },
        kind);
}

} // namespace iac
