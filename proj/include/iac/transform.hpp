#pragma once

#include <array>
#include <cstddef>
#include <utility>

#include "iac/basis.hpp"
#include "iac/curve.hpp"
#include "iac/image.hpp"

namespace iac {

/// Pixels expressed in the projected coordinates. Channel i holds t_i, or
/// its normalized form when `normalized` is set.
struct ProjectedImage {
    ImageBuf values;
    bool normalized = false;
};

using CurveSet = std::array<Curve, 3>;

inline CurveSet identity_curves(std::size_t k)
{
    return {Curve::identity(k), Curve::identity(k), Curve::identity(k)};
}

/// Complete per-image transform: basis, three curves, and the bounds derived
/// from the basis. The basis is always invertible and the bounds always
/// match it.
class IacParams {
public:
    IacParams() : IacParams(Basis::identity(), identity_curves(kDefaultCurveDims)) {}

    IacParams(const Basis& basis, CurveSet curves) : curves_(std::move(curves))
    {
        set_basis(basis);
        check_curve_dims();
    }

    static IacParams identity(std::size_t k = kDefaultCurveDims)
    {
        return IacParams(Basis::identity(), identity_curves(k));
    }

    const Basis& basis() const noexcept { return basis_; }
    const Basis& inverse() const noexcept { return inverse_; }
    const ChannelBounds& bounds() const noexcept { return bounds_; }
    const CurveSet& curves() const noexcept { return curves_; }
    const Curve& curve(int i) const { return curves_[i]; }
    std::size_t curve_dims() const noexcept { return curves_[0].size(); }

    /// Throws SingularBasis when the basis is not invertible.
    void set_basis(const Basis& basis)
    {
        if (!basis.finite())
            throw Error(ErrorCode::InvalidInput, "basis contains non-finite values");
        inverse_ = invert_basis(basis);
        basis_ = basis;
        bounds_ = compute_bounds(basis);
    }

    void set_curves(CurveSet curves)
    {
        curves_ = std::move(curves);
        check_curve_dims();
    }

    Curve& mutable_curve(int i) { return curves_[i]; }

    friend bool operator==(const IacParams& a, const IacParams& b)
    {
        return a.basis_ == b.basis_ && a.curves_ == b.curves_;
    }

private:
    void check_curve_dims() const
    {
        if (curves_[1].size() != curves_[0].size() || curves_[2].size() != curves_[0].size())
            throw Error(ErrorCode::InvalidCurve, "all three curves must have the same number of control points");
    }

    Basis basis_;
    Basis inverse_;
    ChannelBounds bounds_;
    CurveSet curves_;
};

inline ProjectedImage project(const ImageBuf& image, const Basis& basis)
{
    detail::require_finite(image, "image");
    if (!basis.finite())
        throw Error(ErrorCode::InvalidInput, "basis contains non-finite values");
    ImageBuf out(image.height(), image.width());
    for (std::size_t i = 0; i < image.pixel_count(); ++i)
        out.set_pixel(i, row_times(image.pixel(i), basis.m));
    return {std::move(out), false};
}

inline ProjectedImage normalize(const ProjectedImage& proj, const ChannelBounds& bounds)
{
    if (proj.normalized)
        throw Error(ErrorCode::InvalidInput, "normalize expects unnormalized coordinates");
    validate_bounds(bounds);
    ImageBuf out = proj.values;
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const int c = static_cast<int>(i % 3);
        d[i] = std::clamp((d[i] - bounds.lo[c]) / bounds.span(c), 0.0, 1.0);
    }
    return {std::move(out), true};
}

inline ProjectedImage apply_curves(const ProjectedImage& proj, const CurveSet& curves)
{
    if (!proj.normalized)
        throw Error(ErrorCode::InvalidInput, "apply_curves expects normalized coordinates");
    ImageBuf out = proj.values;
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = curve_eval(curves[i % 3], d[i]);
    return {std::move(out), true};
}

inline ProjectedImage denormalize(const ProjectedImage& proj, const ChannelBounds& bounds)
{
    if (!proj.normalized)
        throw Error(ErrorCode::InvalidInput, "denormalize expects normalized coordinates");
    validate_bounds(bounds);
    ImageBuf out = proj.values;
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const int c = static_cast<int>(i % 3);
        d[i] = d[i] * bounds.span(c) + bounds.lo[c];
    }
    return {std::move(out), false};
}

/// Maps projected coordinates back to RGB with the inverse basis. No clamping.
inline ImageBuf inverse_project(const ProjectedImage& proj, const Basis& basis)
{
    if (proj.normalized)
        throw Error(ErrorCode::InvalidInput, "inverse_project expects unnormalized coordinates");
    detail::require_finite(proj.values, "projected image");
    const Basis inv = invert_basis(basis);
    ImageBuf out(proj.values.height(), proj.values.width());
    for (std::size_t i = 0; i < out.pixel_count(); ++i)
        out.set_pixel(i, row_times(proj.values.pixel(i), inv.m));
    return out;
}

enum class OutputClamp { Clamp, None };

namespace detail {

/// Fused per-pixel kernel for the full pipeline. Per-pixel arithmetic is
/// identical regardless of how the pixel range is split across threads.
inline void apply_iac_kernel(std::span<const double> in, std::span<double> out, const IacParams& params,
                             OutputClamp clamp)
{
    const Mat3& m = params.basis().m;
    const Mat3& inv = params.inverse().m;
    const ChannelBounds& b = params.bounds();
    const double lo[3] = {b.lo[0], b.lo[1], b.lo[2]};
    const double span[3] = {b.span(0), b.span(1), b.span(2)};
    const double rspan[3] = {1.0 / span[0], 1.0 / span[1], 1.0 / span[2]};
    const std::span<const double> cv[3] = {params.curve(0).values(), params.curve(1).values(),
                                           params.curve(2).values()};
    const std::size_t k = params.curve_dims();
    const double scale = static_cast<double>(k - 1);
    const std::size_t last = k - 2;

    parallel_for(in.size() / 3, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            const double r = in[3 * p], g = in[3 * p + 1], bl = in[3 * p + 2];
            double s[3];
            for (int i = 0; i < 3; ++i) {
                const double t = r * m[i] + g * m[3 + i] + bl * m[6 + i];
                double tn = (t - lo[i]) * rspan[i];
                tn = tn < 0.0 ? 0.0 : (tn > 1.0 ? 1.0 : tn);
                const double u = tn * scale;
                std::size_t j = static_cast<std::size_t>(u);
                if (j > last)
                    j = last;
                const double f = u - static_cast<double>(j);
                const double c = (1.0 - f) * cv[i][j] + f * cv[i][j + 1];
                s[i] = c * span[i] + lo[i];
            }
            for (int j = 0; j < 3; ++j) {
                double v = s[0] * inv[j] + s[1] * inv[3 + j] + s[2] * inv[6 + j];
                if (clamp == OutputClamp::Clamp)
                    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                out[3 * p + j] = v;
            }
        }
    });
}

} // namespace detail

/// Full transform: project, normalize, curves, denormalize, inverse project.
/// The result is clamped to [0,1] unless OutputClamp::None is requested
/// (fitting works on the unclamped values).
inline ImageBuf apply_iac(const ImageBuf& image, const IacParams& params, OutputClamp clamp = OutputClamp::Clamp)
{
    detail::require_finite(image, "image");
    ImageBuf out(image.height(), image.width());
    detail::apply_iac_kernel(image.data(), out.data(), params, clamp);
    return out;
}

} // namespace iac
