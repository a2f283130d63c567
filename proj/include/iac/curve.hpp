#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iac/image.hpp"

namespace iac {

inline constexpr std::size_t kDefaultCurveDims = 200;

/// Piecewise-linear map on [0,1] sampled at K evenly spaced control points.
/// Control values live in [0,1]; monotonicity is not required.
class Curve {
public:
    Curve() : Curve(identity(kDefaultCurveDims)) {}

    explicit Curve(std::vector<double> values) : values_(std::move(values)) { validate(); }

    static Curve identity(std::size_t k)
    {
        if (k < 2)
            throw Error(ErrorCode::InvalidCurve, "curve needs at least 2 control points");
        std::vector<double> v(k);
        for (std::size_t i = 0; i < k; ++i)
            v[i] = static_cast<double>(i) / static_cast<double>(k - 1);
        return Curve(std::move(v));
    }

    static Curve constant(std::size_t k, double value)
    {
        return Curve(std::vector<double>(k, value));
    }

    /// Samples f at the K control positions.
    template <class F>
    static Curve sample(std::size_t k, F&& f)
    {
        if (k < 2)
            throw Error(ErrorCode::InvalidCurve, "curve needs at least 2 control points");
        std::vector<double> v(k);
        for (std::size_t i = 0; i < k; ++i)
            v[i] = std::clamp(f(static_cast<double>(i) / static_cast<double>(k - 1)), 0.0, 1.0);
        return Curve(std::move(v));
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Replaces one control value, clamped into [0,1].
    void set(std::size_t i, double v) { values_.at(i) = std::clamp(v, 0.0, 1.0); }

    friend bool operator==(const Curve&, const Curve&) = default;

private:
    void validate() const
    {
        if (values_.size() < 2)
            throw Error(ErrorCode::InvalidCurve, "curve needs at least 2 control points, got " +
                                                     std::to_string(values_.size()));
        for (double v : values_)
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw Error(ErrorCode::InvalidCurve, "control value outside [0,1]: " + std::to_string(v));
    }

    std::vector<double> values_;
};

/// Active segment for a lookup: output = (1 - frac) * v[index] + frac * v[index + 1].
struct CurveSegment {
    std::size_t index;
    double frac;
};

/// Locates t (clamped to [0,1]) on a K-point grid. A knot selects the
/// segment to its right; t = 1 selects the last segment with frac = 1.
inline CurveSegment curve_segment(std::size_t k, double t)
{
    const double u = std::clamp(t, 0.0, 1.0) * static_cast<double>(k - 1);
    std::size_t j = static_cast<std::size_t>(u);
    if (j >= k - 1)
        j = k - 2;
    return {j, u - static_cast<double>(j)};
}

inline double curve_eval(std::span<const double> values, double t)
{
    const CurveSegment s = curve_segment(values.size(), t);
    return (1.0 - s.frac) * values[s.index] + s.frac * values[s.index + 1];
}

inline double curve_eval(const Curve& curve, double t)
{
    return curve_eval(curve.values(), t);
}

} // namespace iac
