#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "iac/image.hpp"

namespace iac {

/// Invertibility threshold on |det|.
inline constexpr double kDetThreshold = 1e-6;
/// Half-width of the uniform perturbation used by repair_rank.
inline constexpr double kRepairSigma = 1e-3;
inline constexpr int kRepairAttempts = 10;
/// Minimum normalization span hi - lo per projected channel.
inline constexpr double kMinRange = 1e-4;

/// Row-major 3x3 matrix.
using Mat3 = std::array<double, 9>;

inline constexpr Mat3 kIdentity3 = {1, 0, 0, 0, 1, 0, 0, 0, 1};

inline double det3(const Mat3& m)
{
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline Mat3 mul3(const Mat3& a, const Mat3& b)
{
    Mat3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out[r * 3 + c] = a[r * 3] * b[c] + a[r * 3 + 1] * b[3 + c] + a[r * 3 + 2] * b[6 + c];
    return out;
}

inline Mat3 transpose3(const Mat3& m)
{
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

inline double frobenius3(const Mat3& m)
{
    double s = 0.0;
    for (double v : m)
        s += v * v;
    return std::sqrt(s);
}

/// Row vector times matrix: out_j = sum_i v_i m[i][j].
inline Rgb row_times(const Rgb& v, const Mat3& m)
{
    return {v.r * m[0] + v.g * m[3] + v.b * m[6], v.r * m[1] + v.g * m[4] + v.b * m[7],
            v.r * m[2] + v.g * m[5] + v.b * m[8]};
}

/// Projection basis. Column i holds n_{i+1} = (a_i, b_i, c_i), so a pixel
/// row vector (r, g, b) projects to t_i = r*a_i + g*b_i + b*c_i.
struct Basis {
    Mat3 m = kIdentity3;

    static Basis identity() { return {}; }

    /// Builds a basis from its three column vectors.
    static Basis from_columns(const Rgb& n1, const Rgb& n2, const Rgb& n3)
    {
        return {{n1.r, n2.r, n3.r, n1.g, n2.g, n3.g, n1.b, n2.b, n3.b}};
    }

    double at(int row, int col) const { return m[row * 3 + col]; }
    double& at(int row, int col) { return m[row * 3 + col]; }

    Rgb column(int i) const { return {m[i], m[3 + i], m[6 + i]}; }

    double det() const { return det3(m); }

    bool finite() const
    {
        for (double v : m)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    bool invertible() const { return finite() && std::abs(det()) >= kDetThreshold; }

    friend bool operator==(const Basis&, const Basis&) = default;
};

/// Per projected channel range used for normalization.
struct ChannelBounds {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{1, 1, 1};

    double span(int i) const { return hi[i] - lo[i]; }

    friend bool operator==(const ChannelBounds&, const ChannelBounds&) = default;
};

/// Exact extrema of each linear form t_i over the unit RGB cube: negative
/// coefficients contribute to lo, positive ones to hi. Spans narrower than
/// kMinRange are widened symmetrically about their midpoint.
inline ChannelBounds compute_bounds(const Basis& basis)
{
    if (!basis.finite())
        throw Error(ErrorCode::InvalidInput, "basis contains non-finite values");
    ChannelBounds b;
    for (int i = 0; i < 3; ++i) {
        double lo = 0.0, hi = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double v = basis.at(c, i);
            lo += std::min(0.0, v);
            hi += std::max(0.0, v);
        }
        if (hi - lo < kMinRange) {
            const double mid = 0.5 * (lo + hi);
            lo = mid - 0.5 * kMinRange;
            hi = mid + 0.5 * kMinRange;
        }
        b.lo[i] = lo;
        b.hi[i] = hi;
    }
    return b;
}

inline void validate_bounds(const ChannelBounds& bounds)
{
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(bounds.lo[i]) || !std::isfinite(bounds.hi[i]))
            throw Error(ErrorCode::InvalidInput, "non-finite channel bounds");
        // Widening is done in double, so allow one ulp-scale shortfall.
        if (bounds.span(i) < kMinRange * (1.0 - 1e-9))
            throw Error(ErrorCode::InvalidInput, "channel bounds span below minimum range");
    }
}

/// Cofactor inverse of the basis matrix.
inline Basis invert_basis(const Basis& basis)
{
    if (!basis.finite())
        throw Error(ErrorCode::InvalidInput, "basis contains non-finite values");
    const Mat3& m = basis.m;
    const double d = det3(m);
    if (std::abs(d) < kDetThreshold)
        throw Error(ErrorCode::SingularBasis, "|det| = " + std::to_string(std::abs(d)) + " below threshold");
    const double inv = 1.0 / d;
    Basis out;
    out.m = {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv, (m[1] * m[5] - m[2] * m[4]) * inv,
             (m[5] * m[6] - m[3] * m[8]) * inv, (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
             (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv, (m[0] * m[4] - m[1] * m[3]) * inv};
    return out;
}

/// Frobenius-norm condition number ||M||_F * ||M^-1||_F (>= 3 for any basis).
inline double condition_number(const Basis& basis)
{
    if (!basis.invertible())
        return INFINITY;
    return frobenius3(basis.m) * frobenius3(invert_basis(basis).m);
}

/// Perturbs a (near-)singular basis with uniform noise in
/// [-kRepairSigma, kRepairSigma] until |det| >= kDetThreshold. Each attempt
/// perturbs the original input, not the previous attempt.
inline Basis repair_rank(const Basis& basis, std::uint64_t seed)
{
    if (!basis.finite())
        throw Error(ErrorCode::InvalidInput, "basis contains non-finite values");
    if (basis.invertible())
        return basis;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-kRepairSigma, kRepairSigma);
    for (int attempt = 0; attempt < kRepairAttempts; ++attempt) {
        Basis candidate = basis;
        for (double& v : candidate.m)
            v += noise(rng);
        if (candidate.invertible())
            return candidate;
    }
    throw Error(ErrorCode::RepairFailed, "no invertible perturbation found after " +
                                             std::to_string(kRepairAttempts) + " attempts");
}

} // namespace iac
