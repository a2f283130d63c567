#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iac/fit.hpp"

namespace iac {

struct GradCheckTolerance {
    double h = 1e-5;
    double rel = 1e-4;       // where max(|analytic|, |numeric|) > significant
    double abs = 1e-7;       // below that magnitude
    double significant = 1e-6;
    double knot_margin = 1e-4; // exclusion radius around knots and sign flips
};

struct GradCheckInstance {
    IacParams params;
    ImageBuf image;
    ImageBuf target;
    LossKind loss;
};

struct GradCheckResult {
    int trial = 0;
    std::size_t curve_dims = 0;
    std::string loss;
    double max_rel_error = 0.0; // over significant components
    double max_abs_error = 0.0; // over small components
    int significant_components = 0;
    bool passed = false;
};

/// True when every normalized coordinate is at least `margin` away from a
/// curve knot and from the clamp limits, every basis entry is at least
/// `margin` away from a sign flip, and (for L1) every residual is away
/// from zero.
inline bool away_from_kinks(const GradCheckInstance& inst, double margin)
{
    const IacParams& p = inst.params;
    for (double v : p.basis().m)
        if (std::abs(v) < margin)
            return false;
    const std::size_t k = p.curve_dims();
    const double spacing = 1.0 / static_cast<double>(k - 1);
    const ChannelBounds& b = p.bounds();
    for (std::size_t px = 0; px < inst.image.pixel_count(); ++px) {
        const Rgb t = row_times(inst.image.pixel(px), p.basis().m);
        for (int i = 0; i < 3; ++i) {
            const double tn = (t[i] - b.lo[i]) / b.span(i);
            if (tn < margin || tn > 1.0 - margin)
                return false;
            const double off = std::fmod(tn, spacing);
            if (off < margin || spacing - off < margin)
                return false;
        }
    }
    if (inst.loss.type == LossKind::Type::L1) {
        const ImageBuf pred = apply_iac(inst.image, p, OutputClamp::None);
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (std::abs(pred.data()[i] - inst.target.data()[i]) < margin)
                return false;
    }
    return true;
}

/// Random 8x8 instance: basis entries of magnitude in [0.05, 1] with random
/// signs and |det| >= 0.05, random non-monotone curves with values in
/// [0.02, 0.98], and a target that differs from the input by noise. Loss
/// kind and curve size rotate with the trial index.
inline GradCheckInstance random_gradcheck_instance(std::mt19937_64& rng, int trial, double margin)
{
    static constexpr std::size_t dims[] = {8, 32, 200};
    const LossKind losses[] = {LossKind::smooth_l1(0.1), LossKind::mse(), LossKind::l1()};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t k = dims[trial % 3];
    const LossKind loss = losses[(trial / 3) % 3];
    for (;;) {
        Basis basis;
        do {
            for (double& v : basis.m)
                v = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.05 + 0.95 * unit(rng));
        } while (std::abs(basis.det()) < 0.05);
        CurveSet curves;
        for (auto& c : curves)
            c = Curve::sample(k, [&](double) { return 0.02 + 0.96 * unit(rng); });
        ImageBuf image(8, 8), target(8, 8);
        for (double& v : image.data())
            v = 0.02 + 0.96 * unit(rng);
        for (std::size_t i = 0; i < target.size(); ++i)
            target.data()[i] = std::clamp(image.data()[i] + 0.3 * (unit(rng) - 0.5), 0.0, 1.0);
        GradCheckInstance inst{IacParams(basis, std::move(curves)), std::move(image), std::move(target), loss};
        if (away_from_kinks(inst, margin))
            return inst;
    }
}

inline GradCheckResult compare_gradients(const Gradients& analytic, const Gradients& numeric,
                                         const GradCheckTolerance& tol)
{
    GradCheckResult r;
    r.passed = true;
    auto check = [&](double a, double n) {
        const double mag = std::max(std::abs(a), std::abs(n));
        const double err = std::abs(a - n);
        if (mag > tol.significant) {
            ++r.significant_components;
            r.max_rel_error = std::max(r.max_rel_error, err / mag);
            if (err / mag > tol.rel)
                r.passed = false;
        } else {
            r.max_abs_error = std::max(r.max_abs_error, err);
            if (err > tol.abs)
                r.passed = false;
        }
    };
    for (int e = 0; e < 9; ++e)
        check(analytic.d_basis[e], numeric.d_basis[e]);
    for (int i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < analytic.curve_dims(); ++j)
            check(analytic.d_curves[i][j], numeric.d_curves[i][j]);
    return r;
}

/// Compares backward() with grad_fd() on `trials` random instances.
inline std::vector<GradCheckResult> gradient_check(int trials, std::uint64_t seed,
                                                   const GradCheckTolerance& tol = {})
{
    std::mt19937_64 rng(seed);
    std::vector<GradCheckResult> results;
    for (int t = 0; t < trials; ++t) {
        const GradCheckInstance inst = random_gradcheck_instance(rng, t, tol.knot_margin);
        const auto [loss, analytic] = backward(inst.params, inst.image, inst.target, inst.loss);
        const Gradients numeric = grad_fd(inst.params, inst.image, inst.target, inst.loss, tol.h);
        GradCheckResult r = compare_gradients(analytic, numeric, tol);
        r.trial = t;
        r.curve_dims = inst.params.curve_dims();
        r.loss = to_string(inst.loss);
        results.push_back(r);
    }
    return results;
}

} // namespace iac
