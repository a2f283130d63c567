#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iac/basis.hpp"
#include "iac/curve.hpp"
#include "iac/image.hpp"
#include "iac/metrics.hpp"
#include "iac/transform.hpp"

namespace iac {

struct LossKind {
    enum class Type { SmoothL1, L1, MSE };

    Type type = Type::SmoothL1;
    double beta = 0.1; // SmoothL1 threshold

    static LossKind smooth_l1(double beta = 0.1) { return {Type::SmoothL1, beta}; }
    static LossKind l1() { return {Type::L1, 0.1}; }
    static LossKind mse() { return {Type::MSE, 0.1}; }

    void validate() const
    {
        if (type == Type::SmoothL1 && !(beta > 0.0))
            throw Error(ErrorCode::InvalidInput, "smooth L1 beta must be positive");
    }

    /// Per-element loss and its derivative with respect to d = pred - target.
    std::pair<double, double> eval(double d) const
    {
        switch (type) {
        case Type::SmoothL1: {
            const double ad = std::abs(d);
            if (ad < beta)
                return {0.5 * d * d / beta, d / beta};
            return {ad - 0.5 * beta, d > 0 ? 1.0 : -1.0};
        }
        case Type::L1:
            return {std::abs(d), d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)};
        case Type::MSE:
            return {d * d, 2.0 * d};
        }
        return {0.0, 0.0};
    }
};

inline std::string to_string(const LossKind& kind)
{
    switch (kind.type) {
    case LossKind::Type::SmoothL1: return "smoothl1";
    case LossKind::Type::L1: return "l1";
    case LossKind::Type::MSE: return "mse";
    }
    return "unknown";
}

inline LossKind parse_loss_kind(const std::string& name, double beta = 0.1)
{
    if (name == "smoothl1")
        return LossKind::smooth_l1(beta);
    if (name == "l1")
        return LossKind::l1();
    if (name == "mse")
        return LossKind::mse();
    throw Error(ErrorCode::InvalidInput, "unknown loss kind '" + name + "'");
}

/// Mean of the per-element loss over all H*W*3 values.
inline double loss_eval(const ImageBuf& pred, const ImageBuf& target, const LossKind& kind)
{
    detail::require_same_shape(pred, target);
    kind.validate();
    auto p = pred.data();
    auto t = target.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        sum += kind.eval(p[i] - t[i]).first;
    return sum / static_cast<double>(p.size());
}

struct Gradients {
    Mat3 d_basis{};
    std::array<std::vector<double>, 3> d_curves;

    explicit Gradients(std::size_t k = kDefaultCurveDims)
        : d_curves{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)}
    {
    }

    std::size_t curve_dims() const { return d_curves[0].size(); }

    bool all_finite() const
    {
        for (double v : d_basis)
            if (!std::isfinite(v))
                return false;
        for (const auto& c : d_curves)
            for (double v : c)
                if (!std::isfinite(v))
                    return false;
        return true;
    }
};

namespace detail {

/// Raw view of the parameters the forward pass reads. Lets the
/// finite-difference oracle perturb values without the Curve invariants.
struct ParamView {
    Mat3 m;
    Mat3 inv;
    ChannelBounds bounds;
    std::array<std::span<const double>, 3> curves;
};

inline ParamView view_of(const IacParams& p)
{
    return {p.basis().m, p.inverse().m, p.bounds(),
            {p.curve(0).values(), p.curve(1).values(), p.curve(2).values()}};
}

/// Forward pass without output clamping, straight from a ParamView.
inline ImageBuf forward_unclamped(const ImageBuf& image, const ParamView& v)
{
    ImageBuf out(image.height(), image.width());
    auto in = image.data();
    auto o = out.data();
    const std::size_t k = v.curves[0].size();
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        double s[3];
        for (int i = 0; i < 3; ++i) {
            const double t = in[3 * p] * v.m[i] + in[3 * p + 1] * v.m[3 + i] + in[3 * p + 2] * v.m[6 + i];
            const double tn = std::clamp((t - v.bounds.lo[i]) / v.bounds.span(i), 0.0, 1.0);
            const CurveSegment seg = curve_segment(k, tn);
            const double c = (1.0 - seg.frac) * v.curves[i][seg.index] + seg.frac * v.curves[i][seg.index + 1];
            s[i] = c * v.bounds.span(i) + v.bounds.lo[i];
        }
        for (int j = 0; j < 3; ++j)
            o[3 * p + j] = s[0] * v.inv[j] + s[1] * v.inv[3 + j] + s[2] * v.inv[6 + j];
    }
    return out;
}

struct BackwardAcc {
    double loss = 0.0;
    Mat3 d_m{};    // through the projection t = x M
    Mat3 d_inv{};  // through the inverse projection y = s M^-1
    std::array<double, 3> d_lo{};
    std::array<double, 3> d_span{};
    std::vector<double> d_curves; // 3 * K, channel-major
};

} // namespace detail

/// Loss of the unclamped transform output against target, together with its
/// exact gradient with respect to the basis entries and curve control values.
///
/// Piecewise conventions: a normalized coordinate sitting on a knot
/// differentiates along the segment to its right; a clamped coordinate has
/// zero slope; bound coefficients are split by their current sign, with
/// zero counted as positive. With `freeze_basis` the basis gradient is
/// reported as zero.
inline std::pair<double, Gradients> backward(const IacParams& params, const ImageBuf& image, const ImageBuf& target,
                                             const LossKind& kind, bool freeze_basis = false)
{
    detail::require_same_shape(image, target);
    detail::require_finite(image, "image");
    detail::require_finite(target, "target");
    kind.validate();

    const Mat3& m = params.basis().m;
    const Mat3& inv = params.inverse().m;
    const ChannelBounds& bounds = params.bounds();
    const std::size_t k = params.curve_dims();
    const double kscale = static_cast<double>(k - 1);
    const double lo[3] = {bounds.lo[0], bounds.lo[1], bounds.lo[2]};
    const double span[3] = {bounds.span(0), bounds.span(1), bounds.span(2)};
    const std::span<const double> cv[3] = {params.curve(0).values(), params.curve(1).values(),
                                           params.curve(2).values()};
    const double inv_n = 1.0 / static_cast<double>(image.size());
    auto x = image.data();
    auto y = target.data();

    detail::BackwardAcc zero;
    zero.d_curves.assign(3 * k, 0.0);

    auto partial = [&](std::size_t p0, std::size_t p1, detail::BackwardAcc& acc) {
        for (std::size_t p = p0; p < p1; ++p) {
            const double px[3] = {x[3 * p], x[3 * p + 1], x[3 * p + 2]};
            double tn[3], c[3], s[3], slope[3], frac[3];
            std::size_t seg[3];
            bool inside[3];
            for (int i = 0; i < 3; ++i) {
                const double t = px[0] * m[i] + px[1] * m[3 + i] + px[2] * m[6 + i];
                const double raw = (t - lo[i]) / span[i];
                inside[i] = raw >= 0.0 && raw <= 1.0;
                tn[i] = std::clamp(raw, 0.0, 1.0);
                const CurveSegment sg = curve_segment(k, tn[i]);
                seg[i] = sg.index;
                frac[i] = sg.frac;
                c[i] = (1.0 - sg.frac) * cv[i][sg.index] + sg.frac * cv[i][sg.index + 1];
                slope[i] = (cv[i][sg.index + 1] - cv[i][sg.index]) * kscale;
                s[i] = c[i] * span[i] + lo[i];
            }
            double gy[3];
            for (int j = 0; j < 3; ++j) {
                const double out = s[0] * inv[j] + s[1] * inv[3 + j] + s[2] * inv[6 + j];
                const auto [l, dl] = kind.eval(out - y[3 * p + j]);
                acc.loss += l;
                gy[j] = dl * inv_n;
            }
            for (int i = 0; i < 3; ++i) {
                double gs = 0.0;
                for (int j = 0; j < 3; ++j) {
                    gs += gy[j] * inv[i * 3 + j];
                    acc.d_inv[i * 3 + j] += s[i] * gy[j];
                }
                const double gc = gs * span[i];
                acc.d_span[i] += gs * c[i];
                acc.d_lo[i] += gs;
                acc.d_curves[i * k + seg[i]] += gc * (1.0 - frac[i]);
                acc.d_curves[i * k + seg[i] + 1] += gc * frac[i];
                if (!inside[i])
                    continue;
                const double gtn = gc * slope[i];
                const double gt = gtn / span[i];
                acc.d_lo[i] -= gt;
                acc.d_span[i] -= gt * tn[i];
                for (int r = 0; r < 3; ++r)
                    acc.d_m[r * 3 + i] += px[r] * gt;
            }
        }
    };
    auto merge = [](detail::BackwardAcc& into, const detail::BackwardAcc& from) {
        into.loss += from.loss;
        for (int i = 0; i < 9; ++i) {
            into.d_m[i] += from.d_m[i];
            into.d_inv[i] += from.d_inv[i];
        }
        for (int i = 0; i < 3; ++i) {
            into.d_lo[i] += from.d_lo[i];
            into.d_span[i] += from.d_span[i];
        }
        for (std::size_t i = 0; i < into.d_curves.size(); ++i)
            into.d_curves[i] += from.d_curves[i];
    };
    const detail::BackwardAcc acc = detail::blocked_reduce(image.pixel_count(), 4096, zero, partial, merge);

    Gradients grads(k);
    for (int i = 0; i < 3; ++i)
        std::copy_n(acc.d_curves.begin() + static_cast<std::ptrdiff_t>(i * k), k, grads.d_curves[i].begin());

    if (!freeze_basis) {
        // d(M^-1) = -M^-1 dM M^-1  =>  dL/dM = -M^-T (dL/dM^-1) M^-T
        const Mat3 inv_t = transpose3(inv);
        const Mat3 via_inverse = mul3(mul3(inv_t, acc.d_inv), inv_t);
        Mat3 g{};
        for (int e = 0; e < 9; ++e)
            g[e] = acc.d_m[e] - via_inverse[e];
        for (int i = 0; i < 3; ++i) {
            double raw_lo = 0.0, raw_hi = 0.0;
            for (int r = 0; r < 3; ++r) {
                raw_lo += std::min(0.0, m[r * 3 + i]);
                raw_hi += std::max(0.0, m[r * 3 + i]);
            }
            const bool widened = raw_hi - raw_lo < kMinRange;
            for (int r = 0; r < 3; ++r) {
                const double v = m[r * 3 + i];
                if (widened) {
                    // lo = (sum of column) / 2 - const, span fixed
                    g[r * 3 + i] += 0.5 * acc.d_lo[i];
                } else if (v < 0.0) {
                    g[r * 3 + i] += acc.d_lo[i] - acc.d_span[i];
                } else {
                    g[r * 3 + i] += acc.d_span[i];
                }
            }
        }
        grads.d_basis = g;
    }
    return {acc.loss * inv_n, grads};
}

/// Central finite differences of loss_eval(unclamped transform, target) per
/// parameter. Curve values are perturbed without clamping.
inline Gradients grad_fd(const IacParams& params, const ImageBuf& image, const ImageBuf& target,
                         const LossKind& kind, double h)
{
    if (!(h > 0.0))
        throw Error(ErrorCode::InvalidInput, "finite-difference step must be positive");
    detail::require_same_shape(image, target);
    kind.validate();
    const std::size_t k = params.curve_dims();
    Gradients g(k);

    auto loss_at = [&](const detail::ParamView& v) {
        return loss_eval(detail::forward_unclamped(image, v), target, kind);
    };
    auto with_basis = [&](const Mat3& m) {
        Basis b{m};
        detail::ParamView v = detail::view_of(params);
        v.m = m;
        v.inv = invert_basis(b).m;
        v.bounds = compute_bounds(b);
        return v;
    };
    for (int e = 0; e < 9; ++e) {
        Mat3 plus = params.basis().m, minus = params.basis().m;
        plus[e] += h;
        minus[e] -= h;
        g.d_basis[e] = (loss_at(with_basis(plus)) - loss_at(with_basis(minus))) / (2.0 * h);
    }
    for (int i = 0; i < 3; ++i) {
        std::vector<double> values(params.curve(i).values().begin(), params.curve(i).values().end());
        for (std::size_t j = 0; j < k; ++j) {
            const double orig = values[j];
            detail::ParamView v = detail::view_of(params);
            v.curves[i] = values;
            values[j] = orig + h;
            const double fp = loss_at(v);
            values[j] = orig - h;
            const double fm = loss_at(v);
            values[j] = orig;
            g.d_curves[i][j] = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

// Adam ----------------------------------------------------------------------

/// Moment buffers over the flattened parameter vector: 9 basis entries
/// followed by 3*K curve values.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0; // drives rank repair

    explicit AdamState(std::size_t k = kDefaultCurveDims, std::uint64_t seed_ = 0)
        : m(9 + 3 * k, 0.0), v(9 + 3 * k, 0.0), seed(seed_)
    {
    }

    std::size_t curve_dims() const { return (m.size() - 9) / 3; }
};

/// One bias-corrected Adam update. The basis is repaired if it drops below
/// the invertibility threshold and curve values are projected back into
/// [0,1]. Returns true if a rank repair happened.
inline bool adam_step(AdamState& state, const Gradients& grads, IacParams& params, double lr_basis, double lr_curves)
{
    const std::size_t k = params.curve_dims();
    if (grads.curve_dims() != k || state.curve_dims() != k)
        throw Error(ErrorCode::InvalidInput, "gradient / optimizer state shape does not match parameters");
    if (!grads.all_finite())
        throw Error(ErrorCode::Diverged, "non-finite gradient at step " + std::to_string(state.step));

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    auto update = [&](std::size_t idx, double g, double lr) {
        state.m[idx] = state.beta1 * state.m[idx] + (1.0 - state.beta1) * g;
        state.v[idx] = state.beta2 * state.v[idx] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[idx] / bc1;
        const double vhat = state.v[idx] / bc2;
        return lr * mhat / (std::sqrt(vhat) + state.eps);
    };

    Basis basis = params.basis();
    bool basis_moved = false;
    for (std::size_t e = 0; e < 9; ++e) {
        const double delta = update(e, grads.d_basis[e], lr_basis);
        if (delta != 0.0) {
            basis.m[e] -= delta;
            basis_moved = true;
        }
    }
    bool repaired = false;
    if (basis_moved) {
        if (!basis.invertible()) {
            basis = repair_rank(basis, state.seed ^ (state.step * 0x9E3779B97F4A7C15ull));
            repaired = true;
        }
        params.set_basis(basis);
    }

    for (int i = 0; i < 3; ++i) {
        Curve& curve = params.mutable_curve(i);
        for (std::size_t j = 0; j < k; ++j) {
            const double delta = update(9 + i * k + j, grads.d_curves[i][j], lr_curves);
            if (delta != 0.0)
                curve.set(j, curve[j] - delta);
        }
    }
    return repaired;
}

// Fitting -------------------------------------------------------------------

struct FitConfig {
    int iterations = 1000;
    double learning_rate_basis = 1e-3;
    double learning_rate_curves = 5e-3;
    LossKind loss = LossKind::smooth_l1(0.1);
    std::size_t curve_dims = kDefaultCurveDims;
    bool rgb_only = false;
    std::uint64_t seed = 0;
    std::size_t downsample_to = 256;

    void validate() const
    {
        if (iterations < 1)
            throw Error(ErrorCode::InvalidInput, "iterations must be at least 1");
        if (!(learning_rate_basis > 0.0) || !(learning_rate_curves > 0.0))
            throw Error(ErrorCode::InvalidInput, "learning rates must be positive");
        if (curve_dims < 2)
            throw Error(ErrorCode::InvalidCurve, "curve_dims must be at least 2");
        if (downsample_to < 1)
            throw Error(ErrorCode::InvalidInput, "downsample_to must be positive");
        loss.validate();
    }
};

struct FitReport {
    std::vector<double> loss_history; // loss of the iterate entering each step
    double final_loss = 0.0;          // fitting-resolution loss of the returned params
    double final_psnr = 0.0;          // full resolution, clamped output
    double final_ssim = 0.0;          // NaN when the image is smaller than the SSIM window
    int iterations_run = 0;
    double wall_time = 0.0; // seconds
    int repaired_rank_count = 0;
    double basis_condition = 0.0;
};

struct FitResult {
    IacParams params;
    FitReport report;
};

/// Per-image optimization of the transform against a target. Starts from
/// `init` (identity basis and identity ramps by default), runs projected
/// Adam on box-downsampled copies, and returns the lowest-loss iterate seen.
inline FitResult fit_iac(const ImageBuf& image, const ImageBuf& target, const FitConfig& config,
                         const std::optional<IacParams>& init = std::nullopt,
                         std::optional<AdamState> warm_state = std::nullopt)
{
    config.validate();
    detail::require_same_shape(image, target);
    detail::require_finite(image, "image");
    detail::require_finite(target, "target");
    const auto start = std::chrono::steady_clock::now();

    const ImageBuf small_in = downsample_box(image, config.downsample_to);
    const ImageBuf small_tg = downsample_box(target, config.downsample_to);

    IacParams params = init ? *init : IacParams::identity(config.curve_dims);
    if (params.curve_dims() != config.curve_dims)
        throw Error(ErrorCode::InvalidInput, "initial params curve_dims does not match config");
    if (config.rgb_only && !(params.basis() == Basis::identity()))
        throw Error(ErrorCode::InvalidInput, "rgb-only fitting requires an identity basis");
    AdamState state = warm_state ? std::move(*warm_state) : AdamState(config.curve_dims, config.seed);
    if (state.curve_dims() != config.curve_dims)
        throw Error(ErrorCode::InvalidInput, "warm optimizer state curve_dims does not match config");

    FitReport report;
    report.loss_history.reserve(static_cast<std::size_t>(config.iterations));
    IacParams best = params;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int it = 0; it < config.iterations; ++it) {
        auto [loss, grads] = backward(params, small_in, small_tg, config.loss, config.rgb_only);
        if (!std::isfinite(loss))
            throw Error(ErrorCode::Diverged, "non-finite loss at iteration " + std::to_string(it));
        report.loss_history.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best = params;
        }
        try {
            if (adam_step(state, grads, params, config.learning_rate_basis, config.learning_rate_curves))
                ++report.repaired_rank_count;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Diverged)
                throw Error(ErrorCode::Diverged, "iteration " + std::to_string(it) + ": " + e.what());
            throw;
        }
    }
    const double last_loss =
        loss_eval(apply_iac(small_in, params, OutputClamp::None), small_tg, config.loss);
    if (std::isfinite(last_loss) && last_loss < best_loss) {
        best_loss = last_loss;
        best = params;
    }

    report.iterations_run = config.iterations;
    report.final_loss = best_loss;
    const ImageBuf full = apply_iac(image, best);
    report.final_psnr = psnr(full, target);
    report.final_ssim = (image.height() >= kSsimWindow && image.width() >= kSsimWindow)
                            ? ssim(full, target)
                            : std::numeric_limits<double>::quiet_NaN();
    report.basis_condition = condition_number(best.basis());
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(best), std::move(report)};
}

/// Curves-only fit with the basis frozen at identity.
inline FitResult fit_rgb_only(const ImageBuf& image, const ImageBuf& target, FitConfig config)
{
    config.rgb_only = true;
    return fit_iac(image, target, config);
}

} // namespace iac
