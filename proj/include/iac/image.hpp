#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace iac {

enum class ErrorCode {
    InvalidInput,
    InvalidCurve,
    SingularBasis,
    RepairFailed,
    Diverged,
    Decode,
    Io,
    Format,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::InvalidCurve: return "invalid-curve";
    case ErrorCode::SingularBasis: return "singular-basis";
    case ErrorCode::RepairFailed: return "repair-failed";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::Decode: return "decode";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// RGB triple. Pixels are row vectors throughout the library.
struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    double& operator[](std::size_t i) { return i == 0 ? r : (i == 1 ? g : b); }
    double operator[](std::size_t i) const { return i == 0 ? r : (i == 1 ? g : b); }

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// H x W x 3 floating-point raster, row-major, channels interleaved.
class ImageBuf {
public:
    ImageBuf() = default;

    ImageBuf(std::size_t height, std::size_t width, double fill = 0.0)
        : height_(height), width_(width), data_(height * width * 3, fill)
    {
        if (height == 0 || width == 0)
            throw Error(ErrorCode::InvalidInput, "image dimensions must be at least 1x1");
    }

    ImageBuf(std::size_t height, std::size_t width, std::vector<double> data)
        : height_(height), width_(width), data_(std::move(data))
    {
        if (height == 0 || width == 0)
            throw Error(ErrorCode::InvalidInput, "image dimensions must be at least 1x1");
        if (data_.size() != height * width * 3)
            throw Error(ErrorCode::InvalidInput, "image data length does not match H*W*3");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * 3 + c]; }

    Rgb pixel(std::size_t i) const { return {data_[3 * i], data_[3 * i + 1], data_[3 * i + 2]}; }
    void set_pixel(std::size_t i, const Rgb& p)
    {
        data_[3 * i] = p.r;
        data_[3 * i + 1] = p.g;
        data_[3 * i + 2] = p.b;
    }

    bool same_shape(const ImageBuf& other) const noexcept
    {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    bool in_unit_range() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    }

    friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline void require_finite(const ImageBuf& image, const char* what)
{
    if (image.empty())
        throw Error(ErrorCode::InvalidInput, std::string(what) + " is empty");
    if (!image.all_finite())
        throw Error(ErrorCode::InvalidInput, std::string(what) + " contains non-finite values");
}

inline void require_same_shape(const ImageBuf& a, const ImageBuf& b)
{
    if (!a.same_shape(b))
        throw Error(ErrorCode::InvalidInput,
                    "shape mismatch: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                        std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

inline unsigned worker_count(std::size_t n, std::size_t min_per_worker)
{
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t by_size = std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_per_worker));
    return static_cast<unsigned>(std::min<std::size_t>(hw, by_size));
}

/// Runs fn(begin, end) over contiguous slices of [0, n). Each index is
/// visited exactly once, so per-element results do not depend on the split.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_per_worker = 1 << 14)
{
    const unsigned workers = worker_count(n, min_per_worker);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 1; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        if (begin < end)
            pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    fn(std::size_t{0}, std::min(n, chunk));
}

/// Fixed-block reduction: the block layout depends only on n, so the
/// summation order (and the bits of the result) is the same for any thread
/// count. `partial(begin, end, acc)` accumulates into a fresh Acc;
/// `merge(into, from)` folds blocks left to right.
template <class Acc, class Partial, class Merge>
Acc blocked_reduce(std::size_t n, std::size_t block, const Acc& zero, Partial&& partial, Merge&& merge)
{
    const std::size_t blocks = std::max<std::size_t>(1, (n + block - 1) / block);
    std::vector<Acc> acc(blocks, zero);
    parallel_for(
        blocks,
        [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b)
                partial(b * block, std::min(n, (b + 1) * block), acc[b]);
        },
        1);
    Acc total = zero;
    for (const Acc& a : acc)
        merge(total, a);
    return total;
}

} // namespace detail

inline ImageBuf clamp_unit(ImageBuf image)
{
    for (double& v : image.data())
        v = std::clamp(v, 0.0, 1.0);
    return image;
}

/// Box-average downsampling so that the longer edge is at most max_edge.
/// Uses an integer factor f = ceil(edge / max_edge); partial border blocks
/// average only the pixels they cover.
inline ImageBuf downsample_box(const ImageBuf& image, std::size_t max_edge)
{
    if (max_edge == 0)
        throw Error(ErrorCode::InvalidInput, "downsample target must be positive");
    const std::size_t edge = std::max(image.height(), image.width());
    if (edge <= max_edge)
        return image;
    const std::size_t f = (edge + max_edge - 1) / max_edge;
    const std::size_t oh = (image.height() + f - 1) / f;
    const std::size_t ow = (image.width() + f - 1) / f;
    ImageBuf out(oh, ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double sum[3] = {0.0, 0.0, 0.0};
            std::size_t count = 0;
            for (std::size_t yy = y * f; yy < std::min(image.height(), (y + 1) * f); ++yy) {
                for (std::size_t xx = x * f; xx < std::min(image.width(), (x + 1) * f); ++xx) {
                    for (std::size_t c = 0; c < 3; ++c)
                        sum[c] += image.at(yy, xx, c);
                    ++count;
                }
            }
            for (std::size_t c = 0; c < 3; ++c)
                out.at(y, x, c) = sum[c] / static_cast<double>(count);
        }
    }
    return out;
}

} // namespace iac
