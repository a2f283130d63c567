#pragma once

// Image and parameter persistence. Image I/O needs libpng at link time.

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iac/image.hpp"
#include "iac/transform.hpp"

namespace iac {

/// 8-bit quantization with round-half-up: byte = floor(clamp(v) * 255 + 0.5).
inline std::uint8_t quantize_u8(double v)
{
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

/// Rounds every value to the nearest 8-bit level, exactly as a save/load
/// round trip would.
inline ImageBuf quantize_8bit(ImageBuf image)
{
    for (double& v : image.data())
        v = quantize_u8(v) / 255.0;
    return image;
}

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error(ErrorCode::Io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline ImageBuf from_bytes(std::size_t h, std::size_t w, const std::uint8_t* rgb)
{
    std::vector<double> data(h * w * 3);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = rgb[i] / 255.0;
    return ImageBuf(h, w, std::move(data));
}

inline std::vector<std::uint8_t> to_bytes(const ImageBuf& image)
{
    std::vector<std::uint8_t> out(image.size());
    auto d = image.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = quantize_u8(d[i]);
    return out;
}

inline ImageBuf decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(ErrorCode::Decode, path + ": " + img.message);
    const auto format = img.format;
    auto reject = [&](const std::string& why) {
        png_image_free(&img);
        throw Error(ErrorCode::Decode, path + ": " + why);
    };
    if (format & PNG_FORMAT_FLAG_ALPHA)
        reject("alpha channel not supported");
    if (format & PNG_FORMAT_FLAG_LINEAR)
        reject("only 8-bit PNG is supported");
    if (!(format & PNG_FORMAT_FLAG_COLOR))
        reject("grayscale PNG not supported, expected RGB");
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
        throw Error(ErrorCode::Decode, path + ": " + img.message);
    return from_bytes(img.height, img.width, buf.data());
}

inline void skip_ppm_space(const std::vector<std::uint8_t>& b, std::size_t& pos)
{
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n')
                ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
}

inline std::size_t read_ppm_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const std::string& path)
{
    skip_ppm_space(b, pos);
    std::size_t v = 0;
    bool any = false;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        if (v > (1u << 28))
            throw Error(ErrorCode::Decode, path + ": PPM header value too large");
        ++pos;
        any = true;
    }
    if (!any)
        throw Error(ErrorCode::Decode, path + ": malformed PPM header");
    return v;
}

inline ImageBuf decode_ppm(const std::vector<std::uint8_t>& b, const std::string& path)
{
    std::size_t pos = 2;
    const std::size_t w = read_ppm_int(b, pos, path);
    const std::size_t h = read_ppm_int(b, pos, path);
    const std::size_t maxval = read_ppm_int(b, pos, path);
    if (maxval != 255)
        throw Error(ErrorCode::Decode, path + ": only 8-bit PPM (maxval 255) is supported");
    if (w == 0 || h == 0)
        throw Error(ErrorCode::Decode, path + ": zero image dimension");
    if (pos >= b.size() || !std::isspace(b[pos]))
        throw Error(ErrorCode::Decode, path + ": malformed PPM header");
    ++pos;
    if (b.size() - pos < w * h * 3)
        throw Error(ErrorCode::Decode, path + ": truncated PPM pixel data");
    return from_bytes(h, w, b.data() + pos);
}

inline std::string lower_extension(const std::string& path)
{
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace detail

/// Loads an 8-bit RGB PNG or binary PPM (P6); values are byte / 255.
inline ImageBuf load_image(const std::string& path)
{
    const auto bytes = detail::read_file_bytes(path);
    static constexpr std::uint8_t png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(png_magic, png_magic + 8, bytes.begin()))
        return detail::decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
        return detail::decode_ppm(bytes, path);
    throw Error(ErrorCode::Decode, path + ": unsupported format (expected PNG or binary PPM)");
}

/// Writes PNG for a .png extension and P6 PPM for .ppm/.pnm. Values are
/// clamped and quantized with quantize_u8.
inline void save_image(const ImageBuf& image, const std::string& path)
{
    if (image.empty())
        throw Error(ErrorCode::InvalidInput, "cannot save an empty image");
    const std::string ext = detail::lower_extension(path);
    const std::vector<std::uint8_t> bytes = detail::to_bytes(image);
    if (ext == ".png") {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = static_cast<png_uint_32>(image.width());
        img.height = static_cast<png_uint_32>(image.height());
        img.format = PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
            throw Error(ErrorCode::Io, path + ": " + img.message);
        return;
    }
    if (ext == ".ppm" || ext == ".pnm") {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
        os << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!os)
            throw Error(ErrorCode::Io, "write failed: " + path);
        return;
    }
    throw Error(ErrorCode::InvalidInput, path + ": unsupported output extension (use .png or .ppm)");
}

// Parameter files -------------------------------------------------------------
//
//   # comment
//   version 1
//   basis a1 a2 a3 b1 b2 b3 c1 c2 c3     row-major; column i is n_i
//   curve_dims K
//   curve1 v_0 ... v_{K-1}
//   curve2 ...
//   curve3 ...
//   loss smoothl1                        optional metadata
//   iterations 1000
//   seed 0
//
// Numbers are written with 17 significant digits, which round-trips doubles
// exactly.

inline constexpr int kParamsVersion = 1;

struct ParamsMeta {
    std::optional<std::string> loss;
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
};

struct ParamsFile {
    IacParams params;
    ParamsMeta meta;
};

namespace detail {

inline std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline void write_params(std::ostream& os, const IacParams& params, const ParamsMeta& meta = {})
{
    os << "# image-adaptive coordinate transform\n";
    os << "version " << kParamsVersion << '\n';
    os << "basis";
    for (double v : params.basis().m)
        os << ' ' << detail::fmt_double(v);
    os << '\n';
    os << "curve_dims " << params.curve_dims() << '\n';
    for (int i = 0; i < 3; ++i) {
        os << "curve" << (i + 1);
        for (double v : params.curve(i).values())
            os << ' ' << detail::fmt_double(v);
        os << '\n';
    }
    if (meta.loss)
        os << "loss " << *meta.loss << '\n';
    if (meta.iterations)
        os << "iterations " << *meta.iterations << '\n';
    if (meta.seed)
        os << "seed " << *meta.seed << '\n';
}

inline ParamsFile read_params(std::istream& is)
{
    std::optional<int> version;
    std::optional<Mat3> basis;
    std::optional<std::size_t> dims;
    std::array<std::optional<std::vector<double>>, 3> curves;
    ParamsMeta meta;

    auto bad = [](const std::string& why) { throw Error(ErrorCode::Format, "params file: " + why); };
    auto read_values = [&](std::istringstream& ls, const std::string& key) {
        std::vector<double> out;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(tok, &used));
                if (used != tok.size())
                    bad("bad number '" + tok + "' in " + key);
            } catch (const std::logic_error&) {
                bad("bad number '" + tok + "' in " + key);
            }
        }
        return out;
    };

    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "version") {
            int v = 0;
            if (!(ls >> v))
                bad("bad version line");
            version = v;
        } else if (key == "basis") {
            const auto vals = read_values(ls, key);
            if (vals.size() != 9)
                bad("basis needs 9 values, got " + std::to_string(vals.size()));
            Mat3 m{};
            std::copy(vals.begin(), vals.end(), m.begin());
            basis = m;
        } else if (key == "curve_dims") {
            std::size_t k = 0;
            if (!(ls >> k))
                bad("bad curve_dims line");
            dims = k;
        } else if (key == "curve1" || key == "curve2" || key == "curve3") {
            curves[key[5] - '1'] = read_values(ls, key);
        } else if (key == "loss") {
            std::string v;
            ls >> v;
            meta.loss = v;
        } else if (key == "iterations") {
            int v = 0;
            if (!(ls >> v))
                bad("bad iterations line");
            meta.iterations = v;
        } else if (key == "seed") {
            std::uint64_t v = 0;
            if (!(ls >> v))
                bad("bad seed line");
            meta.seed = v;
        } else {
            bad("unknown key '" + key + "'");
        }
    }
    if (!version)
        bad("missing version");
    if (*version != kParamsVersion)
        throw Error(ErrorCode::Format, "params file: unsupported version " + std::to_string(*version));
    if (!basis)
        bad("missing basis");
    if (!dims)
        bad("missing curve_dims");
    CurveSet set;
    for (int i = 0; i < 3; ++i) {
        if (!curves[i])
            bad("missing curve" + std::to_string(i + 1));
        if (curves[i]->size() != *dims)
            bad("curve" + std::to_string(i + 1) + " has " + std::to_string(curves[i]->size()) +
                " values, curve_dims is " + std::to_string(*dims));
        set[i] = Curve(std::move(*curves[i]));
    }
    // The IacParams constructor rejects singular bases and recomputes bounds.
    return {IacParams(Basis{*basis}, std::move(set)), meta};
}

inline void params_save(const IacParams& params, const std::string& path, const ParamsMeta& meta = {})
{
    std::ofstream os(path);
    if (!os)
        throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    write_params(os, params, meta);
    if (!os)
        throw Error(ErrorCode::Io, "write failed: " + path);
}

inline ParamsFile params_load_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorCode::Io, "cannot open " + path);
    return read_params(is);
}

inline IacParams params_load(const std::string& path)
{
    return params_load_file(path).params;
}

} // namespace iac
