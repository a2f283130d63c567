#pragma once

// Batch experiments driven by a JSON manifest, reported as CSV.
//
// Manifest layout (paths relative to the manifest's directory):
//
//   {
//     "rows": [
//       {
//         "id": "astronaut-hue30",
//         "input": "astronaut.png",
//         "target": "graded.png",                    // or:
//         "synth": {"kind": "hue", "angle": 30},
//         "methods": ["iac", "rgb", "lut"],          // default: all three
//         "curve_dims": [50, 100, 150, 200],         // default: [200]
//         "iterations": 1000, "seed": 0, "loss": "smoothl1",
//         "lr_basis": 1e-3, "lr_curves": 5e-3, "downsample_to": 256,
//         "lut_size": 33
//       }
//     ]
//   }

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iac/baselines.hpp"
#include "iac/fit.hpp"
#include "iac/io.hpp"
#include "iac/metrics.hpp"
#include "iac/synth.hpp"

namespace iac {

/// Builds a synthetic kind from its CLI / manifest name and arguments.
/// Names: hue, gamma, mix, exposure, permute, random-iac.
struct SynthArgs {
    std::string kind;
    std::optional<double> angle;
    std::vector<double> gamma;
    std::vector<double> mix;
    std::optional<double> ev;
    std::optional<std::string> perm;
    std::size_t curve_dims = kDefaultCurveDims;
};

inline SynthKind make_synth_kind(const SynthArgs& a)
{
    auto need = [&](bool ok, const char* what) {
        if (!ok)
            throw Error(ErrorCode::InvalidInput, "synth kind '" + a.kind + "' requires " + what);
    };
    if (a.kind == "hue") {
        need(a.angle.has_value(), "an angle");
        return HueRotate{*a.angle};
    }
    if (a.kind == "gamma") {
        need(a.gamma.size() == 1 || a.gamma.size() == 3, "one or three gamma values");
        Gamma g;
        for (int c = 0; c < 3; ++c)
            g.gamma[c] = a.gamma.size() == 1 ? a.gamma[0] : a.gamma[c];
        return g;
    }
    if (a.kind == "mix") {
        need(a.mix.size() == 9, "nine mix values");
        ChannelMix m;
        std::copy(a.mix.begin(), a.mix.end(), m.matrix.begin());
        return m;
    }
    if (a.kind == "exposure") {
        need(a.ev.has_value(), "an EV value");
        return ExposureShift{*a.ev};
    }
    if (a.kind == "permute") {
        need(a.perm.has_value(), "a permutation");
        return parse_permutation(*a.perm);
    }
    if (a.kind == "random-iac")
        return RandomIac{a.curve_dims};
    throw Error(ErrorCode::InvalidInput, "unknown synth kind '" + a.kind + "'");
}

struct ExperimentRow {
    std::string pair_id;
    std::string method; // iac | rgb | lut
    std::size_t k = 0;  // curve dims, or LUT size for the lut method
    double final_psnr = NAN;
    double ssim = NAN;
    double loss = NAN;
    double wall_time = NAN;
    double basis_cond = NAN;
    std::string status = "ok";
};

inline constexpr const char* kExperimentCsvHeader =
    "pair_id,method,K,final_psnr,ssim,loss,wall_time,basis_cond,status";

namespace detail {

inline std::string csv_number(double v)
{
    if (std::isnan(v))
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

inline std::string to_csv_line(const ExperimentRow& r)
{
    std::ostringstream os;
    os << detail::csv_field(r.pair_id) << ',' << r.method << ',' << r.k << ',' << detail::csv_number(r.final_psnr)
       << ',' << detail::csv_number(r.ssim) << ',' << detail::csv_number(r.loss) << ','
       << detail::csv_number(r.wall_time) << ',' << detail::csv_number(r.basis_cond) << ','
       << detail::csv_field(r.status);
    return os.str();
}

namespace detail {

inline SynthArgs synth_args_from_json(const nlohmann::json& j)
{
    SynthArgs a;
    a.kind = j.at("kind").get<std::string>();
    if (j.contains("angle"))
        a.angle = j["angle"].get<double>();
    if (j.contains("gamma"))
        a.gamma = j["gamma"].is_array() ? j["gamma"].get<std::vector<double>>()
                                        : std::vector<double>{j["gamma"].get<double>()};
    if (j.contains("mix"))
        a.mix = j["mix"].get<std::vector<double>>();
    if (j.contains("ev"))
        a.ev = j["ev"].get<double>();
    if (j.contains("perm"))
        a.perm = j["perm"].get<std::string>();
    if (j.contains("curve_dims"))
        a.curve_dims = j["curve_dims"].get<std::size_t>();
    return a;
}

inline double optional_psnr_ssim(const ImageBuf& a, const ImageBuf& b)
{
    return (a.height() >= kSsimWindow && a.width() >= kSsimWindow) ? ssim(a, b) : NAN;
}

} // namespace detail

/// Runs every manifest row and writes <out_dir>/report.csv plus one params
/// (or .cube) file per fitted configuration. Per-row failures are recorded
/// in the status column and the run continues. Rows appear in manifest
/// order.
inline std::vector<ExperimentRow> run_experiment(const std::string& manifest_path, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    std::ifstream is(manifest_path);
    if (!is)
        throw Error(ErrorCode::Io, "cannot open manifest " + manifest_path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    nlohmann::json manifest;
    if (buffer.str().find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
            manifest = nlohmann::json::parse(buffer.str());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Format, "manifest: " + std::string(e.what()));
        }
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return (path.is_absolute() ? path : base / path).string();
    };
    fs::create_directories(out_dir);

    std::vector<ExperimentRow> rows;
    const nlohmann::json row_list = manifest.is_object() && manifest.contains("rows") ? manifest["rows"]
                                                                                     : nlohmann::json::array();
    int index = 0;
    for (const auto& spec : row_list) {
        const std::string id = spec.value("id", "row" + std::to_string(index));
        ++index;
        std::vector<std::string> methods = spec.value("methods", std::vector<std::string>{"iac", "rgb", "lut"});
        std::vector<std::size_t> dims = spec.value("curve_dims", std::vector<std::size_t>{kDefaultCurveDims});

        auto fail_all = [&](const std::string& why) {
            for (const auto& m : methods) {
                ExperimentRow r;
                r.pair_id = id;
                r.method = m;
                r.status = "error: " + why;
                rows.push_back(r);
            }
        };

        ImageBuf input, target;
        FitConfig base_cfg;
        std::size_t lut_size = 33;
        try {
            input = load_image(resolve(spec.at("input").get<std::string>()));
            const std::uint64_t seed = spec.value("seed", std::uint64_t{0});
            if (spec.contains("target"))
                target = load_image(resolve(spec["target"].get<std::string>()));
            else if (spec.contains("synth"))
                target = synth_target(input, make_synth_kind(detail::synth_args_from_json(spec["synth"])), seed);
            else
                throw Error(ErrorCode::InvalidInput, "row needs a target or a synth entry");
            base_cfg.iterations = spec.value("iterations", base_cfg.iterations);
            base_cfg.seed = seed;
            base_cfg.learning_rate_basis = spec.value("lr_basis", base_cfg.learning_rate_basis);
            base_cfg.learning_rate_curves = spec.value("lr_curves", base_cfg.learning_rate_curves);
            base_cfg.downsample_to = spec.value("downsample_to", base_cfg.downsample_to);
            base_cfg.loss = parse_loss_kind(spec.value("loss", std::string("smoothl1")));
            lut_size = spec.value("lut_size", lut_size);
        } catch (const std::exception& e) {
            fail_all(e.what());
            continue;
        }

        for (const auto& method : methods) {
            if (method == "lut") {
                ExperimentRow r;
                r.pair_id = id;
                r.method = method;
                r.k = lut_size;
                try {
                    const auto start = std::chrono::steady_clock::now();
                    const Lut3d lut = lut3d_fit_splat(input, target, lut_size);
                    const ImageBuf out = lut3d_trilinear(input, lut);
                    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    r.final_psnr = psnr(out, target);
                    r.ssim = detail::optional_psnr_ssim(out, target);
                    r.loss = loss_eval(out, target, base_cfg.loss);
                    save_cube(lut, (fs::path(out_dir) / (id + "_lut.cube")).string(), id);
                } catch (const std::exception& e) {
                    r.status = std::string("error: ") + e.what();
                }
                rows.push_back(r);
                continue;
            }
            for (std::size_t k : dims) {
                ExperimentRow r;
                r.pair_id = id;
                r.method = method;
                r.k = k;
                try {
                    if (method != "iac" && method != "rgb")
                        throw Error(ErrorCode::InvalidInput, "unknown method '" + method + "'");
                    FitConfig cfg = base_cfg;
                    cfg.curve_dims = k;
                    cfg.rgb_only = method == "rgb";
                    const FitResult fit = fit_iac(input, target, cfg);
                    r.final_psnr = fit.report.final_psnr;
                    r.ssim = fit.report.final_ssim;
                    r.loss = fit.report.final_loss;
                    r.wall_time = fit.report.wall_time;
                    r.basis_cond = fit.report.basis_condition;
                    ParamsMeta meta{to_string(cfg.loss), cfg.iterations, cfg.seed};
                    params_save(fit.params,
                                (fs::path(out_dir) / (id + "_" + method + "_K" + std::to_string(k) + ".params"))
                                    .string(),
                                meta);
                } catch (const Error& e) {
                    r.status = e.code() == ErrorCode::Diverged ? std::string("diverged: ") + e.what()
                                                               : std::string("error: ") + e.what();
                } catch (const std::exception& e) {
                    r.status = std::string("error: ") + e.what();
                }
                rows.push_back(r);
            }
        }
    }

    std::ofstream csv(fs::path(out_dir) / "report.csv");
    if (!csv)
        throw Error(ErrorCode::Io, "cannot write report.csv in " + out_dir);
    csv << kExperimentCsvHeader << '\n';
    for (const auto& r : rows)
        csv << to_csv_line(r) << '\n';
    return rows;
}

} // namespace iac
