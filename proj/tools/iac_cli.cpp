// iac: command-line front end for fitting, applying and evaluating
// image-adaptive coordinate transforms.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iac/baselines.hpp"
#include "iac/experiment.hpp"
#include "iac/fit.hpp"
#include "iac/gradcheck.hpp"
#include "iac/io.hpp"
#include "iac/metrics.hpp"
#include "iac/synth.hpp"
#include "iac/transform.hpp"

using namespace iac;

namespace {

struct FitOpts {
    std::string input, target, out, cube;
    bool rgb_only = false;
    std::size_t curve_dims = kDefaultCurveDims;
    int iters = 1000;
    double lr_basis = 1e-3, lr_curves = 5e-3;
    std::string loss = "smoothl1";
    double beta = 0.1;
    std::uint64_t seed = 0;
    std::size_t downsample = 256;
    std::size_t cube_size = 33;
};

int run_fit(const FitOpts& o)
{
    const ImageBuf x = load_image(o.input);
    const ImageBuf y = load_image(o.target);
    FitConfig cfg;
    cfg.iterations = o.iters;
    cfg.learning_rate_basis = o.lr_basis;
    cfg.learning_rate_curves = o.lr_curves;
    cfg.loss = parse_loss_kind(o.loss, o.beta);
    cfg.curve_dims = o.curve_dims;
    cfg.rgb_only = o.rgb_only;
    cfg.seed = o.seed;
    cfg.downsample_to = o.downsample;
    const FitResult r = fit_iac(x, y, cfg);
    params_save(r.params, o.out, {to_string(cfg.loss), cfg.iterations, cfg.seed});
    if (!o.cube.empty())
        save_cube(lut3d_bake(r.params, o.cube_size), o.cube, o.out);

    const FitReport& rep = r.report;
    std::printf("method      %s\n", o.rgb_only ? "rgb" : "iac");
    std::printf("K           %zu\n", cfg.curve_dims);
    std::printf("iterations  %d\n", rep.iterations_run);
    std::printf("loss        %.6g -> %.6g (%s)\n", rep.loss_history.front(), rep.final_loss, o.loss.c_str());
    std::printf("psnr        %.4f dB\n", rep.final_psnr);
    std::printf("ssim        %.6f\n", rep.final_ssim);
    std::printf("basis cond  %.4f\n", rep.basis_condition);
    std::printf("repairs     %d\n", rep.repaired_rank_count);
    std::printf("wall time   %.3f s\n", rep.wall_time);
    return 0;
}

int run_apply(const std::string& input, const std::string& params_path, const std::string& out,
              const std::string& cube, std::size_t cube_size)
{
    const IacParams params = params_load(params_path);
    if (!input.empty() && !out.empty())
        save_image(apply_iac(load_image(input), params), out);
    if (!cube.empty())
        save_cube(lut3d_bake(params, cube_size), cube, params_path);
    return 0;
}

struct MetricFlags {
    bool psnr = false, ssim = false, mse = false, mae = false, deltae = false;
};

int run_metrics(const std::string& pa, const std::string& pb, MetricFlags f)
{
    const ImageBuf a = load_image(pa);
    const ImageBuf b = load_image(pb);
    if (!(f.psnr || f.ssim || f.mse || f.mae || f.deltae))
        f = {true, true, true, true, true};
    if (f.psnr)
        std::printf("psnr    %.4f dB\n", psnr(a, b));
    if (f.ssim) {
        if (a.height() < kSsimWindow || a.width() < kSsimWindow)
            std::printf("ssim    n/a (image smaller than the %dx%d window)\n", kSsimWindow, kSsimWindow);
        else
            std::printf("ssim    %.6f (Rec.709 luma, 11x11 Gaussian sigma 1.5, valid windows)\n", ssim(a, b));
    }
    if (f.mse || f.mae) {
        const ErrorStats e = error_stats(a, b);
        if (f.mse)
            std::printf("mse     %.4f (0-255 scale)\n", e.mse);
        if (f.mae)
            std::printf("mae     %.4f (0-255 scale)\n", e.mae);
    }
    if (f.deltae) {
        const MetricSummary s = delta_e2000(a, b);
        std::printf("deltaE  mean %.4f  q1 %.4f  median %.4f  q3 %.4f (CIEDE2000, sRGB/D65)\n", s.mean, s.q1, s.q2,
                    s.q3);
    }
    return 0;
}

int run_occupancy(const std::string& input, std::size_t n)
{
    const ImageBuf x = load_image(input);
    const double occ = lut_occupancy(x, n);
    std::printf("occupancy %.4f%% of %zu^3 vertices\n", occ * 100.0, n);
    std::printf("(a vertex counts when it is a corner of some pixel's interpolation cell)\n");
    return 0;
}

int run_synth(const std::string& input, const SynthArgs& args, std::uint64_t seed, const std::string& out)
{
    save_image(synth_target(load_image(input), make_synth_kind(args), seed), out);
    return 0;
}

int run_gradcheck(int trials, std::uint64_t seed)
{
    const auto results = gradient_check(trials, seed);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("trial %2d  K=%-3zu %-8s  max rel %.3e  max abs %.3e  %s\n", r.trial, r.curve_dims,
                    r.loss.c_str(), r.max_rel_error, r.max_abs_error, r.passed ? "ok" : "FAIL");
        failed += r.passed ? 0 : 1;
    }
    std::printf("%d/%zu instances within tolerance\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}

int run_bench(const std::string& input, const std::string& params_path, int repeat)
{
    const ImageBuf x = load_image(input);
    const IacParams params = params_path.empty() ? random_iac_params(0) : params_load(params_path);
    std::vector<double> ms;
    ImageBuf out = apply_iac(x, params);
    for (int i = 0; i < repeat; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        out = apply_iac(x, params);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    const double mp = static_cast<double>(x.pixel_count()) / 1e6;
    std::printf("image       %zux%zu (%.3f MP)\n", x.width(), x.height(), mp);
    std::printf("threads     %u\n", detail::worker_count(x.pixel_count(), 1u << 14));
    std::printf("apply       median %.3f ms  min %.3f ms  over %d runs\n", median, ms.front(), repeat);
    std::printf("throughput  %.3f ms/MP  %.1f MP/s\n", median / mp, mp / (median / 1e3));
    return 0;
}

int run_experiment_cmd(const std::string& manifest, const std::string& out_dir)
{
    const auto rows = run_experiment(manifest, out_dir);
    std::cout << kExperimentCsvHeader << '\n';
    for (const auto& r : rows)
        std::cout << to_csv_line(r) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fit, apply and evaluate image-adaptive coordinate color transforms"};
    app.require_subcommand(1);

    FitOpts fo;
    auto* fit = app.add_subcommand("fit", "Fit a transform mapping --input to --target");
    fit->add_option("--input", fo.input, "Source image (PNG or PPM)")->required();
    fit->add_option("--target", fo.target, "Target image")->required();
    fit->add_option("--out", fo.out, "Output parameter file")->required();
    fit->add_flag("--rgb-only", fo.rgb_only, "Freeze the basis at identity (per-channel RGB curves)");
    fit->add_option("--curve-dims", fo.curve_dims, "Control points per curve")->check(CLI::Range(2, 100000));
    fit->add_option("--iters", fo.iters, "Optimizer iterations")->check(CLI::PositiveNumber);
    fit->add_option("--lr-basis", fo.lr_basis, "Adam learning rate for the basis");
    fit->add_option("--lr-curves", fo.lr_curves, "Adam learning rate for the curves");
    fit->add_option("--loss", fo.loss, "Loss")->check(CLI::IsMember({"smoothl1", "l1", "mse"}));
    fit->add_option("--beta", fo.beta, "Smooth L1 threshold");
    fit->add_option("--seed", fo.seed, "Seed for rank repair");
    fit->add_option("--downsample-to", fo.downsample, "Longest edge of the fitting copy");
    fit->add_option("--cube", fo.cube, "Also export the fitted transform as a .cube table");
    fit->add_option("--cube-size", fo.cube_size, "Lattice size for --cube")->check(CLI::Range(2, 256));

    std::string ap_input, ap_params, ap_out, ap_cube;
    std::size_t ap_cube_size = 33;
    auto* apply = app.add_subcommand("apply", "Apply a parameter file to an image");
    apply->add_option("--input", ap_input, "Source image");
    apply->add_option("--params", ap_params, "Parameter file")->required();
    apply->add_option("--out", ap_out, "Output image (.png or .ppm)");
    apply->add_option("--cube", ap_cube, "Export the transform as a .cube table");
    apply->add_option("--cube-size", ap_cube_size, "Lattice size for --cube")->check(CLI::Range(2, 256));

    std::string m_a, m_b;
    MetricFlags mf;
    auto* metrics = app.add_subcommand("metrics", "Compare two images");
    metrics->add_option("--a", m_a, "First image")->required();
    metrics->add_option("--b", m_b, "Second image")->required();
    metrics->add_flag("--psnr", mf.psnr);
    metrics->add_flag("--ssim", mf.ssim);
    metrics->add_flag("--mse", mf.mse);
    metrics->add_flag("--mae", mf.mae);
    metrics->add_flag("--deltae", mf.deltae);

    std::string oc_input;
    std::size_t oc_size = 33;
    auto* occupancy = app.add_subcommand("occupancy", "Fraction of a 3D LUT lattice an image touches");
    occupancy->add_option("--input", oc_input, "Image")->required();
    occupancy->add_option("--size", oc_size, "Lattice points per axis")->check(CLI::Range(2, 256));

    std::string sy_input, sy_out;
    SynthArgs sy;
    std::uint64_t sy_seed = 0;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic target image");
    synth->add_option("--input", sy_input, "Source image")->required();
    synth->add_option("--kind", sy.kind, "Target kind")
        ->required()
        ->check(CLI::IsMember({"hue", "gamma", "mix", "exposure", "permute", "random-iac"}));
    synth->add_option("--angle", sy.angle, "Hue rotation in degrees");
    synth->add_option("--gamma", sy.gamma, "One or three gamma exponents")->expected(1, 3);
    synth->add_option("--ev", sy.ev, "Exposure shift in stops");
    synth->add_option("--mix", sy.mix, "3x3 mixing matrix, row-major, applied as pixel * M")->expected(9);
    synth->add_option("--perm", sy.perm, "Channel permutation such as GBR");
    synth->add_option("--curve-dims", sy.curve_dims, "Curve size for random-iac");
    synth->add_option("--seed", sy_seed, "Seed for random-iac");
    synth->add_option("--out", sy_out, "Output image")->required();

    int gc_trials = 20;
    std::uint64_t gc_seed = 1;
    auto* gradcheck = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
    gradcheck->add_option("--trials", gc_trials, "Random instances")->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", gc_seed, "Seed");

    std::string be_input, be_params;
    int be_repeat = 10;
    auto* bench = app.add_subcommand("bench", "Time apply on one image");
    bench->add_option("--input", be_input, "Image")->required();
    bench->add_option("--params", be_params, "Parameter file (default: a random transform)");
    bench->add_option("--repeat", be_repeat, "Timed runs")->check(CLI::PositiveNumber);

    std::string ex_manifest, ex_out;
    auto* experiment = app.add_subcommand("experiment", "Run a JSON manifest of fits and write report.csv");
    experiment->add_option("--manifest", ex_manifest, "Manifest file")->required();
    experiment->add_option("--out-dir", ex_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit)
            return run_fit(fo);
        if (*apply) {
            if (ap_cube.empty() && (ap_input.empty() || ap_out.empty()))
                throw Error(ErrorCode::InvalidInput, "apply needs --input and --out, or --cube");
            return run_apply(ap_input, ap_params, ap_out, ap_cube, ap_cube_size);
        }
        if (*metrics)
            return run_metrics(m_a, m_b, mf);
        if (*occupancy)
            return run_occupancy(oc_input, oc_size);
        if (*synth)
            return run_synth(sy_input, sy, sy_seed, sy_out);
        if (*gradcheck)
            return run_gradcheck(gc_trials, gc_seed);
        if (*bench)
            return run_bench(be_input, be_params, be_repeat);
        if (*experiment)
            return run_experiment_cmd(ex_manifest, ex_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
