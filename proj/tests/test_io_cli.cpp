#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iac/experiment.hpp"
#include "iac/io.hpp"
#include "iac/synth.hpp"
#include "oracles.hpp"

using namespace iac;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::path(testing::TempDir()) / ("iac_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(IAC_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string photo(const char* name)
{
    return std::string(IAC_TEST_DATA_DIR) + "/" + name + ".png";
}

} // namespace

TEST(Quantize, RoundHalfUp)
{
    EXPECT_EQ(quantize_u8(1.0), 255);
    EXPECT_EQ(quantize_u8(0.0), 0);
    EXPECT_EQ(quantize_u8(0.5), 128);
    EXPECT_EQ(quantize_u8(1.5), 255);
    EXPECT_EQ(quantize_u8(-0.2), 0);
    EXPECT_EQ(quantize_u8(2.5 / 255.0), 3);
}

TEST(ImageIo, RedPixelLoadsAsUnitRed)
{
    const fs::path dir = scratch_dir("red");
    save_image(ImageBuf(1, 1, std::vector<double>{1.0, 0.0, 0.0}), (dir / "red.png").string());
    const ImageBuf back = load_image((dir / "red.png").string());
    ASSERT_EQ(back.height(), 1u);
    EXPECT_EQ(back.pixel(0), (Rgb{1.0, 0.0, 0.0}));
}

TEST(ImageIo, SaveLoadIsByteExactAndWithinHalfStep)
{
    const fs::path dir = scratch_dir("roundtrip");
    const ImageBuf x = oracle::random_image(13, 17, 1);
    save_image(x, (dir / "a.png").string());
    const ImageBuf once = load_image((dir / "a.png").string());
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_LE(std::abs(once.data()[i] - x.data()[i]), 0.5 / 255.0 + 1e-12);
    save_image(once, (dir / "b.png").string());
    EXPECT_EQ(load_image((dir / "b.png").string()), once);
    EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
    for (std::size_t i = 0; i < once.size(); ++i)
        EXPECT_EQ(once.data()[i] * 255.0, std::round(once.data()[i] * 255.0));
}

TEST(ImageIo, PpmAndPngAgree)
{
    const fs::path dir = scratch_dir("ppm");
    const ImageBuf x = quantize_8bit(oracle::random_image(9, 11, 2));
    save_image(x, (dir / "x.png").string());
    save_image(x, (dir / "x.ppm").string());
    const ImageBuf a = load_image((dir / "x.png").string());
    const ImageBuf b = load_image((dir / "x.ppm").string());
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, x);
}

TEST(ImageIo, PpmWithCommentsInHeader)
{
    const fs::path dir = scratch_dir("ppmc");
    {
        std::ofstream os(dir / "c.ppm", std::ios::binary);
        os << "P6\n# made by hand\n2 1\n255\n";
        const unsigned char px[6] = {0, 128, 255, 10, 20, 30};
        os.write(reinterpret_cast<const char*>(px), 6);
    }
    const ImageBuf img = load_image((dir / "c.ppm").string());
    EXPECT_EQ(img.width(), 2u);
    EXPECT_DOUBLE_EQ(img.pixel(0).g, 128.0 / 255.0);
    EXPECT_DOUBLE_EQ(img.pixel(1).b, 30.0 / 255.0);
}

TEST(ImageIo, RejectsAlphaCorruptAndMissing)
{
    const fs::path dir = scratch_dir("reject");
    {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = 2;
        img.height = 2;
        img.format = PNG_FORMAT_RGBA;
        std::vector<std::uint8_t> px(16, 200);
        ASSERT_TRUE(png_image_write_to_file(&img, (dir / "alpha.png").string().c_str(), 0, px.data(), 0, nullptr));
    }
    EXPECT_THROW(load_image((dir / "alpha.png").string()), Error);
    {
        std::ofstream os(dir / "junk.png", std::ios::binary);
        os << "\x89PNG\r\n\x1a\n garbage";
    }
    try {
        load_image((dir / "junk.png").string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Decode);
    }
    {
        std::ofstream os(dir / "short.ppm", std::ios::binary);
        os << "P6\n4 4\n255\nabc";
    }
    EXPECT_THROW(load_image((dir / "short.ppm").string()), Error);
    EXPECT_THROW(load_image((dir / "nope.png").string()), Error);
    EXPECT_THROW(save_image(ImageBuf(2, 2), (dir / "x.jpg").string()), Error);
}

TEST(Params, RoundTripReproducesTransform)
{
    const IacParams p = random_iac_params(5, 64);
    std::stringstream ss;
    write_params(ss, p, {"smoothl1", 1000, 7});
    const ParamsFile back = read_params(ss);
    EXPECT_EQ(back.params, p);
    EXPECT_EQ(back.meta.loss, "smoothl1");
    EXPECT_EQ(back.meta.iterations, 1000);
    EXPECT_EQ(back.meta.seed, 7u);
    const ImageBuf x = oracle::random_image(16, 16, 3);
    const ImageBuf a = apply_iac(x, p), b = apply_iac(x, back.params);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_NEAR(a.data()[i], b.data()[i], 1e-9);
}

TEST(Params, IdentityFileIsIdentityTransform)
{
    const fs::path dir = scratch_dir("params");
    params_save(IacParams::identity(200), (dir / "id.params").string());
    const IacParams p = params_load((dir / "id.params").string());
    const ImageBuf x = oracle::random_image(8, 8, 4);
    const ImageBuf y = apply_iac(x, p);
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(y.data()[i], x.data()[i], 1e-9);
}

TEST(Params, RejectsSingularBasisAndBadDocuments)
{
    const std::string curves = "curve_dims 2\ncurve1 0 1\ncurve2 0 1\ncurve3 0 1\n";
    std::stringstream singular("version 1\nbasis 1 2 3 2 4 6 0 0 1\n" + curves);
    try {
        read_params(singular);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularBasis);
    }
    std::stringstream version("version 2\nbasis 1 0 0 0 1 0 0 0 1\n" + curves);
    EXPECT_THROW(read_params(version), Error);
    std::stringstream short_curve("version 1\nbasis 1 0 0 0 1 0 0 0 1\ncurve_dims 3\ncurve1 0 1\ncurve2 0 .5 1\n"
                                  "curve3 0 .5 1\n");
    EXPECT_THROW(read_params(short_curve), Error);
    std::stringstream out_of_range("version 1\nbasis 1 0 0 0 1 0 0 0 1\ncurve_dims 2\ncurve1 0 1.5\ncurve2 0 1\n"
                                   "curve3 0 1\n");
    EXPECT_THROW(read_params(out_of_range), Error);
    std::stringstream unknown("version 1\ncolour red\n");
    EXPECT_THROW(read_params(unknown), Error);
    std::stringstream bad_number("version 1\nbasis 1 0 0 0 1 0 0 0 x\n" + curves);
    EXPECT_THROW(read_params(bad_number), Error);
}

TEST(Synth, Examples)
{
    const ImageBuf x = oracle::random_image(6, 6, 5);
    const ImageBuf h0 = synth_target(x, HueRotate{0.0});
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(h0.data()[i], x.data()[i], 1e-12);

    const ImageBuf px(1, 1, std::vector<double>{0.2, 0.5, 0.8});
    const ImageBuf perm = synth_target(px, parse_permutation("GBR"));
    EXPECT_EQ(perm.pixel(0), (Rgb{0.5, 0.8, 0.2}));

    const ImageBuf red(1, 1, std::vector<double>{1.0, 0.0, 0.0});
    const Rgb green = synth_target(red, HueRotate{120.0}).pixel(0);
    EXPECT_NEAR(green.r, 0.0, 1e-6);
    EXPECT_NEAR(green.g, 1.0, 1e-6);
    EXPECT_NEAR(green.b, 0.0, 1e-6);
}

TEST(Synth, OtherKindsAndErrors)
{
    const ImageBuf px(1, 1, std::vector<double>{0.25, 0.5, 0.81});
    const Rgb g = synth_target(px, Gamma{{2.0, 1.0, 0.5}}).pixel(0);
    EXPECT_NEAR(g.r, 0.0625, 1e-12);
    EXPECT_NEAR(g.g, 0.5, 1e-12);
    EXPECT_NEAR(g.b, 0.9, 1e-12);
    const Rgb e = synth_target(px, ExposureShift{1.0}).pixel(0);
    EXPECT_NEAR(e.r, 0.5, 1e-12);
    EXPECT_NEAR(e.g, 1.0, 1e-12);
    EXPECT_NEAR(e.b, 1.0, 1e-12);
    ChannelMix mix;
    mix.matrix = {0, 1, 0, 1, 0, 0, 0, 0, 1};
    EXPECT_EQ(synth_target(px, mix).pixel(0), (Rgb{0.5, 0.25, 0.81}));

    EXPECT_THROW(synth_target(px, Gamma{{0.0, 1.0, 1.0}}), Error);
    mix.matrix[4] = NAN;
    EXPECT_THROW(synth_target(px, mix), Error);
    EXPECT_THROW(parse_permutation("RRB"), Error);
    EXPECT_THROW(parse_permutation("RG"), Error);
    EXPECT_THROW(make_synth_kind(SynthArgs{"hue"}), Error);
    EXPECT_THROW(make_synth_kind(SynthArgs{"sepia"}), Error);

    const ImageBuf a = synth_target(oracle::random_image(8, 8, 6), RandomIac{}, 3);
    const ImageBuf b = synth_target(oracle::random_image(8, 8, 6), RandomIac{}, 3);
    EXPECT_EQ(a, b);
}

TEST(Experiment, EmptyManifestGivesHeaderOnlyCsv)
{
    const fs::path dir = scratch_dir("exp_empty");
    std::ofstream(dir / "empty.json") << "";
    EXPECT_TRUE(run_experiment((dir / "empty.json").string(), (dir / "out").string()).empty());
    EXPECT_EQ(slurp(dir / "out" / "report.csv"), std::string(kExperimentCsvHeader) + "\n");

    std::ofstream(dir / "norows.json") << R"({"rows": []})";
    run_experiment((dir / "norows.json").string(), (dir / "out2").string());
    EXPECT_EQ(slurp(dir / "out2" / "report.csv"), std::string(kExperimentCsvHeader) + "\n");
}

TEST(Experiment, IdentityPairAndRowErrors)
{
    const fs::path dir = scratch_dir("exp_rows");
    save_image(downsample_box(load_image(photo("chelsea")), 48), (dir / "cat.png").string());
    std::ofstream(dir / "m.json") << R"({"rows": [
        {"id": "same", "input": "cat.png", "target": "cat.png", "methods": ["iac", "rgb", "lut"], "iterations": 200},
        {"id": "missing", "input": "nope.png", "target": "cat.png", "methods": ["iac"]},
        {"id": "badmethod", "input": "cat.png", "target": "cat.png", "methods": ["cnn"], "iterations": 5}
    ]})";
    const auto rows = run_experiment((dir / "m.json").string(), (dir / "out").string());
    ASSERT_EQ(rows.size(), 5u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(rows[i].status, "ok") << rows[i].method;
        EXPECT_GE(rows[i].final_psnr, 50.0) << rows[i].method;
    }
    EXPECT_EQ(rows[3].pair_id, "missing");
    EXPECT_NE(rows[3].status.find("error"), std::string::npos);
    EXPECT_NE(rows[4].status.find("error"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out" / "same_iac_K200.params"));
    EXPECT_TRUE(fs::exists(dir / "out" / "same_lut.cube"));
    EXPECT_NO_THROW(load_cube((dir / "out" / "same_lut.cube").string()));

    std::ifstream csv(dir / "out" / "report.csv");
    std::string line;
    int lines = 0;
    while (std::getline(csv, line))
        ++lines;
    EXPECT_EQ(lines, 6);
}

TEST(Cli, FitIsByteDeterministicAndApplyMatchesReport)
{
    const fs::path dir = scratch_dir("cli_fit");
    save_image(downsample_box(load_image(photo("coffee")), 64), (dir / "in.png").string());
    ASSERT_EQ(run_cli("synth --input " + (dir / "in.png").string() + " --kind hue --angle 25 --out " +
                          (dir / "tg.png").string(),
                      dir / "synth.log"),
              0);
    const std::string common =
        "fit --input " + (dir / "in.png").string() + " --target " + (dir / "tg.png").string() + " --iters 150 --seed 9";
    ASSERT_EQ(run_cli(common + " --out " + (dir / "a.params").string(), dir / "a.log"), 0) << slurp(dir / "a.log");
    ASSERT_EQ(run_cli(common + " --out " + (dir / "b.params").string() + " --cube " + (dir / "b.cube").string(),
                      dir / "b.log"),
              0);
    EXPECT_EQ(slurp(dir / "a.params"), slurp(dir / "b.params"));
    EXPECT_EQ(load_cube((dir / "b.cube").string()).size(), 33u);

    const IacParams p = params_load((dir / "a.params").string());
    const ImageBuf x = load_image((dir / "in.png").string());
    const ImageBuf y = load_image((dir / "tg.png").string());
    const double reproduced = psnr(apply_iac(x, p), y);
    const std::string log = slurp(dir / "a.log");
    const auto at = log.find("psnr");
    ASSERT_NE(at, std::string::npos);
    const double reported = std::stod(log.substr(log.find_first_of("0123456789", at)));
    EXPECT_NEAR(reproduced, reported, 0.01);

    ASSERT_EQ(run_cli("apply --input " + (dir / "in.png").string() + " --params " + (dir / "a.params").string() +
                          " --out " + (dir / "out.png").string(),
                      dir / "apply.log"),
              0);
    EXPECT_EQ(load_image((dir / "out.png").string()), quantize_8bit(apply_iac(x, p)));
}

TEST(Cli, OtherSubcommands)
{
    const fs::path dir = scratch_dir("cli_misc");
    const std::string in = photo("rocket");
    EXPECT_EQ(run_cli("gradcheck --trials 20 --seed 3", dir / "gc.log"), 0) << slurp(dir / "gc.log");
    EXPECT_NE(slurp(dir / "gc.log").find("20/20"), std::string::npos);

    EXPECT_EQ(run_cli("occupancy --input " + in + " --size 33", dir / "occ.log"), 0);
    EXPECT_NE(slurp(dir / "occ.log").find("corner"), std::string::npos);

    EXPECT_EQ(run_cli("metrics --a " + in + " --b " + in, dir / "m.log"), 0);
    const std::string m = slurp(dir / "m.log");
    EXPECT_NE(m.find("psnr    99.0000 dB"), std::string::npos) << m;
    EXPECT_NE(m.find("luma"), std::string::npos);
    EXPECT_NE(m.find("deltaE"), std::string::npos);

    EXPECT_EQ(run_cli("bench --input " + in + " --repeat 2", dir / "bench.log"), 0);
    EXPECT_NE(slurp(dir / "bench.log").find("ms/MP"), std::string::npos);

    std::ofstream(dir / "m.json") << "";
    EXPECT_EQ(run_cli("experiment --manifest " + (dir / "m.json").string() + " --out-dir " + (dir / "exp").string(),
                      dir / "exp.log"),
              0);
    EXPECT_TRUE(fs::exists(dir / "exp" / "report.csv"));

    EXPECT_EQ(run_cli("synth --input " + in + " --kind permute --perm GBR --out " + (dir / "p.ppm").string(),
                      dir / "p.log"),
              0);
    const ImageBuf src = load_image(in), perm = load_image((dir / "p.ppm").string());
    EXPECT_EQ(perm.pixel(100), (Rgb{src.pixel(100).g, src.pixel(100).b, src.pixel(100).r}));
}

TEST(Cli, FailuresExitNonZero)
{
    const fs::path dir = scratch_dir("cli_fail");
    {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = 1;
        img.height = 1;
        img.format = PNG_FORMAT_RGBA;
        std::uint8_t px[4] = {1, 2, 3, 4};
        ASSERT_TRUE(png_image_write_to_file(&img, (dir / "alpha.png").string().c_str(), 0, px, 0, nullptr));
    }
    EXPECT_NE(run_cli("occupancy --input " + (dir / "alpha.png").string(), dir / "a.log"), 0);
    EXPECT_NE(slurp(dir / "a.log").find("alpha"), std::string::npos);
    EXPECT_NE(run_cli("fit --input x.png", dir / "b.log"), 0);
    EXPECT_NE(run_cli("nosuchcommand", dir / "c.log"), 0);
    EXPECT_NE(run_cli("synth --input " + photo("rocket") + " --kind hue --out " + (dir / "h.png").string(),
                      dir / "d.log"),
              0);
}
