#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "iac/metrics.hpp"
#include "oracles.hpp"
#include "sharma_pairs.hpp"

using namespace iac;

TEST(Psnr, AnalyticCases)
{
    const ImageBuf a(8, 8, 0.25);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    EXPECT_NEAR(psnr(ImageBuf(8, 8, 0.0), ImageBuf(8, 8, 0.5)), 6.0206, 1e-4);
    EXPECT_NEAR(psnr(ImageBuf(8, 8, 0.3), ImageBuf(8, 8, 0.4)), 20.0, 1e-9);
    EXPECT_THROW(psnr(a, ImageBuf(8, 9)), Error);
}

TEST(Psnr, SymmetricAndDecreasingInNoise)
{
    const ImageBuf x = oracle::random_image(16, 16, 1, 0.2, 0.8);
    const ImageBuf n = oracle::random_image(16, 16, 2, -1.0, 1.0);
    double prev = INFINITY;
    for (double amp : {0.001, 0.01, 0.05, 0.1, 0.2}) {
        ImageBuf y = x;
        for (std::size_t i = 0; i < y.size(); ++i)
            y.data()[i] += amp * n.data()[i];
        EXPECT_EQ(psnr(x, y), psnr(y, x));
        EXPECT_LT(psnr(x, y), prev);
        prev = psnr(x, y);
    }
}

TEST(ErrorStats, EightBitScale)
{
    const ErrorStats half = error_stats(ImageBuf(4, 4, 0.0), ImageBuf(4, 4, 0.5));
    EXPECT_NEAR(half.mae, 127.5, 1e-9);
    EXPECT_NEAR(half.mse, 16256.25, 1e-6);
    EXPECT_NEAR(error_stats(ImageBuf(4, 4, 0.3), ImageBuf(4, 4, 0.4)).mae, 25.5, 1e-9);
    const ErrorStats zero = error_stats(ImageBuf(4, 4, 0.3), ImageBuf(4, 4, 0.3));
    EXPECT_EQ(zero.mse, 0.0);
    EXPECT_EQ(zero.mae, 0.0);
}

TEST(Ssim, SelfSimilarityIsOne)
{
    const ImageBuf x = oracle::random_image(32, 40, 3);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
    const ImageBuf flat(16, 16, 0.4);
    EXPECT_NEAR(ssim(flat, flat), 1.0, 1e-9);
}

TEST(Ssim, InvertedImageScoresNegative)
{
    const ImageBuf x = oracle::random_image(32, 32, 4);
    ImageBuf inv = x;
    for (double& v : inv.data())
        v = 1.0 - v;
    EXPECT_LT(ssim(x, inv), 0.0);
}

TEST(Ssim, MatchesDirectWindowOracle)
{
    ImageBuf checker(24, 30);
    for (std::size_t y = 0; y < 24; ++y)
        for (std::size_t x = 0; x < 30; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                checker.at(y, x, c) = ((y / 3 + x / 3) % 2) ? 0.9 : 0.1;
    ImageBuf blurred = checker;
    for (std::size_t y = 1; y + 1 < 24; ++y)
        for (std::size_t x = 1; x + 1 < 30; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                blurred.at(y, x, c) = (checker.at(y - 1, x, c) + checker.at(y + 1, x, c) +
                                       checker.at(y, x - 1, c) + checker.at(y, x + 1, c) + checker.at(y, x, c)) /
                                      5.0;
    EXPECT_NEAR(ssim(checker, blurred), oracle::ssim_direct(checker, blurred), 1e-6);

    const ImageBuf a = oracle::random_image(20, 17, 5);
    const ImageBuf b = oracle::random_image(20, 17, 6);
    EXPECT_NEAR(ssim(a, b), oracle::ssim_direct(a, b), 1e-9);
}

TEST(Ssim, SymmetricAndBounded)
{
    const ImageBuf a = oracle::random_image(16, 16, 7);
    const ImageBuf b = oracle::random_image(16, 16, 8);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_LE(ssim(a, b), 1.0);
    EXPECT_GE(ssim(a, b), -1.0);
}

TEST(Ssim, TooSmallImageThrows)
{
    EXPECT_THROW(ssim(ImageBuf(10, 40, 0.5), ImageBuf(10, 40, 0.5)), Error);
    EXPECT_THROW(ssim(ImageBuf(12, 12), ImageBuf(12, 13)), Error);
}

TEST(Lab, ReferenceColors)
{
    const Lab white = srgb_to_lab({1, 1, 1});
    EXPECT_NEAR(white.l, 100.0, 1e-3);
    EXPECT_NEAR(white.a, 0.0, 1e-3);
    EXPECT_NEAR(white.b, 0.0, 1e-3);
    const Lab black = srgb_to_lab({0, 0, 0});
    EXPECT_NEAR(black.l, 0.0, 1e-9);
    const Lab red = srgb_to_lab({1, 0, 0});
    EXPECT_NEAR(red.l, 53.24, 0.01);
    EXPECT_NEAR(red.a, 80.09, 0.01);
    EXPECT_NEAR(red.b, 67.20, 0.01);
}

TEST(Ciede2000, ConformancePairs)
{
    int i = 1;
    for (const oracle::SharmaPair& p : oracle::kSharma) {
        EXPECT_NEAR(ciede2000(p.a, p.b), p.de, 1e-4) << "pair " << i;
        EXPECT_NEAR(ciede2000(p.b, p.a), p.de, 1e-4) << "pair " << i << " swapped";
        ++i;
    }
}

TEST(Ciede2000, ZeroForEqualColors)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const Lab c = srgb_to_lab({u(rng), u(rng), u(rng)});
        EXPECT_NEAR(ciede2000(c, c), 0.0, 1e-12);
    }
}

TEST(DeltaE2000, SummaryStatistics)
{
    const ImageBuf x = oracle::random_image(8, 8, 10);
    const MetricSummary same = delta_e2000(x, x);
    EXPECT_NEAR(same.mean, 0.0, 1e-12);
    EXPECT_NEAR(same.q3, 0.0, 1e-12);

    const MetricSummary s = summarize({4.0, 1.0, 3.0, 2.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.q1, 1.75);
    EXPECT_DOUBLE_EQ(s.q2, 2.5);
    EXPECT_DOUBLE_EQ(s.q3, 3.25);
    EXPECT_THROW(summarize({}), Error);
}
