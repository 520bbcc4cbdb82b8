#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace mmcsr;

TEST(Psnr, UniformOffsetIsExactlyTwentyDecibels) {
  std::mt19937 rng(70);
  const Image a = support::random_image(30, 20, rng, 0.0, 0.8);
  Image b = a;
  for (double& v : b.data()) v += 0.1;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_NEAR(mean_squared_error(a, b), 0.01, 1e-15);
}

TEST(Psnr, IdenticalImagesAreInfinite) {
  const Image a(5, 5, 0.3);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_THROW(psnr(a, Image(4, 5)), std::invalid_argument);
}

TEST(Ssim, SelfComparisonIsOne) {
  std::mt19937 rng(71);
  const Image a = support::random_image(24, 18, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  const Image small = support::random_image(6, 5, rng);
  EXPECT_NEAR(ssim(small, small), 1.0, 1e-12);
}

TEST(Ssim, ConstantShiftClosedForm) {
  // Constant images: variances vanish, SSIM = (2 m1 m2 + C1) / (m1^2 + m2^2 + C1).
  const double m1 = 0.4, m2 = 0.6, c1 = 1e-4;
  const double expect = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
  EXPECT_NEAR(ssim(Image(20, 20, m1), Image(20, 20, m2)), expect, 1e-12);
}

TEST(Ssim, DegradesWithNoiseAndIsSymmetric) {
  std::mt19937 rng(72);
  const Image a = support::random_image(32, 32, rng);
  Image b = a;
  std::normal_distribution<double> noise(0.0, 0.1);
  for (double& v : b.data()) v += noise(rng);
  const double s = ssim(a, b);
  EXPECT_LT(s, 0.99);
  EXPECT_GT(s, 0.0);
  EXPECT_NEAR(s, ssim(b, a), 1e-12);
}

TEST(Crop, RemovesMarginOnEachSide) {
  Image img(50, 44);
  img(20, 20) = 7.0;
  const Image c = crop_image(img, 20);
  EXPECT_EQ(c.width(), 10u);
  EXPECT_EQ(c.height(), 4u);
  EXPECT_EQ(c(0, 0), 7.0);
  EXPECT_THROW(crop_image(img, 22), std::invalid_argument);
}

TEST(EvaluateCentral, UsesFloorHalfFrame) {
  std::vector<Image> res, truth;
  for (int k = 0; k < 13; ++k) {
    truth.emplace_back(45, 45, 0.5);
    res.emplace_back(45, 45, k == 6 ? 0.6 : 0.5);
  }
  const auto r = evaluate_central(FrameSequence(res), FrameSequence(truth));
  EXPECT_EQ(r.frameIndex, 6u);
  EXPECT_EQ(r.cropMargin, 20u);
  EXPECT_NEAR(r.psnr, 20.0, 1e-9);
  const auto two = evaluate_central(FrameSequence({Image(45, 45), Image(45, 45)}),
                                    FrameSequence({Image(45, 45), Image(45, 45)}));
  EXPECT_EQ(two.frameIndex, 1u);
  EXPECT_TRUE(std::isinf(two.psnr));
}

TEST(GenerateLowres, FloorDimsAndClipping) {
  std::mt19937 rng(73);
  const auto truth = support::random_sequence(35, 34, 2, rng);
  const auto lr = generate_lowres(truth, 4.0);
  EXPECT_EQ(lr.width(), 8u);
  EXPECT_EQ(lr.height(), 8u);
  for (std::size_t k = 0; k < 2; ++k) {
    for (double v : lr[k].values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(generate_lowres(truth, 1.0), std::invalid_argument);
  EXPECT_THROW(generate_lowres(truth, 5.0), std::invalid_argument);
}

TEST(SynthTranslation, ConsecutiveFramesAreShifted) {
  const Image base = synth_texture_image(60, 60, 9);
  const auto seq = synth_translation_sequence(base, 4, 1.5, -0.75);
  ASSERT_EQ(seq.size(), 4u);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    for (std::size_t y = 4; y + 4 < seq.height(); ++y) {
      for (std::size_t x = 4; x + 4 < seq.width(); ++x) {
        // Negative y shifts start the window ceil(3 * 0.75) = 3 rows lower.
        const double bx = 2.0 + 1.5 * (k + 1.0) + x, by = 2.0 + 3.0 - 0.75 * (k + 1.0) + y;
        EXPECT_NEAR(seq[k + 1](x, y), sample_bicubic(base, bx, by), 1e-12);
      }
    }
  }
  // Integer shifts reproduce exact copies.
  const auto ints = synth_translation_sequence(base, 2, 2.0, 0.0);
  EXPECT_EQ(ints[1](3, 5), ints[0](5, 5));
  EXPECT_THROW(synth_translation_sequence(base, 0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(synth_translation_sequence(base, 100, 1.0, 1.0), std::invalid_argument);
}

TEST(SynthImages, DeterministicAndInRange) {
  const Image t1 = synth_text_image(64, 64, 7, 12), t2 = synth_text_image(64, 64, 7, 12);
  EXPECT_TRUE(t1 == t2);
  const Image tex = synth_texture_image(40, 40);
  for (double v : tex.values()) {
    EXPECT_GE(v, 0.1);
    EXPECT_LE(v, 0.9);
  }
  bool dark = false;
  for (double v : t1.values()) dark = dark || v < 0.5;
  EXPECT_TRUE(dark);
}

TEST(MetricsCsv, HeaderAndInfinityFormatting) {
  std::ostringstream os;
  write_metrics_header(os);
  write_metrics_row(os, "seq", "mmc", EvalResult{std::numeric_limits<double>::infinity(), 1.0, 2, 20});
  write_metrics_row(os, "seq", "bicubic", EvalResult{23.5, 0.75, 2, 20});
  EXPECT_EQ(os.str(), "sequence,method,frame,psnr,ssim\nseq,mmc,2,inf,1.000000\nseq,bicubic,2,23.500000,0.750000\n");
}
