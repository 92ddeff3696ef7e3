#include <gtest/gtest.h>

#include <cmath>

#include "chrono_shield/image.hpp"
#include "test_support.hpp"

using namespace chrono_shield;

namespace {

std::uint8_t luma_oracle(int r, int g, int b) {
  return static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

RasterImage rgb_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) { return RasterImage(1, 1, 3, {r, g, b}); }

FloatPlane random_plane(int w, int h, Rng& rng) {
  FloatPlane p(w, h);
  for (auto& v : p.data()) v = static_cast<float>(rng.uniform(0.0, 255.0));
  return p;
}

}  // namespace

TEST(RasterImage, RejectsBadShape) {
  EXPECT_CS_ERROR(RasterImage(0, 4, 3), ErrorCode::InvalidArgument);
  EXPECT_CS_ERROR(RasterImage(4, 4, 4), ErrorCode::InvalidArgument);
  EXPECT_CS_ERROR(RasterImage(2, 2, 3, std::vector<std::uint8_t>(11)), ErrorCode::InvalidArgument);
}

TEST(RasterImage, InterleavedLayout) {
  RasterImage img(3, 2, 3);
  img.at(2, 1, 1) = 77;
  EXPECT_EQ(img.data()[(1 * 3 + 2) * 3 + 1], 77);
  EXPECT_EQ(img.pixel_count(), 6u);
}

TEST(Grayscale, PrimaryExamples) {
  EXPECT_EQ(to_grayscale(rgb_pixel(255, 255, 255)).at(0, 0), 255);
  EXPECT_EQ(to_grayscale(rgb_pixel(255, 0, 0)).at(0, 0), 76);
  EXPECT_EQ(to_grayscale(rgb_pixel(10, 10, 10)).at(0, 0), 10);
}

TEST(Grayscale, MatchesLumaFormulaOnRandomPixels) {
  Rng rng(3);
  const RasterImage img = cs_test::random_image(17, 9, 3, rng);
  const RasterImage g = to_grayscale(img);
  ASSERT_EQ(g.channels(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      EXPECT_EQ(g.at(x, y), luma_oracle(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)));
    }
  }
}

TEST(Grayscale, IdempotentOnSingleChannel) {
  Rng rng(4);
  const RasterImage g = to_grayscale(cs_test::random_image(8, 8, 3, rng));
  EXPECT_EQ(to_grayscale(g), g);
}

TEST(ToRgb, ReplicatesGray) {
  RasterImage g(2, 1, 1, {9, 200});
  const RasterImage rgb = to_rgb(g);
  ASSERT_EQ(rgb.channels(), 3);
  EXPECT_EQ(rgb.at(1, 0, 0), 200);
  EXPECT_EQ(rgb.at(1, 0, 2), 200);
}

TEST(GaussianKernel, NormalizedAndShaped) {
  const auto k = gaussian_kernel(1.4, 2);
  ASSERT_EQ(k.size(), 5u);
  double sum = 0.0;
  for (double v : k) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  // Ratios follow exp(-d^2 / 2 sigma^2).
  EXPECT_NEAR(k[3] / k[2], std::exp(-1.0 / (2 * 1.4 * 1.4)), 1e-12);
  EXPECT_NEAR(k[4] / k[2], std::exp(-4.0 / (2 * 1.4 * 1.4)), 1e-12);
  EXPECT_DOUBLE_EQ(k[0], k[4]);
}

TEST(GaussianBlur, RejectsBadParameters) {
  const RasterImage g = cs_test::solid(4, 4, 1, 10);
  EXPECT_CS_ERROR(gaussian_blur(g, 0.0, 2), ErrorCode::InvalidSigma);
  EXPECT_CS_ERROR(gaussian_blur(g, -1.0, 2), ErrorCode::InvalidSigma);
  EXPECT_CS_ERROR(gaussian_blur(g, 1.0, 0), ErrorCode::InvalidArgument);
}

TEST(GaussianBlur, ConstantsAreFixedPoints) {
  const RasterImage g = cs_test::solid(13, 7, 1, 128);
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    for (int radius : {1, 2, 5}) EXPECT_EQ(gaussian_blur(g, sigma, radius), g) << sigma << " " << radius;
  }
}

TEST(GaussianBlur, ImpulseResponseIsOuterProduct) {
  FloatPlane p(21, 21, 0.0f);
  p.at(10, 10) = 1.0f;
  const double sigma = 1.3;
  const int r = 3;
  const auto k = gaussian_kernel(sigma, r);
  const FloatPlane out = gaussian_blur(p, sigma, r);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      EXPECT_NEAR(out.at(10 + dx, 10 + dy), k[static_cast<std::size_t>(dx + r)] * k[static_cast<std::size_t>(dy + r)],
                  1e-6);
    }
  }
  EXPECT_FLOAT_EQ(out.at(10 + r + 1, 10), 0.0f);
}

TEST(GaussianBlur, MatchesDenseClampedConvolution) {
  Rng rng(9);
  const FloatPlane p = random_plane(15, 11, rng);
  const double sigma = 1.0;
  const int r = 2;
  const FloatPlane out = gaussian_blur(p, sigma, r);
  // Dense 2-D kernel from the unnormalized Gaussian, normalized over the window.
  std::vector<double> dense;
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      dense.push_back(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
      total += dense.back();
    }
  }
  double interior_in = 0.0, interior_out = 0.0;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      double acc = 0.0;
      std::size_t i = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = std::clamp(x + dx, 0, p.width() - 1);
          const int sy = std::clamp(y + dy, 0, p.height() - 1);
          acc += dense[i++] / total * p.at(sx, sy);
        }
      }
      EXPECT_NEAR(out.at(x, y), acc, 1e-3);
      if (x >= 2 * r && y >= 2 * r && x < p.width() - 2 * r && y < p.height() - 2 * r) {
        interior_out += out.at(x, y);
        interior_in += acc;
      }
    }
  }
  EXPECT_NEAR(interior_in, interior_out, 1e-2);
}

TEST(ResizeBilinear, SameSizeIsIdentity) {
  Rng rng(1);
  const RasterImage img = cs_test::random_image(9, 5, 3, rng);
  EXPECT_EQ(resize_bilinear(img, 9, 5), img);
}

TEST(ResizeBilinear, CheckerboardAveragesToMidGray) {
  const RasterImage board(2, 2, 1, {0, 255, 255, 0});
  const RasterImage one = resize_bilinear(board, 1, 1);
  EXPECT_NEAR(one.at(0, 0), 128, 1);
}

TEST(ResizeBilinear, UpscaledGradientMatchesClosedForm) {
  // v(x, y) = 20x + 40y is reproduced exactly by bilinear interpolation, so the
  // output at each pixel centre is v evaluated at the clamped source coordinate.
  RasterImage g(4, 4, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) g.at(x, y) = static_cast<std::uint8_t>(20 * x + 40 * y);
  }
  const RasterImage up = resize_bilinear(g, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const double u = std::clamp((x + 0.5) / 2.0 - 0.5, 0.0, 3.0);
      const double v = std::clamp((y + 0.5) / 2.0 - 0.5, 0.0, 3.0);
      EXPECT_EQ(up.at(x, y), std::lround(20 * u + 40 * v)) << x << "," << y;
    }
  }
}

TEST(ResizeBilinear, RoundTripOnSmoothGradientStaysClose) {
  RasterImage g(40, 30, 3);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      for (int c = 0; c < 3; ++c) g.at(x, y, c) = static_cast<std::uint8_t>(x * 3 + y * 2 + c * 20);
    }
  }
  const RasterImage back = resize_bilinear(resize_bilinear(g, 13, 17), 40, 30);
  int worst = 0;
  for (std::size_t i = 0; i < g.data().size(); ++i) worst = std::max(worst, std::abs(g.data()[i] - back.data()[i]));
  EXPECT_LE(worst, 40);
  const RasterImage flat = cs_test::solid(40, 30, 3, 77);
  EXPECT_EQ(resize_bilinear(resize_bilinear(flat, 13, 17), 40, 30), flat);
}

TEST(ResizeBilinear, RejectsEmptyTarget) {
  EXPECT_CS_ERROR(resize_bilinear(cs_test::solid(2, 2, 1, 0), 0, 3), ErrorCode::InvalidArgument);
}
