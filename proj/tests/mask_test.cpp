#include <gtest/gtest.h>

#include <cmath>
#include <queue>

#include "chrono_shield/mask.hpp"
#include "shape_oracle.hpp"
#include "test_support.hpp"

using namespace chrono_shield;

namespace {

BinaryMask random_mask(int w, int h, double p, Rng& rng) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, rng.uniform() < p);
  }
  return m;
}

// Brute-force square-window morphology with the frame conventions from the header.
BinaryMask dilate_oracle(const BinaryMask& m, int k) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool any = false;
      for (int dy = -k; dy <= k && !any; ++dy) {
        for (int dx = -k; dx <= k && !any; ++dx) any = m.get(x + dx, y + dy);
      }
      out.set(x, y, any);
    }
  }
  return out;
}

BinaryMask erode_oracle(const BinaryMask& m, int k) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool all = true;
      for (int dy = -k; dy <= k && all; ++dy) {
        for (int dx = -k; dx <= k && all; ++dx) {
          const int sx = x + dx, sy = y + dy;
          const bool inside = sx >= 0 && sy >= 0 && sx < m.width() && sy < m.height();
          all = !inside || m.at(sx, sy);
        }
      }
      out.set(x, y, all);
    }
  }
  return out;
}

int component_count(const BinaryMask& m) {
  BinaryMask seen(m.width(), m.height());
  int n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || seen.at(x, y)) continue;
      ++n;
      std::queue<Point> q;
      q.push({x, y});
      seen.set(x, y);
      while (!q.empty()) {
        const Point p = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (m.get(nx, ny) && !seen.at(nx, ny)) {
              seen.set(nx, ny);
              q.push({nx, ny});
            }
          }
        }
      }
    }
  }
  return n;
}

RasterImage octagon_image(int side, double cx, double cy, double r) {
  RasterImage img(side, side, 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = std::abs(x + 0.5 - cx), dy = std::abs(y + 0.5 - cy);
      const bool in = dx <= r && dy <= r && dx + dy <= r * std::sqrt(2.0);
      const std::uint8_t v = in ? 210 : 40;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  }
  return img;
}

}  // namespace

TEST(BinaryMask, BoundingBoxAndCount) {
  BinaryMask m(6, 5);
  EXPECT_FALSE(m.bounding_box().has_value());
  m.set(1, 3);
  m.set(4, 1);
  const auto box = m.bounding_box();
  ASSERT_TRUE(box.has_value());
  EXPECT_EQ(box->x0, 1);
  EXPECT_EQ(box->y0, 1);
  EXPECT_EQ(box->x1, 4);
  EXPECT_EQ(box->y1, 3);
  EXPECT_EQ(m.count(), 2u);
  EXPECT_FALSE(m.get(-1, 0));
  EXPECT_FALSE(m.get(6, 0));
}

TEST(Canny, ConstantImageHasNoEdges) {
  EXPECT_EQ(canny_edges(cs_test::solid(32, 32, 1, 128), 50, 150).count(), 0u);
}

TEST(Canny, VerticalStepMarksOneColumn) {
  RasterImage g(32, 32, 1);
  for (int y = 0; y < 32; ++y) {
    for (int x = 16; x < 32; ++x) g.at(x, y) = 255;
  }
  const BinaryMask e = canny_edges(g, 50, 150);
  std::size_t hits = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (!e.at(x, y)) continue;
      ++hits;
      EXPECT_TRUE(x == 15 || x == 16) << x << "," << y;
      EXPECT_TRUE(y >= 1 && y <= 30);
    }
  }
  // One column thick, full height apart from the unmarked frame.
  EXPECT_EQ(hits, 30u);
}

TEST(Canny, SquareOutlineLength) {
  RasterImage g(64, 64, 1);
  const int side = 24;
  for (int y = 20; y < 20 + side; ++y) {
    for (int x = 20; x < 20 + side; ++x) g.at(x, y) = 255;
  }
  const BinaryMask e = canny_edges(g, 50, 150);
  EXPECT_LE(std::abs(static_cast<long>(e.count()) - 4 * side), 8);
}

TEST(Canny, RejectsBadThresholds) {
  const RasterImage g = cs_test::solid(8, 8, 1, 0);
  EXPECT_CS_ERROR(canny_edges(g, 0, 10), ErrorCode::InvalidThresholds);
  EXPECT_CS_ERROR(canny_edges(g, 100, 50), ErrorCode::InvalidThresholds);
  EXPECT_CS_ERROR(canny_edges(g, 50, 50), ErrorCode::InvalidThresholds);
}

TEST(Morphology, DilateSinglePixel) {
  BinaryMask m(7, 7);
  m.set(3, 3);
  const BinaryMask d = morph_dilate(m, 1);
  EXPECT_EQ(d.count(), 9u);
  EXPECT_TRUE(d.at(2, 2));
  EXPECT_FALSE(d.at(1, 3));
  EXPECT_CS_ERROR(morph_dilate(m, 0), ErrorCode::InvalidArgument);
  EXPECT_CS_ERROR(morph_erode(m, -1), ErrorCode::InvalidArgument);
}

TEST(Morphology, CloseFillsGap) {
  BinaryMask m(9, 5);
  for (int x = 1; x < 8; ++x) m.set(x, 2, x != 4);
  const BinaryMask c = morph_close(m, 1);
  EXPECT_TRUE(c.at(4, 2));
}

TEST(Morphology, MatchesBruteForceOnRandomMasks) {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 5 + static_cast<int>(rng.below(20));
    const int h = 5 + static_cast<int>(rng.below(20));
    const int k = 1 + static_cast<int>(rng.below(3));
    const BinaryMask m = random_mask(w, h, rng.uniform(0.05, 0.7), rng);
    EXPECT_EQ(morph_dilate(m, k), dilate_oracle(m, k));
    EXPECT_EQ(morph_erode(m, k), erode_oracle(m, k));
    const BinaryMask closed = morph_close(m, k);
    EXPECT_EQ(closed, erode_oracle(dilate_oracle(m, k), k));
    // Closing is extensive and idempotent.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (m.at(x, y)) {
          EXPECT_TRUE(closed.at(x, y));
        }
      }
    }
    EXPECT_EQ(morph_close(closed, k), closed);
  }
}

TEST(Contours, EmptyMaskHasNone) { EXPECT_TRUE(find_contours(BinaryMask(10, 10)).empty()); }

TEST(Contours, SquareAreaMatchesShoelace) {
  BinaryMask m(20, 20);
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 15; ++x) m.set(x, y);
  }
  const auto cs = find_contours(m);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_GE(cs[0].area, 81.0);
  EXPECT_LE(cs[0].area, 100.0);
  EXPECT_DOUBLE_EQ(cs[0].area, shoelace_area(cs[0].points));
  // Boundary points are 8-connected and on the square outline.
  for (std::size_t i = 0; i < cs[0].points.size(); ++i) {
    const Point a = cs[0].points[i];
    const Point b = cs[0].points[(i + 1) % cs[0].points.size()];
    EXPECT_LE(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)), 1);
    EXPECT_TRUE(a.x == 5 || a.x == 14 || a.y == 5 || a.y == 14);
  }
}

TEST(Contours, ShoelaceUnitSquare) {
  EXPECT_DOUBLE_EQ(shoelace_area({{0, 0}, {4, 0}, {4, 3}, {0, 3}}), 12.0);
  EXPECT_DOUBLE_EQ(shoelace_area({{0, 0}, {0, 3}, {4, 3}, {4, 0}}), 12.0);
  EXPECT_DOUBLE_EQ(shoelace_area({{0, 0}, {1, 1}}), 0.0);
}

TEST(Contours, AreaFilterDropsSmallComponent) {
  BinaryMask m(64, 64);
  for (int y = 2; y < 22; ++y) {
    for (int x = 2; x < 22; ++x) m.set(x, y);
  }
  for (int y = 40; y < 45; ++y) {
    for (int x = 40; x < 45; ++x) m.set(x, y);
  }
  EXPECT_EQ(find_contours(m).size(), 2u);
  const auto big = find_contours(m, 100.0);
  ASSERT_EQ(big.size(), 1u);
  EXPECT_GT(big[0].area, 300.0);
}

TEST(Contours, SelectLargestTieGoesTopLeft) {
  Contour a{{{10, 10}, {14, 10}, {14, 14}, {10, 14}}, 16.0};
  Contour b{{{2, 20}, {6, 20}, {6, 24}, {2, 24}}, 16.0};
  Contour c{{{0, 0}, {1, 0}, {1, 1}}, 0.5};
  const std::vector<Contour> cs{b, a, c};
  const Contour* best = select_largest(cs);
  ASSERT_NE(best, nullptr);
  EXPECT_EQ(best->points.front(), (Point{10, 10}));
  EXPECT_EQ(select_largest({}), nullptr);
}

TEST(FillContour, SquareFillsInterior) {
  BinaryMask m(16, 16);
  for (int y = 3; y < 11; ++y) {
    for (int x = 4; x < 12; ++x) m.set(x, y);
  }
  const auto cs = find_contours(m);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(fill_contour(cs[0], 16, 16), m);
}

TEST(FillContour, RingFillsHole) {
  BinaryMask ring(20, 20);
  for (int y = 3; y < 17; ++y) {
    for (int x = 3; x < 17; ++x) ring.set(x, y, x < 6 || x > 13 || y < 6 || y > 13);
  }
  const auto cs = find_contours(ring);
  ASSERT_EQ(cs.size(), 1u);
  const BinaryMask filled = fill_contour(cs[0], 20, 20);
  EXPECT_EQ(filled.count(), 14u * 14u);
}

TEST(LargestComponent, KeepsBiggest) {
  BinaryMask m(10, 10);
  m.set(0, 0);
  for (int x = 3; x < 8; ++x) m.set(x, 5);
  const BinaryMask l = largest_component(m);
  EXPECT_EQ(l.count(), 5u);
  EXPECT_FALSE(l.at(0, 0));
  EXPECT_EQ(largest_component(BinaryMask(4, 4)).count(), 0u);
}

TEST(IoU, Basics) {
  BinaryMask a(4, 1), b(4, 1);
  a.set(0, 0);
  a.set(1, 0);
  b.set(1, 0);
  b.set(2, 0);
  EXPECT_DOUBLE_EQ(intersection_over_union(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(intersection_over_union(a, a), 1.0);
}

TEST(MaskImage, RoundTrip) {
  Rng rng(2);
  const BinaryMask m = random_mask(9, 7, 0.4, rng);
  const RasterImage img = mask_to_image(m);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(image_to_mask(img), m);
}

TEST(GenerateMask, OctagonAreaWithinFivePercent) {
  const double r = 40.0;
  const BinaryMask m = generate_mask(octagon_image(128, 64.0, 64.0, r));
  const double expected = 8.0 * r * r * std::tan(M_PI / 8.0);
  EXPECT_NEAR(static_cast<double>(m.count()), expected, 0.05 * expected);
  EXPECT_EQ(component_count(m), 1);
}

TEST(GenerateMask, BlankInputRaises) {
  EXPECT_CS_ERROR(generate_mask(cs_test::solid(64, 64, 3, 128)), ErrorCode::NoContourFound);
  EXPECT_CS_ERROR(generate_mask(cs_test::solid(64, 64, 1, 0)), ErrorCode::NoContourFound);
}

TEST(GenerateMask, TranslationEquivariant) {
  const BinaryMask a = generate_mask(octagon_image(128, 60.0, 64.0, 30.0));
  const BinaryMask b = generate_mask(octagon_image(128, 70.0, 57.0, 30.0));
  BinaryMask shifted(128, 128);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      if (a.at(x, y) && x + 10 < 128 && y - 7 >= 0) shifted.set(x + 10, y - 7);
    }
  }
  EXPECT_GE(intersection_over_union(shifted, b), 0.98);
}

TEST(GenerateMask, RandomShapesMatchTruth) {
  Rng rng(404);
  for (int i = 0; i < 40; ++i) {
    const cs_test::ShapeCase s = cs_test::random_shape(rng);
    const BinaryMask m = generate_mask(s.image);
    EXPECT_GE(intersection_over_union(m, s.truth), 0.85) << i << " " << s.kind;
    EXPECT_EQ(component_count(m), 1);
  }
}
