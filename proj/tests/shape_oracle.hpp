#pragma once

// Randomized sign-like shapes with known ground-truth regions, for checking
// mask generation.

#include <cmath>
#include <string>
#include <vector>

#include "chrono_shield/error.hpp"
#include "chrono_shield/image.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/rng.hpp"

namespace cs_test {

struct ShapeCase {
  std::string kind;
  chrono_shield::RasterImage image;
  chrono_shield::BinaryMask truth;
};

struct Pt {
  double x, y;
};

inline bool point_in_polygon(const std::vector<Pt>& poly, double px, double py) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if ((poly[i].y > py) != (poly[j].y > py) &&
        px < poly[i].x + (py - poly[i].y) * (poly[j].x - poly[i].x) / (poly[j].y - poly[i].y)) {
      in = !in;
    }
  }
  return in;
}

inline std::vector<Pt> regular_polygon(int n, double cx, double cy, double r, double phase) {
  std::vector<Pt> p;
  for (int k = 0; k < n; ++k) {
    const double a = phase + 2.0 * M_PI * k / n;
    p.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return p;
}

// kind: 0 octagon, 1 triangle, 2 diamond, 3 circle. Circumscribed radius in
// [12, 40] px (so every shape spans at least 24 px), background a random
// linear gradient plus noise, sign/background luma separated by >= 80.
inline ShapeCase random_shape(chrono_shield::Rng& rng, int side = 128) {
  static const char* kNames[] = {"octagon", "triangle", "diamond", "circle"};
  const int kind = static_cast<int>(rng.below(4));
  const double r = rng.uniform(12.0, 40.0);
  const double margin = r + 3.0;
  const double cx = rng.uniform(margin, side - margin);
  const double cy = rng.uniform(margin, side - margin);
  const double spin = rng.uniform(-0.2, 0.2);
  std::vector<Pt> poly;
  switch (kind) {
    case 0: poly = regular_polygon(8, cx, cy, r, M_PI / 8 + spin); break;
    case 1: poly = regular_polygon(3, cx, cy, r, M_PI / 2 + spin); break;
    case 2: poly = regular_polygon(4, cx, cy, r, spin); break;
    default: poly = regular_polygon(64, cx, cy, r, 0.0); break;
  }

  // Dark sign on a bright background or the reverse.
  const bool bright_sign = rng.below(2) == 0;
  const double bg_lo = bright_sign ? 10.0 : 150.0;
  const double bg_hi = bright_sign ? 80.0 : 225.0;
  const double sign_level = bright_sign ? rng.uniform(bg_hi + 85.0, 250.0) : rng.uniform(5.0, bg_lo - 85.0 + 5.0);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const double gx = std::cos(angle), gy = std::sin(angle);

  ShapeCase out{kNames[kind], chrono_shield::RasterImage(side, side, 3), chrono_shield::BinaryMask(side, side)};
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool inside = point_in_polygon(poly, x + 0.5, y + 0.5);
      double v;
      if (inside) {
        out.truth.set(x, y);
        v = sign_level;
      } else {
        const double t = 0.5 + ((x - side / 2.0) * gx + (y - side / 2.0) * gy) / (side * 1.5);
        v = bg_lo + (bg_hi - bg_lo) * std::clamp(t, 0.0, 1.0);
      }
      v += rng.uniform(-3.0, 3.0);
      const auto q = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = q;
    }
  }
  return out;
}

}  // namespace cs_test
