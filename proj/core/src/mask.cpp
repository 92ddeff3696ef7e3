#include "chrono_shield/mask.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) raise(ErrorCode::InvalidArgument, "mask extent must be positive");
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::optional<BinaryMask::Box> BinaryMask::bounding_box() const noexcept {
  Box box{width_, height_, -1, -1};
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!at(x, y)) continue;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x);
      box.y1 = std::max(box.y1, y);
    }
  }
  if (box.x1 < 0) return std::nullopt;
  return box;
}

double shoelace_area(const std::vector<Point>& points) noexcept {
  if (points.size() < 3) return 0.0;
  long long twice = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % points.size()];
    twice += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
  }
  return std::abs(static_cast<double>(twice)) / 2.0;
}

// --- Canny -------------------------------------------------------------

BinaryMask canny_edges(const FloatPlane& img, double low_thresh, double high_thresh) {
  if (!(low_thresh > 0.0) || !(high_thresh > low_thresh)) {
    raise(ErrorCode::InvalidThresholds, "Canny thresholds must satisfy 0 < low < high");
  }
  const int w = img.width();
  const int h = img.height();
  FloatPlane magnitude(w, h);
  std::vector<std::uint8_t> direction(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (img.clamped(x + 1, y - 1) + 2.0 * img.clamped(x + 1, y) + img.clamped(x + 1, y + 1)) -
                        (img.clamped(x - 1, y - 1) + 2.0 * img.clamped(x - 1, y) + img.clamped(x - 1, y + 1));
      const double gy = (img.clamped(x - 1, y + 1) + 2.0 * img.clamped(x, y + 1) + img.clamped(x + 1, y + 1)) -
                        (img.clamped(x - 1, y - 1) + 2.0 * img.clamped(x, y - 1) + img.clamped(x + 1, y - 1));
      magnitude.at(x, y) = static_cast<float>(std::hypot(gx, gy));
      double angle = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
      if (angle < 0.0) angle += 180.0;
      std::uint8_t bin = 0;
      if (angle >= 22.5 && angle < 67.5) {
        bin = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        bin = 2;
      } else if (angle >= 112.5 && angle < 157.5) {
        bin = 3;
      }
      direction[magnitude.index(x, y)] = bin;
    }
  }

  // Offsets of the "forward" neighbour along the quantized gradient direction.
  constexpr std::array<Point, 4> kStep = {Point{1, 0}, Point{1, 1}, Point{0, 1}, Point{-1, 1}};
  enum : std::uint8_t { kNone = 0, kWeak = 1, kStrong = 2 };
  std::vector<std::uint8_t> klass(direction.size(), kNone);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const float m = magnitude.at(x, y);
      if (m < low_thresh) continue;
      const Point s = kStep[direction[magnitude.index(x, y)]];
      const float back = magnitude.at(x - s.x, y - s.y);
      const float fwd = magnitude.at(x + s.x, y + s.y);
      // Asymmetric comparison keeps exactly one pixel of a plateau pair.
      if (!(m > back && m >= fwd)) continue;
      klass[magnitude.index(x, y)] = m >= high_thresh ? kStrong : kWeak;
    }
  }

  BinaryMask edges(w, h);
  std::vector<Point> stack;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      if (klass[magnitude.index(x, y)] != kStrong || edges.at(x, y)) continue;
      edges.set(x, y);
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (nx < 1 || ny < 1 || nx >= w - 1 || ny >= h - 1 || edges.at(nx, ny)) continue;
            if (klass[magnitude.index(nx, ny)] == kNone) continue;
            edges.set(nx, ny);
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return edges;
}

BinaryMask canny_edges(const RasterImage& gray, double low_thresh, double high_thresh) {
  return canny_edges(to_plane(gray), low_thresh, high_thresh);
}

// --- Morphology ----------------------------------------------------------

namespace {

void check_kernel(int k) {
  if (k < 1) raise(ErrorCode::InvalidArgument, "structuring element half-width must be >= 1");
}

// Separable square min/max filter. outside is the value assumed beyond the frame.
BinaryMask square_filter(const BinaryMask& mask, int k, bool dilate) {
  const int w = mask.width();
  const int h = mask.height();
  const bool outside = !dilate;
  BinaryMask pass(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = !dilate;
      for (int d = -k; d <= k; ++d) {
        const int nx = x + d;
        const bool s = (nx < 0 || nx >= w) ? outside : mask.at(nx, y);
        if (dilate ? s : !s) {
          v = dilate;
          break;
        }
      }
      pass.set(x, y, v);
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = !dilate;
      for (int d = -k; d <= k; ++d) {
        const int ny = y + d;
        const bool s = (ny < 0 || ny >= h) ? outside : pass.at(x, ny);
        if (dilate ? s : !s) {
          v = dilate;
          break;
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

}  // namespace

BinaryMask morph_dilate(const BinaryMask& mask, int kernel_half) {
  check_kernel(kernel_half);
  return square_filter(mask, kernel_half, true);
}

BinaryMask morph_erode(const BinaryMask& mask, int kernel_half) {
  check_kernel(kernel_half);
  return square_filter(mask, kernel_half, false);
}

BinaryMask morph_close(const BinaryMask& mask, int kernel_half) {
  return morph_erode(morph_dilate(mask, kernel_half), kernel_half);
}

// --- Contours ------------------------------------------------------------

namespace {

// Counter-clockwise on screen (y grows downward).
constexpr std::array<Point, 8> kRing = {Point{1, 0},  Point{1, -1}, Point{0, -1}, Point{-1, -1},
                                        Point{-1, 0}, Point{-1, 1}, Point{0, 1},  Point{1, 1}};

int ring_index(Point from, Point to) noexcept {
  const Point d{to.x - from.x, to.y - from.y};
  for (int i = 0; i < 8; ++i) {
    if (kRing[static_cast<std::size_t>(i)] == d) return i;
  }
  return -1;
}

// Suzuki-Abe outer border following, started at the first raster pixel of a
// component (whose west neighbour is therefore background).
std::vector<Point> trace_outer_border(const BinaryMask& m, Point start) {
  auto fg = [&](Point p) { return m.get(p.x, p.y); };

  // Clockwise search from the west neighbour for the first foreground pixel.
  Point first{};
  bool found = false;
  for (int step = 0; step < 8; ++step) {
    const int idx = (4 - step + 8) % 8;
    const Point q{start.x + kRing[static_cast<std::size_t>(idx)].x, start.y + kRing[static_cast<std::size_t>(idx)].y};
    if (fg(q)) {
      first = q;
      found = true;
      break;
    }
  }
  if (!found) return {start};

  std::vector<Point> border;
  Point prev = first;
  Point cur = start;
  for (;;) {
    border.push_back(cur);
    // Counter-clockwise search starting just after prev.
    const int from = ring_index(cur, prev);
    Point next = prev;
    for (int step = 1; step <= 8; ++step) {
      const int idx = (from + step) % 8;
      const Point q{cur.x + kRing[static_cast<std::size_t>(idx)].x, cur.y + kRing[static_cast<std::size_t>(idx)].y};
      if (fg(q)) {
        next = q;
        break;
      }
    }
    if (next == start && cur == first) break;
    prev = cur;
    cur = next;
    if (border.size() > 8 * static_cast<std::size_t>(m.width()) * static_cast<std::size_t>(m.height())) break;
  }
  return border;
}

}  // namespace

std::vector<Contour> find_contours(const BinaryMask& region, double min_area) {
  const int w = region.width();
  const int h = region.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  std::vector<Contour> out;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!region.at(x, y) || seen[region.index(x, y)]) continue;
      // Mark the whole component so only its first raster pixel starts a trace.
      seen[region.index(x, y)] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!region.get(nx, ny) || seen[region.index(nx, ny)]) continue;
            seen[region.index(nx, ny)] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
      Contour c;
      c.points = trace_outer_border(region, {x, y});
      if (c.points.size() < 3) continue;
      c.area = shoelace_area(c.points);
      if (c.area < min_area || c.area <= 0.0) continue;
      out.push_back(std::move(c));
    }
  }
  return out;
}

BinaryMask fill_contour(const Contour& contour, int width, int height) {
  BinaryMask out(width, height);
  const auto& pts = contour.points;
  const std::size_t n = pts.size();
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point a = pts[i];
      const Point b = pts[(i + 1) % n];
      if (a.y == b.y) continue;
      const bool spans = (a.y <= y && y < b.y) || (b.y <= y && y < a.y);
      if (!spans) continue;
      xs.push_back(a.x + static_cast<double>(y - a.y) * (b.x - a.x) / static_cast<double>(b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[i])));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[i + 1])));
      for (int x = x0; x <= x1; ++x) out.set(x, y);
    }
  }
  for (const Point& p : pts) {
    if (p.x >= 0 && p.y >= 0 && p.x < width && p.y < height) out.set(p.x, p.y);
  }
  return out;
}

const Contour* select_largest(const std::vector<Contour>& contours) noexcept {
  const Contour* best = nullptr;
  Point best_corner{};
  for (const auto& c : contours) {
    Point corner = *std::min_element(c.points.begin(), c.points.end(), [](Point a, Point b) {
      return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });
    if (!best || c.area > best->area ||
        (c.area == best->area && std::tie(corner.y, corner.x) < std::tie(best_corner.y, best_corner.x))) {
      best = &c;
      best_corner = corner;
    }
  }
  return best;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  std::vector<std::size_t> sizes;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y) || label[mask.index(x, y)] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      label[mask.index(x, y)] = id;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        ++sizes.back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!mask.get(p.x + dx, p.y + dy) || label[mask.index(p.x + dx, p.y + dy)] >= 0) continue;
            label[mask.index(p.x + dx, p.y + dy)] = id;
            stack.push_back({p.x + dx, p.y + dy});
          }
        }
      }
    }
  }
  BinaryMask out(w, h);
  if (sizes.empty()) return out;
  // First component wins ties (raster order).
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (label[mask.index(x, y)] == keep) out.set(x, y);
    }
  }
  return out;
}

BinaryMask refine_mask_boundary(const BinaryMask& mask, const FloatPlane& gray) {
  if (mask.width() != gray.width() || mask.height() != gray.height()) {
    raise(ErrorCode::ShapeMismatch, "boundary refinement needs a plane of the mask's extents");
  }
  constexpr int kReach = 3;
  const BinaryMask inner = morph_erode(mask, 1);
  const BinaryMask outer = morph_dilate(mask, 1);
  // Reference pixels sit kReach steps from the edge on either side.
  const BinaryMask core = morph_erode(mask, kReach - 1);
  const BinaryMask far = morph_dilate(mask, kReach - 1);
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask out = mask;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (inner.at(x, y) || !outer.at(x, y)) continue;
      double in_sum = 0.0, out_sum = 0.0;
      int in_n = 0, out_n = 0;
      for (int dy = -kReach; dy <= kReach; ++dy) {
        for (int dx = -kReach; dx <= kReach; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          if (core.at(sx, sy)) {
            in_sum += gray.at(sx, sy);
            ++in_n;
          } else if (!far.at(sx, sy)) {
            out_sum += gray.at(sx, sy);
            ++out_n;
          }
        }
      }
      if (in_n == 0 || out_n == 0) continue;
      const double v = gray.at(x, y);
      out.set(x, y, std::abs(v - in_sum / in_n) <= std::abs(v - out_sum / out_n));
    }
  }
  return out;
}

BinaryMask generate_mask(const RasterImage& img, const MaskParams& params) {
  const FloatPlane gray = to_plane(img);
  const FloatPlane blurred = gaussian_blur(gray, params.sigma, params.blur_radius);
  const BinaryMask edges = canny_edges(blurred, params.canny_low, params.canny_high);
  const BinaryMask joined = morph_close(morph_dilate(edges, params.dilate_half), params.close_half);

  const double min_area = params.min_area_fraction * static_cast<double>(img.pixel_count());
  const auto contours = find_contours(joined, min_area);
  const Contour* largest = select_largest(contours);
  if (!largest) raise(ErrorCode::NoContourFound, "no contour passed the area filter");

  BinaryMask filled = fill_contour(*largest, img.width(), img.height());
  const int shrink = params.shrink_half.value_or(params.dilate_half);
  if (shrink > 0) {
    BinaryMask shrunk = largest_component(morph_erode(filled, shrink));
    if (shrunk.any()) filled = std::move(shrunk);
  }
  if (params.refine_boundary) {
    BinaryMask refined = largest_component(refine_mask_boundary(filled, gray));
    if (refined.any()) filled = std::move(refined);
  }
  return filled;
}

double intersection_over_union(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    raise(ErrorCode::ShapeMismatch, "IoU of masks with different extents");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const bool p = a.at(x, y);
      const bool q = b.at(x, y);
      inter += (p && q) ? 1 : 0;
      uni += (p || q) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

RasterImage mask_to_image(const BinaryMask& mask) {
  RasterImage out(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.at(x, y) = mask.at(x, y) ? 255 : 0;
  }
  return out;
}

BinaryMask image_to_mask(const RasterImage& img) {
  BinaryMask out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      bool on = false;
      for (int c = 0; c < img.channels(); ++c) on = on || img.at(x, y, c) > 127;
      out.set(x, y, on);
    }
  }
  return out;
}

}  // namespace chrono_shield
