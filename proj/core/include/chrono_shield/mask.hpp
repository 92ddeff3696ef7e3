#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "chrono_shield/image.hpp"

namespace chrono_shield {

struct Point {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Point&, const Point&) = default;
};

// Per-pixel boolean region, row-major. true marks the sign surface.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool at(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_[index(x, y)] = v ? 1 : 0; }
  // Out-of-range reads are false.
  bool get(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && at(x, y);
  }

  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }

  struct Box {
    int x0, y0, x1, y1;  // inclusive
  };
  // Tight bounding box of true bits; nullopt for an all-false mask.
  std::optional<Box> bounding_box() const noexcept;

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Contour {
  std::vector<Point> points;  // closed, 8-connected, traced clockwise in image coordinates
  double area = 0.0;          // |shoelace(points)|
};

double shoelace_area(const std::vector<Point>& points) noexcept;

struct MaskParams {
  double sigma = 1.4;
  int blur_radius = 2;
  double canny_low = 50.0;
  double canny_high = 150.0;
  int dilate_half = 1;
  int close_half = 2;
  // Fraction of the image area below which contours are discarded.
  double min_area_fraction = 0.01;
  // Erosion applied to the filled contour to take back the outward growth the
  // edge dilation adds; defaults to dilate_half.
  std::optional<int> shrink_half;
  // Reassign pixels within one step of the mask edge to whichever side
  // (deep interior or far exterior) their local gray level is closer to.
  bool refine_boundary = true;
};

// Sobel on a clamp-to-edge plane, L2 magnitude, 4-bin NMS, hysteresis through
// 8-neighbours. The 1-pixel frame is never marked. Throws InvalidThresholds
// unless 0 < low < high.
BinaryMask canny_edges(const FloatPlane& img, double low_thresh, double high_thresh);
BinaryMask canny_edges(const RasterImage& gray, double low_thresh, double high_thresh);

// Square (2k+1)x(2k+1) structuring element. Pixels outside the frame are
// treated as false for dilation and true for erosion, so closing never eats
// into the border.
BinaryMask morph_dilate(const BinaryMask& mask, int kernel_half);
BinaryMask morph_erode(const BinaryMask& mask, int kernel_half);
BinaryMask morph_close(const BinaryMask& mask, int kernel_half);

// Outer boundary of every 8-connected component whose shoelace area is at
// least min_area. Components of fewer than 3 boundary points are dropped.
// Ordered by the raster position of each component's first pixel.
std::vector<Contour> find_contours(const BinaryMask& region, double min_area = 0.0);

// Even-odd scanline fill (sampled at pixel centers) plus the boundary pixels.
BinaryMask fill_contour(const Contour& contour, int width, int height);

// Largest-area contour; ties go to the lexicographically smallest top-left point.
const Contour* select_largest(const std::vector<Contour>& contours) noexcept;

// Boundary pass used by generate_mask: each pixel within 1 px of the mask
// edge joins the mask iff its gray level is at least as close to the mean of
// nearby pixels >= 3 px inside as to the mean of those >= 3 px outside.
BinaryMask refine_mask_boundary(const BinaryMask& mask, const FloatPlane& gray);

// grayscale -> blur -> canny -> dilate -> close -> contours -> largest -> fill.
// Throws NoContourFound when nothing survives the area filter.
BinaryMask generate_mask(const RasterImage& img, const MaskParams& params = {});

// Largest 8-connected component of a mask (empty mask for empty input).
BinaryMask largest_component(const BinaryMask& mask);

double intersection_over_union(const BinaryMask& a, const BinaryMask& b);

// 0/255 single-channel raster and back (any sample > 127 is true).
RasterImage mask_to_image(const BinaryMask& mask);
BinaryMask image_to_mask(const RasterImage& img);

}  // namespace chrono_shield
