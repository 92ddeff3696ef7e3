#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chrono_shield {

// Interleaved 8-bit raster, 1 (gray) or 3 (RGB) channels, row-major.
class RasterImage {
 public:
  RasterImage() = default;
  // Zero-filled image. Throws InvalidArgument on zero extent or bad channel count.
  RasterImage(int width, int height, int channels);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

// Single-channel floating-point plane used for blur and gradient math.
class FloatPlane {
 public:
  FloatPlane() = default;
  FloatPlane(int width, int height, float fill = 0.0f);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  float at(int x, int y) const noexcept { return data_[index(x, y)]; }
  float& at(int x, int y) noexcept { return data_[index(x, y)]; }

  // Clamp-to-edge read.
  float clamped(int x, int y) const noexcept;

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

FloatPlane to_plane(const RasterImage& gray);
// Rounds and clamps each sample into [0, 255].
RasterImage to_raster(const FloatPlane& plane);

// Replicates a gray sample into three channels; RGB input is returned unchanged.
RasterImage to_rgb(const RasterImage& img);

// ITU-R 601 luma. A 1-channel input is returned unchanged.
RasterImage to_grayscale(const RasterImage& img);

// Normalized 1-D Gaussian taps at offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma, int radius);

// Separable blur, clamp-to-edge borders. Throws InvalidSigma when sigma <= 0
// and InvalidArgument when radius < 1.
FloatPlane gaussian_blur(const FloatPlane& plane, double sigma, int radius);
RasterImage gaussian_blur(const RasterImage& gray, double sigma, int radius);

// Bilinear resampling with half-pixel-center mapping.
RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h);

}  // namespace chrono_shield
