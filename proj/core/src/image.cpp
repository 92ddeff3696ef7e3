#include "chrono_shield/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

std::uint8_t quantize(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void check_extent(int width, int height, int channels) {
  if (width <= 0 || height <= 0) {
    raise(ErrorCode::InvalidArgument,
          "image extent must be positive, got " + std::to_string(width) + "x" +
              std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    raise(ErrorCode::InvalidArgument,
          "channel count must be 1 or 3, got " + std::to_string(channels));
  }
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  check_extent(width, height, channels);
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), 0);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_extent(width, height, channels);
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    raise(ErrorCode::InvalidArgument, "sample buffer length does not match extent");
  }
}

FloatPlane::FloatPlane(int width, int height, float fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) raise(ErrorCode::InvalidArgument, "plane extent must be positive");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

float FloatPlane::clamped(int x, int y) const noexcept {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return data_[index(x, y)];
}

FloatPlane to_plane(const RasterImage& gray) {
  const RasterImage g = to_grayscale(gray);
  FloatPlane plane(g.width(), g.height());
  auto src = g.data();
  auto dst = plane.data();
  std::transform(src.begin(), src.end(), dst.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return plane;
}

RasterImage to_raster(const FloatPlane& plane) {
  RasterImage out(plane.width(), plane.height(), 1);
  auto src = plane.data();
  auto dst = out.data();
  std::transform(src.begin(), src.end(), dst.begin(), [](float v) { return quantize(v); });
  return out;
}

RasterImage to_rgb(const RasterImage& img) {
  if (img.channels() == 3) return img;
  std::vector<std::uint8_t> rgb;
  rgb.reserve(img.pixel_count() * 3);
  for (auto v : img.data()) rgb.insert(rgb.end(), {v, v, v});
  return RasterImage(img.width(), img.height(), 3, std::move(rgb));
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels() == 1) return img;
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double luma = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = quantize(luma);
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (!(sigma > 0.0)) raise(ErrorCode::InvalidSigma, "sigma must be > 0");
  if (radius < 1) raise(ErrorCode::InvalidArgument, "blur radius must be >= 1");
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-(k * k) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (auto& w : taps) w /= sum;
  return taps;
}

FloatPlane gaussian_blur(const FloatPlane& plane, double sigma, int radius) {
  const auto taps = gaussian_kernel(sigma, radius);
  const int w = plane.width();
  const int h = plane.height();

  FloatPlane horizontal(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] * plane.clamped(x + k, y);
      }
      horizontal.at(x, y) = static_cast<float>(acc);
    }
  }

  FloatPlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] * horizontal.clamped(x, y + k);
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

RasterImage gaussian_blur(const RasterImage& gray, double sigma, int radius) {
  if (gray.channels() != 1) raise(ErrorCode::InvalidArgument, "gaussian_blur expects a 1-channel image");
  return to_raster(gaussian_blur(to_plane(gray), sigma, radius));
}

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) raise(ErrorCode::InvalidArgument, "resize target must be >= 1x1");
  if (out_w == img.width() && out_h == img.height()) return img;

  const int in_w = img.width();
  const int in_h = img.height();
  const int ch = img.channels();
  const double sx = static_cast<double>(in_w) / out_w;
  const double sy = static_cast<double>(in_h) / out_h;

  RasterImage out(out_w, out_h, ch);
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double tx = fx - x0;
      for (int c = 0; c < ch; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - tx) + img.at(x1, y0, c) * tx;
        const double bottom = img.at(x0, y1, c) * (1.0 - tx) + img.at(x1, y1, c) * tx;
        out.at(x, y, c) = quantize(top * (1.0 - ty) + bottom * ty);
      }
    }
  }
  return out;
}

}  // namespace chrono_shield
