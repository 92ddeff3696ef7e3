#include <gtest/gtest.h>
#include <zlib.h>

#include <cstring>
#include <string>

#include "chrono_shield/image_io.hpp"
#include "test_support.hpp"

using namespace chrono_shield;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size()))));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

struct PngSpec {
  int width = 0, height = 0;
  int bit_depth = 8;
  int color_type = 2;
  int interlace = 0;
  std::vector<std::uint8_t> samples;  // unfiltered, row-major
  int bpp = 3;                        // bytes per pixel
  std::vector<int> filters;           // per row; cycled
  std::vector<std::uint8_t> palette;
  bool trns = false;
};

// Independent PNG writer: applies the requested row filters by definition.
std::vector<std::uint8_t> build_png(const PngSpec& s) {
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(s.width));
  put_u32(ihdr, static_cast<std::uint32_t>(s.height));
  ihdr.insert(ihdr.end(), {static_cast<std::uint8_t>(s.bit_depth), static_cast<std::uint8_t>(s.color_type), 0, 0,
                           static_cast<std::uint8_t>(s.interlace)});
  put_chunk(out, "IHDR", ihdr);
  if (!s.palette.empty()) put_chunk(out, "PLTE", s.palette);
  if (s.trns) put_chunk(out, "tRNS", {0});

  const int stride = s.width * s.bpp;
  std::vector<std::uint8_t> raw;
  for (int y = 0; y < s.height; ++y) {
    const int f = s.filters.empty() ? 0 : s.filters[static_cast<std::size_t>(y) % s.filters.size()];
    raw.push_back(static_cast<std::uint8_t>(f));
    for (int i = 0; i < stride; ++i) {
      auto px = [&](int row, int col) -> int {
        if (row < 0 || col < 0) return 0;
        return s.samples[static_cast<std::size_t>(row * stride + col)];
      };
      const int x = px(y, i), a = px(y, i - s.bpp), b = px(y - 1, i), c = px(y - 1, i - s.bpp);
      int v = x;
      switch (f) {
        case 1: v = x - a; break;
        case 2: v = x - b; break;
        case 3: v = x - (a + b) / 2; break;
        case 4: v = x - paeth(a, b, c); break;
        default: break;
      }
      raw.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
  }
  uLongf cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(cap);
  compress(z.data(), &cap, raw.data(), static_cast<uLong>(raw.size()));
  z.resize(cap);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

PngSpec rgb_spec(int w, int h, Rng& rng) {
  PngSpec s;
  s.width = w;
  s.height = h;
  s.samples.resize(static_cast<std::size_t>(w * h * 3));
  for (auto& v : s.samples) v = static_cast<std::uint8_t>(rng.below(256));
  return s;
}

}  // namespace

TEST(Ppm, DecodesTwoPixelHeader) {
  auto bytes = bytes_of("P6\n2 1\n255\n");
  bytes.insert(bytes.end(), {1, 2, 3, 4, 5, 6});
  const RasterImage img = decode_image(bytes, ImageFormat::ppm);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 1);
  EXPECT_EQ(img.channels(), 3);
  EXPECT_EQ(std::vector<std::uint8_t>(img.data().begin(), img.data().end()),
            (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6}));
}

TEST(Ppm, CanonicalEncodingOfBlackPixel) {
  const auto bytes = encode_image(RasterImage(1, 1, 3), ImageFormat::ppm);
  const std::string expected("P6\n1 1\n255\n\0\0\0", 14);
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), expected);
}

TEST(Ppm, HeaderWithCommentsAndExtraSpace) {
  auto bytes = bytes_of("P6 # made by hand\n 1\t1 # size\n255\n");
  bytes.insert(bytes.end(), {9, 8, 7});
  const RasterImage img = decode_image(bytes, ImageFormat::ppm);
  EXPECT_EQ(img.at(0, 0, 2), 7);
  // Re-encoding drops the comments.
  const auto canon = encode_image(img, ImageFormat::ppm);
  EXPECT_EQ(std::string(canon.begin(), canon.begin() + 11), "P6\n1 1\n255\n");
}

TEST(Ppm, GrayscaleIsReplicated) {
  const RasterImage g(2, 1, 1, {10, 250});
  const auto bytes = encode_image(g, ImageFormat::ppm);
  const std::vector<std::uint8_t> raster(bytes.end() - 6, bytes.end());
  EXPECT_EQ(raster, (std::vector<std::uint8_t>{10, 10, 10, 250, 250, 250}));
}

TEST(Ppm, ReadsP5AsSingleChannel) {
  auto bytes = bytes_of("P5\n3 1\n255\n");
  bytes.insert(bytes.end(), {0, 128, 255});
  const RasterImage img = decode_image(bytes, ImageFormat::ppm);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(img.at(1, 0), 128);
}

TEST(Ppm, RoundTripIsIdentityOnBytesAndPixels) {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + static_cast<int>(rng.below(20));
    const int h = 1 + static_cast<int>(rng.below(20));
    const RasterImage img = cs_test::random_image(w, h, 3, rng);
    const auto bytes = encode_image(img, ImageFormat::ppm);
    const RasterImage back = decode_image(bytes, ImageFormat::ppm);
    EXPECT_EQ(back, img);
    EXPECT_EQ(encode_image(back, ImageFormat::ppm), bytes);
  }
}

TEST(Ppm, TruncatedRasterIsMalformed) {
  // 4x4 RGB declares 48 raster bytes; the header is 11 bytes, so 33 bytes total is short.
  auto bytes = bytes_of("P6\n4 4\n255\n");
  bytes.resize(33, 0);
  EXPECT_CS_ERROR(decode_image(bytes, ImageFormat::ppm), ErrorCode::MalformedFile);
}

TEST(Ppm, BadMagicAndHeaders) {
  EXPECT_CS_ERROR(decode_image(bytes_of("P3\n1 1\n255\n0 0 0"), ImageFormat::ppm), ErrorCode::MalformedFile);
  EXPECT_CS_ERROR(decode_image(bytes_of("P6\n1\n"), ImageFormat::ppm), ErrorCode::MalformedFile);
  EXPECT_CS_ERROR(decode_image(bytes_of("P6\n0 1\n255\n"), ImageFormat::ppm), ErrorCode::MalformedFile);
}

TEST(Ppm, SixteenBitIsUnsupported) {
  auto bytes = bytes_of("P6\n1 1\n65535\n");
  bytes.resize(bytes.size() + 6, 0);
  EXPECT_CS_ERROR(decode_image(bytes, ImageFormat::ppm), ErrorCode::UnsupportedVariant);
}

TEST(Png, RoundTripRgbAndGray) {
  Rng rng(5);
  const RasterImage rgb = cs_test::random_image(13, 7, 3, rng);
  EXPECT_EQ(decode_image(encode_image(rgb, ImageFormat::png), ImageFormat::png), rgb);
  const RasterImage gray = cs_test::random_image(5, 11, 1, rng);
  EXPECT_EQ(decode_image(encode_image(gray, ImageFormat::png), ImageFormat::png), gray);
}

TEST(Png, DecodesEveryRowFilter) {
  Rng rng(6);
  PngSpec spec = rgb_spec(9, 10, rng);
  spec.filters = {0, 1, 2, 3, 4};
  const RasterImage img = decode_image(build_png(spec), ImageFormat::png);
  EXPECT_EQ(std::vector<std::uint8_t>(img.data().begin(), img.data().end()), spec.samples);
}

TEST(Png, DecodesGrayWithPaethOnly) {
  Rng rng(8);
  PngSpec spec;
  spec.width = 6;
  spec.height = 4;
  spec.color_type = 0;
  spec.bpp = 1;
  spec.filters = {4};
  spec.samples.resize(24);
  for (auto& v : spec.samples) v = static_cast<std::uint8_t>(rng.below(256));
  const RasterImage img = decode_image(build_png(spec), ImageFormat::png);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(std::vector<std::uint8_t>(img.data().begin(), img.data().end()), spec.samples);
}

TEST(Png, ExpandsOpaquePalette) {
  PngSpec spec;
  spec.width = 2;
  spec.height = 1;
  spec.color_type = 3;
  spec.bpp = 1;
  spec.samples = {1, 0};
  spec.palette = {10, 20, 30, 200, 100, 50};
  const RasterImage img = decode_image(build_png(spec), ImageFormat::png);
  ASSERT_EQ(img.channels(), 3);
  EXPECT_EQ(img.at(0, 0, 0), 200);
  EXPECT_EQ(img.at(1, 0, 2), 30);
}

TEST(Png, UnsupportedVariants) {
  Rng rng(7);
  PngSpec interlaced = rgb_spec(2, 2, rng);
  interlaced.interlace = 1;
  EXPECT_CS_ERROR(decode_image(build_png(interlaced), ImageFormat::png), ErrorCode::UnsupportedVariant);

  PngSpec deep = rgb_spec(2, 2, rng);
  deep.bit_depth = 16;
  deep.bpp = 6;
  deep.samples.resize(24, 0);
  EXPECT_CS_ERROR(decode_image(build_png(deep), ImageFormat::png), ErrorCode::UnsupportedVariant);

  PngSpec alpha = rgb_spec(2, 2, rng);
  alpha.color_type = 6;
  alpha.bpp = 4;
  alpha.samples.resize(16, 255);
  EXPECT_CS_ERROR(decode_image(build_png(alpha), ImageFormat::png), ErrorCode::UnsupportedVariant);

  PngSpec paletted;
  paletted.width = 1;
  paletted.height = 1;
  paletted.color_type = 3;
  paletted.bpp = 1;
  paletted.samples = {0};
  paletted.palette = {1, 2, 3};
  paletted.trns = true;
  EXPECT_CS_ERROR(decode_image(build_png(paletted), ImageFormat::png), ErrorCode::UnsupportedVariant);
}

TEST(Png, CorruptionIsMalformed) {
  Rng rng(2);
  auto bytes = build_png(rgb_spec(3, 3, rng));
  auto bad_crc = bytes;
  bad_crc[8 + 8 + 3] ^= 0x40;  // inside the IHDR payload
  EXPECT_CS_ERROR(decode_image(bad_crc, ImageFormat::png), ErrorCode::MalformedFile);
  auto bad_sig = bytes;
  bad_sig[1] = 'Q';
  EXPECT_CS_ERROR(decode_image(bad_sig, ImageFormat::png), ErrorCode::MalformedFile);
  bytes.resize(bytes.size() - 20);
  EXPECT_CS_ERROR(decode_image(bytes, ImageFormat::png), ErrorCode::MalformedFile);
}

TEST(ImageFiles, SaveLoadByExtensionAndSniffing) {
  cs_test::TempDir dir("io");
  Rng rng(12);
  const RasterImage img = cs_test::random_image(6, 4, 3, rng);
  save_image(img, dir / "a.png");
  save_image(img, dir / "a.ppm");
  EXPECT_EQ(load_image(dir / "a.png"), img);
  EXPECT_EQ(load_image(dir / "a.ppm"), img);
  EXPECT_EQ(detect_format(read_file(dir / "a.png")), ImageFormat::png);
  EXPECT_EQ(detect_format(read_file(dir / "a.ppm")), ImageFormat::ppm);
  EXPECT_CS_ERROR(load_image(dir / "missing.png"), ErrorCode::IoError);
}
