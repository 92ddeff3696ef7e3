#include "chrono_shield/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>
#include <thread>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

// --- PPM ---------------------------------------------------------------

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      raise(ErrorCode::MalformedFile, "PNM header: expected an unsigned integer");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) raise(ErrorCode::MalformedFile, "PNM header: value out of range");
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      raise(ErrorCode::MalformedFile, "PNM header: missing separator before raster");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    raise(ErrorCode::MalformedFile, "not a binary PPM/PGM (expected P6 or P5 magic)");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  PnmHeaderReader reader(bytes);
  reader.advance(2);
  const long width = reader.read_uint();
  const long height = reader.read_uint();
  const long maxval = reader.read_uint();
  reader.expect_single_space();
  if (width <= 0 || height <= 0) raise(ErrorCode::MalformedFile, "PNM header: zero extent");
  if (maxval > 255) raise(ErrorCode::UnsupportedVariant, "16-bit PNM is not supported");
  if (maxval != 255) raise(ErrorCode::UnsupportedVariant, "only maxval 255 is supported");

  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                           static_cast<std::size_t>(channels);
  if (bytes.size() - reader.pos() < need) {
    raise(ErrorCode::MalformedFile, "PNM raster truncated: need " + std::to_string(need) +
                                        " bytes, have " + std::to_string(bytes.size() - reader.pos()));
  }
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos() + need));
  return RasterImage(static_cast<int>(width), static_cast<int>(height), channels, std::move(data));
}

std::vector<std::uint8_t> encode_ppm(const RasterImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.pixel_count() * 3);
  auto src = img.data();
  if (img.channels() == 3) {
    out.insert(out.end(), src.begin(), src.end());
  } else {
    for (auto v : src) out.insert(out.end(), {v, v, v});
  }
  return out;
}

// --- PNG ---------------------------------------------------------------

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

std::vector<std::uint8_t> inflate_all(const std::vector<std::uint8_t>& compressed, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) raise(ErrorCode::MalformedFile, "zlib init failed");
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    raise(ErrorCode::MalformedFile, "PNG image data failed to inflate to the expected size");
  }
  return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPngSignature.size() ||
      !std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    raise(ErrorCode::MalformedFile, "missing PNG signature");
  }
  std::size_t pos = kPngSignature.size();
  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = -1, interlace = 0;
  bool seen_ihdr = false, seen_iend = false, has_trns = false;
  std::vector<std::uint8_t> palette;
  std::vector<std::uint8_t> idat;

  while (pos + 12 <= bytes.size()) {
    const std::uint32_t length = read_be32(bytes, pos);
    if (length > bytes.size() - pos - 12) raise(ErrorCode::MalformedFile, "PNG chunk truncated");
    const auto type = bytes.subspan(pos + 4, 4);
    const auto payload = bytes.subspan(pos + 8, length);
    const std::uint32_t stored_crc = read_be32(bytes, pos + 8 + length);
    const auto crc = crc32(0L, type.data(), 4);
    if (static_cast<std::uint32_t>(crc32(crc, payload.data(), length)) != stored_crc) {
      raise(ErrorCode::MalformedFile, "PNG chunk CRC mismatch");
    }
    const std::string tag(type.begin(), type.end());
    if (tag == "IHDR") {
      if (length != 13) raise(ErrorCode::MalformedFile, "IHDR has wrong length");
      width = read_be32(payload, 0);
      height = read_be32(payload, 4);
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      if (payload[10] != 0 || payload[11] != 0) raise(ErrorCode::MalformedFile, "unknown PNG compression/filter method");
      seen_ihdr = true;
    } else if (tag == "PLTE") {
      palette.assign(payload.begin(), payload.end());
    } else if (tag == "tRNS") {
      has_trns = true;
    } else if (tag == "IDAT") {
      idat.insert(idat.end(), payload.begin(), payload.end());
    } else if (tag == "IEND") {
      seen_iend = true;
      break;
    }
    pos += 12 + length;
  }
  if (!seen_ihdr || !seen_iend || idat.empty()) raise(ErrorCode::MalformedFile, "PNG is missing required chunks");
  if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24)) {
    raise(ErrorCode::MalformedFile, "PNG extent out of range");
  }
  if (bit_depth != 8) raise(ErrorCode::UnsupportedVariant, "only 8-bit PNG is supported");
  if (interlace != 0) raise(ErrorCode::UnsupportedVariant, "interlaced PNG is not supported");

  int stored_channels = 0;
  switch (color_type) {
    case 0: stored_channels = 1; break;
    case 2: stored_channels = 3; break;
    case 3:
      stored_channels = 1;
      if (has_trns) raise(ErrorCode::UnsupportedVariant, "palette PNG with transparency is not supported");
      if (palette.empty() || palette.size() % 3 != 0) raise(ErrorCode::MalformedFile, "bad PLTE chunk");
      break;
    case 4:
    case 6: raise(ErrorCode::UnsupportedVariant, "PNG with alpha channel is not supported");
    default: raise(ErrorCode::MalformedFile, "unknown PNG color type");
  }

  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(stored_channels);
  const auto raw = inflate_all(idat, (stride + 1) * height);

  std::vector<std::uint8_t> pixels(stride * height);
  const std::size_t bpp = static_cast<std::size_t>(stored_channels);
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* row = &pixels[y * stride];
    const std::uint8_t* prev = y > 0 ? &pixels[(y - 1) * stride] : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= bpp ? row[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= bpp) ? prev[i - bpp] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
        default: raise(ErrorCode::MalformedFile, "unknown PNG row filter");
      }
      row[i] = static_cast<std::uint8_t>(src[i] + pred);
    }
  }

  if (color_type == 3) {
    const std::size_t entries = palette.size() / 3;
    std::vector<std::uint8_t> rgb(pixels.size() * 3);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (pixels[i] >= entries) raise(ErrorCode::MalformedFile, "palette index out of range");
      std::copy_n(&palette[pixels[i] * 3], 3, &rgb[i * 3]);
    }
    return RasterImage(static_cast<int>(width), static_cast<int>(height), 3, std::move(rgb));
  }
  return RasterImage(static_cast<int>(width), static_cast<int>(height), stored_channels, std::move(pixels));
}

void append_chunk(std::vector<std::uint8_t>& out, const char* tag, std::span<const std::uint8_t> payload) {
  append_be32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), tag, tag + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = crc32(0L, &out[type_at], static_cast<uInt>(4 + payload.size()));
  append_be32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  const std::size_t stride = static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.channels());
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(img.height()));
  auto src = img.data();
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back(0);
    const auto row = src.subspan(static_cast<std::size_t>(y) * stride, stride);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_len);
  if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    raise(ErrorCode::IoError, "zlib compression failed");
  }
  packed.resize(packed_len);

  std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
  std::vector<std::uint8_t> ihdr;
  append_be32(ihdr, static_cast<std::uint32_t>(img.width()));
  append_be32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.insert(ihdr.end(), {8, static_cast<std::uint8_t>(img.channels() == 3 ? 2 : 0), 0, 0, 0});
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", packed);
  append_chunk(out, "IEND", {});
  return out;
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes, ImageFormat format) {
  return format == ImageFormat::png ? decode_png(bytes) : decode_pnm(bytes);
}

std::vector<std::uint8_t> encode_image(const RasterImage& img, ImageFormat format) {
  if (img.empty()) raise(ErrorCode::InvalidArgument, "cannot encode an empty image");
  return format == ImageFormat::png ? encode_png(img) : encode_ppm(img);
}

ImageFormat detect_format(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= kPngSignature.size() &&
      std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    return ImageFormat::png;
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
    return ImageFormat::ppm;
  }
  raise(ErrorCode::MalformedFile, "unrecognised image signature");
}

ImageFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" ? ImageFormat::png : ImageFormat::ppm;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) +
         "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) raise(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    raise(ErrorCode::IoError, "cannot move " + tmp.string() + " into place");
  }
}

RasterImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_image(bytes, detect_format(bytes));
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image(img, format_for_path(path)));
}

}  // namespace chrono_shield
