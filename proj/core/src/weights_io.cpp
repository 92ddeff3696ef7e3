#include <zlib.h>

#include <bit>
#include <cstring>
#include <string>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) raise(ErrorCode::ShapeMismatch, "weight payload ends inside a tensor");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_weights(const ModelWeights& weights) {
  weights.validate();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  const auto tensors = weights.tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    out.push_back(static_cast<std::uint8_t>(t->shape.size()));
    for (auto e : t->shape) put_u32(out, e);
    for (float v : t->data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  return out;
}

ModelWeights load_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    raise(ErrorCode::BadMagic, "not a CSW1 weight file");
  }
  if (bytes.size() < 16) raise(ErrorCode::ChecksumMismatch, "weight file too short for header and trailer");
  const auto body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  const std::uint32_t stored = trailer.u32();
  Reader header(bytes.subspan(4, 4));
  const std::uint32_t version = header.u32();
  if (version != kVersion) raise(ErrorCode::VersionUnsupported, "weight file version " + std::to_string(version));
  if (static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size()))) != stored) {
    raise(ErrorCode::ChecksumMismatch, "CRC32 trailer does not match the payload");
  }

  Reader in(body.subspan(8));
  const std::uint32_t count = in.u32();
  if (count != 8) raise(ErrorCode::ShapeMismatch, "expected 8 tensors, found " + std::to_string(count));
  std::vector<Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t rank = in.u8();
    std::vector<std::uint32_t> shape;
    for (std::uint8_t r = 0; r < rank; ++r) shape.push_back(in.u32());
    Tensor t(shape);
    for (float& v : t.data) v = in.f32();
    loaded.push_back(std::move(t));
  }
  if (!in.done()) raise(ErrorCode::ShapeMismatch, "trailing bytes after the last tensor");

  // Recover the architecture from the tensor shapes, then let validate() check the chain.
  auto dims_ok = [&](std::size_t i, std::size_t rank) { return loaded[i].shape.size() == rank; };
  for (std::size_t l = 0; l < 3; ++l) {
    if (!dims_ok(2 * l, 4) || !dims_ok(2 * l + 1, 1)) raise(ErrorCode::ShapeMismatch, "conv tensor rank");
  }
  if (!dims_ok(6, 2) || !dims_ok(7, 1)) raise(ErrorCode::ShapeMismatch, "fc tensor rank");
  Architecture arch;
  arch.in_channels = static_cast<int>(loaded[0].shape[1]);
  for (std::size_t l = 0; l < 3; ++l) arch.conv_channels[l] = static_cast<int>(loaded[2 * l].shape[0]);
  arch.num_classes = static_cast<int>(loaded[6].shape[0]);
  const auto spatial = loaded[6].shape[1] / std::max<std::uint32_t>(1, loaded[4].shape[0]);
  int side = 0;
  while ((side + 1) * (side + 1) <= static_cast<int>(spatial)) ++side;
  arch.input_side = side * 8;
  if (side * side * arch.conv_channels[2] != static_cast<int>(loaded[6].shape[1]) || side == 0) {
    raise(ErrorCode::ShapeMismatch, "fc input dimension is not a flattened square feature map");
  }

  ModelWeights w(arch);
  auto slots = w.tensors();
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = std::move(loaded[i]);
  w.validate();
  return w;
}

}  // namespace chrono_shield
