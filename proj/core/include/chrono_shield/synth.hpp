#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/image.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/rng.hpp"

namespace chrono_shield {

// Display names of the 16 sign classes, indexed by label.
const std::array<std::string_view, kNumClasses>& class_names() noexcept;
std::string_view class_name(int label);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Everything about a rendering that is not the sign's identity.
struct Nuisance {
  double offset_x = 0.0;    // fraction of the frame, +-0.15
  double offset_y = 0.0;
  double scale = 0.75;      // sign extent as a fraction of the frame, 0.6-0.9
  double rotation_deg = 0;  // +-10
  double brightness = 1.0;  // 0.8-1.2
  Rgb background_a{110, 150, 190};
  Rgb background_b{90, 120, 90};
  double gradient_angle = 0.0;  // radians
  double noise_amplitude = 6.0;
  std::uint64_t noise_seed = 0;
};

Nuisance sample_nuisance(Rng& rng);

struct SignRender {
  RasterImage image;
  BinaryMask face;  // pixels whose centers fall inside the sign outline
};

SignRender render_sign(int label, const Nuisance& nuisance, int side);

enum class Split { train, test };
std::string_view to_string(Split s) noexcept;

struct DatasetItem {
  std::string id;
  RasterImage image;
  int label = 0;
  Split split = Split::train;
};

struct LabeledImageSet {
  std::vector<DatasetItem> items;

  std::vector<LabeledImage> split(Split s) const;
  std::vector<const DatasetItem*> items_in(Split s) const;
};

struct SynthConfig {
  int train_per_class = 150;
  int test_per_class = 6;
  int image_side = 64;
  std::uint64_t seed = 7;
};

// Deterministic under the seed. Throws InvalidConfig.
LabeledImageSet synth_dataset(const SynthConfig& config);

// dir/index.csv ("id,split,label,path") plus one PNG per item.
void save_dataset(const LabeledImageSet& set, const std::filesystem::path& dir);
// Throws MissingArchive, ManifestMalformed, LabelOutOfRange, EmptyDataset.
LabeledImageSet load_dataset(const std::filesystem::path& dir);

}  // namespace chrono_shield
