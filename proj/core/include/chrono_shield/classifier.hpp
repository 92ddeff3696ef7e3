#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "chrono_shield/image.hpp"

namespace chrono_shield {

inline constexpr int kNumClasses = 16;

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> extents);

  std::size_t size() const noexcept { return data.size(); }
  static std::size_t volume(std::span<const std::uint32_t> extents) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Three conv(3x3, stride 1, pad 1) -> ReLU -> maxpool(2) stages, then one
// fully-connected layer and softmax.
struct Architecture {
  int input_side = 32;
  int in_channels = 3;
  std::array<int, 3> conv_channels{16, 32, 64};
  int num_classes = kNumClasses;

  int flattened_dim() const noexcept {
    const int side = input_side / 8;
    return side * side * conv_channels[2];
  }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ConvLayer {
  Tensor kernel;  // out x in x 3 x 3
  Tensor bias;    // out
  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ModelWeights {
  Architecture arch;
  std::array<ConvLayer, 3> conv;
  Tensor fc_weight;  // num_classes x flattened
  Tensor fc_bias;    // num_classes

  ModelWeights() = default;
  // Zero-initialised tensors shaped for arch. Throws ShapeMismatch if the
  // architecture itself is inconsistent (input side not divisible by 8, ...).
  explicit ModelWeights(const Architecture& arch);

  // Throws ShapeMismatch unless every tensor matches arch.
  void validate() const;

  std::size_t parameter_count() const noexcept;
  // Canonical order: conv1.kernel, conv1.bias, ..., fc.weight, fc.bias.
  std::vector<const Tensor*> tensors() const;
  std::vector<Tensor*> tensors();

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

struct Prediction {
  int label = 0;
  double confidence = 0.0;
  std::vector<double> distribution;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Softmax over logits; label is the lowest-index argmax.
Prediction prediction_from_logits(std::span<const double> logits);

// Resize to input_side (bilinear) and scale to [0,1], channel-major.
std::vector<float> preprocess(const RasterImage& img, int input_side);

// Throws ShapeMismatch for inconsistent weights or a non-RGB input.
Prediction forward(const ModelWeights& weights, const RasterImage& img);
Prediction forward_preprocessed(const ModelWeights& weights, std::span<const float> input);

// Black-box view handed to attackers.
using ScoringFunction = std::function<Prediction(const RasterImage&)>;
ScoringFunction make_victim(const ModelWeights& weights);

// Uniform He-style initialisation, zero biases.
ModelWeights init_weights(const Architecture& arch, std::uint64_t seed);

struct LabeledImage {
  RasterImage image;
  int label = 0;
};

struct TrainConfig {
  Architecture arch;
  int epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainResult {
  ModelWeights weights;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean training loss observed during each epoch
};

// epoch is 1-based.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Minibatch SGD with momentum on softmax cross-entropy. Gradients are summed
// in sample order, so a fixed seed reproduces the same trajectory.
// Throws EmptyDataset, LabelOutOfRange, InvalidConfig.
TrainResult train(std::span<const LabeledImage> dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
// Same, continuing from explicit initial weights.
TrainResult train_from(ModelWeights initial, std::span<const LabeledImage> dataset,
                       const TrainConfig& config, const EpochCallback& on_epoch = {});

double mean_loss(const ModelWeights& weights, std::span<const LabeledImage> dataset);
double accuracy(const ModelWeights& weights, std::span<const LabeledImage> dataset);

// Gradient of the cross-entropy loss for one sample in double precision,
// flattened in canonical tensor order.
std::vector<double> loss_gradient(const ModelWeights& weights, const LabeledImage& sample);
double sample_loss(const ModelWeights& weights, const LabeledImage& sample);

struct GradCheckOptions {
  // 0 checks every parameter.
  std::size_t sample_params = 600;
  std::uint64_t seed = 11;
  // Skip parameters whose +-epsilon probe flips a ReLU or a max-pool winner;
  // the central difference straddles a kink there. Sampled runs draw a
  // replacement from the same tensor.
  bool skip_kinks = true;
  // Test hook: rewrite the analytic gradient before comparison. The index
  // range of each tensor is given by tensor_offsets().
  std::function<void(std::vector<double>&)> tamper;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t params_checked = 0;
  std::size_t kinks_skipped = 0;
  double analytic_norm = 0.0;
};

// Central differences in double precision against loss_gradient, over
// parameters where the loss is smooth within +-epsilon.
GradCheckResult grad_check(const ModelWeights& weights, const LabeledImage& sample, double epsilon,
                           const GradCheckOptions& options = {});

// Start offset of each canonical tensor in the flattened parameter vector,
// plus a final entry equal to parameter_count().
std::vector<std::size_t> tensor_offsets(const ModelWeights& weights);

// Versioned binary weight file ("CSW1", version 1, CRC32 trailer).
std::vector<std::uint8_t> save_weights(const ModelWeights& weights);
// Throws BadMagic, VersionUnsupported, ChecksumMismatch, ShapeMismatch.
ModelWeights load_weights(std::span<const std::uint8_t> bytes);

}  // namespace chrono_shield
