#include "chrono_shield/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "chrono_shield/error.hpp"
#include "chrono_shield/rng.hpp"

namespace chrono_shield {

Tensor::Tensor(std::vector<std::uint32_t> extents)
    : shape(std::move(extents)), data(volume(shape), 0.0f) {}

std::size_t Tensor::volume(std::span<const std::uint32_t> extents) noexcept {
  std::size_t v = 1;
  for (auto e : extents) v *= e;
  return v;
}

namespace {

void check_architecture(const Architecture& arch) {
  if (arch.input_side < 8 || arch.input_side % 8 != 0) {
    raise(ErrorCode::ShapeMismatch, "input side must be a positive multiple of 8, got " +
                                        std::to_string(arch.input_side));
  }
  if (arch.in_channels < 1 || arch.num_classes < 2) raise(ErrorCode::ShapeMismatch, "bad channel/class count");
  for (int c : arch.conv_channels) {
    if (c < 1) raise(ErrorCode::ShapeMismatch, "conv channel count must be positive");
  }
}

std::vector<std::uint32_t> u32s(std::initializer_list<int> v) {
  std::vector<std::uint32_t> out;
  for (int x : v) out.push_back(static_cast<std::uint32_t>(x));
  return out;
}

}  // namespace

ModelWeights::ModelWeights(const Architecture& a) : arch(a) {
  check_architecture(arch);
  int in = arch.in_channels;
  for (std::size_t l = 0; l < 3; ++l) {
    const int out = arch.conv_channels[l];
    conv[l].kernel = Tensor(u32s({out, in, 3, 3}));
    conv[l].bias = Tensor(u32s({out}));
    in = out;
  }
  fc_weight = Tensor(u32s({arch.num_classes, arch.flattened_dim()}));
  fc_bias = Tensor(u32s({arch.num_classes}));
}

void ModelWeights::validate() const {
  check_architecture(arch);
  const ModelWeights expected(arch);
  const auto want = expected.tensors();
  const auto have = tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->shape != have[i]->shape || have[i]->data.size() != Tensor::volume(have[i]->shape)) {
      raise(ErrorCode::ShapeMismatch, "tensor " + std::to_string(i) + " does not match the architecture");
    }
  }
}

std::size_t ModelWeights::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

std::vector<const Tensor*> ModelWeights::tensors() const {
  return {&conv[0].kernel, &conv[0].bias, &conv[1].kernel, &conv[1].bias,
          &conv[2].kernel, &conv[2].bias, &fc_weight,      &fc_bias};
}

std::vector<Tensor*> ModelWeights::tensors() {
  return {&conv[0].kernel, &conv[0].bias, &conv[1].kernel, &conv[1].bias,
          &conv[2].kernel, &conv[2].bias, &fc_weight,      &fc_bias};
}

std::vector<std::size_t> tensor_offsets(const ModelWeights& weights) {
  std::vector<std::size_t> offsets{0};
  for (const Tensor* t : weights.tensors()) offsets.push_back(offsets.back() + t->size());
  return offsets;
}

Prediction prediction_from_logits(std::span<const double> logits) {
  Prediction p;
  const double peak = *std::max_element(logits.begin(), logits.end());
  p.distribution.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p.distribution[i] = std::exp(logits[i] - peak);
    sum += p.distribution[i];
  }
  for (auto& v : p.distribution) v /= sum;
  p.label = static_cast<int>(std::max_element(p.distribution.begin(), p.distribution.end()) -
                             p.distribution.begin());
  p.confidence = p.distribution[static_cast<std::size_t>(p.label)];
  return p;
}

std::vector<float> preprocess(const RasterImage& img, int input_side) {
  if (img.channels() != 3) raise(ErrorCode::ShapeMismatch, "classifier expects an RGB image");
  const RasterImage sized = resize_bilinear(img, input_side, input_side);
  const std::size_t plane = static_cast<std::size_t>(input_side) * static_cast<std::size_t>(input_side);
  std::vector<float> out(plane * 3);
  auto src = sized.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(src[i * 3 + c]) / 255.0f;
  }
  return out;
}

// --- network math --------------------------------------------------------

namespace {

template <typename T>
struct Params {
  std::array<const T*, 3> kernel{};
  std::array<const T*, 3> bias{};
  const T* fc_w = nullptr;
  const T* fc_b = nullptr;
};

template <typename T>
Params<T> view_params(const std::vector<T>& flat, const std::vector<std::size_t>& off) {
  Params<T> p;
  for (std::size_t l = 0; l < 3; ++l) {
    p.kernel[l] = flat.data() + off[2 * l];
    p.bias[l] = flat.data() + off[2 * l + 1];
  }
  p.fc_w = flat.data() + off[6];
  p.fc_b = flat.data() + off[7];
  return p;
}

template <typename T>
std::vector<T> flatten(const ModelWeights& w) {
  std::vector<T> flat;
  flat.reserve(w.parameter_count());
  for (const Tensor* t : w.tensors()) {
    for (float v : t->data) flat.push_back(static_cast<T>(v));
  }
  return flat;
}

template <typename T>
void unflatten(const std::vector<T>& flat, ModelWeights& w) {
  std::size_t i = 0;
  for (Tensor* t : w.tensors()) {
    for (float& v : t->data) v = static_cast<float>(flat[i++]);
  }
}

template <typename T>
struct Workspace {
  std::array<int, 3> side{};   // spatial side entering each conv
  std::array<int, 3> in_ch{};
  std::array<int, 3> out_ch{};
  std::array<std::vector<T>, 3> input;   // conv inputs (layer 0 = image)
  std::array<std::vector<T>, 3> col;     // im2col of input: (in*9) x plane
  std::array<std::vector<T>, 3> active;  // relu(conv) at full resolution
  std::array<std::vector<int>, 3> argmax;
  std::vector<T> flat;  // final pooled features
  std::vector<T> logits;
  // Backward scratch.
  std::vector<T> col_t, dcol, dact, dinput, dpooled;

  explicit Workspace(const Architecture& arch) {
    int s = arch.input_side;
    int c = arch.in_channels;
    for (std::size_t l = 0; l < 3; ++l) {
      side[l] = s;
      in_ch[l] = c;
      out_ch[l] = arch.conv_channels[l];
      input[l].assign(static_cast<std::size_t>(c * s * s), T(0));
      col[l].assign(static_cast<std::size_t>(c * 9 * s * s), T(0));
      active[l].assign(static_cast<std::size_t>(out_ch[l] * s * s), T(0));
      argmax[l].assign(static_cast<std::size_t>(out_ch[l] * (s / 2) * (s / 2)), 0);
      c = out_ch[l];
      s /= 2;
    }
    flat.assign(static_cast<std::size_t>(arch.flattened_dim()), T(0));
    logits.assign(static_cast<std::size_t>(arch.num_classes), T(0));
  }
};

// Row k = c*9 + ky*3 + kx of col holds input channel c shifted by (ky-1, kx-1),
// zero outside the frame.
template <typename T>
void im2col(const T* in, int channels, int side, T* col) {
  const int plane = side * side;
  for (int c = 0; c < channels; ++c) {
    const T* src = in + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + ((c * 3 + ky) * 3 + kx) * plane;
        for (int y = 0; y < side; ++y) {
          const int sy = y + ky - 1;
          T* drow = dst + y * side;
          if (sy < 0 || sy >= side) {
            std::fill(drow, drow + side, T(0));
            continue;
          }
          const T* srow = src + sy * side;
          for (int x = 0; x < side; ++x) {
            const int sx = x + kx - 1;
            drow[x] = sx >= 0 && sx < side ? srow[sx] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int side, T* in) {
  const int plane = side * side;
  std::fill(in, in + channels * plane, T(0));
  for (int c = 0; c < channels; ++c) {
    T* dst = in + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + ((c * 3 + ky) * 3 + kx) * plane;
        for (int y = 0; y < side; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= side) continue;
          const T* srow = src + y * side;
          T* drow = dst + sy * side;
          const int x_lo = std::max(0, 1 - kx);
          const int x_hi = std::min(side, side + 1 - kx);
          for (int x = x_lo; x < x_hi; ++x) drow[x + kx - 1] += srow[x];
        }
      }
    }
  }
}

// 3x3, stride 1, zero pad 1, as kernel (outs x K) times col (K x plane).
template <typename T>
void conv3x3(const T* col, int channels, int side, const T* kernel, const T* bias, int outs, T* out) {
  const int plane = side * side;
  const int taps = channels * 9;
  for (int o = 0; o < outs; ++o) {
    T* dst = out + o * plane;
    std::fill(dst, dst + plane, bias[o]);
    const T* k = kernel + o * taps;
    for (int t = 0; t < taps; ++t) {
      const T wv = k[t];
      const T* src = col + t * plane;
      for (int i = 0; i < plane; ++i) dst[i] += wv * src[i];
    }
  }
}

// Accumulates kernel/bias gradients; writes the input gradient when din != nullptr.
template <typename T>
void conv3x3_backward(Workspace<T>& ws, const T* col, int channels, int side, const T* kernel, const T* dout,
                      int outs, T* dkernel, T* dbias, T* din) {
  const int plane = side * side;
  const int taps = channels * 9;
  auto& col_t = ws.col_t;
  col_t.resize(static_cast<std::size_t>(taps * plane));
  for (int t = 0; t < taps; ++t) {
    for (int i = 0; i < plane; ++i) col_t[static_cast<std::size_t>(i * taps + t)] = col[t * plane + i];
  }
  for (int o = 0; o < outs; ++o) {
    const T* g = dout + o * plane;
    T* dk = dkernel + o * taps;
    T bsum = 0;
    for (int i = 0; i < plane; ++i) {
      const T d = g[i];
      bsum += d;
      if (d == T(0)) continue;
      const T* row = col_t.data() + i * taps;
      for (int t = 0; t < taps; ++t) dk[t] += d * row[t];
    }
    dbias[o] += bsum;
  }
  if (!din) return;
  auto& dcol = ws.dcol;
  dcol.assign(static_cast<std::size_t>(taps * plane), T(0));
  for (int o = 0; o < outs; ++o) {
    const T* g = dout + o * plane;
    const T* k = kernel + o * taps;
    for (int t = 0; t < taps; ++t) {
      const T wv = k[t];
      T* dst = dcol.data() + t * plane;
      for (int i = 0; i < plane; ++i) dst[i] += wv * g[i];
    }
  }
  col2im(dcol.data(), channels, side, din);
}

template <typename T>
void forward_pass(const Architecture& arch, const Params<T>& p, Workspace<T>& ws) {
  for (std::size_t l = 0; l < 3; ++l) {
    const int s = ws.side[l];
    const int ch = ws.out_ch[l];
    T* act = ws.active[l].data();
    im2col(ws.input[l].data(), ws.in_ch[l], s, ws.col[l].data());
    conv3x3(ws.col[l].data(), ws.in_ch[l], s, p.kernel[l], p.bias[l], ch, act);
    for (auto& v : ws.active[l]) v = v > T(0) ? v : T(0);

    const int half = s / 2;
    T* pooled = l < 2 ? ws.input[l + 1].data() : ws.flat.data();
    int* arg = ws.argmax[l].data();
    for (int c = 0; c < ch; ++c) {
      const T* src = act + c * s * s;
      for (int y = 0; y < half; ++y) {
        for (int x = 0; x < half; ++x) {
          int best = (2 * y) * s + 2 * x;
          const int cand[3] = {best + 1, best + s, best + s + 1};
          for (int q : cand) {
            if (src[q] > src[best]) best = q;
          }
          const int o = (c * half + y) * half + x;
          pooled[o] = src[best];
          arg[o] = best;
        }
      }
    }
  }
  const int dim = arch.flattened_dim();
  for (int k = 0; k < arch.num_classes; ++k) {
    const T* row = p.fc_w + static_cast<std::ptrdiff_t>(k) * dim;
    T acc = p.fc_b[k];
    for (int i = 0; i < dim; ++i) acc += row[i] * ws.flat[static_cast<std::size_t>(i)];
    ws.logits[static_cast<std::size_t>(k)] = acc;
  }
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> out(logits.size());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
T cross_entropy(const std::vector<T>& logits, int label) {
  const T peak = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T v : logits) sum += std::exp(v - peak);
  return std::log(sum) - (logits[static_cast<std::size_t>(label)] - peak);
}

// Adds dLoss/dParams for the sample currently held in ws to grad (flat layout).
template <typename T>
void backward_pass(const Architecture& arch, const Params<T>& p, const std::vector<std::size_t>& off,
                   Workspace<T>& ws, int label, std::vector<T>& grad) {
  std::vector<T> dlogits = softmax(ws.logits);
  dlogits[static_cast<std::size_t>(label)] -= T(1);

  const int dim = arch.flattened_dim();
  auto& dpooled = ws.dpooled;
  dpooled.assign(static_cast<std::size_t>(dim), T(0));
  T* gfc_w = grad.data() + off[6];
  T* gfc_b = grad.data() + off[7];
  for (int k = 0; k < arch.num_classes; ++k) {
    const T d = dlogits[static_cast<std::size_t>(k)];
    gfc_b[k] += d;
    T* grow = gfc_w + static_cast<std::ptrdiff_t>(k) * dim;
    const T* wrow = p.fc_w + static_cast<std::ptrdiff_t>(k) * dim;
    for (int i = 0; i < dim; ++i) {
      grow[i] += d * ws.flat[static_cast<std::size_t>(i)];
      dpooled[static_cast<std::size_t>(i)] += d * wrow[i];
    }
  }

  auto& dact = ws.dact;
  auto& dinput = ws.dinput;
  for (int l = 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const int s = ws.side[li];
    const int ch = ws.out_ch[li];
    dact.assign(static_cast<std::size_t>(ch * s * s), T(0));
    const int* arg = ws.argmax[li].data();
    const int half = s / 2;
    for (int c = 0; c < ch; ++c) {
      T* dst = dact.data() + c * s * s;
      const T* act = ws.active[li].data() + c * s * s;
      for (int i = 0; i < half * half; ++i) {
        const int o = c * half * half + i;
        const int src = arg[o];
        if (act[src] > T(0)) dst[src] += dpooled[static_cast<std::size_t>(o)];
      }
    }
    T* din = nullptr;
    if (l > 0) {
      dinput.resize(static_cast<std::size_t>(ws.in_ch[li] * s * s));
      din = dinput.data();
    }
    conv3x3_backward(ws, ws.col[li].data(), ws.in_ch[li], s, p.kernel[li], dact.data(), ch,
                     grad.data() + off[2 * li], grad.data() + off[2 * li + 1], din);
    if (l > 0) dpooled.swap(dinput);
  }
}

template <typename T>
void load_input(Workspace<T>& ws, std::span<const float> input) {
  if (input.size() != ws.input[0].size()) raise(ErrorCode::ShapeMismatch, "input tensor has wrong size");
  std::transform(input.begin(), input.end(), ws.input[0].begin(), [](float v) { return static_cast<T>(v); });
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

namespace {

// Weights flattened once, for repeated inference.
struct CompiledModel {
  Architecture arch;
  std::vector<std::size_t> off;
  std::vector<float> flat;

  explicit CompiledModel(const ModelWeights& w) : arch(w.arch) {
    w.validate();
    off = tensor_offsets(w);
    flat = flatten<float>(w);
  }

  Prediction operator()(std::span<const float> input) const {
    Workspace<float> ws(arch);
    load_input(ws, input);
    forward_pass(arch, view_params(flat, off), ws);
    std::vector<double> logits(ws.logits.begin(), ws.logits.end());
    for (double v : logits) {
      if (!std::isfinite(v)) raise(ErrorCode::ShapeMismatch, "non-finite logits; weights are corrupt");
    }
    return prediction_from_logits(logits);
  }
};

}  // namespace

Prediction forward_preprocessed(const ModelWeights& weights, std::span<const float> input) {
  return CompiledModel(weights)(input);
}

Prediction forward(const ModelWeights& weights, const RasterImage& img) {
  return forward_preprocessed(weights, preprocess(img, weights.arch.input_side));
}

ScoringFunction make_victim(const ModelWeights& weights) {
  auto model = std::make_shared<const CompiledModel>(weights);
  return [model](const RasterImage& img) { return (*model)(preprocess(img, model->arch.input_side)); };
}

ModelWeights init_weights(const Architecture& arch, std::uint64_t seed) {
  ModelWeights w(arch);
  Rng rng(seed);
  auto fill = [&](Tensor& t, double fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  int in = arch.in_channels;
  for (std::size_t l = 0; l < 3; ++l) {
    fill(w.conv[l].kernel, in * 9.0);
    in = arch.conv_channels[l];
  }
  // Plain Glorot-style bound for the softmax layer (no ReLU follows it).
  const double fc_bound = std::sqrt(6.0 / (arch.flattened_dim() + arch.num_classes));
  for (float& v : w.fc_weight.data) v = static_cast<float>(rng.uniform(-fc_bound, fc_bound));
  return w;
}

namespace {

void check_dataset(std::span<const LabeledImage> dataset, const Architecture& arch) {
  if (dataset.empty()) raise(ErrorCode::EmptyDataset, "training set is empty");
  for (const auto& item : dataset) {
    if (item.label < 0 || item.label >= arch.num_classes) {
      raise(ErrorCode::LabelOutOfRange, "label " + std::to_string(item.label) + " outside [0, " +
                                            std::to_string(arch.num_classes) + ")");
    }
  }
}

}  // namespace

TrainResult train(std::span<const LabeledImage> dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  return train_from(init_weights(config.arch, config.seed), dataset, config, on_epoch);
}

TrainResult train_from(ModelWeights initial, std::span<const LabeledImage> dataset, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  initial.validate();
  const Architecture& arch = initial.arch;
  check_dataset(dataset, arch);
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate >= 0.0) ||
      !(config.momentum >= 0.0 && config.momentum < 1.0)) {
    raise(ErrorCode::InvalidConfig, "epochs >= 0, batch >= 1, lr >= 0 and momentum in [0,1) required");
  }

  std::vector<std::vector<float>> inputs;
  inputs.reserve(dataset.size());
  for (const auto& item : dataset) inputs.push_back(preprocess(item.image, arch.input_side));

  const auto off = tensor_offsets(initial);
  std::vector<float> params = flatten<float>(initial);
  std::vector<float> velocity(params.size(), 0.0f);
  std::vector<float> grad(params.size(), 0.0f);
  Workspace<float> ws(arch);

  TrainResult result;
  {
    double total = 0.0;
    const auto p = view_params(params, off);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      load_input(ws, inputs[i]);
      forward_pass(arch, p, ws);
      total += static_cast<double>(cross_entropy(ws.logits, dataset[i].label));
    }
    result.initial_loss = total / static_cast<double>(inputs.size());
  }

  Rng rng(config.seed ^ 0x5eed5eed5eedULL);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto lr = static_cast<float>(config.learning_rate);
  const auto mu = static_cast<float>(config.momentum);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0f);
      const auto p = view_params(params, off);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        load_input(ws, inputs[idx]);
        forward_pass(arch, p, ws);
        loss_sum += static_cast<double>(cross_entropy(ws.logits, dataset[idx].label));
        backward_pass(arch, p, off, ws, dataset[idx].label, grad);
      }
      const float scale = 1.0f / static_cast<float>(stop - start);
      for (std::size_t j = 0; j < params.size(); ++j) {
        velocity[j] = mu * velocity[j] - lr * grad[j] * scale;
        params[j] += velocity[j];
      }
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (!std::isfinite(mean) || !all_finite(params)) {
      raise(ErrorCode::InvalidConfig, "training diverged at epoch " + std::to_string(epoch + 1));
    }
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  unflatten(params, initial);
  result.weights = std::move(initial);
  return result;
}

double mean_loss(const ModelWeights& weights, std::span<const LabeledImage> dataset) {
  check_dataset(dataset, weights.arch);
  double total = 0.0;
  for (const auto& item : dataset) total += sample_loss(weights, item);
  return total / static_cast<double>(dataset.size());
}

double accuracy(const ModelWeights& weights, std::span<const LabeledImage> dataset) {
  if (dataset.empty()) return 0.0;
  const ScoringFunction model = make_victim(weights);
  std::size_t hits = 0;
  for (const auto& item : dataset) hits += model(item.image).label == item.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double sample_loss(const ModelWeights& weights, const LabeledImage& sample) {
  weights.validate();
  const auto off = tensor_offsets(weights);
  const auto flat = flatten<double>(weights);
  Workspace<double> ws(weights.arch);
  load_input(ws, preprocess(sample.image, weights.arch.input_side));
  forward_pass(weights.arch, view_params(flat, off), ws);
  return cross_entropy(ws.logits, sample.label);
}

std::vector<double> loss_gradient(const ModelWeights& weights, const LabeledImage& sample) {
  weights.validate();
  check_dataset(std::span(&sample, 1), weights.arch);
  const auto off = tensor_offsets(weights);
  const auto flat = flatten<double>(weights);
  Workspace<double> ws(weights.arch);
  load_input(ws, preprocess(sample.image, weights.arch.input_side));
  const auto p = view_params(flat, off);
  forward_pass(weights.arch, p, ws);
  std::vector<double> grad(flat.size(), 0.0);
  backward_pass(weights.arch, p, off, ws, sample.label, grad);
  return grad;
}

namespace {

// ReLU on/off bits and max-pool winners of the last forward pass. Within one
// pattern the loss is smooth in the weights.
struct ActivationPattern {
  std::vector<bool> relu;
  std::vector<int> winners;
  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

ActivationPattern pattern_of(const Workspace<double>& ws) {
  ActivationPattern p;
  for (std::size_t l = 0; l < 3; ++l) {
    for (double v : ws.active[l]) p.relu.push_back(v > 0.0);
    p.winners.insert(p.winners.end(), ws.argmax[l].begin(), ws.argmax[l].end());
  }
  return p;
}

}  // namespace

GradCheckResult grad_check(const ModelWeights& weights, const LabeledImage& sample, double epsilon,
                           const GradCheckOptions& options) {
  if (!(epsilon >= 1e-5 && epsilon <= 1e-3)) raise(ErrorCode::InvalidArgument, "epsilon must be in [1e-5, 1e-3]");
  std::vector<double> analytic = loss_gradient(weights, sample);
  if (options.tamper) options.tamper(analytic);

  const auto off = tensor_offsets(weights);
  std::vector<double> flat = flatten<double>(weights);
  Workspace<double> ws(weights.arch);
  load_input(ws, preprocess(sample.image, weights.arch.input_side));
  auto loss_at = [&]() {
    forward_pass(weights.arch, view_params(flat, off), ws);
    return cross_entropy(ws.logits, sample.label);
  };
  loss_at();
  const ActivationPattern base = pattern_of(ws);

  GradCheckResult result;
  for (double g : analytic) result.analytic_norm += g * g;
  result.analytic_norm = std::sqrt(result.analytic_norm);

  // Returns false when the probe crossed a kink and says nothing about the gradient.
  auto probe = [&](std::size_t idx) {
    const double saved = flat[idx];
    flat[idx] = saved + epsilon;
    const double up = loss_at();
    const bool up_smooth = !options.skip_kinks || pattern_of(ws) == base;
    flat[idx] = saved - epsilon;
    const double down = loss_at();
    const bool down_smooth = !options.skip_kinks || pattern_of(ws) == base;
    flat[idx] = saved;
    if (!up_smooth || !down_smooth) {
      ++result.kinks_skipped;
      return false;
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
    ++result.params_checked;
    return true;
  };

  const std::size_t total = flat.size();
  if (options.sample_params == 0 || options.sample_params >= total) {
    for (std::size_t idx = 0; idx < total; ++idx) probe(idx);
    return result;
  }
  // Stratified: every tensor contributes in proportion to its size, at least
  // one entry. A skipped entry is replaced by the tensor's next shuffled one.
  Rng rng(options.seed);
  for (std::size_t t = 0; t + 1 < off.size(); ++t) {
    const std::size_t len = off[t + 1] - off[t];
    const std::size_t want = std::min(len, std::max<std::size_t>(1, (options.sample_params * len + total - 1) / total));
    std::vector<std::size_t> pool(len);
    std::iota(pool.begin(), pool.end(), off[t]);
    std::size_t good = 0;
    // Partial Fisher-Yates: distinct entries within the tensor.
    for (std::size_t k = 0; k < len && good < want; ++k) {
      std::swap(pool[k], pool[k + rng.below(len - k)]);
      if (probe(pool[k])) ++good;
    }
  }
  return result;
}

}  // namespace chrono_shield
