#include "chrono_shield/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <fstream>
#include <sstream>

#include "chrono_shield/error.hpp"
#include "chrono_shield/image_io.hpp"
#include "chrono_shield/shadow_attack.hpp"

namespace chrono_shield {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Stop",          "Ped. Crossing",  "Yield",          "Merge",
    "Turn Right",    "Turn Left",      "Signal Ahead",   "Speed Limit 25",
    "Speed Limit 35", "Speed Limit 45", "Keep Right",     "Lane Ends",
    "Added Lane",    "Stop Ahead",     "School",         "Do Not Enter",
};

constexpr Rgb kBlack{20, 20, 20};
constexpr Rgb kWhite{235, 235, 235};
constexpr Rgb kYellow{235, 195, 30};
constexpr Rgb kRed{190, 28, 34};
constexpr Rgb kGreen{30, 150, 70};
constexpr Rgb kSchool{170, 210, 40};

using Poly = std::vector<Vertex>;

struct Layer {
  Poly poly;
  Rgb color;
};

Poly regular(int n, double radius, double phase_deg, double cx = 0.0, double cy = 0.0) {
  Poly p;
  for (int k = 0; k < n; ++k) {
    const double a = (phase_deg + 360.0 * k / n) * kPi / 180.0;
    p.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a)});
  }
  return p;
}

Poly rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

Poly scaled(const Poly& p, double s) {
  Poly out;
  for (const auto& v : p) out.push_back({v.x * s, v.y * s});
  return out;
}

Poly mirrored(const Poly& p) {
  Poly out;
  for (auto it = p.rbegin(); it != p.rend(); ++it) out.push_back({-it->x, it->y});
  return out;
}

Poly octagon(double r) { return regular(8, r, 22.5); }
Poly diamond(double r) { return {{0, -r}, {r, 0}, {0, r}, {-r, 0}}; }
Poly down_triangle(double r) { return regular(3, r, 90.0); }
Poly circle(double r, double cx = 0.0, double cy = 0.0) { return regular(32, r, 0.0, cx, cy); }
Poly house() { return {{0, -1.0}, {0.72, -0.36}, {0.68, 0.72}, {-0.68, 0.72}, {-0.72, -0.36}}; }

void warning_base(std::vector<Layer>& s) {
  s.push_back({diamond(1.0), kBlack});
  s.push_back({diamond(0.86), kYellow});
}

void regulatory_base(std::vector<Layer>& s) {
  s.push_back({rect(-0.6, -0.8, 0.6, 0.8), kBlack});
  s.push_back({rect(-0.52, -0.72, 0.52, 0.72), kWhite});
}

// Seven-segment digit in the box [x0, x0+w] x [y0, y0+h].
void digit(std::vector<Layer>& s, int d, double x0, double y0, double w, double h) {
  static constexpr std::array<unsigned, 10> kSegments = {0x3f, 0x06, 0x5b, 0x4f, 0x66,
                                                         0x6d, 0x7d, 0x07, 0x7f, 0x6f};
  const double t = 0.085;
  const double xm = x0 + w, ym = y0 + h / 2, yb = y0 + h;
  const std::array<Poly, 7> seg = {
      rect(x0, y0, xm, y0 + t),               // a top
      rect(xm - t, y0, xm, ym),               // b upper right
      rect(xm - t, ym, xm, yb),               // c lower right
      rect(x0, yb - t, xm, yb),               // d bottom
      rect(x0, ym, x0 + t, yb),               // e lower left
      rect(x0, y0, x0 + t, ym),               // f upper left
      rect(x0, ym - t / 2, xm, ym + t / 2),   // g middle
  };
  for (int i = 0; i < 7; ++i) {
    if (kSegments[static_cast<std::size_t>(d)] & (1u << i)) s.push_back({seg[static_cast<std::size_t>(i)], kBlack});
  }
}

void speed_limit(std::vector<Layer>& s, int tens) {
  regulatory_base(s);
  s.push_back({rect(-0.38, -0.6, 0.38, -0.46), kBlack});
  digit(s, tens, -0.4, -0.28, 0.32, 0.78);
  digit(s, 5, 0.08, -0.28, 0.32, 0.78);
}

Poly turn_arrow_head() { return {{0.2, -0.36}, {0.2, 0.2}, {0.52, -0.08}}; }

std::vector<Layer> build_sign(int label) {
  std::vector<Layer> s;
  switch (label) {
    case 0:  // Stop
      s.push_back({octagon(1.0), kWhite});
      s.push_back({octagon(0.86), kRed});
      s.push_back({rect(-0.62, -0.15, 0.62, 0.15), kWhite});
      break;
    case 1:  // Ped. Crossing
      warning_base(s);
      s.push_back({rect(-0.1, -0.32, 0.1, 0.26), kBlack});
      s.push_back({rect(-0.11, -0.56, 0.11, -0.38), kBlack});
      s.push_back({{{-0.34, 0.58}, {0.34, 0.58}, {0.0, 0.16}}, kBlack});
      break;
    case 2:  // Yield
      s.push_back({down_triangle(1.0), kRed});
      s.push_back({down_triangle(0.5), kWhite});
      break;
    case 3:  // Merge
      warning_base(s);
      s.push_back({rect(0.04, -0.58, 0.24, 0.58), kBlack});
      s.push_back({{{-0.56, 0.36}, {-0.38, 0.54}, {0.12, 0.06}, {-0.02, -0.12}}, kBlack});
      break;
    case 4:  // Turn Right
    case 5: {  // Turn Left
      std::vector<Layer> glyph = {
          {rect(-0.26, -0.06, -0.08, 0.56), kBlack},
          {rect(-0.26, -0.17, 0.24, 0.01), kBlack},
          {turn_arrow_head(), kBlack},
      };
      warning_base(s);
      for (auto& g : glyph) s.push_back({label == 5 ? mirrored(g.poly) : g.poly, g.color});
      break;
    }
    case 6:  // Signal Ahead
      warning_base(s);
      s.push_back({rect(-0.19, -0.56, 0.19, 0.56), kBlack});
      s.push_back({circle(0.12, 0.0, -0.33), kRed});
      s.push_back({circle(0.12, 0.0, 0.0), kYellow});
      s.push_back({circle(0.12, 0.0, 0.33), kGreen});
      break;
    case 7: speed_limit(s, 2); break;
    case 8: speed_limit(s, 3); break;
    case 9: speed_limit(s, 4); break;
    case 10:  // Keep Right
      regulatory_base(s);
      s.push_back({circle(0.17, -0.22, 0.36), kBlack});
      s.push_back({{{-0.36, -0.46}, {-0.22, -0.58}, {0.2, -0.12}, {0.06, 0.0}}, kBlack});
      s.push_back({{{0.3, -0.28}, {0.3, 0.12}, {-0.08, 0.12}}, kBlack});
      break;
    case 11:  // Lane Ends
      warning_base(s);
      s.push_back({rect(-0.32, -0.52, -0.15, 0.52), kBlack});
      s.push_back({{{0.14, 0.52}, {0.32, 0.52}, {0.06, -0.52}, {-0.11, -0.52}}, kBlack});
      break;
    case 12:  // Added Lane
      warning_base(s);
      s.push_back({rect(-0.3, -0.2, -0.14, 0.52), kBlack});
      s.push_back({rect(0.14, -0.2, 0.3, 0.52), kBlack});
      s.push_back({{{-0.4, -0.18}, {-0.04, -0.18}, {-0.22, -0.5}}, kBlack});
      s.push_back({{{0.04, -0.18}, {0.4, -0.18}, {0.22, -0.5}}, kBlack});
      break;
    case 13:  // Stop Ahead
      warning_base(s);
      s.push_back({regular(8, 0.27, 22.5, 0.0, -0.3), kRed});
      s.push_back({rect(-0.07, 0.18, 0.07, 0.6), kBlack});
      s.push_back({{{-0.2, 0.22}, {0.2, 0.22}, {0.0, 0.02}}, kBlack});
      break;
    case 14:  // School
      s.push_back({house(), kBlack});
      s.push_back({scaled(house(), 0.86), kSchool});
      s.push_back({rect(-0.36, -0.02, -0.14, 0.52), kBlack});
      s.push_back({rect(0.14, -0.02, 0.36, 0.52), kBlack});
      s.push_back({rect(-0.32, -0.3, -0.18, -0.12), kBlack});
      s.push_back({rect(0.18, -0.3, 0.32, -0.12), kBlack});
      break;
    case 15:  // Do Not Enter
      s.push_back({circle(1.0), kRed});
      s.push_back({rect(-0.72, -0.22, 0.72, 0.22), kWhite});
      break;
    default: raise(ErrorCode::LabelOutOfRange, "no sign archetype for label " + std::to_string(label));
  }
  return s;
}

bool inside(const Poly& poly, double px, double py) noexcept {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vertex& a = poly[i];
    const Vertex& b = poly[j];
    if ((a.y > py) != (b.y > py) && px < a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y)) in = !in;
  }
  return in;
}

// Brighter, low-saturation scene colours so the sign outline keeps contrast.
Rgb sample_background(Rng& rng) {
  static constexpr std::array<Rgb, 6> kPalette = {Rgb{120, 165, 215}, Rgb{150, 180, 205}, Rgb{140, 150, 160},
                                                  Rgb{120, 160, 110}, Rgb{175, 165, 145}, Rgb{160, 160, 170}};
  const Rgb base = kPalette[rng.below(kPalette.size())];
  auto jitter = [&](std::uint8_t v) {
    return static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + static_cast<int>(rng.below(41)) - 20, 0, 255));
  };
  return {jitter(base.r), jitter(base.g), jitter(base.b)};
}

}  // namespace

const std::array<std::string_view, kNumClasses>& class_names() noexcept { return kClassNames; }

std::string_view class_name(int label) {
  if (label < 0 || label >= kNumClasses) raise(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
  return kClassNames[static_cast<std::size_t>(label)];
}

Nuisance sample_nuisance(Rng& rng) {
  Nuisance n;
  n.offset_x = rng.uniform(-0.15, 0.15);
  n.offset_y = rng.uniform(-0.15, 0.15);
  n.scale = rng.uniform(0.6, 0.9);
  n.rotation_deg = rng.uniform(-10.0, 10.0);
  n.brightness = rng.uniform(0.8, 1.2);
  n.background_a = sample_background(rng);
  n.background_b = sample_background(rng);
  n.gradient_angle = rng.uniform(0.0, 2.0 * kPi);
  n.noise_amplitude = rng.uniform(2.0, 8.0);
  n.noise_seed = rng();
  return n;
}

SignRender render_sign(int label, const Nuisance& n, int side) {
  if (side < 16) raise(ErrorCode::InvalidConfig, "sign renders need a side of at least 16 px");
  const auto layers = build_sign(label);
  const double half = n.scale * side / 2.0;
  // Every archetype fits in the unit circle, so this keeps the sign inside the frame.
  const double slack = std::max(0.0, side / 2.0 - half - 2.0);
  const double cx = side / 2.0 + std::clamp(n.offset_x * side, -slack, slack);
  const double cy = side / 2.0 + std::clamp(n.offset_y * side, -slack, slack);
  const double rot = n.rotation_deg * kPi / 180.0;
  const double cr = std::cos(rot), sr = std::sin(rot);

  // Pixel -> unit sign coordinates (inverse rotation and scale).
  auto to_unit = [&](double px, double py) {
    const double dx = (px - cx) / half;
    const double dy = (py - cy) / half;
    return Vertex{cr * dx + sr * dy, -sr * dx + cr * dy};
  };
  auto paint = [&](double px, double py, const Rgb& bg) {
    const Vertex u = to_unit(px, py);
    const Rgb* colour = &bg;
    for (const auto& layer : layers) {
      if (inside(layer.poly, u.x, u.y)) colour = &layer.color;
    }
    return *colour;
  };

  SignRender out{RasterImage(side, side, 3), BinaryMask(side, side)};
  Rng noise(n.noise_seed);
  const double gx = std::cos(n.gradient_angle), gy = std::sin(n.gradient_angle);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double t = std::clamp(0.5 + ((x + 0.5 - side / 2.0) * gx + (y + 0.5 - side / 2.0) * gy) / side, 0.0, 1.0);
      const Rgb bg{static_cast<std::uint8_t>(n.background_a.r + t * (n.background_b.r - n.background_a.r)),
                   static_cast<std::uint8_t>(n.background_a.g + t * (n.background_b.g - n.background_a.g)),
                   static_cast<std::uint8_t>(n.background_a.b + t * (n.background_b.b - n.background_a.b))};
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const Rgb c = paint(x + 0.25 + 0.5 * sx, y + 0.25 + 0.5 * sy, bg);
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
        }
      }
      const double jitter = noise.uniform(-n.noise_amplitude, n.noise_amplitude);
      for (int c = 0; c < 3; ++c) {
        const double v = (acc[c] / 4.0) * n.brightness + jitter;
        out.image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      const Vertex u = to_unit(x + 0.5, y + 0.5);
      if (inside(layers.front().poly, u.x, u.y)) out.face.set(x, y);
    }
  }
  return out;
}

std::string_view to_string(Split s) noexcept { return s == Split::train ? "train" : "test"; }

std::vector<LabeledImage> LabeledImageSet::split(Split s) const {
  std::vector<LabeledImage> out;
  for (const auto& item : items) {
    if (item.split == s) out.push_back({item.image, item.label});
  }
  return out;
}

std::vector<const DatasetItem*> LabeledImageSet::items_in(Split s) const {
  std::vector<const DatasetItem*> out;
  for (const auto& item : items) {
    if (item.split == s) out.push_back(&item);
  }
  return out;
}

LabeledImageSet synth_dataset(const SynthConfig& config) {
  if (config.train_per_class < 1 || config.test_per_class < 0 || config.image_side < 16) {
    raise(ErrorCode::InvalidConfig, "synth needs train_per_class >= 1, test_per_class >= 0, image_side >= 16");
  }
  LabeledImageSet set;
  set.items.reserve(static_cast<std::size_t>(kNumClasses * (config.train_per_class + config.test_per_class)));
  for (Split split : {Split::train, Split::test}) {
    const int per_class = split == Split::train ? config.train_per_class : config.test_per_class;
    for (int label = 0; label < kNumClasses; ++label) {
      for (int i = 0; i < per_class; ++i) {
        const std::uint64_t stream = (static_cast<std::uint64_t>(split == Split::test) << 40) |
                                     (static_cast<std::uint64_t>(label) << 20) | static_cast<std::uint64_t>(i);
        Rng rng = Rng::derive(config.seed, stream);
        char id[32];
        std::snprintf(id, sizeof id, "%s-%02d-%04d", split == Split::train ? "train" : "test", label, i);
        set.items.push_back({id, render_sign(label, sample_nuisance(rng), config.image_side).image, label, split});
      }
    }
  }
  return set;
}

void save_dataset(const LabeledImageSet& set, const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::ostringstream index;
  index << "id,split,label,path\n";
  for (const auto& item : set.items) {
    const std::string rel = "images/" + item.id + ".png";
    save_image(item.image, dir / rel);
    index << item.id << ',' << to_string(item.split) << ',' << item.label << ',' << rel << '\n';
  }
  const std::string text = index.str();
  write_file_atomic(dir / "index.csv", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

LabeledImageSet load_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "index.csv";
  std::ifstream in(index_path);
  if (!in) raise(ErrorCode::MissingArchive, "no index.csv under " + dir.string());
  LabeledImageSet set;
  std::string line;
  std::getline(in, line);
  if (line != "id,split,label,path") raise(ErrorCode::ManifestMalformed, "unexpected index.csv header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
    if (cols.size() != 4) raise(ErrorCode::ManifestMalformed, "index.csv row needs 4 columns: " + line);
    DatasetItem item;
    item.id = cols[0];
    if (cols[1] == "train") {
      item.split = Split::train;
    } else if (cols[1] == "test") {
      item.split = Split::test;
    } else {
      raise(ErrorCode::ManifestMalformed, "unknown split '" + cols[1] + "'");
    }
    try {
      item.label = std::stoi(cols[2]);
    } catch (const std::exception&) {
      raise(ErrorCode::ManifestMalformed, "bad label in row: " + line);
    }
    if (item.label < 0 || item.label >= kNumClasses) raise(ErrorCode::LabelOutOfRange, "label " + cols[2]);
    item.image = to_rgb(load_image(dir / cols[3]));
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) raise(ErrorCode::EmptyDataset, "index.csv lists no images");
  return set;
}

}  // namespace chrono_shield
