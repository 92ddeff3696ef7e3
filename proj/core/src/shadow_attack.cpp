#include "chrono_shield/shadow_attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

double polygon_area(const std::vector<Vertex>& v) noexcept {
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vertex& a = v[i];
    const Vertex& b = v[(i + 1) % v.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

bool inside_even_odd(const std::vector<Vertex>& poly, double px, double py) noexcept {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vertex& a = poly[i];
    const Vertex& b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double cross_x = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < cross_x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

ShadowedImage apply_shadow(const RasterImage& img, const BinaryMask& mask, const ShadowSpec& shadow) {
  if (mask.width() != img.width() || mask.height() != img.height()) {
    raise(ErrorCode::ShapeMismatch, "shadow mask and image extents differ");
  }
  if (shadow.vertices.size() < 3) raise(ErrorCode::InvalidArgument, "a shadow polygon needs >= 3 vertices");
  if (!(shadow.darkening > 0.0 && shadow.darkening <= 1.0)) {
    raise(ErrorCode::InvalidArgument, "darkening must lie in (0, 1]");
  }
  const auto box = mask.bounding_box();
  if (!box) raise(ErrorCode::DegenerateMask, "shadow mask has no true pixels");

  ShadowedImage out{img, false};
  const double bw = box->x1 + 1 - box->x0;
  const double bh = box->y1 + 1 - box->y0;
  std::vector<Vertex> poly;
  poly.reserve(shadow.vertices.size());
  for (const Vertex& v : shadow.vertices) poly.push_back({box->x0 + v.x * bw, box->y0 + v.y * bh});
  if (polygon_area(poly) < 1e-9) {
    out.degenerate = true;
    return out;
  }
  if (shadow.darkening == 1.0) return out;

  double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
  for (const Vertex& v : poly) {
    min_x = std::min(min_x, v.x);
    max_x = std::max(max_x, v.x);
    min_y = std::min(min_y, v.y);
    max_y = std::max(max_y, v.y);
  }
  const int x_lo = std::max(box->x0, static_cast<int>(std::floor(min_x)));
  const int x_hi = std::min(box->x1, static_cast<int>(std::ceil(max_x)));
  const int y_lo = std::max(box->y0, static_cast<int>(std::floor(min_y)));
  const int y_hi = std::min(box->y1, static_cast<int>(std::ceil(max_y)));
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      if (!mask.at(x, y) || !inside_even_odd(poly, x + 0.5, y + 0.5)) continue;
      for (int c = 0; c < img.channels(); ++c) {
        auto& s = out.image.at(x, y, c);
        s = static_cast<std::uint8_t>(std::lround(s * shadow.darkening));
      }
    }
  }
  return out;
}

ShadowSpec decode_shadow(std::span<const double> position, double darkening) {
  if (position.size() < 6 || position.size() % 2 != 0) {
    raise(ErrorCode::InvalidArgument, "shadow position must hold an even number (>= 6) of coordinates");
  }
  ShadowSpec s;
  s.darkening = darkening;
  for (std::size_t i = 0; i < position.size(); i += 2) {
    s.vertices.push_back({std::clamp(position[i], 0.0, 1.0), std::clamp(position[i + 1], 0.0, 1.0)});
  }
  return s;
}

namespace {

double score(const Prediction& p, int true_label, AttackFitness kind) {
  const double own = p.distribution[static_cast<std::size_t>(true_label)];
  if (kind == AttackFitness::true_class_probability) return own;
  double other = 0.0;
  for (std::size_t k = 0; k < p.distribution.size(); ++k) {
    if (static_cast<int>(k) != true_label) other = std::max(other, p.distribution[k]);
  }
  return own - other;
}

}  // namespace

AttackResult run_attack(const RasterImage& img, const BinaryMask& mask, const ScoringFunction& victim,
                        int true_label, const AttackConfig& config) {
  if (!mask.any()) raise(ErrorCode::DegenerateMask, "attack mask has no true pixels");
  if (mask.width() != img.width() || mask.height() != img.height()) {
    raise(ErrorCode::ShapeMismatch, "attack mask and image extents differ");
  }
  if (config.vertices < 3) raise(ErrorCode::InvalidConfig, "shadow polygon needs >= 3 vertices");
  if (!(config.darkening > 0.0 && config.darkening <= 1.0)) {
    raise(ErrorCode::InvalidConfig, "darkening must lie in (0, 1]");
  }

  AttackResult result;
  result.original_prediction = victim(img);
  if (true_label < 0 || true_label >= static_cast<int>(result.original_prediction.distribution.size())) {
    raise(ErrorCode::LabelOutOfRange, "true label outside the victim's class range");
  }
  std::atomic<std::size_t> queries{1};

  const Objective objective = [&](std::span<const double> position) {
    const auto shadowed = apply_shadow(img, mask, decode_shadow(position, config.darkening));
    queries.fetch_add(1, std::memory_order_relaxed);
    return score(victim(shadowed.image), true_label, config.fitness);
  };

  std::vector<double> checked;
  StopPredicate stop;
  if (config.early_stop) {
    stop = [&](std::span<const double> best, double) {
      if (std::equal(best.begin(), best.end(), checked.begin(), checked.end())) return false;
      checked.assign(best.begin(), best.end());
      queries.fetch_add(1, std::memory_order_relaxed);
      const auto shadowed = apply_shadow(img, mask, decode_shadow(best, config.darkening));
      return victim(shadowed.image).label != true_label;
    };
  }

  const PsoResult search = pso_minimize(objective, 2 * config.vertices, config.pso, stop);
  result.shadow = decode_shadow(search.best_position, config.darkening);
  result.adversarial_image = apply_shadow(img, mask, result.shadow).image;
  result.adversarial_prediction = victim(result.adversarial_image);
  result.success = result.adversarial_prediction.label != result.original_prediction.label;
  result.iterations_used = search.iterations_used;
  result.fitness_trace = search.trace;
  result.queries = queries.load() + 1;
  return result;
}

}  // namespace chrono_shield
