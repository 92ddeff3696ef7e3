#pragma once

#include <span>
#include <vector>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/image.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/pso.hpp"

namespace chrono_shield {

struct Vertex {
  double x = 0.0;  // normalized to the mask's bounding box, [0,1]
  double y = 0.0;
  friend bool operator==(const Vertex&, const Vertex&) = default;
};

// A polygonal cast shadow: every pixel inside (polygon ∩ mask) is scaled by
// darkening, which lies in (0, 1].
struct ShadowSpec {
  std::vector<Vertex> vertices;
  double darkening = 0.43;
  friend bool operator==(const ShadowSpec&, const ShadowSpec&) = default;
};

struct ShadowedImage {
  RasterImage image;
  bool degenerate = false;  // zero-area polygon, image returned unchanged
};

// Vertices map into the continuous bounding box of the mask (pixel (x, y)
// spans [x, x+1) x [y, y+1)); pixels are tested at their centers with the
// even-odd rule. Throws ShapeMismatch, DegenerateMask, InvalidArgument.
ShadowedImage apply_shadow(const RasterImage& img, const BinaryMask& mask, const ShadowSpec& shadow);

// Interprets a PSO position [x0, y0, x1, y1, ...] as polygon vertices.
ShadowSpec decode_shadow(std::span<const double> position, double darkening);

enum class AttackFitness {
  true_class_probability,  // p[true]
  margin,                  // p[true] - max_{k != true} p[k]
};

struct AttackConfig {
  PsoConfig pso;
  int vertices = 3;
  double darkening = 0.43;
  bool early_stop = true;
  AttackFitness fitness = AttackFitness::true_class_probability;
};

struct AttackResult {
  RasterImage adversarial_image;
  ShadowSpec shadow;
  Prediction original_prediction;
  Prediction adversarial_prediction;
  bool success = false;
  int iterations_used = 0;
  std::vector<double> fitness_trace;
  std::size_t queries = 0;
};

// Black-box shadow search: PSO minimises the victim's fitness on
// apply_shadow(img, mask, decode(position)). The victim is only ever queried
// for predictions.
AttackResult run_attack(const RasterImage& img, const BinaryMask& mask, const ScoringFunction& victim,
                        int true_label, const AttackConfig& config = {});

}  // namespace chrono_shield
