#pragma once

#include <functional>
#include <string>

#include "zlse/diff.hpp"
#include "zlse/geometry.hpp"

namespace zlse {

enum class LossMode { signed_distance, sign_agnostic, unsigned_distance };

LossMode parse_loss_mode(const std::string& text);
std::string to_string(LossMode mode);

struct LossWeights {
  double eikonal = 50.0;
  double surface = 300.0;
  double normal = 50.0;
  double offsurface = 100.0;
  double alpha = 10.0;
  LossMode mode = LossMode::signed_distance;

  void validate() const;
};

struct LossBreakdown {
  double eikonal = 0, surface = 0, normal = 0, offsurface = 0, total = 0;
  Value total_value;  // differentiable
};

// mean | |grad| - 1 |
Value eikonal_term(const Value& gradient);
// mean |phi|
Value surface_term(const Value& values);
// mean(1 - cos(grad, n)) in signed mode, mean(1 - |cos(grad, n)|) otherwise.
Value normal_term(const Value& gradient, const Value& normals, LossMode mode);
// mean exp(-alpha |phi|), or exp(-alpha phi) in unsigned mode.
Value offsurface_term(const Value& values, double alpha, LossMode mode);

// Evaluates a field and its spatial gradient at [s x 3] positions.
using FieldEvaluator = std::function<FieldWithGradient(const Value& positions)>;

FieldEvaluator field_evaluator(const ScalarField& field);

// All sample classes are evaluated in one batch ordered surface, uniform,
// near-surface. The eikonal term covers all of them, the off-surface term
// the last two.
LossBreakdown total_loss(const FieldEvaluator& field, const SampleSet& samples, const LossWeights& weights);

}  // namespace zlse
