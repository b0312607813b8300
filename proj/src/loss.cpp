#include "zlse/loss.hpp"

#include <cmath>

#include "zlse/errors.hpp"
#include "zlse/transfer.hpp"

namespace zlse {

LossMode parse_loss_mode(const std::string& text) {
  if (text == "signed") return LossMode::signed_distance;
  if (text == "sign-agnostic") return LossMode::sign_agnostic;
  if (text == "unsigned") return LossMode::unsigned_distance;
  throw ConfigError("unknown loss mode '" + text + "' (signed, sign-agnostic, unsigned)");
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::signed_distance: return "signed";
    case LossMode::sign_agnostic: return "sign-agnostic";
    case LossMode::unsigned_distance: return "unsigned";
  }
  return "signed";
}

void LossWeights::validate() const {
  for (double w : {eikonal, surface, normal, offsurface}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss: weights must be finite and >= 0");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("loss: alpha must be positive");
}

Value eikonal_term(const Value& gradient) { return mean(abs(add_scalar(row_norm(gradient), -1.0))); }

Value surface_term(const Value& values) { return mean(abs(values)); }

Value normal_term(const Value& gradient, const Value& normals, LossMode mode) {
  if (gradient.shape() != normals.shape()) {
    throw ShapeError("normal_term: gradient " + shape_string(gradient.shape()) + " vs normals " +
                     shape_string(normals.shape()));
  }
  // cosine rather than the raw inner product: with the eikonal term averaged
  // over all samples, the raw form rewards inflating |grad| on the surface
  // the guard only matters at an exactly zero gradient; 1/len^2 stays finite
  Value len = reshape(add_scalar(row_norm(gradient), 1e-100), {gradient.rows()});
  Value dot = mul(reduce(Reduction::sum, mul(gradient, normals), 1), reciprocal(len));
  if (mode != LossMode::signed_distance) dot = abs(dot);
  return add_scalar(negate(mean(dot)), 1.0);
}

Value offsurface_term(const Value& values, double alpha, LossMode mode) {
  Value arg = mode == LossMode::unsigned_distance ? values : abs(values);
  return mean(exp(scale(arg, -alpha)));
}

FieldEvaluator field_evaluator(const ScalarField& field) {
  return [field](const Value& positions) { return evaluate_with_gradient(field, positions); };
}

namespace {

double checked(const Value& term, const char* name) {
  const double v = term.item();
  if (!std::isfinite(v)) throw NumericError(std::string("loss: non-finite ") + name + " term");
  return v;
}

}  // namespace

LossBreakdown total_loss(const FieldEvaluator& field, const SampleSet& samples, const LossWeights& weights) {
  weights.validate();
  if (samples.surface.empty()) throw GeometryError("loss: the surface sample set is empty");
  const std::size_t ns = samples.surface.size(), nu = samples.offsurface_uniform.size(),
                    nn = samples.near_surface.size();

  std::vector<Vec3> all;
  all.reserve(ns + nu + nn);
  all.insert(all.end(), samples.surface.begin(), samples.surface.end());
  all.insert(all.end(), samples.offsurface_uniform.begin(), samples.offsurface_uniform.end());
  all.insert(all.end(), samples.near_surface.begin(), samples.near_surface.end());

  FieldWithGradient fg = field(positions_value(all));
  if (fg.value.shape() != Shape{all.size(), 1} || fg.gradient.shape() != Shape{all.size(), 3}) {
    throw ShapeError("loss: field evaluator returned " + shape_string(fg.value.shape()) + " / " +
                     shape_string(fg.gradient.shape()));
  }

  LossBreakdown out;
  Value eik = eikonal_term(fg.gradient);
  out.eikonal = checked(eik, "eikonal");
  Value surf = surface_term(slice_rows(fg.value, 0, ns));
  out.surface = checked(surf, "surface");
  Value total = add(scale(eik, weights.eikonal), scale(surf, weights.surface));

  if (samples.surface_normals.size() == ns) {
    Value nrm = normal_term(slice_rows(fg.gradient, 0, ns), positions_value(samples.surface_normals), weights.mode);
    out.normal = checked(nrm, "normal");
    total = add(total, scale(nrm, weights.normal));
  } else {
    if (!samples.surface_normals.empty()) throw GeometryError("loss: surface normal count does not match samples");
    if (weights.normal > 0.0) warn("loss: surface samples carry no normals; normal term skipped");
  }

  if (nu + nn > 0) {
    Value off = offsurface_term(slice_rows(fg.value, ns, ns + nu + nn), weights.alpha, weights.mode);
    out.offsurface = checked(off, "offsurface");
    total = add(total, scale(off, weights.offsurface));
  }

  out.total = checked(total, "total");
  out.total_value = total;
  return out;
}

}  // namespace zlse
