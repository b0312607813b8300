#pragma once

// Minimal reverse-mode differentiation over dense row-major arrays.
//
// Every operation records a node holding its output and a backward closure;
// the graph is rebuilt on every evaluation and released with the last handle.
// Spatial derivatives are carried as forward tangents (see Dual) built from
// the same recorded operations, so they remain differentiable with respect
// to every parameter they depend on.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zlse/errors.hpp"

namespace zlse {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(const Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  bool grad_pending = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  // Zero-initialized on first use.
  std::span<double> grad_buffer();
};

}  // namespace detail

// DiffValue: a shaped array taking part in a differentiable computation.
class Value {
 public:
  Value() = default;

  static Value constant(Shape shape, std::vector<double> data);
  static Value filled(Shape shape, double fill);
  static Value scalar(double v) { return filled({}, v); }
  static Value parameter(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  // Leading dimension and product of the remaining ones.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data();
  std::span<const double> grad() const { return node_->grad; }
  double item() const;
  double operator()(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  void zero_grad();

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Value(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Value record(Shape, std::vector<double>, std::vector<Value>, detail::BackwardFn);

  std::shared_ptr<detail::Node> node_;
};

// Hook for operations defined outside this file. The closure receives the
// result node (data and incoming gradient) and must accumulate into the
// inputs through grad_target(). When recording is disabled or no input needs
// a gradient, the closure is dropped and a constant is returned.
Value record(Shape shape, std::vector<double> data, std::vector<Value> inputs, detail::BackwardFn backward);

// Empty span when the value does not need a gradient.
std::span<double> grad_target(const Value& v);

bool recording_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Propagates d(loss)/d(leaf) into every reachable parameter. Calling it twice
// on the same loss, or before resetting parameter gradients, is an error.
void backward(const Value& loss);

// ---------------------------------------------------------------------------
// Operations. Shapes are checked eagerly; mismatches raise ShapeError.

Value linear(const Value& input, const Value& weight, const Value& bias);
Value matmul(const Value& input, const Value& weight);
Value add_bias(const Value& input, const Value& bias);

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
// Multiplies row i of `input` by column[i].
Value scale_rows(const Value& input, const Value& column);

enum class Unary { sin, cos, relu, exp, abs, negate, scale, reciprocal };

// `factor` is only read by Unary::scale. relu'(0) = abs'(0) = 0.
Value elementwise(Unary op, const Value& x, double factor = 1.0);
inline Value sin(const Value& x) { return elementwise(Unary::sin, x); }
inline Value cos(const Value& x) { return elementwise(Unary::cos, x); }
inline Value relu(const Value& x) { return elementwise(Unary::relu, x); }
inline Value exp(const Value& x) { return elementwise(Unary::exp, x); }
inline Value abs(const Value& x) { return elementwise(Unary::abs, x); }
inline Value negate(const Value& x) { return elementwise(Unary::negate, x); }
inline Value scale(const Value& x, double factor) { return elementwise(Unary::scale, x, factor); }
inline Value reciprocal(const Value& x) { return elementwise(Unary::reciprocal, x); }
Value add_scalar(const Value& x, double c);

// Untracked masks used for tangents of piecewise-linear functions.
Value heaviside(const Value& x);
Value sign(const Value& x);

enum class Reduction { sum, mean, max };

// Without an axis the result is a scalar. Max routes the gradient to the
// lowest index among ties.
Value reduce(Reduction op, const Value& x, std::optional<std::size_t> axis = std::nullopt);
inline Value sum(const Value& x) { return reduce(Reduction::sum, x); }
inline Value mean(const Value& x) { return reduce(Reduction::mean, x); }

// Euclidean norm of every row: [n x c] -> [n x 1]. Gradient 0 at the origin.
Value row_norm(const Value& x);

Value reshape(const Value& x, Shape shape);
Value transpose(const Value& x);
Value concat_cols(const std::vector<Value>& parts);
Value concat_rows(const std::vector<Value>& parts);
Value slice_rows(const Value& x, std::size_t begin, std::size_t end);
Value slice_cols(const Value& x, std::size_t begin, std::size_t end);
Value gather_rows(const Value& x, std::span<const std::size_t> indices);
// [n x c] -> [times*n x c], stacking whole copies.
Value tile_rows(const Value& x, std::size_t times);

// ---------------------------------------------------------------------------
// Forward tangents for spatial derivatives.
//
// `tangent` stacks one block per seed direction: for a value of shape
// [s x c] and m seeds it has shape [m*s x c], block j holding d(value)/d(seed j).
// An undefined tangent means the value does not depend on the seeds.

struct Dual {
  Value value;
  Value tangent;

  bool has_tangent() const { return tangent.defined(); }
  std::size_t seeds() const;
};

Dual dual_constant(const Value& v);
Dual dual_linear(const Dual& x, const Value& weight, const Value& bias);
Dual dual_add(const Dual& a, const Dual& b);
Dual dual_mul(const Dual& a, const Dual& b);
Dual dual_relu(const Dual& x);
// sin(omega * x)
Dual dual_sin(const Dual& x, double omega);
Dual dual_concat_cols(const Dual& a, const Dual& b);

using ScalarField = std::function<Dual(const Dual& positions)>;

// Gradient of a per-sample scalar field with respect to the [s x 3] positions.
// The result stays attached to the graph of everything the field depends on.
Value spatial_gradient(const ScalarField& field, const Value& positions);

// Same evaluation, also returning the field values.
struct FieldWithGradient {
  Value value;
  Value gradient;
};
FieldWithGradient evaluate_with_gradient(const ScalarField& field, const Value& positions);

}  // namespace zlse
