#include "zlse/diff.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>

namespace zlse {

namespace {

thread_local bool g_recording = true;
bool g_warnings = true;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

void require_rank(const char* op, const Value& v, std::size_t rank) {
  if (v.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(v.shape()));
  }
}

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

}  // namespace

void warn(const std::string& message) {
  if (g_warnings) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings = enabled; }

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
  os << ']';
  return os.str();
}

std::span<double> detail::Node::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Value Value::constant(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("constant: shape " + shape_string(shape) + " does not hold " + std::to_string(data.size()) +
                     " elements");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Value(std::move(node));
}

Value Value::filled(Shape shape, double fill) {
  auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, fill));
}

Value Value::parameter(Shape shape, std::vector<double> data) {
  Value v = constant(std::move(shape), std::move(data));
  v.node_->requires_grad = true;
  return v;
}

std::size_t Value::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }

std::size_t Value::cols() const {
  std::size_t c = 1;
  for (std::size_t i = 1; i < node_->shape.size(); ++i) c *= node_->shape[i];
  return c;
}

std::span<double> Value::mutable_data() {
  if (!node_->leaf) throw Error("mutable_data: only leaf values may be modified in place");
  return node_->data;
}

double Value::item() const {
  if (size() != 1) throw ShapeError("item: value of shape " + shape_string(shape()) + " is not a scalar");
  return node_->data[0];
}

void Value::zero_grad() {
  node_->grad.clear();
  node_->grad_pending = false;
}

Value record(Shape shape, std::vector<double> data, std::vector<Value> inputs, detail::BackwardFn backward) {
  Value out = Value::constant(std::move(shape), std::move(data));
  if (!g_recording) return out;
  bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Value& v) { return v.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node_;
  node.requires_grad = true;
  node.leaf = false;
  node.backward = std::move(backward);
  node.parents.reserve(inputs.size());
  for (auto& v : inputs) {
    if (v.requires_grad()) node.parents.push_back(v.node_);
  }
  return out;
}

std::span<double> grad_target(const Value& v) {
  if (!v.requires_grad()) return {};
  return v.node()->grad_buffer();
}

bool recording_enabled() { return g_recording; }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

void backward(const Value& loss) {
  if (!loss.defined()) throw Error("backward: undefined value");
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_string(loss.shape()));
  auto* root = loss.node().get();
  if (root->consumed) throw Error("backward: already called on this loss");
  if (!root->requires_grad) throw Error("backward: loss does not depend on any parameter");

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::vector<detail::Node*> leaves;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      if (node->leaf) {
        leaves.push_back(node);
      } else {
        order.push_back(node);
      }
      stack.pop_back();
    }
  }
  for (auto* leaf : leaves) {
    if (leaf->grad_pending) throw Error("backward: parameter gradients were not reset since the last call");
  }

  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->grad.empty()) continue;
    node->backward(*node);
    if (node != root) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
  root->consumed = true;
  for (auto* leaf : leaves) leaf->grad_pending = true;
}

// ---------------------------------------------------------------------------

Value linear(const Value& input, const Value& weight, const Value& bias) {
  require_rank("linear", input, 2);
  require_rank("linear", weight, 2);
  const std::size_t n = input.shape()[0], a = input.shape()[1], b = weight.shape()[1];
  if (weight.shape()[0] != a) shape_mismatch("linear", input.shape(), weight.shape());
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.shape()[0] != b)) shape_mismatch("linear", weight.shape(), bias.shape());

  std::vector<double> out(n * b, 0.0);
  const double* x = input.data().data();
  const double* w = weight.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict row = out.data() + i * b;
    if (has_bias) std::copy_n(bias.data().data(), b, row);
    for (std::size_t k = 0; k < a; ++k) {
      const double xv = x[i * a + k];
      const double* __restrict wr = w + k * b;
      for (std::size_t j = 0; j < b; ++j) row[j] += xv * wr[j];
    }
  }
  std::vector<Value> inputs{input, weight};
  if (has_bias) inputs.push_back(bias);
  return record({n, b}, std::move(out), std::move(inputs), [input, weight, bias, n, a, b](const detail::Node& self) {
    const double* g = self.grad.data();
    if (auto gx = grad_target(input); !gx.empty()) {
      const double* w = weight.data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict gr = g + i * b;
        for (std::size_t k = 0; k < a; ++k) {
          const double* __restrict wr = w + k * b;
          double s = 0.0;
          for (std::size_t j = 0; j < b; ++j) s += gr[j] * wr[j];
          gx[i * a + k] += s;
        }
      }
    }
    if (auto gw = grad_target(weight); !gw.empty()) {
      const double* x = input.data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict gr = g + i * b;
        for (std::size_t k = 0; k < a; ++k) {
          const double xv = x[i * a + k];
          double* __restrict wr = gw.data() + k * b;
          for (std::size_t j = 0; j < b; ++j) wr[j] += xv * gr[j];
        }
      }
    }
    if (bias.defined()) {
      if (auto gb = grad_target(bias); !gb.empty()) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < b; ++j) gb[j] += g[i * b + j];
      }
    }
  });
}

Value matmul(const Value& input, const Value& weight) { return linear(input, weight, Value{}); }

Value add_bias(const Value& input, const Value& bias) {
  require_rank("add_bias", input, 2);
  const std::size_t n = input.shape()[0], c = input.shape()[1];
  if (bias.rank() != 1 || bias.shape()[0] != c) shape_mismatch("add_bias", input.shape(), bias.shape());
  std::vector<double> out(input.data().begin(), input.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.data()[j];
  return record(input.shape(), std::move(out), {input, bias}, [input, bias, n, c](const detail::Node& self) {
    if (auto gx = grad_target(input); !gx.empty()) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (auto gb = grad_target(bias); !gb.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
    }
  });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return record(a.shape(), std::move(out), {a, b}, [a, b](const detail::Node& self) {
    for (const Value* v : {&a, &b}) {
      if (auto g = grad_target(*v); !g.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return record(a.shape(), std::move(out), {a, b}, [a, b](const detail::Node& self) {
    if (auto g = grad_target(a); !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (auto g = grad_target(b); !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return record(a.shape(), std::move(out), {a, b}, [a, b](const detail::Node& self) {
    if (auto g = grad_target(a); !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.data()[i];
    }
    if (auto g = grad_target(b); !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.data()[i];
    }
  });
}

Value scale_rows(const Value& input, const Value& column) {
  require_rank("scale_rows", input, 2);
  const std::size_t n = input.shape()[0], c = input.shape()[1];
  if (column.size() != n) shape_mismatch("scale_rows", input.shape(), column.shape());
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = input.data()[i * c + j] * column.data()[i];
  return record(input.shape(), std::move(out), {input, column}, [input, column, n, c](const detail::Node& self) {
    if (auto g = grad_target(input); !g.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * column.data()[i];
    }
    if (auto g = grad_target(column); !g.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += self.grad[i * c + j] * input.data()[i * c + j];
        g[i] += s;
      }
    }
  });
}

Value elementwise(Unary op, const Value& x, double factor) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  switch (op) {
    case Unary::sin:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::sin(in[i]);
      break;
    case Unary::cos:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::cos(in[i]);
      break;
    case Unary::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Unary::exp:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
      break;
    case Unary::abs:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::abs(in[i]);
      break;
    case Unary::negate:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = -in[i];
      break;
    case Unary::scale:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = factor * in[i];
      break;
    case Unary::reciprocal:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = 1.0 / in[i];
      break;
  }
  return record(x.shape(), std::move(out), {x}, [x, op, factor](const detail::Node& self) {
    auto g = grad_target(x);
    const auto in = x.data();
    const auto& go = self.grad;
    switch (op) {
      case Unary::sin:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * std::cos(in[i]);
        break;
      case Unary::cos:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i] * std::sin(in[i]);
        break;
      case Unary::relu:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += in[i] > 0.0 ? go[i] : 0.0;
        break;
      case Unary::exp:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * self.data[i];
        break;
      case Unary::abs:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += in[i] > 0.0 ? go[i] : (in[i] < 0.0 ? -go[i] : 0.0);
        break;
      case Unary::negate:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
        break;
      case Unary::scale:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * go[i];
        break;
      case Unary::reciprocal:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i] * self.data[i] * self.data[i];
        break;
    }
  });
}

Value add_scalar(const Value& x, double c) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += c;
  return record(x.shape(), std::move(out), {x}, [x](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Value heaviside(const Value& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? 1.0 : 0.0;
  return Value::constant(x.shape(), std::move(out));
}

Value sign(const Value& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  return Value::constant(x.shape(), std::move(out));
}

Value reduce(Reduction op, const Value& x, std::optional<std::size_t> axis) {
  // View the input as [outer x extent x inner] around the reduced axis.
  std::size_t outer = 1, extent = x.size(), inner = 1;
  Shape out_shape;
  if (axis) {
    if (*axis >= x.rank()) {
      throw ShapeError("reduce: axis " + std::to_string(*axis) + " out of range for " + shape_string(x.shape()));
    }
    extent = x.shape()[*axis];
    for (std::size_t d = 0; d < x.rank(); ++d) {
      if (d < *axis) outer *= x.shape()[d];
      if (d > *axis) inner *= x.shape()[d];
      if (d != *axis) out_shape.push_back(x.shape()[d]);
    }
  }
  if (op == Reduction::max && extent == 0) throw ShapeError("reduce: max over an empty axis");

  const auto in = x.data();
  std::vector<double> out(outer * inner, 0.0);
  std::vector<std::size_t> argmax;
  if (op == Reduction::max) argmax.resize(out.size(), 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * extent * inner + i;
      const std::size_t slot = o * inner + i;
      if (op == Reduction::max) {
        std::size_t best = 0;
        double best_v = in[base];
        for (std::size_t e = 1; e < extent; ++e) {
          const double v = in[base + e * inner];
          if (v > best_v) {
            best_v = v;
            best = e;
          }
        }
        out[slot] = best_v;
        argmax[slot] = best;
      } else {
        double s = 0.0;
        for (std::size_t e = 0; e < extent; ++e) s += in[base + e * inner];
        out[slot] = op == Reduction::mean ? (extent ? s / static_cast<double>(extent) : 0.0) : s;
      }
    }
  }
  return record(std::move(out_shape), std::move(out), {x},
                [x, op, outer, extent, inner, argmax = std::move(argmax)](const detail::Node& self) {
                  auto g = grad_target(x);
                  const double norm = op == Reduction::mean ? 1.0 / static_cast<double>(extent) : 1.0;
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t i = 0; i < inner; ++i) {
                      const std::size_t base = o * extent * inner + i;
                      const std::size_t slot = o * inner + i;
                      const double go = self.grad[slot];
                      if (op == Reduction::max) {
                        g[base + argmax[slot] * inner] += go;
                      } else {
                        for (std::size_t e = 0; e < extent; ++e) g[base + e * inner] += go * norm;
                      }
                    }
                  }
                });
}

Value row_norm(const Value& x) {
  require_rank("row_norm", x, 2);
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x.data()[i * c + j] * x.data()[i * c + j];
    out[i] = std::sqrt(s);
  }
  return record({n, 1}, std::move(out), {x}, [x, n, c](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < n; ++i) {
      const double norm = self.data[i];
      if (norm == 0.0) continue;
      const double k = self.grad[i] / norm;
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += k * x.data()[i * c + j];
    }
  });
}

Value reshape(const Value& x, Shape shape) {
  if (shape_size(shape) != x.size()) shape_mismatch("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return record(std::move(shape), std::move(out), {x}, [x](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Value transpose(const Value& x) {
  require_rank("transpose", x, 2);
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * n + i] = x.data()[i * c + j];
  return record({c, n}, std::move(out), {x}, [x, n, c](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * n + i];
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.rows() != n) shape_mismatch("concat_cols", parts[0].shape(), p.shape());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(p.data().data() + i * c, c, out.data() + i * total + offset);
    offset += c;
  }
  return record({n, total}, std::move(out), parts, [parts, n, total](const detail::Node& self) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t c = p.cols();
      if (auto g = grad_target(p); !g.empty()) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + offset + j];
      }
      offset += c;
    }
  });
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank("concat_rows", p, 2);
    if (p.cols() != c) shape_mismatch("concat_rows", parts[0].shape(), p.shape());
    n += p.rows();
  }
  std::vector<double> out;
  out.reserve(n * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return record({n, c}, std::move(out), parts, [parts](const detail::Node& self) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      if (auto g = grad_target(p); !g.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += p.size();
    }
  });
}

Value slice_rows(const Value& x, std::size_t begin, std::size_t end) {
  require_rank("slice_rows", x, 2);
  const std::size_t c = x.shape()[1];
  if (begin > end || end > x.shape()[0]) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + begin * c, x.data().begin() + end * c);
  return record({end - begin, c}, std::move(out), {x}, [x, begin, c](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
  });
}

Value slice_cols(const Value& x, std::size_t begin, std::size_t end) {
  require_rank("slice_cols", x, 2);
  const std::size_t n = x.shape()[0], c = x.shape()[1], w = end - begin;
  if (begin > end || end > c) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     shape_string(x.shape()));
  }
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data().data() + i * c + begin, w, out.data() + i * w);
  return record({n, w}, std::move(out), {x}, [x, begin, n, c, w](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
  });
}

Value gather_rows(const Value& x, std::span<const std::size_t> indices) {
  require_rank("gather_rows", x, 2);
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(indices.size() * c);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                       shape_string(x.shape()));
    }
    std::copy_n(x.data().data() + indices[r] * c, c, out.data() + r * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t m = idx.size();
  return record({m, c}, std::move(out), {x}, [x, c, idx = std::move(idx)](const detail::Node& self) {
    auto g = grad_target(x);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double* __restrict dst = g.data() + idx[r] * c;
      const double* __restrict src = self.grad.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Value tile_rows(const Value& x, std::size_t times) {
  require_rank("tile_rows", x, 2);
  std::vector<double> out;
  out.reserve(x.size() * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), x.data().begin(), x.data().end());
  return record({x.shape()[0] * times, x.shape()[1]}, std::move(out), {x}, [x, times](const detail::Node& self) {
    auto g = grad_target(x);
    const std::size_t m = g.size();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < m; ++i) g[i] += self.grad[t * m + i];
  });
}

// ---------------------------------------------------------------------------

std::size_t Dual::seeds() const {
  if (!has_tangent()) return 0;
  return tangent.rows() / std::max<std::size_t>(value.rows(), 1);
}

Dual dual_constant(const Value& v) { return {v, Value{}}; }

Dual dual_linear(const Dual& x, const Value& weight, const Value& bias) {
  Dual out{linear(x.value, weight, bias), Value{}};
  if (x.has_tangent()) out.tangent = matmul(x.tangent, weight);
  return out;
}

Dual dual_add(const Dual& a, const Dual& b) {
  Dual out{add(a.value, b.value), Value{}};
  if (a.has_tangent() && b.has_tangent()) {
    out.tangent = add(a.tangent, b.tangent);
  } else if (a.has_tangent()) {
    out.tangent = a.tangent;
  } else if (b.has_tangent()) {
    out.tangent = b.tangent;
  }
  return out;
}

Dual dual_mul(const Dual& a, const Dual& b) {
  Dual out{mul(a.value, b.value), Value{}};
  if (a.has_tangent()) out.tangent = mul(a.tangent, tile_rows(b.value, a.seeds()));
  if (b.has_tangent()) {
    Value term = mul(b.tangent, tile_rows(a.value, b.seeds()));
    out.tangent = out.tangent.defined() ? add(out.tangent, term) : term;
  }
  return out;
}

Dual dual_relu(const Dual& x) {
  Dual out{relu(x.value), Value{}};
  if (x.has_tangent()) out.tangent = mul(x.tangent, tile_rows(heaviside(x.value), x.seeds()));
  return out;
}

Dual dual_sin(const Dual& x, double omega) {
  Value arg = scale(x.value, omega);
  Dual out{sin(arg), Value{}};
  if (x.has_tangent()) out.tangent = mul(scale(x.tangent, omega), tile_rows(cos(arg), x.seeds()));
  return out;
}

Dual dual_concat_cols(const Dual& a, const Dual& b) {
  Dual out{concat_cols({a.value, b.value}), Value{}};
  if (!a.has_tangent() && !b.has_tangent()) return out;
  const std::size_t m = std::max(a.seeds(), b.seeds());
  Value ta = a.has_tangent() ? a.tangent : Value::filled({m * a.value.rows(), a.value.cols()}, 0.0);
  Value tb = b.has_tangent() ? b.tangent : Value::filled({m * b.value.rows(), b.value.cols()}, 0.0);
  out.tangent = concat_cols({ta, tb});
  return out;
}

FieldWithGradient evaluate_with_gradient(const ScalarField& field, const Value& positions) {
  if (positions.rank() != 2 || positions.cols() != 3) {
    throw ShapeError("spatial_gradient: positions must be [s x 3], got " + shape_string(positions.shape()));
  }
  const std::size_t s = positions.rows();
  std::vector<double> seed(3 * s * 3, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < s; ++i) seed[(j * s + i) * 3 + j] = 1.0;
  Dual x{positions, Value::constant({3 * s, 3}, std::move(seed))};
  Dual out = field(x);
  if (out.value.rank() != 2 || out.value.rows() != s || out.value.cols() != 1) {
    throw ShapeError("spatial_gradient: field must produce one scalar per sample, got " +
                     shape_string(out.value.shape()));
  }
  Value gradient;
  if (out.has_tangent()) {
    gradient = transpose(reshape(out.tangent, {3, s}));
  } else {
    gradient = Value::filled({s, 3}, 0.0);
  }
  return {out.value, gradient};
}

Value spatial_gradient(const ScalarField& field, const Value& positions) {
  return evaluate_with_gradient(field, positions).gradient;
}

}  // namespace zlse
