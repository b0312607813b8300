#pragma once

#include <cstdio>
#include <string>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "zlse/diff.hpp"
#include "zlse/geometry.hpp"
#include "zlse/params.hpp"
#include "zlse/random.hpp"

namespace testing {

using zlse::operator*;
using zlse::operator+;
using zlse::operator-;

inline std::vector<double> random_data(std::size_t n, zlse::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline zlse::Value random_param(zlse::Shape shape, zlse::Rng& rng, double bound = 1.0) {
  auto n = zlse::shape_size(shape);
  return zlse::Value::parameter(std::move(shape), random_data(n, rng, -bound, bound));
}

inline zlse::Value random_const(zlse::Shape shape, zlse::Rng& rng, double bound = 1.0) {
  auto n = zlse::shape_size(shape);
  return zlse::Value::constant(std::move(shape), random_data(n, rng, -bound, bound));
}

inline std::vector<zlse::Vec3> random_points(std::size_t n, zlse::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<zlse::Vec3> p(n);
  for (auto& q : p) q = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return p;
}

inline std::string format_vec(const zlse::Vec3& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p[0], p[1], p[2]);
  return buf;
}

struct FdResult {
  double max_rel = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::size_t checked = 0;
  // entries outside rel 1e-4, or abs 1e-7 where the gradient is below 1e-3
  std::size_t failures = 0;
};

inline bool fd_agrees(double a, double n) {
  const double d = std::abs(a - n), m = std::max(std::abs(a), std::abs(n));
  if (m < 1e-3) return d <= 1e-7;
  return d <= 1e-4 * m;
}

// Central differences of `loss()` against the gradients left by backward().
// Relative error |a - n| / max(|a|, |n|, floor).
inline FdResult check_gradients(const std::vector<zlse::Value>& params, const std::function<zlse::Value()>& loss,
                                double h = 1e-5, double floor = 1e-7, std::size_t max_per_tensor = 0) {
  for (auto p : params) p.zero_grad();
  zlse::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.size(), 0.0);
  }
  FdResult r;
  zlse::NoGradGuard guard;
  for (std::size_t t = 0; t < params.size(); ++t) {
    zlse::Value p = params[t];
    auto w = p.mutable_data();
    const std::size_t n = max_per_tensor ? std::min(max_per_tensor, w.size()) : w.size();
    const std::size_t stride = max_per_tensor ? std::max<std::size_t>(1, w.size() / n) : 1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = k * stride;
      const double orig = w[i];
      w[i] = orig + h;
      const double up = loss().item();
      w[i] = orig - h;
      const double down = loss().item();
      w[i] = orig;
      const double num = (up - down) / (2 * h);
      const double a = analytic[t][i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst_analytic = a;
        r.worst_numeric = num;
      }
      if (!fd_agrees(a, num)) ++r.failures;
      ++r.checked;
    }
  }
  return r;
}

inline std::vector<zlse::Value> store_values(const zlse::ParamStore& s) {
  std::vector<zlse::Value> v;
  for (const auto& [name, p] : s) v.push_back(p);
  return v;
}

}  // namespace testing

namespace testing {

// Closed UV sphere, outward winding.
inline zlse::TriangleMesh uv_sphere(double r, std::size_t stacks = 48, std::size_t slices = 96) {
  zlse::TriangleMesh m;
  const double pi = 3.14159265358979323846;
  m.vertices.push_back({0, 0, r});
  for (std::size_t i = 1; i < stacks; ++i) {
    const double th = pi * static_cast<double>(i) / stacks;
    for (std::size_t j = 0; j < slices; ++j) {
      const double ph = 2 * pi * static_cast<double>(j) / slices;
      m.vertices.push_back({r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th)});
    }
  }
  m.vertices.push_back({0, 0, -r});
  const std::size_t south = m.vertices.size() - 1;
  auto ring = [&](std::size_t i, std::size_t j) { return 1 + (i - 1) * slices + j % slices; };
  for (std::size_t j = 0; j < slices; ++j) m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
  for (std::size_t i = 1; i + 1 < stacks; ++i)
    for (std::size_t j = 0; j < slices; ++j) {
      m.triangles.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      m.triangles.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  for (std::size_t j = 0; j < slices; ++j) m.triangles.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
  return m;
}

// Points exactly on a sphere with outward normals.
inline zlse::PointCloud sphere_cloud(std::size_t n, double r, std::uint64_t seed) {
  zlse::Rng rng(seed);
  zlse::PointCloud c;
  while (c.positions.size() < n) {
    zlse::Vec3 d{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double l = zlse::norm(d);
    if (l < 1e-3 || l > 1.0) continue;
    d = d * (1.0 / l);
    c.normals.push_back(d);
    c.positions.push_back(d * r);
  }
  return c;
}

// Signed volume; positive for outward winding.
inline double signed_volume(const zlse::TriangleMesh& m) {
  double v = 0;
  for (const auto& t : m.triangles) {
    v += zlse::dot(m.vertices[t[0]], zlse::cross(m.vertices[t[1]], m.vertices[t[2]])) / 6.0;
  }
  return v;
}

}  // namespace testing
