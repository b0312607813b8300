#include "zlse/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "zlse/random.hpp"

namespace zlse {

namespace {

constexpr double kEmptyWeight = 1e-12;

struct Stencil {
  std::size_t cell[8];
  double weight[8];
  // d(weight)/d(x_axis) for every corner, scaled by 1/h.
  double dweight[3][8];
};

// Trilinear stencil over the 8 surrounding cell centers after clamping the
// query into the center hull.
Stencil trilinear_stencil(const GridSpec& spec, const Vec3& query) {
  const std::size_t r = spec.resolution;
  std::size_t base[3];
  double frac[3], inv_h[3];
  bool inside[3];
  for (int a = 0; a < 3; ++a) {
    const double h = spec.spacing(a);
    inv_h[a] = 1.0 / h;
    const double u_raw = (query[a] - spec.box.min[a]) / h - 0.5;
    const double u = std::clamp(u_raw, 0.0, static_cast<double>(r - 1));
    inside[a] = u_raw > 0.0 && u_raw < static_cast<double>(r - 1);
    auto b = static_cast<std::size_t>(std::floor(u));
    b = std::min(b, r - 2);
    base[a] = b;
    frac[a] = u - static_cast<double>(b);
  }
  Stencil s{};
  for (int c = 0; c < 8; ++c) {
    const int ox = (c >> 2) & 1, oy = (c >> 1) & 1, oz = c & 1;
    const double wx = ox ? frac[0] : 1.0 - frac[0];
    const double wy = oy ? frac[1] : 1.0 - frac[1];
    const double wz = oz ? frac[2] : 1.0 - frac[2];
    s.cell[c] = spec.linear_index(base[0] + ox, base[1] + oy, base[2] + oz);
    s.weight[c] = wx * wy * wz;
    // Clamped axes have zero derivative.
    const double dx = inside[0] ? (ox ? 1.0 : -1.0) * inv_h[0] : 0.0;
    const double dy = inside[1] ? (oy ? 1.0 : -1.0) * inv_h[1] : 0.0;
    const double dz = inside[2] ? (oz ? 1.0 : -1.0) * inv_h[2] : 0.0;
    s.dweight[0][c] = dx * wy * wz;
    s.dweight[1][c] = wx * dy * wz;
    s.dweight[2][c] = wx * wy * dz;
  }
  return s;
}

void check_grid(const LatentGrid& grid, const char* op) {
  if (grid.spec.resolution < 2) throw ShapeError(std::string(op) + ": grid resolution must be at least 2");
  if (grid.values.rows() != grid.spec.cell_count() || grid.values.cols() != grid.channels) {
    throw ShapeError(std::string(op) + ": grid values " + shape_string(grid.values.shape()) +
                     " do not match resolution " + std::to_string(grid.spec.resolution));
  }
}

void check_queries(const Value& queries, const char* op) {
  if (queries.rank() != 2 || queries.cols() != 3) {
    throw ShapeError(std::string(op) + ": queries must be [s x 3], got " + shape_string(queries.shape()));
  }
}

void check_points(std::span<const Vec3> points, const Value& features, const GridSpec& spec, const char* op) {
  if (features.rank() != 2 || features.rows() != points.size()) {
    throw ShapeError(std::string(op) + ": features " + shape_string(features.shape()) + " for " +
                     std::to_string(points.size()) + " points");
  }
  if (spec.resolution < 2) throw ShapeError(std::string(op) + ": grid resolution must be at least 2");
  for (const auto& p : points) {
    if (!spec.box.contains(p)) throw GeometryError(std::string(op) + ": point outside the grid domain");
  }
}

}  // namespace

Vec3 GridSpec::cell_center(std::size_t i, std::size_t j, std::size_t k) const {
  const std::size_t idx[3] = {i, j, k};
  Vec3 c{};
  for (int a = 0; a < 3; ++a) c[a] = box.min[a] + (static_cast<double>(idx[a]) + 0.5) * spacing(a);
  return c;
}

Box GridSpec::center_hull() const {
  Box hull;
  for (int a = 0; a < 3; ++a) {
    hull.min[a] = box.min[a] + 0.5 * spacing(a);
    hull.max[a] = box.max[a] - 0.5 * spacing(a);
  }
  return hull;
}

double hat_weight(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 1.0 - ax : 0.0;
}

void pic_point_weights(const Vec3& point, const GridSpec& spec, std::vector<CellWeight>& out) {
  out.clear();
  const long r = static_cast<long>(spec.resolution);
  long lo[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<long>(std::floor((point[a] - spec.box.min[a]) / spec.spacing(a) - 0.5));
  }
  for (int c = 0; c < 8; ++c) {
    const long idx[3] = {lo[0] + ((c >> 2) & 1), lo[1] + ((c >> 1) & 1), lo[2] + (c & 1)};
    if (idx[0] < 0 || idx[1] < 0 || idx[2] < 0 || idx[0] >= r || idx[1] >= r || idx[2] >= r) continue;
    const Vec3 center = spec.cell_center(idx[0], idx[1], idx[2]);
    double w = 1.0;
    for (int a = 0; a < 3; ++a) w *= hat_weight((point[a] - center[a]) / spec.spacing(a));
    if (w == 0.0) continue;
    out.push_back({spec.linear_index(idx[0], idx[1], idx[2]), w});
  }
}

LatentGrid pic_project(std::span<const Vec3> points, const Value& features, const GridSpec& spec,
                       const PicOptions& options) {
  check_points(points, features, spec, "pic_project");
  const std::size_t n = points.size(), f = features.cols();
  Rng rng(options.seed);

  // Contributions are produced in point-index order, so every cell
  // accumulates its points in that order.
  struct Contribution {
    std::size_t cell, point;
    double weight;
  };
  std::vector<Contribution> contributions;
  contributions.reserve(n * 8);
  std::vector<double> cell_weight(spec.cell_count(), 0.0);
  std::vector<CellWeight> stencil;
  for (std::size_t p = 0; p < n; ++p) {
    pic_point_weights(points[p], spec, stencil);
    for (const auto& [cell, w] : stencil) {
      if (options.dropout > 0.0 && rng.uniform() < options.dropout) continue;
      contributions.push_back({cell, p, w});
      cell_weight[cell] += w;
    }
  }
  // Normalize in place: weight becomes w_ip / w_i.
  for (auto& c : contributions) {
    const double wi = cell_weight[c.cell];
    c.weight = wi > kEmptyWeight ? c.weight / wi : 0.0;
  }

  // f_i = f_a + sum_p w_ip / w_i (f_p - f_a) with a the first contributing
  // point; equal to the plain weighted mean but exact for constant fields.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> anchor(spec.cell_count(), kNone);
  std::vector<double> anchor_coeff(spec.cell_count(), 1.0);
  for (const auto& c : contributions) {
    if (c.weight == 0.0) continue;
    if (anchor[c.cell] == kNone) anchor[c.cell] = c.point;
    anchor_coeff[c.cell] -= c.weight;
  }
  std::vector<double> out(spec.cell_count() * f, 0.0);
  const double* src = features.data().data();
  for (std::size_t cell = 0; cell < anchor.size(); ++cell) {
    if (anchor[cell] != kNone) std::copy_n(src + anchor[cell] * f, f, out.data() + cell * f);
  }
  for (const auto& c : contributions) {
    if (c.weight == 0.0) continue;
    double* __restrict dst = out.data() + c.cell * f;
    const double* __restrict fp = src + c.point * f;
    const double* __restrict fa = src + anchor[c.cell] * f;
    for (std::size_t j = 0; j < f; ++j) dst[j] += c.weight * (fp[j] - fa[j]);
  }
  Value values = record({spec.cell_count(), f}, std::move(out), {features},
                        [features, f, contributions = std::move(contributions), anchor = std::move(anchor),
                         anchor_coeff = std::move(anchor_coeff)](const detail::Node& self) {
                          auto g = grad_target(features);
                          for (std::size_t cell = 0; cell < anchor.size(); ++cell) {
                            if (anchor[cell] == kNone) continue;
                            double* __restrict dst = g.data() + anchor[cell] * f;
                            const double* __restrict go = self.grad.data() + cell * f;
                            for (std::size_t j = 0; j < f; ++j) dst[j] += anchor_coeff[cell] * go[j];
                          }
                          for (const auto& c : contributions) {
                            double* __restrict dst = g.data() + c.point * f;
                            const double* __restrict go = self.grad.data() + c.cell * f;
                            for (std::size_t j = 0; j < f; ++j) dst[j] += c.weight * go[j];
                          }
                        });
  return {spec, f, values};
}

LatentGrid maxpool_voxelize(std::span<const Vec3> points, const Value& features, const GridSpec& spec) {
  check_points(points, features, spec, "maxpool_voxelize");
  const std::size_t n = points.size(), f = features.cols(), r = spec.resolution;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<double> out(spec.cell_count() * f, 0.0);
  std::vector<std::size_t> arg(spec.cell_count() * f, kNone);
  const auto data = features.data();
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const double u = (points[p][a] - spec.box.min[a]) / spec.spacing(a);
      idx[a] = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, std::floor(u))), r - 1);
    }
    const std::size_t cell = spec.linear_index(idx[0], idx[1], idx[2]);
    for (std::size_t j = 0; j < f; ++j) {
      const std::size_t slot = cell * f + j;
      const double v = data[p * f + j];
      if (arg[slot] == kNone || v > out[slot]) {
        out[slot] = v;
        arg[slot] = p;
      }
    }
  }
  Value values = record({spec.cell_count(), f}, std::move(out), {features},
                        [features, f, arg = std::move(arg)](const detail::Node& self) {
                          auto g = grad_target(features);
                          for (std::size_t slot = 0; slot < arg.size(); ++slot) {
                            if (arg[slot] != kNone) g[arg[slot] * f + slot % f] += self.grad[slot];
                          }
                        });
  return {spec, f, values};
}

Value trilinear_sample(const LatentGrid& grid, const Value& queries) {
  check_grid(grid, "trilinear_sample");
  check_queries(queries, "trilinear_sample");
  const std::size_t s = queries.rows(), f = grid.channels;
  std::vector<Stencil> stencils(s);
  std::vector<double> out(s * f, 0.0);
  const double* g = grid.values.data().data();
  const double* q = queries.data().data();
  for (std::size_t i = 0; i < s; ++i) {
    stencils[i] = trilinear_stencil(grid.spec, {q[3 * i], q[3 * i + 1], q[3 * i + 2]});
    double* __restrict row = out.data() + i * f;
    for (int c = 0; c < 8; ++c) {
      const double w = stencils[i].weight[c];
      const double* __restrict src = g + stencils[i].cell[c] * f;
      for (std::size_t j = 0; j < f; ++j) row[j] += w * src[j];
    }
  }
  Value values = grid.values;
  return record({s, f}, std::move(out), {values, queries},
                [values, queries, f, stencils = std::move(stencils)](const detail::Node& self) {
                  const double* go = self.grad.data();
                  if (auto gg = grad_target(values); !gg.empty()) {
                    for (std::size_t i = 0; i < stencils.size(); ++i) {
                      for (int c = 0; c < 8; ++c) {
                        const double w = stencils[i].weight[c];
                        double* __restrict dst = gg.data() + stencils[i].cell[c] * f;
                        const double* __restrict src = go + i * f;
                        for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
                      }
                    }
                  }
                  if (auto gq = grad_target(queries); !gq.empty()) {
                    const double* gv = values.data().data();
                    for (std::size_t i = 0; i < stencils.size(); ++i) {
                      for (int c = 0; c < 8; ++c) {
                        const double* cell = gv + stencils[i].cell[c] * f;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < f; ++j) dot += cell[j] * go[i * f + j];
                        for (int a = 0; a < 3; ++a) gq[3 * i + a] += stencils[i].dweight[a][c] * dot;
                      }
                    }
                  }
                });
}

namespace {

// Directional derivative of trilinear sampling: row (j * s + i) of the result
// is sum_a d(sample_i)/d(x_a) * directions[j * s + i, a].
Value trilinear_directional(const LatentGrid& grid, const Value& queries, const Value& directions) {
  const std::size_t s = queries.rows(), f = grid.channels;
  const std::size_t m = s ? directions.rows() / s : 0;
  if (directions.cols() != 3 || directions.rows() != m * s) {
    throw ShapeError("trilinear tangent: directions " + shape_string(directions.shape()) + " for " +
                     std::to_string(s) + " queries");
  }
  std::vector<Stencil> stencils(s);
  const double* q = queries.data().data();
  for (std::size_t i = 0; i < s; ++i) stencils[i] = trilinear_stencil(grid.spec, {q[3 * i], q[3 * i + 1], q[3 * i + 2]});

  // Per-row corner coefficients: sum_a dweight[a][c] * direction[a].
  std::vector<double> coeff(m * s * 8, 0.0);
  const double* d = directions.data().data();
  for (std::size_t row = 0; row < m * s; ++row) {
    const auto& st = stencils[row % s];
    for (int c = 0; c < 8; ++c) {
      coeff[row * 8 + c] =
          st.dweight[0][c] * d[3 * row] + st.dweight[1][c] * d[3 * row + 1] + st.dweight[2][c] * d[3 * row + 2];
    }
  }
  std::vector<double> out(m * s * f, 0.0);
  const double* g = grid.values.data().data();
  for (std::size_t row = 0; row < m * s; ++row) {
    const auto& st = stencils[row % s];
    double* __restrict dst = out.data() + row * f;
    for (int c = 0; c < 8; ++c) {
      const double w = coeff[row * 8 + c];
      if (w == 0.0) continue;
      const double* __restrict src = g + st.cell[c] * f;
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  Value values = grid.values;
  return record({m * s, f}, std::move(out), {values},
                [values, f, s, stencils = std::move(stencils), coeff = std::move(coeff)](const detail::Node& self) {
                  auto gg = grad_target(values);
                  const std::size_t rows = coeff.size() / 8;
                  for (std::size_t row = 0; row < rows; ++row) {
                    const auto& st = stencils[row % s];
                    const double* __restrict src = self.grad.data() + row * f;
                    for (int c = 0; c < 8; ++c) {
                      const double w = coeff[row * 8 + c];
                      if (w == 0.0) continue;
                      double* __restrict dst = gg.data() + st.cell[c] * f;
                      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
                    }
                  }
                });
}

}  // namespace

Value trilinear_gradient(const LatentGrid& grid, const Value& queries, int axis) {
  check_grid(grid, "trilinear_gradient");
  check_queries(queries, "trilinear_gradient");
  if (axis < 0 || axis > 2) throw Error("trilinear_gradient: axis must be 0, 1 or 2");
  std::vector<double> dir(queries.rows() * 3, 0.0);
  for (std::size_t i = 0; i < queries.rows(); ++i) dir[3 * i + axis] = 1.0;
  return trilinear_directional(grid, queries, Value::constant({queries.rows(), 3}, std::move(dir)));
}

Value nearest_sample(const LatentGrid& grid, const Value& queries) {
  check_grid(grid, "nearest_sample");
  check_queries(queries, "nearest_sample");
  const std::size_t s = queries.rows(), r = grid.spec.resolution;
  std::vector<std::size_t> cells(s);
  for (std::size_t i = 0; i < s; ++i) {
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const double u = (queries(i, a) - grid.spec.box.min[a]) / grid.spec.spacing(a);
      double fl = std::floor(u);
      // On a face the two centers are equidistant: take the lower cell.
      if (fl == u) fl -= 1.0;
      idx[a] = static_cast<std::size_t>(std::clamp(fl, 0.0, static_cast<double>(r - 1)));
    }
    cells[i] = grid.spec.linear_index(idx[0], idx[1], idx[2]);
  }
  return gather_rows(grid.values, cells);
}

Value sample_grid(const LatentGrid& grid, const Value& queries, SampleMode mode) {
  return mode == SampleMode::trilinear ? trilinear_sample(grid, queries) : nearest_sample(grid, queries);
}

Dual sample_grid(const LatentGrid& grid, const Dual& queries, SampleMode mode) {
  Dual out{sample_grid(grid, queries.value, mode), Value{}};
  if (!queries.has_tangent()) return out;
  if (mode == SampleMode::nearest) {
    // Piecewise constant in position.
    out.tangent = Value::filled({queries.tangent.rows(), grid.channels}, 0.0);
  } else {
    out.tangent = trilinear_directional(grid, queries.value, queries.tangent);
  }
  return out;
}

Value positions_value(std::span<const Vec3> points) {
  std::vector<double> data;
  data.reserve(points.size() * 3);
  for (const auto& p : points) data.insert(data.end(), p.begin(), p.end());
  return Value::constant({points.size(), 3}, std::move(data));
}

}  // namespace zlse
