#pragma once

// Point <-> grid feature transfers.
//
// Grids are cell-centered: cell (i, j, k) of a resolution-r grid over `box`
// has its center at box.min + (i + 1/2, j + 1/2, k + 1/2) * h with
// h = edge / r. Values are stored [r^3 x f] with linear index (i * r + j) * r + k.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zlse/diff.hpp"
#include "zlse/geometry.hpp"

namespace zlse {

struct GridSpec {
  std::size_t resolution = 0;
  Box box;

  double spacing(int axis = 0) const { return (box.max[axis] - box.min[axis]) / static_cast<double>(resolution); }
  std::size_t cell_count() const { return resolution * resolution * resolution; }
  std::size_t linear_index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * resolution + j) * resolution + k;
  }
  Vec3 cell_center(std::size_t i, std::size_t j, std::size_t k) const;
  // Sub-box spanned by the outermost cell centers.
  Box center_hull() const;
};

struct LatentGrid {
  GridSpec spec;
  std::size_t channels = 0;
  Value values;  // [r^3 x channels]
};

// Linear interpolation kernel N(x) = max(0, 1 - |x|).
double hat_weight(double x);

struct CellWeight {
  std::size_t cell;
  double weight;
};

// Unnormalized w_ip for every existing cell among the 8 centers around `point`
// (nonzero weights only).
void pic_point_weights(const Vec3& point, const GridSpec& spec, std::vector<CellWeight>& out);

struct PicOptions {
  // Probability of dropping each (point, cell) contribution; 0 disables.
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

// Normalized hat-kernel scatter: f_i = sum_p w_ip f_p / sum_p w_ip, with w_ip
// the product of per-axis hat weights. Cells whose total weight is <= 1e-12
// hold zeros. Differentiable with respect to `features` only.
LatentGrid pic_project(std::span<const Vec3> points, const Value& features, const GridSpec& spec,
                       const PicOptions& options = {});

// Per-cell, per-channel maximum over the points inside the cell; empty cells
// hold zeros. The gradient goes to the lowest-index maximizer.
LatentGrid maxpool_voxelize(std::span<const Vec3> points, const Value& features, const GridSpec& spec);

// Trilinear interpolation over cell centers. Queries are clamped to the
// center hull first. Differentiable with respect to the grid values and,
// to first order, the query positions.
Value trilinear_sample(const LatentGrid& grid, const Value& queries);

// d(trilinear_sample)/d(query axis); linear in the grid values and
// differentiable with respect to them.
Value trilinear_gradient(const LatentGrid& grid, const Value& queries, int axis);

// Value of the cell with the closest center (ties to the lowest index).
Value nearest_sample(const LatentGrid& grid, const Value& queries);

enum class SampleMode { trilinear, nearest };

Value sample_grid(const LatentGrid& grid, const Value& queries, SampleMode mode);

// Sampling with forward tangents: the result tangent block j is
// sum_a d(sample)/d(x_a) * tangent_j[:, a]. Query tangents are treated as
// data (no gradient flows into them).
Dual sample_grid(const LatentGrid& grid, const Dual& queries, SampleMode mode);

// Turns an [s x 3] position array into a constant Value.
Value positions_value(std::span<const Vec3> points);

}  // namespace zlse
