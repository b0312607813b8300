#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "zlse/geometry.hpp"

namespace zlse {

// Exact nearest neighbours, ties to the lowest index.
std::vector<std::size_t> nearest_indices(std::span<const Vec3> points, std::span<const Vec3> queries);
std::size_t nearest_brute_force(std::span<const Vec3> points, const Vec3& query);

// mean_a min_b |a - b| + mean_b min_a |a - b|; squared distances on request.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool squared = false);

// 1/2 (mean_a <n_a, n_NN(a)> + mean_b <n_b, n_NN(b)>); |cos| on request.
double normal_consistency(std::span<const Vec3> a, std::span<const Vec3> a_normals, std::span<const Vec3> b,
                          std::span<const Vec3> b_normals, bool absolute = false);

struct MetricReport {
  double chamfer_mean = 0, chamfer_std = 0;
  double nc_mean = 0, nc_std = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct MetricOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool squared = false;
  bool absolute_nc = false;
};

// Meshes are sampled (area weighted, face normals); clouds are used as given
// and must carry normals.
MetricReport evaluate_pair(const Geometry& pred, const Geometry& gt, const MetricOptions& options = {});

// Mean and population standard deviation over several pairs.
MetricReport summarize(const std::vector<MetricReport>& reports);

}  // namespace zlse
