#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "zlse/geometry.hpp"
#include "zlse/model.hpp"

namespace zlse {

// Field values on the (R x R x R) lattice of box corners:
// x_i = box.min + i * edge / (R - 1), stored at (i * R + j) * R + k.
struct DenseField {
  std::size_t resolution = 0;
  Box box;
  std::vector<double> values;

  Vec3 position(std::size_t i, std::size_t j, std::size_t k) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * resolution + j) * resolution + k];
  }
};

std::vector<Vec3> lattice_points(std::size_t resolution, const Box& box = {});

// Maps an [s x 3] batch to [s x 1] values.
using BatchField = std::function<Value(const Value& positions)>;

// Evaluates in chunks of `chunk` lattice points (0 = all at once) without
// recording gradients.
DenseField evaluate_dense(const BatchField& field, std::size_t resolution, std::size_t chunk = 65536,
                          const Box& box = {});
// Encodes `cloud` once and queries the cached grid vector.
DenseField evaluate_dense(const Model& model, const PointCloud& cloud, std::size_t resolution,
                          std::size_t chunk = 65536);

// Vertices are shared between neighbouring cubes; triangles face the side
// where the field exceeds `iso`.
TriangleMesh marching_cubes(const DenseField& field, double iso = 0.0);

enum class MeshFormat { obj, ply };
void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace zlse
