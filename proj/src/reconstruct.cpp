#include "zlse/reconstruct.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <unordered_map>

#include "zlse/errors.hpp"
#include "zlse/transfer.hpp"

namespace zlse {

namespace {

#include "mc_tables.inc"

// Cube corner offsets (x, y, z) and corner pairs per edge.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

Vec3 DenseField::position(std::size_t i, std::size_t j, std::size_t k) const {
  const double d = static_cast<double>(resolution - 1);
  const std::size_t idx[3] = {i, j, k};
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = box.min[a] + (box.max[a] - box.min[a]) * static_cast<double>(idx[a]) / d;
  return p;
}

std::vector<Vec3> lattice_points(std::size_t resolution, const Box& box) {
  if (resolution < 2) throw ConfigError("lattice resolution must be at least 2");
  DenseField f{resolution, box, {}};
  std::vector<Vec3> pts;
  pts.reserve(resolution * resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    for (std::size_t j = 0; j < resolution; ++j)
      for (std::size_t k = 0; k < resolution; ++k) pts.push_back(f.position(i, j, k));
  return pts;
}

DenseField evaluate_dense(const BatchField& field, std::size_t resolution, std::size_t chunk, const Box& box) {
  NoGradGuard guard;
  const auto pts = lattice_points(resolution, box);
  DenseField out{resolution, box, {}};
  out.values.reserve(pts.size());
  const std::size_t step = chunk == 0 ? pts.size() : chunk;
  for (std::size_t begin = 0; begin < pts.size(); begin += step) {
    const std::size_t end = std::min(pts.size(), begin + step);
    Value v = field(positions_value(std::span<const Vec3>(pts).subspan(begin, end - begin)));
    if (v.size() != end - begin) throw ShapeError("evaluate_dense: field returned " + shape_string(v.shape()));
    for (double x : v.data()) {
      if (!std::isfinite(x)) throw NumericError("evaluate_dense: non-finite field value");
      out.values.push_back(x);
    }
  }
  return out;
}

DenseField evaluate_dense(const Model& model, const PointCloud& cloud, std::size_t resolution, std::size_t chunk) {
  NoGradGuard guard;
  const GridVector gv = model.encode(cloud);
  return evaluate_dense([&](const Value& x) { return model.field(gv, x); }, resolution, chunk);
}

TriangleMesh marching_cubes(const DenseField& field, double iso) {
  const std::size_t r = field.resolution;
  if (r < 2 || field.values.size() != r * r * r) throw ShapeError("marching_cubes: inconsistent field");
  TriangleMesh mesh;
  // Key: lower lattice corner * 3 + axis of the lattice edge.
  std::unordered_map<std::uint64_t, std::size_t> vertex_of_edge;

  auto corner_index = [r](std::size_t i, std::size_t j, std::size_t k) { return (i * r + j) * r + k; };

  for (std::size_t i = 0; i + 1 < r; ++i)
    for (std::size_t j = 0; j + 1 < r; ++j)
      for (std::size_t k = 0; k + 1 < r; ++k) {
        std::array<double, 8> v;
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = field.values[corner_index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])];
          if (v[c] < iso) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;

        auto vertex = [&](int e) {
          int a = kEdge[e][0], b = kEdge[e][1];
          int axis = 0;
          while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
          if (kCorner[a][axis] > kCorner[b][axis]) std::swap(a, b);
          const std::size_t ai = i + kCorner[a][0], aj = j + kCorner[a][1], ak = k + kCorner[a][2];
          const std::uint64_t key = corner_index(ai, aj, ak) * 3 + static_cast<std::uint64_t>(axis);
          auto [it, inserted] = vertex_of_edge.try_emplace(key, mesh.vertices.size());
          if (inserted) {
            const double t = (iso - v[a]) / (v[b] - v[a]);
            const Vec3 pa = field.position(ai, aj, ak);
            const Vec3 pb = field.position(i + kCorner[b][0], j + kCorner[b][1], k + kCorner[b][2]);
            mesh.vertices.push_back(pa + (pb - pa) * t);
          }
          return it->second;
        };

        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          const std::size_t a = vertex(kTriTable[cube][t]), b = vertex(kTriTable[cube][t + 1]),
                            c = vertex(kTriTable[cube][t + 2]);
          // The table winds triangles toward the inside; reverse for outward faces.
          mesh.triangles.push_back({a, c, b});
        }
      }
  return mesh;
}

void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (format == MeshFormat::obj) write_obj(out, mesh);
  else write_ply(out, mesh);
  if (!out) throw Error("write failed: " + path.string());
}

void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const auto f = format_from_extension(path);
  if (f == GeometryFormat::obj) return export_mesh(mesh, path, MeshFormat::obj);
  if (f == GeometryFormat::ply) return export_mesh(mesh, path, MeshFormat::ply);
  throw ConfigError("export_mesh: use a .obj or .ply output path");
}

}  // namespace zlse
