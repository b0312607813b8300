#include "zlse/metrics.hpp"

#include <cmath>

#include "zlse/errors.hpp"
#include "zlse/random.hpp"

namespace zlse {

std::vector<std::size_t> nearest_indices(std::span<const Vec3> points, std::span<const Vec3> queries) {
  if (points.empty()) throw GeometryError("nearest neighbour search over an empty set");
  KdTree tree(points);
  std::vector<std::size_t> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = tree.nearest(queries[i]);
  return out;
}

std::size_t nearest_brute_force(std::span<const Vec3> points, const Vec3& query) {
  if (points.empty()) throw GeometryError("nearest neighbour search over an empty set");
  std::size_t best = 0;
  double best_d2 = squared_distance(points[0], query);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d2 = squared_distance(points[i], query);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

namespace {

double directional(std::span<const Vec3> from, std::span<const Vec3> to, bool squared) {
  const auto nn = nearest_indices(to, from);
  double sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double d2 = squared_distance(from[i], to[nn[i]]);
    sum += squared ? d2 : std::sqrt(d2);
  }
  return sum / static_cast<double>(from.size());
}

double directional_nc(std::span<const Vec3> from, std::span<const Vec3> from_n, std::span<const Vec3> to,
                      std::span<const Vec3> to_n, bool absolute) {
  const auto nn = nearest_indices(to, from);
  double sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Vec3& a = from_n[i];
    const Vec3& b = to_n[nn[i]];
    const double c = dot(a, b) / (norm(a) * norm(b));
    sum += absolute ? std::abs(c) : c;
  }
  return sum / static_cast<double>(from.size());
}

struct SampledSurface {
  std::vector<Vec3> points, normals;
};

SampledSurface surface_of(const Geometry& g, const MetricOptions& o, std::uint64_t stream) {
  if (const auto* mesh = std::get_if<TriangleMesh>(&g)) {
    if (mesh->triangles.empty()) throw GeometryError("metrics: empty mesh");
    auto s = sample_surface(*mesh, o.samples, mix_seed(o.seed, stream));
    return {std::move(s.points), std::move(s.normals)};
  }
  const auto& cloud = std::get<PointCloud>(g);
  if (cloud.size() == 0) throw GeometryError("metrics: empty point cloud");
  if (!cloud.has_normals()) throw GeometryError("metrics: point cloud without normals");
  return {cloud.positions, cloud.normals};
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool squared) {
  if (a.empty() || b.empty()) throw GeometryError("chamfer: empty point set");
  return directional(a, b, squared) + directional(b, a, squared);
}

double normal_consistency(std::span<const Vec3> a, std::span<const Vec3> a_normals, std::span<const Vec3> b,
                          std::span<const Vec3> b_normals, bool absolute) {
  if (a.empty() || b.empty()) throw GeometryError("normal_consistency: empty point set");
  if (a_normals.size() != a.size() || b_normals.size() != b.size()) {
    throw GeometryError("normal_consistency: missing normals");
  }
  return 0.5 * (directional_nc(a, a_normals, b, b_normals, absolute) +
                directional_nc(b, b_normals, a, a_normals, absolute));
}

nlohmann::json MetricReport::to_json() const {
  return {{"chamfer_mean", chamfer_mean}, {"chamfer_std", chamfer_std}, {"nc_mean", nc_mean},
          {"nc_std", nc_std},             {"samples", samples},         {"seed", seed}};
}

MetricReport evaluate_pair(const Geometry& pred, const Geometry& gt, const MetricOptions& options) {
  const auto p = surface_of(pred, options, 1);
  const auto g = surface_of(gt, options, 2);
  MetricReport r;
  r.chamfer_mean = chamfer(p.points, g.points, options.squared);
  r.nc_mean = normal_consistency(p.points, p.normals, g.points, g.normals, options.absolute_nc);
  r.samples = options.samples;
  r.seed = options.seed;
  return r;
}

MetricReport summarize(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw Error("summarize: no reports");
  MetricReport out = reports.front();
  const double n = static_cast<double>(reports.size());
  double cd = 0, nc = 0;
  for (const auto& r : reports) {
    cd += r.chamfer_mean;
    nc += r.nc_mean;
  }
  out.chamfer_mean = cd / n;
  out.nc_mean = nc / n;
  double vcd = 0, vnc = 0;
  for (const auto& r : reports) {
    vcd += (r.chamfer_mean - out.chamfer_mean) * (r.chamfer_mean - out.chamfer_mean);
    vnc += (r.nc_mean - out.nc_mean) * (r.nc_mean - out.nc_mean);
  }
  out.chamfer_std = std::sqrt(vcd / n);
  out.nc_std = std::sqrt(vnc / n);
  return out;
}

}  // namespace zlse
