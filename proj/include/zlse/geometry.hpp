#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace zlse {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Axis-aligned domain box; the network domain is always [-1, 1]^3.
struct Box {
  Vec3 min{-1.0, -1.0, -1.0};
  Vec3 max{1.0, 1.0, 1.0};

  bool contains(const Vec3& p) const;
  Vec3 clamp(const Vec3& p) const;
};

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;  // empty or one unit vector per position

  std::size_t size() const { return positions.size(); }
  bool has_normals() const { return !normals.empty(); }
  // Throws GeometryError when an invariant is broken.
  void validate() const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<Vec3> normals;  // optional per-vertex normals

  double area() const;
  void validate() const;
};

using Geometry = std::variant<TriangleMesh, PointCloud>;

enum class GeometryFormat { obj, ply, xyz };

std::optional<GeometryFormat> format_from_extension(const std::filesystem::path& path);

// OBJ files without faces and PLY files without a face element load as point
// clouds. Parse failures raise ParseError naming the line.
Geometry load_geometry(const std::filesystem::path& path, GeometryFormat format);
Geometry load_geometry(const std::filesystem::path& path);
Geometry read_geometry(std::istream& in, GeometryFormat format);

void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_ply(std::ostream& out, const TriangleMesh& mesh);
void write_xyz(std::ostream& out, const PointCloud& cloud);

// p' = (p + translation) * scale
struct NormalizationTransform {
  Vec3 translation{0.0, 0.0, 0.0};
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p + translation) * scale; }
  Vec3 invert(const Vec3& p) const { return p * (1.0 / scale) - translation; }
};

inline constexpr double kDefaultMargin = 0.05;

// Centers the bounding box at the origin and maps its longest edge to
// 2 * (1 - margin).
NormalizationTransform unit_box_transform(std::span<const Vec3> points, double margin = kDefaultMargin);
std::pair<PointCloud, NormalizationTransform> normalize_to_unit_box(const PointCloud& cloud,
                                                                    double margin = kDefaultMargin);
std::pair<TriangleMesh, NormalizationTransform> normalize_to_unit_box(const TriangleMesh& mesh,
                                                                      double margin = kDefaultMargin);

// Directed k-NN graph stored vertex-major: neighbors of i occupy
// [i*k, (i+1)*k), nearest first.
struct KnnGraph {
  std::size_t vertex_count = 0;
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;

  std::span<const std::size_t> neighbors_of(std::size_t i) const { return {neighbors.data() + i * k, k}; }
};

// k is clamped to n-1 (with a warning). Ties go to the lower index.
KnnGraph build_knn_graph(std::span<const Vec3> points, std::size_t k);

// Exact nearest-neighbor queries; ties resolve to the lowest point index.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  std::size_t nearest(const Vec3& query) const;
  // Sorted by (squared distance, index). `exclude` skips one point index.
  std::vector<std::size_t> k_nearest(const Vec3& query, std::size_t k,
                                     std::optional<std::size_t> exclude = std::nullopt) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_ for leaves
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
  };
  struct Best {
    double d2;
    std::size_t index;
    bool operator<(const Best& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void nearest_in(std::int32_t node, const Vec3& q, Best& best) const;
  void knn_in(std::int32_t node, const Vec3& q, std::size_t k, std::optional<std::size_t> exclude,
              std::vector<Best>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

// Area-weighted triangle choice, uniform barycentric position, face normal.
SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

std::vector<Vec3> sample_offsurface_uniform(const Box& domain, std::size_t count, std::uint64_t seed);

// p' = p + u n with u ~ U(-delta, delta), clamped to the domain.
std::vector<Vec3> sample_near_surface(std::span<const Vec3> points, std::span<const Vec3> normals, double delta,
                                      std::uint64_t seed, const Box& domain = {});

// Same displacement model for encoder inputs (noise augmentation); no clamping.
std::vector<Vec3> perturb_along_normals(std::span<const Vec3> points, std::span<const Vec3> normals, double sigma,
                                        std::uint64_t seed);

// The three training sample classes.
struct SampleSet {
  std::vector<Vec3> surface;
  std::vector<Vec3> surface_normals;  // may be empty
  std::vector<Vec3> offsurface_uniform;
  std::vector<Vec3> near_surface;
  Box domain;

  std::size_t total() const { return surface.size() + offsurface_uniform.size() + near_surface.size(); }
};

}  // namespace zlse
