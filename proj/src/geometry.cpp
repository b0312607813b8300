#include "zlse/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "zlse/errors.hpp"
#include "zlse/random.hpp"

namespace zlse {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& token, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    parse_fail(line, "malformed number '" + token + "'");
  }
  if (used != token.size()) parse_fail(line, "malformed number '" + token + "'");
  if (!std::isfinite(v)) parse_fail(line, "non-finite value '" + token + "'");
  return v;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

Vec3 unit_normal(const Vec3& n, std::size_t line) {
  const double len = norm(n);
  if (!(len > 0.0)) parse_fail(line, "zero-length normal");
  return n * (1.0 / len);
}

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

PointCloud read_xyz(std::istream& in) {
  PointCloud cloud;
  std::string raw;
  std::size_t line_no = 0;
  int columns = -1;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tokens = tokenize(strip_comment(raw));
    if (tokens.empty()) continue;
    if (tokens.size() != 3 && tokens.size() != 6) {
      parse_fail(line_no, "expected 3 or 6 columns, got " + std::to_string(tokens.size()));
    }
    if (columns < 0) columns = static_cast<int>(tokens.size());
    if (static_cast<int>(tokens.size()) != columns) parse_fail(line_no, "inconsistent column count");
    Vec3 p{parse_number(tokens[0], line_no), parse_number(tokens[1], line_no), parse_number(tokens[2], line_no)};
    cloud.positions.push_back(p);
    if (columns == 6) {
      Vec3 n{parse_number(tokens[3], line_no), parse_number(tokens[4], line_no), parse_number(tokens[5], line_no)};
      cloud.normals.push_back(unit_normal(n, line_no));
    }
  }
  if (cloud.positions.empty()) throw ParseError("xyz: no points");
  return cloud;
}

std::size_t obj_index(const std::string& token, std::size_t count, std::size_t line) {
  // "v", "v/vt", "v//vn" or "v/vt/vn"; only the vertex index is used here.
  const auto head = token.substr(0, token.find('/'));
  long long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoll(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    parse_fail(line, "malformed face index '" + token + "'");
  }
  long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
  if (idx == 0 || resolved < 0 || resolved >= static_cast<long long>(count)) {
    parse_fail(line, "face index " + std::to_string(idx) + " out of range");
  }
  return static_cast<std::size_t>(resolved);
}

std::optional<std::size_t> obj_normal_index(const std::string& token, std::size_t count, std::size_t line) {
  auto first = token.find('/');
  if (first == std::string::npos) return std::nullopt;
  auto second = token.find('/', first + 1);
  if (second == std::string::npos) return std::nullopt;
  return obj_index(token.substr(second + 1), count, line);
}

Geometry read_obj(std::istream& in) {
  TriangleMesh mesh;
  std::vector<Vec3> vn;
  std::vector<std::optional<std::size_t>> vertex_normal;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tokens = tokenize(strip_comment(raw));
    if (tokens.empty()) continue;
    const auto& tag = tokens[0];
    if (tag == "v") {
      if (tokens.size() < 4) parse_fail(line_no, "vertex needs 3 coordinates");
      mesh.vertices.push_back(
          {parse_number(tokens[1], line_no), parse_number(tokens[2], line_no), parse_number(tokens[3], line_no)});
    } else if (tag == "vn") {
      if (tokens.size() != 4) parse_fail(line_no, "normal needs 3 components");
      vn.push_back(unit_normal(
          {parse_number(tokens[1], line_no), parse_number(tokens[2], line_no), parse_number(tokens[3], line_no)},
          line_no));
    } else if (tag == "f") {
      if (tokens.size() < 4) parse_fail(line_no, "face needs at least 3 vertices");
      std::vector<std::size_t> idx;
      vertex_normal.resize(mesh.vertices.size());
      for (std::size_t t = 1; t < tokens.size(); ++t) {
        idx.push_back(obj_index(tokens[t], mesh.vertices.size(), line_no));
        if (auto n = obj_normal_index(tokens[t], vn.size(), line_no)) vertex_normal[idx.back()] = *n;
      }
      for (std::size_t t = 1; t + 1 < idx.size(); ++t) mesh.triangles.push_back({idx[0], idx[t], idx[t + 1]});
    } else if (tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" || tag == "mtllib") {
      continue;
    } else {
      parse_fail(line_no, "unsupported OBJ element '" + tag + "'");
    }
  }

  // Per-vertex normals: through face references, or positionally when counts match.
  std::vector<Vec3> normals;
  vertex_normal.resize(mesh.vertices.size());
  const bool referenced = std::any_of(vertex_normal.begin(), vertex_normal.end(), [](auto& o) { return o.has_value(); });
  if (referenced && std::all_of(vertex_normal.begin(), vertex_normal.end(), [](auto& o) { return o.has_value(); })) {
    for (auto& o : vertex_normal) normals.push_back(vn[*o]);
  } else if (!referenced && vn.size() == mesh.vertices.size()) {
    normals = vn;
  }

  // vertices without faces read as a cloud; a file with neither is an empty mesh
  if (mesh.triangles.empty() && !mesh.vertices.empty()) {
    PointCloud cloud{std::move(mesh.vertices), std::move(normals)};
    return cloud;
  }
  mesh.normals = std::move(normals);
  return mesh;
}

Geometry read_ply(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  auto next_line = [&](std::vector<std::string>& tokens) {
    while (std::getline(in, raw)) {
      ++line_no;
      tokens = tokenize(raw);
      if (!tokens.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> tokens;
  if (!next_line(tokens) || tokens[0] != "ply") parse_fail(line_no, "missing 'ply' magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
    bool list = false;
  };
  std::vector<Element> elements;
  bool header_done = false;
  while (next_line(tokens)) {
    const auto& key = tokens[0];
    if (key == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") parse_fail(line_no, "only ASCII PLY is supported");
    } else if (key == "comment" || key == "obj_info") {
      continue;
    } else if (key == "element") {
      if (tokens.size() != 3) parse_fail(line_no, "malformed element declaration");
      if (tokens[1] != "vertex" && tokens[1] != "face") {
        parse_fail(line_no, "unsupported PLY element '" + tokens[1] + "'");
      }
      Element e;
      e.name = tokens[1];
      e.count = static_cast<std::size_t>(parse_number(tokens[2], line_no));
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) parse_fail(line_no, "property before element");
      auto& e = elements.back();
      if (tokens.size() >= 2 && tokens[1] == "list") {
        if (e.name != "face" || tokens.size() != 5) parse_fail(line_no, "unsupported list property");
        e.list = true;
        e.properties.push_back(tokens[4]);
      } else {
        if (tokens.size() != 3) parse_fail(line_no, "malformed property");
        e.properties.push_back(tokens[2]);
      }
    } else if (key == "end_header") {
      header_done = true;
      break;
    } else {
      parse_fail(line_no, "unexpected header keyword '" + key + "'");
    }
  }
  if (!header_done) parse_fail(line_no, "missing end_header");

  TriangleMesh mesh;
  bool has_faces = false;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      auto find = [&](const char* name) -> std::optional<std::size_t> {
        auto it = std::find(e.properties.begin(), e.properties.end(), name);
        if (it == e.properties.end()) return std::nullopt;
        return static_cast<std::size_t>(it - e.properties.begin());
      };
      auto x = find("x"), y = find("y"), z = find("z");
      auto nx = find("nx"), ny = find("ny"), nz = find("nz");
      if (!x || !y || !z) parse_fail(line_no, "vertex element lacks x/y/z");
      const bool with_normals = nx && ny && nz;
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!next_line(tokens)) parse_fail(line_no, "unexpected end of vertex data");
        if (tokens.size() != e.properties.size()) parse_fail(line_no, "vertex property count mismatch");
        mesh.vertices.push_back(
            {parse_number(tokens[*x], line_no), parse_number(tokens[*y], line_no), parse_number(tokens[*z], line_no)});
        if (with_normals) {
          mesh.normals.push_back(unit_normal({parse_number(tokens[*nx], line_no), parse_number(tokens[*ny], line_no),
                                              parse_number(tokens[*nz], line_no)},
                                             line_no));
        }
      }
    } else {
      has_faces = true;
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!next_line(tokens)) parse_fail(line_no, "unexpected end of face data");
        if (tokens.size() != 4 || tokens[0] != "3") parse_fail(line_no, "only triangle faces are supported");
        std::array<std::size_t, 3> tri{};
        for (int k = 0; k < 3; ++k) {
          const double v = parse_number(tokens[k + 1], line_no);
          if (v < 0 || v >= static_cast<double>(mesh.vertices.size()) || v != std::floor(v)) {
            parse_fail(line_no, "face index out of range");
          }
          tri[k] = static_cast<std::size_t>(v);
        }
        mesh.triangles.push_back(tri);
      }
    }
  }
  if (!has_faces) return PointCloud{std::move(mesh.vertices), std::move(mesh.normals)};
  return mesh;
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out << buf;
}

void write_vec(std::ostream& out, const Vec3& v) {
  write_number(out, v[0]);
  out << ' ';
  write_number(out, v[1]);
  out << ' ';
  write_number(out, v[2]);
}

}  // namespace

bool Box::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= min[a] && p[a] <= max[a])) return false;
  }
  return true;
}

Vec3 Box::clamp(const Vec3& p) const {
  return {std::clamp(p[0], min[0], max[0]), std::clamp(p[1], min[1], max[1]), std::clamp(p[2], min[2], max[2])};
}

void PointCloud::validate() const {
  if (positions.empty()) throw GeometryError("point cloud is empty");
  for (const auto& p : positions) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw GeometryError("point cloud has non-finite coordinates");
    }
  }
  if (!normals.empty()) {
    if (normals.size() != positions.size()) throw GeometryError("normal count does not match point count");
    for (const auto& n : normals) {
      if (std::abs(norm(n) - 1.0) > 1e-6) throw GeometryError("normals must have unit length");
    }
  }
}

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& t : triangles) {
    total += 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
  }
  return total;
}

void TriangleMesh::validate() const {
  for (const auto& t : triangles) {
    for (auto i : t) {
      if (i >= vertices.size()) throw GeometryError("triangle index out of range");
    }
  }
  for (const auto& p : vertices) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw GeometryError("mesh has non-finite coordinates");
    }
  }
}

std::optional<GeometryFormat> format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return GeometryFormat::obj;
  if (ext == ".ply") return GeometryFormat::ply;
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return GeometryFormat::xyz;
  return std::nullopt;
}

Geometry read_geometry(std::istream& in, GeometryFormat format) {
  switch (format) {
    case GeometryFormat::obj:
      return read_obj(in);
    case GeometryFormat::ply:
      return read_ply(in);
    case GeometryFormat::xyz:
      return read_xyz(in);
  }
  throw ParseError("unknown geometry format");
}

Geometry load_geometry(const std::filesystem::path& path, GeometryFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return read_geometry(in, format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Geometry load_geometry(const std::filesystem::path& path) {
  auto format = format_from_extension(path);
  if (!format) throw ParseError("unrecognized geometry extension: " + path.string());
  return load_geometry(path, *format);
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  for (const auto& v : mesh.vertices) {
    out << "v ";
    write_vec(out, v);
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void write_ply(std::ostream& out, const TriangleMesh& mesh) {
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    write_vec(out, v);
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    write_vec(out, cloud.positions[i]);
    if (cloud.has_normals()) {
      out << ' ';
      write_vec(out, cloud.normals[i]);
    }
    out << '\n';
  }
}

NormalizationTransform unit_box_transform(std::span<const Vec3> points, double margin) {
  if (points.empty()) throw GeometryError("cannot normalize empty geometry");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  if (!(extent > 0.0)) throw GeometryError("cannot normalize: all points coincide");
  NormalizationTransform t;
  t.translation = (lo + hi) * -0.5;
  t.scale = 2.0 * (1.0 - margin) / extent;
  return t;
}

std::pair<PointCloud, NormalizationTransform> normalize_to_unit_box(const PointCloud& cloud, double margin) {
  auto t = unit_box_transform(cloud.positions, margin);
  PointCloud out = cloud;
  for (auto& p : out.positions) p = t.apply(p);
  return {std::move(out), t};
}

std::pair<TriangleMesh, NormalizationTransform> normalize_to_unit_box(const TriangleMesh& mesh, double margin) {
  auto t = unit_box_transform(mesh.vertices, margin);
  TriangleMesh out = mesh;
  for (auto& p : out.vertices) p = t.apply(p);
  return {std::move(out), t};
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, -1, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], points_[order_[i]][a]);
      hi[a] = std::max(hi[a], points_[order_[i]][a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

// Left subtree holds coordinates <= split, right holds >= split.
void KdTree::nearest_in(std::int32_t id, const Vec3& q, Best& best) const {
  const auto& node = nodes_[id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      Best c{squared_distance(q, points_[order_[i]]), order_[i]};
      if (c < best) best = c;
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const auto near = diff <= 0.0 ? node.left : node.right;
  const auto far = diff <= 0.0 ? node.right : node.left;
  nearest_in(near, q, best);
  if (diff * diff <= best.d2) nearest_in(far, q, best);
}

std::size_t KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw Error("KdTree::nearest on an empty index");
  Best best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()};
  nearest_in(0, query, best);
  return best.index;
}

void KdTree::knn_in(std::int32_t id, const Vec3& q, std::size_t k, std::optional<std::size_t> exclude,
                    std::vector<Best>& heap) const {
  const auto& node = nodes_[id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      if (exclude && idx == *exclude) continue;
      Best c{squared_distance(q, points_[idx]), idx};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const auto near = diff <= 0.0 ? node.left : node.right;
  const auto far = diff <= 0.0 ? node.right : node.left;
  knn_in(near, q, k, exclude, heap);
  if (heap.size() < k || diff * diff <= heap.front().d2) knn_in(far, q, k, exclude, heap);
}

std::vector<std::size_t> KdTree::k_nearest(const Vec3& query, std::size_t k, std::optional<std::size_t> exclude) const {
  std::vector<Best> heap;
  if (k == 0 || points_.empty()) return {};
  heap.reserve(k + 1);
  knn_in(0, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const auto& b : heap) out.push_back(b.index);
  return out;
}

KnnGraph build_knn_graph(std::span<const Vec3> points, std::size_t k) {
  if (k == 0) throw Error("build_knn_graph: k must be at least 1");
  const std::size_t n = points.size();
  if (n < 2) throw GeometryError("build_knn_graph: need at least two points");
  if (k > n - 1) {
    warn("k-NN: k=" + std::to_string(k) + " clamped to " + std::to_string(n - 1));
    k = n - 1;
  }
  KdTree tree(points);
  KnnGraph graph{n, k, {}};
  graph.neighbors.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    auto nn = tree.k_nearest(points[i], k, i);
    graph.neighbors.insert(graph.neighbors.end(), nn.begin(), nn.end());
  }
  return graph;
}

// ---------------------------------------------------------------------------

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  mesh.validate();
  std::vector<double> cumulative;
  std::vector<std::size_t> usable;
  std::size_t skipped = 0;
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area =
        0.5 * norm(cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]], mesh.vertices[tri[2]] - mesh.vertices[tri[0]]));
    if (!(area > 0.0)) {
      ++skipped;
      continue;
    }
    total += area;
    cumulative.push_back(total);
    usable.push_back(t);
  }
  if (skipped) warn("sample_surface: skipped " + std::to_string(skipped) + " degenerate triangles");
  if (!(total > 0.0)) throw GeometryError("sample_surface: mesh has zero total area");

  Rng rng(seed);
  SurfaceSamples out;
  out.points.reserve(count);
  out.normals.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto slot = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    const auto& tri = mesh.triangles[usable[slot]];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    out.points.push_back(a * wa + b * wb + c * wc);
    const Vec3 n = cross(b - a, c - a);
    out.normals.push_back(n * (1.0 / norm(n)));
  }
  return out;
}

std::vector<Vec3> sample_offsurface_uniform(const Box& domain, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out(count);
  for (auto& p : out) {
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(domain.min[a], domain.max[a]);
  }
  return out;
}

namespace {

std::vector<Vec3> displace(std::span<const Vec3> points, std::span<const Vec3> normals, double bound,
                           std::uint64_t seed, const char* op) {
  if (normals.size() != points.size()) throw GeometryError(std::string(op) + ": normals are required");
  if (bound < 0.0) throw Error(std::string(op) + ": displacement bound must be nonnegative");
  Rng rng(seed);
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = rng.uniform(-bound, bound);
    out[i] = points[i] + normals[i] * u;
  }
  return out;
}

}  // namespace

std::vector<Vec3> sample_near_surface(std::span<const Vec3> points, std::span<const Vec3> normals, double delta,
                                      std::uint64_t seed, const Box& domain) {
  auto out = displace(points, normals, delta, seed, "sample_near_surface");
  for (auto& p : out) p = domain.clamp(p);
  return out;
}

std::vector<Vec3> perturb_along_normals(std::span<const Vec3> points, std::span<const Vec3> normals, double sigma,
                                        std::uint64_t seed) {
  return displace(points, normals, sigma, seed, "perturb_along_normals");
}

}  // namespace zlse
