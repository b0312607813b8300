#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "support.hpp"
#include "zlse/errors.hpp"

using namespace zlse;

namespace {

Geometry parse(const std::string& text, GeometryFormat f) {
  std::istringstream in(text);
  return read_geometry(in, f);
}

const char* kCubeObj = R"(# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
)";

std::vector<std::size_t> brute_knn(const std::vector<Vec3>& p, std::size_t i, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (j != i) idx.push_back(j);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double da = squared_distance(p[a], p[i]), db = squared_distance(p[b], p[i]);
    return da < db || (da == db && a < b);
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace

TEST_CASE("xyz parsing") {
  auto g = parse("0 0 0\n1 0 0\n", GeometryFormat::xyz);
  auto& c = std::get<PointCloud>(g);
  CHECK(c.size() == 2);
  CHECK_FALSE(c.has_normals());

  auto g2 = parse("# comment\n0 0 0 0 0 2\n1 0 0 3 4 0\n", GeometryFormat::xyz);
  auto& c2 = std::get<PointCloud>(g2);
  REQUIRE(c2.has_normals());
  CHECK(c2.normals[0][2] == doctest::Approx(1.0));
  CHECK(c2.normals[1][0] == doctest::Approx(0.6));

  CHECK_THROWS_AS(parse("0 0 0\n1 0\n", GeometryFormat::xyz), ParseError);
  try {
    parse("0 0 0\n1 0 x\n", GeometryFormat::xyz);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("obj cube") {
  auto g = parse(kCubeObj, GeometryFormat::obj);
  auto& m = std::get<TriangleMesh>(g);
  CHECK(m.vertices.size() == 8);
  CHECK(m.triangles.size() == 12);
  CHECK(m.area() == doctest::Approx(6.0));
  CHECK(testing::signed_volume(m) == doctest::Approx(1.0));
}

TEST_CASE("obj quads are fan triangulated and negative indices resolve") {
  auto g = parse("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n", GeometryFormat::obj);
  auto& m = std::get<TriangleMesh>(g);
  REQUIRE(m.triangles.size() == 2);
  CHECK(m.triangles[1] == std::array<std::size_t, 3>{0, 2, 3});
}

TEST_CASE("obj errors") {
  CHECK_THROWS_AS(parse("v 0 0 0\nf 1 2 3\n", GeometryFormat::obj), ParseError);
  try {
    parse("v 0 0 0\ncurv 0 1\n", GeometryFormat::obj);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("curv") != std::string::npos);
  }
  auto g = parse("v 0 0 0\nv 1 1 1\n", GeometryFormat::obj);
  CHECK(std::holds_alternative<PointCloud>(g));
}

TEST_CASE("ascii ply") {
  const char* ply = R"(ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
0 1 0
3 0 1 2
)";
  auto m = std::get<TriangleMesh>(parse(ply, GeometryFormat::ply));
  CHECK(m.vertices.size() == 3);
  CHECK(m.triangles.size() == 1);
  CHECK_THROWS_AS(parse("ply\nformat binary_little_endian 1.0\nend_header\n", GeometryFormat::ply), ParseError);
  try {
    parse("ply\nformat ascii 1.0\nelement edge 1\nend_header\n", GeometryFormat::ply);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("edge") != std::string::npos);
  }
}

TEST_CASE("writers round trip counts and coordinates") {
  auto m = std::get<TriangleMesh>(parse(kCubeObj, GeometryFormat::obj));
  for (auto& v : m.vertices) v = v * 0.123456789123;
  for (auto f : {GeometryFormat::obj, GeometryFormat::ply}) {
    std::ostringstream out;
    if (f == GeometryFormat::obj) write_obj(out, m);
    else write_ply(out, m);
    auto back = std::get<TriangleMesh>(parse(out.str(), f));
    REQUIRE(back.vertices.size() == 8);
    CHECK(back.triangles == m.triangles);
    for (std::size_t i = 0; i < 8; ++i)
      for (int a = 0; a < 3; ++a) CHECK(std::abs(back.vertices[i][a] - m.vertices[i][a]) <= 1e-6);
  }
}

TEST_CASE("normalization") {
  PointCloud c;
  c.positions = {{0, 0, 0}, {10, 10, 10}, {5, 2, 7}};
  auto [n, t] = normalize_to_unit_box(c);
  CHECK(n.positions[0][0] == doctest::Approx(-0.95));
  CHECK(n.positions[1][2] == doctest::Approx(0.95));

  auto [again, t2] = normalize_to_unit_box(n);
  CHECK(t2.scale >= 0.9);
  CHECK(t2.scale <= 1.0);

  Rng rng(3);
  PointCloud r;
  r.positions = testing::random_points(100, rng, -7, 13);
  auto [rn, rt] = normalize_to_unit_box(r);
  for (std::size_t i = 0; i < 100; ++i) {
    auto back = rt.invert(rn.positions[i]);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(back[a] - r.positions[i][a]) <= 1e-9);
  }

  PointCloud same;
  same.positions = {{1, 1, 1}, {1, 1, 1}};
  CHECK_THROWS_AS(normalize_to_unit_box(same), GeometryError);
}

TEST_CASE("knn collinear example") {
  std::vector<Vec3> p{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  auto g = build_knn_graph(p, 1);
  CHECK(g.neighbors == std::vector<std::size_t>{1, 0, 1});
  auto full = build_knn_graph(p, 5);
  CHECK(full.k == 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (auto j : full.neighbors_of(i)) CHECK(j != i);
}

TEST_CASE("knn equals brute force") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(499);
    auto p = testing::random_points(n, rng);
    // duplicate a few points to exercise the tie rule
    for (std::size_t d = 0; d + 1 < n && d < 5; ++d) p[n - 1 - d] = p[d];
    const std::size_t k = 1 + rng.index(10);
    auto g = build_knn_graph(p, k);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      auto expect = brute_knn(p, i, k);
      auto got = g.neighbors_of(i);
      ok = ok && std::equal(expect.begin(), expect.end(), got.begin(), got.end());
    }
    CHECK(ok);
  }
}

TEST_CASE("kd-tree nearest equals brute force, with ties") {
  Rng rng(12);
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) corners.push_back({double(i >> 2 & 1), double(i >> 1 & 1), double(i & 1)});
  KdTree t(corners);
  auto near = t.nearest({0.5 + 1e-9, 0.5, 0.5});
  CHECK(corners[near][0] == 1.0);
  CHECK(t.nearest({0.5, 0.5, 0.5}) == 0);

  auto p = testing::random_points(1000, rng);
  KdTree tree(p);
  for (int q = 0; q < 2000; ++q) {
    Vec3 x{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (squared_distance(p[i], x) < squared_distance(p[best], x)) best = i;
    REQUIRE(tree.nearest(x) == best);
  }
}

TEST_CASE("surface sampling") {
  TriangleMesh one;
  one.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  one.triangles = {{0, 1, 2}};
  auto s = sample_surface(one, 1000, 1);
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto& p = s.points[i];
    CHECK(p[2] == 0.0);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
    CHECK(p[0] + p[1] <= 1.0 + 1e-12);
    CHECK(s.normals[i][2] == doctest::Approx(1.0));
  }

  TriangleMesh two;
  two.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {10, 0, 0}, {13, 0, 0}, {10, 2, 0}};
  two.triangles = {{0, 1, 2}, {3, 4, 5}};
  auto t = sample_surface(two, 100000, 2);
  const double frac = static_cast<double>(std::count_if(t.points.begin(), t.points.end(),
                                                        [](const Vec3& p) { return p[0] >= 10.0; })) /
                      100000.0;
  CHECK(frac == doctest::Approx(0.75).epsilon(0.02 / 0.75));

  auto sphere = testing::uv_sphere(1.0);
  auto ss = sample_surface(sphere, 20000, 3);
  double mean_r = 0;
  for (auto& p : ss.points) mean_r += norm(p);
  CHECK(mean_r / 20000 == doctest::Approx(1.0).epsilon(0.01));

  TriangleMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  flat.triangles = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_surface(flat, 10, 1), GeometryError);

  auto again = sample_surface(sphere, 100, 7);
  auto again2 = sample_surface(sphere, 100, 7);
  CHECK(again.points == again2.points);
}

TEST_CASE("off-surface and near-surface sampling") {
  CHECK(sample_offsurface_uniform(Box{}, 0, 1).empty());
  auto u = sample_offsurface_uniform(Box{}, 100000, 4);
  Vec3 mean{0, 0, 0};
  for (auto& p : u) {
    REQUIRE(Box{}.contains(p));
    mean = mean + p * 1e-5;
  }
  for (int a = 0; a < 3; ++a) CHECK(std::abs(mean[a]) < 0.01);

  auto c = testing::sphere_cloud(2000, 0.5, 5);
  auto same = sample_near_surface(c.positions, c.normals, 0.0, 1);
  CHECK(same == c.positions);
  auto near = sample_near_surface(c.positions, c.normals, 0.1, 6);
  for (auto& p : near) CHECK(std::abs(norm(p) - 0.5) <= 0.1 + 1e-12);
  std::vector<Vec3> few(3);
  CHECK_THROWS_AS(sample_near_surface(c.positions, few, 0.1, 1), GeometryError);
}

TEST_CASE("input perturbation is bounded and uniform") {
  const std::size_t n = 100000;
  std::vector<Vec3> p(n, Vec3{0, 0, 0}), nz(n, Vec3{0, 0, 1});
  CHECK(perturb_along_normals(p, nz, 0.0, 1) == p);
  auto q = perturb_along_normals(p, nz, 5e-2, 2);
  std::vector<double> z;
  for (auto& x : q) {
    CHECK(std::abs(x[2]) <= 5e-2);
    z.push_back(x[2]);
  }
  std::sort(z.begin(), z.end());
  double ks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = (z[i] + 5e-2) / 0.1;
    ks = std::max({ks, std::abs(cdf - double(i) / n), std::abs(cdf - double(i + 1) / n)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("cloud validation") {
  PointCloud c;
  CHECK_THROWS_AS(c.validate(), GeometryError);
  c.positions = {{0, 0, 0}};
  c.normals = {{0, 0, 2}};
  CHECK_THROWS_AS(c.validate(), GeometryError);
}
