#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "zlse/errors.hpp"
#include "zlse/loss.hpp"
#include "zlse/model.hpp"
#include "zlse/transfer.hpp"

using namespace zlse;

namespace {

Value rows(std::initializer_list<Vec3> v) { return positions_value(std::vector<Vec3>(v)); }

// Exact sphere SDF |x| - 0.5, bypassing the network.
FieldWithGradient sphere_sdf(const Value& x) {
  const std::size_t s = x.rows();
  std::vector<double> val(s), grad(3 * s);
  for (std::size_t i = 0; i < s; ++i) {
    const double n = std::sqrt(x(i, 0) * x(i, 0) + x(i, 1) * x(i, 1) + x(i, 2) * x(i, 2));
    val[i] = n - 0.5;
    for (int a = 0; a < 3; ++a) grad[3 * i + a] = x(i, a) / n;
  }
  return {Value::constant({s, 1}, val), Value::constant({s, 3}, grad)};
}

SampleSet sphere_samples(std::uint64_t seed) {
  auto c = testing::sphere_cloud(300, 0.5, seed);
  SampleSet s;
  s.surface = c.positions;
  s.surface_normals = c.normals;
  s.offsurface_uniform = sample_offsurface_uniform(Box{}, 300, seed + 1);
  s.near_surface = sample_near_surface(c.positions, c.normals, 0.1, seed + 2);
  return s;
}

}  // namespace

TEST_CASE("eikonal term") {
  CHECK(eikonal_term(rows({{1, 0, 0}, {0, 0.6, 0.8}})).item() == doctest::Approx(0.0));
  CHECK(eikonal_term(rows({{0, 0, 0}, {0, 0, 0}})).item() == 1.0);
  CHECK(eikonal_term(rows({{0.5, 0, 0}, {0, 1.5, 0}})).item() == doctest::Approx(0.5));
}

TEST_CASE("surface term") {
  CHECK(surface_term(Value::constant({2, 1}, {0, 0})).item() == 0.0);
  CHECK(surface_term(Value::constant({2, 1}, {-0.3, -0.3})).item() == doctest::Approx(0.3));
  CHECK(surface_term(Value::constant({2, 1}, {-1, 3})).item() == 2.0);
}

TEST_CASE("normal term in every mode") {
  Value n = rows({{0, 0, 1}, {1, 0, 0}});
  Value same = n, opposite = rows({{0, 0, -1}, {-1, 0, 0}}), perp = rows({{1, 0, 0}, {0, 1, 0}});
  for (auto mode : {LossMode::signed_distance, LossMode::sign_agnostic, LossMode::unsigned_distance}) {
    CHECK(normal_term(same, n, mode).item() == 0.0);
    CHECK(normal_term(perp, n, mode).item() == 1.0);
  }
  CHECK(normal_term(opposite, n, LossMode::signed_distance).item() == 2.0);
  CHECK(normal_term(opposite, n, LossMode::sign_agnostic).item() == 0.0);
  CHECK(normal_term(opposite, n, LossMode::unsigned_distance).item() == 0.0);
}

TEST_CASE("off-surface term") {
  CHECK(offsurface_term(Value::constant({3, 1}, {0, 0, 0}), 10, LossMode::signed_distance).item() == 1.0);
  CHECK(offsurface_term(Value::constant({1, 1}, {0.5}), 10, LossMode::signed_distance).item() ==
        doctest::Approx(std::exp(-5.0)));
  CHECK(offsurface_term(Value::constant({1, 1}, {-0.5}), 10, LossMode::unsigned_distance).item() ==
        doctest::Approx(std::exp(5.0)));
  CHECK(offsurface_term(Value::constant({1, 1}, {-0.5}), 10, LossMode::sign_agnostic).item() ==
        doctest::Approx(std::exp(-5.0)));
}

TEST_CASE("analytic sphere SDF") {
  auto s = sphere_samples(1);
  LossWeights w;
  auto b = total_loss(sphere_sdf, s, w);
  CHECK(b.eikonal <= 1e-10);
  CHECK(b.surface <= 1e-10);
  CHECK(b.normal <= 1e-10);
  double off = 0;
  std::size_t n = 0;
  for (const auto* set : {&s.offsurface_uniform, &s.near_surface})
    for (const auto& p : *set) {
      off += std::exp(-w.alpha * std::abs(norm(p) - 0.5));
      ++n;
    }
  CHECK(std::abs(b.offsurface - off / n) <= 1e-12);
  CHECK(b.total == doctest::Approx(w.eikonal * b.eikonal + w.surface * b.surface + w.normal * b.normal +
                                   w.offsurface * b.offsurface));
}

TEST_CASE("sign-agnostic mode ignores normal flips") {
  auto s = sphere_samples(2);
  Rng rng(3);
  auto flipped = s;
  for (auto& n : flipped.surface_normals)
    if (rng.uniform() < 0.5) n = n * -1.0;
  LossWeights w;
  w.mode = LossMode::sign_agnostic;
  auto a = total_loss(sphere_sdf, s, w), b = total_loss(sphere_sdf, flipped, w);
  CHECK(a.normal == b.normal);
  CHECK(a.total == b.total);
  w.mode = LossMode::signed_distance;
  CHECK(total_loss(sphere_sdf, flipped, w).normal > 0.5);
}

TEST_CASE("unsigned mode versus absolute values") {
  auto s = sphere_samples(4);
  FieldEvaluator abs_field = [](const Value& x) {
    auto fg = sphere_sdf(x);
    std::vector<double> v(fg.value.data().begin(), fg.value.data().end());
    for (auto& e : v) e = std::abs(e);
    return FieldWithGradient{Value::constant(fg.value.shape(), v), fg.gradient};
  };
  LossWeights w;
  w.mode = LossMode::unsigned_distance;
  auto u_abs = total_loss(abs_field, s, w);
  w.mode = LossMode::sign_agnostic;
  auto sa_abs = total_loss(abs_field, s, w);
  CHECK(u_abs.offsurface == sa_abs.offsurface);
  // negative values are penalized harder than in the signed form
  w.mode = LossMode::unsigned_distance;
  auto u = total_loss(sphere_sdf, s, w);
  w.mode = LossMode::signed_distance;
  auto sg = total_loss(sphere_sdf, s, w);
  CHECK(u.offsurface > sg.offsurface);
}

TEST_CASE("errors and skipped terms") {
  SampleSet empty;
  CHECK_THROWS_AS(total_loss(sphere_sdf, empty, {}), GeometryError);
  auto s = sphere_samples(5);
  s.surface_normals.clear();
  auto b = total_loss(sphere_sdf, s, {});
  CHECK(b.normal == 0.0);
  FieldEvaluator nan_field = [](const Value& x) {
    auto fg = sphere_sdf(x);
    std::vector<double> v(fg.value.size(), std::nan(""));
    return FieldWithGradient{Value::constant(fg.value.shape(), v), fg.gradient};
  };
  try {
    total_loss(nan_field, sphere_samples(6), {});
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("surface") != std::string::npos);
  }
  LossWeights bad;
  bad.alpha = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("permutation invariance within classes") {
  auto s = sphere_samples(7);
  auto p = s;
  std::reverse(p.offsurface_uniform.begin(), p.offsurface_uniform.end());
  auto a = total_loss(sphere_sdf, s, {}), b = total_loss(sphere_sdf, p, {});
  CHECK(a.offsurface == doctest::Approx(b.offsurface).epsilon(1e-14));
}

TEST_CASE("untrained model loss is finite and its gradient matches differences") {
  ModelConfig cfg;
  cfg.encoder.resolutions = {4, 8};
  cfg.encoder.features = 4;
  cfg.encoder.knn = 4;
  cfg.decoder.hidden = 4;
  cfg.decoder.depth = 2;
  Model m(cfg, 11);
  auto cloud = testing::sphere_cloud(40, 0.5, 12);
  SampleSet s;
  s.surface.assign(cloud.positions.begin(), cloud.positions.begin() + 4);
  s.surface_normals.assign(cloud.normals.begin(), cloud.normals.begin() + 4);
  s.offsurface_uniform = sample_offsurface_uniform(Box{}, 2, 13);
  s.near_surface = sample_near_surface(s.surface, s.surface_normals, 0.1, 14);
  LossWeights w;
  auto loss = [&]() {
    GridVector gv = m.encode(cloud);
    return total_loss(field_evaluator(m.bind(gv)), s, w).total_value;
  };
  CHECK(std::isfinite(loss().item()));
  CHECK(loss().item() > 0);
  auto r = testing::check_gradients(testing::store_values(m.params()), loss, 1e-5, 1e-7, 6);
  INFO("worst ", r.worst_analytic, " vs ", r.worst_numeric);
  CHECK(r.failures == 0);
}
