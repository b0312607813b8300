#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "zlse/errors.hpp"

using namespace zlse;
using testing::check_gradients;
using testing::random_const;
using testing::random_param;

TEST_CASE("linear matches a triple loop") {
  Rng rng(1);
  Value x = random_const({5, 4}, rng), w = random_const({4, 3}, rng), b = random_const({3}, rng);
  Value y = linear(x, w, b);
  REQUIRE(y.shape() == Shape{5, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = b.data()[j];
      for (std::size_t k = 0; k < 4; ++k) s += x(i, k) * w(k, j);
      CHECK(y(i, j) == doctest::Approx(s).epsilon(1e-15));
    }
}

TEST_CASE("shape mismatches throw") {
  Rng rng(2);
  CHECK_THROWS_AS(matmul(random_const({2, 3}, rng), random_const({2, 3}, rng)), ShapeError);
  CHECK_THROWS_AS(add(random_const({2, 3}, rng), random_const({3, 2}, rng)), ShapeError);
  CHECK_THROWS_AS(reshape(random_const({2, 3}, rng), {4, 2}), ShapeError);
}

TEST_CASE("sum of products gradient") {
  Rng rng(3);
  Value a = random_param({3, 2}, rng), b = random_param({3, 2}, rng);
  backward(sum(mul(a, b)));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.grad()[i] == b.data()[i]);
    CHECK(b.grad()[i] == a.data()[i]);
  }
}

TEST_CASE("backward errors") {
  Rng rng(4);
  Value p = random_param({2, 2}, rng);
  CHECK_THROWS_AS(backward(mul(p, p)), Error);  // not scalar
  Value l = sum(mul(p, p));
  backward(l);
  CHECK_THROWS_AS(backward(l), Error);  // consumed
  CHECK_THROWS_AS(backward(sum(p)), Error);  // gradients not reset
  p.zero_grad();
  CHECK_NOTHROW(backward(sum(p)));
  CHECK_THROWS_AS(backward(sum(random_const({2}, rng))), Error);  // no parameters
}

TEST_CASE("every op matches central differences") {
  Rng rng(5);
  Value x = random_param({4, 3}, rng), w = random_param({3, 5}, rng), b = random_param({5}, rng);
  Value c = random_param({4}, rng);
  std::vector<std::size_t> idx{2, 0, 2, 3, 1};
  auto loss = [&]() {
    Value h = linear(x, w, b);
    Value s = add(sin(h), mul(cos(h), exp(scale(h, 0.3))));
    Value r = relu(add_scalar(s, 0.1));
    Value a = abs(sub(r, negate(h)));
    Value rn = row_norm(a);
    Value g = gather_rows(concat_cols({a, transpose(transpose(h))}), idx);
    Value t = tile_rows(slice_cols(g, 1, 4), 2);
    Value m = reduce(Reduction::max, reshape(slice_rows(t, 0, 8), {2, 4, 3}), 1);
    Value e = add(sum(scale_rows(a, reshape(c, {4}))), sum(reciprocal(add_scalar(rn, 1.0))));
    Value q = add(mean(m), sum(reduce(Reduction::mean, concat_rows({h, h}), 0)));
    return add(e, q);
  };
  auto r = check_gradients({x, w, b, c}, loss);
  INFO("worst ", r.worst_analytic, " vs ", r.worst_numeric);
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("reduce shapes and max ties") {
  Value x = Value::parameter({2, 3}, {1, 5, 5, 7, 2, 7});
  Value m = reduce(Reduction::max, x, 1);
  CHECK(m.shape() == Shape{2});
  CHECK(m.data()[0] == 5);
  CHECK(m.data()[1] == 7);
  backward(sum(m));
  std::vector<double> expect{0, 1, 0, 1, 0, 0};
  for (std::size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == expect[i]);
  CHECK(reduce(Reduction::sum, x, 0).shape() == Shape{3});
  CHECK(sum(x).shape() == Shape{});
  CHECK_THROWS(reduce(Reduction::max, Value::filled({0, 3}, 0.0), 0));
}

TEST_CASE("relu and abs use zero slope at the kink") {
  Value x = Value::parameter({3}, {-1.0, 0.0, 2.0});
  backward(add(sum(relu(x)), sum(abs(x))));
  CHECK(x.grad()[0] == -1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 2.0);
}

TEST_CASE("row_norm gradient at the origin is zero") {
  Value x = Value::parameter({2, 3}, {0, 0, 0, 3, 4, 0});
  backward(sum(row_norm(x)));
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 0.0);
  CHECK(x.grad()[3] == doctest::Approx(0.6));
  CHECK(x.grad()[4] == doctest::Approx(0.8));
}

TEST_CASE("no-grad guard records nothing") {
  Rng rng(6);
  Value p = random_param({2, 2}, rng);
  NoGradGuard g;
  Value y = mul(p, p);
  CHECK_FALSE(y.requires_grad());
}

namespace {

// Small sine-ReLU network of the decoder's shape, built on duals.
struct TinyNet {
  Value w0, b0, w1, b1, m0, c0, w2, b2;
  Value latent;
  Dual operator()(const Dual& x) const {
    Dual m = dual_relu(dual_linear(dual_constant(latent), m0, c0));
    Dual h = dual_mul(dual_sin(dual_linear(x, w0, b0), 3.0), m);
    h = dual_sin(dual_linear(h, w1, b1), 2.0);
    return dual_linear(h, w2, b2);
  }
};

TinyNet make_net(Rng& rng, std::size_t s) {
  TinyNet n;
  n.w0 = random_param({3, 6}, rng);
  n.b0 = random_param({6}, rng);
  n.w1 = random_param({6, 6}, rng, 0.5);
  n.b1 = random_param({6}, rng);
  n.m0 = random_param({4, 6}, rng);
  n.c0 = random_param({6}, rng);
  n.w2 = random_param({6, 1}, rng);
  n.b2 = random_param({1}, rng);
  n.latent = random_const({s, 4}, rng);
  return n;
}

}  // namespace

TEST_CASE("spatial gradient matches finite differences in position") {
  Rng rng(7);
  const std::size_t s = 6;
  TinyNet net = make_net(rng, s);
  Value x = random_const({s, 3}, rng, 0.8);
  Value g = spatial_gradient(net, x);
  REQUIRE(g.shape() == Shape{s, 3});
  const double h = 1e-6;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t a = 0; a < 3; ++a) {
      std::vector<double> up(x.data().begin(), x.data().end()), dn = up;
      up[i * 3 + a] += h;
      dn[i * 3 + a] -= h;
      const double fu = net(dual_constant(Value::constant({s, 3}, up))).value(i, 0);
      const double fd = net(dual_constant(Value::constant({s, 3}, dn))).value(i, 0);
      CHECK(g(i, a) == doctest::Approx((fu - fd) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("parameter gradients through the spatial gradient") {
  Rng rng(8);
  const std::size_t s = 5;
  TinyNet net = make_net(rng, s);
  Value x = random_const({s, 3}, rng, 0.8);
  auto loss = [&]() {
    auto fg = evaluate_with_gradient(net, x);
    return add(mean(abs(add_scalar(row_norm(fg.gradient), -1.0))), mean(mul(fg.value, fg.value)));
  };
  auto r = check_gradients({net.w0, net.b0, net.w1, net.b1, net.m0, net.c0, net.w2, net.b2}, loss);
  INFO("worst ", r.worst_analytic, " vs ", r.worst_numeric);
  CHECK(r.max_rel < 1e-5);
}

TEST_CASE("field output shape is checked") {
  Rng rng(9);
  Value x = random_const({4, 3}, rng);
  ScalarField bad = [](const Dual& p) { return p; };
  CHECK_THROWS_AS(spatial_gradient(bad, x), ShapeError);
}
