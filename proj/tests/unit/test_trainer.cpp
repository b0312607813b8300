#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"
#include "zlse/errors.hpp"
#include "zlse/trainer.hpp"

using namespace zlse;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.encoder.resolutions = {4, 8};
  c.encoder.features = 4;
  c.encoder.knn = 4;
  c.decoder.depth = 2;
  c.train.iterations = 10;
  c.train.seed = 42;
  c.train.lr = 1e-3;
  c.sampling.surface = 16;
  c.sampling.uniform = 16;
  c.sampling.near = 16;
  return c;
}

std::vector<PreparedShape> tiny_data() {
  std::vector<PreparedShape> d;
  for (int i = 0; i < 3; ++i) d.push_back({"s" + std::to_string(i), testing::sphere_cloud(60, 0.3 + 0.1 * i, 5 + i)});
  return d;
}

std::string bytes_of(const Checkpoint& c) { return encode_container(to_container(c)); }

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "zlse_trainer_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamStore store;
  Value w = store.add("w", {3}, {1, -2, 3});
  w.zero_grad();
  AdamState st;
  adam_step(store, st, 0.1);
  CHECK(st.step == 1);
  CHECK(w.data()[0] == 1.0);
  CHECK(w.data()[1] == -2.0);
  CHECK(w.data()[2] == 3.0);
}

TEST_CASE("adam: first step moves by lr against the gradient sign") {
  ParamStore store;
  Value w = store.add("w", {2}, {0.5, 0.5});
  backward(sum(mul(w, Value::constant({2}, {2.0, -7.0}))));
  AdamState st;
  adam_step(store, st, 0.01);
  // m_hat / (sqrt(v_hat) + eps) = g / (|g| + eps)
  CHECK(w.data()[0] == doctest::Approx(0.5 - 0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
  CHECK(w.data()[1] == doctest::Approx(0.5 + 0.01 * 7.0 / (7.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam: quadratic against a scalar reference") {
  ParamStore store;
  Value w = store.add("w", {1}, {0.0});
  AdamState st;
  double rw = 0, m = 0, v = 0;
  for (int t = 1; t <= 100; ++t) {
    store.zero_grad();
    Value d = sub(w, Value::constant({1}, {3.0}));
    backward(sum(mul(d, d)));
    adam_step(store, st, 0.1);
    const double g = 2 * (rw - 3);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    rw -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(std::abs(w.data()[0] - 3) < 0.5);
  CHECK(w.data()[0] == doctest::Approx(rw).epsilon(1e-12));
}

TEST_CASE("adam: non-finite gradient is rejected before any update") {
  ParamStore store;
  Value a = store.add("a", {1}, {1.0});
  Value b = store.add("b", {1}, {1.0});
  backward(sum(add(a, mul(b, Value::constant({1}, {std::nan("")})))));
  AdamState st;
  CHECK_THROWS_AS(adam_step(store, st, 0.1), NumericError);
  CHECK(a.data()[0] == 1.0);
  CHECK(st.step == 0);
}

TEST_CASE("container round trip and corruption") {
  Container c;
  c.header = {{"kind", "test"}, {"x", 1.5}};
  c.tensors.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6.0000000000000009}});
  c.tensors.push_back({"empty", {0}, {}});
  c.rng = std::string("\x01\x00\xff", 3);
  const std::string bytes = encode_container(c);
  auto d = decode_container(bytes);
  CHECK(encode_container(d) == bytes);
  CHECK(d.find("a")->data[5] == 6.0000000000000009);
  CHECK(d.find("missing") == nullptr);

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(decode_container(bytes.substr(0, cut)), ParseError);
  CHECK_THROWS_AS(decode_container(bytes + "x"), ParseError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_container(bad_magic), ParseError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  try {
    decode_container(bad_version);
    FAIL("expected a version error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  try {
    decode_container(bytes.substr(0, bytes.size() / 2));
    FAIL("expected a truncation error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("config json") {
  auto c = tiny_config();
  auto j = to_json(c);
  CHECK(to_json(run_config_from_json(j)) == j);
  CHECK(run_config_from_json(nlohmann::json::object()).train.lr == 5e-4);
  CHECK_THROWS_AS(run_config_from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"lrr", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"lr", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"lr", -1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"batch_size", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"encoder", {{"resolutions", {4, 3}}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"encoder", {{"resolutions", {4, -8}}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"encoder", {{"features", -1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"encoder", {{"features", 1.5}}}}), ConfigError);
  CHECK(run_config_from_json({{"encoder", {{"features", 16}}}}).encoder.features == 16);
  CHECK_THROWS_AS(run_config_from_json({{"loss", {{"mode", "weird"}}}}), ConfigError);
  CHECK(run_config_from_json({{"loss", {{"mode", "sign-agnostic"}}}}).loss.mode == LossMode::sign_agnostic);
}

TEST_CASE("training samples") {
  auto cloud = testing::sphere_cloud(100, 0.5, 1);
  SamplingConfig cfg;
  cfg.surface = 40;
  cfg.uniform = 30;
  cfg.near = 20;
  auto s = make_training_samples(cloud, cfg, 7);
  CHECK(s.surface.size() == 40);
  CHECK(s.surface_normals.size() == 40);
  CHECK(s.offsurface_uniform.size() == 30);
  CHECK(s.near_surface.size() == 20);
  // surface samples are distinct cloud points
  std::set<Vec3> seen;
  for (const auto& p : s.surface) seen.insert(p);
  CHECK(seen.size() == 40);
  auto again = make_training_samples(cloud, cfg, 7);
  CHECK(again.near_surface[3][0] == s.near_surface[3][0]);
  cfg.surface = 500;
  CHECK(make_training_samples(cloud, cfg, 7).surface.size() == 100);

  auto p = perturb_inputs(cloud, 0.01, 3);
  double worst = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) worst = std::max(worst, norm(p.positions[i] - cloud.positions[i]));
  CHECK(worst <= 0.01 + 1e-15);
  CHECK(worst > 0);
}

TEST_CASE("prepared shape files") {
  PreparedShape s{"ball", testing::sphere_cloud(30, 0.5, 2), {{"source", "ball.xyz"}}};
  auto dir = temp_path("prep");
  fs::create_directories(dir);
  save_prepared(dir / "b.zlsp", s);
  save_prepared(dir / "a.zlsp", PreparedShape{"other", testing::sphere_cloud(10, 0.2, 3)});
  auto back = load_prepared(dir / "b.zlsp");
  CHECK(back.name == "ball");
  CHECK(back.cloud.positions[7][1] == s.cloud.positions[7][1]);
  CHECK(back.cloud.normals[7][2] == s.cloud.normals[7][2]);
  CHECK(back.metadata.at("source") == "ball.xyz");
  auto ds = load_dataset(dir);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].name == "other");
  CHECK(load_dataset(dir / "b.zlsp").size() == 1);
  CHECK_THROWS(load_dataset(dir / "nothing_here"));
  fs::remove_all(dir);
}

TEST_CASE("zero iterations give the initialization") {
  auto c = tiny_config();
  c.train.iterations = 0;
  Trainer t(c, tiny_data());
  t.run();
  Model fresh(c.model(), c.train.seed);
  auto a = t.checkpoint().parameters, b = snapshot_parameters(fresh.params());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].data == b[i].data);
  }
}

TEST_CASE("training is deterministic and resumable") {
  auto c = tiny_config();
  Trainer a(c, tiny_data());
  std::ostringstream log;
  a.run(&log);
  Trainer b(c, tiny_data());
  b.run();
  const std::string full = bytes_of(a.checkpoint());
  CHECK(full == bytes_of(b.checkpoint()));

  std::istringstream lines(log.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == kLossLogHeader);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 10);

  Trainer part(c, tiny_data());
  for (int i = 0; i < 4; ++i) part.step();
  auto path = temp_path("mid.zlse");
  save_checkpoint(path, part.checkpoint());
  Trainer resumed(load_checkpoint(path), tiny_data());
  CHECK(resumed.iteration() == 4);
  resumed.run();
  CHECK(bytes_of(resumed.checkpoint()) == full);

  // save -> load -> save is byte identical
  save_checkpoint(path, a.checkpoint());
  const std::string first = read_file(path);
  save_checkpoint(path, load_checkpoint(path));
  CHECK(read_file(path) == first);
  CHECK(first == full);

  // training changed something
  Model init(c.model(), c.train.seed);
  CHECK(snapshot_parameters(init.params())[0].data != a.checkpoint().parameters[0].data);
  fs::remove(path);
}

TEST_CASE("checkpoint errors") {
  auto c = tiny_config();
  Trainer t(c, tiny_data());
  auto ck = t.checkpoint();
  auto path = temp_path("trunc.zlse");
  const std::string bytes = bytes_of(ck);
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes.substr(0, bytes.size() - 17);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  fs::remove(path);

  auto other = c;
  other.encoder.features = 6;
  Model m(other.model(), 1);
  try {
    load_parameters(m.params(), ck.parameters);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("encoder.input.weight") != std::string::npos);
  }
  auto rebuilt = model_from_checkpoint(ck);
  CHECK(snapshot_parameters(rebuilt->params())[3].data == ck.parameters[3].data);
  CHECK_THROWS_AS(Trainer(c, {}), ConfigError);
}

TEST_CASE("numeric failure writes a checkpoint") {
  auto c = tiny_config();
  c.train.lr = std::numeric_limits<double>::infinity();
  c.train.iterations = 3;
  auto path = temp_path("fail.zlse");
  fs::remove(path);
  bool threw = false;
  try {
    Trainer t(c, tiny_data());
    t.run(nullptr, path);
  } catch (const NumericError&) {
    threw = true;
  } catch (const ConfigError&) {
    // an infinite learning rate may be rejected up front instead
    threw = true;
    c.train.lr = 1e-3;
  }
  CHECK(threw);
  if (fs::exists(path)) {
    CHECK_NOTHROW(load_checkpoint(path));
    fs::remove(path);
  }
}
