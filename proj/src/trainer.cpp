#include "zlse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "zlse/errors.hpp"

namespace zlse {

using nlohmann::json;

namespace {

std::vector<double> flatten(const std::vector<Vec3>& pts) {
  std::vector<double> out;
  out.reserve(pts.size() * 3);
  for (const auto& p : pts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Vec3> unflatten(const NamedTensor& t) {
  if (t.shape.size() != 2 || t.shape[1] != 3) {
    throw ParseError("prepared shape: tensor '" + t.name + "' must be [n x 3], got " + shape_string(t.shape));
  }
  std::vector<Vec3> out(t.shape[0]);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {t.data[3 * i], t.data[3 * i + 1], t.data[3 * i + 2]};
  return out;
}

// k distinct indices from [0, n) by partial Fisher-Yates; all of them in
// order when k >= n.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace

std::string loss_log_row(std::uint64_t iter, const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<unsigned long long>(iter), b.eikonal,
                b.surface, b.normal, b.offsurface, b.total);
  return buf;
}

void save_prepared(const std::filesystem::path& path, const PreparedShape& shape) {
  Container c;
  c.header = {{"kind", "prepared-shape"}, {"name", shape.name}, {"metadata", shape.metadata}};
  c.tensors.push_back({"positions", {shape.cloud.size(), 3}, flatten(shape.cloud.positions)});
  if (shape.cloud.has_normals()) c.tensors.push_back({"normals", {shape.cloud.size(), 3}, flatten(shape.cloud.normals)});
  save_container(path, c);
}

PreparedShape load_prepared(const std::filesystem::path& path) {
  Container c = load_container(path);
  if (c.header.value("kind", "") != "prepared-shape") throw ParseError(path.string() + ": not a prepared-shape file");
  PreparedShape s;
  s.name = c.header.value("name", path.stem().string());
  s.metadata = c.header.value("metadata", json::object());
  const NamedTensor* pos = c.find("positions");
  if (!pos) throw ParseError(path.string() + ": missing 'positions'");
  s.cloud.positions = unflatten(*pos);
  if (const NamedTensor* nrm = c.find("normals")) {
    s.cloud.normals = unflatten(*nrm);
    if (s.cloud.normals.size() != s.cloud.positions.size()) throw ParseError(path.string() + ": normal count mismatch");
  }
  return s;
}

std::vector<PreparedShape> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    if (std::filesystem::is_regular_file(dir)) return {load_prepared(dir)};
    throw ParseError("dataset: " + dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".zlsp") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PreparedShape> out;
  for (const auto& f : files) out.push_back(load_prepared(f));
  if (out.empty()) throw ParseError("dataset: no .zlsp files in " + dir.string());
  return out;
}

double gradient_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

void adam_step(ParamStore& params, AdamState& state, double lr, double grad_scale) {
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.tensor_count()) throw ShapeError("adam: state does not match the parameter store");
  for (const auto& [name, p] : params) {
    for (double g : p.grad())
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  std::size_t t = 0;
  for (const auto& [name, p] : params) {
    Value handle = p;
    auto w = handle.mutable_data();
    auto g = p.grad();
    auto& m = state.m[t];
    auto& v = state.v[t];
    if (m.size() != w.size()) throw ShapeError("adam: moment shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i] * grad_scale;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
    ++t;
  }
}

SampleSet make_training_samples(const PointCloud& cloud, const SamplingConfig& config, std::uint64_t seed) {
  if (cloud.size() == 0) throw GeometryError("sampling: empty point cloud");
  SampleSet s;
  Rng pick(mix_seed(seed, 1));
  for (std::size_t i : choose_distinct(cloud.size(), config.surface, pick)) {
    s.surface.push_back(cloud.positions[i]);
    if (cloud.has_normals()) s.surface_normals.push_back(cloud.normals[i]);
  }
  s.offsurface_uniform = sample_offsurface_uniform(s.domain, config.uniform, mix_seed(seed, 2));
  if (cloud.has_normals() && config.near > 0) {
    Rng near(mix_seed(seed, 3));
    std::vector<Vec3> pts(config.near), nrm(config.near);
    for (std::size_t i = 0; i < config.near; ++i) {
      const auto j = near.index(cloud.size());
      pts[i] = cloud.positions[j];
      nrm[i] = cloud.normals[j];
    }
    s.near_surface = sample_near_surface(pts, nrm, config.near_delta, mix_seed(seed, 4), s.domain);
  }
  return s;
}

PointCloud perturb_inputs(const PointCloud& cloud, double sigma, std::uint64_t seed, const Box& box) {
  if (sigma == 0.0) return cloud;
  if (!cloud.has_normals()) throw GeometryError("noise augmentation needs normals");
  PointCloud out = cloud;
  out.positions = perturb_along_normals(cloud.positions, cloud.normals, sigma, seed);
  for (auto& p : out.positions) p = box.clamp(p);
  return out;
}

std::vector<NamedTensor> snapshot_parameters(const ParamStore& params) {
  std::vector<NamedTensor> out;
  for (const auto& [name, p] : params) out.push_back({name, p.shape(), {p.data().begin(), p.data().end()}});
  return out;
}

void load_parameters(ParamStore& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.tensor_count()) {
    throw ShapeError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                     std::to_string(params.tensor_count()));
  }
  std::size_t i = 0;
  for (const auto& [name, p] : params) {
    const auto& t = tensors[i++];
    if (t.name != name) throw ShapeError("checkpoint tensor '" + t.name + "' where '" + name + "' was expected");
    if (t.shape != p.shape()) {
      throw ShapeError("shape mismatch for tensor '" + name + "': checkpoint " + shape_string(t.shape) + ", model " +
                       shape_string(p.shape()));
    }
    Value handle = p;
    std::copy(t.data.begin(), t.data.end(), handle.mutable_data().begin());
  }
}

Container to_container(const Checkpoint& c) {
  Container out;
  out.header = {{"kind", "checkpoint"},
                {"config", to_json(c.config)},
                {"iteration", c.iteration},
                {"adam", {{"step", c.adam.step}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}}};
  out.tensors = c.parameters;
  const bool has_moments = !c.adam.m.empty();
  for (std::size_t i = 0; has_moments && i < c.parameters.size(); ++i) {
    out.tensors.push_back({"adam.m/" + c.parameters[i].name, c.parameters[i].shape, c.adam.m[i]});
  }
  for (std::size_t i = 0; has_moments && i < c.parameters.size(); ++i) {
    out.tensors.push_back({"adam.v/" + c.parameters[i].name, c.parameters[i].shape, c.adam.v[i]});
  }
  out.rng = c.rng;
  return out;
}

Checkpoint from_container(const Container& c) {
  if (c.header.value("kind", "") != "checkpoint") throw ParseError("not a checkpoint file");
  Checkpoint out;
  try {
    out.config = run_config_from_json(c.header.at("config"));
    out.iteration = c.header.at("iteration").get<std::uint64_t>();
    const auto& a = c.header.at("adam");
    out.adam.step = a.at("step").get<std::uint64_t>();
    out.adam.beta1 = a.at("beta1").get<double>();
    out.adam.beta2 = a.at("beta2").get<double>();
    out.adam.eps = a.at("eps").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  for (const auto& t : c.tensors) {
    if (t.name.rfind("adam.m/", 0) == 0) {
      out.adam.m.push_back(t.data);
    } else if (t.name.rfind("adam.v/", 0) == 0) {
      out.adam.v.push_back(t.data);
    } else {
      out.parameters.push_back(t);
    }
  }
  if (!out.adam.m.empty() && (out.adam.m.size() != out.parameters.size() || out.adam.v.size() != out.parameters.size())) {
    throw ParseError("checkpoint: optimizer moments do not match the parameters");
  }
  out.rng = c.rng;
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { save_container(path, to_container(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return from_container(load_container(path)); }

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& c) {
  auto model = std::make_unique<Model>(c.config.model(), c.config.train.seed);
  load_parameters(model->params(), c.parameters);
  return model;
}

Trainer::Trainer(const RunConfig& config, std::vector<PreparedShape> data)
    : config_(config), data_(std::move(data)), batch_rng_(mix_seed(config.train.seed, 0xba7c4)) {
  config_.validate();
  model_ = std::make_unique<Model>(config_.model(), config_.train.seed);
  check_data();
}

Trainer::Trainer(const Checkpoint& resume, std::vector<PreparedShape> data)
    : config_(resume.config), data_(std::move(data)), adam_(resume.adam), iteration_(resume.iteration) {
  config_.validate();
  model_ = model_from_checkpoint(resume);
  batch_rng_.set_state(resume.rng);
  check_data();
}

void Trainer::set_iterations(std::uint64_t iterations) { config_.train.iterations = iterations; }

void Trainer::check_data() const {
  if (data_.empty()) throw ConfigError("train: the dataset is empty");
  const bool normals_needed =
      config_.encoder.use_normals || config_.train.noise_sigma > 0.0 || config_.loss.normal > 0.0;
  for (const auto& s : data_) {
    s.cloud.validate();
    if (normals_needed && !s.cloud.has_normals()) {
      throw GeometryError("train: shape '" + s.name + "' has no normals but the configuration needs them");
    }
  }
}

LossBreakdown Trainer::step() {
  const std::size_t n = data_.size();
  const std::size_t b = std::min(config_.train.batch_size, n);
  auto batch = choose_distinct(n, b, batch_rng_);

  model_->params().zero_grad();
  LossBreakdown sum;
  Value total;
  for (std::size_t shape_id : batch) {
    const auto& shape = data_[shape_id];
    const std::uint64_t seed = mix_seed(config_.train.seed, shape_id, iteration_);
    PointCloud input = perturb_inputs(shape.cloud, config_.train.noise_sigma, mix_seed(seed, 5));
    GridVector gv = model_->encode(input, {true, mix_seed(seed, 6)});
    SampleSet samples = make_training_samples(shape.cloud, config_.sampling, seed);
    LossBreakdown lb = total_loss(field_evaluator(model_->bind(gv)), samples, config_.loss);
    sum.eikonal += lb.eikonal / b;
    sum.surface += lb.surface / b;
    sum.normal += lb.normal / b;
    sum.offsurface += lb.offsurface / b;
    Value part = scale(lb.total_value, 1.0 / static_cast<double>(b));
    total = total.defined() ? add(total, part) : part;
  }
  sum.total = total.item();
  sum.total_value = total;
  if (!std::isfinite(sum.total)) throw NumericError("train: non-finite loss at iteration " + std::to_string(iteration_));

  backward(total);
  double scale_factor = 1.0;
  if (config_.train.grad_clip > 0.0) {
    const double norm = gradient_norm(model_->params());
    if (!std::isfinite(norm)) throw NumericError("train: non-finite gradient at iteration " + std::to_string(iteration_));
    if (norm > config_.train.grad_clip) scale_factor = config_.train.grad_clip / norm;
  }
  adam_step(model_->params(), adam_, config_.train.lr, scale_factor);
  ++iteration_;
  return sum;
}

void Trainer::run(std::ostream* log, const std::filesystem::path& failure_path) {
  if (log) *log << kLossLogHeader << '\n';
  while (iteration_ < config_.train.iterations) {
    const std::uint64_t it = iteration_;
    LossBreakdown lb;
    try {
      lb = step();
    } catch (const NumericError&) {
      if (!failure_path.empty()) save_checkpoint(failure_path, checkpoint());
      throw;
    }
    if (log) *log << loss_log_row(it, lb) << '\n';
  }
  if (log) log->flush();
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.iteration = iteration_;
  c.parameters = snapshot_parameters(model_->params());
  c.adam = adam_;
  c.rng = batch_rng_.state();
  return c;
}

}  // namespace zlse
