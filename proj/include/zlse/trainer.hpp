#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "zlse/config.hpp"
#include "zlse/container.hpp"
#include "zlse/loss.hpp"
#include "zlse/model.hpp"

namespace zlse {

// A normalized training cloud.
struct PreparedShape {
  std::string name;
  PointCloud cloud;
  nlohmann::json metadata = nlohmann::json::object();
};

void save_prepared(const std::filesystem::path& path, const PreparedShape& shape);
PreparedShape load_prepared(const std::filesystem::path& path);
// Every *.zlsp file in `dir`, sorted by file name.
std::vector<PreparedShape> load_dataset(const std::filesystem::path& dir);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;  // mirror the ParamStore order
};

// One bias-corrected Adam update from the accumulated gradients, each
// multiplied by grad_scale first. Throws NumericError on a non-finite gradient.
void adam_step(ParamStore& params, AdamState& state, double lr, double grad_scale = 1.0);

double gradient_norm(const ParamStore& params);

// Loss samples for one shape: distinct cloud points as surface samples,
// uniform domain points, and cloud points displaced along their normals by
// U(-delta, delta) (only when normals exist).
SampleSet make_training_samples(const PointCloud& cloud, const SamplingConfig& config, std::uint64_t seed);

// Moves every point along its normal by U(-sigma, sigma), clamped to the box.
PointCloud perturb_inputs(const PointCloud& cloud, double sigma, std::uint64_t seed, const Box& box = {});

struct Checkpoint {
  RunConfig config;
  std::uint64_t iteration = 0;
  std::vector<NamedTensor> parameters;
  AdamState adam;
  std::string rng;
};

Container to_container(const Checkpoint& c);
Checkpoint from_container(const Container& c);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot_parameters(const ParamStore& params);
// Names and shapes must match exactly; a mismatch names the tensor.
void load_parameters(ParamStore& params, const std::vector<NamedTensor>& tensors);

// Rebuilds a model from a checkpoint's config and weights.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& c);

class Trainer {
 public:
  Trainer(const RunConfig& config, std::vector<PreparedShape> data);
  Trainer(const Checkpoint& resume, std::vector<PreparedShape> data);

  Model& model() { return *model_; }
  std::uint64_t iteration() const { return iteration_; }

  LossBreakdown step();
  // Moves the stopping point (used when extending a resumed run).
  void set_iterations(std::uint64_t iterations);
  // Runs until `iteration() == config.train.iterations`, appending one CSV row
  // per step to `log`. On a numeric failure the current state is written to
  // `failure_path` (when given) before rethrowing.
  void run(std::ostream* log = nullptr, const std::filesystem::path& failure_path = {});

  Checkpoint checkpoint() const;

 private:
  void check_data() const;

  RunConfig config_;
  std::vector<PreparedShape> data_;
  std::unique_ptr<Model> model_;
  AdamState adam_;
  Rng batch_rng_;
  std::uint64_t iteration_ = 0;
};

// One CSV row matching kLossLogHeader, values with 9 significant digits.
std::string loss_log_row(std::uint64_t iter, const LossBreakdown& b);

inline constexpr const char* kLossLogHeader = "iter,eikonal,surface,normal,offsurface,total";

}  // namespace zlse
