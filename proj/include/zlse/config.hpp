#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "zlse/loss.hpp"
#include "zlse/model.hpp"

namespace zlse {

struct TrainConfig {
  double lr = 5e-4;
  std::size_t batch_size = 2;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  // Encoder inputs move along their normals by U(-sigma, sigma).
  double noise_sigma = 0.0;
  // Global gradient norm cap; 0 disables.
  double grad_clip = 10.0;

  void validate() const;
};

struct SamplingConfig {
  std::size_t surface = 2048;
  std::size_t uniform = 2048;
  std::size_t near = 2048;
  double near_delta = 0.1;

  void validate() const;
};

struct RunConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  LossWeights loss;
  TrainConfig train;
  SamplingConfig sampling;

  ModelConfig model() const { return {encoder, decoder}; }
  void validate() const;
};

// Missing keys keep their defaults; unknown keys and bad types throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace zlse
