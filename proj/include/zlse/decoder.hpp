#pragma once

#include <cstddef>
#include <vector>

#include "zlse/diff.hpp"
#include "zlse/params.hpp"

namespace zlse {

struct DecoderConfig {
  std::size_t hidden = 0;  // 0: use the latent size
  std::size_t depth = 3;
  double omega0 = 30.0;
  // Feed [m_{i-1}; latent] into modulator layer i > 0 instead of m_{i-1}.
  bool modulator_latent_skip = false;

  void validate() const;
  std::size_t width(std::size_t latent) const { return hidden == 0 ? latent : hidden; }
};

// Modulated sine MLP:
//   m_0 = relu(M_0 z + c_0),  m_i = relu(M_i m_{i-1} + c_i)
//   h_0 = x,                  h_i = sin(omega0 (W_i h_{i-1} + b_i)) * m_i
//   out = W_out h_d + b_out
class Decoder {
 public:
  Decoder(const DecoderConfig& config, std::size_t latent_size, ParamStore& store, Rng& rng);

  const DecoderConfig& config() const { return config_; }
  std::size_t latent_size() const { return latent_; }

  Dual decode(const Dual& latent, const Dual& positions) const;
  Value decode(const Value& latent, const Value& positions) const;

  static std::size_t param_count(const DecoderConfig& config, std::size_t latent_size);

 private:
  struct Layer {
    Value weight, bias;
  };
  DecoderConfig config_;
  std::size_t latent_;
  std::vector<Layer> synth_, mod_;
  Layer out_;
};

}  // namespace zlse
