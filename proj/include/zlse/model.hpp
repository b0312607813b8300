#pragma once

#include <cstdint>
#include <memory>

#include "zlse/decoder.hpp"
#include "zlse/encoder.hpp"
#include "zlse/params.hpp"

namespace zlse {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
};

// Encoder + decoder sharing one parameter store. Not copyable: the layers
// hold handles into the store.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const Encoder& encoder() const { return *encoder_; }
  const Decoder& decoder() const { return *decoder_; }

  GridVector encode(const PointCloud& cloud, const EncodeOptions& options = {}) const {
    return encoder_->encode(cloud, options);
  }
  Dual field(const GridVector& gv, const Dual& positions) const;
  Value field(const GridVector& gv, const Value& positions) const;
  // Binds a grid vector; the returned callable keeps references to both.
  ScalarField bind(const GridVector& gv) const;

  std::size_t encoder_param_count() const { return store_.count_with_prefix("encoder."); }
  std::size_t decoder_param_count() const { return store_.count_with_prefix("decoder."); }

 private:
  ModelConfig config_;
  ParamStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Decoder> decoder_;
};

}  // namespace zlse
