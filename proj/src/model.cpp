#include "zlse/model.hpp"

namespace zlse {

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng(mix_seed(seed, 0x6d6f64656c));
  encoder_ = std::make_unique<Encoder>(config_.encoder, store_, rng);
  decoder_ = std::make_unique<Decoder>(config_.decoder, config_.encoder.features, store_, rng);
}

Dual Model::field(const GridVector& gv, const Dual& positions) const {
  return decoder_->decode(query_latent(gv, positions, config_.encoder.grid_to_point), positions);
}

Value Model::field(const GridVector& gv, const Value& positions) const {
  return field(gv, dual_constant(positions)).value;
}

ScalarField Model::bind(const GridVector& gv) const {
  return [this, &gv](const Dual& x) { return field(gv, x); };
}

}  // namespace zlse
