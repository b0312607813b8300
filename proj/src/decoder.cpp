#include "zlse/decoder.hpp"

#include <cmath>
#include <string>

#include "zlse/errors.hpp"

namespace zlse {

void DecoderConfig::validate() const {
  if (depth < 1) throw ConfigError("decoder: depth must be at least 1");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ConfigError("decoder: omega0 must be positive");
}

Decoder::Decoder(const DecoderConfig& config, std::size_t latent_size, ParamStore& store, Rng& rng)
    : config_(config), latent_(latent_size) {
  config_.validate();
  if (latent_ == 0) throw ConfigError("decoder: latent size must be at least 1");
  const std::size_t w = config_.width(latent_);
  const double siren_bound = std::sqrt(6.0 / static_cast<double>(w)) / config_.omega0;
  auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string p = "decoder.synth" + std::to_string(i) + ".";
    const std::size_t in = i == 0 ? 3 : w;
    Layer l;
    l.weight = store.add_uniform(p + "weight", {in, w}, i == 0 ? 1.0 / 3.0 : siren_bound, rng);
    l.bias = store.add_uniform(p + "bias", {w}, fan(in), rng);
    synth_.push_back(l);
  }
  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string p = "decoder.mod" + std::to_string(i) + ".";
    const std::size_t in = i == 0 ? latent_ : (config_.modulator_latent_skip ? w + latent_ : w);
    Layer l;
    l.weight = store.add_uniform(p + "weight", {in, w}, fan(in), rng);
    l.bias = store.add_uniform(p + "bias", {w}, fan(in), rng);
    mod_.push_back(l);
  }
  out_.weight = store.add_uniform("decoder.out.weight", {w, 1}, 1e-2, rng);
  out_.bias = store.add_uniform("decoder.out.bias", {1}, 1e-2, rng);
}

Dual Decoder::decode(const Dual& latent, const Dual& positions) const {
  if (latent.value.rank() != 2 || latent.value.cols() != latent_ || positions.value.rank() != 2 ||
      positions.value.cols() != 3 || latent.value.rows() != positions.value.rows()) {
    throw ShapeError("decode: latent " + shape_string(latent.value.shape()) + " and positions " +
                     shape_string(positions.value.shape()) + " do not match");
  }
  Dual h = positions;
  Dual m;
  for (std::size_t i = 0; i < config_.depth; ++i) {
    Dual mod_in = i == 0 ? latent : (config_.modulator_latent_skip ? dual_concat_cols(m, latent) : m);
    m = dual_relu(dual_linear(mod_in, mod_[i].weight, mod_[i].bias));
    h = dual_mul(dual_sin(dual_linear(h, synth_[i].weight, synth_[i].bias), config_.omega0), m);
  }
  return dual_linear(h, out_.weight, out_.bias);
}

Value Decoder::decode(const Value& latent, const Value& positions) const {
  return decode(dual_constant(latent), dual_constant(positions)).value;
}

std::size_t Decoder::param_count(const DecoderConfig& config, std::size_t latent) {
  const std::size_t w = config.width(latent), d = config.depth;
  std::size_t n = (3 * w + w) + (d - 1) * (w * w + w) + (w + 1);
  n += latent * w + w;
  for (std::size_t i = 1; i < d; ++i) n += (config.modulator_latent_skip ? w + latent : w) * w + w;
  return n;
}

}  // namespace zlse
