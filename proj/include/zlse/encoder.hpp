#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "zlse/diff.hpp"
#include "zlse/geometry.hpp"
#include "zlse/params.hpp"
#include "zlse/transfer.hpp"

namespace zlse {

enum class TransferMode { maxpool, pic };

struct EncoderConfig {
  std::vector<std::size_t> resolutions{4, 8, 16, 32};
  std::size_t features = 64;
  std::size_t knn = 8;
  TransferMode transfer = TransferMode::pic;
  SampleMode grid_to_point = SampleMode::trilinear;
  bool graph_conv = true;
  bool grid_conv = true;
  bool use_normals = false;
  std::size_t pe_frequencies = 4;
  double pic_dropout = 0.0;

  // Resolutions strictly increasing, even and >= 2; throws ConfigError.
  void validate() const;
  std::size_t input_dim() const { return 3 + 6 * pe_frequencies + (use_normals ? 3 : 0); }
};

// Five levels [4, 8, 16, 32, 64] with 64 features.
EncoderConfig paper_large_encoder();

// One deconvolved latent grid per encoder level, coarse to fine.
struct GridVector {
  std::vector<LatentGrid> levels;
};

// [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)]
// where each sin/cos group covers the three coordinates: [n x (3 + 6L)].
Value positional_encode(std::span<const Vec3> positions, std::size_t frequencies);

// message(i, j) = relu(W [f_i ; f_j - f_i] + b), aggregated by element-wise
// max over the out-edges of i.
Value edge_conv(const Value& features, const KnnGraph& graph, const Value& weight, const Value& bias);

struct ConvBlockParams {
  Value edge_weight, edge_bias;      // [2f x f], [f]
  Value conv_weight, conv_bias;      // [8f x 2f], [2f]  (2x2x2 kernel, stride 2)
  Value deconv_weight, deconv_bias;  // [2f x 8f], [f]
  Value fc_weight, fc_bias;          // [f x f], [f]
};

// relu(conv) then relu(deconv): r -> r/2 -> r, channels f -> 2f -> f.
LatentGrid grid_conv(const LatentGrid& grid, const ConvBlockParams& params);

struct BlockOutput {
  Value vertex_features;
  LatentGrid grid;
};

BlockOutput conv_block(const Value& features, std::span<const Vec3> positions, const KnnGraph& graph,
                       const GridSpec& spec, const ConvBlockParams& params, const EncoderConfig& config,
                       const PicOptions& pic = {});

struct EncodeOptions {
  // Dropout applies only when the config enables it and this flag is set.
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

class Encoder {
 public:
  // Registers all encoder parameters under "encoder." in `store`.
  Encoder(const EncoderConfig& config, ParamStore& store, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  // The cloud must lie in the domain box and carry normals when the config uses them.
  GridVector encode(const PointCloud& cloud, const EncodeOptions& options = {}) const;

 private:
  EncoderConfig config_;
  Value input_weight_, input_bias_;
  std::vector<ConvBlockParams> blocks_;
};

// Element-wise sum over levels of the sampled latent grids.
Value query_latent(const GridVector& gv, const Value& queries, SampleMode mode = SampleMode::trilinear);
Dual query_latent(const GridVector& gv, const Dual& queries, SampleMode mode = SampleMode::trilinear);

}  // namespace zlse
