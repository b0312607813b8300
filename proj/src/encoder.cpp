#include "zlse/encoder.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace zlse {

namespace {

// Row order that groups each 2x2x2 block of fine cells together: row
// (coarse * 8 + offset) of the blocked layout holds fine cell
// (2I + ox, 2J + oy, 2K + oz) with offset = ox * 4 + oy * 2 + oz.
std::vector<std::size_t> block_order(std::size_t r) {
  const std::size_t half = r / 2;
  std::vector<std::size_t> order;
  order.reserve(r * r * r);
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = 0; j < half; ++j)
      for (std::size_t k = 0; k < half; ++k)
        for (std::size_t o = 0; o < 8; ++o) {
          const std::size_t fi = 2 * i + ((o >> 2) & 1), fj = 2 * j + ((o >> 1) & 1), fk = 2 * k + (o & 1);
          order.push_back((fi * r + fj) * r + fk);
        }
  return order;
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& p) {
  std::vector<std::size_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

}  // namespace

void EncoderConfig::validate() const {
  if (resolutions.empty()) throw ConfigError("encoder: at least one resolution is required");
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    const auto r = resolutions[i];
    if (r < 2 || r % 2 != 0) throw ConfigError("encoder: resolution " + std::to_string(r) + " must be even and >= 2");
    if (i > 0 && r <= resolutions[i - 1]) throw ConfigError("encoder: resolutions must be strictly increasing");
  }
  if (features < 1) throw ConfigError("encoder: feature size must be at least 1");
  if (knn < 1) throw ConfigError("encoder: knn must be at least 1");
  if (pic_dropout < 0.0 || pic_dropout >= 1.0) throw ConfigError("encoder: pic_dropout must lie in [0, 1)");
}

EncoderConfig paper_large_encoder() {
  EncoderConfig c;
  c.resolutions = {4, 8, 16, 32, 64};
  c.features = 64;
  return c;
}

Value positional_encode(std::span<const Vec3> positions, std::size_t frequencies) {
  const std::size_t n = positions.size(), width = 3 + 6 * frequencies;
  std::vector<double> out(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * width;
    for (int a = 0; a < 3; ++a) row[a] = positions[i][a];
    double freq = std::numbers::pi;
    for (std::size_t l = 0; l < frequencies; ++l, freq *= 2.0) {
      for (int a = 0; a < 3; ++a) {
        row[3 + 6 * l + a] = std::sin(freq * positions[i][a]);
        row[3 + 6 * l + 3 + a] = std::cos(freq * positions[i][a]);
      }
    }
  }
  return Value::constant({n, width}, std::move(out));
}

Value edge_conv(const Value& features, const KnnGraph& graph, const Value& weight, const Value& bias) {
  if (features.rank() != 2 || features.rows() != graph.vertex_count) {
    throw ShapeError("edge_conv: features " + shape_string(features.shape()) + " for a graph of " +
                     std::to_string(graph.vertex_count) + " vertices");
  }
  if (graph.k == 0) throw GeometryError("edge_conv: vertex without out-edges");
  const std::size_t n = graph.vertex_count, k = graph.k;
  std::vector<std::size_t> self_index(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = 0; e < k; ++e) self_index[i * k + e] = i;
  Value fi = gather_rows(features, self_index);
  Value fj = gather_rows(features, graph.neighbors);
  Value messages = relu(linear(concat_cols({fi, sub(fj, fi)}), weight, bias));
  return reduce(Reduction::max, reshape(messages, {n, k, weight.cols()}), 1);
}

LatentGrid grid_conv(const LatentGrid& grid, const ConvBlockParams& params) {
  const std::size_t r = grid.spec.resolution, f = grid.channels;
  if (r % 2 != 0) throw ConfigError("grid_conv: resolution must be even");
  const std::size_t coarse = (r / 2) * (r / 2) * (r / 2);
  const auto order = block_order(r);
  Value blocked = reshape(gather_rows(grid.values, order), {coarse, 8 * f});
  Value hidden = relu(linear(blocked, params.conv_weight, params.conv_bias));
  Value expanded = reshape(matmul(hidden, params.deconv_weight), {coarse * 8, f});
  Value fine = gather_rows(expanded, inverse_permutation(order));
  return {grid.spec, f, relu(add_bias(fine, params.deconv_bias))};
}

BlockOutput conv_block(const Value& features, std::span<const Vec3> positions, const KnnGraph& graph,
                       const GridSpec& spec, const ConvBlockParams& params, const EncoderConfig& config,
                       const PicOptions& pic) {
  if (spec.resolution % 2 != 0) throw ConfigError("conv_block: resolution must be even");
  Value g = config.graph_conv ? edge_conv(features, graph, params.edge_weight, params.edge_bias) : features;
  LatentGrid grid = config.transfer == TransferMode::pic ? pic_project(positions, g, spec, pic)
                                                         : maxpool_voxelize(positions, g, spec);
  if (config.grid_conv) grid = grid_conv(grid, params);
  Value v = sample_grid(grid, positions_value(positions), config.grid_to_point);
  Value out = relu(linear(add(g, v), params.fc_weight, params.fc_bias));
  return {out, grid};
}

Encoder::Encoder(const EncoderConfig& config, ParamStore& store, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t f = config_.features, in = config_.input_dim();
  auto bound = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  input_weight_ = store.add_uniform("encoder.input.weight", {in, f}, bound(in), rng);
  input_bias_ = store.add_uniform("encoder.input.bias", {f}, bound(in), rng);
  for (std::size_t l = 0; l < config_.resolutions.size(); ++l) {
    const std::string p = "encoder.block" + std::to_string(l) + ".";
    ConvBlockParams b;
    b.edge_weight = store.add_uniform(p + "edge.weight", {2 * f, f}, bound(2 * f), rng);
    b.edge_bias = store.add_uniform(p + "edge.bias", {f}, bound(2 * f), rng);
    b.conv_weight = store.add_uniform(p + "conv.weight", {8 * f, 2 * f}, bound(8 * f), rng);
    b.conv_bias = store.add_uniform(p + "conv.bias", {2 * f}, bound(8 * f), rng);
    b.deconv_weight = store.add_uniform(p + "deconv.weight", {2 * f, 8 * f}, bound(2 * f), rng);
    b.deconv_bias = store.add_uniform(p + "deconv.bias", {f}, bound(2 * f), rng);
    b.fc_weight = store.add_uniform(p + "fc.weight", {f, f}, bound(f), rng);
    b.fc_bias = store.add_uniform(p + "fc.bias", {f}, bound(f), rng);
    blocks_.push_back(b);
  }
}

GridVector Encoder::encode(const PointCloud& cloud, const EncodeOptions& options) const {
  cloud.validate();
  if (config_.use_normals && !cloud.has_normals()) {
    throw GeometryError("encoder: the configuration uses normals but the point cloud has none");
  }
  const auto& positions = cloud.positions;
  KnnGraph graph;
  if (config_.graph_conv) graph = build_knn_graph(positions, config_.knn);

  Value input = positional_encode(positions, config_.pe_frequencies);
  if (config_.use_normals) input = concat_cols({input, positions_value(cloud.normals)});
  Value features = relu(linear(input, input_weight_, input_bias_));

  GridVector gv;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    GridSpec spec{config_.resolutions[l], Box{}};
    PicOptions pic;
    if (options.training) {
      pic.dropout = config_.pic_dropout;
      pic.seed = mix_seed(options.dropout_seed, l);
    }
    auto out = conv_block(features, positions, graph, spec, blocks_[l], config_, pic);
    features = out.vertex_features;
    gv.levels.push_back(std::move(out.grid));
  }
  return gv;
}

Value query_latent(const GridVector& gv, const Value& queries, SampleMode mode) {
  if (gv.levels.empty()) throw ShapeError("query_latent: empty grid vector");
  Value sum = sample_grid(gv.levels[0], queries, mode);
  for (std::size_t l = 1; l < gv.levels.size(); ++l) sum = add(sum, sample_grid(gv.levels[l], queries, mode));
  return sum;
}

Dual query_latent(const GridVector& gv, const Dual& queries, SampleMode mode) {
  if (gv.levels.empty()) throw ShapeError("query_latent: empty grid vector");
  Dual sum = sample_grid(gv.levels[0], queries, mode);
  for (std::size_t l = 1; l < gv.levels.size(); ++l) sum = dual_add(sum, sample_grid(gv.levels[l], queries, mode));
  return sum;
}

}  // namespace zlse
