#include "zlse/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "zlse/errors.hpp"

namespace zlse {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("train: noise_sigma must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be >= 0");
}

void SamplingConfig::validate() const {
  if (surface < 1) throw ConfigError("sampling: surface count must be at least 1");
  if (!(near_delta >= 0.0)) throw ConfigError("sampling: near_delta must be >= 0");
}

void RunConfig::validate() const {
  encoder.validate();
  decoder.validate();
  loss.validate();
  train.validate();
  sampling.validate();
}

namespace {

// Reads the keys of one section, rejecting anything it does not know.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw ConfigError(std::string("config: section '") + name + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const json& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!v.is_array()) throw ConfigError("");
        for (const auto& e : v)
          if (!e.is_number_integer() || (!e.is_number_unsigned() && e.get<std::int64_t>() < 0)) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: bad value for " + name_ + "." + key + ": " + v.dump());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, _] : node_->items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key " + name_ + "." + k);
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> sections{"encoder", "decoder", "loss", "train", "sampling"};
  for (const auto& [k, _] : j.items()) {
    if (!sections.count(k)) throw ConfigError("config: unknown section '" + k + "'");
  }
  RunConfig c;

  Section enc(j, "encoder");
  enc.read("resolutions", c.encoder.resolutions);
  enc.read("features", c.encoder.features);
  enc.read("knn", c.encoder.knn);
  std::string transfer = c.encoder.transfer == TransferMode::pic ? "pic" : "maxpool";
  enc.read("transfer", transfer);
  if (transfer == "pic") c.encoder.transfer = TransferMode::pic;
  else if (transfer == "maxpool") c.encoder.transfer = TransferMode::maxpool;
  else throw ConfigError("config: encoder.transfer must be 'pic' or 'maxpool'");
  std::string g2p = c.encoder.grid_to_point == SampleMode::trilinear ? "trilinear" : "nearest";
  enc.read("grid_to_point", g2p);
  if (g2p == "trilinear") c.encoder.grid_to_point = SampleMode::trilinear;
  else if (g2p == "nearest") c.encoder.grid_to_point = SampleMode::nearest;
  else throw ConfigError("config: encoder.grid_to_point must be 'trilinear' or 'nearest'");
  enc.read("graph_conv", c.encoder.graph_conv);
  enc.read("grid_conv", c.encoder.grid_conv);
  enc.read("use_normals", c.encoder.use_normals);
  enc.read("pe_frequencies", c.encoder.pe_frequencies);
  enc.read("pic_dropout", c.encoder.pic_dropout);
  enc.finish();

  Section dec(j, "decoder");
  dec.read("hidden", c.decoder.hidden);
  dec.read("depth", c.decoder.depth);
  dec.read("omega0", c.decoder.omega0);
  dec.read("modulator_latent_skip", c.decoder.modulator_latent_skip);
  dec.finish();

  Section loss(j, "loss");
  loss.read("eikonal", c.loss.eikonal);
  loss.read("surface", c.loss.surface);
  loss.read("normal", c.loss.normal);
  loss.read("offsurface", c.loss.offsurface);
  loss.read("alpha", c.loss.alpha);
  std::string mode = to_string(c.loss.mode);
  loss.read("mode", mode);
  c.loss.mode = parse_loss_mode(mode);
  loss.finish();

  Section train(j, "train");
  train.read("lr", c.train.lr);
  train.read("batch_size", c.train.batch_size);
  train.read("iterations", c.train.iterations);
  train.read("seed", c.train.seed);
  train.read("noise_sigma", c.train.noise_sigma);
  train.read("grad_clip", c.train.grad_clip);
  train.finish();

  Section samp(j, "sampling");
  samp.read("surface", c.sampling.surface);
  samp.read("uniform", c.sampling.uniform);
  samp.read("near", c.sampling.near);
  samp.read("near_delta", c.sampling.near_delta);
  samp.finish();

  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["encoder"] = {{"resolutions", c.encoder.resolutions},
                  {"features", c.encoder.features},
                  {"knn", c.encoder.knn},
                  {"transfer", c.encoder.transfer == TransferMode::pic ? "pic" : "maxpool"},
                  {"grid_to_point", c.encoder.grid_to_point == SampleMode::trilinear ? "trilinear" : "nearest"},
                  {"graph_conv", c.encoder.graph_conv},
                  {"grid_conv", c.encoder.grid_conv},
                  {"use_normals", c.encoder.use_normals},
                  {"pe_frequencies", c.encoder.pe_frequencies},
                  {"pic_dropout", c.encoder.pic_dropout}};
  j["decoder"] = {{"hidden", c.decoder.hidden},
                  {"depth", c.decoder.depth},
                  {"omega0", c.decoder.omega0},
                  {"modulator_latent_skip", c.decoder.modulator_latent_skip}};
  j["loss"] = {{"eikonal", c.loss.eikonal},   {"surface", c.loss.surface}, {"normal", c.loss.normal},
               {"offsurface", c.loss.offsurface}, {"alpha", c.loss.alpha},  {"mode", to_string(c.loss.mode)}};
  j["train"] = {{"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"iterations", c.train.iterations},
                {"seed", c.train.seed},
                {"noise_sigma", c.train.noise_sigma},
                {"grad_clip", c.train.grad_clip}};
  j["sampling"] = {{"surface", c.sampling.surface},
                   {"uniform", c.sampling.uniform},
                   {"near", c.sampling.near},
                   {"near_delta", c.sampling.near_delta}};
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace zlse
