#include "zlse/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "zlse/errors.hpp"
#include "zlse/metrics.hpp"
#include "zlse/reconstruct.hpp"
#include "zlse/trainer.hpp"

namespace zlse {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_in_domain(const std::vector<Vec3>& points, const std::string& what) {
  const Box box;
  for (const auto& p : points) {
    if (!box.contains(p)) throw GeometryError(what + ": points lie outside [-1, 1]^3 (use prepare --normalize)");
  }
}

// A prepared shape file, or any point-cloud geometry file.
PointCloud load_cloud(const fs::path& path) {
  if (path.extension() == ".zlsp") return load_prepared(path).cloud;
  auto g = load_geometry(path);
  if (!std::holds_alternative<PointCloud>(g)) throw GeometryError(path.string() + ": expected a point cloud");
  auto cloud = std::get<PointCloud>(std::move(g));
  cloud.validate();
  check_in_domain(cloud.positions, path.string());
  return cloud;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// ---- prepare

struct PrepareArgs {
  std::string input, output, name;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool normalize = false;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  auto g = load_geometry(a.input);
  PreparedShape shape;
  shape.name = a.name.empty() ? fs::path(a.input).stem().string() : a.name;
  nlohmann::json norm = nullptr;
  auto record_transform = [&](const NormalizationTransform& t) {
    norm = {{"translation", {t.translation[0], t.translation[1], t.translation[2]}}, {"scale", t.scale}};
  };

  if (auto* mesh = std::get_if<TriangleMesh>(&g)) {
    mesh->validate();
    if (a.normalize) {
      auto [m, t] = normalize_to_unit_box(*mesh);
      *mesh = std::move(m);
      record_transform(t);
    }
    auto s = sample_surface(*mesh, a.samples, a.seed);
    shape.cloud = {std::move(s.points), std::move(s.normals)};
    shape.metadata["source_kind"] = "mesh";
  } else {
    auto cloud = std::get<PointCloud>(std::move(g));
    cloud.validate();
    if (a.normalize) {
      auto [c, t] = normalize_to_unit_box(cloud);
      cloud = std::move(c);
      record_transform(t);
    }
    if (a.samples < cloud.size()) {
      // seeded subset, kept in file order
      Rng rng(mix_seed(a.seed, 0x7072));
      std::vector<std::size_t> idx(cloud.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < a.samples; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      idx.resize(a.samples);
      std::sort(idx.begin(), idx.end());
      PointCloud sub;
      for (auto i : idx) {
        sub.positions.push_back(cloud.positions[i]);
        if (cloud.has_normals()) sub.normals.push_back(cloud.normals[i]);
      }
      cloud = std::move(sub);
    }
    shape.cloud = std::move(cloud);
    shape.metadata["source_kind"] = "cloud";
  }
  check_in_domain(shape.cloud.positions, a.input);
  shape.metadata["source"] = fs::path(a.input).filename().string();
  shape.metadata["normalization"] = norm;
  shape.metadata["seed"] = a.seed;
  save_prepared(a.output, shape);
  out << "prepared " << shape.cloud.size() << " points" << (shape.cloud.has_normals() ? " with normals" : "")
      << " -> " << a.output << '\n';
  if (!shape.cloud.has_normals()) warn("prepare: the cloud has no normals; training with a normal term will fail");
  return 0;
}

// ---- train

struct TrainArgs {
  std::string config, data, out, resume, log;
  std::optional<std::uint64_t> iterations;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  if (a.config.empty() && a.resume.empty()) throw ConfigError("train: --config is required unless resuming");
  auto data = load_dataset(a.data);
  std::unique_ptr<Trainer> trainer;
  if (!a.resume.empty()) {
    auto ck = load_checkpoint(a.resume);
    trainer = std::make_unique<Trainer>(ck, std::move(data));
    if (!a.config.empty()) trainer->set_iterations(load_run_config(a.config).train.iterations);
  } else {
    trainer = std::make_unique<Trainer>(load_run_config(a.config), std::move(data));
  }
  if (a.iterations) trainer->set_iterations(*a.iterations);
  const std::uint64_t target = trainer->checkpoint().config.train.iterations;

  fs::path log_path = a.log.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.log);
  auto log = open_output(log_path);
  log << kLossLogHeader << '\n';
  fs::path failure = fs::path(a.out);
  failure.replace_filename(failure.stem().string() + ".failed.zlse");

  const auto t0 = Clock::now();
  const std::uint64_t every = std::max<std::uint64_t>(1, target / 20);
  while (trainer->iteration() < target) {
    const std::uint64_t it = trainer->iteration();
    LossBreakdown lb;
    try {
      lb = trainer->step();
    } catch (const NumericError&) {
      save_checkpoint(failure, trainer->checkpoint());
      out << "numeric failure at iteration " << it << "; state written to " << failure.string() << '\n';
      throw;
    }
    log << loss_log_row(it, lb) << '\n';
    if ((it + 1) % every == 0 || it + 1 == target) {
      out << "iter " << it + 1 << "/" << target << "  total " << fmt9(lb.total) << "  surface " << fmt9(lb.surface)
          << "  eikonal " << fmt9(lb.eikonal) << "  (" << fmt9(seconds_since(t0)) << " s)\n";
    }
  }
  save_checkpoint(a.out, trainer->checkpoint());
  out << "checkpoint -> " << a.out << "\nloss log -> " << log_path.string() << '\n';
  return 0;
}

// ---- reconstruct

struct ReconstructArgs {
  std::string ckpt, input, output, field_output;
  std::size_t resolution = 128, chunk = 65536;
  std::optional<double> iso;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
  if (a.resolution < 2) throw ConfigError("reconstruct: resolution must be at least 2");
  auto ck = load_checkpoint(a.ckpt);
  auto model = model_from_checkpoint(ck);
  auto cloud = load_cloud(a.input);
  // unsigned fields rarely cross zero; extract a thin shell instead
  const double iso = a.iso.value_or(ck.config.loss.mode == LossMode::unsigned_distance ? 0.01 : 0.0);

  auto t0 = Clock::now();
  auto field = evaluate_dense(*model, cloud, a.resolution, a.chunk);
  const double t_eval = seconds_since(t0);
  t0 = Clock::now();
  auto mesh = marching_cubes(field, iso);
  const double t_mc = seconds_since(t0);
  export_mesh(mesh, a.output);
  if (!a.field_output.empty()) {
    auto f = open_output(a.field_output);
    for (double v : field.values) f << fmt9(v) << '\n';
  }

  const std::size_t r = a.resolution, cells = (r - 1) * (r - 1) * (r - 1);
  out << "lattice " << r << "^3 = " << r * r * r << " points, " << cells << " cells, iso " << fmt9(iso) << '\n';
  out << "field evaluation " << fmt9(t_eval) << " s, marching cubes " << fmt9(t_mc) << " s\n";
  out << "mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles -> " << a.output
      << '\n';
  if (mesh.triangles.empty()) warn("reconstruct: the field has no crossing at iso " + fmt9(iso) + "; wrote an empty mesh");
  return 0;
}

// ---- sdf

struct SdfArgs {
  std::string ckpt, input, queries, output;
  std::size_t chunk = 65536;
};

int cmd_sdf(const SdfArgs& a, std::ostream& out) {
  auto ck = load_checkpoint(a.ckpt);
  auto model = model_from_checkpoint(ck);
  auto cloud = load_cloud(a.input);
  std::ifstream qin(a.queries);
  if (!qin) throw Error("cannot read " + a.queries);
  auto q = std::get<PointCloud>(read_geometry(qin, GeometryFormat::xyz)).positions;

  NoGradGuard guard;
  GridVector gv = model->encode(cloud);
  std::ostringstream text;
  const std::size_t chunk = a.chunk ? a.chunk : std::max<std::size_t>(1, q.size());
  for (std::size_t s = 0; s < q.size(); s += chunk) {
    const std::size_t e = std::min(q.size(), s + chunk);
    Value v = model->field(gv, positions_value(std::span<const Vec3>(q).subspan(s, e - s)));
    for (std::size_t i = 0; i < e - s; ++i) {
      if (!std::isfinite(v(i, 0))) throw NumericError("sdf: non-finite value at query " + std::to_string(s + i));
      text << fmt9(v(i, 0)) << '\n';
    }
  }
  if (a.output.empty() || a.output == "-") {
    out << text.str();
  } else {
    auto f = open_output(a.output);
    f << text.str();
  }
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string pred, gt, output;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool squared = false, absolute_nc = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  MetricOptions opt;
  opt.samples = a.samples;
  opt.seed = a.seed;
  opt.squared = a.squared;
  opt.absolute_nc = a.absolute_nc;
  auto report = evaluate_pair(load_geometry(a.pred), load_geometry(a.gt), opt);
  const std::string text = report.to_json().dump(2) + "\n";
  if (a.output.empty()) {
    out << text;
  } else {
    auto f = open_output(a.output);
    f << text;
  }
  return 0;
}

// ---- info

struct InfoArgs {
  std::string ckpt, config;
  bool json = false;
};

int cmd_info(const InfoArgs& a, std::ostream& out) {
  if (a.ckpt.empty() == a.config.empty()) throw ConfigError("info: give exactly one of --ckpt and --config");
  std::unique_ptr<Model> model;
  RunConfig config;
  std::optional<std::uint64_t> iteration;
  if (!a.ckpt.empty()) {
    auto ck = load_checkpoint(a.ckpt);
    model = model_from_checkpoint(ck);
    config = ck.config;
    iteration = ck.iteration;
  } else {
    config = load_run_config(a.config);
    model = std::make_unique<Model>(config.model(), config.train.seed);
  }
  const auto& store = model->params();
  nlohmann::json modules = nlohmann::json::object();
  modules["encoder.input"] = store.count_with_prefix("encoder.input.");
  for (std::size_t l = 0; l < config.encoder.resolutions.size(); ++l) {
    const std::string p = "encoder.block" + std::to_string(l);
    modules[p] = store.count_with_prefix(p + ".");
  }
  for (const char* p : {"decoder.synth", "decoder.mod", "decoder.out"}) modules[p] = store.count_with_prefix(p);
  nlohmann::json j = {{"encoder", model->encoder_param_count()},
                      {"decoder", model->decoder_param_count()},
                      {"total", store.total_count()},
                      {"tensors", store.tensor_count()},
                      {"modules", modules},
                      {"config", to_json(config)}};
  if (iteration) j["iteration"] = *iteration;

  if (a.json) {
    out << j.dump(2) << '\n';
    return 0;
  }
  if (iteration) out << "iteration " << *iteration << '\n';
  out << "resolutions";
  for (auto r : config.encoder.resolutions) out << ' ' << r;
  out << ", features " << config.encoder.features << ", decoder width " << model->decoder().config().width(
      config.encoder.features) << " depth " << config.decoder.depth << '\n';
  for (auto& [name, count] : modules.items()) out << "  " << name << "  " << count.get<std::size_t>() << '\n';
  out << "encoder " << model->encoder_param_count() << '\n';
  out << "decoder " << model->decoder_param_count() << '\n';
  out << "total " << store.total_count() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid-vector neural signed distance fields"};
  app.name("zlse");
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Normalize and sample a shape into a prepared .zlsp file");
  p->add_option("--input", prep.input, "Mesh or point cloud (obj, ply, xyz)")->required()->check(CLI::ExistingFile);
  p->add_option("--output", prep.output, "Prepared shape file")->required();
  p->add_option("--surface-samples", prep.samples, "Surface samples (meshes) or subset size (clouds)")
      ->capture_default_str();
  p->add_option("--seed", prep.seed)->capture_default_str();
  p->add_option("--name", prep.name, "Shape name (default: input stem)");
  p->add_flag("--normalize", prep.normalize, "Fit the bounding box into [-1, 1]^3");

  TrainArgs tr;
  std::uint64_t iterations = 0;
  auto* t = app.add_subcommand("train", "Train a model on prepared shapes");
  t->add_option("--config", tr.config, "Run configuration JSON")->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "Directory of .zlsp files, or one file")->required();
  t->add_option("--out", tr.out, "Output checkpoint")->required();
  t->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_option("--log", tr.log, "Loss log CSV (default: checkpoint path with .csv)");
  auto* iter_opt = t->add_option("--iterations", iterations, "Override the configured iteration count");

  ReconstructArgs rec;
  double iso = 0;
  auto* r = app.add_subcommand("reconstruct", "Extract a mesh from a trained model");
  r->add_option("--ckpt", rec.ckpt)->required()->check(CLI::ExistingFile);
  r->add_option("--input", rec.input, "Input point cloud (.zlsp or xyz/ply/obj)")->required()->check(CLI::ExistingFile);
  r->add_option("--resolution", rec.resolution)->capture_default_str();
  auto* iso_opt = r->add_option("--iso", iso, "Iso level (default 0, or 0.01 for unsigned models)");
  r->add_option("--output", rec.output, "Mesh file (.obj or .ply)")->required();
  r->add_option("--chunk", rec.chunk, "Lattice points per evaluation chunk")->capture_default_str();
  r->add_option("--field-output", rec.field_output, "Also write the lattice values, one per line");

  SdfArgs sdf;
  auto* s = app.add_subcommand("sdf", "Evaluate the field at query points");
  s->add_option("--ckpt", sdf.ckpt)->required()->check(CLI::ExistingFile);
  s->add_option("--input", sdf.input)->required()->check(CLI::ExistingFile);
  s->add_option("--queries", sdf.queries, "Text file with one x y z per line")->required()->check(CLI::ExistingFile);
  s->add_option("--output", sdf.output, "Output file (default: stdout)");
  s->add_option("--chunk", sdf.chunk)->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Chamfer distance and normal consistency");
  e->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt)->required()->check(CLI::ExistingFile);
  e->add_option("--samples", ev.samples)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--output", ev.output, "Report file (default: stdout)");
  e->add_flag("--squared", ev.squared, "Squared distances");
  e->add_flag("--absolute-nc", ev.absolute_nc, "Absolute cosine");

  InfoArgs info;
  auto* i = app.add_subcommand("info", "Parameter counts");
  i->add_option("--ckpt", info.ckpt)->check(CLI::ExistingFile);
  i->add_option("--config", info.config)->check(CLI::ExistingFile);
  i->add_flag("--json", info.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*p) return cmd_prepare(prep, out);
    if (*t) {
      if (*iter_opt) tr.iterations = iterations;
      return cmd_train(tr, out);
    }
    if (*r) {
      if (*iso_opt) rec.iso = iso;
      return cmd_reconstruct(rec, out);
    }
    if (*s) return cmd_sdf(sdf, out);
    if (*e) return cmd_eval(ev, out);
    if (*i) return cmd_info(info, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return ex.exit_code();
  } catch (const nlohmann::json::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace zlse
