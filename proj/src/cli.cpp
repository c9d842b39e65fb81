#include "superct/cli.hpp"

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "superct/config.hpp"
#include "superct/error.hpp"
#include "superct/io.hpp"
#include "superct/metrics.hpp"
#include "superct/phantom.hpp"
#include "superct/projector.hpp"
#include "superct/spultra.hpp"

namespace superct {

namespace {

struct Run {
  std::vector<std::string> args;
  std::string command;
  fs::path out;
  json config = json::object();
  json seeds = json::object();
  std::vector<std::string> outputs;
  std::vector<double> window{800.0, 1200.0};

  void add(const std::string& name) { outputs.push_back(name); }

  void write_manifest() const {
    json m{{"command", command},
           {"argv", args},
           {"config", config},
           {"config_hash", config_hash(config)},
           {"seeds", seeds},
           {"version", kVersion},
           {"outputs", outputs}};
    write_json(out / "manifest.json", m);
  }
};

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_config(json::object()) : load_config(path);
}

Image load_reference(const fs::path& p) { return read_image(p); }

void save_image(Run& run, const std::string& name, const Image& img) {
  write_image(run.out / (name + ".bin"), img);
  write_png(run.out / (name + ".png"), img, run.window[0], run.window[1]);
  run.add(name + ".bin");
  run.add(name + ".png");
}

void check_geometry(const Geometry& g, const Image& img) {
  if (img.rows != g.image_rows || img.cols != g.image_cols) throw DimensionError("image does not match the measurement geometry");
}

int cmd_simulate(Run& run, const std::string& cfg_path, const std::string& phantom_path) {
  const ExperimentConfig cfg = config_or_default(cfg_path);
  run.config = cfg.source;
  Image ref;
  if (!phantom_path.empty()) {
    ref = read_image(phantom_path);
    check_geometry(cfg.geometry, ref);
  } else if (cfg.phantom.kind == "random") {
    ref = random_phantom(cfg.geometry.image_rows, cfg.geometry.image_cols, cfg.phantom.seed, cfg.mu_water);
  } else {
    ref = shepp_logan(cfg.geometry.image_rows, cfg.geometry.image_cols, cfg.mu_water);
  }
  const MeasurementSet meas = simulate_measurements(ref, cfg.geometry, cfg.protocol);
  save_image(run, "reference", ref);
  write_measurements(run.out / "measurement", meas, cfg.geometry);
  for (const char* f : {"counts.bin", "postlog.bin", "weights.bin", "measurement.json"}) run.add(std::string("measurement/") + f);
  run.seeds = {{"protocol", cfg.protocol.seed}, {"phantom", cfg.phantom.seed}};
  return 0;
}

int cmd_fbp(Run& run, const std::string& meas_dir, const std::string& window) {
  Geometry geom;
  const MeasurementSet meas = read_measurements(meas_dir, &geom);
  const FbpResult r = fbp_reconstruct(meas.post_log, geom, fbp_window_from_string(window));
  save_image(run, "recon", r.image);
  if (r.few_views) std::cerr << "warning: fewer than 8 views, FBP quality not guaranteed\n";
  run.config = {{"filter", window}};
  return 0;
}

int cmd_learn(Run& run, const std::string& cfg_path, const std::vector<std::string>& images) {
  const ExperimentConfig cfg = config_or_default(cfg_path);
  run.config = cfg.source;
  std::vector<Image> imgs;
  for (const auto& p : images) imgs.push_back(read_image(p));
  const LearnResult r = learn_union(training_patches(imgs, cfg.learn.patch), cfg.learn);
  write_union(run.out / "transforms.bin", r.transforms);
  run.add("transforms.bin");
  std::ostringstream csv;
  csv.precision(17);
  csv << "iter,objective\n";
  for (std::size_t i = 0; i < r.objective.size(); ++i) csv << i << ',' << r.objective[i] << '\n';
  std::ofstream(run.out / "objective.csv") << csv.str();
  run.add("objective.csv");
  run.seeds = {{"learn", cfg.learn.seed}};
  return 0;
}

int cmd_reconstruct(Run& run, const std::string& method, const std::string& cfg_path, const std::string& meas_dir,
                    const std::string& init_path, const std::string& transforms_path, const std::string& ref_path) {
  const ExperimentConfig cfg = config_or_default(cfg_path);
  run.config = cfg.source;
  Geometry geom;
  const MeasurementSet meas = read_measurements(meas_dir, &geom);
  const SystemMatrix A = SystemMatrix::from_geometry(geom);
  Image init = init_path.empty() ? fbp_reconstruct(meas.post_log, geom, cfg.window).image : read_image(init_path);
  check_geometry(geom, init);
  init.mu_water = cfg.mu_water;
  std::unique_ptr<Image> ref;
  if (!ref_path.empty()) {
    ref = std::make_unique<Image>(load_reference(ref_path));
    check_geometry(geom, *ref);
  }
  SolveLog log;
  Image result;
  if (method == "pwls-ep") {
    Image x0 = init;
    for (auto& v : x0.values) v = std::clamp(v, 0.0, cfg.ep.oslalm.x_max);
    result = pwls_ep_reconstruct(A, meas, cfg.ep.ep, cfg.ep.oslalm, x0, ref.get(), &log);
  } else {
    if (transforms_path.empty()) throw ConfigError("--transforms is required for " + method);
    UltraParams p = cfg.ultra.ultra;
    p.transforms = read_union(transforms_path);
    if (p.transforms.patch_side != p.patch.side) throw ConfigError("transform patch side differs from ultra.patch_side");
    Image x0 = init;
    for (auto& v : x0.values) v = std::clamp(v, 0.0, p.inner.x_max);
    UltraResult r = method == "spultra" ? spultra_reconstruct(A, meas, p, x0, ref.get(), &log)
                                        : pwls_ultra_reconstruct(A, meas, p, x0, ref.get(), &log);
    write_assignment(run.out / "codes.bin", r.codes);
    run.add("codes.bin");
    if (r.diverged) {
      save_image(run, "recon", r.image);
      throw NumericalError(r.error);
    }
    result = std::move(r.image);
  }
  save_image(run, "recon", result);
  log.write_csv(run.out / "log.csv");
  return 0;
}

std::vector<std::pair<MeasurementSet, Image>> load_pairs(const std::vector<std::string>& dirs, Geometry& geom) {
  std::vector<std::pair<MeasurementSet, Image>> out;
  bool first = true;
  for (const auto& d : dirs) {
    Geometry g;
    MeasurementSet m = read_measurements(fs::path(d) / "measurement", &g);
    Image ref = read_image(fs::path(d) / "reference.bin");
    if (first) {
      geom = g;
      first = false;
    } else if (geometry_to_json(g) != geometry_to_json(geom)) {
      throw DimensionError("training pairs use different geometries");
    }
    check_geometry(g, ref);
    out.emplace_back(std::move(m), std::move(ref));
  }
  return out;
}

IterConfig layer_config(const ExperimentConfig& cfg, const std::string& transforms_path) {
  IterConfig it = super_layer_config(cfg);
  if (it.module == IterModule::pwls_ultra || it.module == IterModule::spultra) {
    if (transforms_path.empty()) throw ConfigError("--transforms is required for ULTRA-based super layers");
    it.ultra.transforms = read_union(transforms_path);
  }
  return it;
}

int cmd_train_super(Run& run, const std::string& cfg_path, const std::vector<std::string>& data,
                    const std::string& transforms_path) {
  const ExperimentConfig cfg = config_or_default(cfg_path);
  run.config = cfg.source;
  Geometry geom;
  auto pairs = load_pairs(data, geom);
  std::vector<MeasurementSet> meas;
  std::vector<Image> refs;
  for (auto& [m, r] : pairs) {
    meas.push_back(std::move(m));
    refs.push_back(std::move(r));
  }
  const SystemMatrix A = SystemMatrix::from_geometry(geom);
  SuperTrainConfig tc;
  tc.n_layers = cfg.super_layers;
  tc.sup = cfg.train;
  tc.iter = layer_config(cfg, transforms_path);
  tc.seed = cfg.super_seed;
  tc.window = cfg.window;
  const SuperTrainResult r = train_super(A, geom, meas, refs, tc);
  if (!r.model.layers.empty()) r.model.save(run.out);
  std::ofstream csv(run.out / "training.csv");
  csv.precision(17);
  csv << "layer,mean_rmse_hu\n";
  for (std::size_t l = 0; l < r.mean_rmse.size(); ++l) csv << l << ',' << r.mean_rmse[l] << '\n';
  run.add("training.csv");
  run.add("manifest.json");
  for (std::size_t l = 0; l < r.model.layers.size(); ++l) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "layer_%02zu_weights.bin", l + 1);
    run.add(buf);
  }
  run.seeds = {{"super", cfg.super_seed}};
  if (r.failed) throw NumericalError(r.error);
  return 0;
}

int cmd_apply_super(Run& run, const std::string& model_dir, const std::string& meas_dir, bool snapshots,
                    const std::string& window) {
  const SuperModel model = SuperModel::load(model_dir);
  Geometry geom;
  const MeasurementSet meas = read_measurements(meas_dir, &geom);
  const SystemMatrix A = SystemMatrix::from_geometry(geom);
  const SuperApplyResult r = apply_super(model, A, geom, meas, fbp_window_from_string(window));
  save_image(run, "recon", r.image);
  if (snapshots) {
    for (std::size_t l = 0; l < r.snapshots.size(); ++l) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "layer_%02zu", l + 1);
      save_image(run, buf, r.snapshots[l]);
    }
  }
  run.config = {{"model", model_dir}, {"filter", window}};
  run.seeds = {{"model", model.seed}};
  return 0;
}

int cmd_eval(Run& run, const std::vector<std::string>& est, const std::vector<std::string>& ref, std::ostream& out) {
  if (ref.size() != 1 && ref.size() != est.size()) throw ConfigError("eval: give one reference or one per estimate");
  EvalReport report;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Image e = read_image(est[i]);
    const Image r = read_image(ref.size() == 1 ? ref[0] : ref[i]);
    report.entries.push_back(evaluate(est[i], e, r));
  }
  const json j = report.to_json();
  out << j.dump(2) << '\n';
  write_json(run.out / "report.json", j);
  std::ofstream(run.out / "report.csv") << report.to_csv();
  run.add("report.json");
  run.add("report.csv");
  return 0;
}

int cmd_export_clusters(Run& run, const std::string& codes_path, const std::string& like, int side, int stride) {
  const CodeAssignment a = read_assignment(codes_path);
  const Image img = read_image(like);
  PatchConfig cfg{side, stride};
  if (cfg.dim() != a.codes.rows()) throw ConfigError("export-clusters: patch side does not match the code length");
  const std::vector<int> map = cluster_map(a, cfg, img.rows, img.cols);
  Image labels(img.rows, img.cols, img.mu_water);
  for (std::size_t i = 0; i < map.size(); ++i) labels.values[i] = map[i];
  write_image(run.out / "labels.bin", labels);
  run.add("labels.bin");
  for (int k = 0; k < a.K; ++k) {
    Image mask(img.rows, img.cols, img.mu_water);
    std::vector<std::uint8_t> px(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      mask.values[i] = map[i] == k ? 1.0 : 0.0;
      // Show the image inside the class and black elsewhere.
      const double d = to_display(img.values[i], img.mu_water);
      const double t = std::clamp((d - run.window[0]) / (run.window[1] - run.window[0]), 0.0, 1.0);
      px[i] = map[i] == k ? static_cast<std::uint8_t>(std::lround(255.0 * t)) : 0;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "cluster_%d", k + 1);
    write_image(run.out / (std::string(buf) + ".bin"), mask);
    write_png_gray(run.out / (std::string(buf) + ".png"), img.rows, img.cols, px);
    run.add(std::string(buf) + ".bin");
    run.add(std::string(buf) + ".png");
  }
  run.config = {{"patch_side", side}, {"stride", stride}};
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SUPER CT reconstruction toolkit", "superct"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string out_dir, cfg_path, phantom, meas_dir, filter = "ram-lak", method, init_path, transforms, ref_path, model_dir,
                                                     codes, like;
  std::vector<std::string> images, data, est, refs;
  std::vector<double> png_window{800.0, 1200.0};
  bool snapshots = false;
  int side = 8, stride = 1;

  auto* sim = app.add_subcommand("simulate", "Phantom to low-dose measurements");
  sim->add_option("--config", cfg_path, "experiment config (JSON)");
  sim->add_option("--phantom", phantom, "reference image instead of the configured phantom");
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* fbp = app.add_subcommand("fbp", "Filtered backprojection of a measurement set");
  fbp->add_option("--meas", meas_dir, "measurement directory")->required();
  fbp->add_option("--filter", filter, "ram-lak or hann");
  fbp->add_option("--out", out_dir)->required();

  auto* learn = app.add_subcommand("learn-ultra", "Learn a union of sparsifying transforms");
  learn->add_option("--config", cfg_path);
  learn->add_option("--images", images, "training images")->required();
  learn->add_option("--out", out_dir)->required();

  auto* rec = app.add_subcommand("reconstruct", "Model-based reconstruction");
  rec->add_option("--method", method)->required()->check(CLI::IsMember({"pwls-ep", "pwls-ultra", "spultra"}));
  rec->add_option("--config", cfg_path);
  rec->add_option("--meas", meas_dir)->required();
  rec->add_option("--init", init_path, "initial image (default: FBP)");
  rec->add_option("--transforms", transforms, "transform union for the ULTRA methods");
  rec->add_option("--reference", ref_path, "reference image for RMSE logging");
  rec->add_option("--out", out_dir)->required();

  auto* train = app.add_subcommand("train-super", "Greedy layer-wise SUPER training");
  train->add_option("--config", cfg_path);
  train->add_option("--data", data, "directories written by simulate")->required();
  train->add_option("--transforms", transforms);
  train->add_option("--out", out_dir)->required();

  auto* apply = app.add_subcommand("apply-super", "Run a trained SUPER model");
  apply->add_option("--model", model_dir)->required();
  apply->add_option("--meas", meas_dir)->required();
  apply->add_option("--filter", filter, "FBP filter for the initial image");
  apply->add_flag("--snapshots", snapshots, "write every layer's output");
  apply->add_option("--out", out_dir)->required();

  auto* ev = app.add_subcommand("eval", "RMSE / PSNR / SSIM report");
  ev->add_option("--est", est)->required();
  ev->add_option("--ref", refs)->required();
  ev->add_option("--out", out_dir)->required();

  auto* ex = app.add_subcommand("export-clusters", "Pixel-level majority-vote cluster maps");
  ex->add_option("--codes", codes)->required();
  ex->add_option("--like", like, "image giving the grid (and the displayed intensities)")->required();
  ex->add_option("--patch-side", side);
  ex->add_option("--stride", stride);
  ex->add_option("--out", out_dir)->required();

  for (auto* sub : {sim, fbp, rec, apply, ex})
    sub->add_option("--window", png_window, "PNG display window lo hi (water = 1000)")->expected(2);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  if (!(png_window[0] < png_window[1])) {
    err << "error: --window needs lo < hi\n";
    return 2;
  }
  Run run;
  run.args = args;
  run.out = out_dir;
  run.command = app.get_subcommands().front()->get_name();
  run.window = png_window;
  try {
    fs::create_directories(run.out);
    int rc = 0;
    if (*sim) rc = cmd_simulate(run, cfg_path, phantom);
    else if (*fbp) rc = cmd_fbp(run, meas_dir, filter);
    else if (*learn) rc = cmd_learn(run, cfg_path, images);
    else if (*rec) rc = cmd_reconstruct(run, method, cfg_path, meas_dir, init_path, transforms, ref_path);
    else if (*train) rc = cmd_train_super(run, cfg_path, data, transforms);
    else if (*apply) rc = cmd_apply_super(run, model_dir, meas_dir, snapshots, filter);
    else if (*ev) rc = cmd_eval(run, est, refs, out);
    else if (*ex) rc = cmd_export_clusters(run, codes, like, side, stride);
    if (run.command == "train-super") {
      // The model directory already has its own manifest.json.
      json m{{"command", run.command}, {"argv", run.args}, {"config", run.config}, {"config_hash", config_hash(run.config)},
             {"seeds", run.seeds}, {"version", kVersion}, {"outputs", run.outputs}};
      write_json(run.out / "run.json", m);
    } else {
      run.write_manifest();
    }
    return rc;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace superct
