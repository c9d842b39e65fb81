#include "superct/super_model.hpp"

#include <algorithm>
#include <cstdio>

#include "superct/error.hpp"
#include "superct/io.hpp"
#include "superct/metrics.hpp"
#include "superct/spultra.hpp"
#include "superct/transform_union.hpp"

namespace superct {

namespace {

std::string layer_name(int l, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "layer_%02d%s", l + 1, suffix);
  return buf;
}

Image fbp_init(const Geometry& geom, const MeasurementSet& m, FbpWindow window) {
  Image x = fbp_reconstruct(m.post_log, geom, window).image;
  return x;
}

}  // namespace

const char* to_string(IterModule m) {
  switch (m) {
    case IterModule::none: return "none";
    case IterModule::pwls_ep: return "pwls-ep";
    case IterModule::pwls_ultra: return "pwls-ultra";
    case IterModule::spultra: return "spultra";
  }
  return "none";
}

IterModule iter_module_from_string(const std::string& s) {
  if (s == "none") return IterModule::none;
  if (s == "pwls-ep") return IterModule::pwls_ep;
  if (s == "pwls-ultra") return IterModule::pwls_ultra;
  if (s == "spultra") return IterModule::spultra;
  throw ConfigError("unknown iterative module '" + s + "' (expected none, pwls-ep, pwls-ultra or spultra)");
}

nlohmann::json iter_config_to_json(const IterConfig& c) {
  nlohmann::json j{{"module", to_string(c.module)}};
  if (c.module == IterModule::pwls_ep) {
    j["beta"] = c.ep.beta;
    j["delta_hu"] = c.ep.delta_hu;
    j["uniform_kappa"] = c.ep.uniform_kappa;
    j["alpha"] = c.oslalm.alpha;
    j["subsets"] = c.oslalm.M;
    j["iterations"] = c.oslalm.P;
    j["x_max"] = c.oslalm.x_max;
  } else if (c.module != IterModule::none) {
    j["beta"] = c.ultra.beta;
    j["gamma"] = c.ultra.gamma;
    j["outer_iters"] = c.ultra.outer_iters;
    j["inner_iters"] = c.ultra.inner.P;
    j["subsets"] = c.ultra.inner.M;
    j["alpha"] = c.ultra.inner.alpha;
    j["x_max"] = c.ultra.inner.x_max;
    j["patch_side"] = c.ultra.patch.side;
    j["stride"] = c.ultra.patch.stride;
    j["transforms"] = "transforms.bin";
  }
  return j;
}

IterConfig iter_config_from_json(const nlohmann::json& j, const std::filesystem::path& dir) {
  IterConfig c;
  try {
    c.module = iter_module_from_string(j.at("module").get<std::string>());
    if (c.module == IterModule::pwls_ep) {
      c.ep.beta = j.at("beta").get<double>();
      c.ep.delta_hu = j.at("delta_hu").get<double>();
      c.ep.uniform_kappa = j.at("uniform_kappa").get<bool>();
      c.oslalm.alpha = j.at("alpha").get<double>();
      c.oslalm.M = j.at("subsets").get<int>();
      c.oslalm.P = j.at("iterations").get<int>();
      c.oslalm.x_max = j.at("x_max").get<double>();
    } else if (c.module != IterModule::none) {
      c.ultra.beta = j.at("beta").get<double>();
      c.ultra.gamma = j.at("gamma").get<double>();
      c.ultra.outer_iters = j.at("outer_iters").get<int>();
      c.ultra.inner.P = j.at("inner_iters").get<int>();
      c.ultra.inner.M = j.at("subsets").get<int>();
      c.ultra.inner.alpha = j.at("alpha").get<double>();
      c.ultra.inner.x_max = j.at("x_max").get<double>();
      c.ultra.patch.side = j.at("patch_side").get<int>();
      c.ultra.patch.stride = j.at("stride").get<int>();
      c.ultra.transforms = read_union(dir / j.at("transforms").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("iterative module config: ") + e.what());
  }
  return c;
}

Image run_iterative(const IterConfig& cfg, const SystemMatrix& A, const MeasurementSet& meas, const Image& init) {
  switch (cfg.module) {
    case IterModule::none: return init;
    case IterModule::pwls_ep: {
      Image x0 = init;
      for (auto& v : x0.values) v = std::clamp(v, 0.0, cfg.oslalm.x_max);
      return pwls_ep_reconstruct(A, meas, cfg.ep, cfg.oslalm, x0);
    }
    case IterModule::pwls_ultra:
    case IterModule::spultra: {
      Image x0 = init;
      for (auto& v : x0.values) v = std::clamp(v, 0.0, cfg.ultra.inner.x_max);
      UltraResult r = cfg.module == IterModule::spultra ? spultra_reconstruct(A, meas, cfg.ultra, x0)
                                                         : pwls_ultra_reconstruct(A, meas, cfg.ultra, x0);
      if (r.diverged) throw NumericalError(r.error);
      return std::move(r.image);
    }
  }
  return init;
}

void SuperModel::save(const std::filesystem::path& dir) const {
  if (layers.empty()) throw ConfigError("super model has no layers");
  std::filesystem::create_directories(dir);
  nlohmann::json manifest{{"format", "superct-model"}, {"version", kFormatVersion}, {"n_layers", layers.size()}, {"seed", seed}};
  nlohmann::json arr = nlohmann::json::array();
  bool wrote_union = false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string w = layer_name(static_cast<int>(l), "_weights.bin");
    const std::string c = layer_name(static_cast<int>(l), "_iter.json");
    layer.net.save(dir / w);
    write_json(dir / c, iter_config_to_json(layer.iter));
    if (!wrote_union && (layer.iter.module == IterModule::pwls_ultra || layer.iter.module == IterModule::spultra)) {
      write_union(dir / "transforms.bin", layer.iter.ultra.transforms);
      wrote_union = true;
    }
    arr.push_back({{"weights", w}, {"iterative", c}, {"module", to_string(layer.iter.module)}});
  }
  manifest["layers"] = arr;
  write_json(dir / "manifest.json", manifest);
}

SuperModel SuperModel::load(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  SuperModel m;
  try {
    if (manifest.at("format").get<std::string>() != "superct-model") throw FormatError("'" + dir.string() + "' is not a model directory");
    m.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& e : manifest.at("layers")) {
      SuperLayer layer;
      layer.net = ConvDenoiser::load(dir / e.at("weights").get<std::string>());
      layer.iter = iter_config_from_json(read_json(dir / e.at("iterative").get<std::string>()), dir);
      m.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + (dir / "manifest.json").string() + "': " + e.what());
  }
  if (m.layers.empty()) throw FormatError("'" + dir.string() + "': model has no layers");
  return m;
}

SuperTrainResult train_super_from(const SystemMatrix& A, const std::vector<MeasurementSet>& meas,
                                  const std::vector<Image>& init, const std::vector<Image>& refs,
                                  const SuperTrainConfig& cfg) {
  if (cfg.n_layers < 1) throw ConfigError("train-super: n_layers must be >= 1");
  if (meas.size() != refs.size() || init.size() != refs.size() || refs.empty()) {
    throw ConfigError("train-super: need matching, nonempty measurement/reference lists");
  }
  SuperTrainResult res;
  res.model.seed = cfg.seed;
  std::vector<Image> x = init;
  auto mean_rmse = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += rmse(x[i], refs[i]);
    return s / static_cast<double>(x.size());
  };
  res.mean_rmse.push_back(mean_rmse());
  for (int l = 0; l < cfg.n_layers; ++l) {
    SuperLayer layer;
    layer.iter = cfg.iter;
    TrainConfig tc = cfg.sup;
    tc.seed = cfg.seed * 1000003ull + static_cast<std::uint64_t>(l) + 1;
    layer.net.init_random(tc.seed, tc.init_std);
    std::vector<std::pair<Image, Image>> pairs;
    for (std::size_t i = 0; i < x.size(); ++i) pairs.emplace_back(x[i], refs[i]);
    try {
      denoiser_train(layer.net, pairs, tc);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = run_iterative(layer.iter, A, meas[i], layer.net.apply(x[i]));
    } catch (const NumericalError& e) {
      res.failed = true;
      res.error = "train-super layer " + std::to_string(l + 1) + ": " + e.what();
      return res;
    }
    res.model.layers.push_back(std::move(layer));
    res.mean_rmse.push_back(mean_rmse());
  }
  return res;
}

SuperTrainResult train_super(const SystemMatrix& A, const Geometry& geom, const std::vector<MeasurementSet>& meas,
                             const std::vector<Image>& refs, const SuperTrainConfig& cfg) {
  std::vector<Image> init;
  for (const auto& m : meas) init.push_back(fbp_init(geom, m, cfg.window));
  return train_super_from(A, meas, init, refs, cfg);
}

SuperApplyResult apply_super(const SuperModel& model, const SystemMatrix& A, const MeasurementSet& meas, const Image& init) {
  if (init.size() != static_cast<std::size_t>(A.cols())) throw DimensionError("apply-super: image does not match the system");
  SuperApplyResult r;
  Image x = init;
  for (const auto& layer : model.layers) {
    x = run_iterative(layer.iter, A, meas, layer.net.apply(x));
    r.snapshots.push_back(x);
  }
  r.image = std::move(x);
  return r;
}

SuperApplyResult apply_super(const SuperModel& model, const SystemMatrix& A, const Geometry& geom,
                             const MeasurementSet& meas, FbpWindow window) {
  if (static_cast<std::size_t>(A.rows()) != geom.n_rays() || static_cast<std::size_t>(A.cols()) != geom.n_pixels()) {
    throw DimensionError("apply-super: geometry does not match the system");
  }
  return apply_super(model, A, meas, fbp_init(geom, meas, window));
}

}  // namespace superct
