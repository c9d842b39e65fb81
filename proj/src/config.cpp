#include "superct/config.hpp"

#include <set>

#include "superct/error.hpp"
#include "superct/io.hpp"

namespace superct {

namespace {

// Reads keys from one JSON object and remembers which ones were consumed.
class Section {
public:
  Section(const nlohmann::json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_null() && !j.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    if (j.is_object()) j_ = j;
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  nlohmann::json child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : nlohmann::json();
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + (name_.empty() ? "" : name_ + ".") + item.key() + "'");
    }
  }

private:
  std::string name_;
  nlohmann::json j_ = nlohmann::json::object();
  std::set<std::string> seen_;
};

Geometry parse_geometry(const nlohmann::json& j) {
  Section s(j, "geometry");
  const Geometry d = Geometry::desk_default();
  const auto kind = geometry_kind_from_string(s.get<std::string>("kind", to_string(d.kind)));
  const int rows = s.get<int>("image_rows", d.image_rows);
  const int cols = s.get<int>("image_cols", d.image_cols);
  const double ps = s.get<double>("pixel_size", d.pixel_size);
  const int views = s.get<int>("n_views", d.n_views);
  const int bins = s.get<int>("n_bins", d.n_bins);
  const double spacing = s.get<double>("bin_spacing", 0.0);
  const double sti = s.get<double>("source_to_iso", d.source_to_iso);
  const double std_ = s.get<double>("source_to_detector", d.source_to_detector);
  s.finish();
  if (rows < 1 || cols < 1 || views < 1 || bins < 1 || !(ps > 0.0)) throw ConfigError("config: geometry counts and pixel_size must be positive");
  return kind == GeometryKind::parallel ? Geometry::parallel(rows, cols, ps, views, bins, spacing)
                                        : Geometry::fan_arc(rows, cols, ps, views, bins, sti, std_, spacing);
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  c.source = j;
  Section top(j, "");
  c.mu_water = top.get<double>("mu_water", kDefaultMuWater);
  if (!(c.mu_water > 0.0)) throw ConfigError("config: mu_water must be > 0");
  c.geometry = parse_geometry(top.child("geometry"));

  {
    Section s(top.child("protocol"), "protocol");
    c.protocol.I0 = s.get<double>("I0", c.protocol.I0);
    c.protocol.sigma = s.get<double>("sigma", c.protocol.sigma);
    c.protocol.seed = s.get<std::uint64_t>("seed", c.protocol.seed);
    s.finish();
    c.protocol.validate();
  }
  {
    Section s(top.child("phantom"), "phantom");
    c.phantom.kind = s.get<std::string>("kind", c.phantom.kind);
    c.phantom.seed = s.get<std::uint64_t>("seed", c.phantom.seed);
    s.finish();
    if (c.phantom.kind != "shepp-logan" && c.phantom.kind != "random") throw ConfigError("config: phantom.kind must be shepp-logan or random");
  }
  {
    Section s(top.child("fbp"), "fbp");
    c.window = fbp_window_from_string(s.get<std::string>("window", "ram-lak"));
    s.finish();
  }
  {
    Section s(top.child("pwls_ep"), "pwls_ep");
    c.ep.module = IterModule::pwls_ep;
    c.ep.ep.beta = s.get<double>("beta", 1e3);
    c.ep.ep.delta_hu = s.get<double>("delta_hu", 20.0);
    c.ep.ep.uniform_kappa = s.get<bool>("uniform_kappa", false);
    c.ep.oslalm.alpha = s.get<double>("alpha", 1.999);
    c.ep.oslalm.M = s.get<int>("subsets", 4);
    c.ep.oslalm.P = s.get<int>("iterations", 100);
    c.ep.oslalm.x_max = from_hu(s.get<double>("x_max_hu", 3000.0), c.mu_water);
    s.finish();
    if (!(c.ep.ep.beta >= 0.0) || !(c.ep.ep.delta_hu > 0.0)) throw ConfigError("config: pwls_ep needs beta >= 0 and delta_hu > 0");
    c.ep.oslalm.validate(c.geometry.n_views);
  }
  {
    Section s(top.child("ultra"), "ultra");
    c.ultra.module = IterModule::pwls_ultra;
    auto& u = c.ultra.ultra;
    u.beta = s.get<double>("beta", 3e4);
    u.gamma = s.get<double>("gamma_hu", 100.0) * c.mu_water / 1000.0;
    u.outer_iters = s.get<int>("outer_iters", 20);
    u.inner.P = s.get<int>("inner_iters", 5);
    u.inner.M = s.get<int>("subsets", 4);
    u.inner.alpha = s.get<double>("alpha", 1.999);
    u.inner.x_max = from_hu(s.get<double>("x_max_hu", 3000.0), c.mu_water);
    u.patch.side = s.get<int>("patch_side", 8);
    u.patch.stride = s.get<int>("stride", 1);
    s.finish();
    if (!(u.beta >= 0.0) || !(u.gamma > 0.0) || u.outer_iters < 0) throw ConfigError("config: ultra needs beta >= 0, gamma_hu > 0, outer_iters >= 0");
    u.inner.validate(c.geometry.n_views);
    u.patch.validate(c.geometry.image_rows, c.geometry.image_cols);
  }
  {
    Section s(top.child("learn"), "learn");
    c.learn.K = s.get<int>("K", 5);
    c.learn.eta = s.get<double>("eta", 0.0);
    c.learn.lambda0 = s.get<double>("lambda0", 31.0);
    c.learn.n_iters = s.get<int>("n_iters", 50);
    c.learn.seed = s.get<std::uint64_t>("seed", 0);
    c.learn.patch.side = s.get<int>("patch_side", 8);
    c.learn.patch.stride = s.get<int>("stride", 1);
    s.finish();
    if (c.learn.K < 1 || !(c.learn.lambda0 > 0.0) || c.learn.n_iters < 0) throw ConfigError("config: learn needs K >= 1, lambda0 > 0, n_iters >= 0");
  }
  {
    Section s(top.child("train"), "train");
    c.train.epochs = s.get<int>("epochs", c.train.epochs);
    c.train.lr_start = s.get<double>("lr_start", c.train.lr_start);
    c.train.lr_end = s.get<double>("lr_end", c.train.lr_end);
    c.train.momentum = s.get<double>("momentum", c.train.momentum);
    c.train.init_std = s.get<double>("init_std", c.train.init_std);
    c.train.crop = s.get<int>("crop", c.train.crop);
    c.train.crops_per_pair = s.get<int>("crops_per_pair", c.train.crops_per_pair);
    c.train.seed = s.get<std::uint64_t>("seed", c.train.seed);
    s.finish();
    c.train.validate();
  }
  {
    Section s(top.child("super"), "super");
    c.super_layers = s.get<int>("n_layers", 15);
    c.super_module = iter_module_from_string(s.get<std::string>("module", "pwls-ep"));
    c.super_seed = s.get<std::uint64_t>("seed", 0);
    c.super_beta = s.get<double>("beta", c.super_beta);
    c.super_iterations = s.get<int>("iterations", c.super_iterations);
    s.finish();
    if (c.super_layers < 1) throw ConfigError("config: super.n_layers must be >= 1");
    if (s.has("beta") && !(c.super_beta >= 0.0)) throw ConfigError("config: super.beta must be >= 0");
    if (c.super_iterations < 0) throw ConfigError("config: super.iterations must be >= 0");
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = read_json(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

IterConfig super_layer_config(const ExperimentConfig& c) {
  IterConfig it;
  switch (c.super_module) {
    case IterModule::none: break;
    case IterModule::pwls_ep:
      it = c.ep;
      it.oslalm.P = c.super_iterations;
      if (c.super_beta >= 0.0) it.ep.beta = c.super_beta;
      break;
    case IterModule::pwls_ultra:
    case IterModule::spultra:
      it = c.ultra;
      it.module = c.super_module;
      it.ultra.outer_iters = c.super_iterations;
      if (c.super_beta >= 0.0) it.ultra.beta = c.super_beta;
      break;
  }
  return it;
}

std::uint64_t config_hash(const nlohmann::json& j) { return fnv1a(j.dump()); }

}  // namespace superct
