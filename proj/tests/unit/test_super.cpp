#include <doctest.h>

#include <cmath>

#include "superct/denoiser.hpp"
#include "superct/error.hpp"
#include "superct/metrics.hpp"
#include "superct/super_model.hpp"
#include "test_util.hpp"

using namespace superct;

namespace {

double pairs_loss(const ConvDenoiser& net, const std::vector<std::pair<Image, Image>>& pairs) {
  double s = 0.0;
  for (const auto& [in, ref] : pairs) s += net.loss(in, ref);
  return s;
}

std::vector<std::pair<Image, Image>> toy_pairs(int n, int count, std::uint64_t seed) {
  std::vector<std::pair<Image, Image>> out;
  for (int i = 0; i < count; ++i) {
    const Image ref = random_phantom(n, n, seed + static_cast<std::uint64_t>(i));
    Image in = ref;
    const Eigen::VectorXd noise = testutil::random_vector(static_cast<Eigen::Index>(in.size()), seed + 100 + i, -1.0, 1.0);
    for (std::size_t k = 0; k < in.size(); ++k) in.values[k] += 0.1 * kDefaultMuWater * noise[static_cast<Eigen::Index>(k)];
    out.emplace_back(in, ref);
  }
  return out;
}

std::string read_bytes(const ConvDenoiser& net, const std::string& tag) {
  const auto p = testutil::scratch("net_" + tag) / "w.bin";
  net.save(p);
  return testutil::slurp(p);
}

}  // namespace

TEST_CASE("zero weights give the identity map") {
  ConvDenoiser net;
  const Image x = testutil::random_image(12, 9, 1, 0.0, 0.04);
  const Image y = net.apply(x);
  CHECK(y.values == x.values);
  CHECK(net.loss(x, x) == 0.0);
}

TEST_CASE("without rectifiers the map is affine") {
  ConvDenoiser net;
  net.relu = false;
  net.init_random(3, 0.2);
  for (int l = 0; l < ConvDenoiser::kLayers; ++l) {
    for (std::size_t i = net.bias_offset(l); i < (l + 1 < ConvDenoiser::kLayers ? net.weight_offset(l + 1) : net.params().size()); ++i)
      net.params()[i] = 0.01 * static_cast<double>(i % 7);
  }
  const Image x = testutil::random_image(10, 11, 2, 0.0, 0.04);
  Image zero(10, 11), ax = x;
  const double a = 2.7;
  for (auto& v : ax.values) v *= a;
  const Image f0 = net.apply(zero), fx = net.apply(x), fax = net.apply(ax);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lhs = fax.values[i] - f0.values[i], rhs = a * (fx.values[i] - f0.values[i]);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs) / kDefaultMuWater) * kDefaultMuWater);
  }
  net.relu = true;
  const Image fr = net.apply(ax);
  double diff = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) diff += std::abs(fr.values[i] - fax.values[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("output shape follows the input") {
  ConvDenoiser net;
  net.init_random(1, 0.07);
  const Image y = net.apply(Image(7, 13));
  CHECK(y.rows == 7);
  CHECK(y.cols == 13);
  CHECK_THROWS_AS(net.loss(Image(4, 4), Image(4, 5)), DimensionError);
}

TEST_CASE("backpropagation matches central differences") {
  const auto pairs = toy_pairs(16, 3, 10);
  ConvDenoiser net;
  net.init_random(4, 0.15);
  for (int l = 0; l < ConvDenoiser::kLayers; ++l) net.params()[net.bias_offset(l)] = 0.05;
  std::vector<double> grad(net.params().size(), 0.0), g;
  for (const auto& [in, ref] : pairs) {
    net.loss_and_gradient(in, ref, g);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }
  double gmax = 0.0;
  for (double v : grad) gmax = std::max(gmax, std::abs(v));
  int bad = 0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double p0 = net.params()[i], step = 1e-6;
    net.params()[i] = p0 + step;
    const double lp = pairs_loss(net, pairs);
    net.params()[i] = p0 - step;
    const double lm = pairs_loss(net, pairs);
    net.params()[i] = p0;
    const double fd = (lp - lm) / (2 * step);
    if (std::abs(fd - grad[i]) > 1e-4 * std::max(std::abs(grad[i]), 1e-3 * gmax)) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("training") {
  const auto pairs = toy_pairs(24, 6, 20);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.crop = 16;
  cfg.crops_per_pair = 8;
  cfg.seed = 9;

  SUBCASE("loss decreases and runs are bit-identical") {
    ConvDenoiser a, b;
    a.init_random(cfg.seed, cfg.init_std);
    b.init_random(cfg.seed, cfg.init_std);
    const TrainResult ra = denoiser_train(a, pairs, cfg);
    const TrainResult rb = denoiser_train(b, pairs, cfg);
    REQUIRE(ra.loss.size() == 7);
    CHECK(ra.loss.back() < 0.7 * ra.loss.front());
    CHECK(ra.loss == rb.loss);
    CHECK(a.params() == b.params());
    for (double p : a.params()) CHECK(static_cast<double>(static_cast<float>(p)) == p);
  }
  SUBCASE("clean inputs leave a zero network at zero") {
    std::vector<std::pair<Image, Image>> clean;
    for (const auto& [in, ref] : pairs) clean.emplace_back(ref, ref);
    ConvDenoiser net;
    const TrainResult r = denoiser_train(net, clean, cfg);
    CHECK(r.loss.front() == 0.0);
    for (double p : net.params()) CHECK(p == 0.0);
  }
  SUBCASE("a huge learning rate is reported") {
    TrainConfig bad = cfg;
    bad.lr_start = bad.lr_end = 1e8;
    ConvDenoiser net;
    net.init_random(1, cfg.init_std);
    CHECK_THROWS_AS(denoiser_train(net, pairs, bad), NumericalError);
  }
  SUBCASE("config errors") {
    ConvDenoiser net;
    TrainConfig c = cfg;
    c.epochs = 0;
    CHECK_THROWS_AS(denoiser_train(net, pairs, c), ConfigError);
    c = cfg;
    c.momentum = 1.0;
    CHECK_THROWS_AS(denoiser_train(net, pairs, c), ConfigError);
    CHECK_THROWS_AS(denoiser_train(net, {}, cfg), ConfigError);
  }
}

TEST_CASE("denoiser weights round trip") {
  ConvDenoiser net;
  net.init_random(8, 0.1);
  net.round_to_float();
  net.relu = false;
  const auto p = testutil::scratch("net_rt") / "w.bin";
  net.save(p);
  const ConvDenoiser back = ConvDenoiser::load(p);
  CHECK(back.params() == net.params());
  CHECK_FALSE(back.relu);
  std::ofstream(p, std::ios::binary) << "garbage";
  CHECK_THROWS_AS(ConvDenoiser::load(p), FormatError);
}

TEST_CASE("iterative module names") {
  for (auto m : {IterModule::none, IterModule::pwls_ep, IterModule::pwls_ultra, IterModule::spultra})
    CHECK(iter_module_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(iter_module_from_string("fista"), ConfigError);
}

TEST_CASE("super framework") {
  const testutil::Scene s = testutil::make_scene(24, 1e4, 50);
  std::vector<MeasurementSet> meas;
  std::vector<Image> refs;
  for (int i = 0; i < 3; ++i) {
    refs.push_back(random_phantom(24, 24, 60 + static_cast<std::uint64_t>(i)));
    meas.push_back(simulate_measurements(refs.back(), s.geom, {1e4, 5.0, 70 + static_cast<std::uint64_t>(i)}));
  }
  SuperTrainConfig cfg;
  cfg.n_layers = 2;
  cfg.seed = 3;
  cfg.sup.epochs = 2;
  cfg.sup.crop = 16;
  cfg.sup.crops_per_pair = 2;
  cfg.iter.module = IterModule::pwls_ep;
  cfg.iter.ep.beta = 500.0;
  cfg.iter.oslalm.M = 4;
  cfg.iter.oslalm.P = 2;

  SUBCASE("untrained identity chain returns the input") {
    SuperModel m;
    m.layers.resize(3);
    const SuperApplyResult r = apply_super(m, s.A, s.meas, s.fbp);
    CHECK(r.image.values == s.fbp.values);
    CHECK(r.snapshots.size() == 3);
  }

  SUBCASE("greedy training leaves earlier layers untouched") {
    SuperTrainConfig one = cfg;
    one.n_layers = 1;
    const SuperTrainResult r1 = train_super(s.A, s.geom, meas, refs, one);
    const SuperTrainResult r2 = train_super(s.A, s.geom, meas, refs, cfg);
    REQUIRE(r2.model.layers.size() == 2);
    CHECK(read_bytes(r1.model.layers[0].net, "a") == read_bytes(r2.model.layers[0].net, "b"));
    CHECK(r2.mean_rmse.size() == 3);
    CHECK(r2.mean_rmse[0] == r1.mean_rmse[0]);
    CHECK(r2.mean_rmse[1] == r1.mean_rmse[1]);
    CHECK(r2.model.layers[0].net.params() != r2.model.layers[1].net.params());
  }

  SUBCASE("reproducible and consistent with apply") {
    const SuperTrainResult a = train_super(s.A, s.geom, meas, refs, cfg);
    const SuperTrainResult b = train_super(s.A, s.geom, meas, refs, cfg);
    CHECK(a.mean_rmse == b.mean_rmse);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l) CHECK(a.model.layers[l].net.params() == b.model.layers[l].net.params());
    double mean = 0.0;
    for (std::size_t i = 0; i < meas.size(); ++i) {
      const SuperApplyResult r = apply_super(a.model, s.A, s.geom, meas[i]);
      CHECK(r.snapshots.size() == 2);
      CHECK(r.snapshots.back().values == r.image.values);
      mean += rmse(r.image, refs[i]);
    }
    CHECK(mean / 3.0 == doctest::Approx(a.mean_rmse.back()).epsilon(1e-12));
  }

  SUBCASE("model directory round trip") {
    const SuperTrainResult a = train_super(s.A, s.geom, meas, refs, cfg);
    const auto dir = testutil::scratch("super_rt");
    a.model.save(dir);
    const SuperModel back = SuperModel::load(dir);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.seed == 3);
    CHECK(back.layers[1].iter.module == IterModule::pwls_ep);
    CHECK(back.layers[1].iter.ep.beta == 500.0);
    const SuperApplyResult r1 = apply_super(a.model, s.A, s.geom, meas[0]);
    const SuperApplyResult r2 = apply_super(back, s.A, s.geom, meas[0]);
    CHECK(r1.image.values == r2.image.values);
    CHECK_THROWS_AS(SuperModel::load(testutil::scratch("super_empty")), FormatError);
  }

  SUBCASE("one layer with no iterative module is a trained denoiser") {
    SuperTrainConfig d = cfg;
    d.n_layers = 1;
    d.iter.module = IterModule::none;
    const SuperTrainResult r = train_super(s.A, s.geom, meas, refs, d);
    ConvDenoiser net;
    TrainConfig tc = d.sup;
    tc.seed = d.seed * 1000003ull + 1;
    net.init_random(tc.seed, tc.init_std);
    std::vector<std::pair<Image, Image>> pairs;
    for (std::size_t i = 0; i < meas.size(); ++i) pairs.emplace_back(fbp_reconstruct(meas[i].post_log, s.geom).image, refs[i]);
    denoiser_train(net, pairs, tc);
    CHECK(net.params() == r.model.layers[0].net.params());
  }

  SUBCASE("zero-beta EP layer is a weighted least-squares refinement") {
    SuperModel m;
    m.layers.resize(1);
    m.layers[0].iter.module = IterModule::pwls_ep;
    m.layers[0].iter.ep.beta = 0.0;
    m.layers[0].iter.oslalm.M = 4;
    m.layers[0].iter.oslalm.P = 3;
    const SuperApplyResult r = apply_super(m, s.A, s.meas, s.fbp);
    const Image direct = pwls_ep_reconstruct(s.A, s.meas, m.layers[0].iter.ep, m.layers[0].iter.oslalm, s.fbp);
    CHECK(r.image.values == direct.values);
  }

  SUBCASE("divergence keeps the finished layers") {
    SuperTrainConfig bad = cfg;
    bad.n_layers = 2;
    bad.sup.lr_start = bad.sup.lr_end = 1e8;
    const SuperTrainResult r = train_super(s.A, s.geom, meas, refs, bad);
    CHECK(r.failed);
    CHECK(r.model.layers.empty());
    CHECK(r.error.find("layer 1") != std::string::npos);
  }

  SUBCASE("input errors") {
    SuperTrainConfig z = cfg;
    z.n_layers = 0;
    CHECK_THROWS_AS(train_super(s.A, s.geom, meas, refs, z), ConfigError);
    CHECK_THROWS_AS(train_super(s.A, s.geom, meas, {}, cfg), ConfigError);
    SuperModel m;
    m.layers.resize(1);
    CHECK_THROWS_AS(apply_super(m, s.A, s.meas, Image(5, 5)), DimensionError);
  }
}
