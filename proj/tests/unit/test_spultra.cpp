#include <doctest.h>

#include <cmath>
#include <random>

#include "superct/error.hpp"
#include "superct/metrics.hpp"
#include "superct/pwls.hpp"
#include "superct/spultra.hpp"
#include "test_util.hpp"

using namespace superct;

namespace {

double h_only(double l, double Y, double I0, double s2) { return h_derivatives(l, Y, I0, s2).h; }

struct CurvatureSample {
  double I0, Y, ln, l;
};

// Counts drawn from the measurement model at a random true line integral.
std::vector<CurvatureSample> curvature_samples(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> ul(0.0, 12.0), ue(2.0, 6.0);
  std::normal_distribution<double> noise(0.0, 5.0);
  std::vector<CurvatureSample> out;
  for (int k = 0; k < n; ++k) {
    CurvatureSample s;
    s.I0 = std::pow(10.0, ue(g));
    std::poisson_distribution<long> pois(s.I0 * std::exp(-ul(g)));
    s.Y = static_cast<double>(pois(g)) + noise(g);
    s.ln = ul(g);
    s.l = ul(g);
    out.push_back(s);
  }
  return out;
}

UltraParams small_ultra(double beta) {
  UltraParams p;
  p.beta = beta;
  p.gamma = 20.0 * kDefaultMuWater / 1000.0;
  p.transforms = TransformUnion::dct(2, 4);
  p.transforms.transforms[1] = p.transforms.transforms[1] * 1.3;
  p.patch = {4, 1};
  p.inner.M = 1;
  p.inner.P = 1;
  return p;
}

}  // namespace

TEST_CASE("likelihood derivatives") {
  SUBCASE("worked second derivative") {
    const auto t = h_derivatives(0.0, 1e5, 1e5, 25.0);
    CHECK(t.ddh == doctest::Approx(1e5 * (1.0 - 2.5e6 / (100025.0 * 100025.0))).epsilon(1e-14));
    CHECK(t.ddh == doctest::Approx(99975.01).epsilon(1e-7));
  }
  SUBCASE("gradient vanishes at the mean") {
    const double l = 2.3, I0 = 1e4, s2 = 25.0;
    const auto t = h_derivatives(l, I0 * std::exp(-l) + s2, I0, s2);
    CHECK(std::abs(t.dh) < 1e-12 * I0);
  }
  SUBCASE("pure Poisson form") {
    for (double l : {0.0, 0.5, 3.0, 9.0}) {
      const auto t = h_derivatives(l, 730.0, 1e4, 0.0);
      CHECK(t.dh == doctest::Approx(730.0 - 1e4 * std::exp(-l)).epsilon(1e-12));
    }
  }
  SUBCASE("finite differences") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> ul(0.05, 10.0);
    for (const auto& s : curvature_samples(2000, 12)) {
      const double l = ul(g), step = 1e-4, s2 = 25.0;
      const auto t = h_derivatives(l, s.Y, s.I0, s2);
      const auto lo = h_derivatives(l - step, s.Y, s.I0, s2), hi = h_derivatives(l + step, s.Y, s.I0, s2);
      // Five-point stencil on h, central difference on the analytic gradient.
      const double fd1 = (-h_only(l + 2 * step, s.Y, s.I0, s2) + 8 * hi.h - 8 * lo.h + h_only(l - 2 * step, s.Y, s.I0, s2)) /
                         (12 * step);
      const double fd2 = (hi.dh - lo.dh) / (2 * step);
      const double scale1 = std::abs(t.dh) + 1e-10 * std::abs(t.h) / step;
      const double scale2 = std::abs(t.ddh) + 1e-10 * std::abs(t.dh) / step;
      CHECK(std::abs(fd1 - t.dh) <= 1e-6 * scale1);
      CHECK(std::abs(fd2 - t.ddh) <= 1e-6 * scale2);
    }
  }
}

TEST_CASE("shifted counts") {
  CHECK(shifted_count(100.0, 25.0) == 125.0);
  CHECK(shifted_count(-30.0, 25.0) == 0.0);
  CHECK(shifted_count(-3.0, 0.0) == 0.0);
}

TEST_CASE("optimum curvature") {
  const double I0 = 1e4, s2 = 25.0, Y = 3000.0;
  const double cap = h_derivatives(0.0, Y, I0, s2).ddh;
  CHECK(optimum_curvature(0.0, Y, I0, s2) == cap);
  CHECK(optimum_curvature(1e-8, Y, I0, s2) == doctest::Approx(cap).epsilon(1e-6));
  CHECK(optimum_curvature(1e-8, Y, I0, s2) <= cap);
  CHECK(std::isfinite(optimum_curvature(1e-8, Y, I0, s2)));

  SUBCASE("closed form away from zero") {
    for (double l : {0.5, 1.0, 4.0, 11.0}) {
      const auto h0 = h_derivatives(0.0, Y, I0, s2), hl = h_derivatives(l, Y, I0, s2);
      double c = std::min(std::max(2.0 * (h0.h - hl.h + l * hl.dh) / (l * l), 0.0), cap);
      if (c <= 0.0) c = 1e-12 * cap + 1e-30;
      CHECK(optimum_curvature(l, Y, I0, s2) == doctest::Approx(c).epsilon(1e-12));
    }
  }
  SUBCASE("quadrature branch joins the closed form") {
    const double a = optimum_curvature(0.5 - 1e-12, Y, I0, s2), b = optimum_curvature(0.5, Y, I0, s2);
    CHECK(testutil::rel_diff(a, b) < 1e-9);
  }
  SUBCASE("negative counts give a positive floor") {
    const double c = optimum_curvature(3.0, -50.0, 1.0, 25.0);
    CHECK(c > 0.0);
  }
  SUBCASE("majorization and tangency") {
    int violations = 0, tangency_fail = 0;
    for (const auto& s : curvature_samples(10000, 21)) {
      const auto a = h_derivatives(s.ln, s.Y, s.I0, s2);
      const double c = optimum_curvature(s.ln, s.Y, s.I0, s2);
      const double hl = h_only(s.l, s.Y, s.I0, s2);
      auto q = [&](double l) { return a.h + a.dh * (l - s.ln) + 0.5 * c * (l - s.ln) * (l - s.ln); };
      if (q(s.l) < hl - 1e-9 * std::abs(hl)) ++violations;
      const double hn = h_only(s.ln, s.Y, s.I0, s2);
      if (std::abs(q(s.ln) - hn) > 1e-9 * std::abs(hn)) ++tangency_fail;
      if (!(c > 0.0)) ++violations;
    }
    CHECK(violations == 0);
    CHECK(tangency_fail == 0);
  }
}

TEST_CASE("surrogate construction") {
  const testutil::Scene s = testutil::make_scene(24, 1e4, 31);
  const Eigen::VectorXd xn = s.fbp.vec();
  const SurrogateState sur = build_surrogate(s.A, xn, s.meas);
  CHECK((sur.w.array() > 0.0).all());
  CHECK(sur.ytilde.allFinite());
  CHECK((sur.l - s.A.forward(xn)).norm() == 0.0);

  auto surrogate = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = sur.ytilde - s.A.forward(x);
    return 0.5 * r.dot(sur.w.cwiseProduct(r)) + sur.constant;
  };
  const double L = neg_log_likelihood(s.A, xn, s.meas);

  SUBCASE("tangency") { CHECK(std::abs(surrogate(xn) - L) <= 1e-9 * std::abs(L)); }

  SUBCASE("gradient matches the likelihood") {
    // Surrogate gradient -A^T W (ytilde - Ax) equals A^T dh.
    const Eigen::VectorXd gs = -s.A.back(sur.w.cwiseProduct(sur.ytilde - s.A.forward(xn)));
    const Eigen::VectorXd gl = s.A.back(sur.dh);
    CHECK((gs - gl).norm() <= 1e-8 * gl.norm());
    // Directional finite difference of L.
    const Eigen::VectorXd dir = testutil::random_vector(xn.size(), 5, 0.0, 1e-3);
    const double step = 1e-3;
    const double fd = (neg_log_likelihood(s.A, xn + step * dir, s.meas) - neg_log_likelihood(s.A, xn - step * dir, s.meas)) /
                      (2 * step);
    CHECK(testutil::rel_diff(fd, gl.dot(dir)) < 1e-6);
  }

  SUBCASE("majorizes the likelihood near x^n") {
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd pert = testutil::random_vector(xn.size(), 100 + k, -1.0, 1.0) * (1e-4 * (1 + k));
      const Eigen::VectorXd x = (xn + pert).cwiseMax(0.0);
      const double Lx = neg_log_likelihood(s.A, x, s.meas);
      CHECK(surrogate(x) >= Lx - 1e-9 * std::abs(Lx));
    }
  }

  SUBCASE("matching counts give a zero gradient") {
    MeasurementSet m = s.meas;
    const double I0 = m.protocol.I0;
    for (Eigen::Index i = 0; i < sur.l.size(); ++i) m.counts.values[static_cast<std::size_t>(i)] = I0 * std::exp(-sur.l[i]);
    const SurrogateState z = build_surrogate(s.A, xn, m);
    CHECK(z.dh.cwiseAbs().maxCoeff() < 1e-9 * I0);
    CHECK((z.ytilde - z.l).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("input errors") {
    CHECK_THROWS_AS(build_surrogate(s.A, Eigen::VectorXd::Constant(xn.size(), -1.0), s.meas), ConfigError);
    MeasurementSet m = s.meas;
    m.counts = Sinogram(3, 3, SinogramKind::counts, 1.0);
    CHECK_THROWS_AS(build_surrogate(s.A, xn, m), DimensionError);
  }
}

TEST_CASE("spultra with zero outer iterations returns the initial image") {
  const testutil::Scene s = testutil::make_scene(24, 1e4, 41);
  UltraParams p = small_ultra(5e4);
  p.outer_iters = 0;
  const UltraResult r = spultra_reconstruct(s.A, s.meas, p, s.fbp);
  CHECK(r.image.values == s.fbp.values);
  CHECK_FALSE(r.diverged);
}

TEST_CASE("spultra penalized likelihood is monotone with one subset") {
  const testutil::Scene s = testutil::make_scene(32, 1e4, 42);
  UltraParams p = small_ultra(5e4);
  p.outer_iters = 12;
  SolveLog log;
  const UltraResult r = spultra_reconstruct(s.A, s.meas, p, s.fbp, &s.ref, &log);
  REQUIRE(log.records.size() == 12);
  const double g0 = spultra_objective(s.A, s.meas, p, s.fbp, code_image(s.fbp, p));
  double prev = g0;
  for (const auto& rec : log.records) {
    CHECK(rec.objective <= prev + 1e-6 * std::abs(prev));
    prev = rec.objective;
  }
  CHECK(prev < g0);
  CHECK(testutil::rel_diff(prev, spultra_objective(s.A, s.meas, p, r.image, r.codes)) < 1e-12);
  CHECK(log.init_seconds > 0.0);
  CHECK(log.init_seconds <= log.total_seconds);
}

TEST_CASE("spultra approaches PWLS-ULTRA at high dose without electronic noise") {
  const testutil::Scene s = testutil::make_scene(32, 1e7, 43, 0.0);
  UltraParams p = small_ultra(5e5);
  p.inner.M = 4;
  p.inner.P = 4;
  p.outer_iters = 40;
  const UltraResult a = spultra_reconstruct(s.A, s.meas, p, s.fbp);
  const UltraResult b = pwls_ultra_reconstruct(s.A, s.meas, p, s.fbp);
  const double ra = rmse(a.image, s.ref), rb = rmse(b.image, s.ref);
  MESSAGE("spultra " << ra << " HU, pwls-ultra " << rb << " HU");
  CHECK(std::abs(ra - rb) <= 0.02 * rb);
}

TEST_CASE("spultra input errors") {
  const testutil::Scene s = testutil::make_scene(16, 1e4, 44);
  UltraParams p = small_ultra(1.0);
  CHECK_THROWS_AS(spultra_reconstruct(s.A, s.meas, p, Image(8, 8)), DimensionError);
  p.gamma = 0.0;
  CHECK_THROWS_AS(spultra_reconstruct(s.A, s.meas, p, s.fbp), ConfigError);
  p.gamma = 1e-3;
  p.outer_iters = -1;
  CHECK_THROWS_AS(spultra_reconstruct(s.A, s.meas, p, s.fbp), ConfigError);
}
