#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "gammaflow/ballconstruct.hpp"
#include "gammaflow/errors.hpp"
#include "gammaflow/fields.hpp"
#include "gammaflow/oracles.hpp"

using namespace gammaflow;
constexpr double kPi = std::numbers::pi;

namespace {

const CoefficientGroup Z = CoefficientGroup::integers();
GroupElement z(std::int64_t d) { return Z.element({d}); }

SingularityConfig disk_config(std::vector<PointSingularity> s, std::int64_t boundary) {
  SingularityConfig cfg;
  cfg.domain = Domain::disk({0.0, 0.0}, 1.0);
  cfg.collar = 0.5;
  cfg.singularities = std::move(s);
  cfg.boundary_class = z(boundary);
  return cfg;
}

// Model energy 2 pi |d|^p int_a^b r^{1-p} dr by quadrature.
double model_energy_oracle(int d, double a, double b, double p) {
  return 2 * kPi * std::pow(std::abs(d), p) *
         oracles::simpson([p](double r) { return std::pow(r, 1.0 - p); }, a, b, 4000);
}

}  // namespace

TEST_CASE("lambda") {
  CHECK(lambda_p(0.0, 2 * kPi, 2.0, 1.5) == 0.0);
  CHECK(lambda_p(1.0, 2 * kPi, 2.0, 1.5) == doctest::Approx(std::sqrt(2 * kPi) / 0.5));
  CHECK(lambda_p(1.0, 2 * kPi, 2.0, 1.5) == doctest::Approx(5.0133).epsilon(1e-5));
  CHECK(lambda_p(1.0 / (2 * kPi), 2 * kPi, 2.0, 1.7) == doctest::Approx(1.0 / 0.3));
  double prev = 0.0;
  for (double s = 0.01; s < 2.0; s += 0.01) {
    const double v = lambda_p(s, 2 * kPi, 2.0, 1.8);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(lambda_p(1.0, 1.0, 2.0, 2.0), ValidationError);
}

TEST_CASE("annulus bound") {
  const CostedNorm N15 = circle_norm(1.5);
  CHECK(annulus_bound(z(0), 0.5, 1.0, 1.5, N15) == 0.0);
  const double b = annulus_bound(z(1), 0.5, 1.0, 1.5, N15);
  CHECK(b == doctest::Approx(2 * kPi * (1 - std::sqrt(0.5)) / 0.5));
  CHECK(b == doctest::Approx(3.6806).epsilon(1e-4));
  CHECK(model_annulus_energy(1, 0.5, 1.0, 1.5) == doctest::Approx(model_energy_oracle(1, 0.5, 1.0, 1.5)).epsilon(1e-9));
  CHECK(std::abs(b - model_annulus_energy(1, 0.5, 1.0, 1.5)) < 1e-9);

  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const double a = 0.9 * U(rng), bb = a + 0.05 + U(rng), p = 1.05 + 0.94 * U(rng);
    const CostedNorm N = circle_norm(p);
    CHECK(std::abs(annulus_bound(z(1), a, bb, p, N) - model_annulus_energy(1, a, bb, p)) < 1e-9);
    for (int d : {2, 3}) CHECK(annulus_bound(z(d), a, bb, p, N) < model_annulus_energy(d, a, bb, p));
  }
  // d = 2 at p = 1.9 uses |2|_p = 4 pi.
  const CostedNorm N19 = circle_norm(1.9);
  CHECK(N19(z(2)) == doctest::Approx(4 * kPi));
  CHECK(model_annulus_energy(2, 0.25, 1.0, 1.9) ==
        doctest::Approx(2 * kPi * std::pow(2.0, 1.9) * (1 - std::pow(0.25, 0.1)) / 0.1));
  CHECK(annulus_bound(z(2), 0.25, 1.0, 1.9, N19) < model_annulus_energy(2, 0.25, 1.0, 1.9));
  CHECK_THROWS_AS(annulus_bound(z(1), 1.0, 1.0, 1.5, N15), ValidationError);
}

TEST_CASE("single singularity") {
  const CostedNorm N = circle_norm(1.99);
  const auto cfg = disk_config({{{0.1, -0.2}, z(1)}}, 1);
  const BallCollection bc = ball_construction(cfg, 0.01, N);
  REQUIRE(bc.balls.size() == 1);
  CHECK(bc.balls[0].centre == Vec2{0.1, -0.2});
  CHECK(bc.balls[0].cls == z(1));
  CHECK(bc.s >= 0.005);
  CHECK(bc.s <= 0.01);
  CHECK(bc.properties.all());
  CHECK(bc.events.empty());
}

TEST_CASE("zero boundary class is outside the regime") {
  const CostedNorm N = circle_norm(1.99);
  const auto cfg = disk_config({{{-0.3, 0.0}, z(1)}, {{0.3, 0.0}, z(-1)}}, 0);
  const BallCollection bc = ball_construction(cfg, 0.01, N);
  CHECK(bc.balls.size() == 2);
  CHECK(!bc.properties.in_regime);
  CHECK(!bc.properties.radius_sum);
  CHECK(bc.properties.coverage);
  CHECK(bc.properties.disjoint);

  const auto cfg2 = disk_config({{{-0.3, 0.0}, z(1)}, {{0.3, 0.0}, z(1)}}, 2);
  const BallCollection bc2 = ball_construction(cfg2, 0.009, N);
  CHECK(bc2.balls.size() == 2);
  CHECK(bc2.properties.in_regime);
  CHECK(bc2.properties.all());
}

TEST_CASE("clustered same-sign configurations") {
  const auto t0 = std::chrono::steady_clock::now();
  const CostedNorm N = circle_norm(1.99);
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> count(1, 10), clusters(1, 3);
  int merges = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const int n = count(rng);
    std::vector<Vec2> centres;
    for (int c = clusters(rng); c > 0; --c) centres.push_back({0.3 * U(rng), 0.3 * U(rng)});
    std::vector<PointSingularity> s;
    for (int i = 0; i < n; ++i) {
      const Vec2 c = centres[static_cast<std::size_t>(i) % centres.size()];
      s.push_back({{c.x + 0.02 * U(rng), c.y + 0.02 * U(rng)}, z(1)});
    }
    const auto cfg = disk_config(s, n);
    const double tau = 0.99 * 0.5 / (4 * 2 * kPi * n);
    const BallCollection bc = ball_construction(cfg, tau, N);
    CHECK(bc.properties.coverage);
    CHECK(bc.properties.disjoint);
    CHECK(bc.properties.contained);
    CHECK(bc.properties.scale_window);
    CHECK(bc.properties.radius_sum);
    CHECK(bc.credit_monotone);
    for (const auto& ev : bc.events) CHECK(ev.credit_after >= ev.credit_before * (1 - 1e-12));
    merges += static_cast<int>(bc.events.size());
  }
  CHECK(merges > 0);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
}

TEST_CASE("hypotheses are checked") {
  const CostedNorm N = circle_norm(1.99);
  const auto cfg = disk_config({{{0.1, 0.1}, z(1)}}, 1);
  CHECK_THROWS_WITH_AS(ball_construction(cfg, 0.05, N), doctest::Contains("4 tau |hc|_p <= r"), ValidationError);
  CHECK_THROWS_WITH_AS(ball_construction(cfg, 0.01, circle_norm(1.5)),
                       doctest::Contains("(alpha tau / 2)^(k-p) > 1/2"), ValidationError);
  CHECK_THROWS_WITH_AS(ball_construction(disk_config({{{0.7, 0.0}, z(1)}}, 1), 0.01, N),
                       doctest::Contains("within the collar"), ValidationError);
  CHECK_THROWS_WITH_AS(ball_construction(disk_config({{{0.1, 0.0}, z(1)}}, 2), 0.01, N),
                       doctest::Contains("do not sum"), ValidationError);
  CHECK_THROWS_WITH_AS(ball_construction(disk_config({{{0.1, 0.0}, z(1)}, {{0.1, 0.0}, z(1)}}, 2), 0.005, N),
                       doctest::Contains("coincide"), ValidationError);
  auto wide = cfg;
  wide.collar = 0.6;
  CHECK_THROWS_AS(ball_construction(wide, 0.01, N), ValidationError);
}

TEST_CASE("lower bound certificate") {
  const CostedNorm Np = circle_norm(1.99), Nk = circle_norm(2.0);
  const double C = default_certificate_constant();
  CHECK(C == doctest::Approx(5 / std::log(2.0)));
  const auto c = lower_bound_certificate(z(1), 1.99, 2.0, 0.5, Np, Nk, C);
  CHECK(c.bound_p == doctest::Approx(2 * kPi / 0.01 - C * 2 * kPi * std::log(2.0)));
  CHECK(c.bound_p == doctest::Approx(596.90).epsilon(1e-5));
  CHECK(!c.vacuous_p);

  const auto zero = lower_bound_certificate(z(0), 1.99, 2.0, 0.5, Np, Nk, C);
  CHECK(zero.bound_p == 0.0);
  CHECK(zero.bound_k == 0.0);

  const CostedNorm N15 = circle_norm(1.5);
  const auto v = lower_bound_certificate(z(1), 1.5, 2.0, 0.5, N15, Nk, C);
  CHECK(v.bound_p == doctest::Approx(4 * kPi - 5 * 2 * kPi));
  CHECK(v.vacuous_p);

  CHECK_THROWS_WITH_AS(lower_bound_certificate(z(1), 1.9, 2.0, 0.0, Np, Nk, C), doctest::Contains("r out of range"),
                       ValidationError);
  CHECK_THROWS_AS(lower_bound_certificate(z(1), 1.9, 2.0, 0.6, Np, Nk, C), ValidationError);

  // The model field (x/|x|)^d on the unit disk has D_p = 2 pi d^p / (2 - p).
  for (int d : {1, 2, 3})
    for (double p : {1.6, 1.8, 1.9, 1.95, 1.99})
      for (double r : {0.05, 0.1, 0.25, 0.5}) {
        const CostedNorm N = circle_norm(p);
        const auto cert = lower_bound_certificate(z(d), p, 2.0, r, N, Nk, C);
        CHECK(cert.bound_p <= 2 * kPi * std::pow(d, p) / (2 - p));
        CHECK(cert.bound_k <= 2 * kPi * std::pow(d, p) / (2 - p));
      }
}

TEST_CASE("certificate below computed minimizers") {
  const CostedNorm Nk = circle_norm(2.0);
  const double C = default_certificate_constant();
  for (int d : {1, 2}) {
    Field f = disk_field(disk_grid(48), d, 1.95);
    const MinimizeResult m = minimize(f, 1.95);
    const auto cert = lower_bound_certificate(z(d), 1.95, 2.0, 0.5, circle_norm(1.95), Nk, C);
    CHECK(cert.bound_k <= m.energy);
    CHECK(cert.bound_p <= m.energy);
  }
}
