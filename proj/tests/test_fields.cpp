#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "gammaflow/errors.hpp"
#include "gammaflow/fields.hpp"
#include "gammaflow/oracles.hpp"

using namespace gammaflow;
constexpr double kPi = std::numbers::pi;

namespace {

Vec2 radial(const Point& x) { return vortex(x, {0.0, 0.0}, 1); }

// 2 pi int_a^b r^{1-p} dr by quadrature.
double radial_energy(double a, double b, double p) {
  return oracles::simpson([p](double r) { return 2 * kPi * std::pow(r, 1.0 - p); }, a, b, 20000);
}

// Smooth angle field: a few random plane waves.
std::function<Vec2(const Point&)> smooth_field(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<std::array<double, 4>> waves;
  for (int i = 0; i < 3; ++i) waves.push_back({3 * U(rng), 3 * U(rng), kPi * U(rng), 1.5 * U(rng)});
  return [waves](const Point& x) {
    double th = 0.0;
    for (const auto& w : waves) th += w[3] * std::sin(w[0] * x[0] + w[1] * x[1] + w[2]);
    return unit_at(th);
  };
}

}  // namespace

TEST_CASE("energy of simple fields") {
  Field c = box_field(centered_grid(16, 0.1));
  CHECK(p_energy(c, 1.5, {}) == 0.0);

  // Affine angle: |grad u| = |k| everywhere; chordal differences lose O(h^2).
  const double kx = 1.3, ky = -0.7;
  Field a = box_field(centered_grid(101, 0.01), [&](const Point& x) { return unit_at(kx * x[0] + ky * x[1]); });
  const double expect = std::pow(std::hypot(kx, ky), 1.7) * 1.0;
  CHECK(p_energy(a, 1.7, {}) == doctest::Approx(expect).epsilon(1e-4));
  CHECK_THROWS_AS(p_energy(a, 2.0, {}), ValidationError);
}

TEST_CASE("core cell quadrature is exact for a centred vortex") {
  // int over [-a,a]^2 of |x|^{-p} = 8 int_0^{pi/4} (a/cos phi)^{2-p}/(2-p) dphi.
  const double a = 0.5, p = 1.8;
  const double oracle =
      8 * oracles::simpson([&](double phi) { return std::pow(a / std::cos(phi), 2 - p) / (2 - p); }, 0, kPi / 4, 2000);
  CHECK(4 * cone_edge_energy(a, kPi / 2, p) == doctest::Approx(oracle).epsilon(1e-10));
  Field f = box_field(centered_grid(2, 2 * a), radial);
  CHECK(p_energy(f, p, {}) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("radial map on the annulus") {
  const double p = 1.5;
  Field f = box_field(disk_grid_spacing(1.0 / 256), radial);
  const double e = p_energy(f, p, [](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    return r > 0.25 && r < 1.0;
  });
  const double oracle = radial_energy(0.25, 1.0, p);
  CHECK(oracle == doctest::Approx(2 * kPi).epsilon(1e-9));
  CHECK(std::abs(e - oracle) <= 0.02 * oracle);
}

TEST_CASE("radial map on the disk") {
  const auto t0 = std::chrono::steady_clock::now();
  const double p = 1.9;
  Field f = disk_field(disk_grid_spacing(1.0 / 256), 1, p);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = radial(f.node_position(i));
  const double scaled = (2 - p) * p_energy(f, p, {});
  CHECK(std::abs(scaled - 2 * kPi) <= 0.02 * 2 * kPi);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
}

TEST_CASE("region restriction") {
  Field f = box_field(centered_grid(40, 0.05), radial);
  const double all = p_energy(f, 1.6, {});
  const double left = p_energy(f, 1.6, [](const Point& x) { return x[0] < 0; });
  const double right = p_energy(f, 1.6, [](const Point& x) { return x[0] >= 0; });
  CHECK(left + right == doctest::Approx(all));
  f.p = 1.6;
  CHECK(p_energy(f, Box{{-1, -1}, {1, 1}}) == doctest::Approx(all));
}

TEST_CASE("descent on the disk") {
  Field f = disk_field(disk_grid(64), 1, 1.9);
  const auto fixed_before = f.values;
  auto r = minimize(f, 1.9);
  CHECK(r.monotone);
  CHECK(r.energy <= r.initial_energy);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    CHECK(std::abs(norm(r.field.values[i]) - 1.0) < 1e-12);
    if (f.fixed[i]) CHECK(r.field.values[i] == fixed_before[i]);
  }
  // Another start: the centred vortex rotated by a smooth phase.
  Field g = f;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (g.fixed[i]) continue;
    const Point x = g.node_position(i);
    const double w = 1.0 - std::hypot(x[0], x[1]);
    g.values[i] = unit_at(std::atan2(x[1], x[0]) + 0.8 * w * std::sin(3 * x[0]));
  }
  auto r2 = minimize(g, 1.9);
  CHECK(std::abs(r2.energy - r.energy) <= 0.01 * r.energy);

  Field z = disk_field(disk_grid(32), 0, 1.9);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (std::size_t i = 0; i < z.values.size(); ++i)
    if (!z.fixed[i]) z.values[i] = unit_at(U(rng));
  auto rz = minimize(z, 1.9);
  CHECK(rz.energy < 1e-6);
}

TEST_CASE("degree-one minimizer approaches the radial energy") {
  Field f = disk_field(disk_grid(128), 1, 1.9);
  auto r = minimize(f, 1.9, DescentConfig{.anneal = {1.99}});
  REQUIRE(r.stages.size() == 2);
  CHECK(r.stages[0].p == 1.99);
  CHECK(std::abs(0.1 * r.energy - 2 * kPi) <= 0.1 * 2 * kPi);
}

TEST_CASE("radial collapse") {
  Field c = box_field(CubicalGrid{{0, 0}, 1.0 / 64, {65, 65}});
  c.p = 1.9;
  CHECK_THROWS_WITH_AS(radial_collapse(c, 3, CubicalGrid{{0, 0}, 1.0 / 16, {17, 17}}), "j out of range: need k <= j <= n + k",
                       ValidationError);
  CHECK_THROWS_AS(radial_collapse(c, 2, CubicalGrid{{0, 0}, 1.5 / 64, {17, 17}}), ValidationError);
  auto rc = radial_collapse(c, 2, CubicalGrid{{0, 0}, 1.0 / 16, {17, 17}});
  CHECK(rc.cells == 256);
  CHECK(rc.collapsed_energy == 0.0);
  CHECK(rc.lp_distance == 0.0);
  for (std::size_t i = 0; i < c.values.size(); ++i) CHECK(rc.field.values[i] == c.values[i]);

  // Skeleton values are untouched by the collapse.
  Field s = box_field(CubicalGrid{{0, 0}, 1.0 / 64, {65, 65}}, smooth_field(7));
  s.p = 1.7;
  auto rs = radial_collapse(s, 2, CubicalGrid{{0, 0}, 1.0 / 16, {17, 17}});
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const auto z = s.node_coords(i);
    if (z[0] % 4 == 0 || z[1] % 4 == 0) CHECK(rs.field.values[i] == s.values[i]);
  }
}

TEST_CASE("collapse estimates on smooth fields") {
  const CubicalGrid fine{{0, 0}, 1.0 / 256, {257, 257}};
  const CubicalGrid coarse{{0, 0}, 1.0 / 16, {17, 17}};
  double worst_e = 0.0, worst_d = 0.0;
  for (unsigned seed = 1; seed <= 20; ++seed)
    for (double p : {1.5, 1.9, 1.99}) {
      Field f = box_field(fine, smooth_field(seed));
      f.p = p;
      auto r = radial_collapse(f, 2, coarse);
      worst_e = std::max(worst_e, r.constant_energy);
      worst_d = std::max(worst_d, r.constant_distance);
      CHECK(r.constant_energy <= 10.0);
      CHECK(r.constant_distance <= 10.0);
    }
  MESSAGE("collapse constants: energy " << worst_e << ", distance " << worst_d);
}

TEST_CASE("polar collapse is an identity for the model map") {
  for (double p : {1.3, 1.6, 1.9, 1.99}) {
    auto r = polar_collapse(radial, 0.7, p);
    CHECK(std::abs(r.ratio - 1.0) < 1e-9);
    CHECK(r.boundary_energy == doctest::Approx(2 * kPi * std::pow(0.7, 1 - p)).epsilon(1e-8));
  }
  auto wavy = [](const Point& x) { return unit_at(std::atan2(x[1], x[0]) + 0.3 * std::sin(2 * x[0] + x[1])); };
  CHECK(std::abs(polar_collapse(wavy, 0.5, 1.8).ratio - 1.0) < 1e-9);
}

TEST_CASE("vortex products") {
  Field disk = disk_field(disk_grid(64), 1, 1.9);
  Field one = dipole_map({{{{0.0, 0.0}, 1}}, 1}, disk);
  for (std::size_t i = 0; i < one.values.size(); ++i)
    CHECK(norm(one.values[i] - radial(one.node_position(i))) < 1e-9);

  Field flat = disk_field(disk_grid(64), 0, 1.9);
  Field none = dipole_map({{}, 0}, flat);
  for (const auto& v : none.values) CHECK(norm(v - Vec2{1.0, 0.0}) < 1e-9);

  CHECK_THROWS_WITH_AS(dipole_map({{{{0.0, 0.0}, 1}, {{0.05, 0.0}, -1}}, 0}, flat),
                       "singularities 0 and 1 are closer than 4h", ValidationError);
  CHECK_THROWS_WITH_AS(dipole_map({{{{0.95, 0.0}, 1}, {{0.0, 0.0}, -1}}, 0}, flat),
                       "singularity 0 is within 4h of the boundary", ValidationError);
  CHECK_THROWS_WITH_AS(dipole_map({{{{0.3, 0.0}, 1}}, 0}, flat), "degrees sum to 1 but the boundary degree is 0",
                       ValidationError);
}

TEST_CASE("dipole energy along a p-sweep") {
  // (+1, -1) with degree-0 data: limsup (2-p) D_p <= 4 pi + 5%.
  Field flat = disk_field(disk_grid(128), 0, 1.9);
  // Vortices sit at cell centres, where the core quadrature is exact.
  const double h = flat.grid.h;
  const double x = -1 + (std::floor(1.3 / h) + 0.5) * h;
  Field d = dipole_map({{{{-x, 0.0}, 1}, {{x, 0.0}, -1}}, 0}, flat);
  for (double p : {1.9, 1.95, 1.99}) CHECK((2 - p) * p_energy(d, p, {}) <= 4 * kPi * 1.05);
}
