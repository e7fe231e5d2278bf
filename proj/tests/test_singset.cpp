#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gammaflow/errors.hpp"
#include "gammaflow/singset.hpp"

using namespace gammaflow;
constexpr double kPi = std::numbers::pi;

namespace {

std::int64_t coeff_of(const SingularChain& T, std::array<int, 2> cell) {
  Cell c;
  c.base = {cell[0], cell[1], 0, 0};
  const GroupElement g = T.chain.coeff(c);
  return g.size() ? g[0] : 0;
}

struct RandomDipoles {
  DipoleSpec spec;
  std::vector<std::array<int, 2>> cells;
};

// Two to four singularities of degree +-1 near distinct cell centres of the
// centred lattice, at least 6 cells apart and 6 cells from the edge.
RandomDipoles random_dipoles(std::mt19937& rng, const CubicalGrid& g) {
  const int cells = g.extents[0] - 1;
  std::uniform_int_distribution<int> pick(6, cells - 7), count(2, 4), sign(0, 1);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  RandomDipoles out;
  const int n = count(rng);
  int total = 0;
  while (static_cast<int>(out.cells.size()) < n) {
    std::array<int, 2> c{pick(rng), pick(rng)};
    bool far = true;
    for (const auto& o : out.cells)
      if (std::abs(o[0] - c[0]) < 6 && std::abs(o[1] - c[1]) < 6) far = false;
    if (!far) continue;
    const int d = sign(rng) ? 1 : -1;
    const Vec2 x{g.origin[0] + (c[0] + 0.5 + jitter(rng)) * g.h, g.origin[1] + (c[1] + 0.5 + jitter(rng)) * g.h};
    out.spec.singularities.push_back({x, d});
    out.cells.push_back(c);
    total += d;
  }
  out.spec.boundary_degree = total;
  return out;
}

CubicalGrid cube_grid(int n, double h) {
  const double o = -0.5 * (n - 1) * h;
  return CubicalGrid{{o, o, o}, h, {n, n, n}};
}

}  // namespace

TEST_CASE("single vortex gives one dual node") {
  Field f = box_field(centered_grid(16, 2.0 / 15), [](const Point& x) { return vortex(x, {0, 0}, 1); });
  const SingularChain T = extract_Tp(f);
  CHECK(T.chain.dim() == 0);
  CHECK(T.chain.coeffs().size() == 1);
  CHECK(coeff_of(T, {7, 7}) == 1);
  CHECK(T.max_residual < 1e-12);
  CHECK(mass(T.chain) == doctest::Approx(2 * kPi));

  Field g = box_field(centered_grid(16, 2.0 / 15), [](const Point& x) { return vortex(x, {0, 0}, -1); });
  CHECK(coeff_of(extract_Tp(g), {7, 7}) == -1);
}

TEST_CASE("constant field has no singular set") {
  Field f = box_field(centered_grid(20, 0.1));
  CHECK(extract_Tp(f).chain.is_zero());
}

TEST_CASE("dipole round trip") {
  std::mt19937 rng(11);
  const CubicalGrid g = centered_grid(129, 2.0 / 128);
  const Field flat = box_field(g);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomDipoles rd = random_dipoles(rng, g);
    const Field f = dipole_map(rd.spec, flat);
    const SingularChain T = extract_Tp(f);
    std::map<std::array<int, 2>, int> expect;
    for (std::size_t i = 0; i < rd.cells.size(); ++i) expect[rd.cells[i]] += rd.spec.singularities[i].degree;
    std::size_t nonzero = 0;
    for (const auto& [c, d] : expect) {
      CHECK(coeff_of(T, c) == d);
      if (d != 0) ++nonzero;
    }
    CHECK(T.chain.coeffs().size() == nonzero);
  }
}

TEST_CASE("windings add up over rectangles") {
  std::mt19937 rng(5);
  const CubicalGrid g = centered_grid(129, 2.0 / 128);
  const Field flat = box_field(g);
  std::uniform_int_distribution<int> corner(0, 127);
  for (int trial = 0; trial < 10; ++trial) {
    const Field f = dipole_map(random_dipoles(rng, g).spec, flat);
    const SingularChain T = extract_Tp(f);
    for (int r = 0; r < 20; ++r) {
      int x0 = corner(rng), x1 = corner(rng), y0 = corner(rng), y1 = corner(rng);
      if (x0 == x1 || y0 == y1) continue;
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      long sum = 0;
      for (const auto& [cell, cls] : T.per_cell_classes)
        if (cell.base[0] >= x0 && cell.base[0] < x1 && cell.base[1] >= y0 && cell.base[1] < y1) sum += cls[0];
      CHECK(boundary_winding(f, {x0, y0}, {x1, y1}) == sum);
    }
  }
}

TEST_CASE("extraction is stable under small perturbations") {
  std::mt19937 rng(17);
  const CubicalGrid g = centered_grid(129, 2.0 / 128);
  const Field f = dipole_map(random_dipoles(rng, g).spec, box_field(g));
  const SingularChain T = extract_Tp(f);
  std::uniform_real_distribution<double> noise(-0.2, 0.2);
  for (int trial = 0; trial < 5; ++trial) {
    Field h = f;
    for (auto& v : h.values) v = unit_at(std::atan2(v.y, v.x) + noise(rng));
    CHECK(extract_Tp(h).chain == T.chain);
  }
}

TEST_CASE("antipodal neighbours are rejected") {
  Field f = box_field(centered_grid(4, 1.0));
  f.values[f.node_index({1, 1, 0, 0})] = {-1.0, 0.0};
  CHECK_THROWS_WITH_AS(extract_Tp(f), doctest::Contains("grid too coarse at cell"), ValidationError);
}

TEST_CASE("vortex line in three dimensions") {
  const int n = 17;
  Field f = box_field(cube_grid(n, 0.125), [](const Point& x) { return vortex({x[0], x[1]}, {0.01, -0.02}, 1); });
  const SingularChain T = extract_Tp(f);
  CHECK(T.chain.dim() == 1);
  // One +z edge per dual layer.
  const int layers = n - 2;
  CHECK(static_cast<int>(T.chain.coeffs().size()) == layers);
  for (const auto& [e, c] : T.chain.coeffs()) {
    CHECK(e.axes == 4);
    CHECK(c[0] == 1);
  }
  // Only the two ends are open.
  CHECK(boundary(T.chain).coeffs().size() == 2);
}

TEST_CASE("vortex ring in three dimensions is closed") {
  const int n = 33;
  const double R0 = 0.517;
  Field f = box_field(cube_grid(n, 1.0 / 16), [&](const Point& x) {
    const double rho = std::hypot(x[0], x[1]);
    return unit_at(std::atan2(x[2] - 0.021, rho - R0));
  });
  const SingularChain T = extract_Tp(f);
  CHECK(!T.chain.is_zero());
  CHECK(boundary(T.chain).is_zero());
  // A staircase around the circle is between its length and its l1 length.
  const double m = mass(T.chain);
  CHECK(m >= 2 * kPi * 2 * kPi * R0 * 0.95);
  CHECK(m <= 2 * kPi * 8 * R0 * 1.1);
}

TEST_CASE("coarse extraction sums fine classes") {
  std::mt19937 rng(23);
  const CubicalGrid g = centered_grid(129, 2.0 / 128);
  const Field flat = box_field(g);
  for (int trial = 0; trial < 10; ++trial) {
    const Field f = dipole_map(random_dipoles(rng, g).spec, flat);
    const SingularChain fine = extract_Tp(f);
    const CubicalGrid coarse{g.origin, 4 * g.h, {33, 33}};
    const SingularChain T = extract_Tp(f, coarse);
    std::map<std::array<int, 2>, long> expect;
    for (const auto& [cell, cls] : fine.per_cell_classes) expect[{cell.base[0] / 4, cell.base[1] / 4}] += cls[0];
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 32; ++i) {
        const auto it = expect.find({i, j});
        CHECK(coeff_of(T, {i, j}) == (it == expect.end() ? 0 : it->second));
      }
  }
  CHECK_THROWS_AS(extract_Tp(flat, CubicalGrid{g.origin, 2.5 * g.h, {20, 20}}), ValidationError);
}

TEST_CASE("offset selection") {
  SUBCASE("constant field") {
    const Field f = box_field(centered_grid(65, 1.0 / 32));
    const OffsetSelection s = select_grid_offset(f, 0.25, 0.5);
    CHECK(s.admissible == s.samples);
    for (double m : s.mean) CHECK(m == 0.0);
  }
  SUBCASE("centred vortex") {
    Field f = box_field(centered_grid(512, 1.0 / 256), [](const Point& x) { return vortex(x, {0, 0}, 1); });
    f.p = 1.9;
    const OffsetSelection s = select_grid_offset(f, 1.0 / 16, 0.5, 3);
    CHECK(s.samples >= 64);
    CHECK(s.admissible > 0);
    for (int j = 0; j < 3; ++j) CHECK(s.mean_rel_error[j] < 0.05);
    CHECK(s.chosen.continuous);
    CHECK(s.chosen.f[2] <= 1.5 * s.energy);
    CHECK(s.chosen.worst_ratio <= 1.0);
  }
  SUBCASE("energy concentrated on one column") {
    // The angle climbs by 2 across fine column 100 and is constant elsewhere.
    const CubicalGrid g = centered_grid(257, 1.0 / 128);
    const double x0 = g.origin[0] + 100 * g.h;
    Field f = box_field(g, [&](const Point& x) { return unit_at(2.0 * std::clamp((x[0] - x0) / g.h, 0.0, 1.0)); });
    f.p = 1.5;
    const double h = 16 * g.h;
    const OffsetSelection s = select_grid_offset(f, h, 0.5, 7);
    CHECK(s.admissible < s.samples);
    CHECK(s.admissible > 0);
    CHECK(s.mean_rel_error[1] < 1e-9);
    // The chosen vertical lines miss the column.
    double t = s.offset[0] - 100 * g.h;
    t -= std::floor(t / h) * h;
    CHECK(t >= g.h);
    CHECK(s.chosen.ineq_skeleton);
  }
}

TEST_CASE("cube lower bound") {
  const Field c = box_field(centered_grid(65, 1.0 / 32));
  const InequalityReport z = cube_lower_bound(c, {16, 16}, {48, 48}, 0.5, 1.9, 5 / std::log(2.0));
  CHECK(z.lhs == 0.0);
  CHECK(z.ok);

  const Field v = box_field(centered_grid(65, 1.0 / 32), [](const Point& x) { return vortex(x, {0.003, -0.002}, 1); });
  const InequalityReport r = cube_lower_bound(v, {16, 16}, {48, 48}, 0.5, 1.9, 5 / std::log(2.0));
  CHECK(r.ok);
  CHECK(r.lhs < 0.0);
  CHECK(r.slack == doctest::Approx(r.rhs - r.lhs));
  CHECK(r.anchor.find("cube") != std::string::npos);
  CHECK_THROWS_AS(cube_lower_bound(v, {16, 16}, {48, 40}, 0.5, 1.9, 1.0), ValidationError);
}

TEST_CASE("mass bound report") {
  Field f = disk_field(disk_grid(48), 1, 1.95);
  const MinimizeResult m = minimize(f, 1.95);
  const SingularChain T = extract_Tp(m.field);
  CHECK(mass(T.chain) == doctest::Approx(2 * kPi));

  const MassBoundReport rep = mass_bound_report(T, m.field, 1.95, 0.5, 0.1);
  const double x = 0.05;
  const double a = (2 / 1.95) * (3 * (1.95 - 2) - 1);
  CHECK(rep.a == doctest::Approx(a));
  CHECK(rep.c_rdelta == doctest::Approx(x * (a * std::log(x) + std::log(std::pow(0.5, -2 / 1.95) / 0.1) + 1)));
  CHECK(rep.regime_reached);
  CHECK(rep.inequality.ok);
  CHECK(rep.inequality.lhs == doctest::Approx((1 - rep.c_rdelta) * 2 * kPi));

  // (k-p)^{-3(k-p)} at p = 1.99.
  const MassBoundReport r199 = mass_bound_report(T, m.field, 1.99, 0.5, 0.1);
  CHECK(r199.power_factor / 0.01 == doctest::Approx(std::exp(-0.03 * std::log(0.01))));
  CHECK(r199.power_factor / 0.01 == doctest::Approx(1.1482).epsilon(1e-4));

  const MassBoundReport r15 = mass_bound_report(T, m.field, 1.5, 0.5, 0.1);
  CHECK(r15.c_rdelta >= 1.0);
  CHECK(!r15.regime_reached);
  CHECK(r15.inequality.ok);

  CHECK_THROWS_AS(mass_bound_report(T, m.field, 1.9, 1.5, 0.1), ValidationError);
}
