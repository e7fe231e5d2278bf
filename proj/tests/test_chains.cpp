#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gammaflow/chains.hpp"
#include "gammaflow/errors.hpp"
#include "gammaflow/oracles.hpp"

using namespace gammaflow;
constexpr double kPi = std::numbers::pi;

namespace {

std::shared_ptr<const CostedNorm> unit_norm() {
  CostTable t;
  t.group = CoefficientGroup::integers();
  t.entries = {{GroupElement({1}), 1.0}, {GroupElement({-1}), 1.0}};
  t.extension = CostExtension::power_law;
  t.exponent = 1.0;
  static auto n = std::make_shared<const CostedNorm>(t, 1.0);
  return n;
}

std::shared_ptr<const CostedNorm> circle2() {
  static auto n = std::make_shared<const CostedNorm>(circle_norm(2.0));
  return n;
}

std::shared_ptr<const CostedNorm> z2_norm() {
  CostTable t;
  t.group = CoefficientGroup(0, {2});
  t.entries = {{GroupElement({1}), 1.0}};
  static auto n = std::make_shared<const CostedNorm>(t, 1.0);
  return n;
}

CubicalGrid grid(std::vector<int> extents, double h = 1.0) {
  return CubicalGrid{std::vector<double>(extents.size(), 0.0), h, extents};
}

GroupElement z(std::int64_t v) { return GroupElement({v}); }

Chain random_chain(const CubicalGrid& g, int q, std::mt19937_64& rng, int range, double density) {
  Chain S(g, q, unit_norm());
  std::uniform_int_distribution<int> U(-range, range);
  std::uniform_real_distribution<double> P(0.0, 1.0);
  for (const auto& c : g.cells(q))
    if (P(rng) < density) S.add(c, z(U(rng)));
  return S;
}

// Scalar data for the enumeration oracle: S on q-cells, boundary lists of
// (q+1)-cells, unit weights scaled by h.
struct OracleData {
  std::vector<std::int64_t> S;
  std::vector<std::vector<std::pair<int, int>>> bd;
  std::vector<double> wP, wQ;
};

OracleData oracle_data(const Chain& S) {
  const auto& g = S.grid();
  auto lo = g.cells(S.dim());
  auto hi = g.cells(S.dim() + 1);
  std::map<Cell, int> idx;
  for (std::size_t i = 0; i < lo.size(); ++i) idx[lo[i]] = static_cast<int>(i);
  OracleData d;
  for (const auto& c : lo) d.S.push_back(S.coeff(c)[0]);
  for (const auto& c : hi) {
    std::vector<std::pair<int, int>> b;
    for (auto [f, s] : cell_boundary(c)) b.push_back({idx.at(f), s});
    d.bd.push_back(b);
  }
  d.wP.assign(lo.size(), std::pow(g.h, S.dim()));
  d.wQ.assign(hi.size(), std::pow(g.h, S.dim() + 1));
  return d;
}

}  // namespace

TEST_CASE("boundary of single cells") {
  auto g = grid({3, 3});
  Chain e(g, 1, unit_norm());
  e.add(make_cell({0, 0}, {0}), z(5));
  auto b = boundary(e);
  CHECK(b.coeff(make_cell({1, 0}, {})) == z(5));
  CHECK(b.coeff(make_cell({0, 0}, {})) == z(-5));
  CHECK(b.coeffs().size() == 2);

  Chain sq(g, 2, unit_norm());
  sq.add(make_cell({0, 0}, {0, 1}), z(1));
  auto loop = boundary(sq);
  CHECK(loop.coeffs().size() == 4);
  CHECK(boundary(loop).is_zero());
  CHECK(mass(loop) == doctest::Approx(4.0));

  Chain pt(g, 0, unit_norm());
  CHECK_THROWS_WITH_AS(boundary(pt), "no boundary of 0-chain", ValidationError);
}

TEST_CASE("boundary of boundary vanishes on random chains") {
  std::mt19937_64 rng(1);
  auto g43 = grid({4, 4, 4});
  auto chain = random_chain(g43, 2, rng, 3, 0.6);
  CHECK(boundary(boundary(chain)).is_zero());
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 2;
    std::vector<int> ext(n);
    for (auto& e : ext) e = 2 + static_cast<int>(rng() % 4);
    auto g = grid(ext, 0.5);
    const int q = 2 + static_cast<int>(rng() % (n - 1));
    auto S = random_chain(g, q, rng, 3, 0.5);
    CHECK(boundary(boundary(S)).is_zero());
  }
}

TEST_CASE("mass") {
  auto g = grid({8, 8});
  Chain S(g, 0, circle2());
  S.add(make_cell({1, 1}, {}), z(1));
  S.add(make_cell({4, 1}, {}), z(-1));
  CHECK(mass(S) == doctest::Approx(4 * kPi));
  CHECK(mass(Chain(g, 1, circle2())) == 0.0);

  auto gh = grid({8, 8}, 0.5);
  Chain L(gh, 1, unit_norm());
  for (int i = 0; i < 5; ++i) L.add(make_cell({i, 2}, {0}), z(1));
  CHECK(mass(L) == doctest::Approx(2.5));
  CHECK(mass(L, Box{{0.0, 0.0}, {1.0, 4.0}}) == doctest::Approx(1.0));
  CHECK(restrict(L, Box{{0.0, 0.0}, {1.0, 4.0}}).coeffs().size() == 2);
}

TEST_CASE("flat norm examples") {
  auto g = grid({5, 3});
  Chain S(g, 0, unit_norm());
  S.add(make_cell({0, 1}, {}), z(1));
  S.add(make_cell({3, 1}, {}), z(-1));
  for (auto m : {FlatMethod::automatic, FlatMethod::lp, FlatMethod::exhaustive}) {
    FlatOptions o;
    o.method = m;
    auto f = flat_norm(S, o);
    CHECK(f.value == doctest::Approx(2.0));
    CHECK(f.Q.is_zero());
    CHECK(f.P == S);
  }

  Chain sq(grid({2, 2}), 2, unit_norm());
  sq.add(make_cell({0, 0}, {0, 1}), z(1));
  auto loop = boundary(sq);
  auto f = flat_norm(loop);
  CHECK(f.value == doctest::Approx(1.0));
  CHECK(f.Q == sq);
  CHECK(f.P.is_zero());

  CHECK(flat_norm(Chain(g, 1, unit_norm())).value == 0.0);
}

TEST_CASE("flat norm decomposition reconstructs the chain") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = grid({4, 4}, 0.5);
    const int q = trial % 2;
    auto S = random_chain(g, q, rng, 2, 0.3);
    auto f = flat_norm(S);
    CHECK(f.integral);
    CHECK((f.P + boundary(f.Q)) == S);
    CHECK(f.value == doctest::Approx(mass(f.P) + mass(f.Q)));
  }
}

TEST_CASE("flat norm is a norm and bounded by mass") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    auto g = grid({4, 4}, 0.5);
    const int q = trial % 3 == 0 ? 1 : 0;
    auto S1 = random_chain(g, q, rng, 2, 0.3);
    auto S2 = random_chain(g, q, rng, 2, 0.3);
    const double f1 = flat_norm(S1).value, f2 = flat_norm(S2).value, f12 = flat_norm(S1 + S2).value;
    CHECK((f1 == 0.0) == S1.is_zero());
    CHECK(flat_norm(-S1).value == doctest::Approx(f1).epsilon(1e-12));
    CHECK(f12 <= f1 + f2 + 1e-9);
    CHECK(f1 <= mass(S1) + 1e-12);
    auto Q = random_chain(g, q + 1, rng, 2, 0.3);
    CHECK(flat_norm(boundary(Q)).value <= mass(Q) + 1e-12);
  }
}

TEST_CASE("flow, LP and enumeration agree on small complexes") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = grid({2, 3});
    auto S = random_chain(g, 0, rng, 3, 0.7);
    auto d = oracle_data(S);
    const double ref = oracles::exhaustive_flat_norm(d.S, d.bd, d.wP, d.wQ, 3);
    FlatOptions lp, flow;
    lp.method = FlatMethod::lp;
    flow.method = FlatMethod::flow;
    CHECK(flat_norm(S, lp).value == doctest::Approx(ref).epsilon(1e-12));
    CHECK(flat_norm(S, flow).value == doctest::Approx(ref).epsilon(1e-12));
  }
  for (int trial = 0; trial < 15; ++trial) {
    auto g = grid({3, 3});
    auto S = random_chain(g, 1, rng, 2, 0.6);
    auto d = oracle_data(S);
    const double ref = oracles::exhaustive_flat_norm(d.S, d.bd, d.wP, d.wQ, 4);
    FlatOptions lp;
    lp.method = FlatMethod::lp;
    auto f = flat_norm(S, lp);
    CHECK(f.integral);
    CHECK(f.value == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("relative flat norm ignores cells outside the open box") {
  auto g = grid({6, 6}, 0.2);
  Chain S(g, 0, unit_norm());
  S.add(make_cell({0, 0}, {}), z(1));
  FlatOptions rel;
  rel.relative_to = Box{{0.25, 0.25}, {0.9, 0.9}};
  CHECK(flat_norm(S, rel).value == 0.0);

  // A point inside U one edge from the complement: cheaper to push it out
  // than to pay its mass.
  Chain T(g, 0, unit_norm());
  T.add(make_cell({2, 2}, {}), z(1));  // (0.4, 0.4)
  auto f = flat_norm(T, rel);
  CHECK(f.value == doctest::Approx(0.2));
  CHECK(flat_norm(T).value == doctest::Approx(1.0));
}

TEST_CASE("torsion coefficients use the exhaustive path") {
  auto g = grid({2, 2});
  Chain sq(g, 2, z2_norm());
  sq.add(make_cell({0, 0}, {0, 1}), GroupElement({1}));
  auto loop = boundary(sq);
  CHECK(loop.coeffs().size() == 4);
  auto f = flat_norm(loop);
  CHECK(f.method == "exhaustive");
  CHECK(f.value == doctest::Approx(1.0));
  CHECK((f.P + boundary(f.Q)) == loop);

  FlatOptions lp;
  lp.method = FlatMethod::lp;
  CHECK_THROWS_AS(flat_norm(loop, lp), ValidationError);

  Chain big(grid({12, 12}), 1, z2_norm());
  big.add(make_cell({0, 0}, {0}), GroupElement({1}));
  CHECK_THROWS_WITH_AS(flat_norm(big), "exhaustive path too large", ValidationError);

  // Two points with coefficient 1 in Z_2 cancel through a path.
  Chain pts(grid({3, 1}), 0, z2_norm());
  pts.add(make_cell({0, 0}, {}), GroupElement({1}));
  pts.add(make_cell({2, 0}, {}), GroupElement({1}));
  CHECK(flat_norm(pts).value == doctest::Approx(2.0));
  CHECK(plateau_minimize(pts).mass == 0.0);
}

TEST_CASE("cobordism") {
  auto g = grid({5, 5});
  Chain a(g, 0, unit_norm()), b(g, 0, unit_norm());
  a.add(make_cell({0, 0}, {}), z(1));
  b.add(make_cell({3, 4}, {}), z(1));
  auto r = cobordant(a, b);
  REQUIRE(r.cobordant);
  CHECK(boundary(*r.witness) == a - b);

  Chain c(g, 0, unit_norm());
  c.add(make_cell({3, 4}, {}), z(2));
  CHECK_FALSE(cobordant(a, c).cobordant);

  auto same = cobordant(a, a);
  CHECK(same.cobordant);
  CHECK(same.witness->is_zero());

  Chain e(g, 1, unit_norm());
  CHECK_THROWS_WITH_AS(cobordant(a, e), "dimension mismatch", ValidationError);

  // 1-chains: the two L-shaped paths from (0,0) to (1,1) bound the square.
  Chain l1(g, 1, unit_norm()), l2(g, 1, unit_norm());
  l1.add(make_cell({0, 0}, {0}), z(1));
  l1.add(make_cell({1, 0}, {1}), z(1));
  l2.add(make_cell({0, 0}, {1}), z(1));
  l2.add(make_cell({0, 1}, {0}), z(1));
  auto r1 = cobordant(l1, l2);
  REQUIRE(r1.cobordant);
  CHECK(boundary(*r1.witness) == l1 - l2);

  CHECK(cobordant(a, b, Box{{0, 0}, {4, 4}}).cobordant);
  CHECK_THROWS_AS(cobordant(a, b, Box{{0, 0}, {2, 2}}), ValidationError);
}

TEST_CASE("filling small cycles") {
  auto g = grid({5, 5}, 0.5);
  Chain patch(g, 2, unit_norm());
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j) patch.add(make_cell({i, j}, {0, 1}), z(1));
  auto P = boundary(patch);
  auto T = fill_small_cycle(P);
  REQUIRE(T);
  CHECK(*T == patch);
  CHECK(mass(*T) == doctest::Approx(4 * 0.25));

  auto zero = fill_small_cycle(Chain(g, 1, unit_norm()));
  REQUIRE(zero);
  CHECK(zero->is_zero());

  // Remove the centre square and wrap a loop around it.
  auto holed = Complex::full(g).without({make_cell({1, 1}, {0, 1})});
  Chain sq(g, 2, unit_norm());
  sq.add(make_cell({1, 1}, {0, 1}), z(1));
  auto around = boundary(sq);
  CHECK_FALSE(fill_small_cycle(around, holed).has_value());
  CHECK(fill_small_cycle(around).has_value());

  Chain open(g, 1, unit_norm());
  open.add(make_cell({0, 0}, {0}), z(1));
  CHECK_THROWS_AS(fill_small_cycle(open), ValidationError);

  // Every cycle below the single-cell threshold fills.
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    Chain c(g, 2, unit_norm());
    c.add(make_cell({static_cast<int>(rng() % 4), static_cast<int>(rng() % 4)}, {0, 1}), z(1));
    auto cyc = boundary(c);
    auto f = fill_small_cycle(cyc);
    REQUIRE(f);
    CHECK(boundary(*f) == cyc);
    CHECK(mass(*f) <= mass(cyc) * g.h + 1e-12);
  }
}

TEST_CASE("plateau minimization") {
  auto g = grid({8, 8}, 1.0 / 7);
  Chain dip(g, 0, circle2());
  dip.add(make_cell({1, 1}, {}), z(1));
  dip.add(make_cell({5, 6}, {}), z(-1));
  auto pr = plateau_minimize(dip);
  CHECK(pr.mass == 0.0);
  CHECK(pr.input_mass == doctest::Approx(4 * kPi));
  CHECK((dip + boundary(pr.witness)) == pr.minimizer);
  CHECK(cobordant(pr.minimizer, dip).cobordant);

  Chain deg(g, 0, circle2());
  deg.add(make_cell({3, 3}, {}), z(3));
  auto pd = plateau_minimize(deg);
  CHECK(pd.mass == doctest::Approx(6 * kPi));

  Chain sq(g, 2, circle2());
  sq.add(make_cell({2, 2}, {0, 1}), z(1));
  auto pb = plateau_minimize(boundary(sq));
  CHECK(pb.mass == 0.0);
  CHECK(pb.minimizer.is_zero());

  // Mass never increases and the result stays in the class.
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    auto S = random_chain(grid({4, 4}, 0.25), 1, rng, 2, 0.4);
    auto p = plateau_minimize(S);
    CHECK(p.mass <= mass(S) + 1e-12);
    CHECK(cobordant(p.minimizer, S).cobordant);
    CHECK((S + boundary(p.witness)) == p.minimizer);
  }
}

TEST_CASE("mass is lower semicontinuous along shrinking boundary perturbations") {
  for (int level = 1; level <= 5; ++level) {
    const int n = 1 << level;
    auto g = grid({n + 1, n + 1}, 1.0 / n);
    Chain S(g, 1, unit_norm());
    for (int i = 0; i < n; ++i) S.add(make_cell({i, n / 2}, {0}), z(1));
    Chain bump(g, 2, unit_norm());
    bump.add(make_cell({n / 2, n / 2}, {0, 1}), z(1));
    auto Si = S + boundary(bump);
    CHECK(flat_norm(Si - S).value <= 1.0 / (n * n) + 1e-12);
    CHECK(mass(S) <= mass(Si) + 1e-12);
  }
}

TEST_CASE("deformation onto the grid") {
  auto g = grid({4, 4});
  auto one = deform_to_grid(std::vector<WeightedPoint>{{{1.2, 0.9}, z(1)}}, g, unit_norm());
  CHECK(one.chain.coeff(make_cell({1, 1}, {})) == z(1));
  CHECK(one.output_mass == doctest::Approx(1.0));
  CHECK(one.ok);

  auto diag = deform_to_grid(std::vector<WeightedSegment>{{{0.0, 0.0}, {1.0, 1.0}, z(1)}}, g, unit_norm());
  CHECK(diag.chain.coeffs().size() == 2);
  CHECK(boundary(diag.chain).coeff(make_cell({1, 1}, {})) == z(1));
  CHECK(diag.mass_ratio == doctest::Approx(std::sqrt(2.0)));
  CHECK(diag.mass_ratio <= diag.c_def);
  CHECK(diag.ok);

  auto cancel = deform_to_grid(std::vector<WeightedPoint>{{{2.1, 2.0}, z(1)}, {{1.9, 2.2}, z(-1)}}, g, unit_norm());
  CHECK(cancel.chain.is_zero());

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    WeightedSegment s{{U(rng), U(rng), U(rng)}, {U(rng), U(rng), U(rng)}, z(1)};
    auto r = deform_to_grid(std::vector<WeightedSegment>{s}, grid({4, 4, 4}), unit_norm());
    CHECK(r.max_displacement <= r.displacement_bound);
    CHECK(r.ok);
  }
}

TEST_CASE("dual grid and complexes") {
  auto g = CubicalGrid{{-1.0, -1.0}, 0.5, {5, 5}};
  auto d = g.dual();
  CHECK(d.origin == std::vector<double>{-0.75, -0.75});
  CHECK(d.extents == std::vector<int>{4, 4});
  CHECK(Complex::full(grid({3, 3})).size() == 9 + 12 + 4);
  auto inside = Complex::inside(g, Box{{-1.0, -1.0}, {0.0, 0.0}});
  CHECK(inside.top_cells->size() == 4);
  CHECK(inside.contains(make_cell({2, 2}, {})));
  CHECK_FALSE(inside.contains(make_cell({3, 2}, {})));
}
