#include <doctest.h>

#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "gammaflow/lp.hpp"

using namespace gammaflow;

namespace {

// Best basic feasible solution by trying every m-subset of columns.
std::optional<double> vertex_enumeration(const LinearProgram& lp) {
  const int m = lp.rows, n = static_cast<int>(lp.columns.size());
  std::optional<double> best;
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    std::vector<double> A(m * (m + 1), 0.0);
    for (int c = 0; c < m; ++c)
      for (auto [r, a] : lp.columns[idx[c]]) A[r * (m + 1) + c] = a;
    for (int r = 0; r < m; ++r) A[r * (m + 1) + m] = lp.rhs[r];
    bool singular = false;
    for (int c = 0; c < m && !singular; ++c) {
      int piv = c;
      for (int r = c; r < m; ++r)
        if (std::abs(A[r * (m + 1) + c]) > std::abs(A[piv * (m + 1) + c])) piv = r;
      if (std::abs(A[piv * (m + 1) + c]) < 1e-10) {
        singular = true;
        break;
      }
      for (int k = 0; k <= m; ++k) std::swap(A[piv * (m + 1) + k], A[c * (m + 1) + k]);
      for (int r = 0; r < m; ++r) {
        if (r == c) continue;
        double f = A[r * (m + 1) + c] / A[c * (m + 1) + c];
        for (int k = 0; k <= m; ++k) A[r * (m + 1) + k] -= f * A[c * (m + 1) + k];
      }
    }
    if (!singular) {
      bool feasible = true;
      double v = 0.0;
      for (int c = 0; c < m; ++c) {
        double x = A[c * (m + 1) + m] / A[c * (m + 1) + c];
        if (x < -1e-9) feasible = false;
        v += lp.cost[idx[c]] * x;
      }
      if (feasible && (!best || v < *best)) best = v;
    }
    int i = m - 1;
    while (i >= 0 && idx[i] == n - m + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

}  // namespace

TEST_CASE("simplex solves a textbook problem") {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 (slacks s1..s3).
  LinearProgram lp;
  lp.rows = 3;
  lp.rhs = {4, 12, 18};
  lp.add_column({{0, 1}, {2, 3}}, -3);
  lp.add_column({{1, 2}, {2, 2}}, -5);
  lp.add_column({{0, 1}}, 0);
  lp.add_column({{1, 1}}, 0);
  lp.add_column({{2, 1}}, 0);
  auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(-36));
  CHECK(r.x[0] == doctest::Approx(2));
  CHECK(r.x[1] == doctest::Approx(6));

  std::vector<int> slack_basis = {2, 3, 4};
  auto warm = solve_lp(lp, &slack_basis);
  CHECK(warm.value == doctest::Approx(-36));
}

TEST_CASE("simplex detects infeasible and unbounded problems") {
  LinearProgram inf;
  inf.rows = 2;
  inf.rhs = {1, 2};
  inf.add_column({{0, 1}, {1, 1}}, 1);  // x = 1 and x = 2
  CHECK(solve_lp(inf).status == LpStatus::infeasible);

  LinearProgram unb;
  unb.rows = 1;
  unb.rhs = {1};
  unb.add_column({{0, 1}}, 0);
  unb.add_column({{0, 1}}, -1);
  unb.add_column({{0, -1}}, -1);
  CHECK(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("simplex handles redundant equality rows") {
  LinearProgram lp;
  lp.rows = 3;
  lp.rhs = {2, 3, 5};  // third row = first + second
  lp.add_column({{0, 1}, {2, 1}}, 1);
  lp.add_column({{1, 1}, {2, 1}}, 2);
  lp.add_column({{0, 1}, {1, 1}, {2, 2}}, 2.5);
  auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  // x3 = t, x1 = 2 - t, x2 = 3 - t gives cost 8 - t/2 on [0, 2].
  CHECK(r.value == doctest::Approx(7.0));
}

TEST_CASE("simplex matches vertex enumeration on random problems") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_real_distribution<double> cost(0.0, 4.0);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 4, n = m + 3 + trial % 3;
    LinearProgram lp;
    lp.rows = m;
    std::vector<double> x0(n);
    for (auto& v : x0) v = (rng() % 3 == 0) ? 0.0 : static_cast<double>(rng() % 4);
    for (int j = 0; j < n; ++j) {
      std::vector<std::pair<int, double>> col;
      for (int r = 0; r < m; ++r)
        if (int a = coef(rng)) col.push_back({r, static_cast<double>(a)});
      lp.add_column(col, cost(rng));
    }
    lp.rhs.assign(m, 0.0);
    for (int j = 0; j < n; ++j)
      for (auto [r, a] : lp.columns[j]) lp.rhs[r] += a * x0[j];
    auto r = solve_lp(lp);
    auto ref = vertex_enumeration(lp);
    REQUIRE(ref);  // x0 is feasible and costs are nonnegative
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.value == doctest::Approx(*ref).epsilon(1e-9));
    for (int row = 0; row < m; ++row) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        for (auto [rr, a] : lp.columns[j])
          if (rr == row) s += a * r.x[j];
      CHECK(s == doctest::Approx(lp.rhs[row]));
    }
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("min cost flow on a path with a shortcut") {
  // 0 -> 1 -> 2 costs 1 + 1, direct 0 -> 2 costs 3.
  std::vector<FlowArc> arcs = {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 3.0}};
  auto r = min_cost_flow(3, arcs, {-2, 0, 2});
  REQUIRE(r.feasible);
  CHECK(r.cost == doctest::Approx(4.0));
  CHECK(r.flow == std::vector<std::int64_t>{2, 2, 0});
  CHECK_FALSE(min_cost_flow(3, arcs, {-1, 0, 2}).feasible);
  CHECK_FALSE(min_cost_flow(3, arcs, {1, 0, -1}).feasible);  // no arc back to 0
}

TEST_CASE("min cost flow agrees with the LP on random graphs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + trial % 5;
    std::vector<FlowArc> arcs;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && rng() % 2) arcs.push_back({a, b, static_cast<double>(rng() % 5)});
    std::vector<std::int64_t> dem(n, 0);
    for (int k = 0; k < 3; ++k) {
      int a = rng() % n, b = rng() % n;
      dem[a] -= 1;
      dem[b] += 1;
    }
    auto f = min_cost_flow(n, arcs, dem);
    LinearProgram lp;
    lp.rows = n;
    for (int v = 0; v < n; ++v) lp.rhs.push_back(static_cast<double>(dem[v]));
    for (auto& a : arcs) lp.add_column({{a.to, 1.0}, {a.from, -1.0}}, a.cost);
    auto r = solve_lp(lp);
    CHECK(f.feasible == (r.status == LpStatus::optimal));
    if (f.feasible) {
      CHECK(f.cost == doctest::Approx(r.value));
      std::vector<std::int64_t> net(n, 0);
      for (std::size_t i = 0; i < arcs.size(); ++i) {
        CHECK(f.flow[i] >= 0);
        net[arcs[i].to] += f.flow[i];
        net[arcs[i].from] -= f.flow[i];
      }
      CHECK(net == dem);
    }
  }
}
