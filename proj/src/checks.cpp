#include "gammaflow/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "gammaflow/ballconstruct.hpp"
#include "gammaflow/chains.hpp"
#include "gammaflow/coeffgroup.hpp"
#include "gammaflow/errors.hpp"
#include "gammaflow/fields.hpp"
#include "gammaflow/io.hpp"
#include "gammaflow/loopmin.hpp"
#include "gammaflow/oracles.hpp"
#include "gammaflow/pipeline.hpp"
#include "gammaflow/singset.hpp"

namespace gammaflow {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Detail {
  std::ostringstream os;
  template <class T>
  Detail& operator<<(const T& v) {
    os << v;
    return *this;
  }
};

using Body = std::function<bool(Detail&)>;

void run(std::vector<CheckResult>& out, const CheckCallback& cb, std::string id, std::string name, const Body& body) {
  CheckResult r;
  r.id = std::move(id);
  r.name = std::move(name);
  const auto t0 = Clock::now();
  Detail d;
  d.os.precision(6);
  try {
    r.pass = body(d);
    r.detail = d.os.str();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = d.os.str() + (d.os.str().empty() ? "" : "; ") + "exception: " + e.what();
  }
  r.seconds = since(t0);
  if (cb) cb(r);
  out.push_back(std::move(r));
}

// ------------------------------------------------------------------ shared data

struct SweepRuns {
  GammaRunResult deg1, deg2;
  double seconds = 0.0;
};

const SweepRuns& sweep_runs() {
  static const SweepRuns runs = [] {
    SweepRuns r;
    const auto t0 = Clock::now();
    RunConfig cfg;
    cfg.nodes = 128;
    cfg.p_list = {1.7, 1.8, 1.9, 1.95};
    cfg.degree = 1;
    r.deg1 = gamma_run(cfg);
    cfg.degree = 2;
    r.deg2 = gamma_run(cfg);
    r.seconds = since(t0);
    return r;
  }();
  return runs;
}

const GammaRow* row_at(const GammaRunResult& r, double p) {
  for (const auto& row : r.rows)
    if (std::abs(row.p - p) < 1e-12) return &row;
  return nullptr;
}

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

std::shared_ptr<const CostedNorm> unit_z_norm() {
  CostTable t;
  t.group = CoefficientGroup::integers();
  t.entries = {{GroupElement({1}), 1.0}, {GroupElement({-1}), 1.0}};
  t.extension = CostExtension::power_law;
  static const auto n = std::make_shared<const CostedNorm>(t, 1.0);
  return n;
}

// Exhaustive flat norm of a scalar chain with unit weights scaled by h.
double exhaustive_flat(const Chain& S, int range) {
  const auto& g = S.grid();
  const auto lo = g.cells(S.dim());
  const auto hi = g.cells(S.dim() + 1);
  std::map<Cell, int> idx;
  for (std::size_t i = 0; i < lo.size(); ++i) idx[lo[i]] = static_cast<int>(i);
  std::vector<std::int64_t> s;
  for (const auto& c : lo) {
    const GroupElement e = S.coeff(c);
    s.push_back(e.size() ? e[0] : 0);
  }
  std::vector<std::vector<std::pair<int, int>>> bd;
  for (const auto& c : hi) {
    std::vector<std::pair<int, int>> b;
    for (auto [f, sign] : cell_boundary(c)) b.push_back({idx.at(f), sign});
    bd.push_back(b);
  }
  const std::vector<double> wP(lo.size(), std::pow(g.h, S.dim())), wQ(hi.size(), std::pow(g.h, S.dim() + 1));
  return oracles::exhaustive_flat_norm(s, bd, wP, wQ, range);
}

const std::vector<CoefficientGroup>& sample_groups() {
  static const std::vector<CoefficientGroup> groups = {
      CoefficientGroup(1, {}),        CoefficientGroup(2, {}),   CoefficientGroup(0, {4, 6}),
      CoefficientGroup(0, {2, 3, 4}), CoefficientGroup(1, {3}), CoefficientGroup(0, {5}),
  };
  return groups;
}

CostTable random_table(std::mt19937_64& rng) {
  const auto& G = sample_groups()[rng() % sample_groups().size()];
  std::uniform_real_distribution<double> U(0.5, 5.0);
  CostTable t;
  t.group = G;
  std::map<GroupElement, double> costs;
  for (const auto& g : oracles::window(G, 2)) {
    if (G.is_zero(g) || costs.count(g)) continue;
    if (rng() % 4 == 0 && costs.size() > 2) continue;
    const double c = U(rng);
    costs[g] = c;
    costs[G.neg(g)] = c;
  }
  for (auto& [g, c] : costs) t.entries.push_back({g, c});
  return t;
}

GroupElement random_element(const CoefficientGroup& G, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> U(-4, 4);
  std::vector<std::int64_t> c(G.rank());
  for (auto& x : c) x = U(rng);
  return G.element(c);
}

// ------------------------------------------------------------------ criteria

bool criterion_radial(Detail& d) {
  bool ok = true;
  for (double p = 1.05; p < 2.0; p += 0.05) {
    const double continuum = (2 - p) * model_annulus_energy(1, 0.0, 1.0, p);
    ok = ok && std::abs(continuum - 2 * kPi) <= 1e-12 * 2 * kPi;
  }
  const auto t0 = Clock::now();
  Field f = disk_field(disk_grid_spacing(1.0 / 256), 1, 1.9);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = vortex(f.node_position(i), {0.0, 0.0}, 1);
  const double ratio = 0.1 * p_energy(f, 1.9, {}) / (2 * kPi);
  const double secs = since(t0);
  d << "continuum exact for p in [1.05, 1.95]; discrete (2-p)D_p/2pi at h=1/256, p=1.9: " << ratio;
  return ok && std::abs(ratio - 1.0) <= 0.02 && secs < 1.0;
}

bool criterion_gamma_limit(Detail& d) {
  const auto& runs = sweep_runs();
  const auto& e1 = runs.deg1.extrapolation;
  const auto& e2 = runs.deg2.extrapolation;
  bool rows_ok = true;
  for (const auto* r : {&runs.deg1, &runs.deg2})
    for (const auto& row : r->rows) rows_ok = rows_ok && row.error.empty();
  d << "degree 1: " << e1.intercept << " vs 2pi (rel " << e1.rel_error << "); degree 2: " << e2.intercept
    << " vs 4pi (rel " << e2.rel_error << ")";
  return rows_ok && e1.rel_error <= 0.10 && e2.rel_error <= 0.15 && runs.seconds < 300.0;
}

bool criterion_flat(Detail& d) {
  const auto& runs = sweep_runs();
  bool ok = true;
  for (const auto* r : {&runs.deg1, &runs.deg2}) {
    const GammaRow *a = row_at(*r, 1.7), *b = row_at(*r, 1.9), *lim = row_at(*r, 1.95);
    if (!a || !b || !lim || !r->limit_chain) return false;
    const double m = mass(*r->limit_chain);
    d << "F(T1.9-T1.95)=" << b->flat_dist_to_limit << " F(T1.7-T1.95)=" << a->flat_dist_to_limit << " M=" << m << "; ";
    ok = ok && b->flat_dist_to_limit <= a->flat_dist_to_limit && b->flat_dist_to_limit <= 0.1 * m;
  }
  return ok;
}

bool criterion_plateau(Detail& d) {
  const auto& runs = sweep_runs();
  bool ok = true;
  int deg = 1;
  for (const auto* r : {&runs.deg1, &runs.deg2}) {
    const double target = 2 * kPi * deg;
    d << "degree " << deg << ": mass " << r->plateau_mass << (r->plateau_cobordant ? " cobordant" : " not cobordant")
      << "; ";
    ok = ok && std::abs(r->plateau_mass - target) <= 1e-12 * target && r->plateau_cobordant;
    ++deg;
  }
  return ok;
}

bool criterion_annulus(Detail& d) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const CoefficientGroup Z = CoefficientGroup::integers();
  double worst = 0.0;
  bool strict = true;
  for (int t = 0; t < 20; ++t) {
    const double a = 0.9 * U(rng), b = a + 0.05 + U(rng), p = 1.05 + 0.94 * U(rng);
    const CostedNorm N = circle_norm(p);
    worst = std::max(worst, std::abs(annulus_bound(Z.element({1}), a, b, p, N) - model_annulus_energy(1, a, b, p)));
    for (int deg : {2, 3})
      strict = strict && annulus_bound(Z.element({deg}), a, b, p, N) < model_annulus_energy(deg, a, b, p);
  }
  d << "max |bound - model| for |d|=1: " << worst << "; strict for |d|=2,3: " << (strict ? "yes" : "no");
  return worst <= 1e-9 && strict;
}

bool criterion_balls(Detail& d) {
  const auto t0 = Clock::now();
  const CostedNorm N = circle_norm(1.99);
  const CoefficientGroup Z = CoefficientGroup::integers();
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> count(1, 10), clusters(1, 3);
  int failures = 0, merges = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const int n = count(rng);
    std::vector<Vec2> centres;
    for (int c = clusters(rng); c > 0; --c) centres.push_back({0.3 * U(rng), 0.3 * U(rng)});
    SingularityConfig cfg;
    cfg.domain = Domain::disk({0.0, 0.0}, 1.0);
    cfg.collar = 0.5;
    for (int i = 0; i < n; ++i) {
      const Vec2 c = centres[static_cast<std::size_t>(i) % centres.size()];
      cfg.singularities.push_back({{c.x + 0.02 * U(rng), c.y + 0.02 * U(rng)}, Z.element({1})});
    }
    cfg.boundary_class = Z.element({n});
    const double tau = 0.99 * cfg.collar / (4 * 2 * kPi * n);
    const BallCollection bc = ball_construction(cfg, tau, N);
    if (!bc.properties.all() || !bc.credit_monotone) ++failures;
    merges += static_cast<int>(bc.events.size());
  }
  const double secs = since(t0);
  d << "100 configurations, " << merges << " merges, " << failures << " violations";
  return failures == 0 && secs < 10.0;
}

bool criterion_certificate(Detail& d) {
  const auto& runs = sweep_runs();
  bool ok = true;
  int checked = 0;
  for (const auto* r : {&runs.deg1, &runs.deg2})
    for (const auto& row : r->rows) {
      if (row.p < 1.9) continue;
      ++checked;
      d << "p=" << row.p << " D_p=" << row.energy << " bound_p=" << row.bound_p << "; ";
      ok = ok && row.error.empty() && row.energy >= row.bound_p;
    }
  return ok && checked == 4;
}

bool criterion_flat_oracle(Detail& d) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coef(-2, 2);
  std::uniform_real_distribution<double> P(0.0, 1.0);
  struct Family {
    std::vector<int> extents;
    int q;
    int range;
  };
  const std::vector<Family> families{{{2, 3}, 0, 3}, {{3, 3}, 1, 4}, {{2, 2, 2}, 1, 3}, {{3, 3, 2}, 2, 4}};
  int cases = 0, mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const Family& fam = families[static_cast<std::size_t>(i) % families.size()];
    const CubicalGrid g{std::vector<double>(fam.extents.size(), 0.0), 1.0, fam.extents};
    Chain S(g, fam.q, unit_z_norm());
    for (const auto& c : g.cells(fam.q))
      if (P(rng) < 0.7) S.add(c, GroupElement({coef(rng)}));
    FlatOptions opts;
    opts.method = FlatMethod::lp;
    const auto lp = flat_norm(S, opts);
    const double ref = exhaustive_flat(S, fam.range);
    ++cases;
    if (!lp.integral || std::abs(lp.value - ref) > 1e-9 * std::max(1.0, ref)) ++mismatches;
  }
  d << cases << " chains, " << mismatches << " mismatches";
  return mismatches == 0;
}

bool criterion_norms(Detail& d) {
  std::mt19937_64 rng(20240611);
  int violations = 0, compared = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const CostTable t = random_table(rng);
    const CostedNorm n(t, 2.0, 4);
    const auto& G = t.group;
    if (!(n.alpha() > 0.0)) ++violations;
    for (int trial = 0; trial < 5; ++trial) {
      const auto s1 = random_element(G, rng), s2 = random_element(G, rng);
      const double n1 = n(s1), n2 = n(s2), n12 = n(G.add(s1, s2));
      if ((n1 == 0.0) != G.is_zero(s1)) ++violations;
      if (n(G.neg(s1)) != n1) ++violations;
      if (n12 > n1 + n2 + 1e-12) ++violations;
      if (!G.is_zero(s1) && n1 < n.alpha() - 1e-12) ++violations;
    }
    if (G.is_finite() && G.enumerate().size() <= 24) {
      const auto all = G.enumerate();
      const auto ref = oracles::floyd_norms(t);
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (std::isinf(ref[i])) continue;
        ++compared;
        if (std::abs(decomposition_norm(t, all[i]).value - ref[i]) > 1e-12 * std::max(1.0, ref[i])) ++violations;
      }
    }
  }
  d << "100 tables, " << compared << " elements against the all-pairs oracle, " << violations << " violations";
  return violations == 0 && compared > 0;
}

bool criterion_norm_convergence(Detail& d) {
  bool ok = true;
  for (int deg : {1, 2, 3}) {
    const auto cn = converging_norms(LoopTarget::circle(), GroupElement({deg}), {1.99}, 2, 256);
    const double target = 2 * kPi * deg;
    const double rel = std::abs(cn.rows[0].norm - target) / target;
    d << "d=" << deg << " rel " << rel << "; ";
    ok = ok && rel <= 0.01;
  }
  return ok;
}

bool criterion_gradient_band(Detail& d) {
  bool ok = true;
  for (int deg = 1; deg <= 3; ++deg) {
    double lo = INFINITY, hi = 0.0;
    for (double p : {1.5, 2.0, 3.0}) {
      const auto r = minimize_circle_loop(deg, p, 256);
      const double ratio = check_gradient_bound(r.loop, 1.5).ratio;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    d << "d=" << deg << " ratio band " << lo << ".." << hi << " (factor " << hi / lo << "); ";
    ok = ok && hi <= 2.0 * lo;
  }
  return ok;
}

bool criterion_collapse(Detail& d) {
  const CubicalGrid fine{{0, 0}, 1.0 / 256, {257, 257}};
  const CubicalGrid coarse{{0, 0}, 1.0 / 16, {17, 17}};
  double worst_e = 0.0, worst_d = 0.0;
  for (unsigned seed = 1; seed <= 20; ++seed)
    for (double p : {1.5, 1.9, 1.99}) {
      Field f = box_field(fine, smooth_field(seed));
      f.p = p;
      const auto r = radial_collapse(f, 2, coarse);
      worst_e = std::max(worst_e, r.constant_energy);
      worst_d = std::max(worst_d, r.constant_distance);
    }
  double worst_polar = 0.0;
  for (double p : {1.3, 1.6, 1.9, 1.99}) {
    const auto r = polar_collapse([](const Point& x) { return vortex(x, {0.0, 0.0}, 1); }, 0.7, p);
    worst_polar = std::max(worst_polar, std::abs(r.ratio - 1.0));
  }
  d << "energy constant " << worst_e << ", distance constant " << worst_d << ", polar |ratio-1| " << worst_polar;
  return worst_e <= 10.0 && worst_d <= 10.0 && worst_polar <= 1e-9;
}

}  // namespace

std::vector<CheckResult> acceptance_checks(const CheckCallback& cb) {
  std::vector<CheckResult> out;
  run(out, cb, "A1", "radial identity", criterion_radial);
  run(out, cb, "A2", "energy limit along the p-sweep", criterion_gamma_limit);
  run(out, cb, "A3", "flat convergence of singular chains", criterion_flat);
  run(out, cb, "A4", "mass minimality of the limit chain", criterion_plateau);
  run(out, cb, "A5", "annulus sharpness", criterion_annulus);
  run(out, cb, "A6", "ball construction properties", criterion_balls);
  run(out, cb, "A7", "lower-bound certificates below minimizer energies", criterion_certificate);
  run(out, cb, "A8", "flat norm against exhaustive search", criterion_flat_oracle);
  run(out, cb, "A9", "norm axioms and decomposition oracle", criterion_norms);
  run(out, cb, "A10", "norm convergence as p approaches 2", criterion_norm_convergence);
  run(out, cb, "A11", "p-uniform gradient ratio band", criterion_gradient_band);
  run(out, cb, "A12", "radial collapse estimates", criterion_collapse);
  return out;
}

std::vector<CheckResult> property_checks(const CheckCallback& cb) {
  std::vector<CheckResult> out;
  const CoefficientGroup Z = CoefficientGroup::integers();

  run(out, cb, "P1", "circle norm is 2 pi |d| and weighted l1", [](Detail& d) {
    const CostedNorm n = circle_norm(1.5);
    std::vector<double> w;
    d << "|3|_1.5 = " << n(GroupElement({3}));
    return n.is_weighted_l1(&w) && std::abs(n(GroupElement({-3})) - 6 * kPi) < 1e-12 && std::abs(n.alpha() - 2 * kPi) < 1e-12;
  });
  run(out, cb, "P2", "asymmetric cost table names the offending element", [](Detail& d) {
    CostTable t;
    t.group = CoefficientGroup(0, {5});
    t.entries = {{GroupElement({1}), 1.0}, {GroupElement({4}), 2.0}};
    try {
      cost_table_from_json(to_json(t));
    } catch (const ValidationError& e) {
      d << e.what();
      return std::string(e.what()).find("(1)") != std::string::npos;
    }
    return false;
  });
  run(out, cb, "P3", "power-law extension matches the explicit table", [](Detail& d) {
    const CostedNorm a = circle_norm(1.7, 8);
    CostTable t;
    t.group = CoefficientGroup::integers();
    for (int k = -6; k <= 6; ++k)
      if (k) t.entries.push_back({GroupElement({k}), 2 * kPi * std::pow(std::abs(k), 1.7)});
    double worst = 0.0;
    for (int k = -6; k <= 6; ++k) worst = std::max(worst, std::abs(a(GroupElement({k})) - decomposition_norm(t, GroupElement({k})).value));
    d << "max difference " << worst;
    return worst < 1e-9;
  });
  run(out, cb, "P4", "loop descent recovers 2 pi |d|^p", [](Detail& d) {
    const auto r = minimize_circle_loop(2, 1.5, 256);
    const double rel = std::abs(r.energy - r.closed_form) / r.closed_form;
    d << "relative error " << rel;
    return rel < 0.01 && r.monotone && r.winding_preserved;
  });
  run(out, cb, "P5", "loop gradient ratio is at most one", [](Detail& d) {
    double worst = 0.0;
    for (int deg = 1; deg <= 3; ++deg)
      for (double p : {1.5, 2.0, 3.0}) worst = std::max(worst, check_gradient_bound(minimize_circle_loop(deg, p, 256).loop, 1.5).ratio);
    d << "largest ratio " << worst;
    return worst <= 1.0;
  });
  run(out, cb, "P6", "boundary of a boundary vanishes", [](Detail& d) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> U(-3, 3);
    int bad = 0;
    for (int t = 0; t < 20; ++t) {
      const CubicalGrid g{{0, 0, 0}, 0.5, {4, 4, 4}};
      for (int q = 2; q <= 3; ++q) {
        Chain S(g, q, unit_z_norm());
        for (const auto& c : g.cells(q))
          if (rng() % 3 == 0) S.add(c, GroupElement({U(rng)}));
        if (!boundary(boundary(S)).is_zero()) ++bad;
      }
    }
    d << bad << " failures";
    return bad == 0;
  });
  run(out, cb, "P7", "flat norm is bounded by mass", [](Detail& d) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> U(-2, 2);
    int bad = 0;
    for (int t = 0; t < 20; ++t) {
      const CubicalGrid g{{0, 0}, 0.25, {5, 5}};
      Chain S(g, 1, unit_z_norm());
      for (const auto& c : g.cells(1))
        if (rng() % 2) S.add(c, GroupElement({U(rng)}));
      if (flat_norm(S).value > mass(S) + 1e-12) ++bad;
    }
    d << bad << " violations";
    return bad == 0;
  });
  run(out, cb, "P8", "relative flat norm ignores cells outside U", [](Detail& d) {
    const CubicalGrid g{{0, 0}, 0.2, {6, 6}};
    Chain S(g, 0, unit_z_norm());
    S.add(make_cell({0, 0}, {}), GroupElement({1}));
    FlatOptions rel;
    rel.relative_to = Box{{0.25, 0.25}, {0.9, 0.9}};
    const double v = flat_norm(S, rel).value;
    d << "value " << v;
    return v == 0.0;
  });
  run(out, cb, "P9", "dipole endpoints are cobordant", [](Detail& d) {
    const CubicalGrid g{{0, 0}, 1.0, {5, 5}};
    Chain a(g, 0, unit_z_norm()), b(g, 0, unit_z_norm());
    a.add(make_cell({0, 0}, {}), GroupElement({1}));
    b.add(make_cell({3, 4}, {}), GroupElement({1}));
    const auto r = cobordant(a, b);
    d << (r.cobordant ? "cobordant" : "not cobordant");
    return r.cobordant && boundary(*r.witness) == a - b;
  });
  run(out, cb, "P10", "plateau minimization shortens a detour", [](Detail& d) {
    const CubicalGrid g{{0, 0}, 1.0, {4, 4}};
    Chain S(g, 1, unit_z_norm());
    // (0,0) -> (0,2) -> (1,2) -> (1,0) -> ... a path from (0,0) to (1,0) through a detour.
    S.add(make_cell({0, 0}, {1}), GroupElement({1}));
    S.add(make_cell({0, 1}, {1}), GroupElement({1}));
    S.add(make_cell({0, 2}, {0}), GroupElement({1}));
    S.add(make_cell({1, 1}, {1}), GroupElement({-1}));
    S.add(make_cell({1, 0}, {1}), GroupElement({-1}));
    const auto r = plateau_minimize(S);
    d << "mass " << r.input_mass << " -> " << r.mass;
    return std::abs(r.mass - 1.0) < 1e-12 && boundary(r.minimizer) == boundary(S);
  });
  run(out, cb, "P11", "affine angle energy", [](Detail& d) {
    const double kx = 1.3, ky = -0.7;
    const Field a = box_field(centered_grid(101, 0.01), [&](const Point& x) { return unit_at(kx * x[0] + ky * x[1]); });
    const double e = p_energy(a, 1.7, {});
    const double expect = std::pow(std::hypot(kx, ky), 1.7);
    d << "relative error " << std::abs(e - expect) / expect;
    return std::abs(e - expect) <= 1e-4 * expect;
  });
  run(out, cb, "P12", "descent is monotone and keeps unit length", [](Detail& d) {
    const Field f = disk_field(disk_grid(48), 1, 1.9);
    const auto r = minimize(f, 1.9);
    double worst = 0.0;
    for (const auto& v : r.field.values) worst = std::max(worst, std::abs(norm(v) - 1.0));
    bool fixed_ok = true;
    for (std::size_t i = 0; i < f.values.size(); ++i)
      if (f.fixed[i] && !(r.field.values[i] == f.values[i])) fixed_ok = false;
    d << "energy " << r.initial_energy << " -> " << r.energy;
    return r.monotone && worst < 1e-12 && fixed_ok;
  });
  run(out, cb, "P13", "dipole energy stays below 4 pi", [](Detail& d) {
    const Field flat = disk_field(disk_grid(128), 0, 1.9);
    const double h = flat.grid.h;
    const double x = -1 + (std::floor(1.3 / h) + 0.5) * h;
    const Field dm = dipole_map({{{{-x, 0.0}, 1}, {{x, 0.0}, -1}}, 0}, flat);
    double worst = 0.0;
    for (double p : {1.9, 1.95, 1.99}) worst = std::max(worst, (2 - p) * p_energy(dm, p, {}) / (4 * kPi));
    d << "largest (2-p)D_p / 4pi " << worst;
    return worst <= 1.05;
  });
  run(out, cb, "P14", "single vortex extracts to one dual node", [](Detail& d) {
    const Field f = box_field(centered_grid(16, 2.0 / 15), [](const Point& x) { return vortex(x, {0.0, 0.0}, 1); });
    const auto T = extract_Tp(f);
    Cell c;
    c.base = {7, 7, 0, 0};
    d << T.chain.coeffs().size() << " cells";
    return T.chain.coeffs().size() == 1 && T.chain.coeff(c) == GroupElement({1});
  });
  run(out, cb, "P15", "dipole round trip through extraction", [&](Detail& d) {
    const CubicalGrid g = centered_grid(129, 2.0 / 128);
    const Field flat = box_field(g);
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> pick(8, 119);
    int bad = 0;
    for (int t = 0; t < 20; ++t) {
      const std::array<int, 2> a{pick(rng), pick(rng)};
      std::array<int, 2> b{pick(rng), pick(rng)};
      if (std::abs(a[0] - b[0]) < 6 && std::abs(a[1] - b[1]) < 6) b[0] = a[0] > 60 ? a[0] - 30 : a[0] + 30;
      auto centre = [&](std::array<int, 2> c) { return Vec2{g.origin[0] + (c[0] + 0.5) * g.h, g.origin[1] + (c[1] + 0.5) * g.h}; };
      const Field f = dipole_map({{{centre(a), 1}, {centre(b), -1}}, 0}, flat);
      const auto T = extract_Tp(f);
      Cell ca, cb2;
      ca.base = {a[0], a[1], 0, 0};
      cb2.base = {b[0], b[1], 0, 0};
      if (T.chain.coeffs().size() != 2 || !(T.chain.coeff(ca) == GroupElement({1})) ||
          !(T.chain.coeff(cb2) == GroupElement({-1})))
        ++bad;
    }
    d << bad << " mismatches in 20 dipoles";
    return bad == 0;
  });
  run(out, cb, "P16", "vortex ring gives a closed chain", [](Detail& d) {
    const int n = 33;
    const double o = -0.5 * (n - 1) / 16.0;
    const Field f = box_field(CubicalGrid{{o, o, o}, 1.0 / 16, {n, n, n}}, [](const Point& x) {
      return unit_at(std::atan2(x[2] - 0.021, std::hypot(x[0], x[1]) - 0.517));
    });
    const auto T = extract_Tp(f);
    d << "mass " << mass(T.chain);
    return !T.chain.is_zero() && boundary(T.chain).is_zero();
  });
  run(out, cb, "P17", "offset averages match the mean identities", [](Detail& d) {
    Field f = box_field(centered_grid(256, 1.0 / 128), [](const Point& x) { return vortex(x, {0.0, 0.0}, 1); });
    f.p = 1.9;
    const auto s = select_grid_offset(f, 1.0 / 8, 0.5, 3);
    d << "mean errors " << s.mean_rel_error[0] << ", " << s.mean_rel_error[1] << ", " << s.mean_rel_error[2]
      << "; admissible " << s.admissible << "/" << s.samples;
    return s.admissible > 0 && s.mean_rel_error[0] < 0.05 && s.mean_rel_error[1] < 0.05 && s.mean_rel_error[2] < 1e-12;
  });
  run(out, cb, "P18", "mass bound regimes", [](Detail& d) {
    const Field f = disk_field(disk_grid(48), 1, 1.95);
    const auto m = minimize(f, 1.95);
    const auto T = extract_Tp(m.field);
    const auto hi = mass_bound_report(T, m.field, 1.95, 0.5, 0.1);
    const auto lo = mass_bound_report(T, m.field, 1.5, 0.5, 0.1);
    d << "c(1.95)=" << hi.c_rdelta << " slack " << hi.inequality.slack << "; c(1.5)=" << lo.c_rdelta;
    return hi.regime_reached && hi.inequality.ok && !lo.regime_reached;
  });
  run(out, cb, "P19", "cube lower bound on a centred vortex", [](Detail& d) {
    const Field v = box_field(centered_grid(65, 1.0 / 32), [](const Point& x) { return vortex(x, {0.003, -0.002}, 1); });
    const auto r = cube_lower_bound(v, {16, 16}, {48, 48}, 0.5, 1.9, 1.0);
    d << "lhs " << r.lhs << " rhs " << r.rhs;
    return r.ok && r.lhs > 0.0;
  });
  run(out, cb, "P20", "lambda and certificate examples", [&](Detail& d) {
    const double l = lambda_p(1.0, 2 * kPi, 2.0, 1.5);
    const auto c = lower_bound_certificate(Z.element({1}), 1.99, 2.0, 0.5, circle_norm(1.99), circle_norm(2.0),
                                           default_certificate_constant());
    d << "Lambda=" << l << " bound_p=" << c.bound_p;
    return std::abs(l - 5.0133) < 1e-4 && std::abs(c.bound_p - 596.90) < 0.01;
  });
  run(out, cb, "P21", "ball hypotheses are named", [&](Detail& d) {
    SingularityConfig cfg;
    cfg.domain = Domain::disk({0.0, 0.0}, 1.0);
    cfg.singularities = {{{0.1, 0.1}, Z.element({1})}};
    cfg.boundary_class = Z.element({1});
    try {
      ball_construction(cfg, 0.05, circle_norm(1.99));
    } catch (const ValidationError& e) {
      d << e.what();
      return std::string(e.what()).find("4 tau |hc|_p <= r") != std::string::npos;
    }
    return false;
  });
  run(out, cb, "P22", "chain JSON round trip", [](Detail& d) {
    const Field f = box_field(centered_grid(20, 0.1), [](const Point& x) { return vortex(x, {0.01, 0.02}, 1); });
    const Chain c = extract_Tp(f).chain;
    const Chain back = chain_from_json(json::parse(to_json(c).dump()));
    d << c.coeffs().size() << " cells";
    return back == c && back.grid() == c.grid();
  });
  run(out, cb, "P23", "field binary round trip", [](Detail& d) {
    const Field f = disk_field(disk_grid(24), 2, 1.8);
    const auto path = (std::filesystem::temp_directory_path() / "gammaflow_verify_field.gfld").string();
    write_field(f, path);
    const Field g = read_field(path);
    std::filesystem::remove(path);
    d << g.values.size() << " nodes";
    return g.grid == f.grid && g.values == f.values && g.fixed == f.fixed && g.cells == f.cells && g.p == f.p;
  });
  run(out, cb, "P24", "unknown config keys are rejected", [](Detail& d) {
    try {
      parse_run_config("[grid]\nnodez = 5\n");
    } catch (const ValidationError& e) {
      d << e.what();
      return true;
    }
    return false;
  });
  return out;
}

json check_report(const std::vector<CheckResult>& results) {
  json checks = json::array();
  int passed = 0;
  for (const auto& r : results) {
    checks.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    passed += r.pass ? 1 : 0;
  }
  const int failed = static_cast<int>(results.size()) - passed;
  return {{"schema_version", kSchemaVersion},
          {"checks", checks},
          {"passed", passed},
          {"failed", failed},
          {"all_pass", failed == 0}};
}

}  // namespace gammaflow
