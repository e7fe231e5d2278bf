#include "gammaflow/chains.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "gammaflow/errors.hpp"
#include "gammaflow/lp.hpp"

namespace gammaflow {

// ---------------------------------------------------------------- cells, grids

int Cell::dim() const { return std::popcount(static_cast<unsigned>(axes)); }

Cell make_cell(const std::vector<int>& base, const std::vector<int>& axes) {
  if (base.size() > kMaxAmbientDim) throw ValidationError("cell base has too many coordinates");
  Cell c;
  for (std::size_t i = 0; i < base.size(); ++i) c.base[i] = base[i];
  for (int a : axes) {
    if (a < 0 || a >= static_cast<int>(base.size())) throw ValidationError("cell axis out of range");
    if (c.has_axis(a)) throw ValidationError("repeated cell axis");
    c.axes |= static_cast<std::uint8_t>(1u << a);
  }
  return c;
}

std::string to_string(const Cell& c) {
  std::ostringstream os;
  os << "[(";
  for (int i = 0; i < kMaxAmbientDim; ++i) os << (i ? "," : "") << c.base[i];
  os << "),{";
  bool first = true;
  for (int a = 0; a < kMaxAmbientDim; ++a)
    if (c.has_axis(a)) os << (first ? "" : ",") << a, first = false;
  os << "}]";
  return os.str();
}

std::vector<std::pair<Cell, int>> cell_boundary(const Cell& c) {
  std::vector<std::pair<Cell, int>> out;
  int i = 0;
  for (int a = 0; a < kMaxAmbientDim; ++a) {
    if (!c.has_axis(a)) continue;
    const int sign = (i % 2 == 0) ? 1 : -1;
    Cell lo = c;
    lo.axes = static_cast<std::uint8_t>(c.axes & ~(1u << a));
    Cell hi = lo;
    hi.base[a] += 1;
    out.push_back({hi, sign});
    out.push_back({lo, -sign});
    ++i;
  }
  return out;
}

bool Box::contains_closed(const std::vector<double>& x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eps = 1e-12 * std::max({1.0, std::abs(lo[i]), std::abs(hi[i])});
    if (x[i] < lo[i] - eps || x[i] > hi[i] + eps) return false;
  }
  return true;
}

bool Box::contains_open(const std::vector<double>& x) const {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
  return true;
}

void CubicalGrid::validate() const {
  if (dim() < 1 || dim() > kMaxAmbientDim) throw ValidationError("grid dimension must be 1..4");
  if (origin.size() != extents.size()) throw ValidationError("grid origin and extents differ in length");
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("grid spacing must be positive");
  for (int e : extents)
    if (e < 1) throw ValidationError("grid extents must be positive");
}

bool CubicalGrid::contains(const Cell& c) const {
  for (int i = 0; i < kMaxAmbientDim; ++i) {
    if (i >= dim()) {
      if (c.base[i] != 0 || c.has_axis(i)) return false;
      continue;
    }
    if (c.base[i] < 0 || c.base[i] + (c.has_axis(i) ? 1 : 0) > extents[i] - 1) return false;
  }
  return true;
}

std::vector<double> CubicalGrid::node(const std::array<int, kMaxAmbientDim>& z) const {
  std::vector<double> x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = origin[i] + h * z[i];
  return x;
}

std::vector<double> CubicalGrid::center(const Cell& c) const {
  std::vector<double> x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = origin[i] + h * (c.base[i] + (c.has_axis(i) ? 0.5 : 0.0));
  return x;
}

CubicalGrid CubicalGrid::dual() const {
  CubicalGrid d;
  d.h = h;
  for (int i = 0; i < dim(); ++i) {
    if (extents[i] < 2) throw ValidationError("grid has no top-dimensional cells along an axis");
    d.origin.push_back(origin[i] + 0.5 * h);
    d.extents.push_back(extents[i] - 1);
  }
  return d;
}

std::vector<Cell> CubicalGrid::cells(int q) const {
  std::vector<Cell> out;
  const int n = dim();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != q) continue;
    std::array<int, kMaxAmbientDim> hi{};
    bool empty = false;
    for (int i = 0; i < n; ++i) {
      hi[i] = extents[i] - ((mask >> i) & 1u);
      if (hi[i] <= 0) empty = true;
    }
    if (empty) continue;
    Cell c;
    c.axes = static_cast<std::uint8_t>(mask);
    while (true) {
      out.push_back(c);
      int i = 0;
      for (; i < n; ++i) {
        if (++c.base[i] < hi[i]) break;
        c.base[i] = 0;
      }
      if (i == n) break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Complex Complex::inside(const CubicalGrid& g, const Box& box) {
  Complex cx{g, std::set<Cell>{}};
  for (const auto& c : g.cells(g.dim())) {
    auto lo = g.node(c.base);
    auto hi = lo;
    for (auto& v : hi) v += g.h;
    if (box.contains_closed(lo) && box.contains_closed(hi)) cx.top_cells->insert(c);
  }
  return cx;
}

Complex Complex::without(const std::vector<Cell>& removed) const {
  Complex cx = *this;
  if (!cx.top_cells) {
    auto all = grid.cells(grid.dim());
    cx.top_cells = std::set<Cell>(all.begin(), all.end());
  }
  for (const auto& c : removed) cx.top_cells->erase(c);
  return cx;
}

bool Complex::contains(const Cell& c) const {
  if (!grid.contains(c)) return false;
  if (!top_cells) return true;
  const int n = grid.dim();
  std::vector<int> free_axes;
  for (int i = 0; i < n; ++i)
    if (!c.has_axis(i)) free_axes.push_back(i);
  for (unsigned m = 0; m < (1u << free_axes.size()); ++m) {
    Cell t = c;
    t.axes = static_cast<std::uint8_t>((1u << n) - 1);
    for (std::size_t j = 0; j < free_axes.size(); ++j)
      if ((m >> j) & 1u) t.base[free_axes[j]] -= 1;
    if (top_cells->count(t)) return true;
  }
  return false;
}

std::vector<Cell> Complex::cells(int q) const {
  auto all = grid.cells(q);
  if (!top_cells) return all;
  std::vector<Cell> out;
  for (const auto& c : all)
    if (contains(c)) out.push_back(c);
  return out;
}

std::size_t Complex::size() const {
  std::size_t n = 0;
  for (int q = 0; q <= grid.dim(); ++q) n += cells(q).size();
  return n;
}

// ---------------------------------------------------------------------- chains

Chain::Chain(CubicalGrid grid, int dim, std::shared_ptr<const CostedNorm> norm, std::string norm_ref)
    : grid_(std::move(grid)), dim_(dim), norm_(std::move(norm)), norm_ref_(std::move(norm_ref)) {
  grid_.validate();
  if (!norm_) throw ValidationError("chain needs a coefficient norm");
  if (dim_ < 0 || dim_ > grid_.dim()) throw ValidationError("chain dimension out of range");
}

void Chain::add(const Cell& c, const GroupElement& g) {
  if (c.dim() != dim_) throw ValidationError("cell " + to_string(c) + " has the wrong dimension");
  if (!grid_.contains(c)) throw ValidationError("cell " + to_string(c) + " is outside the grid");
  const auto& G = group();
  if (!G.contains(g)) throw ValidationError("coefficient " + to_string(g) + " is not a reduced group element");
  auto it = coeffs_.find(c);
  if (it == coeffs_.end()) {
    if (!G.is_zero(g)) coeffs_.emplace(c, g);
    return;
  }
  it->second = G.add(it->second, g);
  if (G.is_zero(it->second)) coeffs_.erase(it);
}

GroupElement Chain::coeff(const Cell& c) const {
  auto it = coeffs_.find(c);
  return it == coeffs_.end() ? group().zero() : it->second;
}

void Chain::check_compatible(const Chain& o) const {
  if (dim_ != o.dim_) throw ValidationError("chains differ in dimension");
  if (!(grid_ == o.grid_)) throw ValidationError("chains live on different grids");
  if (!(group() == o.group())) throw ValidationError("chains have different coefficient groups");
}

Chain Chain::operator+(const Chain& o) const {
  check_compatible(o);
  Chain r = *this;
  for (const auto& [c, g] : o.coeffs_) r.add(c, g);
  return r;
}

Chain Chain::operator-(const Chain& o) const {
  check_compatible(o);
  Chain r = *this;
  for (const auto& [c, g] : o.coeffs_) r.add(c, group().neg(g));
  return r;
}

Chain Chain::operator-() const {
  Chain r = empty_like(dim_);
  for (const auto& [c, g] : coeffs_) r.coeffs_.emplace(c, group().neg(g));
  return r;
}

Chain boundary(const Chain& S) {
  if (S.dim() == 0) throw ValidationError("no boundary of 0-chain");
  Chain out = S.empty_like(S.dim() - 1);
  const auto& G = S.group();
  for (const auto& [c, g] : S.coeffs())
    for (const auto& [f, s] : cell_boundary(c)) out.add(f, G.scale(s, g));
  return out;
}

double mass(const Chain& S, const std::optional<Box>& region) {
  const double scale = std::pow(S.grid().h, S.dim());
  double m = 0.0;
  for (const auto& [c, g] : S.coeffs())
    if (!region || region->contains_closed(S.grid().center(c))) m += S.norm()(g);
  return m * scale;
}

Chain restrict(const Chain& S, const Box& region) {
  Chain out = S.empty_like(S.dim());
  for (const auto& [c, g] : S.coeffs())
    if (region.contains_closed(S.grid().center(c))) out.add(c, g);
  return out;
}

std::string to_string(FlatMethod m) {
  switch (m) {
    case FlatMethod::automatic: return "automatic";
    case FlatMethod::lp: return "lp";
    case FlatMethod::flow: return "flow";
    case FlatMethod::exhaustive: return "exhaustive";
  }
  return "?";
}

// ------------------------------------------------------------ problem assembly

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kExhaustiveLimit = 200;

struct Incidence {
  std::vector<Cell> lo, hi;
  std::map<Cell, int> lo_index;
  std::vector<std::vector<std::pair<int, int>>> bd;  // per hi cell: (lo index, sign)
};

Incidence build_incidence(const Complex& cx, int q) {
  Incidence inc;
  inc.lo = cx.cells(q);
  for (std::size_t i = 0; i < inc.lo.size(); ++i) inc.lo_index[inc.lo[i]] = static_cast<int>(i);
  if (q + 1 <= cx.grid.dim()) inc.hi = cx.cells(q + 1);
  inc.bd.resize(inc.hi.size());
  for (std::size_t d = 0; d < inc.hi.size(); ++d)
    for (const auto& [f, s] : cell_boundary(inc.hi[d])) inc.bd[d].push_back({inc.lo_index.at(f), s});
  return inc;
}

std::vector<GroupElement> chain_vector(const Chain& S, const Incidence& inc) {
  std::vector<GroupElement> v(inc.lo.size(), S.group().zero());
  for (const auto& [c, g] : S.coeffs()) {
    auto it = inc.lo_index.find(c);
    if (it == inc.lo_index.end()) throw ValidationError("chain cell " + to_string(c) + " is not in the complex");
    v[it->second] = g;
  }
  return v;
}

// One free direction of a weighted-l1 problem:
//   min sum_c wP_c |P_c| + sum_d wQ_d |Q_d|  s.t.  S = P + dQ,
// with wP_c = +inf meaning P_c must vanish.
struct ScalarProblem {
  std::vector<std::int64_t> S;
  const std::vector<std::vector<std::pair<int, int>>>* bd = nullptr;
  std::vector<double> wP, wQ;
};

struct ScalarSolution {
  bool feasible = false;
  std::vector<std::int64_t> P, Q;
  double value = 0.0;
  double relaxed = 0.0;
  bool integral = true;
};

bool is_graph(const ScalarProblem& pr) {
  for (const auto& b : *pr.bd)
    if (b.size() != 2 || b[0].second + b[1].second != 0) return false;
  return true;
}

double objective(const ScalarProblem& pr, const std::vector<std::int64_t>& P, const std::vector<std::int64_t>& Q) {
  double v = 0.0;
  for (std::size_t c = 0; c < P.size(); ++c)
    if (P[c]) v += pr.wP[c] * static_cast<double>(std::llabs(P[c]));
  for (std::size_t d = 0; d < Q.size(); ++d)
    if (Q[d]) v += pr.wQ[d] * static_cast<double>(std::llabs(Q[d]));
  return v;
}

std::vector<std::int64_t> residual(const ScalarProblem& pr, const std::vector<std::int64_t>& Q) {
  std::vector<std::int64_t> P = pr.S;
  for (std::size_t d = 0; d < Q.size(); ++d)
    for (auto [c, s] : (*pr.bd)[d]) P[c] -= s * Q[d];
  return P;
}

ScalarSolution solve_by_flow(const ScalarProblem& pr) {
  const int n = static_cast<int>(pr.S.size());
  const int Z = n;
  std::vector<FlowArc> arcs;
  for (const auto& b : *pr.bd) {
    const int head = b[0].second > 0 ? b[0].first : b[1].first;
    const int tail = b[0].second > 0 ? b[1].first : b[0].first;
    const std::size_t d = arcs.size() / 2;
    arcs.push_back({tail, head, pr.wQ[d]});
    arcs.push_back({head, tail, pr.wQ[d]});
  }
  const std::size_t nq = arcs.size() / 2;
  std::vector<int> z_of(n, -1);
  for (int c = 0; c < n; ++c) {
    if (!std::isfinite(pr.wP[c])) continue;
    z_of[c] = static_cast<int>(arcs.size());
    arcs.push_back({Z, c, pr.wP[c]});
    arcs.push_back({c, Z, pr.wP[c]});
  }
  std::vector<std::int64_t> dem(n + 1, 0);
  std::int64_t total = 0;
  for (int c = 0; c < n; ++c) dem[c] = pr.S[c], total += pr.S[c];
  dem[Z] = -total;
  auto f = min_cost_flow(n + 1, arcs, dem);
  ScalarSolution sol;
  if (!f.feasible) return sol;
  sol.feasible = true;
  sol.Q.assign(nq, 0);
  for (std::size_t d = 0; d < nq; ++d) sol.Q[d] = f.flow[2 * d] - f.flow[2 * d + 1];
  sol.P = residual(pr, sol.Q);
  sol.value = objective(pr, sol.P, sol.Q);
  sol.relaxed = sol.value;
  return sol;
}

ScalarSolution solve_by_lp(const ScalarProblem& pr) {
  const int n = static_cast<int>(pr.S.size());
  const std::size_t m = pr.bd->size();
  LinearProgram lp;
  lp.rows = n;
  for (int c = 0; c < n; ++c) lp.rhs.push_back(static_cast<double>(pr.S[c]));
  std::vector<int> basis(n, -1);
  bool all_p = true;
  for (int c = 0; c < n; ++c) {
    if (!std::isfinite(pr.wP[c])) {
      all_p = false;
      continue;
    }
    const int plus = lp.add_column({{c, 1.0}}, pr.wP[c]);
    const int minus = lp.add_column({{c, -1.0}}, pr.wP[c]);
    basis[c] = pr.S[c] >= 0 ? plus : minus;
  }
  const int q0 = static_cast<int>(lp.columns.size());
  for (std::size_t d = 0; d < m; ++d) {
    std::vector<std::pair<int, double>> col, neg;
    for (auto [c, s] : (*pr.bd)[d]) col.push_back({c, static_cast<double>(s)}), neg.push_back({c, -1.0 * s});
    lp.add_column(col, pr.wQ[d]);
    lp.add_column(neg, pr.wQ[d]);
  }
  auto r = solve_lp(lp, all_p ? &basis : nullptr);
  ScalarSolution sol;
  if (r.status == LpStatus::infeasible) return sol;
  if (r.status != LpStatus::optimal) throw NumericalError("flat norm LP did not reach an optimum");
  sol.feasible = true;
  sol.relaxed = r.value;
  sol.Q.assign(m, 0);
  for (std::size_t d = 0; d < m; ++d)
    sol.Q[d] = std::llround(r.x[q0 + 2 * d] - r.x[q0 + 2 * d + 1]);
  sol.P = residual(pr, sol.Q);
  bool forced_ok = true;
  for (int c = 0; c < n; ++c)
    if (!std::isfinite(pr.wP[c]) && sol.P[c] != 0) forced_ok = false;
  if (!forced_ok) {
    sol.integral = false;
    sol.value = sol.relaxed;
    return sol;
  }
  sol.value = objective(pr, sol.P, sol.Q);
  sol.integral = std::abs(sol.value - sol.relaxed) <= 1e-9 * std::max(1.0, std::abs(sol.relaxed));
  return sol;
}

ScalarSolution solve_scalar(const ScalarProblem& pr, FlatMethod method) {
  const bool graph = is_graph(pr);
  if (method == FlatMethod::flow && !graph) throw ValidationError("flow method needs a 0-dimensional problem");
  if (method == FlatMethod::flow || (method == FlatMethod::automatic && graph)) return solve_by_flow(pr);
  return solve_by_lp(pr);
}

// Group-valued branch and bound for torsion groups and non-l1 norms.
struct GroupProblem {
  const CostedNorm* norm = nullptr;
  std::vector<GroupElement> S;
  const std::vector<std::vector<std::pair<int, int>>>* bd = nullptr;
  std::vector<double> sP, sQ;  // cost scales; sP = inf forces P = 0
  std::vector<GroupElement> candidates;
};

struct GroupSolution {
  bool feasible = false;
  std::vector<GroupElement> P, Q;
  double value = 0.0;
};

std::vector<GroupElement> candidate_elements(const CoefficientGroup& G, int radius) {
  if (G.is_finite()) return G.enumerate();
  std::vector<GroupElement> out;
  std::vector<std::int64_t> lo(G.rank()), hi(G.rank());
  for (int i = 0; i < G.free_rank(); ++i) lo[i] = -radius, hi[i] = radius;
  for (std::size_t i = 0; i < G.torsion_orders().size(); ++i)
    hi[G.free_rank() + i] = G.torsion_orders()[i] - 1;
  std::vector<std::int64_t> c = lo;
  while (true) {
    out.push_back(G.element(c));
    std::size_t i = 0;
    for (; i < c.size(); ++i) {
      if (++c[i] <= hi[i]) break;
      c[i] = lo[i];
    }
    if (i == c.size()) break;
  }
  // Zero first so that the search starts from Q = 0.
  std::stable_partition(out.begin(), out.end(), [&](const GroupElement& g) { return G.is_zero(g); });
  return out;
}

GroupSolution solve_exhaustive(const GroupProblem& pr) {
  const auto& G = pr.norm->group();
  const std::size_t n = pr.S.size(), m = pr.bd->size();
  if (n + m > kExhaustiveLimit) throw ValidationError("exhaustive path too large");
  std::vector<int> last(n, -1);
  for (std::size_t d = 0; d < m; ++d)
    for (auto [c, s] : (*pr.bd)[d]) last[c] = std::max(last[c], static_cast<int>(d));
  std::vector<std::vector<int>> finalize(m + 1);
  for (std::size_t c = 0; c < n; ++c) finalize[last[c] + 1].push_back(static_cast<int>(c));

  std::vector<GroupElement> dq(n, G.zero()), Q(m, G.zero()), bestQ;
  double best = kInf;
  auto settle = [&](std::size_t stage, double cost) {
    for (int c : finalize[stage]) {
      auto P = G.sub(pr.S[c], dq[c]);
      if (G.is_zero(P)) continue;
      if (!std::isfinite(pr.sP[c])) return kInf;
      cost += pr.sP[c] * (*pr.norm)(P);
    }
    return cost;
  };
  std::function<void(std::size_t, double)> dfs = [&](std::size_t d, double cost) {
    if (cost >= best - 1e-12) return;
    if (d == m) {
      best = cost;
      bestQ = Q;
      return;
    }
    for (const auto& g : pr.candidates) {
      const double add = G.is_zero(g) ? 0.0 : pr.sQ[d] * (*pr.norm)(g);
      if (cost + add >= best - 1e-12) continue;
      for (auto [c, s] : (*pr.bd)[d]) dq[c] = G.add(dq[c], G.scale(s, g));
      Q[d] = g;
      const double next = settle(d + 1, cost + add);
      if (std::isfinite(next)) dfs(d + 1, next);
      for (auto [c, s] : (*pr.bd)[d]) dq[c] = G.sub(dq[c], G.scale(s, g));
      Q[d] = G.zero();
    }
  };
  const double start = settle(0, 0.0);
  if (std::isfinite(start)) dfs(0, start);
  GroupSolution sol;
  if (!std::isfinite(best)) return sol;
  sol.feasible = true;
  sol.value = best;
  sol.Q = bestQ;
  sol.P = pr.S;
  for (std::size_t d = 0; d < m; ++d)
    for (auto [c, s] : (*pr.bd)[d]) sol.P[c] = G.sub(sol.P[c], G.scale(s, bestQ[d]));
  return sol;
}

int search_radius(const std::vector<GroupElement>& S, const CoefficientGroup& G) {
  std::int64_t r = 1;
  for (const auto& g : S)
    for (int i = 0; i < G.free_rank(); ++i) r += std::llabs(g[i]);
  return static_cast<int>(std::min<std::int64_t>(r, 8));
}

// Shared driver: per-direction scalar problems for weighted-l1 norms, group
// branch and bound otherwise. Returns chains P (dim q) and Q (dim q+1) with
// S = P + dQ.
struct Solved {
  bool feasible = false;
  std::vector<GroupElement> P, Q;
  double value = 0.0, relaxed = 0.0;
  bool integral = true;
  std::string method;
};

Solved solve_general(const CostedNorm& norm, const std::vector<GroupElement>& S, const Incidence& inc,
                     const std::vector<double>& sP, const std::vector<double>& sQ, FlatMethod method) {
  const auto& G = norm.group();
  std::vector<double> w;
  const bool l1 = G.torsion_orders().empty() && norm.is_weighted_l1(&w);
  Solved out;
  if (l1 && method != FlatMethod::exhaustive) {
    out.feasible = true;
    out.P.assign(S.size(), G.zero());
    out.Q.assign(inc.hi.size(), G.zero());
    std::vector<std::vector<std::int64_t>> Pc(S.size(), std::vector<std::int64_t>(G.rank(), 0));
    std::vector<std::vector<std::int64_t>> Qc(inc.hi.size(), std::vector<std::int64_t>(G.rank(), 0));
    bool any_flow = false, any_lp = false;
    for (std::size_t i = 0; i < G.rank(); ++i) {
      ScalarProblem pr;
      pr.bd = &inc.bd;
      for (const auto& g : S) pr.S.push_back(g[i]);
      for (double s : sP) pr.wP.push_back(w[i] * s);
      for (double s : sQ) pr.wQ.push_back(w[i] * s);
      const bool graph = is_graph(pr);
      const bool use_flow = method == FlatMethod::flow || (method == FlatMethod::automatic && graph);
      (use_flow ? any_flow : any_lp) = true;
      auto sol = solve_scalar(pr, method);
      if (!sol.feasible) return Solved{};
      out.value += sol.value;
      out.relaxed += sol.relaxed;
      out.integral = out.integral && sol.integral;
      for (std::size_t c = 0; c < S.size(); ++c) Pc[c][i] = sol.P[c];
      for (std::size_t d = 0; d < inc.hi.size(); ++d) Qc[d][i] = sol.Q[d];
    }
    for (std::size_t c = 0; c < S.size(); ++c) out.P[c] = G.element(Pc[c]);
    for (std::size_t d = 0; d < inc.hi.size(); ++d) out.Q[d] = G.element(Qc[d]);
    out.method = any_lp ? (any_flow ? "lp+flow" : "lp") : "flow";
    return out;
  }
  if (method == FlatMethod::lp || method == FlatMethod::flow)
    throw ValidationError("the " + to_string(method) +
                          " method needs free coefficients with a weighted l1 norm; use exhaustive");
  GroupProblem pr;
  pr.norm = &norm;
  pr.S = S;
  pr.bd = &inc.bd;
  pr.sP = sP;
  pr.sQ = sQ;
  pr.candidates = candidate_elements(G, search_radius(S, G));
  auto sol = solve_exhaustive(pr);
  if (!sol.feasible) return Solved{};
  out.feasible = true;
  out.P = sol.P;
  out.Q = sol.Q;
  out.value = out.relaxed = sol.value;
  out.method = "exhaustive";
  return out;
}

Chain to_chain(const Chain& like, int dim, const std::vector<Cell>& cells, const std::vector<GroupElement>& v) {
  Chain c = like.empty_like(dim);
  for (std::size_t i = 0; i < cells.size(); ++i) c.add(cells[i], v[i]);
  return c;
}

Complex complex_for(const Chain& S, const std::optional<Box>& within) {
  return within ? Complex::inside(S.grid(), *within) : Complex::full(S.grid());
}

}  // namespace

// ------------------------------------------------------------------ flat norm

FlatDecomposition flat_norm(const Chain& S, const FlatOptions& opts) {
  const Complex cx = opts.complex ? *opts.complex : Complex::full(S.grid());
  if (!(cx.grid == S.grid())) throw ValidationError("complex and chain live on different grids");
  const int q = S.dim();
  const double h = S.grid().h;
  auto inc = build_incidence(cx, q);
  auto Sv = chain_vector(S, inc);
  auto scale = [&](const Cell& c, int dim) {
    if (opts.relative_to && !opts.relative_to->contains_open(S.grid().center(c))) return 0.0;
    return std::pow(h, dim);
  };
  std::vector<double> sP, sQ;
  for (const auto& c : inc.lo) sP.push_back(scale(c, q));
  for (const auto& c : inc.hi) sQ.push_back(scale(c, q + 1));
  auto sol = solve_general(S.norm(), Sv, inc, sP, sQ, opts.method);
  if (!sol.feasible) throw NumericalError("flat norm problem reported infeasible");
  FlatDecomposition out{to_chain(S, q, inc.lo, sol.P),
                        q + 1 <= S.grid().dim() ? to_chain(S, q + 1, inc.hi, sol.Q) : S.empty_like(q),
                        sol.value, sol.relaxed, sol.integral, sol.method};
  return out;
}

// ------------------------------------------------------------------ cobordism

Cobordism cobordant(const Chain& S1, const Chain& S2, const std::optional<Box>& within) {
  if (S1.dim() != S2.dim()) throw ValidationError("dimension mismatch");
  const Chain D = S1 - S2;
  const int q = D.dim();
  const auto& G = D.group();
  if (q == D.grid().dim()) {
    Cobordism r;
    r.cobordant = D.is_zero();
    if (r.cobordant) r.witness = D.empty_like(q);
    return r;
  }
  const Complex cx = complex_for(D, within);
  auto inc = build_incidence(cx, q);
  auto Dv = chain_vector(D, inc);
  Cobordism res;
  if (D.is_zero()) {
    res.cobordant = true;
    res.witness = D.empty_like(q + 1);
    return res;
  }
  if (q == 0) {
    // Spanning forest; each component's total must vanish.
    const std::size_t n = inc.lo.size();
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, edge)
    for (std::size_t d = 0; d < inc.hi.size(); ++d) {
      const int a = inc.bd[d][0].first, b = inc.bd[d][1].first;
      adj[a].push_back({b, static_cast<int>(d)});
      adj[b].push_back({a, static_cast<int>(d)});
    }
    std::vector<int> parent_edge(n, -2), order;
    std::vector<int> parent(n, -1);
    std::vector<GroupElement> R(inc.hi.size(), G.zero());
    for (std::size_t root = 0; root < n; ++root) {
      if (parent_edge[root] != -2) continue;
      parent_edge[root] = -1;
      std::vector<int> comp{static_cast<int>(root)};
      for (std::size_t k = 0; k < comp.size(); ++k)
        for (auto [v, e] : adj[comp[k]])
          if (parent_edge[v] == -2) parent_edge[v] = e, parent[v] = comp[k], comp.push_back(v);
      std::vector<GroupElement> sub(n);
      for (int v : comp) sub[v] = Dv[v];
      for (std::size_t k = comp.size(); k-- > 1;) {
        const int v = comp[k], e = parent_edge[v];
        // Orientation: +1 entry of the edge boundary is its head.
        const int head = inc.bd[e][0].second > 0 ? inc.bd[e][0].first : inc.bd[e][1].first;
        R[e] = head == v ? sub[v] : G.neg(sub[v]);
        sub[parent[v]] = G.add(sub[parent[v]], sub[v]);
      }
      if (!G.is_zero(sub[root])) return res;
    }
    res.cobordant = true;
    res.witness = to_chain(D, 1, inc.hi, R);
    return res;
  }
  std::vector<double> sP(inc.lo.size(), 1.0), sQ(inc.hi.size(), 0.0);
  if (G.torsion_orders().empty()) {
    // Cobordism is algebraic; unit weights per direction suffice.
    CostTable unit;
    unit.group = G;
    for (std::size_t i = 0; i < G.rank(); ++i) {
      unit.entries.push_back({G.unit(i), 1.0});
      unit.entries.push_back({G.neg(G.unit(i)), 1.0});
    }
    CostedNorm l1(unit, 1.0, 1);
    auto sol = solve_general(l1, Dv, inc, sP, sQ, FlatMethod::lp);
    if (sol.feasible && sol.integral && sol.value == 0.0) {
      res.cobordant = true;
      res.witness = to_chain(D, q + 1, inc.hi, sol.Q);
    }
    return res;
  }
  std::fill(sP.begin(), sP.end(), kInf);
  auto sol = solve_general(D.norm(), Dv, inc, sP, sQ, FlatMethod::exhaustive);
  if (sol.feasible) {
    res.cobordant = true;
    res.witness = to_chain(D, q + 1, inc.hi, sol.Q);
  }
  return res;
}

std::optional<Chain> fill_small_cycle(const Chain& P, const std::optional<Complex>& complex) {
  if (P.dim() > 0 && !boundary(P).is_zero()) throw ValidationError("cycle has nonzero boundary");
  const int q = P.dim();
  if (P.is_zero()) return q + 1 <= P.grid().dim() ? P.empty_like(q + 1) : P.empty_like(q);
  if (q == P.grid().dim()) return std::nullopt;
  const Complex cx = complex ? *complex : Complex::full(P.grid());
  auto inc = build_incidence(cx, q);
  auto Pv = chain_vector(P, inc);
  std::vector<double> sP(inc.lo.size(), kInf), sQ(inc.hi.size(), std::pow(P.grid().h, q + 1));
  auto sol = solve_general(P.norm(), Pv, inc, sP, sQ, FlatMethod::automatic);
  if (!sol.feasible) return std::nullopt;
  if (!sol.integral) throw NumericalError("filling LP has no integral optimum at the rounded point");
  return to_chain(P, q + 1, inc.hi, sol.Q);
}

PlateauResult plateau_minimize(const Chain& S0, const std::optional<Box>& within, FlatMethod method) {
  const int q = S0.dim();
  PlateauResult out{S0, S0.empty_like(std::min(q + 1, S0.grid().dim())), mass(S0), mass(S0), true, "trivial"};
  if (q == S0.grid().dim() || S0.is_zero()) return out;
  const Complex cx = complex_for(S0, within);
  auto inc = build_incidence(cx, q);
  auto Sv = chain_vector(S0, inc);
  std::vector<double> sP(inc.lo.size(), std::pow(S0.grid().h, q)), sQ(inc.hi.size(), 0.0);
  auto sol = solve_general(S0.norm(), Sv, inc, sP, sQ, method);
  if (!sol.feasible) throw NumericalError("plateau problem reported infeasible");
  out.minimizer = to_chain(S0, q, inc.lo, sol.P);
  const auto& G = S0.group();
  std::vector<GroupElement> R;
  for (const auto& g : sol.Q) R.push_back(G.neg(g));
  out.witness = to_chain(S0, q + 1, inc.hi, R);
  out.mass = mass(out.minimizer);
  out.integral = sol.integral;
  out.method = sol.method;
  return out;
}

// ---------------------------------------------------------------- deformation

namespace {

std::array<int, kMaxAmbientDim> nearest_node(const CubicalGrid& g, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != g.dim()) throw ValidationError("point dimension does not match the grid");
  std::array<int, kMaxAmbientDim> z{};
  for (int i = 0; i < g.dim(); ++i) {
    const long r = std::lround((x[i] - g.origin[i]) / g.h);
    z[i] = static_cast<int>(std::clamp<long>(r, 0, g.extents[i] - 1));
  }
  return z;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double dist_to_segment(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b) {
  double ab2 = 0.0, t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab2 += (b[i] - a[i]) * (b[i] - a[i]);
    t += (x[i] - a[i]) * (b[i] - a[i]);
  }
  t = ab2 > 0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] + t * (b[i] - a[i]);
  return dist(x, p);
}

void finish_report(DeformReport& r, const CubicalGrid& grid) {
  r.output_mass = mass(r.chain);
  r.mass_ratio = r.input_mass > 0 ? r.output_mass / r.input_mass : 0.0;
  r.c_def = 2.0 * grid.dim();
  r.displacement_bound = 2.0 * grid.dim() * grid.h;
  r.ok = r.output_mass <= r.c_def * (r.input_mass + r.input_boundary_mass) + 1e-12 &&
         r.max_displacement <= r.displacement_bound + 1e-12;
}

}  // namespace

DeformReport deform_to_grid(const std::vector<WeightedPoint>& points, const CubicalGrid& grid,
                            std::shared_ptr<const CostedNorm> norm, const std::string& norm_ref) {
  DeformReport r{Chain(grid, 0, norm, norm_ref)};
  for (const auto& pt : points) {
    auto z = nearest_node(grid, pt.x);
    Cell c;
    c.base = z;
    r.chain.add(c, pt.coeff);
    r.input_mass += (*norm)(pt.coeff);
    r.max_displacement = std::max(r.max_displacement, dist(pt.x, grid.node(z)));
  }
  finish_report(r, grid);
  return r;
}

DeformReport deform_to_grid(const std::vector<WeightedSegment>& segments, const CubicalGrid& grid,
                            std::shared_ptr<const CostedNorm> norm, const std::string& norm_ref) {
  if (grid.dim() > 3) throw ValidationError("deformation supports ambient dimension at most 3");
  DeformReport r{Chain(grid, 1, norm, norm_ref)};
  const auto& G = norm->group();
  std::map<std::vector<double>, GroupElement> bd;
  for (const auto& s : segments) {
    r.input_mass += (*norm)(s.coeff) * dist(s.a, s.b);
    auto add_bd = [&](const std::vector<double>& x, const GroupElement& g) {
      auto [it, fresh] = bd.emplace(x, g);
      if (!fresh) it->second = G.add(it->second, g);
    };
    add_bd(s.b, s.coeff);
    add_bd(s.a, G.neg(s.coeff));
    auto cur = nearest_node(grid, s.a);
    const auto target = nearest_node(grid, s.b);
    r.max_displacement = std::max(r.max_displacement, dist(grid.node(cur), s.a));
    while (cur != target) {
      int best_axis = -1;
      double best_d = kInf;
      for (int i = 0; i < grid.dim(); ++i) {
        if (cur[i] == target[i]) continue;
        auto next = cur;
        next[i] += target[i] > cur[i] ? 1 : -1;
        const double d = dist_to_segment(grid.node(next), s.a, s.b);
        if (d < best_d - 1e-12) best_d = d, best_axis = i;
      }
      const int step = target[best_axis] > cur[best_axis] ? 1 : -1;
      Cell e;
      e.base = cur;
      e.axes = static_cast<std::uint8_t>(1u << best_axis);
      if (step < 0) e.base[best_axis] -= 1;
      r.chain.add(e, step > 0 ? s.coeff : G.neg(s.coeff));
      cur[best_axis] += step;
      r.max_displacement = std::max(r.max_displacement, best_d);
    }
  }
  for (const auto& [x, g] : bd)
    if (!G.is_zero(g)) r.input_boundary_mass += (*norm)(g);
  finish_report(r, grid);
  return r;
}

}  // namespace gammaflow
