#include "gammaflow/coeffgroup.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

#include "gammaflow/errors.hpp"

namespace gammaflow {

std::string to_string(const GroupElement& g) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << g[i];
  os << ')';
  return os.str();
}

CoefficientGroup::CoefficientGroup(int free_rank, std::vector<std::int64_t> torsion_orders)
    : free_rank_(free_rank), torsion_(std::move(torsion_orders)) {
  if (free_rank_ < 0) throw ValidationError("free rank must be non-negative");
  for (auto q : torsion_)
    if (q < 2) throw ValidationError("torsion orders must be >= 2");
}

GroupElement CoefficientGroup::zero() const {
  return GroupElement(std::vector<std::int64_t>(rank(), 0));
}

GroupElement CoefficientGroup::element(std::vector<std::int64_t> c) const {
  if (c.size() != rank())
    throw ValidationError("element has " + std::to_string(c.size()) + " coordinates, group rank is " +
                          std::to_string(rank()));
  for (std::size_t i = 0; i < torsion_.size(); ++i) {
    auto& x = c[free_rank_ + i];
    x %= torsion_[i];
    if (x < 0) x += torsion_[i];
  }
  return GroupElement(std::move(c));
}

GroupElement CoefficientGroup::unit(std::size_t axis) const {
  std::vector<std::int64_t> c(rank(), 0);
  c.at(axis) = 1;
  return GroupElement(std::move(c));
}

GroupElement CoefficientGroup::add(const GroupElement& a, const GroupElement& b) const {
  std::vector<std::int64_t> c(rank());
  for (std::size_t i = 0; i < rank(); ++i) c[i] = a[i] + b[i];
  return element(std::move(c));
}

GroupElement CoefficientGroup::sub(const GroupElement& a, const GroupElement& b) const {
  std::vector<std::int64_t> c(rank());
  for (std::size_t i = 0; i < rank(); ++i) c[i] = a[i] - b[i];
  return element(std::move(c));
}

GroupElement CoefficientGroup::neg(const GroupElement& a) const {
  std::vector<std::int64_t> c(rank());
  for (std::size_t i = 0; i < rank(); ++i) c[i] = -a[i];
  return element(std::move(c));
}

GroupElement CoefficientGroup::scale(std::int64_t m, const GroupElement& a) const {
  std::vector<std::int64_t> c(rank());
  for (std::size_t i = 0; i < rank(); ++i) c[i] = m * a[i];
  return element(std::move(c));
}

bool CoefficientGroup::is_zero(const GroupElement& a) const {
  return std::all_of(a.coords().begin(), a.coords().end(), [](auto x) { return x == 0; });
}

bool CoefficientGroup::contains(const GroupElement& a) const {
  if (a.size() != rank()) return false;
  for (std::size_t i = 0; i < torsion_.size(); ++i) {
    auto x = a[free_rank_ + i];
    if (x < 0 || x >= torsion_[i]) return false;
  }
  return true;
}

std::vector<GroupElement> CoefficientGroup::enumerate() const {
  if (!is_finite()) throw ValidationError("cannot enumerate an infinite group");
  std::vector<GroupElement> out;
  std::vector<std::int64_t> c(rank(), 0);
  while (true) {
    out.emplace_back(c);
    std::size_t i = rank();
    while (i > 0) {
      --i;
      if (++c[i] < torsion_[i]) break;
      c[i] = 0;
      if (i == 0) return out;
    }
    if (rank() == 0) return out;
  }
}

namespace {

GroupElement multiple_of(const CoefficientGroup& G, const GroupElement& e, std::int64_t m) {
  return G.scale(m, e);
}

// Smallest m >= 2 with m e = g, if any. Free part decides m when nonzero.
std::optional<std::int64_t> multiplier(const CoefficientGroup& G, const GroupElement& e,
                                       const GroupElement& g) {
  const int a = G.free_rank();
  for (int i = 0; i < a; ++i) {
    if (e[i] == 0) continue;
    if (g[i] % e[i] != 0) return std::nullopt;
    std::int64_t m = g[i] / e[i];
    if (m < 2 && m > -2) return std::nullopt;
    if (m < 0) return std::nullopt;
    if (multiple_of(G, e, m) == g) return m;
    return std::nullopt;
  }
  // torsion-only element
  std::int64_t order = 1;
  for (auto q : G.torsion_orders()) order = std::lcm(order, q);
  if (G.is_zero(e)) return std::nullopt;
  for (std::int64_t m = 2; m < order; ++m)
    if (multiple_of(G, e, m) == g) return m;
  return std::nullopt;
}

// Membership of sigma in the subgroup generated by `gens`, via an integer
// echelon form of the generators together with the torsion relations.
bool in_subgroup(const CoefficientGroup& G, const std::vector<GroupElement>& gens,
                 const GroupElement& sigma) {
  const std::size_t n = G.rank();
  std::vector<std::vector<std::int64_t>> rows;
  for (const auto& g : gens) rows.push_back(g.coords());
  for (std::size_t i = 0; i < G.torsion_orders().size(); ++i) {
    std::vector<std::int64_t> r(n, 0);
    r[G.free_rank() + i] = G.torsion_orders()[i];
    rows.push_back(r);
  }
  std::vector<std::pair<std::size_t, std::vector<std::int64_t>>> pivots;
  std::size_t top = 0;
  for (std::size_t c = 0; c < n && top < rows.size(); ++c) {
    while (true) {
      std::size_t best = rows.size();
      for (std::size_t r = top; r < rows.size(); ++r)
        if (rows[r][c] != 0 && (best == rows.size() || std::llabs(rows[r][c]) < std::llabs(rows[best][c])))
          best = r;
      if (best == rows.size()) break;
      std::swap(rows[top], rows[best]);
      bool done = true;
      for (std::size_t r = top + 1; r < rows.size(); ++r) {
        if (rows[r][c] == 0) continue;
        std::int64_t f = rows[r][c] / rows[top][c];
        for (std::size_t j = 0; j < n; ++j) rows[r][j] -= f * rows[top][j];
        if (rows[r][c] != 0) done = false;
      }
      if (done) {
        pivots.emplace_back(c, rows[top]);
        ++top;
        break;
      }
    }
  }
  std::vector<std::int64_t> s = sigma.coords();
  for (const auto& [c, row] : pivots) {
    if (s[c] % row[c] != 0) return false;
    std::int64_t f = s[c] / row[c];
    for (std::size_t j = 0; j < n; ++j) s[j] -= f * row[j];
  }
  return std::all_of(s.begin(), s.end(), [](auto x) { return x == 0; });
}

struct Edge {
  GroupElement step;
  double cost;
};

bool lex_less(const std::vector<GroupElement>& a, const std::vector<GroupElement>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Decomposition dijkstra(const CoefficientGroup& G, const std::vector<Edge>& edges, const GroupElement& target) {
  struct Node {
    double dist;
    std::vector<GroupElement> list;
    bool done = false;
  };
  std::map<GroupElement, Node> nodes;
  using Item = std::pair<double, GroupElement>;
  auto cmp = [](const Item& x, const Item& y) { return x.first > y.first || (x.first == y.first && y.second < x.second); };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> pq(cmp);
  nodes[G.zero()] = Node{0.0, {}, false};
  pq.emplace(0.0, G.zero());
  std::size_t popped = 0;
  constexpr std::size_t kMaxStates = 4'000'000;
  while (!pq.empty()) {
    auto [d, g] = pq.top();
    pq.pop();
    auto& node = nodes[g];
    if (node.done || d > node.dist) continue;
    node.done = true;
    if (g == target) return Decomposition{node.dist, node.list};
    if (++popped > kMaxStates) throw NumericalError("decomposition search exceeded state budget");
    const auto base_list = node.list;
    const double base = node.dist;
    for (const auto& e : edges) {
      GroupElement h = G.add(g, e.step);
      double nd = base + e.cost;
      auto it = nodes.find(h);
      std::vector<GroupElement> cand = base_list;
      cand.insert(std::upper_bound(cand.begin(), cand.end(), e.step), e.step);
      if (it == nodes.end()) {
        nodes.emplace(h, Node{nd, std::move(cand), false});
        pq.emplace(nd, h);
        continue;
      }
      auto& hn = it->second;
      if (hn.done) continue;
      const double tol = 1e-12 * std::max(1.0, std::abs(nd));
      if (nd < hn.dist - tol) {
        hn.dist = nd;
        hn.list = std::move(cand);
        pq.emplace(nd, h);
      } else if (std::abs(nd - hn.dist) <= tol && lex_less(cand, hn.list)) {
        hn.list = std::move(cand);
      }
    }
  }
  throw ValidationError("unreachable element " + to_string(target));
}

}  // namespace

std::optional<double> CostTable::cost(const GroupElement& g) const {
  for (const auto& [e, c] : entries)
    if (e == g) return c;
  if (extension != CostExtension::power_law || group.is_zero(g)) return std::nullopt;
  std::optional<double> best;
  for (const auto& [e, c] : entries) {
    auto m = multiplier(group, e, g);
    if (!m) continue;
    double v = c * std::pow(static_cast<double>(*m), exponent);
    if (!best || v < *best) best = v;
  }
  return best;
}

void CostTable::validate() const {
  if (extension == CostExtension::power_law && !(exponent > 0.0))
    throw ValidationError("power_law extension needs a positive exponent");
  for (const auto& [e, c] : entries) {
    if (!group.contains(e)) throw ValidationError("cost entry " + to_string(e) + " is not a reduced group element");
    if (group.is_zero(e)) continue;
    if (!(c > 0.0) || !std::isfinite(c))
      throw ValidationError("cost of " + to_string(e) + " must be positive, got " + std::to_string(c));
    auto neg = cost(group.neg(e));
    if (!neg) throw ValidationError("cost table is not symmetric: missing " + to_string(group.neg(e)));
    if (std::abs(*neg - c) > 1e-12 * std::max(1.0, c))
      throw ValidationError("cost table is not symmetric at " + to_string(e) + ": " + std::to_string(c) +
                            " vs " + std::to_string(*neg));
  }
}

Decomposition decomposition_norm(const CostTable& table, const GroupElement& sigma) {
  table.validate();
  const auto& G = table.group;
  if (!G.contains(sigma)) throw ValidationError("element " + to_string(sigma) + " is not reduced");
  if (G.is_zero(sigma)) return {};
  std::vector<Edge> edges;
  std::vector<GroupElement> gens;
  for (const auto& [e, c] : table.entries) {
    if (G.is_zero(e)) continue;
    edges.push_back({e, c});
    gens.push_back(e);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.step < b.step; });
  if (!in_subgroup(G, gens, sigma)) throw ValidationError("unreachable element " + to_string(sigma));
  auto first = dijkstra(G, edges, sigma);
  if (table.extension == CostExtension::none) return first;

  // Multiples m e with E(m e) <= first.value can still shorten the path.
  const double bound = first.value;
  std::int64_t order = 1;
  for (auto q : G.torsion_orders()) order = std::lcm(order, q);
  std::map<GroupElement, double> extra;
  for (const auto& [e, c] : table.entries) {
    if (G.is_zero(e)) continue;
    bool has_free = false;
    for (int i = 0; i < G.free_rank(); ++i) has_free |= e[i] != 0;
    for (std::int64_t m = 2;; ++m) {
      if (!has_free && m >= order) break;
      double v = c * std::pow(static_cast<double>(m), table.exponent);
      if (v > bound) break;
      GroupElement me = G.scale(m, e);
      if (G.is_zero(me)) continue;
      auto it = extra.find(me);
      if (it == extra.end() || v < it->second) extra[me] = v;
    }
  }
  for (auto& e : edges) {
    auto it = extra.find(e.step);
    if (it != extra.end()) {
      e.cost = std::min(e.cost, it->second);
      extra.erase(it);
    }
  }
  if (extra.empty()) return first;
  for (const auto& [g, v] : extra) edges.push_back({g, v});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.step < b.step; });
  return dijkstra(G, edges, sigma);
}

double norm_gap(const CostTable& table) {
  table.validate();
  if (table.group.is_trivial()) throw ValidationError("no nonzero elements");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [e, c] : table.entries)
    if (!table.group.is_zero(e)) best = std::min(best, c);
  if (!std::isfinite(best)) throw ValidationError("no nonzero elements in the cost support");
  return best;
}

CostedNorm::CostedNorm(CostTable table, double p, int cache_radius) : table_(std::move(table)), p_(p) {
  table_.validate();
  alpha_ = norm_gap(table_);
  const auto& G = table_.group;
  // Window: free coordinates in [-R, R], every torsion value.
  std::vector<std::int64_t> lo(G.rank()), hi(G.rank());
  for (int i = 0; i < G.free_rank(); ++i) {
    lo[i] = -cache_radius;
    hi[i] = cache_radius;
  }
  for (std::size_t i = 0; i < G.torsion_orders().size(); ++i) {
    lo[G.free_rank() + i] = 0;
    hi[G.free_rank() + i] = G.torsion_orders()[i] - 1;
  }
  std::vector<GroupElement> gens;
  for (const auto& [e, c] : table_.entries)
    if (!G.is_zero(e)) gens.push_back(e);
  std::vector<std::int64_t> c = lo;
  while (true) {
    GroupElement g(c);
    if (in_subgroup(G, gens, g)) cache_.emplace(g, decomposition_norm(table_, g));
    std::size_t i = G.rank();
    bool finished = true;
    while (i > 0) {
      --i;
      if (++c[i] <= hi[i]) {
        finished = false;
        break;
      }
      c[i] = lo[i];
    }
    if (finished) break;
  }
}

double CostedNorm::operator()(const GroupElement& g) const { return decompose(g).value; }

Decomposition CostedNorm::decompose(const GroupElement& g) const {
  auto it = cache_.find(g);
  if (it != cache_.end()) return it->second;
  return decomposition_norm(table_, g);
}

bool CostedNorm::is_weighted_l1(std::vector<double>* weights) const {
  const auto& G = group();
  if (!G.torsion_orders().empty() || G.free_rank() == 0) return false;
  std::vector<double> w(G.free_rank());
  for (int i = 0; i < G.free_rank(); ++i) {
    auto u = G.unit(i);
    if (!cache_.count(u)) return false;
    w[i] = cache_.at(u).value;
  }
  for (const auto& [g, d] : cache_) {
    double l1 = 0.0;
    for (int i = 0; i < G.free_rank(); ++i) l1 += w[i] * std::abs(static_cast<double>(g[i]));
    if (std::abs(l1 - d.value) > 1e-9 * std::max(1.0, l1)) return false;
  }
  if (weights) *weights = w;
  return true;
}

CostTable circle_cost_table(double p) {
  CostTable t;
  t.group = CoefficientGroup::integers();
  const double c = 2.0 * std::numbers::pi;
  t.entries = {{GroupElement({-1}), c}, {GroupElement({1}), c}};
  t.extension = CostExtension::power_law;
  t.exponent = p;
  return t;
}

CostedNorm circle_norm(double p, int cache_radius) { return CostedNorm(circle_cost_table(p), p, cache_radius); }

double f_pq(double p, double q, int k) { return (p - k + 1) / (q - k + 1); }

PqComparison pq_comparison_bounds(const CostedNorm& norm_p, const CostedNorm& norm_q, const GroupElement& sigma,
                                  double lambda, int k) {
  const double p = norm_p.p(), q = norm_q.p();
  if (!(p > k - 1) || !(p < q)) throw ValidationError("pq comparison needs k-1 < p < q");
  if (!(norm_p.group() == norm_q.group())) throw ValidationError("pq comparison needs norms over the same group");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ValidationError("lambda must lie in (0,1)");
  PqComparison r;
  r.f_pq = f_pq(p, q, k);
  r.norm_p = norm_p(sigma);
  r.norm_q = norm_q(sigma);
  r.lower_lhs = lambda * std::pow(r.norm_q, r.f_pq);
  r.upper_rhs = r.norm_q / lambda;
  const double tol = 1e-12 * std::max(1.0, r.norm_p);
  r.lower_ok = r.lower_lhs <= r.norm_p + tol;
  r.upper_ok = r.norm_p <= r.upper_rhs + tol;
  return r;
}

}  // namespace gammaflow
