#include "gammaflow/oracles.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace gammaflow::oracles {

std::optional<double> brute_force_norm(const CostTable& table, const std::vector<GroupElement>& candidates,
                                       const GroupElement& sigma, int max_summands) {
  const auto& G = table.group;
  if (G.is_zero(sigma)) return 0.0;
  std::vector<std::pair<GroupElement, double>> items;
  for (const auto& g : candidates) {
    if (G.is_zero(g)) continue;
    if (auto c = table.cost(g)) items.emplace_back(g, *c);
  }
  std::optional<double> best;
  // Multisets as nondecreasing index sequences.
  std::function<void(std::size_t, int, const GroupElement&, double)> rec =
      [&](std::size_t start, int left, const GroupElement& sum, double cost) {
        if (best && cost >= *best) return;
        if (sum == sigma && cost > 0) {
          best = cost;
          return;
        }
        if (left == 0) return;
        for (std::size_t i = start; i < items.size(); ++i)
          rec(i, left - 1, G.add(sum, items[i].first), cost + items[i].second);
      };
  rec(0, max_summands, G.zero(), 0.0);
  return best;
}

std::vector<double> floyd_norms(const CostTable& table) {
  const auto& G = table.group;
  const auto all = G.enumerate();
  const std::size_t n = all.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> D(n * n, inf);
  for (std::size_t i = 0; i < n; ++i) {
    D[i * n + i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (auto c = table.cost(G.sub(all[j], all[i]))) D[i * n + j] = std::min(D[i * n + j], *c);
    }
  }
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) D[i * n + j] = std::min(D[i * n + j], D[i * n + m] + D[m * n + j]);
  std::size_t z = 0;
  while (!G.is_zero(all[z])) ++z;
  return std::vector<double>(D.begin() + z * n, D.begin() + (z + 1) * n);
}

std::vector<GroupElement> window(const CoefficientGroup& G, int radius) {
  std::vector<GroupElement> out;
  std::vector<std::int64_t> lo(G.rank()), hi(G.rank());
  for (int i = 0; i < G.free_rank(); ++i) lo[i] = -radius, hi[i] = radius;
  for (std::size_t i = 0; i < G.torsion_orders().size(); ++i)
    lo[G.free_rank() + i] = 0, hi[G.free_rank() + i] = G.torsion_orders()[i] - 1;
  std::vector<std::int64_t> c = lo;
  while (true) {
    out.emplace_back(c);
    std::size_t i = G.rank();
    while (true) {
      if (i == 0) return out;
      --i;
      if (++c[i] <= hi[i]) break;
      c[i] = lo[i];
    }
  }
}

double exhaustive_flat_norm(const std::vector<std::int64_t>& S,
                            const std::vector<std::vector<std::pair<int, int>>>& boundary,
                            const std::vector<double>& wP, const std::vector<double>& wQ, int range) {
  const std::size_t m = boundary.size();
  std::vector<int> Q(m, -range);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> dQ(S.size());
  while (true) {
    std::fill(dQ.begin(), dQ.end(), 0);
    double cost = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      cost += wQ[d] * std::abs(Q[d]);
      for (auto [c, s] : boundary[d]) dQ[c] += s * Q[d];
    }
    for (std::size_t c = 0; c < S.size(); ++c) cost += wP[c] * std::abs(static_cast<double>(S[c] - dQ[c]));
    best = std::min(best, cost);
    std::size_t i = 0;
    for (; i < m; ++i) {
      if (++Q[i] <= range) break;
      Q[i] = -range;
    }
    if (i == m) break;
  }
  return best;
}

double simpson(const std::function<double(double)>& f, double lo, double hi, int panels) {
  if (panels % 2) ++panels;
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace gammaflow::oracles
