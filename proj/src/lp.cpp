#include "gammaflow/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "gammaflow/errors.hpp"

namespace gammaflow {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;

class Simplex {
 public:
  Simplex(const LinearProgram& lp) : lp_(lp), m_(lp.rows), n_(static_cast<int>(lp.columns.size())) {
    if (static_cast<int>(lp.rhs.size()) != m_ || static_cast<int>(lp.cost.size()) != n_)
      throw ValidationError("linear program dimensions are inconsistent");
    // Row signs so that the right-hand side is nonnegative.
    sign_.assign(m_, 1.0);
    for (int r = 0; r < m_; ++r)
      if (lp.rhs[r] < 0) sign_[r] = -1.0;
    b_.resize(m_);
    for (int r = 0; r < m_; ++r) b_[r] = sign_[r] * lp.rhs[r];
    for (int j = 0; j < n_; ++j)
      for (auto [r, a] : lp.columns[j])
        if (r < 0 || r >= m_) throw ValidationError("linear program column references a missing row");
  }

  LpResult run(const std::vector<int>* hint, long max_pivots) {
    max_pivots_ = max_pivots;
    LpResult res;
    if (!(hint && try_basis(*hint))) {
      // Phase I with one artificial column per row.
      basis_.resize(m_);
      for (int r = 0; r < m_; ++r) basis_[r] = n_ + r;
      reinvert();
      std::vector<double> c1(n_ + m_, 0.0);
      for (int r = 0; r < m_; ++r) c1[n_ + r] = 1.0;
      auto st = iterate(c1, /*allow_artificial=*/true);
      if (st == LpStatus::iteration_limit) return finish(st);
      double infeas = 0.0;
      for (int r = 0; r < m_; ++r)
        if (basis_[r] >= n_) infeas += xb_[r];
      if (infeas > 1e-7 * std::max(1.0, norm1(b_))) return finish(LpStatus::infeasible);
      drive_out_artificials();
    }
    std::vector<double> c2(n_ + m_, 0.0);
    std::copy(lp_.cost.begin(), lp_.cost.end(), c2.begin());
    return finish(iterate(c2, /*allow_artificial=*/false));
  }

 private:
  static double norm1(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }

  // Column j of the sign-adjusted constraint matrix, artificial columns
  // being unit vectors.
  template <class F>
  void for_column(int j, F&& f) const {
    if (j >= n_) {
      f(j - n_, 1.0);
      return;
    }
    for (auto [r, a] : lp_.columns[j]) f(r, sign_[r] * a);
  }

  bool try_basis(const std::vector<int>& hint) {
    if (static_cast<int>(hint.size()) != m_) return false;
    std::vector<char> seen(n_, 0);
    for (int j : hint) {
      if (j < 0 || j >= n_ || seen[j]) return false;
      seen[j] = 1;
    }
    basis_ = hint;
    if (!reinvert()) return false;
    for (double v : xb_)
      if (v < -1e-9) return false;
    return true;
  }

  // Rebuilds the dense inverse from scratch; false when the basis is singular.
  bool reinvert() {
    std::vector<double> B(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i)
      for_column(basis_[i], [&](int r, double a) { B[static_cast<std::size_t>(r) * m_ + i] = a; });
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    for (int c = 0; c < m_; ++c) {
      int piv = c;
      for (int r = c + 1; r < m_; ++r)
        if (std::abs(B[static_cast<std::size_t>(r) * m_ + c]) > std::abs(B[static_cast<std::size_t>(piv) * m_ + c]))
          piv = r;
      if (std::abs(B[static_cast<std::size_t>(piv) * m_ + c]) < 1e-12) return false;
      if (piv != c)
        for (int k = 0; k < m_; ++k) {
          std::swap(B[static_cast<std::size_t>(piv) * m_ + k], B[static_cast<std::size_t>(c) * m_ + k]);
          std::swap(binv_[static_cast<std::size_t>(piv) * m_ + k], binv_[static_cast<std::size_t>(c) * m_ + k]);
        }
      const double d = B[static_cast<std::size_t>(c) * m_ + c];
      for (int k = 0; k < m_; ++k) {
        B[static_cast<std::size_t>(c) * m_ + k] /= d;
        binv_[static_cast<std::size_t>(c) * m_ + k] /= d;
      }
      for (int r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = B[static_cast<std::size_t>(r) * m_ + c];
        if (f == 0.0) continue;
        for (int k = 0; k < m_; ++k) {
          B[static_cast<std::size_t>(r) * m_ + k] -= f * B[static_cast<std::size_t>(c) * m_ + k];
          binv_[static_cast<std::size_t>(r) * m_ + k] -= f * binv_[static_cast<std::size_t>(c) * m_ + k];
        }
      }
    }
    xb_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double s = 0.0;
      for (int r = 0; r < m_; ++r) s += binv_[static_cast<std::size_t>(i) * m_ + r] * b_[r];
      xb_[i] = std::abs(s) < 1e-11 ? 0.0 : s;
    }
    since_reinvert_ = 0;
    return true;
  }

  std::vector<double> ftran(int j) const {
    std::vector<double> u(m_, 0.0);
    for_column(j, [&](int r, double a) {
      for (int i = 0; i < m_; ++i) u[i] += binv_[static_cast<std::size_t>(i) * m_ + r] * a;
    });
    return u;
  }

  void pivot(int row, int j, const std::vector<double>& u) {
    const double t = xb_[row] / u[row];
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      xb_[i] -= t * u[i];
      if (std::abs(xb_[i]) < 1e-11) xb_[i] = 0.0;
    }
    xb_[row] = t;
    double* prow = &binv_[static_cast<std::size_t>(row) * m_];
    const double inv = 1.0 / u[row];
    for (int k = 0; k < m_; ++k) prow[k] *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == row || u[i] == 0.0) continue;
      double* ri = &binv_[static_cast<std::size_t>(i) * m_];
      const double f = u[i];
      for (int k = 0; k < m_; ++k) ri[k] -= f * prow[k];
    }
    basis_[row] = j;
    ++pivots_;
    if (++since_reinvert_ >= 64) reinvert();
  }

  LpStatus iterate(const std::vector<double>& c, bool allow_artificial) {
    std::vector<char> is_basic(n_ + m_, 0);
    const int ncols = allow_artificial ? n_ + m_ : n_;
    while (true) {
      if (pivots_ >= max_pivots_) return LpStatus::iteration_limit;
      std::fill(is_basic.begin(), is_basic.end(), 0);
      for (int j : basis_) is_basic[j] = 1;
      std::vector<double> y(m_, 0.0);
      for (int i = 0; i < m_; ++i) {
        const double cb = c[basis_[i]];
        if (cb == 0.0) continue;
        const double* ri = &binv_[static_cast<std::size_t>(i) * m_];
        for (int r = 0; r < m_; ++r) y[r] += cb * ri[r];
      }
      // Bland: lowest-index improving column.
      int enter = -1;
      for (int j = 0; j < ncols && enter < 0; ++j) {
        if (is_basic[j]) continue;
        double d = c[j];
        for_column(j, [&](int r, double a) { d -= y[r] * a; });
        if (d < -kCostTol) enter = j;
      }
      if (enter < 0) return LpStatus::optimal;
      auto u = ftran(enter);
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (u[i] <= kPivotTol) continue;
        const double t = xb_[i] / u[i];
        if (leave < 0 || t < best - 1e-12) {
          leave = i;
          best = t;
        } else if (t <= best + 1e-12 && basis_[i] < basis_[leave]) {
          leave = i;
          best = std::min(best, t);
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(leave, enter, u);
    }
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      std::vector<char> is_basic(n_, 0);
      for (int j : basis_)
        if (j < n_) is_basic[j] = 1;
      for (int j = 0; j < n_; ++j) {
        if (is_basic[j]) continue;
        // Row r of B^{-1} A_j.
        double v = 0.0;
        for_column(j, [&](int row, double a) { v += binv_[static_cast<std::size_t>(r) * m_ + row] * a; });
        if (std::abs(v) > 1e-7) {
          pivot(r, j, ftran(j));
          break;
        }
      }
    }
  }

  LpResult finish(LpStatus st) {
    LpResult res;
    res.status = st;
    res.pivots = pivots_;
    res.x.assign(n_, 0.0);
    res.basis.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (basis_.empty()) break;
      if (basis_[i] < n_) {
        res.x[basis_[i]] = std::max(0.0, xb_[i]);
        res.basis[i] = basis_[i];
      }
    }
    double v = 0.0;
    for (int j = 0; j < n_; ++j) v += lp_.cost[j] * res.x[j];
    res.value = v;
    return res;
  }

  const LinearProgram& lp_;
  int m_, n_;
  std::vector<double> sign_, b_, binv_, xb_;
  std::vector<int> basis_;
  long pivots_ = 0, max_pivots_ = 0;
  int since_reinvert_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const std::vector<int>* initial_basis, long max_pivots) {
  if (lp.rows == 0) {
    LpResult res;
    res.x.assign(lp.columns.size(), 0.0);
    for (double c : lp.cost)
      if (c < 0) {
        res.status = LpStatus::unbounded;
        return res;
      }
    res.status = LpStatus::optimal;
    return res;
  }
  Simplex s(lp);
  return s.run(initial_basis, max_pivots);
}

FlowResult min_cost_flow(int nodes, const std::vector<FlowArc>& arcs, const std::vector<std::int64_t>& net_inflow) {
  if (static_cast<int>(net_inflow.size()) != nodes) throw ValidationError("flow demand vector has wrong size");
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  struct Edge {
    int to;
    std::int64_t cap;
    double cost;
    int rev;
  };
  const int s = nodes, t = nodes + 1, N = nodes + 2;
  std::vector<std::vector<Edge>> g(N);
  auto add = [&](int a, int b, std::int64_t cap, double cost) {
    g[a].push_back({b, cap, cost, static_cast<int>(g[b].size())});
    g[b].push_back({a, 0, -cost, static_cast<int>(g[a].size()) - 1});
    return std::pair<int, int>(a, static_cast<int>(g[a].size()) - 1);
  };
  std::vector<std::pair<int, int>> handle(arcs.size());
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    if (!(arcs[i].cost >= 0.0)) throw ValidationError("flow arcs need nonnegative costs");
    handle[i] = add(arcs[i].from, arcs[i].to, kInf, arcs[i].cost);
  }
  std::int64_t need = 0, total_in = 0;
  for (int v = 0; v < nodes; ++v) {
    if (net_inflow[v] < 0) add(s, v, -net_inflow[v], 0.0), total_in -= net_inflow[v];
    if (net_inflow[v] > 0) add(v, t, net_inflow[v], 0.0), need += net_inflow[v];
  }
  FlowResult res;
  res.flow.assign(arcs.size(), 0);
  if (need != total_in) return res;

  std::vector<double> pot(N, 0.0), dist(N);
  std::vector<int> pv(N), pe(N);
  std::int64_t sent = 0;
  while (sent < need) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    dist[s] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, s});
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > dist[v]) continue;
      for (int i = 0; i < static_cast<int>(g[v].size()); ++i) {
        const Edge& e = g[v][i];
        if (e.cap <= 0) continue;
        double rc = e.cost + pot[v] - pot[e.to];
        if (rc < 0) rc = 0;  // roundoff
        if (dist[v] + rc < dist[e.to]) {
          dist[e.to] = dist[v] + rc;
          pv[e.to] = v;
          pe[e.to] = i;
          pq.push({dist[e.to], e.to});
        }
      }
    }
    if (!std::isfinite(dist[t])) return res;
    for (int v = 0; v < N; ++v)
      if (std::isfinite(dist[v])) pot[v] += dist[v];
    std::int64_t push = need - sent;
    for (int v = t; v != s; v = pv[v]) push = std::min(push, g[pv[v]][pe[v]].cap);
    for (int v = t; v != s; v = pv[v]) {
      Edge& e = g[pv[v]][pe[v]];
      e.cap -= push;
      g[v][e.rev].cap += push;
    }
    sent += push;
  }
  res.feasible = true;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const Edge& e = g[handle[i].first][handle[i].second];
    res.flow[i] = g[e.to][e.rev].cap;
    res.cost += arcs[i].cost * static_cast<double>(res.flow[i]);
  }
  return res;
}

}  // namespace gammaflow
