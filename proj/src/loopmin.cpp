#include "gammaflow/loopmin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gammaflow/errors.hpp"

namespace gammaflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHuge = 1e300;

void check_exponent(double p) {
  if (!(p > 1.0)) throw ValidationError("subcritical exponent");
}

int circle_degree(const GroupElement& sigma) {
  if (sigma.size() != 1) throw ValidationError("circle classes are single integers");
  return static_cast<int>(sigma[0]);
}

}  // namespace

LoopTarget LoopTarget::length_model(CoefficientGroup g, std::vector<std::pair<GroupElement, double>> lengths) {
  LoopTarget t;
  t.kind = TargetKind::length_model;
  t.group = std::move(g);
  std::map<GroupElement, double> all;
  for (auto& [s, l] : lengths) all[t.group.element(s.coords())] = l;
  for (auto [s, l] : std::map<GroupElement, double>(all)) {
    auto n = t.group.neg(s);
    auto it = all.find(n);
    if (it == all.end())
      all[n] = l;
    else if (it->second != l)
      throw ValidationError("geodesic lengths differ for " + to_string(s) + " and its inverse");
  }
  t.geodesic_length.assign(all.begin(), all.end());
  t.validate();
  return t;
}

void LoopTarget::validate() const {
  if (kind == TargetKind::circle) return;
  for (const auto& [s, l] : geodesic_length) {
    if (group.is_zero(s)) throw ValidationError("the trivial class has no closed geodesic length");
    if (!(l > 0.0)) throw ValidationError("geodesic length of " + to_string(s) + " must be positive");
  }
}

double energy_Ep(const LoopTarget& target, const GroupElement& sigma, double p) {
  check_exponent(p);
  if (target.group.is_zero(sigma)) return 0.0;
  if (target.kind == TargetKind::circle) return kTwoPi * std::pow(std::abs(circle_degree(sigma)), p);
  for (const auto& [s, l] : target.geodesic_length)
    if (s == sigma) return std::pow(kTwoPi, 1.0 - p) * std::pow(l, p);
  throw ValidationError("no geodesic length for class " + to_string(sigma));
}

double discrete_loop_energy(const std::vector<Vec2>& g, double p) {
  const std::size_t m = g.size();
  const double dt = kTwoPi / static_cast<double>(m);
  double e = 0.0;
  for (std::size_t i = 0; i < m; ++i) e += std::pow(norm(g[(i + 1) % m] - g[i]), p);
  return e / std::pow(dt, p - 1.0);
}

int loop_winding(const std::vector<Vec2>& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) total += angle_between(g[i], g[(i + 1) % g.size()]);
  return static_cast<int>(std::lround(total / kTwoPi));
}

namespace {

// Tangential gradient of the discrete energy with respect to each sample.
double energy_and_gradient(const std::vector<Vec2>& g, double p, std::vector<Vec2>& grad) {
  const std::size_t m = g.size();
  const double dt = kTwoPi / static_cast<double>(m);
  const double scale = 1.0 / std::pow(dt, p - 1.0);
  std::vector<Vec2> flux(m);  // p |e|^{p-2} e for e_i = g_{i+1} - g_i
  double e = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 d = g[(i + 1) % m] - g[i];
    const double len = norm(d);
    e += std::pow(len, p);
    flux[i] = len > 1e-300 ? d * (p * std::pow(len, p - 2.0)) : Vec2{};
  }
  grad.assign(m, {});
  for (std::size_t i = 0; i < m; ++i) {
    Vec2 gi = (flux[(i + m - 1) % m] - flux[i]) * scale;
    grad[i] = gi - g[i] * dot(gi, g[i]);
  }
  return e * scale;
}

bool steps_below_pi(const std::vector<Vec2>& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (dot(g[i], g[(i + 1) % g.size()]) <= -1.0 + 1e-12) return false;
  return true;
}

// Solves the cyclic tridiagonal system with diagonal b, off-diagonals c
// (c[i] couples i and i+1 mod m), by Sherman-Morrison on top of the Thomas
// algorithm.
std::vector<double> solve_cyclic(std::vector<double> b, const std::vector<double>& c, const std::vector<double>& r) {
  const std::size_t n = b.size();
  auto thomas = [&](const std::vector<double>& diag, std::vector<double> rhs) {
    std::vector<double> cp(n, 0.0);
    cp[0] = c[0] / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double sub = c[i - 1];
      const double den = diag[i] - sub * cp[i - 1];
      if (i + 1 < n) cp[i] = c[i] / den;
      rhs[i] = (rhs[i] - sub * rhs[i - 1]) / den;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
    return rhs;
  };
  const double corner = c[n - 1];
  const double gamma = -b[0];
  b[0] -= gamma;
  b[n - 1] -= corner * corner / gamma;
  auto x = thomas(b, r);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = corner;
  auto z = thomas(b, u);
  const double fact = (x[0] + corner * x[n - 1] / gamma) / (1.0 + z[0] + corner * z[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
  return x;
}

// Angular search direction: the gradient preconditioned by the Hessian of
// the energy in angle coordinates (clamped to stay positive definite).
std::vector<double> newton_direction(const std::vector<Vec2>& g, const std::vector<Vec2>& grad, double p) {
  const std::size_t m = g.size();
  const double dt = kTwoPi / static_cast<double>(m);
  const double scale = 1.0 / std::pow(dt, p - 1.0);
  std::vector<double> G(m), f2(m);
  double mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) G[i] = dot(grad[i], perp(g[i])), mean += G[i];
  mean /= static_cast<double>(m);
  for (auto& v : G) v = -(v - mean);
  double fmax = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double delta = angle_between(g[i], g[(i + 1) % m]);
    const double s = std::abs(2.0 * std::sin(delta / 2.0));
    const double c = std::cos(delta / 2.0);
    const double sn = std::sin(delta / 2.0);
    f2[i] = s > 1e-150 ? scale * p * std::pow(s, p - 2.0) * ((p - 1.0) * c * c - sn * sn) : kHuge;
  }
  // For p < 2 the curvature blows up on short edges; cap it at the value of
  // an edge one parameter step long.
  const double cap = 10.0 * scale * p * std::max(p - 1.0, 0.1) * std::pow(dt, p - 2.0);
  for (auto& v : f2) {
    v = std::min(v, cap);
    fmax = std::max(fmax, v);
  }
  if (!(fmax > 0.0) || !std::isfinite(fmax)) return G;
  const double floor = 1e-8 * fmax;
  std::vector<double> diag(m), off(m);
  for (std::size_t i = 0; i < m; ++i) off[i] = -std::max(f2[i], floor);
  for (std::size_t i = 0; i < m; ++i) diag[i] = -off[i] - off[(i + m - 1) % m] + 1e-10 * fmax;
  auto s = solve_cyclic(diag, off, G);
  double smean = 0.0;
  for (double v : s) smean += v;
  smean /= static_cast<double>(m);
  for (auto& v : s) v -= smean;
  return s;
}

}  // namespace

LoopDescentResult minimize_circle_loop(int degree, double p, int m, const LoopDescentOptions& opts) {
  check_exponent(p);
  if (m < 8) throw ValidationError("loops need at least 8 samples");
  if (2.0 * std::abs(degree) >= m) throw ValidationError("too few samples for the requested degree");
  const double dt = kTwoPi / m;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) amp[k] = opts.perturbation * U(rng) / 3.0, phase[k] = kTwoPi * U(rng);
  std::vector<Vec2> g(m);
  for (int i = 0; i < m; ++i) {
    const double t = i * dt;
    double th = degree * t;
    for (int k = 0; k < 3; ++k) th += amp[k] * std::sin((k + 1) * t + phase[k]);
    g[i] = unit_at(th);
  }

  LoopDescentResult res;
  std::vector<Vec2> grad, trial(m);
  double E = energy_and_gradient(g, p, grad);
  std::vector<double> history{E};
  long it = 0;
  auto grad_norm = [&] {
    double g2 = 0.0;
    for (const auto& v : grad) g2 += dot(v, v);
    return std::sqrt(g2 / dt);
  };
  for (; it < opts.max_iterations; ++it) {
    if (grad_norm() < opts.grad_tol) break;
    if (it >= opts.stall_window) {
      const double old = history[history.size() - 1 - opts.stall_window];
      if (old - E <= opts.rel_decrease_tol * std::max(std::abs(old), 1e-300)) break;
    }
    auto dir = newton_direction(g, grad, p);
    double slope = 0.0;  // directional derivative along dir
    for (int i = 0; i < m; ++i) slope += dir[i] * dot(grad[i], perp(g[i]));
    if (!(slope < 0.0)) break;
    bool accepted = false;
    for (double step = 1.0; step > 1e-20; step *= 0.5) {
      for (int i = 0; i < m; ++i) trial[i] = normalized(g[i] + perp(g[i]) * (step * dir[i]));
      if (!steps_below_pi(trial)) continue;
      const double Et = discrete_loop_energy(trial, p);
      if (Et <= E + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the decrease drops below the rounding error of E;
      // accept a step that does not raise E beyond it and shrinks the gradient.
      if (Et <= E + 1e-14 * std::abs(E)) {
        std::vector<Vec2> tg;
        energy_and_gradient(trial, p, tg);
        double t2 = 0.0, g2 = 0.0;
        for (int i = 0; i < m; ++i) t2 += dot(tg[i], tg[i]), g2 += dot(grad[i], grad[i]);
        if (t2 < 0.25 * g2) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    if (loop_winding(trial) != degree) res.winding_preserved = false;
    g.swap(trial);
    const double Enew = energy_and_gradient(g, p, grad);
    if (Enew > E + 1e-14 * std::abs(E)) res.monotone = false;
    E = Enew;
    history.push_back(E);
  }
  const double gnorm = grad_norm();

  res.loop.samples = std::move(g);
  res.loop.cls = GroupElement({degree});
  res.loop.p = p;
  res.loop.grad_norm = gnorm;
  res.loop.converged = gnorm < opts.grad_tol;
  res.energy = E;
  res.closed_form = kTwoPi * std::pow(std::abs(degree), p);
  res.iterations = it;
  return res;
}

double energy_Ep_numerical(const LoopTarget& target, const GroupElement& sigma, double p, int m,
                           const LoopDescentOptions& opts) {
  check_exponent(p);
  if (target.kind != TargetKind::circle)
    throw ValidationError("the descent oracle is only available for circle targets");
  if (target.group.is_zero(sigma)) return 0.0;
  return minimize_circle_loop(circle_degree(sigma), p, m, opts).energy;
}

GradientBound check_gradient_bound(const DiscreteLoop& loop, double p0) {
  const double p = loop.p;
  if (!(p0 > 1.0) || p < p0) throw ValidationError("gradient bound needs 1 < p0 <= p");
  if (!loop.converged) throw NumericalError("not a minimizer");
  const std::size_t m = loop.samples.size();
  const double dt = kTwoPi / static_cast<double>(m);
  GradientBound b;
  for (std::size_t i = 0; i < m; ++i)
    b.lhs = std::max(b.lhs, norm(loop.samples[(i + 1) % m] - loop.samples[i]) / dt);
  b.lp_norm = std::pow(discrete_loop_energy(loop.samples, p), 1.0 / p);
  b.alpha = 1.0 - 1.0 / p;
  b.rhs_without_C = std::pow(b.lp_norm, 1.0 / b.alpha);
  b.ratio = b.lhs > 0.0 ? b.lhs / b.rhs_without_C : 0.0;
  return b;
}

CostTable loop_cost_table(const LoopTarget& target, double p) {
  check_exponent(p);
  if (target.kind == TargetKind::circle) return circle_cost_table(p);
  CostTable t;
  t.group = target.group;
  for (const auto& [s, l] : target.geodesic_length) t.entries.push_back({s, energy_Ep(target, s, p)});
  return t;
}

ConvergingNorms converging_norms(const LoopTarget& target, const GroupElement& sigma, const std::vector<double>& p_list,
                                 int k, int m) {
  ConvergingNorms out;
  for (double p : p_list) {
    if (!(p > k - 1) || p > k) throw ValidationError("p must lie in (k-1, k]");
    CostTable table;
    if (m > 0) {
      if (target.kind != TargetKind::circle)
        throw ValidationError("the descent oracle is only available for circle targets");
      // Numerical costs for every degree up to |sigma| + 1.
      table.group = target.group;
      const int top = std::abs(circle_degree(sigma)) + 1;
      for (int d = 1; d <= top; ++d) {
        const double e = energy_Ep_numerical(target, GroupElement({d}), p, m);
        table.entries.push_back({GroupElement({d}), e});
        table.entries.push_back({GroupElement({-d}), e});
      }
    } else {
      table = loop_cost_table(target, p);
    }
    NormRow row;
    row.p = p;
    row.energy = target.group.is_zero(sigma) ? 0.0 : (m > 0 ? *table.cost(sigma) : energy_Ep(target, sigma, p));
    row.norm = decomposition_norm(table, sigma).value;
    out.rows.push_back(row);
  }
  // Trend check against the row with the largest p.
  std::vector<NormRow> sorted = out.rows;
  std::sort(sorted.begin(), sorted.end(), [](const NormRow& a, const NormRow& b) { return a.p < b.p; });
  for (std::size_t i = 1; i + 1 < sorted.size(); ++i)
    if (std::abs(sorted[i].norm - sorted.back().norm) > std::abs(sorted[i - 1].norm - sorted.back().norm) + 1e-12)
      out.differences_decrease = false;
  return out;
}

}  // namespace gammaflow
