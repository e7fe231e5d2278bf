#include "gammaflow/ballconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "gammaflow/errors.hpp"

namespace gammaflow {

namespace {

constexpr double kPi = std::numbers::pi;

double radius_at(const Ball& b, double s, double norm) { return std::max(b.frozen_radius, s * norm); }

bool inside(const Domain& D, Vec2 c, double r) { return D.distance_to_boundary(c) > r; }

}  // namespace

double lambda_p(double s, double alpha, double k, double p) {
  if (!(p < k)) throw ValidationError("lambda_p needs p < k");
  if (s < 0.0) throw ValidationError("lambda_p needs s >= 0");
  return std::pow(alpha * s, k - p) / (k - p);
}

double annulus_bound(const GroupElement& sigma, double a, double b, double p, const CostedNorm& norm, double k) {
  if (!(a >= 0.0 && a < b)) throw ValidationError("annulus bound needs 0 <= a < b");
  if (!(p > k - 1.0)) throw ValidationError("annulus bound needs p > k - 1");
  if (norm.group().is_zero(sigma)) return 0.0;
  const double n = norm(sigma);
  const double alpha = norm.alpha();
  return n * (lambda_p(b / n, alpha, k, p) - lambda_p(a / n, alpha, k, p));
}

double model_annulus_energy(int degree, double a, double b, double p) {
  if (!(a >= 0.0 && a < b)) throw ValidationError("annulus needs 0 <= a < b");
  return 2 * kPi * std::pow(std::abs(degree), p) * (std::pow(b, 2.0 - p) - std::pow(a, 2.0 - p)) / (2.0 - p);
}

double Domain::distance_to_boundary(Vec2 x) const {
  if (kind == Kind::disk) return radius - norm(x - centre);
  return std::min({x.x - lo.x, hi.x - x.x, x.y - lo.y, hi.y - x.y});
}

void SingularityConfig::validate(const CoefficientGroup& group) const {
  if (!(collar > 0.0 && collar <= 0.5)) throw ValidationError("collar width must lie in (0, 1/2]");
  GroupElement total = group.zero();
  for (std::size_t i = 0; i < singularities.size(); ++i) {
    const auto& a = singularities[i];
    if (!group.contains(a.cls)) throw ValidationError("singularity class outside the coefficient group");
    if (!(domain.distance_to_boundary(a.position) > collar)) {
      std::ostringstream os;
      os << "singularity " << i << " lies within the collar";
      throw ValidationError(os.str());
    }
    for (std::size_t j = 0; j < i; ++j)
      if (singularities[j].position == a.position) {
        std::ostringstream os;
        os << "singularities " << j << " and " << i << " coincide";
        throw ValidationError(os.str());
      }
    total = group.add(total, a.cls);
  }
  if (!(total == group.element(boundary_class.coords())))
    throw ValidationError("singularity classes do not sum to the boundary class " + to_string(boundary_class));
}

BallCollection ball_construction(const SingularityConfig& cfg, double tau, const CostedNorm& N, double k) {
  const auto& G = N.group();
  cfg.validate(G);
  const double p = N.p();
  if (!(p > k - 1.0 && p < k)) throw ValidationError("ball construction needs k - 1 < p < k");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  const double hc = N(cfg.boundary_class);
  if (!(4.0 * tau * hc <= cfg.collar)) {
    std::ostringstream os;
    os << "hypothesis 4 tau |hc|_p <= r fails: " << 4.0 * tau * hc << " > " << cfg.collar;
    throw ValidationError(os.str());
  }
  const double alpha = N.alpha();
  if (!(std::pow(alpha * tau / 2.0, k - p) > 0.5)) {
    std::ostringstream os;
    os << "hypothesis (alpha tau / 2)^(k-p) > 1/2 fails: " << std::pow(alpha * tau / 2.0, k - p);
    throw ValidationError(os.str());
  }

  BallCollection bc;
  bc.tau = tau;
  bc.p = p;
  std::vector<Ball> balls;
  std::vector<double> norms;
  for (std::size_t i = 0; i < cfg.singularities.size(); ++i) {
    const auto& a = cfg.singularities[i];
    if (G.is_zero(a.cls)) continue;
    balls.push_back({a.position, 0.0, a.cls, {static_cast<int>(i)}, 0.0});
    norms.push_back(N(a.cls));
  }
  if (balls.empty()) {
    bc.s = tau;
    bc.properties = check_ball_properties(cfg, bc, N);
    return bc;
  }

  // s0: initial balls pairwise disjoint and well inside the domain.
  double s = tau / 4.0;
  for (std::size_t i = 0; i < balls.size(); ++i) {
    s = std::min(s, 0.5 * cfg.domain.distance_to_boundary(balls[i].centre) / norms[i]);
    for (std::size_t j = 0; j < i; ++j)
      s = std::min(s, 0.25 * norm(balls[i].centre - balls[j].centre) / (norms[i] + norms[j]));
  }
  for (std::size_t i = 0; i < balls.size(); ++i) balls[i].frozen_radius = balls[i].radius = s * norms[i];

  auto credit_at = [&](double sc) {
    double c = 0.0;
    for (std::size_t i = 0; i < balls.size(); ++i)
      if (norms[i] > 0.0) c += radius_at(balls[i], sc, norms[i]) / sc * lambda_p(sc, alpha, k, p);
    return c;
  };
  auto check_inside = [&](double sc) {
    for (std::size_t i = 0; i < balls.size(); ++i)
      if (!inside(cfg.domain, balls[i].centre, radius_at(balls[i], sc, norms[i])))
        throw ValidationError("collar too thin: a ball leaves the domain");
  };

  while (true) {
    // Earliest s' in [s, tau] at which two balls touch.
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < balls.size(); ++i)
      for (std::size_t j = i + 1; j < balls.size(); ++j) {
        const double d = norm(balls[i].centre - balls[j].centre);
        auto gap = [&](double t) { return radius_at(balls[i], t, norms[i]) + radius_at(balls[j], t, norms[j]) - d; };
        std::vector<double> knots{s};
        for (std::size_t q : {i, j})
          if (norms[q] > 0.0) {
            const double b = balls[q].frozen_radius / norms[q];
            if (b > s && b < tau) knots.push_back(b);
          }
        knots.push_back(tau);
        std::sort(knots.begin(), knots.end());
        if (gap(s) >= 0.0) {
          best = s, bi = i, bj = j;
          continue;
        }
        for (std::size_t q = 0; q + 1 < knots.size(); ++q) {
          const double lo = knots[q], hi = knots[q + 1];
          const double glo = gap(lo), ghi = gap(hi);
          if (ghi >= 0.0) {
            const double t = ghi > glo ? lo + (hi - lo) * (-glo) / (ghi - glo) : hi;
            if (t < best) best = t, bi = i, bj = j;
            break;
          }
        }
      }
    if (!(best <= tau)) break;
    s = std::max(s, best);
    check_inside(s);
    BallEvent ev;
    ev.s = s;
    ev.first = static_cast<int>(bi);
    ev.second = static_cast<int>(bj);
    ev.credit_before = credit_at(s);
    const double ri = radius_at(balls[bi], s, norms[bi]), rj = radius_at(balls[bj], s, norms[bj]);
    Ball merged;
    merged.radius = ri + rj;
    merged.centre = (balls[bi].centre * ri + balls[bj].centre * rj) * (1.0 / (ri + rj));
    merged.cls = G.add(balls[bi].cls, balls[bj].cls);
    merged.members = balls[bi].members;
    merged.members.insert(merged.members.end(), balls[bj].members.begin(), balls[bj].members.end());
    std::sort(merged.members.begin(), merged.members.end());
    merged.frozen_radius = merged.radius;
    const double mn = G.is_zero(merged.cls) ? 0.0 : N(merged.cls);
    balls.erase(balls.begin() + static_cast<long>(bj));
    norms.erase(norms.begin() + static_cast<long>(bj));
    balls[bi] = merged;
    norms[bi] = mn;
    ev.credit_after = credit_at(s);
    if (ev.credit_after < ev.credit_before * (1.0 - 1e-12)) bc.credit_monotone = false;
    bc.events.push_back(ev);
    check_inside(s);
  }
  s = tau;
  check_inside(s);
  for (std::size_t i = 0; i < balls.size(); ++i) balls[i].radius = radius_at(balls[i], s, norms[i]);

  double smin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < balls.size(); ++i)
    if (norms[i] > 0.0) smin = std::min(smin, balls[i].radius / norms[i]);
  bc.s = std::isfinite(smin) ? smin : tau;
  bc.balls = balls;
  for (std::size_t i = 0; i < balls.size(); ++i)
    if (norms[i] > 0.0) bc.credit += balls[i].radius / bc.s * lambda_p(bc.s, alpha, k, p);
  bc.properties = check_ball_properties(cfg, bc, N);
  return bc;
}

BallProperties check_ball_properties(const SingularityConfig& cfg, const BallCollection& bc, const CostedNorm& N) {
  const auto& G = N.group();
  BallProperties pr;
  pr.coverage = true;
  for (std::size_t i = 0; i < cfg.singularities.size(); ++i) {
    const auto& a = cfg.singularities[i];
    if (G.is_zero(a.cls)) continue;
    bool covered = false;
    for (const auto& b : bc.balls)
      if (norm(a.position - b.centre) <= b.radius * (1 + 1e-12) + 1e-15) covered = true;
    if (!covered) pr.coverage = false;
  }
  for (const auto& b : bc.balls) {
    bool meets = false;
    for (int m : b.members)
      if (!G.is_zero(cfg.singularities[static_cast<std::size_t>(m)].cls) &&
          norm(cfg.singularities[static_cast<std::size_t>(m)].position - b.centre) <= b.radius * (1 + 1e-12) + 1e-15)
        meets = true;
    if (!meets) pr.coverage = false;
  }
  pr.disjoint = true;
  for (std::size_t i = 0; i < bc.balls.size(); ++i)
    for (std::size_t j = i + 1; j < bc.balls.size(); ++j)
      if (norm(bc.balls[i].centre - bc.balls[j].centre) < bc.balls[i].radius + bc.balls[j].radius - 1e-12)
        pr.disjoint = false;
  pr.contained = std::all_of(bc.balls.begin(), bc.balls.end(),
                             [&](const Ball& b) { return inside(cfg.domain, b.centre, b.radius); });
  pr.scale_window = bc.tau / 2.0 <= bc.s && bc.s <= bc.tau * (1 + 1e-12);
  for (const auto& b : bc.balls) pr.radius_total += b.radius;
  pr.in_regime = !G.is_zero(cfg.boundary_class);
  pr.radius_bound = 2.0 * bc.tau * (pr.in_regime ? N(cfg.boundary_class) : 0.0);
  pr.radius_sum = pr.radius_total <= pr.radius_bound * (1 + 1e-12);
  return pr;
}

double default_certificate_constant() { return 5.0 / std::log(2.0); }

LowerBoundCertificate lower_bound_certificate(const GroupElement& sigma, double p, double k, double r,
                                              const CostedNorm& norm_p, const CostedNorm& norm_k, double C_k) {
  if (!(r > 0.0 && r <= 0.5)) throw ValidationError("r out of range: need 0 < r <= 1/2");
  if (!(p > k - 1.0 && p < k)) throw ValidationError("certificate needs k - 1 < p < k");
  LowerBoundCertificate c;
  c.p = p;
  c.k = k;
  c.r = r;
  c.alpha_p = norm_p.alpha();
  c.C_p = default_certificate_constant();
  c.C_k = C_k;
  if (norm_p.group().is_zero(sigma)) return c;
  c.sigma_norm_p = norm_p(sigma);
  c.sigma_norm_k = norm_k(sigma);
  c.bound_p = c.sigma_norm_p / (k - p) - c.C_p * c.sigma_norm_p * std::log(c.sigma_norm_p / (c.alpha_p * r));
  c.bound_k = c.sigma_norm_k / (k - p) - C_k * c.sigma_norm_k * (std::log(c.sigma_norm_k / r) + 1.0);
  c.vacuous_p = c.bound_p <= 0.0;
  c.vacuous_k = c.bound_k <= 0.0;
  return c;
}

}  // namespace gammaflow
