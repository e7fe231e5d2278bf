#pragma once

// Lower bounds for the p-energy of planar maps with point singularities:
// annulus estimates, the growth-and-merge ball construction and the evaluated
// lower-bound certificates.

#include <string>
#include <vector>

#include "gammaflow/coeffgroup.hpp"
#include "gammaflow/vec2.hpp"

namespace gammaflow {

// (alpha s)^{k-p} / (k-p).
double lambda_p(double s, double alpha, double k, double p);

// |sigma|_p (Lambda(b/|sigma|_p) - Lambda(a/|sigma|_p)); 0 for sigma = 0.
double annulus_bound(const GroupElement& sigma, double a, double b, double p, const CostedNorm& norm, double k = 2.0);

// p-energy of ((x/|x|)^d) on the annulus a < |x| < b.
double model_annulus_energy(int degree, double a, double b, double p);

struct Domain {
  enum class Kind { disk, box };
  Kind kind = Kind::disk;
  Vec2 centre{0.0, 0.0};
  double radius = 1.0;
  Vec2 lo{-1.0, -1.0}, hi{1.0, 1.0};

  static Domain disk(Vec2 c, double r) { return {Kind::disk, c, r, {}, {}}; }
  static Domain box(Vec2 lo, Vec2 hi) { return {Kind::box, {}, 0.0, lo, hi}; }
  double distance_to_boundary(Vec2 x) const;  // negative outside
};

struct PointSingularity {
  Vec2 position;
  GroupElement cls;
};

struct SingularityConfig {
  Domain domain;
  double collar = 0.5;  // r: singularities keep distance > r from the boundary
  std::vector<PointSingularity> singularities;
  GroupElement boundary_class;

  // Distinct points, distance > r from the boundary, classes summing to the
  // boundary class.
  void validate(const CoefficientGroup& group) const;
};

struct Ball {
  Vec2 centre;
  double radius = 0.0;
  GroupElement cls;
  std::vector<int> members;  // indices into the configuration
  double frozen_radius = 0.0;  // radius does not drop below this while growing
};

struct BallEvent {
  double s = 0.0;
  int first = -1, second = -1;  // merged ball indices before the merge
  double credit_before = 0.0;
  double credit_after = 0.0;
};

struct BallProperties {
  bool coverage = false;       // S_top covered, each ball meets S_top
  bool disjoint = false;       // pairwise disjoint interiors (1e-12 slack)
  bool contained = false;      // strictly inside the domain
  bool scale_window = false;   // tau/2 <= s <= tau
  bool radius_sum = false;     // sum rad <= 2 tau |boundary class|_p
  bool in_regime = true;       // false when the boundary class is trivial
  double radius_total = 0.0;
  double radius_bound = 0.0;
  bool all() const { return coverage && disjoint && contained && scale_window && radius_sum; }
};

struct BallCollection {
  std::vector<Ball> balls;
  double s = 0.0;    // min rad / |class|_p over nontrivial balls
  double tau = 0.0;
  double p = 0.0;
  double credit = 0.0;  // sum over nontrivial balls of (rad/s) Lambda_p(s)
  bool credit_monotone = true;
  std::vector<BallEvent> events;
  BallProperties properties;
};

// Synchronised growth rad = max(frozen, s |class|_p) from a small s0 up to
// tau; touching balls merge into the ball of radius r1 + r2 around the
// radius-weighted centre, which contains both. Throws ValidationError naming
// the failing hypothesis, or "collar too thin" when a ball leaves the domain.
BallCollection ball_construction(const SingularityConfig& cfg, double tau, const CostedNorm& norm, double k = 2.0);

BallProperties check_ball_properties(const SingularityConfig& cfg, const BallCollection& bc, const CostedNorm& norm);

struct LowerBoundCertificate {
  double p = 0.0, k = 2.0, r = 0.0;
  double sigma_norm_p = 0.0, sigma_norm_k = 0.0, alpha_p = 0.0;
  double C_p = 0.0, C_k = 0.0;
  double bound_p = 0.0;  // |s|_p/(k-p) - C_p |s|_p log(|s|_p/(alpha_p r))
  double bound_k = 0.0;  // |s|_k/(k-p) - C_k |s|_k (log(|s|_k/r) + 1)
  bool vacuous_p = false;
  bool vacuous_k = false;
};

// C_p is 5/log 2. Throws ValidationError when r is outside (0, 1/2] or p >= k.
LowerBoundCertificate lower_bound_certificate(const GroupElement& sigma, double p, double k, double r,
                                              const CostedNorm& norm_p, const CostedNorm& norm_k, double C_k);

double default_certificate_constant();  // 5 / log 2

}  // namespace gammaflow
