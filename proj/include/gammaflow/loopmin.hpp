#pragma once

// Minimal p-energies of loops S^1 -> N in a homotopy class, for N = S^1
// (closed form plus a descent oracle) and for targets described by the length
// of the shortest closed geodesic in each class.

#include <vector>

#include "gammaflow/coeffgroup.hpp"
#include "gammaflow/vec2.hpp"

namespace gammaflow {

enum class TargetKind { circle, length_model };

struct LoopTarget {
  TargetKind kind = TargetKind::circle;
  CoefficientGroup group = CoefficientGroup::integers();
  // length_model only: shortest closed geodesic per class. Missing negatives
  // are filled in by symmetry.
  std::vector<std::pair<GroupElement, double>> geodesic_length;

  static LoopTarget circle() { return {}; }
  static LoopTarget length_model(CoefficientGroup g, std::vector<std::pair<GroupElement, double>> lengths);
  void validate() const;
};

// Closed form: 2 pi |d|^p on the circle, (2 pi)^{1-p} l(sigma)^p for a length
// model (constant-speed geodesic loop). Throws "subcritical exponent" for p <= 1.
double energy_Ep(const LoopTarget& target, const GroupElement& sigma, double p);

struct DiscreteLoop {
  std::vector<Vec2> samples;  // sample m is identified with sample 0
  GroupElement cls;
  double p = 2.0;
  bool converged = false;
  double grad_norm = 0.0;
};

// sum_i |g_{i+1} - g_i|^p / dt^{p-1} with dt = 2 pi / m.
double discrete_loop_energy(const std::vector<Vec2>& samples, double p);
int loop_winding(const std::vector<Vec2>& samples);

struct LoopDescentOptions {
  int max_iterations = 2000;
  double grad_tol = 1e-8;
  double rel_decrease_tol = 1e-12;  // over `stall_window` iterations
  int stall_window = 50;
  double perturbation = 0.1;  // amplitude of the initial angular perturbation
  unsigned seed = 1;
};

struct LoopDescentResult {
  DiscreteLoop loop;
  double energy = 0.0;
  double closed_form = 0.0;
  long iterations = 0;
  bool monotone = true;
  bool winding_preserved = true;
};

// Projected gradient descent on the discrete energy over degree-d circle
// loops, starting from a perturbed constant-speed loop.
LoopDescentResult minimize_circle_loop(int degree, double p, int m, const LoopDescentOptions& opts = {});

// Numerical E_p: runs the descent (circle targets only).
double energy_Ep_numerical(const LoopTarget& target, const GroupElement& sigma, double p, int m,
                           const LoopDescentOptions& opts = {});

struct GradientBound {
  double lhs = 0.0;            // max_i |g_{i+1} - g_i| / dt
  double lp_norm = 0.0;        // ||g'||_p
  double alpha = 0.0;          // 1 - 1/p
  double rhs_without_C = 0.0;  // ||g'||_p^{1/alpha}
  double ratio = 0.0;          // lhs / rhs (0 for a constant loop)
};

// Throws NumericalError("not a minimizer") unless the loop converged.
GradientBound check_gradient_bound(const DiscreteLoop& loop, double p0);

// Cost table E_p on the classes of the target: the power-law circle table or
// the listed classes of a length model.
CostTable loop_cost_table(const LoopTarget& target, double p);

struct NormRow {
  double p = 0.0;
  double energy = 0.0;  // E_p(sigma)
  double norm = 0.0;    // |sigma|_p
};

struct ConvergingNorms {
  std::vector<NormRow> rows;  // in p_list order
  bool differences_decrease = true;  // |norm_p - norm_last| non-increasing in p
};

// |sigma|_p for each p in p_list (all in (k-1, k]). With m > 0 the circle
// energies come from the descent oracle instead of the closed form.
ConvergingNorms converging_norms(const LoopTarget& target, const GroupElement& sigma, const std::vector<double>& p_list,
                                 int k, int m = 0);

}  // namespace gammaflow
