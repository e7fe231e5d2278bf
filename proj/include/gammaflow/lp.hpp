#pragma once

// Small exact-ish optimization kernels used by the chain module: a revised
// simplex method (dense basis inverse, Bland's rule) for standard-form LPs and
// a successive-shortest-path min-cost flow on uncapacitated arcs.

#include <cstdint>
#include <vector>

namespace gammaflow {

// min c^T x  s.t.  A x = b,  x >= 0.  Columns are sparse.
struct LinearProgram {
  int rows = 0;
  std::vector<std::vector<std::pair<int, double>>> columns;
  std::vector<double> cost;
  std::vector<double> rhs;

  int add_column(std::vector<std::pair<int, double>> entries, double c) {
    columns.push_back(std::move(entries));
    cost.push_back(c);
    return static_cast<int>(columns.size()) - 1;
  }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  std::vector<double> x;
  std::vector<int> basis;  // column index per row; -1 marks a redundant row
  long pivots = 0;
};

// `initial_basis`, when given, must name one column per row forming a
// feasible basis; phase I is then skipped. An infeasible or singular hint is
// ignored and phase I runs as usual.
LpResult solve_lp(const LinearProgram& lp, const std::vector<int>* initial_basis = nullptr,
                  long max_pivots = 2'000'000);

struct FlowArc {
  int from = 0;
  int to = 0;
  double cost = 0.0;  // nonnegative; arcs are uncapacitated
};

struct FlowResult {
  bool feasible = false;
  double cost = 0.0;
  std::vector<std::int64_t> flow;  // per arc
};

// Integer min-cost flow where `net_inflow[v]` is the required inflow minus
// outflow at node v (entries must sum to zero for feasibility).
FlowResult min_cost_flow(int nodes, const std::vector<FlowArc>& arcs, const std::vector<std::int64_t>& net_inflow);

}  // namespace gammaflow
