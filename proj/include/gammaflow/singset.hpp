#pragma once

// Topological singular set of a discrete S^1-valued field: per-cell windings,
// the dual-grid chain T, grid offset selection by averaging, and the cube and
// mass lower-bound checks.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gammaflow/chains.hpp"
#include "gammaflow/fields.hpp"

namespace gammaflow {

struct SingularChain {
  Chain chain;              // on source_grid.dual(), dimension ambient - 2
  CubicalGrid source_grid;  // grid whose 2-cells carry the classes
  std::map<Cell, GroupElement> per_cell_classes;  // nonzero classes only
  double max_residual = 0.0;  // largest |winding - round(winding)|
};

// Shared Z-norm with the k = 2 circle costs (|d| = 2 pi |d|), used for all
// extracted chains.
std::shared_ptr<const CostedNorm> circle_norm_k2();

// Windings of the 2-cells of `grid` (the field lattice by default; otherwise an
// aligned coarsening whose edges are traced through lattice nodes). Planar
// fields give a 0-chain on dual nodes, 3D fields a 1-chain on dual edges whose
// closedness away from the lattice boundary is asserted. Throws
// ValidationError "grid too coarse at cell (i,j)" on an antipodal edge.
SingularChain extract_Tp(const Field& f, const std::optional<CubicalGrid>& grid = std::nullopt);

// Winding of the field along the boundary of the lattice rectangle
// [lo, hi] (node coordinates), counter-clockwise.
long boundary_winding(const Field& f, std::array<int, 2> lo, std::array<int, 2> hi);

struct OffsetCandidate {
  std::vector<double> offset;
  std::vector<double> f;         // f_j(a) = h^{2-j} D_p(u, R_j), j = 0, 1, 2
  bool continuous = false;       // no singular or antipodal cell meets the 1-skeleton
  bool ineq_top = false;         // f_2 <= (1 + delta) D_p
  bool ineq_skeleton = false;    // f_j <= (1 + delta) (2/delta) C(2,j) D_p for all j
  double worst_ratio = 0.0;      // max_j f_j / bound_j
};

struct OffsetSelection {
  std::vector<double> offset;
  unsigned long seed = 0;
  int samples = 0;
  int admissible = 0;
  double energy = 0.0;               // D_p(u, U')
  std::vector<double> mean;          // empirical mean of f_j over the samples
  std::vector<double> expected;      // C(2,j) D_p(u, U')
  std::vector<double> mean_rel_error;
  OffsetCandidate chosen;
};

// Lattice of spacing h through origin + offset, covering the field's domain.
CubicalGrid offset_grid(const Field& f, double h, const std::vector<double>& offset);

// Draws offsets in [0, h)^2 (jittered strata aligned with the field lattice
// when h is a multiple of its spacing) and returns the admissible one with the
// smallest worst ratio.
// Throws NumericalError carrying the best candidate when none is admissible.
OffsetSelection select_grid_offset(const Field& f, double h, double delta, unsigned long seed = 1,
                                   int min_samples = 64);
// Evaluates one offset.
OffsetCandidate evaluate_offset(const Field& f, double h, double delta, const std::vector<double>& offset);

struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  bool ok = false;
  std::string anchor;
};

// |g|_k/(k-p) - C|g|_k(log(|g|_k/r) + 1) <= h^{p-k} D_p(f, K) + h r D_p(f, dK)
// for the lattice-aligned square K = [lo, hi] (node coordinates).
InequalityReport cube_lower_bound(const Field& f, std::array<int, 2> lo, std::array<int, 2> hi, double r, double p,
                                  double C);

struct MassBoundReport {
  double p = 0.0;
  double delta = 0.0;
  double r = 0.0;
  double C = 0.0;
  double a = 0.0;            // a(p) = (k/p)(3(p-k-n) - 1)
  double c_rdelta = 0.0;     // C(k-p)(a log(k-p) + log(delta^{-k/p}/r) + 1)
  double mass = 0.0;         // M_k(T restricted to U)
  double energy = 0.0;       // D_p(f, U')
  double power_factor = 0.0; // (k-p)^{1-3(k-p)}
  InequalityReport inequality;
  bool regime_reached = false;
};

// (1 - c) M_k(T|U) <= delta^{-1}(1 + r)(k-p)^{1-3(k-p)} D_p(f, U'). With
// c >= 1 the report says "regime not reached" and the inequality is not
// judged.
MassBoundReport mass_bound_report(const SingularChain& T, const Field& f, double p, double delta, double r,
                                  double C = 1.0, const std::optional<Box>& U = std::nullopt);

}  // namespace gammaflow
