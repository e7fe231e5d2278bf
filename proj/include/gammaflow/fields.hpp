#pragma once

// S^1-valued fields on a node lattice (planar, or 3D for extraction demos):
// p-Dirichlet energy, Dirichlet data, projected-gradient minimization, the
// cellwise radial collapse and the vortex product constructor.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gammaflow/chains.hpp"
#include "gammaflow/vec2.hpp"

namespace gammaflow {

using Point = std::vector<double>;

struct Field {
  CubicalGrid grid;                 // node lattice, x fastest in storage
  std::vector<Vec2> values;         // unit vectors
  std::vector<std::uint8_t> fixed;  // Dirichlet nodes, never touched by descent
  std::vector<std::uint8_t> cells;  // top cells that belong to the domain
  double p = 1.9;

  std::size_t node_count() const;
  std::size_t cell_count() const;
  std::size_t node_index(const std::array<int, kMaxAmbientDim>& z) const;
  std::size_t cell_index(const std::array<int, kMaxAmbientDim>& z) const;
  std::array<int, kMaxAmbientDim> node_coords(std::size_t idx) const;
  std::array<int, kMaxAmbientDim> cell_coords(std::size_t idx) const;
  Point node_position(std::size_t idx) const;
  Point cell_center(std::size_t idx) const;
  bool has_fixed_nodes() const;

  // Throws ValidationError on size mismatches or non-unit values (1e-12).
  void validate() const;
};

// Every cell counted, no Dirichlet nodes, values from u (default constant e1).
Field box_field(const CubicalGrid& grid, const std::function<Vec2(const Point&)>& u = {}, double p = 1.9);

// Square lattice with nodes at (i - (n-1)/2) h. For an even node count the
// origin is a cell centre.
CubicalGrid centered_grid(int nodes_per_side, double h);
// Unit disk sampled with n nodes per side (h = 2/(n-1)).
CubicalGrid disk_grid(int nodes_per_side);
// Unit disk at a prescribed spacing: 2 ceil(1/h) + 2 nodes per side.
CubicalGrid disk_grid_spacing(double h);

// Unit disk: nodes with |x| >= 1 are Dirichlet with g = (x/|x|)^degree, cells
// count when their centre lies in the open disk. Interior values start from
// the product of |degree| unit vortices spread on the circle of radius 0.3
// (a single vortex sits at the centre).
Field disk_field(const CubicalGrid& grid, int degree, double p = 1.9);

// ((x - a)/|x - a|)^d as a unit vector; e1 at x = a.
Vec2 vortex(const Point& x, const Vec2& a, int degree);

// Winding of a planar cell boundary (sum of minimal angle steps / 2 pi).
double cell_winding(const Field& f, const std::array<int, kMaxAmbientDim>& cell_base);

using CellFilter = std::function<bool(const Point& cell_center)>;

// Sum over domain cells. Regular cells use the edge-averaged chordal
// gradient h^2 (mean_x |du|^2 + mean_y |du|^2)^{p/2} / h^p; planar cells with
// nonzero winding use the radial-cone quadrature of their boundary trace.
double p_energy(const Field& f, double p, const CellFilter& filter = {});
double p_energy(const Field& f, const std::optional<Box>& region = std::nullopt);
// Per-cell energies in cell storage order (0 outside the domain).
std::vector<double> cell_energies(const Field& f, double p);

// Energy of the 0-homogeneous extension over one edge of a square cell with
// half side a, when the trace angle is linear in the polar angle seen from the
// cell centre with total increment delta:
// a^{2-p} (2|delta|/pi)^p K(p) / (2-p), K(p) = int_{-1}^1 (1+t^2)^{-p/2} dt.
// Exact for x/|x| centred in the cell.
double cone_edge_energy(double half_side, double delta, double p);

struct DescentConfig {
  int max_iterations = 20000;
  double grad_tol = 1e-5;   // on the rms tangential gradient divided by h^2
  double rel_tol = 1e-11;   // relative energy decrease over stall_window
  int stall_window = 200;
  std::vector<double> anneal;  // exponents solved first, in order, as warm starts
};

struct DescentStage {
  double p = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

struct MinimizeResult {
  Field field;
  double energy = 0.0;
  double initial_energy = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  bool monotone = true;
  std::vector<DescentStage> stages;  // anneal stages then the target exponent
};

// Riemannian gradient descent with Barzilai-Borwein steps, Armijo
// backtracking and renormalisation after every step. Non-convergence is
// reported in the result.
MinimizeResult minimize(const Field& f, double p, const DescentConfig& cfg = {});

struct CollapseReport {
  Field field;  // f composed with the cellwise projection
  int j = 2;
  double p = 0.0;
  double h = 0.0;                  // collapse grid spacing
  int cells = 0;                   // collapse cells used
  double collapsed_energy = 0.0;   // D_p(f o Phi, R_j), exact for the sampled trace
  double skeleton_energy = 0.0;    // D_p(f, R_{j-1}) along the cell edges
  double constant_energy = 0.0;    // collapsed / (h/(j-p) skeleton)
  double lp_distance = 0.0;        // int |f - f o Phi|^p over R_j
  double cell_energy = 0.0;        // D_p(f, R_j)
  double constant_distance = 0.0;  // lp_distance / (h^p (h/(j-p) skeleton + cell_energy))
};

// Composes a planar field with x -> c + (h/2)(x - c)/|x - c|_inf on every cell
// of `grid` that lies inside the field's domain. The grid must be aligned
// with the field lattice (spacing a multiple of it, nodes on lattice nodes).
CollapseReport radial_collapse(const Field& f, int j, const CubicalGrid& grid);

struct PolarCollapseReport {
  double collapsed_energy = 0.0;  // D_p(u o Phibar, B_R), two-dimensional quadrature
  double boundary_energy = 0.0;   // D_p(u, dB_R)
  double ratio = 0.0;             // collapsed / (R/(2-p) boundary)
};

// The ball version of the collapse, Phibar(x) = R x/|x|, evaluated by
// quadrature with finite-difference gradients of the composed map.
PolarCollapseReport polar_collapse(const std::function<Vec2(const Point&)>& u, double R, double p,
                                   int angular_nodes = 256);

struct Singularity {
  Vec2 position;
  int degree = 0;
};

struct DipoleSpec {
  std::vector<Singularity> singularities;
  int boundary_degree = 0;
};

// Product of vortices blended with the template's Dirichlet data through a
// discrete harmonic extension of the boundary mismatch.
Field dipole_map(const DipoleSpec& spec, const Field& domain);

}  // namespace gammaflow
