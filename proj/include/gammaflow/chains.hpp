#pragma once

// Cubical chains with coefficients in a normed abelian group: boundary, mass,
// flat and relative flat norms, cobordism, fillings, grid deformation and
// class-wise mass minimization.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gammaflow/coeffgroup.hpp"

namespace gammaflow {

constexpr int kMaxAmbientDim = 4;

// An axis-aligned cell [base, base + sum_{a in axes} e_a] of the node lattice.
// Orientation is always axis-increasing; signs live in coefficients.
struct Cell {
  std::array<int, kMaxAmbientDim> base{};
  std::uint8_t axes = 0;  // bitmask

  int dim() const;
  bool has_axis(int a) const { return (axes >> a) & 1; }
  auto operator<=>(const Cell&) const = default;
};

Cell make_cell(const std::vector<int>& base, const std::vector<int>& axes);
std::string to_string(const Cell& c);

// Boundary of one oriented cell as (face, sign) pairs.
std::vector<std::pair<Cell, int>> cell_boundary(const Cell& c);

struct Box {
  std::vector<double> lo, hi;
  bool contains_closed(const std::vector<double>& x) const;
  bool contains_open(const std::vector<double>& x) const;
};

// Node lattice origin + h * z with 0 <= z_i < extents_i.
struct CubicalGrid {
  std::vector<double> origin;
  double h = 1.0;
  std::vector<int> extents;

  int dim() const { return static_cast<int>(extents.size()); }
  void validate() const;
  bool contains(const Cell& c) const;
  std::vector<double> node(const std::array<int, kMaxAmbientDim>& z) const;
  std::vector<double> center(const Cell& c) const;
  // Cell-centred translate: nodes of the dual grid sit at the centres of the
  // top-dimensional cells of this grid.
  CubicalGrid dual() const;
  std::vector<Cell> cells(int q) const;
  bool operator==(const CubicalGrid&) const = default;
};

// A subcomplex: every face of the listed top-dimensional cells, or the whole
// grid when no list is given.
struct Complex {
  CubicalGrid grid;
  std::optional<std::set<Cell>> top_cells;

  static Complex full(const CubicalGrid& g) { return Complex{g, std::nullopt}; }
  // Top cells whose closure lies in the closed box.
  static Complex inside(const CubicalGrid& g, const Box& box);
  Complex without(const std::vector<Cell>& removed_top_cells) const;

  bool contains(const Cell& c) const;
  std::vector<Cell> cells(int q) const;
  std::size_t size() const;  // number of cells of every dimension
};

class Chain {
 public:
  Chain(CubicalGrid grid, int dim, std::shared_ptr<const CostedNorm> norm, std::string norm_ref = "");

  const CubicalGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const CostedNorm& norm() const { return *norm_; }
  std::shared_ptr<const CostedNorm> norm_ptr() const { return norm_; }
  const CoefficientGroup& group() const { return norm_->group(); }
  const std::string& norm_ref() const { return norm_ref_; }
  const std::map<Cell, GroupElement>& coeffs() const { return coeffs_; }

  // Adds g to the coefficient of c; zero coefficients are dropped.
  void add(const Cell& c, const GroupElement& g);
  GroupElement coeff(const Cell& c) const;
  bool is_zero() const { return coeffs_.empty(); }
  Chain empty_like(int dim) const { return Chain(grid_, dim, norm_, norm_ref_); }

  Chain operator+(const Chain& o) const;
  Chain operator-(const Chain& o) const;
  Chain operator-() const;
  bool operator==(const Chain& o) const { return dim_ == o.dim_ && coeffs_ == o.coeffs_; }

 private:
  void check_compatible(const Chain& o) const;

  CubicalGrid grid_;
  int dim_;
  std::shared_ptr<const CostedNorm> norm_;
  std::string norm_ref_;
  std::map<Cell, GroupElement> coeffs_;
};

Chain boundary(const Chain& S);
// Sum of |coeff| h^dim over cells whose centre lies in the closed region.
double mass(const Chain& S, const std::optional<Box>& region = std::nullopt);
Chain restrict(const Chain& S, const Box& region);

enum class FlatMethod { automatic, lp, flow, exhaustive };
std::string to_string(FlatMethod m);

struct FlatOptions {
  std::optional<Box> relative_to;  // open box U
  std::optional<Complex> complex;  // defaults to the whole grid
  FlatMethod method = FlatMethod::automatic;
};

struct FlatDecomposition {
  Chain P;
  Chain Q;
  double value = 0.0;          // mass(P) + mass(Q), restricted to U in relative mode
  double relaxed_value = 0.0;  // LP optimum before rounding (equals value when integral)
  bool integral = true;
  std::string method;
};

// Minimizes mass(P) + mass(Q) over S = P + dQ. In relative mode cells whose
// centre is outside U are free.
FlatDecomposition flat_norm(const Chain& S, const FlatOptions& opts = {});

struct Cobordism {
  bool cobordant = false;
  std::optional<Chain> witness;  // R with dR = S1 - S2
};
Cobordism cobordant(const Chain& S1, const Chain& S2, const std::optional<Box>& within = std::nullopt);

// Mass-minimal T with dT = P on the complex, or nothing when P is not a
// boundary there. Throws ValidationError when dP != 0.
std::optional<Chain> fill_small_cycle(const Chain& P, const std::optional<Complex>& complex = std::nullopt);

struct PlateauResult {
  Chain minimizer;
  Chain witness;  // R with minimizer = S0 + dR
  double mass = 0.0;
  double input_mass = 0.0;
  bool integral = true;
  std::string method;
};
PlateauResult plateau_minimize(const Chain& S0, const std::optional<Box>& within = std::nullopt,
                               FlatMethod method = FlatMethod::automatic);

struct WeightedPoint {
  std::vector<double> x;
  GroupElement coeff;
};
struct WeightedSegment {
  std::vector<double> a, b;
  GroupElement coeff;
};

struct DeformReport {
  Chain chain;
  double input_mass = 0.0;
  double input_boundary_mass = 0.0;
  double output_mass = 0.0;
  double mass_ratio = 0.0;  // output / input mass (0 for empty input)
  double c_def = 0.0;       // constant in output <= c_def (input + boundary)
  double max_displacement = 0.0;
  double displacement_bound = 0.0;  // 2 * ambient_dim * h
  bool ok = false;
};

// Snaps points to the nearest node.
DeformReport deform_to_grid(const std::vector<WeightedPoint>& points, const CubicalGrid& grid,
                            std::shared_ptr<const CostedNorm> norm, const std::string& norm_ref = "");
// Snaps endpoints and replaces each segment by a staircase of grid edges.
DeformReport deform_to_grid(const std::vector<WeightedSegment>& segments, const CubicalGrid& grid,
                            std::shared_ptr<const CostedNorm> norm, const std::string& norm_ref = "");

}  // namespace gammaflow
