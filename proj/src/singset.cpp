#include "gammaflow/singset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gammaflow/errors.hpp"

namespace gammaflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAntipodal = kPi - 1e-12;
using Coords = std::array<int, kMaxAmbientDim>;

std::string coords_string(const Coords& z, int dim) {
  std::ostringstream os;
  os << "(";
  for (int a = 0; a < dim; ++a) os << (a ? "," : "") << z[a];
  os << ")";
  return os.str();
}

struct Alignment {
  int m = 1;
  Coords shift{};
};

Alignment align(const Field& f, const CubicalGrid& g) {
  if (g.dim() != f.grid.dim()) throw ValidationError("extraction grid and field differ in dimension");
  Alignment al;
  const double ratio = g.h / f.grid.h;
  al.m = static_cast<int>(std::lround(ratio));
  if (al.m < 1 || std::abs(ratio - al.m) > 1e-9 * ratio)
    throw ValidationError("extraction grid spacing is not a multiple of the field spacing");
  for (int a = 0; a < g.dim(); ++a) {
    const double s = (g.origin[a] - f.grid.origin[a]) / f.grid.h;
    al.shift[a] = static_cast<int>(std::lround(s));
    if (std::abs(s - al.shift[a]) > 1e-9 * std::max(1.0, std::abs(s)))
      throw ValidationError("extraction grid nodes are not lattice nodes");
    if (al.shift[a] < 0 || al.shift[a] + al.m * (g.extents[a] - 1) > f.grid.extents[a] - 1)
      throw ValidationError("extraction grid extends beyond the field lattice");
  }
  return al;
}

// Sum of minimal angle steps along lattice nodes from z in direction axis
// for `steps` steps (negative steps walk backwards).
double walk(const Field& f, Coords z, int axis, int steps, const Coords& cell, int dim) {
  double sum = 0.0;
  const int dir = steps >= 0 ? 1 : -1;
  for (int s = 0; s != steps; s += dir) {
    Coords y = z;
    y[axis] += dir;
    const double d = angle_between(f.values[f.node_index(z)], f.values[f.node_index(y)]);
    if (std::abs(d) >= kAntipodal) throw ValidationError("grid too coarse at cell " + coords_string(cell, dim));
    sum += d;
    z = y;
  }
  return sum;
}

// Winding of the square with corner z (lattice coords) spanned by axes a < b
// with side m, oriented e_a then e_b.
double square_winding(const Field& f, const Coords& z, int a, int b, int m, const Coords& cell, int dim) {
  double s = 0.0;
  Coords c = z;
  s += walk(f, c, a, m, cell, dim);
  c[a] += m;
  s += walk(f, c, b, m, cell, dim);
  c[b] += m;
  s += walk(f, c, a, -m, cell, dim);
  c[a] -= m;
  s += walk(f, c, b, -m, cell, dim);
  return s / (2 * kPi);
}

// Whether any lattice cell of the block [z, z + m) (in every axis) belongs to
// the field's domain.
bool block_in_domain(const Field& f, const Coords& z, int m) {
  const int dim = f.grid.dim();
  Coords o{};
  while (true) {
    Coords c = z;
    for (int a = 0; a < dim; ++a) c[a] += o[a];
    bool inside = true;
    for (int a = 0; a < dim; ++a)
      if (c[a] < 0 || c[a] > f.grid.extents[a] - 2) inside = false;
    if (inside && f.cells[f.cell_index(c)]) return true;
    int a = 0;
    while (a < dim && ++o[a] == m) o[a++] = 0;
    if (a == dim) return false;
  }
}

}  // namespace

std::shared_ptr<const CostedNorm> circle_norm_k2() {
  static const auto norm = std::make_shared<const CostedNorm>(circle_norm(2.0));
  return norm;
}

SingularChain extract_Tp(const Field& f, const std::optional<CubicalGrid>& grid_opt) {
  f.validate();
  const CubicalGrid g = grid_opt ? *grid_opt : f.grid;
  const Alignment al = align(f, g);
  const int dim = g.dim();
  const CubicalGrid dual = g.dual();
  SingularChain out{Chain(dual, dim - 2, circle_norm_k2(), "circle k=2"), g, {}, 0.0};
  const auto& G = circle_norm_k2()->group();

  for (const Cell& K : g.cells(2)) {
    std::array<int, 2> ax{};
    int n = 0;
    for (int a = 0; a < dim; ++a)
      if (K.has_axis(a)) ax[n++] = a;
    // Counted when a neighbouring top cell meets the domain.
    bool counted = false;
    if (dim == 2) {
      Coords z{};
      for (int a = 0; a < dim; ++a) z[a] = al.shift[a] + al.m * K.base[a];
      counted = block_in_domain(f, z, al.m);
    } else {
      int c = 3 - ax[0] - ax[1];
      for (int s : {-1, 0}) {
        Coords cube{};
        for (int a = 0; a < dim; ++a) cube[a] = K.base[a];
        cube[c] += s;
        if (cube[c] < 0 || cube[c] > g.extents[c] - 2) continue;
        Coords z{};
        for (int a = 0; a < dim; ++a) z[a] = al.shift[a] + al.m * cube[a];
        if (block_in_domain(f, z, al.m)) counted = true;
      }
    }
    if (!counted) continue;
    Coords z{};
    for (int a = 0; a < dim; ++a) z[a] = al.shift[a] + al.m * K.base[a];
    const double w = square_winding(f, z, ax[0], ax[1], al.m, K.base, dim);
    const double rounded = std::round(w);
    const double residual = std::abs(w - rounded);
    out.max_residual = std::max(out.max_residual, residual);
    if (residual > 1e-9) throw NumericalError("non-integer winding at cell " + coords_string(K.base, dim));
    const auto d = static_cast<std::int64_t>(rounded);
    if (d == 0) continue;
    out.per_cell_classes[K] = G.element({d});
    if (dim == 2) {
      Cell node;
      node.base = K.base;
      out.chain.add(node, G.element({d}));
      continue;
    }
    const int c = 3 - ax[0] - ax[1];
    const int sign = c == 1 ? -1 : 1;  // parity of (a, b, c)
    if (K.base[c] - 1 < 0 || K.base[c] > dual.extents[c] - 1) continue;  // flux through the lattice boundary
    Cell e;
    e.base = K.base;
    e.base[c] -= 1;
    e.axes = static_cast<std::uint8_t>(1u << c);
    out.chain.add(e, G.element({sign * d}));
  }

  if (dim == 3) {
    const Chain bd = boundary(out.chain);
    for (const auto& [node, coeff] : bd.coeffs()) {
      bool interior = true;
      for (int a = 0; a < 3; ++a)
        if (node.base[a] < 1 || node.base[a] > dual.extents[a] - 2) interior = false;
      if (interior)
        throw NumericalError("extracted chain is not closed at dual node " + coords_string(node.base, 3));
    }
  }
  return out;
}

long boundary_winding(const Field& f, std::array<int, 2> lo, std::array<int, 2> hi) {
  if (f.grid.dim() != 2) throw ValidationError("boundary winding needs a planar field");
  for (int a = 0; a < 2; ++a)
    if (lo[a] < 0 || hi[a] > f.grid.extents[a] - 1 || lo[a] >= hi[a]) throw ValidationError("rectangle outside the lattice");
  Coords z{lo[0], lo[1], 0, 0};
  const Coords cell = z;
  double s = walk(f, z, 0, hi[0] - lo[0], cell, 2);
  z[0] = hi[0];
  s += walk(f, z, 1, hi[1] - lo[1], cell, 2);
  z[1] = hi[1];
  s += walk(f, z, 0, lo[0] - hi[0], cell, 2);
  z[0] = lo[0];
  s += walk(f, z, 1, lo[1] - hi[1], cell, 2);
  return std::lround(s / (2 * kPi));
}

// ------------------------------------------------------------------ offsets

CubicalGrid offset_grid(const Field& f, double h, const std::vector<double>& offset) {
  if (f.grid.dim() != 2) throw ValidationError("offset selection needs a planar field");
  if (!(h > 0.0)) throw ValidationError("grid spacing must be positive");
  CubicalGrid g;
  g.h = h;
  for (int a = 0; a < 2; ++a) {
    const double len = f.grid.h * (f.grid.extents[a] - 1);
    g.origin.push_back(f.grid.origin[a] + offset[a] - h);
    g.extents.push_back(static_cast<int>(std::ceil((len + h - offset[a]) / h)) + 2);
  }
  return g;
}

namespace {

struct DensityMap {
  const Field& f;
  std::vector<double> density;  // energy per unit area of each lattice cell
  std::vector<std::uint8_t> bad;  // singular or antipodal cells
  double energy = 0.0;

  DensityMap(const Field& field) : f(field) {
    const auto ce = cell_energies(f, f.p);
    const double area = f.grid.h * f.grid.h;
    density.resize(ce.size());
    bad.assign(ce.size(), 0);
    for (std::size_t c = 0; c < ce.size(); ++c) {
      density[c] = ce[c] / area;
      energy += ce[c];
      const Coords z = f.cell_coords(c);
      const Vec2 u00 = f.values[f.node_index(z)], u10 = f.values[f.node_index({z[0] + 1, z[1]})],
                 u11 = f.values[f.node_index({z[0] + 1, z[1] + 1})], u01 = f.values[f.node_index({z[0], z[1] + 1})];
      const double d[4] = {angle_between(u00, u10), angle_between(u10, u11), angle_between(u11, u01),
                           angle_between(u01, u00)};
      double s = 0.0;
      for (double v : d) {
        s += v;
        if (std::abs(v) >= kAntipodal) bad[c] = 1;
      }
      if (std::abs(s) > kPi) bad[c] = 1;
    }
  }

  // Lattice column (or row) index containing coordinate x along axis a, or -1.
  int strip(int a, double x) const {
    const double t = (x - f.grid.origin[a]) / f.grid.h;
    const int i = static_cast<int>(std::floor(t));
    return (i < 0 || i > f.grid.extents[a] - 2) ? -1 : i;
  }
};

}  // namespace

namespace {

OffsetCandidate evaluate_offset(const DensityMap& dm, double h, double delta, const std::vector<double>& offset) {
  const Field& f = dm.f;
  OffsetCandidate c;
  c.offset = offset;
  const CubicalGrid g = offset_grid(f, h, offset);
  const double hf = f.grid.h;
  const int nx = f.grid.extents[0] - 1, ny = f.grid.extents[1] - 1;
  double lines = 0.0;
  c.continuous = true;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < g.extents[a]; ++i) {
      const int col = dm.strip(a, g.origin[a] + h * i);
      if (col < 0) continue;
      const int len = a == 0 ? ny : nx;
      for (int k = 0; k < len; ++k) {
        const Coords z = a == 0 ? Coords{col, k, 0, 0} : Coords{k, col, 0, 0};
        const std::size_t id = f.cell_index(z);
        if (!f.cells[id]) continue;
        lines += dm.density[id] * hf;
        if (dm.bad[id]) c.continuous = false;
      }
    }
  double nodes = 0.0;
  for (int j = 0; j < g.extents[1]; ++j)
    for (int i = 0; i < g.extents[0]; ++i) {
      const int cx = dm.strip(0, g.origin[0] + h * i), cy = dm.strip(1, g.origin[1] + h * j);
      if (cx < 0 || cy < 0) continue;
      const std::size_t id = f.cell_index({cx, cy, 0, 0});
      if (f.cells[id]) nodes += dm.density[id];
    }
  c.f = {h * h * nodes, h * lines, dm.energy};
  const double D = dm.energy;
  const double binom[3] = {1.0, 2.0, 1.0};
  c.ineq_top = c.f[2] <= (1.0 + delta) * D * (1 + 1e-12);
  c.ineq_skeleton = true;
  for (int j = 0; j < 3; ++j) {
    const double bound = (1.0 + delta) * (2.0 / delta) * binom[j] * D;
    const double ratio = bound > 0.0 ? c.f[j] / bound : 0.0;
    c.worst_ratio = std::max(c.worst_ratio, ratio);
    if (c.f[j] > bound * (1 + 1e-12)) c.ineq_skeleton = false;
  }
  return c;
}

}  // namespace

OffsetCandidate evaluate_offset(const Field& f, double h, double delta, const std::vector<double>& offset) {
  f.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  return evaluate_offset(DensityMap(f), h, delta, offset);
}

OffsetSelection select_grid_offset(const Field& f, double h, double delta, unsigned long seed, int min_samples) {
  f.validate();
  if (f.grid.dim() != 2) throw ValidationError("offset selection needs a planar field");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(h > f.grid.h)) throw ValidationError("offset grid must be coarser than the field lattice");
  min_samples = std::max(min_samples, 64);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> offsets;
  const double ratio = h / f.grid.h;
  const int m = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - m) < 1e-9 * ratio) {
    // Jittered strata, one per lattice cell of [0, h)^2, repeated as needed.
    do {
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
          offsets.push_back({(i + unit(rng)) * f.grid.h, (j + unit(rng)) * f.grid.h});
    } while (static_cast<int>(offsets.size()) < min_samples);
  } else {
    for (int s = 0; s < min_samples; ++s) offsets.push_back({unit(rng) * h, unit(rng) * h});
  }

  OffsetSelection sel;
  sel.seed = seed;
  sel.samples = static_cast<int>(offsets.size());
  sel.mean.assign(3, 0.0);
  std::optional<OffsetCandidate> best, best_any;
  const DensityMap dm(f);
  for (const auto& o : offsets) {
    OffsetCandidate c = evaluate_offset(dm, h, delta, o);
    for (int j = 0; j < 3; ++j) sel.mean[j] += c.f[j] / sel.samples;
    sel.energy = c.f[2];
    const bool ok = c.continuous && c.ineq_top && c.ineq_skeleton;
    if (ok) {
      ++sel.admissible;
      if (!best || c.worst_ratio < best->worst_ratio) best = c;
    }
    if (!best_any || c.worst_ratio < best_any->worst_ratio) best_any = c;
  }
  sel.expected = {sel.energy, 2.0 * sel.energy, sel.energy};
  for (int j = 0; j < 3; ++j)
    sel.mean_rel_error.push_back(sel.expected[j] > 0.0 ? std::abs(sel.mean[j] - sel.expected[j]) / sel.expected[j] : std::abs(sel.mean[j]));
  if (!best) {
    std::ostringstream os;
    os << "no admissible offset among " << sel.samples << " samples; best candidate (" << best_any->offset[0] << ", "
       << best_any->offset[1] << ") "
       << (!best_any->continuous ? "meets a singular cell on the skeleton" : "violates the skeleton energy bound")
       << " (worst ratio " << best_any->worst_ratio << ")";
    throw NumericalError(os.str());
  }
  sel.chosen = *best;
  sel.offset = best->offset;
  return sel;
}

// ------------------------------------------------------------------ lower bounds

InequalityReport cube_lower_bound(const Field& f, std::array<int, 2> lo, std::array<int, 2> hi, double r, double p,
                                  double C) {
  f.validate();
  if (f.grid.dim() != 2) throw ValidationError("cube bound needs a planar field");
  if (hi[0] - lo[0] != hi[1] - lo[1]) throw ValidationError("cube bound needs a square cell");
  if (!(r > 0.0)) throw ValidationError("r must be positive");
  const long gamma = boundary_winding(f, lo, hi);
  const double norm_k = 2 * kPi * std::abs(gamma);
  const double h = f.grid.h * (hi[0] - lo[0]);

  const auto ce = cell_energies(f, p);
  double inside = 0.0;
  for (int j = lo[1]; j < hi[1]; ++j)
    for (int i = lo[0]; i < hi[0]; ++i) inside += ce[f.cell_index({i, j, 0, 0})];
  double trace = 0.0;
  auto edge = [&](Coords a, Coords b) {
    trace += std::pow(std::abs(angle_between(f.values[f.node_index(a)], f.values[f.node_index(b)])), p) *
             std::pow(f.grid.h, 1.0 - p);
  };
  for (int i = lo[0]; i < hi[0]; ++i) {
    edge({i, lo[1]}, {i + 1, lo[1]});
    edge({i, hi[1]}, {i + 1, hi[1]});
  }
  for (int j = lo[1]; j < hi[1]; ++j) {
    edge({lo[0], j}, {lo[0], j + 1});
    edge({hi[0], j}, {hi[0], j + 1});
  }
  InequalityReport rep;
  rep.name = "cube lower bound";
  rep.anchor = "cube lower bound from the k-energy bound";
  rep.lhs = gamma == 0 ? 0.0 : norm_k / (2.0 - p) - C * norm_k * (std::log(norm_k / r) + 1.0);
  rep.rhs = std::pow(h, p - 2.0) * inside + h * r * trace;
  rep.slack = rep.rhs - rep.lhs;
  rep.ok = rep.lhs <= rep.rhs;
  return rep;
}

MassBoundReport mass_bound_report(const SingularChain& T, const Field& f, double p, double delta, double r, double C,
                                  const std::optional<Box>& U) {
  if (!(p > 1.0 && p < 2.0)) throw ValidationError("exponent must lie in (1, 2)");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(r > 0.0)) throw ValidationError("r must be positive");
  const double k = 2.0;
  const double n = f.grid.dim() - 2;
  MassBoundReport rep;
  rep.p = p;
  rep.delta = delta;
  rep.r = r;
  rep.C = C;
  rep.a = (k / p) * (3.0 * (p - k - n) - 1.0);
  const double x = k - p;
  rep.c_rdelta = C * x * (rep.a * std::log(x) + std::log(std::pow(delta, -k / p) / r) + 1.0);
  rep.mass = mass(T.chain, U);
  rep.energy = p_energy(f, p);
  rep.power_factor = std::pow(x, 1.0 - 3.0 * x);
  rep.regime_reached = rep.c_rdelta < 1.0;
  auto& q = rep.inequality;
  q.name = "mass bound";
  q.anchor = "uniform mass bound for the extracted chain";
  q.lhs = (1.0 - rep.c_rdelta) * rep.mass;
  q.rhs = (1.0 + r) / delta * rep.power_factor * rep.energy;
  q.slack = q.rhs - q.lhs;
  q.ok = !rep.regime_reached || q.lhs <= q.rhs;
  return rep;
}

}  // namespace gammaflow
