#include "gammaflow/fields.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "gammaflow/errors.hpp"

namespace gammaflow {

namespace {

constexpr double kPi = std::numbers::pi;
using Coords = std::array<int, kMaxAmbientDim>;

template <class F>
double gauss20(F f, double a, double b) {
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 complex_mul(Vec2 a, Vec2 b) { return {a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x}; }
Vec2 complex_conj(Vec2 a) { return {a.x, -a.y}; }

void check_exponent(double p) {
  if (!(p > 1.0 && p < 2.0)) throw ValidationError("exponent must lie in (1, 2)");
}

// K(p) = int_{-1}^{1} (1+t^2)^{-p/2} dt.
double cone_weight(double p) {
  return gauss20([p](double t) { return std::pow(1.0 + t * t, -0.5 * p); }, -1.0, 1.0);
}

// Counter-clockwise corner offsets of a planar cell.
constexpr std::array<std::array<int, 2>, 4> kLoop{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

struct EnergyKernel {
  const Field& f;
  double p;
  double h;
  int dim;
  double cone_coef;  // (h/2)^{2-p} K(p) / (2-p) (2/pi)^p

  EnergyKernel(const Field& field, double p_)
      : f(field), p(p_), h(field.grid.h), dim(field.grid.dim()) {
    check_exponent(p);
    cone_coef = std::pow(0.5 * h, 2.0 - p) * cone_weight(p) / (2.0 - p) * std::pow(2.0 / kPi, p);
  }

  // Energy of one cell for the given node values; accumulates the ambient
  // gradient into grad when non-null.
  double cell(const std::vector<Vec2>& u, const Coords& base, std::vector<Vec2>* grad) const {
    const auto& g = f.grid;
    if (dim == 2) {
      std::array<std::size_t, 4> id;
      for (int c = 0; c < 4; ++c)
        id[c] = static_cast<std::size_t>(base[0] + kLoop[c][0]) +
                static_cast<std::size_t>(g.extents[0]) * static_cast<std::size_t>(base[1] + kLoop[c][1]);
      std::array<double, 4> delta;
      double wsum = 0.0;
      for (int e = 0; e < 4; ++e) {
        delta[e] = angle_between(u[id[e]], u[id[(e + 1) % 4]]);
        wsum += delta[e];
      }
      if (std::abs(wsum) > kPi) {
        double energy = 0.0;
        for (int e = 0; e < 4; ++e) {
          const double ad = std::abs(delta[e]);
          energy += cone_coef * std::pow(ad, p);
          if (grad && ad > 0.0) {
            const double dE = cone_coef * p * std::pow(ad, p - 1.0) * (delta[e] > 0 ? 1.0 : -1.0);
            const Vec2 ua = u[id[e]], ub = u[id[(e + 1) % 4]];
            (*grad)[id[(e + 1) % 4]] += perp(ub) * dE;
            (*grad)[id[e]] -= perp(ua) * dE;
          }
        }
        return energy;
      }
      // a = (0,0), b = (1,0), d = (1,1), c = (0,1) in loop order.
      const Vec2 a = u[id[0]], b = u[id[1]], d = u[id[2]], c = u[id[3]];
      const Vec2 e0 = b - a, e1 = d - c, e2 = c - a, e3 = d - b;
      const double G = 0.5 * (dot(e0, e0) + dot(e1, e1) + dot(e2, e2) + dot(e3, e3)) / (h * h);
      if (G <= 0.0) return 0.0;
      const double energy = h * h * std::pow(G, 0.5 * p);
      if (grad) {
        // dE/dG * dG/d(edge vector) = coef * edge
        const double coef = h * h * 0.5 * p * std::pow(G, 0.5 * p - 1.0) / (h * h);
        (*grad)[id[1]] += e0 * coef;
        (*grad)[id[0]] -= e0 * coef;
        (*grad)[id[2]] += e1 * coef;
        (*grad)[id[3]] -= e1 * coef;
        (*grad)[id[3]] += e2 * coef;
        (*grad)[id[0]] -= e2 * coef;
        (*grad)[id[2]] += e3 * coef;
        (*grad)[id[1]] -= e3 * coef;
      }
      return energy;
    }
    // Higher dimensions: mean squared edge difference per axis.
    const int corners = 1 << dim;
    std::vector<std::size_t> id(corners);
    for (int m = 0; m < corners; ++m) {
      Coords z = base;
      for (int a = 0; a < dim; ++a) z[a] += (m >> a) & 1;
      id[m] = f.node_index(z);
    }
    const double per_axis = 1.0 / static_cast<double>(corners / 2);
    double G = 0.0;
    for (int a = 0; a < dim; ++a)
      for (int m = 0; m < corners; ++m) {
        if ((m >> a) & 1) continue;
        const Vec2 e = u[id[m | (1 << a)]] - u[id[m]];
        G += per_axis * dot(e, e);
      }
    G /= h * h;
    if (G <= 0.0) return 0.0;
    const double vol = std::pow(h, dim);
    const double energy = vol * std::pow(G, 0.5 * p);
    if (grad) {
      const double coef = vol * p * std::pow(G, 0.5 * p - 1.0) * per_axis / (h * h);
      for (int a = 0; a < dim; ++a)
        for (int m = 0; m < corners; ++m) {
          if ((m >> a) & 1) continue;
          const Vec2 e = u[id[m | (1 << a)]] - u[id[m]];
          (*grad)[id[m | (1 << a)]] += e * coef;
          (*grad)[id[m]] -= e * coef;
        }
    }
    return energy;
  }

  double total(const std::vector<Vec2>& u, std::vector<Vec2>* grad) const {
    if (grad) grad->assign(u.size(), Vec2{});
    double e = 0.0;
    for (std::size_t c = 0; c < f.cells.size(); ++c)
      if (f.cells[c]) e += cell(u, f.cell_coords(c), grad);
    return e;
  }
};

// Tangential part of the gradient; zero on Dirichlet nodes.
void project_tangent(const Field& f, const std::vector<Vec2>& u, std::vector<Vec2>& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (f.fixed[i]) {
      g[i] = {};
      continue;
    }
    g[i] -= u[i] * dot(g[i], u[i]);
  }
}

}  // namespace

// ------------------------------------------------------------------ Field

std::size_t Field::node_count() const {
  std::size_t n = 1;
  for (int e : grid.extents) n *= static_cast<std::size_t>(e);
  return n;
}

std::size_t Field::cell_count() const {
  std::size_t n = 1;
  for (int e : grid.extents) n *= static_cast<std::size_t>(std::max(e - 1, 0));
  return n;
}

std::size_t Field::node_index(const Coords& z) const {
  std::size_t idx = 0;
  for (int a = grid.dim() - 1; a >= 0; --a) idx = idx * static_cast<std::size_t>(grid.extents[a]) + z[a];
  return idx;
}

std::size_t Field::cell_index(const Coords& z) const {
  std::size_t idx = 0;
  for (int a = grid.dim() - 1; a >= 0; --a) idx = idx * static_cast<std::size_t>(grid.extents[a] - 1) + z[a];
  return idx;
}

std::array<int, kMaxAmbientDim> Field::node_coords(std::size_t idx) const {
  Coords z{};
  for (int a = 0; a < grid.dim(); ++a) {
    z[a] = static_cast<int>(idx % static_cast<std::size_t>(grid.extents[a]));
    idx /= static_cast<std::size_t>(grid.extents[a]);
  }
  return z;
}

std::array<int, kMaxAmbientDim> Field::cell_coords(std::size_t idx) const {
  Coords z{};
  for (int a = 0; a < grid.dim(); ++a) {
    z[a] = static_cast<int>(idx % static_cast<std::size_t>(grid.extents[a] - 1));
    idx /= static_cast<std::size_t>(grid.extents[a] - 1);
  }
  return z;
}

Point Field::node_position(std::size_t idx) const { return grid.node(node_coords(idx)); }

Point Field::cell_center(std::size_t idx) const {
  Point x = grid.node(cell_coords(idx));
  for (auto& v : x) v += 0.5 * grid.h;
  return x;
}

bool Field::has_fixed_nodes() const {
  return std::any_of(fixed.begin(), fixed.end(), [](std::uint8_t v) { return v != 0; });
}

void Field::validate() const {
  grid.validate();
  if (grid.dim() < 2 || grid.dim() > 3) throw ValidationError("fields live on planar or 3D lattices");
  for (int e : grid.extents)
    if (e < 2) throw ValidationError("field lattice needs at least two nodes per axis");
  if (values.size() != node_count() || fixed.size() != node_count())
    throw ValidationError("field node arrays do not match the lattice");
  if (cells.size() != cell_count()) throw ValidationError("field cell mask does not match the lattice");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!(std::abs(norm(values[i]) - 1.0) <= 1e-12)) {
      std::ostringstream os;
      os << "field value at node " << i << " is not a unit vector";
      throw ValidationError(os.str());
    }
}

Field box_field(const CubicalGrid& grid, const std::function<Vec2(const Point&)>& u, double p) {
  Field f;
  f.grid = grid;
  f.p = p;
  f.values.assign(f.node_count(), Vec2{1.0, 0.0});
  f.fixed.assign(f.node_count(), 0);
  f.cells.assign(f.cell_count(), 1);
  if (u)
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = normalized(u(f.node_position(i)));
  f.validate();
  return f;
}

CubicalGrid centered_grid(int n, double h) {
  if (n < 2) throw ValidationError("need at least two nodes per side");
  const double o = -0.5 * (n - 1) * h;
  return CubicalGrid{{o, o}, h, {n, n}};
}

CubicalGrid disk_grid(int n) {
  if (n < 4) throw ValidationError("disk lattice needs at least 4 nodes per side");
  return centered_grid(n, 2.0 / (n - 1));
}

CubicalGrid disk_grid_spacing(double h) {
  if (!(h > 0.0 && h < 0.5)) throw ValidationError("disk spacing must lie in (0, 0.5)");
  return centered_grid(2 * static_cast<int>(std::ceil(1.0 / h - 1e-12)) + 2, h);
}

Vec2 vortex(const Point& x, const Vec2& a, int degree) {
  const double dx = x[0] - a.x, dy = x[1] - a.y;
  if (dx == 0.0 && dy == 0.0) return {1.0, 0.0};
  return unit_at(degree * std::atan2(dy, dx));
}

Field disk_field(const CubicalGrid& grid, int degree, double p) {
  if (grid.dim() != 2) throw ValidationError("disk fields are planar");
  Field f = box_field(grid, {}, p);
  std::vector<Vec2> centres;
  const int n = std::abs(degree);
  if (n == 1) centres.push_back({0.0, 0.0});
  for (int i = 0; n > 1 && i < n; ++i) centres.push_back(unit_at(2 * kPi * i / n + 0.25) * 0.3);
  const int sign = degree >= 0 ? 1 : -1;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const Point x = f.node_position(i);
    if (std::hypot(x[0], x[1]) >= 1.0) {
      f.fixed[i] = 1;
      f.values[i] = vortex(x, {0.0, 0.0}, degree);
      continue;
    }
    Vec2 v{1.0, 0.0};
    for (const auto& c : centres) v = complex_mul(v, vortex(x, c, sign));
    f.values[i] = normalized(v);
  }
  for (std::size_t c = 0; c < f.cells.size(); ++c) {
    const Point x = f.cell_center(c);
    f.cells[c] = std::hypot(x[0], x[1]) < 1.0 ? 1 : 0;
  }
  return f;
}

double cell_winding(const Field& f, const Coords& base) {
  if (f.grid.dim() != 2) throw ValidationError("cell winding needs a planar field");
  double sum = 0.0;
  for (int e = 0; e < 4; ++e) {
    Coords a = base, b = base;
    a[0] += kLoop[e][0], a[1] += kLoop[e][1];
    b[0] += kLoop[(e + 1) % 4][0], b[1] += kLoop[(e + 1) % 4][1];
    sum += angle_between(f.values[f.node_index(a)], f.values[f.node_index(b)]);
  }
  return sum / (2 * kPi);
}

double cone_edge_energy(double half_side, double delta, double p) {
  check_exponent(p);
  return std::pow(half_side, 2.0 - p) * std::pow(2.0 * std::abs(delta) / kPi, p) * cone_weight(p) / (2.0 - p);
}

std::vector<double> cell_energies(const Field& f, double p) {
  EnergyKernel k(f, p);
  std::vector<double> out(f.cells.size(), 0.0);
  for (std::size_t c = 0; c < f.cells.size(); ++c)
    if (f.cells[c]) out[c] = k.cell(f.values, f.cell_coords(c), nullptr);
  return out;
}

double p_energy(const Field& f, double p, const CellFilter& filter) {
  EnergyKernel k(f, p);
  double e = 0.0;
  for (std::size_t c = 0; c < f.cells.size(); ++c) {
    if (!f.cells[c]) continue;
    if (filter && !filter(f.cell_center(c))) continue;
    e += k.cell(f.values, f.cell_coords(c), nullptr);
  }
  return e;
}

double p_energy(const Field& f, const std::optional<Box>& region) {
  if (!region) return p_energy(f, f.p);
  return p_energy(f, f.p, [&](const Point& x) { return region->contains_closed(x); });
}

// ------------------------------------------------------------------ descent

namespace {

struct StageResult {
  double energy = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  bool monotone = true;
};

double rms_gradient(const Field& f, const std::vector<Vec2>& g) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (f.fixed[i]) continue;
    s += dot(g[i], g[i]);
    ++n;
  }
  if (n == 0) return 0.0;
  return std::sqrt(s / static_cast<double>(n)) / std::pow(f.grid.h, f.grid.dim());
}

StageResult descend(Field& f, double p, const DescentConfig& cfg) {
  EnergyKernel kernel(f, p);
  StageResult r;
  std::vector<Vec2>& u = f.values;
  std::vector<Vec2> g, g_old, u_old, trial;
  double E = kernel.total(u, &g);
  project_tangent(f, u, g);
  std::vector<double> history{E};
  double step = 0.0;
  const double h_scale = std::pow(f.grid.h, 2 - f.grid.dim());

  for (long it = 0; it < cfg.max_iterations; ++it) {
    r.grad_norm = rms_gradient(f, g);
    if (r.grad_norm < cfg.grad_tol) {
      r.converged = true;
      break;
    }
    double gmax = 0.0, gg = 0.0;
    for (const auto& v : g) {
      gmax = std::max(gmax, norm(v));
      gg += dot(v, v);
    }
    if (gmax == 0.0) {
      r.converged = true;
      break;
    }
    if (it == 0) {
      step = 0.05 * h_scale;
    } else {
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const Vec2 s = u[i] - u_old[i], y = g[i] - g_old[i];
        ss += dot(s, s);
        sy += dot(s, y);
      }
      step = sy > 0.0 ? ss / sy : 2.0 * step;
    }
    step = std::min(step, 0.3 / gmax);  // at most ~0.3 rad per node

    bool accepted = false;
    double E_new = E;
    for (int halving = 0; halving < 50; ++halving) {
      trial = u;
      for (std::size_t i = 0; i < u.size(); ++i)
        if (!f.fixed[i]) trial[i] = normalized(u[i] - g[i] * step);
      E_new = kernel.total(trial, nullptr);
      if (E_new <= E - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    u_old = u;
    g_old = g;
    u = trial;
    if (E_new > E) r.monotone = false;
    E = kernel.total(u, &g);
    project_tangent(f, u, g);
    history.push_back(E);
    r.iterations = it + 1;
    const auto w = static_cast<std::size_t>(cfg.stall_window);
    if (history.size() > w && history[history.size() - 1 - w] - E <= cfg.rel_tol * std::abs(E)) break;
  }
  r.energy = E;
  r.grad_norm = rms_gradient(f, g);
  if (r.grad_norm < cfg.grad_tol) r.converged = true;
  return r;
}

}  // namespace

MinimizeResult minimize(const Field& f0, double p, const DescentConfig& cfg) {
  f0.validate();
  check_exponent(p);
  MinimizeResult res;
  res.field = f0;
  res.initial_energy = p_energy(f0, p);
  std::vector<double> schedule = cfg.anneal;
  schedule.push_back(p);
  for (double q : schedule) {
    const double before = p_energy(res.field, q);
    StageResult s = descend(res.field, q, cfg);
    if (s.energy > before) s.monotone = false;
    res.monotone = res.monotone && s.monotone;
    res.iterations += s.iterations;
    res.stages.push_back({q, s.energy, s.grad_norm, s.iterations, s.converged});
  }
  res.field.p = p;
  const auto& last = res.stages.back();
  res.energy = last.energy;
  res.grad_norm = last.grad_norm;
  res.converged = last.converged;
  return res;
}

// ------------------------------------------------------------------ radial collapse

CollapseReport radial_collapse(const Field& f, int j, const CubicalGrid& grid) {
  f.validate();
  const int ambient = f.grid.dim();
  if (j < 2 || j > ambient) throw ValidationError("j out of range: need k <= j <= n + k");
  if (ambient != 2 || grid.dim() != 2) throw ValidationError("radial collapse needs a planar field");
  const double hf = f.grid.h;
  const double ratio = grid.h / hf;
  const int m = static_cast<int>(std::lround(ratio));
  if (m < 1 || std::abs(ratio - m) > 1e-9 * ratio) throw ValidationError("collapse grid spacing is not a multiple of the field spacing");
  std::array<int, 2> shift{};
  for (int a = 0; a < 2; ++a) {
    const double s = (grid.origin[a] - f.grid.origin[a]) / hf;
    shift[a] = static_cast<int>(std::lround(s));
    if (std::abs(s - shift[a]) > 1e-9 * std::max(1.0, std::abs(s)))
      throw ValidationError("collapse grid nodes are not lattice nodes");
  }
  const double p = f.p;
  check_exponent(p);

  CollapseReport rep;
  rep.field = f;
  rep.j = j;
  rep.p = p;
  rep.h = grid.h;
  const double a_half = 0.5 * grid.h;

  auto fine_node = [&](int x, int y) -> std::size_t { return f.node_index(Coords{x, y, 0, 0}); };
  auto perimeter = [m](int q) -> std::array<int, 2> {
    if (q < m) return {q, 0};
    if (q < 2 * m) return {m, q - m};
    if (q < 3 * m) return {m - (q - 2 * m), m};
    return {0, m - (q - 3 * m)};
  };

  std::vector<double> ce = cell_energies(f, p);
  std::set<std::array<int, 3>> edges_seen;
  std::vector<double> node_dist(f.values.size(), -1.0);
  std::vector<std::uint8_t> in_collapse(f.cells.size(), 0);

  for (int cy = 0; cy < grid.extents[1] - 1; ++cy)
    for (int cx = 0; cx < grid.extents[0] - 1; ++cx) {
      const int x0 = shift[0] + cx * m, y0 = shift[1] + cy * m;
      if (x0 < 0 || y0 < 0 || x0 + m > f.grid.extents[0] - 1 || y0 + m > f.grid.extents[1] - 1) continue;
      bool inside = true;
      for (int yy = 0; yy < m && inside; ++yy)
        for (int xx = 0; xx < m && inside; ++xx)
          if (!f.cells[f.cell_index(Coords{x0 + xx, y0 + yy, 0, 0})]) inside = false;
      if (!inside) continue;
      ++rep.cells;

      std::vector<std::size_t> ring(4 * m);
      std::vector<double> delta(4 * m);
      for (int q = 0; q < 4 * m; ++q) {
        auto c = perimeter(q);
        ring[q] = fine_node(x0 + c[0], y0 + c[1]);
      }
      for (int q = 0; q < 4 * m; ++q) delta[q] = angle_between(f.values[ring[q]], f.values[ring[(q + 1) % (4 * m)]]);

      // Cone energy of each side with the trace geodesic between samples.
      for (int side = 0; side < 4; ++side) {
        double side_energy = 0.0;
        for (int k = 0; k < m; ++k) {
          const double t0 = -1.0 + 2.0 * k / m, t1 = -1.0 + 2.0 * (k + 1) / m;
          const double slope = std::abs(delta[side * m + k]) / (t1 - t0);
          if (slope == 0.0) continue;
          side_energy += std::pow(slope, p) * gauss20([p](double t) { return std::pow(1.0 + t * t, 0.5 * p); }, t0, t1);
        }
        rep.collapsed_energy += std::pow(a_half, 2.0 - p) / (2.0 - p) * side_energy;

        // Skeleton energy, each grid edge once.
        const std::array<int, 3> key = side == 0   ? std::array<int, 3>{cx, cy, 0}
                                       : side == 1 ? std::array<int, 3>{cx + 1, cy, 1}
                                       : side == 2 ? std::array<int, 3>{cx, cy + 1, 0}
                                                   : std::array<int, 3>{cx, cy, 1};
        if (edges_seen.insert(key).second)
          for (int k = 0; k < m; ++k) rep.skeleton_energy += std::pow(std::abs(delta[side * m + k]), p) * std::pow(hf, 1.0 - p);
      }

      // Collapsed values at interior nodes.
      for (int yy = 0; yy <= m; ++yy)
        for (int xx = 0; xx <= m; ++xx) {
          const std::size_t id = fine_node(x0 + xx, y0 + yy);
          const bool on_boundary = xx == 0 || yy == 0 || xx == m || yy == m;
          if (on_boundary) {
            node_dist[id] = 0.0;
            continue;
          }
          const double vx = xx - 0.5 * m, vy = yy - 0.5 * m;
          const double vi = std::max(std::abs(vx), std::abs(vy));
          Vec2 value;
          if (vi == 0.0) {
            value = f.values[ring[m + m / 2]];  // the centre takes the trace at the right midpoint
          } else {
            const double px = 0.5 * m + 0.5 * m * vx / vi, py = 0.5 * m + 0.5 * m * vy / vi;
            double s;
            if (py <= 1e-12) s = px;
            else if (px >= m - 1e-12) s = m + py;
            else if (py >= m - 1e-12) s = 2.0 * m + (m - px);
            else s = 3.0 * m + (m - py);
            int k = static_cast<int>(std::floor(s));
            double frac = s - k;
            k %= 4 * m;
            value = normalized(rotate(f.values[ring[k]], frac * delta[k]));
          }
          rep.field.values[id] = value;
          if (vi > 0.0) node_dist[id] = std::pow(norm(f.values[id] - value), p);
        }
      for (int yy = 0; yy < m; ++yy)
        for (int xx = 0; xx < m; ++xx) in_collapse[f.cell_index(Coords{x0 + xx, y0 + yy, 0, 0})] = 1;
    }
  if (rep.cells == 0) throw ValidationError("no collapse cell lies inside the field domain");

  for (std::size_t c = 0; c < f.cells.size(); ++c) {
    if (!in_collapse[c]) continue;
    rep.cell_energy += ce[c];
    const Coords z = f.cell_coords(c);
    double sum = 0.0;
    int cnt = 0;
    for (const auto& o : kLoop) {
      const double d = node_dist[f.node_index(Coords{z[0] + o[0], z[1] + o[1], 0, 0})];
      if (d >= 0.0) sum += d, ++cnt;
    }
    if (cnt > 0) rep.lp_distance += hf * hf * sum / cnt;
  }
  const double scale = grid.h / (j - p);
  rep.constant_energy = rep.skeleton_energy > 0.0 ? rep.collapsed_energy / (scale * rep.skeleton_energy) : 0.0;
  const double rhs9 = std::pow(grid.h, p) * (scale * rep.skeleton_energy + rep.cell_energy);
  rep.constant_distance = rhs9 > 0.0 ? rep.lp_distance / rhs9 : 0.0;
  return rep;
}

PolarCollapseReport polar_collapse(const std::function<Vec2(const Point&)>& u, double R, double p, int angular_nodes) {
  check_exponent(p);
  if (!(R > 0.0)) throw ValidationError("radius must be positive");
  if (angular_nodes < 8) throw ValidationError("need at least 8 angular nodes");
  auto composed = [&](double x, double y) {
    const double r = std::hypot(x, y);
    return u(Point{R * x / r, R * y / r});
  };
  PolarCollapseReport rep;
  const double dphi = 2 * kPi / angular_nodes;
  for (int i = 0; i < angular_nodes; ++i) {
    const double phi = i * dphi;
    const Vec2 w = unit_at(phi), t = perp(w);
    // Boundary: tangential derivative on the circle of radius R.
    const double eb = 1e-5 * R;
    const Vec2 xb = w * R;
    const Vec2 db = (u(Point{xb.x + eb * t.x, xb.y + eb * t.y}) - u(Point{xb.x - eb * t.x, xb.y - eb * t.y})) * (1.0 / (2 * eb));
    rep.boundary_energy += std::pow(norm(db), p) * R * dphi;
    // Interior: s = R v^{1/(2-p)} makes s^{1-p} ds = R^{2-p}/(2-p) dv.
    auto radial = [&](double v) {
      const double s = R * std::pow(v, 1.0 / (2.0 - p));
      // s |grad|^p ds = |s grad|^p s^{1-p} ds; the scaled gradient s grad is
      // differenced directly so that tiny s does not overflow.
      const double eta = 1e-5, e = eta * s;
      const Vec2 x = w * s;
      const Vec2 dx = (composed(x.x + e, x.y) - composed(x.x - e, x.y)) * (1.0 / (2 * eta));
      const Vec2 dy = (composed(x.x, x.y + e) - composed(x.x, x.y - e)) * (1.0 / (2 * eta));
      return std::pow(dot(dx, dx) + dot(dy, dy), 0.5 * p) * std::pow(R, 2.0 - p) / (2.0 - p);
    };
    rep.collapsed_energy += gauss20(radial, 0.0, 1.0) * dphi;
  }
  const double rhs = R / (2.0 - p) * rep.boundary_energy;
  rep.ratio = rhs > 0.0 ? rep.collapsed_energy / rhs : 0.0;
  return rep;
}

// ------------------------------------------------------------------ vortex products

Field dipole_map(const DipoleSpec& spec, const Field& domain) {
  domain.validate();
  if (domain.grid.dim() != 2) throw ValidationError("dipole maps are planar");
  const double h = domain.grid.h;
  const auto& S = spec.singularities;
  long total = 0;
  for (const auto& s : S) total += s.degree;
  if (total != spec.boundary_degree) {
    std::ostringstream os;
    os << "degrees sum to " << total << " but the boundary degree is " << spec.boundary_degree;
    throw ValidationError(os.str());
  }
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t k = i + 1; k < S.size(); ++k)
      if (norm(S[i].position - S[k].position) < 4 * h) {
        std::ostringstream os;
        os << "singularities " << i << " and " << k << " are closer than 4h";
        throw ValidationError(os.str());
      }
  const bool dirichlet = domain.has_fixed_nodes();
  for (std::size_t i = 0; i < S.size(); ++i) {
    double dist = std::numeric_limits<double>::infinity();
    if (dirichlet) {
      for (std::size_t n = 0; n < domain.values.size(); ++n)
        if (domain.fixed[n]) {
          const Point x = domain.node_position(n);
          dist = std::min(dist, std::hypot(x[0] - S[i].position.x, x[1] - S[i].position.y));
        }
    } else {
      for (int a = 0; a < 2; ++a) {
        const double lo = domain.grid.origin[a], hi = lo + h * (domain.grid.extents[a] - 1);
        const double c = a == 0 ? S[i].position.x : S[i].position.y;
        dist = std::min({dist, c - lo, hi - c});
      }
    }
    if (dist < 4 * h) {
      std::ostringstream os;
      os << "singularity " << i << " is within 4h of the boundary";
      throw ValidationError(os.str());
    }
  }

  Field f = domain;
  std::vector<Vec2> product(f.values.size());
  for (std::size_t n = 0; n < f.values.size(); ++n) {
    const Point x = f.node_position(n);
    Vec2 v{1.0, 0.0};
    for (const auto& s : S) v = complex_mul(v, vortex(x, s.position, s.degree));
    product[n] = normalized(v);
  }
  if (!dirichlet) {
    f.values = product;
    return f;
  }

  // Harmonic extension of the boundary mismatch g * conj(product) over the
  // free nodes (absent neighbours are reflecting), by conjugate gradients.
  const std::size_t N = f.values.size();
  std::vector<std::size_t> free_ids;
  std::vector<long> slot(N, -1);
  for (std::size_t n = 0; n < N; ++n)
    if (!f.fixed[n]) slot[n] = static_cast<long>(free_ids.size()), free_ids.push_back(n);
  const std::size_t M = free_ids.size();
  std::vector<std::vector<std::size_t>> nbrs(M);
  for (std::size_t i = 0; i < M; ++i) {
    const Coords z = f.node_coords(free_ids[i]);
    for (int a = 0; a < 2; ++a)
      for (int s : {-1, 1}) {
        Coords y = z;
        y[a] += s;
        if (y[a] < 0 || y[a] >= f.grid.extents[a]) continue;
        nbrs[i].push_back(f.node_index(y));
      }
  }
  std::vector<Vec2> b(M), w(M, Vec2{1.0, 0.0});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t n : nbrs[i])
      if (f.fixed[n]) b[i] += complex_mul(domain.values[n], complex_conj(product[n]));
  auto apply = [&](const std::vector<Vec2>& x, std::vector<Vec2>& y) {
    y.assign(M, Vec2{});
    for (std::size_t i = 0; i < M; ++i) {
      Vec2 acc = x[i] * static_cast<double>(nbrs[i].size());
      for (std::size_t n : nbrs[i])
        if (!f.fixed[n]) acc -= x[static_cast<std::size_t>(slot[n])];
      y[i] = acc;
    }
  };
  std::vector<Vec2> r(M), d, Ad;
  apply(w, Ad);
  double rr = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    r[i] = b[i] - Ad[i];
    rr += dot(r[i], r[i]);
    bb += dot(b[i], b[i]);
  }
  d = r;
  for (std::size_t it = 0; it < 20 * M + 100 && rr > 1e-26 * std::max(bb, 1.0); ++it) {
    apply(d, Ad);
    double dAd = 0.0;
    for (std::size_t i = 0; i < M; ++i) dAd += dot(d[i], Ad[i]);
    if (dAd <= 0.0) break;
    const double alpha = rr / dAd;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      w[i] += d[i] * alpha;
      r[i] -= Ad[i] * alpha;
      rr_new += dot(r[i], r[i]);
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < M; ++i) d[i] = r[i] + d[i] * beta;
  }
  for (std::size_t i = 0; i < M; ++i) {
    const double len = norm(w[i]);
    if (!(len > 1e-6)) {
      std::ostringstream os;
      os << "harmonic blend vanishes at node " << free_ids[i];
      throw NumericalError(os.str());
    }
    f.values[free_ids[i]] = normalized(complex_mul(product[free_ids[i]], w[i] * (1.0 / len)));
  }
  return f;
}

}  // namespace gammaflow
