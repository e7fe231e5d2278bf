#include "gammaflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "gammaflow/errors.hpp"
#include "gammaflow/io.hpp"
#include "gammaflow/singset.hpp"

namespace gammaflow {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"domain", {"kind", "collar"}},
      {"boundary", {"degree"}},
      {"sweep", {"p", "max_iterations"}},
      {"grid", {"policy", "nodes", "max_nodes"}},
      {"output", {"directory", "prefix"}},
  };
  return keys;
}

template <class T>
T toml_value(const toml::node& n, const std::string& key) {
  if (auto v = n.value<T>()) return *v;
  throw ValidationError("config key " + key + " has the wrong type");
}

std::string format_p(double p) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << p;
  return os.str();
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  if (domain != "disk") throw ValidationError("domain kind must be \"disk\"");
  if (!(collar > 0.0 && collar <= 0.5)) throw ValidationError("collar width must lie in (0, 1/2]");
  if (p_list.empty()) throw ValidationError("sweep needs at least one exponent");
  for (double p : p_list)
    if (!(p > 1.0 && p < 2.0)) throw ValidationError("sweep exponents must lie in (1, 2)");
  std::set<double> seen(p_list.begin(), p_list.end());
  if (seen.size() != p_list.size()) throw ValidationError("sweep exponents must be distinct");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (policy != "fixed" && policy != "guideline") throw ValidationError("grid policy must be \"fixed\" or \"guideline\"");
  if (nodes < 8) throw ValidationError("grid needs at least 8 nodes per side");
  if (max_nodes < 8) throw ValidationError("max_nodes must be at least 8");
  if (prefix.empty()) throw ValidationError("output prefix must not be empty");
}

RunConfig parse_run_config(const std::string& text) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "invalid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(os.str());
  }
  const auto& allowed = allowed_keys();
  RunConfig cfg;
  for (const auto& [section_key, node] : tbl) {
    const std::string section(section_key.str());
    const auto it = allowed.find(section);
    if (it == allowed.end() || !node.is_table()) throw ValidationError("unknown config section [" + section + "]");
    for (const auto& [k, v] : *node.as_table()) {
      const std::string key(k.str());
      const std::string full = section + "." + key;
      if (!it->second.count(key)) throw ValidationError("unknown config key " + full);
      if (full == "domain.kind") cfg.domain = toml_value<std::string>(v, full);
      else if (full == "domain.collar") cfg.collar = toml_value<double>(v, full);
      else if (full == "boundary.degree") cfg.degree = static_cast<int>(toml_value<std::int64_t>(v, full));
      else if (full == "sweep.max_iterations") cfg.max_iterations = static_cast<int>(toml_value<std::int64_t>(v, full));
      else if (full == "grid.policy") cfg.policy = toml_value<std::string>(v, full);
      else if (full == "grid.nodes") cfg.nodes = static_cast<int>(toml_value<std::int64_t>(v, full));
      else if (full == "grid.max_nodes") cfg.max_nodes = static_cast<int>(toml_value<std::int64_t>(v, full));
      else if (full == "output.directory") cfg.directory = toml_value<std::string>(v, full);
      else if (full == "output.prefix") cfg.prefix = toml_value<std::string>(v, full);
      else if (full == "sweep.p") {
        const auto* arr = v.as_array();
        if (!arr) throw ValidationError("config key sweep.p must be an array");
        cfg.p_list.clear();
        for (const auto& e : *arr) cfg.p_list.push_back(toml_value<double>(e, full));
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

int grid_nodes(const RunConfig& cfg, double p) {
  if (cfg.policy == "fixed") return cfg.nodes;
  const double h = std::pow(2.0 - p, 3.0);
  const double n = std::ceil(2.0 / h) + 1.0;
  return static_cast<int>(std::clamp(n, 16.0, static_cast<double>(cfg.max_nodes)));
}

Extrapolation extrapolate(const std::vector<GammaRow>& rows, int degree) {
  Extrapolation ex;
  ex.target = 2 * kPi * std::abs(degree);
  std::vector<const GammaRow*> ok;
  for (const auto& r : rows)
    if (r.error.empty()) ok.push_back(&r);
  std::sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->p > b->p; });
  if (ok.size() > 3) ok.resize(3);
  ex.points = static_cast<int>(ok.size());
  if (ok.empty()) {
    ex.intercept = ex.rel_error = std::nan("");
    return ex;
  }
  if (ok.size() == 1) {
    ex.intercept = ok[0]->scaled_energy;
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(ok.size());
    for (auto* r : ok) {
      const double x = 2.0 - r->p, y = r->scaled_energy;
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    ex.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    ex.intercept = (sy - ex.slope * sx) / n;
    double ss = 0;
    for (auto* r : ok) {
      const double e = r->scaled_energy - (ex.intercept + ex.slope * (2.0 - r->p));
      ss += e * e;
    }
    ex.residual = std::sqrt(ss / n);
  }
  ex.rel_error = ex.target > 0 ? std::abs(ex.intercept - ex.target) / ex.target : std::abs(ex.intercept);
  return ex;
}

GammaRunResult gamma_run(const RunConfig& cfg, const std::function<void(const std::string&)>& log) {
  cfg.validate();
  std::vector<double> order = cfg.p_list;
  std::sort(order.begin(), order.end(), std::greater<>());
  const CostedNorm norm_k = circle_norm(2.0);
  const GroupElement sigma = norm_k.group().element({cfg.degree});

  struct Solved {
    GammaRow row;
    std::optional<Chain> chain;
  };
  std::vector<Solved> solved;
  std::optional<Field> previous;
  for (double p : order) {
    Solved s;
    GammaRow& row = s.row;
    row.p = p;
    row.nodes = grid_nodes(cfg, p);
    row.chain_file = cfg.prefix + "_chain_p" + format_p(p) + ".json";
    try {
      const CubicalGrid grid = disk_grid(row.nodes);
      row.h = grid.h;
      Field start = disk_field(grid, cfg.degree, p);
      if (previous && previous->grid == grid) start.values = previous->values;
      DescentConfig dc;
      dc.max_iterations = cfg.max_iterations;
      const MinimizeResult m = minimize(start, p, dc);
      row.energy = m.energy;
      row.scaled_energy = (2.0 - p) * m.energy;
      row.iterations = m.iterations;
      row.converged = m.converged;
      previous = m.field;
      s.chain = extract_Tp(m.field).chain;
      row.chain_mass = mass(*s.chain);
      const auto cert = lower_bound_certificate(sigma, p, 2.0, cfg.collar, circle_norm(p), norm_k,
                                                default_certificate_constant());
      row.bound_p = cert.bound_p;
      row.certificate_ok = row.energy >= cert.bound_p;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (log) {
      std::ostringstream os;
      os << "p=" << format_p(p) << " nodes=" << row.nodes;
      if (row.error.empty())
        os << " D_p=" << row.energy << " (2-p)D_p=" << row.scaled_energy << " iterations=" << row.iterations
           << (row.converged ? "" : " (not converged)");
      else
        os << " error: " << row.error;
      log(os.str());
    }
    solved.push_back(std::move(s));
  }
  std::reverse(solved.begin(), solved.end());

  GammaRunResult out;
  for (auto& s : solved) {
    out.rows.push_back(s.row);
    out.chains.push_back(s.chain);
  }
  for (std::size_t i = out.rows.size(); i-- > 0;)
    if (out.chains[i]) {
      out.limit_chain = out.chains[i];
      break;
    }

  const double a = 1.0 / std::sqrt(2.0);
  const Box U{{-a, -a}, {a, a}};
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    auto& row = out.rows[i];
    if (!out.chains[i] || !out.limit_chain) {
      row.flat_dist_to_limit = std::nan("");
      continue;
    }
    try {
      Chain T = *out.chains[i];
      if (!(T.grid() == out.limit_chain->grid())) {
        std::vector<WeightedPoint> pts;
        for (const auto& [c, g] : T.coeffs()) pts.push_back({T.grid().center(c), g});
        T = deform_to_grid(pts, out.limit_chain->grid(), out.limit_chain->norm_ptr(), out.limit_chain->norm_ref()).chain;
      }
      FlatOptions opts;
      opts.relative_to = U;
      row.flat_dist_to_limit = flat_norm(T - *out.limit_chain, opts).value;
    } catch (const std::exception& e) {
      row.flat_dist_to_limit = std::nan("");
      if (row.error.empty()) row.error = std::string("flat distance: ") + e.what();
    }
  }

  if (out.limit_chain) {
    const PlateauResult pl = plateau_minimize(*out.limit_chain);
    out.plateau_chain = pl.minimizer;
    out.plateau_mass = pl.mass;
    out.plateau_cobordant = cobordant(pl.minimizer, *out.limit_chain).cobordant;
  }
  out.extrapolation = extrapolate(out.rows, cfg.degree);
  return out;
}

const std::vector<std::string>& gamma_csv_columns() {
  static const std::vector<std::string> cols{"p",         "h",          "nodes",        "energy",     "scaled_energy",
                                             "iterations", "converged", "chain_mass",   "chain_file", "flat_dist_to_limit",
                                             "bound_p",   "certificate_ok", "error"};
  return cols;
}

std::string gamma_csv(const GammaRunResult& r) {
  std::ostringstream os;
  const auto& cols = gamma_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& row : r.rows) {
    std::string err = row.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    os << number(row.p) << "," << number(row.h) << "," << row.nodes << "," << number(row.energy) << ","
       << number(row.scaled_energy) << "," << row.iterations << "," << (row.converged ? 1 : 0) << ","
       << number(row.chain_mass) << "," << row.chain_file << "," << number(row.flat_dist_to_limit) << ","
       << number(row.bound_p) << "," << (row.certificate_ok ? 1 : 0) << ",\"" << err << "\"\n";
  }
  return os.str();
}

json gamma_json(const GammaRunResult& r, const RunConfig& cfg) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j{{"p", row.p},
           {"h", row.h},
           {"nodes", row.nodes},
           {"energy", row.energy},
           {"scaled_energy", row.scaled_energy},
           {"iterations", row.iterations},
           {"converged", row.converged},
           {"chain_mass", row.chain_mass},
           {"chain_file", row.chain_file},
           {"bound_p", row.bound_p},
           {"certificate_ok", row.certificate_ok},
           {"error", row.error}};
    j["flat_dist_to_limit"] = std::isnan(row.flat_dist_to_limit) ? json(nullptr) : json(row.flat_dist_to_limit);
    rows.push_back(j);
  }
  const auto& ex = r.extrapolation;
  json out{{"schema_version", kSchemaVersion},
           {"config",
            {{"domain", cfg.domain},
             {"collar", cfg.collar},
             {"degree", cfg.degree},
             {"p", cfg.p_list},
             {"max_iterations", cfg.max_iterations},
             {"policy", cfg.policy},
             {"nodes", cfg.nodes},
             {"max_nodes", cfg.max_nodes}}},
           {"rows", rows},
           {"extrapolation",
            {{"intercept", std::isnan(ex.intercept) ? json(nullptr) : json(ex.intercept)},
             {"slope", ex.slope},
             {"residual", ex.residual},
             {"target", ex.target},
             {"rel_error", std::isnan(ex.rel_error) ? json(nullptr) : json(ex.rel_error)},
             {"points", ex.points}}},
           {"plateau", {{"mass", r.plateau_mass}, {"cobordant", r.plateau_cobordant}}}};
  out["limit_chain"] = r.limit_chain ? to_json(*r.limit_chain) : json(nullptr);
  return out;
}

void write_gamma_outputs(const GammaRunResult& r, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.directory, ec);
  if (ec) throw ValidationError("cannot create output directory " + cfg.directory);
  const fs::path dir(cfg.directory);
  write_text_file((dir / (cfg.prefix + ".csv")).string(), gamma_csv(r));
  write_text_file((dir / (cfg.prefix + ".json")).string(), gamma_json(r, cfg).dump(2) + "\n");
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    if (r.chains[i]) write_text_file((dir / r.rows[i].chain_file).string(), to_json(*r.chains[i]).dump(2) + "\n");
}

// ------------------------------------------------------------------ ball I/O

SingularityConfig singularity_config_from_json(const json& j) {
  if (!j.is_object() || j.value("schema_version", 0) != kSchemaVersion)
    throw ValidationError("ball config: unsupported or missing schema_version");
  auto vec2 = [](const json& v, const char* what) {
    if (!v.is_array() || v.size() != 2) throw ValidationError(std::string("ball config: ") + what + " must be [x, y]");
    return Vec2{v[0].get<double>(), v[1].get<double>()};
  };
  const CoefficientGroup Z = CoefficientGroup::integers();
  auto cls = [&](const json& v) {
    if (v.is_number_integer()) return Z.element({v.get<std::int64_t>()});
    return element_from_json(Z, v);
  };
  SingularityConfig cfg;
  try {
    const json& d = j.at("domain");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "disk")
      cfg.domain = Domain::disk(vec2(d.value("centre", json::array({0.0, 0.0})), "centre"), d.at("radius").get<double>());
    else if (kind == "box")
      cfg.domain = Domain::box(vec2(d.at("lo"), "lo"), vec2(d.at("hi"), "hi"));
    else
      throw ValidationError("ball config: domain kind must be disk or box");
    cfg.collar = j.value("collar", 0.5);
    cfg.boundary_class = cls(j.at("boundary_class"));
    for (const auto& s : j.at("singularities")) cfg.singularities.push_back({vec2(s.at("position"), "position"), cls(s.at("class"))});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ball config: ") + e.what());
  }
  return cfg;
}

json to_json(const BallCollection& bc) {
  json balls = json::array();
  for (const auto& b : bc.balls)
    balls.push_back({{"centre", {b.centre.x, b.centre.y}}, {"radius", b.radius}, {"class", to_json(b.cls)}, {"members", b.members}});
  json events = json::array();
  for (const auto& e : bc.events)
    events.push_back({{"s", e.s}, {"first", e.first}, {"second", e.second}, {"credit_before", e.credit_before},
                      {"credit_after", e.credit_after}});
  const auto& pr = bc.properties;
  return {{"schema_version", kSchemaVersion},
          {"tau", bc.tau},
          {"p", bc.p},
          {"s", bc.s},
          {"credit", bc.credit},
          {"credit_monotone", bc.credit_monotone},
          {"balls", balls},
          {"events", events},
          {"properties",
           {{"coverage", pr.coverage},
            {"disjoint", pr.disjoint},
            {"contained", pr.contained},
            {"scale_window", pr.scale_window},
            {"radius_sum", pr.radius_sum},
            {"in_regime", pr.in_regime},
            {"radius_total", pr.radius_total},
            {"radius_bound", pr.radius_bound}}}};
}

json to_json(const LowerBoundCertificate& c) {
  return {{"schema_version", kSchemaVersion},
          {"p", c.p},
          {"k", c.k},
          {"r", c.r},
          {"sigma_norm_p", c.sigma_norm_p},
          {"sigma_norm_k", c.sigma_norm_k},
          {"alpha_p", c.alpha_p},
          {"C_p", c.C_p},
          {"C_k", c.C_k},
          {"bound_p", c.bound_p},
          {"bound_k", c.bound_k},
          {"vacuous_p", c.vacuous_p},
          {"vacuous_k", c.vacuous_k}};
}

}  // namespace gammaflow
