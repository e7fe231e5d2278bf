#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "gammaflow/ballconstruct.hpp"
#include "gammaflow/chains.hpp"
#include "gammaflow/checks.hpp"
#include "gammaflow/coeffgroup.hpp"
#include "gammaflow/errors.hpp"
#include "gammaflow/fields.hpp"
#include "gammaflow/io.hpp"
#include "gammaflow/pipeline.hpp"
#include "gammaflow/singset.hpp"

using namespace gammaflow;
using nlohmann::json;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string("bad number in ") + what + ": '" + item + "'");
    }
  }
  if (v.empty()) throw ValidationError(std::string(what) + " is empty");
  return v;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const int k = std::stoi(s);
      return {k, k};
    }
    const int a = std::stoi(s.substr(0, dots)), b = std::stoi(s.substr(dots + 2));
    if (a > b) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::exception&) {
    throw ValidationError("bad class range '" + s + "', expected a..b");
  }
}

json to_json(const InequalityReport& r) {
  return {{"name", r.name}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack}, {"ok", r.ok}, {"anchor", r.anchor}};
}

json to_json(const MassBoundReport& m) {
  return {{"p", m.p},
          {"delta", m.delta},
          {"r", m.r},
          {"C", m.C},
          {"a", m.a},
          {"c_rdelta", m.c_rdelta},
          {"mass", m.mass},
          {"energy", m.energy},
          {"power_factor", m.power_factor},
          {"regime_reached", m.regime_reached},
          {"inequality", to_json(m.inequality)}};
}

Chain load_chain(const std::string& path) { return chain_from_json(read_json_file(path)); }

// ------------------------------------------------------------------ subcommands

int norm_table(const std::string& target, const std::string& table_path, const std::string& p_arg,
               const std::string& classes, const std::string& out) {
  const auto ps = parse_doubles(p_arg, "--p");
  const auto [lo, hi] = parse_range(classes);
  std::optional<CostTable> file_table;
  if (!table_path.empty())
    file_table = cost_table_from_json(read_json_file(table_path));
  else if (target != "circle")
    throw ValidationError("unknown target '" + target + "', expected circle or --table");
  if (file_table && file_table->group.rank() != 1)
    throw ValidationError("--classes needs a cost table on a rank one group");

  std::ostringstream csv;
  csv.precision(17);
  csv << "p,class,E_p,norm_p,alpha_p\n";
  for (double p : ps) {
    const CostTable t = file_table ? *file_table : circle_cost_table(p);
    const CostedNorm n(t, p);
    for (int d = lo; d <= hi; ++d) {
      const GroupElement g = t.group.element({d});
      const double e = t.group.is_zero(g) ? 0.0 : t.cost(g).value_or(std::numeric_limits<double>::infinity());
      csv << p << ',' << d << ',' << e << ',' << n(g) << ',' << n.alpha() << '\n';
    }
  }
  emit(csv.str(), out);
  return 0;
}

int solve(const std::string& config) {
  const RunConfig cfg = load_run_config(config);
  const std::filesystem::path dir(cfg.directory);
  std::filesystem::create_directories(dir);
  DescentConfig dc;
  dc.max_iterations = cfg.max_iterations;
  json rows = json::array();
  bool all_converged = true;
  for (double p : cfg.p_list) {
    const int nodes = grid_nodes(cfg, p);
    const Field f0 = disk_field(disk_grid(nodes), cfg.degree, p);
    const MinimizeResult m = minimize(f0, p, dc);
    char name[64];
    std::snprintf(name, sizeof name, "%s_field_p%.4f.gfld", cfg.prefix.c_str(), p);
    write_field(m.field, (dir / name).string());
    rows.push_back({{"p", p},
                    {"nodes", nodes},
                    {"h", m.field.grid.h},
                    {"energy", m.energy},
                    {"scaled_energy", (2 - p) * m.energy},
                    {"iterations", m.iterations},
                    {"grad_norm", m.grad_norm},
                    {"converged", m.converged},
                    {"field_file", name}});
    all_converged = all_converged && m.converged;
  }
  const json summary = {{"schema_version", kSchemaVersion}, {"degree", cfg.degree}, {"rows", rows}};
  write_text_file((dir / (cfg.prefix + "_solve.json")).string(), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  if (!all_converged) {
    std::cerr << "error: descent did not converge for every exponent\n";
    return 3;
  }
  return 0;
}

int extract(const std::string& field_path, const std::string& out, bool ambient3, int coarse,
            const std::string& report_path, double delta, double r) {
  const Field f = read_field(field_path);
  const std::size_t ndim = f.grid.extents.size();
  if (ambient3 && ndim != 3) throw ValidationError("--ambient3 given but the field is " + std::to_string(ndim) + "D");
  if (!ambient3 && ndim != 2) throw ValidationError("the field is " + std::to_string(ndim) + "D, pass --ambient3");
  std::optional<CubicalGrid> grid;
  if (coarse > 1) {
    CubicalGrid g = f.grid;
    g.h *= coarse;
    for (auto& e : g.extents) {
      if ((e - 1) % coarse != 0) throw ValidationError("--coarse must divide the number of field cells");
      e = (e - 1) / coarse + 1;
    }
    grid = g;
  }
  const SingularChain T = extract_Tp(f, grid);
  emit(to_json(T.chain).dump(2) + "\n", out);
  if (!report_path.empty()) {
    json rep = {{"schema_version", kSchemaVersion},
                {"mass", mass(T.chain)},
                {"max_residual", T.max_residual},
                {"classes", T.per_cell_classes.size()}};
    if (ndim == 2) rep["mass_bound"] = to_json(mass_bound_report(T, f, f.p, delta, r));
    write_text_file(report_path, rep.dump(2) + "\n");
  }
  return 0;
}

int flatnorm(const std::string& chain, const std::string& minus, const std::string& box, const std::string& method,
             const std::string& out) {
  Chain S = load_chain(chain);
  if (!minus.empty()) S = S - load_chain(minus);
  FlatOptions opts;
  if (!box.empty()) {
    const auto v = parse_doubles(box, "--relative-box");
    const std::size_t n = S.grid().extents.size();
    if (v.size() != 2 * n)
      throw ValidationError("--relative-box needs " + std::to_string(2 * n) + " numbers: lower corner then upper corner");
    Box b;
    b.lo.assign(v.begin(), v.begin() + static_cast<long>(n));
    b.hi.assign(v.begin() + static_cast<long>(n), v.end());
    opts.relative_to = b;
  }
  if (method == "lp") opts.method = FlatMethod::lp;
  else if (method == "flow") opts.method = FlatMethod::flow;
  else if (method == "exhaustive") opts.method = FlatMethod::exhaustive;
  else if (method != "auto") throw ValidationError("unknown method '" + method + "'");
  const FlatDecomposition d = flat_norm(S, opts);
  const json j = {{"schema_version", kSchemaVersion},
                  {"value", d.value},
                  {"relaxed_value", d.relaxed_value},
                  {"integral", d.integral},
                  {"method", d.method},
                  {"mass", mass(S)},
                  {"P", to_json(d.P)},
                  {"Q", to_json(d.Q)}};
  emit(j.dump(2) + "\n", out);
  return 0;
}

int plateau(const std::string& chain, const std::string& out) {
  const Chain S = load_chain(chain);
  const PlateauResult r = plateau_minimize(S);
  const json j = {{"schema_version", kSchemaVersion},
                  {"mass", r.mass},
                  {"input_mass", r.input_mass},
                  {"integral", r.integral},
                  {"method", r.method},
                  {"minimizer", to_json(r.minimizer)},
                  {"witness", to_json(r.witness)}};
  emit(j.dump(2) + "\n", out);
  return 0;
}

int ball(const std::string& config, double tau, double p, double r, const std::string& out) {
  const SingularityConfig cfg = singularity_config_from_json(read_json_file(config));
  const CostedNorm norm_p = circle_norm(p), norm_k = circle_norm(2.0);
  const BallCollection bc = ball_construction(cfg, tau, norm_p);
  json j = to_json(bc);
  j["schema_version"] = kSchemaVersion;
  j["tau"] = tau;
  j["p"] = p;
  j["certificate"] = to_json(lower_bound_certificate(cfg.boundary_class, p, 2.0, r > 0 ? r : cfg.collar, norm_p, norm_k,
                                                     default_certificate_constant()));
  emit(j.dump(2) + "\n", out);
  return 0;
}

int gamma_run_cmd(const std::string& config) {
  const RunConfig cfg = load_run_config(config);
  const GammaRunResult r = gamma_run(cfg, [](const std::string& line) { std::cerr << line << "\n"; });
  write_gamma_outputs(r, cfg);
  std::cout << gamma_csv(r);
  for (const auto& row : r.rows)
    if (!row.error.empty()) return 3;
  return 0;
}

int verify(const std::string& out, bool quick) {
  auto print = [](const CheckResult& c) {
    std::cerr << (c.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << c.detail << "\n";
  };
  auto results = property_checks(print);
  if (!quick) {
    auto more = acceptance_checks(print);
    results.insert(results.end(), more.begin(), more.end());
  }
  const json rep = check_report(results);
  emit(rep.dump(2) + "\n", out);
  return rep["all_pass"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for p-Dirichlet energies of circle-valued maps"};
  app.require_subcommand(1);

  std::string target = "circle", table, p_arg = "1.5,1.9,1.99", classes = "-3..3", out;
  auto* nt = app.add_subcommand("norm-table", "Costs and induced norms of coefficient classes");
  nt->add_option("--target", target, "Built-in cost table (circle)");
  nt->add_option("--table", table, "Cost table JSON instead of a built-in target");
  nt->add_option("--p", p_arg, "Comma-separated exponents");
  nt->add_option("--classes", classes, "Class range a..b");
  nt->add_option("--out", out, "Output CSV (stdout by default)");

  std::string config;
  auto* so = app.add_subcommand("solve", "Minimize the p-energy on the disk and write fields");
  so->add_option("--config", config, "Run config TOML")->required();

  std::string field;
  bool ambient3 = false;
  int coarse = 1;
  std::string report;
  double delta = 0.5, radius = 0.1;
  auto* ex = app.add_subcommand("extract", "Singular chain of a field");
  ex->add_option("--field", field, "Field file")->required();
  ex->add_option("--out", out, "Chain JSON (stdout by default)");
  ex->add_flag("--ambient3", ambient3, "The field lives on a 3D lattice");
  ex->add_option("--coarse", coarse, "Extract on cells of this many lattice steps");
  ex->add_option("--report", report, "Write the mass and mass-bound report here");
  ex->add_option("--delta", delta, "Mass-bound delta");
  ex->add_option("--r", radius, "Mass-bound r");

  std::string chain, minus, box, method = "auto";
  auto* fn = app.add_subcommand("flatnorm", "Flat norm of a chain");
  fn->add_option("--chain", chain, "Chain JSON")->required();
  fn->add_option("--minus", minus, "Subtract this chain first");
  fn->add_option("--relative-box", box, "Open box U as lo..., hi...");
  fn->add_option("--method", method, "auto, lp, flow or exhaustive");
  fn->add_option("--out", out, "Output JSON (stdout by default)");

  auto* pl = app.add_subcommand("plateau", "Mass-minimal chain in the class of a chain");
  pl->add_option("--chain", chain, "Chain JSON")->required();
  pl->add_option("--out", out, "Output JSON (stdout by default)");

  double tau = 0.01, p = 1.99, r = 0.0;
  auto* ba = app.add_subcommand("ball", "Ball construction and lower-bound certificate");
  ba->add_option("--config", config, "Singularity config JSON")->required();
  ba->add_option("--tau", tau, "Final growth parameter");
  ba->add_option("--p", p, "Exponent");
  ba->add_option("--r", r, "Certificate radius (the collar by default)");
  ba->add_option("--out", out, "Output JSON (stdout by default)");

  auto* gr = app.add_subcommand("gamma-run", "p-sweep with extraction, extrapolation and certificates");
  gr->add_option("--config", config, "Run config TOML")->required();

  bool quick = false;
  auto* ve = app.add_subcommand("verify", "Run the property and acceptance checks");
  ve->add_option("--out", out, "JSON report (stdout by default)");
  ve->add_flag("--quick", quick, "Property checks only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*nt) return norm_table(target, table, p_arg, classes, out);
    if (*so) return solve(config);
    if (*ex) return extract(field, out, ambient3, coarse, report, delta, radius);
    if (*fn) return flatnorm(chain, minus, box, method, out);
    if (*pl) return plateau(chain, out);
    if (*ba) return ball(config, tau, p, r, out);
    if (*gr) return gamma_run_cmd(config);
    if (*ve) return verify(out, quick);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}
