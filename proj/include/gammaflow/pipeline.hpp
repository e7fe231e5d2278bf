#pragma once

// The p-sweep pipeline: minimize on the disk for each exponent, extract the
// singular chains, compare them with the finest one in the relative flat
// norm, minimize mass in the limit class and write CSV + JSON results.

#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gammaflow/ballconstruct.hpp"
#include "gammaflow/chains.hpp"
#include "gammaflow/fields.hpp"

namespace gammaflow {

struct RunConfig {
  // [domain]
  std::string domain = "disk";
  double collar = 0.5;
  // [boundary]
  int degree = 1;
  // [sweep]
  std::vector<double> p_list{1.7, 1.8, 1.9, 1.95};
  int max_iterations = 20000;
  // [grid]
  std::string policy = "fixed";  // "fixed" or "guideline" (h = (2-p)^3, capped)
  int nodes = 128;
  int max_nodes = 512;
  // [output]
  std::string directory = "gamma_out";
  std::string prefix = "run";

  void validate() const;
};

// TOML with sections [domain], [boundary], [sweep], [grid], [output]; unknown
// sections or keys are ValidationErrors.
RunConfig parse_run_config(const std::string& toml_text);
RunConfig load_run_config(const std::string& path);

// Nodes per side used for exponent p.
int grid_nodes(const RunConfig& cfg, double p);

struct GammaRow {
  double p = 0.0;
  double h = 0.0;
  int nodes = 0;
  double energy = 0.0;         // D_p of the computed minimizer
  double scaled_energy = 0.0;  // (2-p) D_p
  long iterations = 0;
  bool converged = false;
  double chain_mass = 0.0;
  std::string chain_file;
  double flat_dist_to_limit = 0.0;
  double bound_p = 0.0;  // lower-bound certificate at r = collar
  bool certificate_ok = false;
  std::string error;  // empty when the row completed
};

struct Extrapolation {
  double intercept = 0.0;  // fitted (2-p) D_p at p = 2
  double slope = 0.0;
  double residual = 0.0;   // rms residual of the fit
  double target = 0.0;     // |degree|_2 = 2 pi |degree|
  double rel_error = 0.0;
  int points = 0;
};

struct GammaRunResult {
  std::vector<GammaRow> rows;         // p ascending
  std::vector<std::optional<Chain>> chains;  // parallel to rows
  std::optional<Chain> limit_chain;   // chain of the largest p
  std::optional<Chain> plateau_chain;
  double plateau_mass = 0.0;
  bool plateau_cobordant = false;
  Extrapolation extrapolation;
};

// Rows are solved from the largest p down, each warm-started from the
// previous one when the grids agree. U is the open square (-1/sqrt 2, 1/sqrt 2)^2.
GammaRunResult gamma_run(const RunConfig& cfg, const std::function<void(const std::string&)>& log = {});

Extrapolation extrapolate(const std::vector<GammaRow>& rows, int degree);

// Fixed CSV columns, in order.
const std::vector<std::string>& gamma_csv_columns();
std::string gamma_csv(const GammaRunResult& r);
nlohmann::json gamma_json(const GammaRunResult& r, const RunConfig& cfg);
// Writes <prefix>.csv, <prefix>.json and one chain file per row into the
// output directory.
void write_gamma_outputs(const GammaRunResult& r, const RunConfig& cfg);

// Ball construction input: {"schema_version", "domain": {"kind": "disk",
// "centre", "radius"} or {"kind": "box", "lo", "hi"}, "collar",
// "boundary_class", "singularities": [{"position", "class"}]} with integer
// classes.
SingularityConfig singularity_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BallCollection& bc);
nlohmann::json to_json(const LowerBoundCertificate& c);

}  // namespace gammaflow
