#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zrp {

// Flat view of one experiment's JSON document. Field names mirror the
// config keys; parse_config_* validates and fills defaults.
struct ExperimentConfig {
  std::string kind;

  // model
  std::string g_tag = "linear";  // linear | constant | sqrt | table
  std::vector<double> g_table;
  std::map<int, double> kernel = {{-1, 0.5}, {1, 0.5}};
  std::string law_kind = "iid_uniform";  // iid_uniform | iid_density | shift_coupled
  double a0 = 1.0, a1 = 2.0;
  std::string density_tag = "linear_ramp";
  int law_window = 2;
  double rho = 1.0;
  std::string gamma_shape = "constant";  // constant | bump | sine
  double gamma_amp = 0.0, gamma_center = 0.0, gamma_width = 1.0;
  int gamma_mode = 1;
  std::string omega_tag = "xlogx";  // xlogx | quadratic
  double theta = 0.25;

  // numerics
  int N = 32;
  double width = 4.0;
  int J = 256;
  double horizon = 0.1;
  double tail_tol = 1e-12;
  double root_tol = 1e-10;
  double phi_max = 0.0;
  int quad_nodes = 64;
  int probe_depth = 1024;
  double cfl_safety = 0.4;
  int snapshots = 21;
  int grid_cells = 32;
  double h_amp = 0.0, h_center = 2.0, h_width = 1.0;
  std::vector<double> h_time_poly = {1.0};
  double delta = 0.05;
  std::vector<double> epsilons = {0.2, 0.1, 0.05};
  std::vector<int> Ns = {16, 32, 64};
  bool sigma_on_drift = false;
  int family_n_space = 6;
  int family_n_time = 2;
  int optimizer_budget = 4000;

  // replication
  int replicas = 200;
  std::uint64_t seed = 1;

  std::string out_dir = "out";
  std::string canonical_json;  // sorted-key dump used for the config hash
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;
  bool allow_violations = false;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 config, 3 hypothesis, 4 runtime
  std::string message;
  std::vector<std::string> files;
};

// Validates, gates on the model hypotheses, dispatches on kind, and writes
// CSV/JSON outputs plus a manifest. Identical config+seed gives
// byte-identical CSVs.
RunResult run_experiment(const ExperimentConfig& config,
                         const RunOverrides& overrides = {});

}  // namespace zrp
