#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zrp/errors.hpp"
#include "zrp/experiment.hpp"

using namespace zrp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("zrp_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kCheckConfig = R"({
  "kind": "check",
  "model": {
    "g": "linear",
    "T": {"-1": 0.5, "1": 0.5},
    "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0},
    "rho": 1.0,
    "omega": {"kind": "xlogx", "theta": 0.25}
  },
  "numerics": {"N": 8, "width": 4.0},
  "replication": {"replicas": 10, "seed": 42},
  "output_dir": "OUTDIR"
})";

std::string with_out(const std::string& text, const fs::path& out) {
  std::string s = text;
  auto pos = s.find("OUTDIR");
  REQUIRE(pos != std::string::npos);
  // JSON needs forward slashes; temp paths on this platform already comply.
  s.replace(pos, 6, out.string());
  return s;
}

}  // namespace

TEST_CASE("config parsing: defaults, unknown keys, bad values") {
  auto c = parse_config_text(R"({"kind": "check"})");
  CHECK(c.g_tag == "linear");
  CHECK(c.N == 32);
  CHECK(c.replicas == 200);

  CHECK_THROWS_WITH_AS(parse_config_text(R"({"kind":"check","typo":1})"),
                       doctest::Contains("typo"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"kind":"check","model":{"bogus":1}})"),
      doctest::Contains("model.bogus"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"kind":"nope"})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({)"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"kind":"check","model":{"T":{"x":0.5}}})"),
      doctest::Contains("model.T"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"kind":"check","numerics":{"N":-1}})"),
      ConfigError);
}

TEST_CASE("check kind passes for the reference model, gates on drift") {
  auto out = temp_dir("check");
  auto cfg = parse_config_text(with_out(kCheckConfig, out));
  auto res = run_experiment(cfg);
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(out / "hypotheses.json"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(slurp(out / "hypotheses.json").find("\"all_pass\": true") !=
        std::string::npos);

  // Drifted kernel fails H1 and exits 3, still writing the report.
  auto out2 = temp_dir("check_bad");
  std::string bad = with_out(kCheckConfig, out2);
  auto pos = bad.find(R"("T": {"-1": 0.5, "1": 0.5})");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, std::string(R"("T": {"-1": 0.5, "1": 0.5})").size(),
              R"("T": {"1": 1.0})");
  auto res2 = run_experiment(parse_config_text(bad));
  CHECK(res2.exit_code == 3);
  CHECK(res2.message.find("H1") != std::string::npos);
  CHECK(fs::exists(out2 / "hypotheses.json"));

  auto over = RunOverrides{};
  over.allow_violations = true;
  auto res3 = run_experiment(parse_config_text(bad), over);
  CHECK(res3.exit_code == 0);
}

TEST_CASE("equilibrium kind writes its artifacts and is byte-stable") {
  const char* text = R"({
    "kind": "equilibrium",
    "model": {"g": "linear", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0},
    "numerics": {"N": 4, "width": 4.0, "horizon": 0.05, "grid_cells": 16},
    "replication": {"replicas": 60, "seed": 7},
    "output_dir": "OUTDIR"
  })";
  auto out_a = temp_dir("eq_a");
  auto out_b = temp_dir("eq_b");
  auto res_a = run_experiment(parse_config_text(with_out(text, out_a)));
  auto res_b = run_experiment(parse_config_text(with_out(text, out_b)));
  REQUIRE(res_a.exit_code == 0);
  REQUIRE(res_b.exit_code == 0);
  CHECK(slurp(out_a / "occupancy.csv") == slurp(out_b / "occupancy.csv"));
  CHECK(slurp(out_a / "summary.json") == slurp(out_b / "summary.json"));

  RunOverrides over;
  over.seed = 8;
  auto out_c = temp_dir("eq_c");
  over.out_dir = out_c.string();
  auto res_c = run_experiment(parse_config_text(with_out(text, out_a)), over);
  REQUIRE(res_c.exit_code == 0);
  CHECK(slurp(out_a / "occupancy.csv") != slurp(out_c / "occupancy.csv"));
}

TEST_CASE("threaded runs reproduce the serial bytes") {
  const char* text = R"({
    "kind": "hydro_compare",
    "model": {"g": "linear", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0,
              "gamma": {"shape": "sine", "amplitude": 0.4}},
    "numerics": {"width": 4.0, "J": 64, "horizon": 0.01, "snapshots": 3,
                  "grid_cells": 16, "Ns": [8, 16]},
    "replication": {"replicas": 24, "seed": 5},
    "output_dir": "OUTDIR"
  })";
  auto out1 = temp_dir("hc1");
  auto out4 = temp_dir("hc4");
  RunOverrides serial;
  serial.threads = 1;
  RunOverrides wide;
  wide.threads = 4;
  auto r1 = run_experiment(parse_config_text(with_out(text, out1)), serial);
  auto r4 = run_experiment(parse_config_text(with_out(text, out4)), wide);
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r4.exit_code == 0);
  CHECK(slurp(out1 / "pde.csv") == slurp(out4 / "pde.csv"));
  CHECK(slurp(out1 / "sim_N8.csv") == slurp(out4 / "sim_N8.csv"));
  CHECK(slurp(out1 / "sim_N16.csv") == slurp(out4 / "sim_N16.csv"));
  CHECK(slurp(out1 / "errors.csv") == slurp(out4 / "errors.csv"));
  CHECK(slurp(out1 / "sim_N8.meta.json").find("\"g\": \"linear\"") !=
        std::string::npos);

  // Shape of the error table: header plus one row per (N, snapshot).
  std::istringstream is(slurp(out1 / "errors.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "N,time,l1_error");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2 * 3);
}

TEST_CASE("runtime failures map to exit code 4") {
  // rho far above the working range triggers OutOfRange inside the run.
  const char* text = R"({
    "kind": "equilibrium",
    "model": {"g": "constant", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 50.0},
    "numerics": {"N": 4, "width": 4.0, "horizon": 0.01, "grid_cells": 16},
    "replication": {"replicas": 100, "seed": 1},
    "output_dir": "OUTDIR"
  })";
  auto out = temp_dir("fail");
  RunOverrides over;
  over.allow_violations = true;  // constant g fails H4 by design
  auto res = run_experiment(parse_config_text(with_out(text, out)), over);
  CHECK(res.exit_code == 4);
}

#ifdef ZRP_TOOL_PATH
TEST_CASE("cli smoke: exit codes 0, 2, 3 through the binary") {
  auto out = temp_dir("cli");
  fs::path cfg = out / "cfg.json";
  {
    std::ofstream os(cfg);
    os << with_out(kCheckConfig, out / "run");
  }
  std::string tool = ZRP_TOOL_PATH;
  auto runc = [&](const std::string& args) {
    std::string cmd = tool + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  CHECK(runc("check --config " + cfg.string()) == 0);
  CHECK(runc("equilibrium --config " + cfg.string()) == 2);  // kind mismatch
  CHECK(runc("check --config /nonexistent.json") == 2);

  fs::path bad = out / "bad.json";
  {
    std::ofstream os(bad);
    std::string text = with_out(kCheckConfig, out / "run2");
    auto pos = text.find(R"("T": {"-1": 0.5, "1": 0.5})");
    text.replace(pos, std::string(R"("T": {"-1": 0.5, "1": 0.5})").size(),
                 R"("T": {"1": 1.0})");
    os << text;
  }
  CHECK(runc("check --config " + bad.string()) == 3);
  CHECK(runc("check --config " + bad.string() + " --allow-violations") == 0);
}
#endif

TEST_CASE("remaining experiment kinds run end to end at small scale") {
  SUBCASE("girsanov") {
    const char* text = R"({
      "kind": "girsanov",
      "model": {"g": "linear", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0},
      "numerics": {"N": 8, "width": 4.0, "horizon": 0.02, "snapshots": 3,
                    "grid_cells": 16, "H": {"amplitude": 0.4, "center": 2.0, "width": 1.0}},
      "replication": {"replicas": 50, "seed": 3},
      "output_dir": "OUTDIR"
    })";
    auto out = temp_dir("k_gir");
    auto res = run_experiment(parse_config_text(with_out(text, out)));
    REQUIRE(res.exit_code == 0);
    CHECK(fs::exists(out / "weights.csv"));
    CHECK(fs::exists(out / "tilted.csv"));
    CHECK(slurp(out / "summary.json").find("mean_exp_weight") !=
          std::string::npos);
  }

  SUBCASE("superexp skips infeasible pairs and reports trends") {
    const char* text = R"({
      "kind": "superexp",
      "model": {"g": "sqrt", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0},
      "numerics": {"width": 4.0, "horizon": 0.02, "snapshots": 5, "grid_cells": 16,
                    "H": {"amplitude": 0.8, "center": 2.0, "width": 1.0},
                    "delta": 0.01, "epsilons": [0.2, 0.05], "Ns": [8, 16]},
      "replication": {"replicas": 100, "seed": 4},
      "output_dir": "OUTDIR"
    })";
    auto out = temp_dir("k_sup");
    auto res = run_experiment(parse_config_text(with_out(text, out)));
    REQUIRE(res.exit_code == 0);
    std::string probe = slurp(out / "probe.csv");
    // eps=0.05 is infeasible at both N (floor(eps N) = 0): two rows remain.
    CHECK(std::count(probe.begin(), probe.end(), '\n') == 1 + 2);
    CHECK(slurp(out / "trend.json").find("bootstrap_confidence") !=
          std::string::npos);
    std::string fser = slurp(out / "field_series.csv");
    CHECK(fser.rfind("epsilon,N,replica,time,field", 0) == 0);
    CHECK(std::count(fser.begin(), fser.end(), '\n') == 1 + 2 * 4 * 5);
  }

  SUBCASE("ldscan") {
    const char* text = R"({
      "kind": "ldscan",
      "model": {"g": "linear", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0,
                "gamma": {"shape": "sine", "amplitude": 0.3}},
      "numerics": {"width": 4.0, "J": 64, "horizon": 0.02, "snapshots": 3,
                    "grid_cells": 16, "H": {"amplitude": 1.0, "center": 2.0, "width": 1.0},
                    "delta": 0.02, "Ns": [8, 16]},
      "replication": {"replicas": 100, "seed": 5},
      "output_dir": "OUTDIR"
    })";
    auto out = temp_dir("k_lds");
    auto res = run_experiment(parse_config_text(with_out(text, out)));
    REQUIRE(res.exit_code == 0);
    std::string scan = slurp(out / "scan.csv");
    CHECK(scan.rfind("N,replicas,hits", 0) == 0);
    CHECK(std::count(scan.begin(), scan.end(), '\n') == 1 + 2);
  }

  SUBCASE("rate_estimate") {
    const char* text = R"({
      "kind": "rate_estimate",
      "model": {"g": "linear", "law": {"kind": "iid_uniform", "a0": 1.0, "a1": 2.0}, "rho": 1.0,
                "gamma": {"shape": "sine", "amplitude": 0.3}},
      "numerics": {"width": 4.0, "J": 64, "horizon": 0.02, "snapshots": 9,
                    "grid_cells": 16, "H": {"amplitude": 0.6, "center": 2.0, "width": 1.0},
                    "family_n_space": 4, "family_n_time": 1, "optimizer_budget": 600},
      "replication": {"replicas": 1, "seed": 6},
      "output_dir": "OUTDIR"
    })";
    auto out = temp_dir("k_rate");
    auto res = run_experiment(parse_config_text(with_out(text, out)));
    REQUIRE(res.exit_code == 0);
    std::string summary = slurp(out / "summary.json");
    CHECK(summary.find("estimate") != std::string::npos);
    CHECK(summary.find("reference") != std::string::npos);
    CHECK(fs::exists(out / "trace.csv"));
  }
}
