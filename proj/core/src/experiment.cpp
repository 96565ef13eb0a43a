#include "zrp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "zrp/csv.hpp"
#include "zrp/deviations.hpp"
#include "zrp/errors.hpp"
#include "zrp/version.hpp"

namespace zrp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

template <typename T>
T take(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for key '" + key + "'");
  }
}

void reject_unknown(const json& j, const std::string& block,
                    std::initializer_list<const char*> known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw ConfigError("unknown key '" + block + "." + it.key() + "'");
  }
}

ExperimentConfig from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(doc, "", {"kind", "model", "numerics", "replication",
                           "output_dir"});
  ExperimentConfig c;
  c.kind = take<std::string>(doc, "kind", "");
  c.out_dir = take<std::string>(doc, "output_dir", c.out_dir);

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown(m, "model",
                   {"g", "g_table", "T", "law", "rho", "gamma", "omega"});
    if (m.contains("g")) {
      if (m.at("g").is_string()) {
        c.g_tag = m.at("g").get<std::string>();
      } else if (m.at("g").is_object() && m.at("g").contains("table")) {
        c.g_tag = "table";
        c.g_table = m.at("g").at("table").get<std::vector<double>>();
      } else {
        throw ConfigError("bad value for key 'model.g'");
      }
    }
    if (m.contains("T")) {
      c.kernel.clear();
      for (auto it = m.at("T").begin(); it != m.at("T").end(); ++it) {
        try {
          c.kernel[std::stoi(it.key())] = it.value().get<double>();
        } catch (const std::exception&) {
          throw ConfigError("bad offset in key 'model.T': '" + it.key() + "'");
        }
      }
    }
    if (m.contains("law")) {
      const json& l = m.at("law");
      reject_unknown(l, "model.law", {"kind", "a0", "a1", "density", "window"});
      c.law_kind = take<std::string>(l, "kind", c.law_kind);
      c.a0 = take<double>(l, "a0", c.a0);
      c.a1 = take<double>(l, "a1", c.a1);
      c.density_tag = take<std::string>(l, "density", c.density_tag);
      c.law_window = take<int>(l, "window", c.law_window);
    }
    c.rho = take<double>(m, "rho", c.rho);
    if (m.contains("gamma")) {
      const json& gm = m.at("gamma");
      reject_unknown(gm, "model.gamma",
                     {"shape", "amplitude", "center", "width", "mode"});
      c.gamma_shape = take<std::string>(gm, "shape", c.gamma_shape);
      c.gamma_amp = take<double>(gm, "amplitude", c.gamma_amp);
      c.gamma_center = take<double>(gm, "center", c.gamma_center);
      c.gamma_width = take<double>(gm, "width", c.gamma_width);
      c.gamma_mode = take<int>(gm, "mode", c.gamma_mode);
    }
    if (m.contains("omega")) {
      const json& om = m.at("omega");
      reject_unknown(om, "model.omega", {"kind", "theta"});
      c.omega_tag = take<std::string>(om, "kind", c.omega_tag);
      c.theta = take<double>(om, "theta", c.theta);
    }
  }

  if (doc.contains("numerics")) {
    const json& n = doc.at("numerics");
    reject_unknown(
        n, "numerics",
        {"N", "width", "J", "horizon", "tail_tol", "root_tol", "phi_max",
         "quad_nodes", "probe_depth", "cfl_safety", "snapshots", "grid_cells",
         "H", "delta", "epsilons", "Ns", "sigma_on_drift", "family_n_space",
         "family_n_time", "optimizer_budget"});
    c.N = take<int>(n, "N", c.N);
    c.width = take<double>(n, "width", c.width);
    c.J = take<int>(n, "J", c.J);
    c.horizon = take<double>(n, "horizon", c.horizon);
    c.tail_tol = take<double>(n, "tail_tol", c.tail_tol);
    c.root_tol = take<double>(n, "root_tol", c.root_tol);
    c.phi_max = take<double>(n, "phi_max", c.phi_max);
    c.quad_nodes = take<int>(n, "quad_nodes", c.quad_nodes);
    c.probe_depth = take<int>(n, "probe_depth", c.probe_depth);
    c.cfl_safety = take<double>(n, "cfl_safety", c.cfl_safety);
    c.snapshots = take<int>(n, "snapshots", c.snapshots);
    c.grid_cells = take<int>(n, "grid_cells", c.grid_cells);
    if (n.contains("H")) {
      const json& h = n.at("H");
      reject_unknown(h, "numerics.H",
                     {"amplitude", "center", "width", "time_poly"});
      c.h_amp = take<double>(h, "amplitude", c.h_amp);
      c.h_center = take<double>(h, "center", c.h_center);
      c.h_width = take<double>(h, "width", c.h_width);
      c.h_time_poly =
          take<std::vector<double>>(h, "time_poly", c.h_time_poly);
    }
    c.delta = take<double>(n, "delta", c.delta);
    c.epsilons = take<std::vector<double>>(n, "epsilons", c.epsilons);
    c.Ns = take<std::vector<int>>(n, "Ns", c.Ns);
    c.sigma_on_drift = take<bool>(n, "sigma_on_drift", c.sigma_on_drift);
    c.family_n_space = take<int>(n, "family_n_space", c.family_n_space);
    c.family_n_time = take<int>(n, "family_n_time", c.family_n_time);
    c.optimizer_budget = take<int>(n, "optimizer_budget", c.optimizer_budget);
  }

  if (doc.contains("replication")) {
    const json& r = doc.at("replication");
    reject_unknown(r, "replication", {"replicas", "seed"});
    c.replicas = take<int>(r, "replicas", c.replicas);
    c.seed = take<std::uint64_t>(r, "seed", c.seed);
  }

  // The output location is not part of the experiment's identity.
  json canon = doc;
  canon.erase("output_dir");
  c.canonical_json = canon.dump();
  return c;
}

void validate(const ExperimentConfig& c) {
  static const std::vector<std::string> kinds = {
      "check",    "equilibrium",  "hydro_compare", "girsanov",
      "superexp", "ldscan",       "rate_estimate"};
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
    throw ConfigError("unknown or missing key 'kind' (got '" + c.kind + "')");
  if (c.g_tag != "linear" && c.g_tag != "constant" && c.g_tag != "sqrt" &&
      c.g_tag != "table")
    throw ConfigError("unknown tag in key 'model.g': '" + c.g_tag + "'");
  if (c.law_kind != "iid_uniform" && c.law_kind != "iid_density" &&
      c.law_kind != "shift_coupled")
    throw ConfigError("unknown tag in key 'model.law.kind'");
  if (!(c.a0 > 0.0) || !(c.a0 <= c.a1))
    throw ConfigError("key 'model.law' requires 0 < a0 <= a1");
  if (c.rho < 0.0) throw ConfigError("key 'model.rho' must be >= 0");
  if (c.N < 1) throw ConfigError("key 'numerics.N' must be >= 1");
  if (!(c.width > 0.0)) throw ConfigError("key 'numerics.width' must be > 0");
  if (!(c.horizon > 0.0))
    throw ConfigError("key 'numerics.horizon' must be > 0");
  if (c.snapshots < 2)
    throw ConfigError("key 'numerics.snapshots' must be >= 2");
  if (c.replicas < 1)
    throw ConfigError("key 'replication.replicas' must be >= 1");
  if (c.gamma_shape != "constant" && c.gamma_shape != "bump" &&
      c.gamma_shape != "sine")
    throw ConfigError("unknown tag in key 'model.gamma.shape'");
  if (c.omega_tag != "xlogx" && c.omega_tag != "quadratic")
    throw ConfigError("unknown tag in key 'model.omega.kind'");
}

RateFunction make_g(const ExperimentConfig& c) {
  if (c.g_tag == "linear") return RateFunction::linear(c.probe_depth);
  if (c.g_tag == "constant") return RateFunction::constant(c.probe_depth);
  if (c.g_tag == "sqrt") return RateFunction::sqrt(c.probe_depth);
  return RateFunction::from_table(c.g_table);
}

EnvironmentLaw make_law(const ExperimentConfig& c) {
  if (c.law_kind == "iid_uniform")
    return EnvironmentLaw::iid_uniform(c.a0, c.a1);
  if (c.law_kind == "shift_coupled")
    return EnvironmentLaw::shift_coupled(c.a0, c.a1, c.law_window);
  if (c.density_tag == "linear_ramp") {
    double a0 = c.a0, a1 = c.a1;
    double norm = 0.5 * (a1 - a0) * (a1 - a0);
    return EnvironmentLaw::iid_density(
        a0, a1, [a0, norm](double p) { return (p - a0) / norm; },
        "linear_ramp");
  }
  throw ConfigError("unknown tag in key 'model.law.density'");
}

MomentEnvelope make_omega(const ExperimentConfig& c) {
  if (c.omega_tag == "quadratic") return MomentEnvelope::quadratic(c.theta);
  return MomentEnvelope::xlogx(c.theta);
}

Profile make_gamma(const ExperimentConfig& c) {
  Profile prof;
  prof.base_rho = c.rho;
  const double W = c.width;
  if (c.gamma_shape == "constant") {
    double rho = c.rho;
    prof.value = [rho](double) { return rho; };
    prof.bump_lo = prof.bump_hi = 0.0;
  } else if (c.gamma_shape == "bump") {
    double rho = c.rho, amp = c.gamma_amp, ctr = c.gamma_center,
           wid = c.gamma_width;
    prof.value = [rho, amp, ctr, wid](double u) {
      double r = (u - ctr) / wid;
      if (std::abs(r) >= 1.0) return rho;
      double s = 1.0 - r * r;
      return rho + amp * s * s * s;
    };
    prof.bump_lo = ctr - wid;
    prof.bump_hi = ctr + wid;
  } else {  // sine
    double rho = c.rho, amp = c.gamma_amp, W2 = W;
    int mode = c.gamma_mode;
    prof.value = [rho, amp, W2, mode](double u) {
      return rho + amp * std::sin(2.0 * num::kPi * mode * u / W2);
    };
    prof.bump_lo = 0.0;
    prof.bump_hi = W;
  }
  // Nonnegativity probe.
  for (int i = 0; i <= 256; ++i) {
    if (prof.value(W * i / 256.0) < 0.0)
      throw ConfigError("key 'model.gamma' produces a negative density");
  }
  return prof;
}

TestFunction make_test_function(const ExperimentConfig& c, double horizon) {
  if (c.h_amp == 0.0) return TestFunction();
  if (!(c.h_center - c.h_width >= 0.0) ||
      !(c.h_center + c.h_width <= c.width))
    throw ConfigError("key 'numerics.H' support must lie inside [0,width]");
  return TestFunction::bump(c.h_amp, c.h_center, c.h_width, c.h_time_poly,
                            horizon);
}

struct Workspace {
  RateFunction g;
  TransitionKernel kernel;
  EnvironmentLaw law;
  FugacityMaps maps;
  MomentEnvelope omega;
  std::uint64_t seed;
  fs::path out;
  int threads;
  json manifest_files = json::array();
  std::vector<std::string> files;
};

void write_text(Workspace& ws, const std::string& name,
                const std::string& text) {
  fs::path p = ws.out / name;
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + p.string());
  ws.manifest_files.push_back(name);
  ws.files.push_back(p.string());
}

// Truncated single-site pmf at fugacity phi; tail mass folded into the last
// entry so the vector sums to 1.
std::vector<double> site_pmf_vec(const RateFunction& g, double phi,
                                 double tail_tol) {
  std::vector<double> terms{1.0};
  double term = 1.0, sum = 1.0;
  const int depth = g.probe_depth();
  int K = depth;
  for (int k = 1; k <= depth; ++k) {
    term *= phi / g(k);
    terms.push_back(term);
    sum += term;
    if (k < depth) {
      double ratio = phi / g.suffix_min(k + 1);
      if (ratio < 1.0 && term * ratio / (1.0 - ratio) < tail_tol * sum) {
        K = k;
        break;
      }
    }
  }
  std::vector<double> pmf(terms.begin(), terms.begin() + K + 1);
  double z = 0.0;
  for (double t : pmf) z += t;
  for (double& t : pmf) t /= z;
  return pmf;
}

struct Chi2Accum {
  double stat = 0.0;
  double dof = 0.0;
  json rows = json::array();
};

// Bins with expected count >= 5, tail merged; contributes bins-1 dof.
void chi2_site(Chi2Accum& acc, int site, const std::vector<double>& pmf,
               const std::vector<std::int64_t>& counts, int replicas) {
  std::vector<double> exp_bins;
  std::vector<double> obs_bins;
  double e_acc = 0.0, o_acc = 0.0;
  for (size_t k = 0; k < pmf.size(); ++k) {
    e_acc += pmf[k] * replicas;
    o_acc += k < counts.size() ? double(counts[k]) : 0.0;
    if (e_acc >= 5.0) {
      exp_bins.push_back(e_acc);
      obs_bins.push_back(o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  // Any occupancy beyond the pmf truncation lands in the last bin.
  for (size_t k = pmf.size(); k < counts.size(); ++k) o_acc += counts[k];
  if (!exp_bins.empty()) {
    exp_bins.back() += e_acc;
    obs_bins.back() += o_acc;
  } else {
    exp_bins.push_back(std::max(e_acc, 1e-12));
    obs_bins.push_back(o_acc);
  }
  for (size_t b = 0; b < exp_bins.size(); ++b) {
    double d = obs_bins[b] - exp_bins[b];
    acc.stat += d * d / exp_bins[b];
  }
  acc.dof += double(exp_bins.size()) - 1.0;
  json row;
  row["site"] = site;
  row["bins"] = exp_bins.size();
  acc.rows.push_back(row);
}

double pair_profile_with(const std::vector<double>& u, double width,
                         const TestFunction& G, double t) {
  const int J = static_cast<int>(u.size());
  const double dx = width / J;
  double s = 0.0;
  for (int j = 0; j < J; ++j) s += G(t, (j + 0.5) * dx) * u[j];
  return s * dx;
}

std::vector<double> restrict_cells(const std::vector<double>& fine,
                                   int coarse) {
  const int J = static_cast<int>(fine.size());
  if (J % coarse != 0) throw GridMismatch("cell restriction mismatch");
  const int m = J / coarse;
  std::vector<double> out(coarse, 0.0);
  for (int c = 0; c < coarse; ++c) {
    double s = 0.0;
    for (int i = c * m; i < (c + 1) * m; ++i) s += fine[i];
    out[c] = s / m;
  }
  return out;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b,
                   double width) {
  if (a.size() != b.size()) throw GridMismatch("profile length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * width / double(a.size());
}

// ---------------------------------------------------------------------------
// experiment kinds

void run_check(const ExperimentConfig& c, Workspace& ws,
               const HypothesisReport& rep) {
  json out;
  out["h1"] = {{"pass", rep.h1_pass}, {"evidence", rep.h1_evidence}};
  out["h2"] = {{"pass", rep.h2_pass},
               {"evidence", rep.h2_evidence},
               {"g_star", rep.g_star}};
  out["h3"] = {{"pass", rep.h3_pass},
               {"evidence", rep.h3_evidence},
               {"sigma", rep.sigma},
               {"kappa", rep.kappa}};
  out["h4"] = {{"pass", rep.h4_pass},
               {"evidence", rep.h4_evidence},
               {"g0_star", rep.g0_star}};
  out["all_pass"] = rep.all_pass();
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "hypotheses.json", out.dump(2) + "\n");
}

void run_equilibrium(const ExperimentConfig& c, Workspace& ws) {
  const int N = c.N;
  const int L = static_cast<int>(std::lround(N * c.width));
  RandomSource master(ws.seed);
  Environment env = generate(ws.law, L, master.child(1).bits());
  {
    std::ostringstream os;
    write_csv(env, os);
    write_text(ws, "environment.csv", os.str());
  }
  const double phi = ws.maps.fugacity(c.rho);

  std::vector<std::vector<double>> pmfs(L);
  for (int x = 0; x < L; ++x)
    pmfs[x] = site_pmf_vec(ws.g, phi / env.p[x], c.tail_tol);

  // Occupancy counts at the horizon, pooled over replicas.
  std::vector<std::vector<std::int64_t>> counts(
      L, std::vector<std::int64_t>(64, 0));
  std::vector<std::vector<std::int32_t>> finals(c.replicas);
  RandomSource base = master.child(2);
  num::parallel_replicas(c.replicas, ws.threads, [&](int r) {
    RandomSource local = base.child(r);
    SimulationState state =
        init_equilibrium(env, ws.g, ws.maps, c.rho, N, ws.kernel, local);
    auto snaps = snapshot_grid(c.horizon, 2);
    RunOptions opt;
    opt.grid_cells = c.grid_cells;
    run(state, c.horizon, snaps, local, opt);
    finals[r] = state.config().eta;
  });
  for (int r = 0; r < c.replicas; ++r)
    for (int x = 0; x < L; ++x) {
      int k = finals[r][x];
      if (k >= static_cast<int>(counts[x].size()))
        counts[x].resize(k + 1, 0);
      counts[x][k] += 1;
    }

  Chi2Accum acc;
  std::ostringstream occ;
  occ << "site,k,observed,expected\n";
  for (int x = 0; x < L; ++x) {
    chi2_site(acc, x, pmfs[x], counts[x], c.replicas);
    for (size_t k = 0; k < pmfs[x].size(); ++k) {
      double obs = k < counts[x].size() ? double(counts[x][k]) : 0.0;
      occ << x << ',' << k << ',' << csv::fmt(obs) << ','
          << csv::fmt(pmfs[x][k] * c.replicas) << '\n';
    }
  }
  write_text(ws, "occupancy.csv", occ.str());

  const double pvalue = num::chi2_pvalue(acc.stat, acc.dof);
  json out;
  out["chi2"] = acc.stat;
  out["dof"] = acc.dof;
  out["p_value"] = pvalue;
  out["pass"] = pvalue > 1e-3;
  out["replicas"] = c.replicas;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "summary.json", out.dump(2) + "\n");
}

void run_hydro_compare(const ExperimentConfig& c, Workspace& ws) {
  Profile gamma = make_gamma(c);
  const double rho_hi = std::max(4.0 * c.rho, c.rho + 4.0);
  auto spline = ws.maps.fugacity_spline(rho_hi);
  HydroProblem prob;
  prob.phi = [spline](double u) { return spline(u); };
  prob.sigma = ws.kernel.sigma();
  prob.initial = gamma.value;
  prob.width = c.width;
  prob.horizon = c.horizon;
  prob.sigma_on_drift = c.sigma_on_drift;
  TestFunction H = make_test_function(c, c.horizon);
  if (!H.is_zero()) prob.drive = &H;

  auto times = snapshot_grid(c.horizon, c.snapshots);
  auto pde = solve(prob, c.J, c.cfl_safety, times);
  {
    std::ostringstream os;
    write_csv(pde, os);
    write_text(ws, "pde.csv", os.str());
  }

  std::ostringstream errs;
  errs << "N,time,l1_error\n";
  json summary_rows = json::array();
  RandomSource master(ws.seed);
  std::uint64_t block = 10;
  for (int N : c.Ns) {
    const int L = static_cast<int>(std::lround(N * c.width));
    std::vector<PathRecord> recs(c.replicas);
    RandomSource base = master.child(block++);
    num::parallel_replicas(c.replicas, ws.threads, [&](int r) {
      RandomSource local = base.child(r);
      Environment env = generate(ws.law, L, local.bits());
      SimulationState state =
          init_profile(env, ws.g, ws.maps, gamma.value, N, ws.kernel, local);
      RunOptions opt;
      opt.grid_cells = c.grid_cells;
      recs[r] = run(state, c.horizon, times, local, opt);
    });
    {
      std::ostringstream os;
      write_profiles_csv(recs, os);
      write_text(ws, "sim_N" + std::to_string(N) + ".csv", os.str());
      json meta;
      meta["seed"] = ws.seed;
      meta["N"] = N;
      meta["L"] = L;
      meta["rho"] = c.rho;
      meta["law"] = ws.law.tag();
      meta["g"] = ws.g.tag();
      meta["replicas"] = c.replicas;
      meta["config_hash"] = fnv1a(c.canonical_json);
      write_text(ws, "sim_N" + std::to_string(N) + ".meta.json",
                 meta.dump(2) + "\n");
    }
    // Replica-mean profile per snapshot vs cell-restricted PDE profile.
    double final_err = 0.0;
    for (size_t s = 0; s < times.size(); ++s) {
      std::vector<double> mean(c.grid_cells, 0.0);
      for (int r = 0; r < c.replicas; ++r)
        for (int j = 0; j < c.grid_cells; ++j)
          mean[j] += recs[r].profiles[s][j];
      for (double& v : mean) v /= c.replicas;
      auto ref = restrict_cells(pde[s].u, c.grid_cells);
      double e = l1_distance(mean, ref, c.width);
      errs << N << ',' << csv::fmt(times[s]) << ',' << csv::fmt(e) << '\n';
      if (s + 1 == times.size()) final_err = e;
    }
    json row;
    row["N"] = N;
    row["final_l1_error"] = final_err;
    summary_rows.push_back(row);
  }
  write_text(ws, "errors.csv", errs.str());
  json out;
  out["per_N"] = summary_rows;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "summary.json", out.dump(2) + "\n");
}

void run_girsanov(const ExperimentConfig& c, Workspace& ws) {
  TestFunction H = make_test_function(c, c.horizon);
  if (H.is_zero())
    throw ConfigError("kind girsanov requires a nonzero 'numerics.H'");
  const int N = c.N;
  const int L = static_cast<int>(std::lround(N * c.width));
  auto snaps = snapshot_grid(c.horizon, c.snapshots);
  RandomSource master(ws.seed);

  std::vector<double> logw(c.replicas), base_obs(c.replicas),
      tilt_obs(c.replicas);
  RandomSource base = master.child(1);
  num::parallel_replicas(c.replicas, ws.threads, [&](int r) {
    RandomSource local = base.child(r);
    Environment env = generate(ws.law, L, local.bits());
    SimulationState state =
        init_equilibrium(env, ws.g, ws.maps, c.rho, N, ws.kernel, local);
    RunOptions opt;
    opt.grid_cells = c.grid_cells;
    opt.weight_h = &H;
    PathRecord rec = run(state, c.horizon, snaps, local, opt);
    logw[r] = rec.girsanov_log_weight;
    base_obs[r] =
        pair_profile_with(rec.profiles.back(), c.width, H, c.horizon);
  });
  RandomSource tilted = master.child(2);
  num::parallel_replicas(c.replicas, ws.threads, [&](int r) {
    RandomSource local = tilted.child(r);
    Environment env = generate(ws.law, L, local.bits());
    SimulationState state =
        init_equilibrium(env, ws.g, ws.maps, c.rho, N, ws.kernel, local);
    RunOptions opt;
    opt.grid_cells = c.grid_cells;
    PathRecord rec = run_tilted(state, H, c.horizon, snaps, local, opt);
    tilt_obs[r] = pair_profile_with(rec.profiles.back(), c.width, H,
                                    c.horizon);
  });

  std::ostringstream wcsv;
  wcsv << "replica,log_weight,observable\n";
  for (int r = 0; r < c.replicas; ++r)
    wcsv << r << ',' << csv::fmt(logw[r]) << ',' << csv::fmt(base_obs[r])
         << '\n';
  write_text(ws, "weights.csv", wcsv.str());
  std::ostringstream tcsv;
  tcsv << "replica,observable\n";
  for (int r = 0; r < c.replicas; ++r)
    tcsv << r << ',' << csv::fmt(tilt_obs[r]) << '\n';
  write_text(ws, "tilted.csv", tcsv.str());

  auto mean_se = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= std::max<size_t>(1, v.size() - 1);
    return std::pair<double, double>(m, std::sqrt(var / v.size()));
  };
  std::vector<double> expw(c.replicas), weighted(c.replicas);
  for (int r = 0; r < c.replicas; ++r) {
    expw[r] = std::exp(logw[r]);
    weighted[r] = base_obs[r] * expw[r];
  }
  auto [mw, sw] = mean_se(expw);
  auto [mo, so] = mean_se(weighted);
  auto [mt, st] = mean_se(tilt_obs);
  json out;
  out["mean_exp_weight"] = mw;
  out["se_exp_weight"] = sw;
  out["martingale_z"] = (mw - 1.0) / sw;
  out["weighted_observable_mean"] = mo;
  out["weighted_observable_se"] = so;
  out["tilted_observable_mean"] = mt;
  out["tilted_observable_se"] = st;
  out["consistency_z"] = (mo - mt) / std::sqrt(so * so + st * st);
  out["replicas"] = c.replicas;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "summary.json", out.dump(2) + "\n");
}

void run_superexp(const ExperimentConfig& c, Workspace& ws) {
  TestFunction H = make_test_function(c, c.horizon);
  if (H.is_zero())
    throw ConfigError("kind superexp requires a nonzero 'numerics.H'");
  CylinderObservable psi = CylinderObservable::rate_at_origin(ws.g);
  BaseSpec spec;
  spec.kernel = ws.kernel;
  spec.rho = c.rho;
  spec.width = c.width;
  spec.horizon = c.horizon;
  spec.snapshots = c.snapshots;
  spec.grid_cells = c.grid_cells;
  spec.threads = ws.threads;
  RandomSource master(ws.seed);
  FieldSeries series;
  auto rows = superexp_probe(H, psi, c.delta, c.epsilons, c.Ns, c.replicas,
                             spec, ws.maps, master, &series);

  std::ostringstream os;
  os << "epsilon,N,replicas,hits,p_hat,ci_lo,ci_hi,rate,censored\n";
  for (const auto& r : rows)
    os << csv::fmt(r.eps) << ',' << r.N << ',' << r.replicas << ',' << r.hits
       << ',' << csv::fmt(r.p_hat) << ',' << csv::fmt(r.ci_lo) << ','
       << csv::fmt(r.ci_hi) << ',' << csv::fmt(r.rate) << ','
       << (r.censored ? 1 : 0) << '\n';
  write_text(ws, "probe.csv", os.str());

  std::ostringstream fs;
  fs << "epsilon,N,replica,time,field\n";
  for (const auto& r : series.rows)
    fs << csv::fmt(r.eps) << ',' << r.N << ',' << r.replica << ','
       << csv::fmt(r.time) << ',' << csv::fmt(r.value) << '\n';
  write_text(ws, "field_series.csv", fs.str());

  json verdicts = json::array();
  RandomSource boot(master.child(999).bits());
  for (double eps : c.epsilons) {
    std::vector<ProbeRow> sub;
    for (const auto& r : rows)
      if (r.eps == eps) sub.push_back(r);
    if (sub.size() < 2) continue;  // nothing feasible to compare
    auto v = trend_test(sub, 2000, boot);
    json jv;
    jv["epsilon"] = eps;
    jv["point_nondecreasing"] = v.point_nondecreasing;
    jv["bootstrap_confidence"] = v.bootstrap_confidence;
    jv["pass"] = v.pass;
    verdicts.push_back(jv);
  }
  json out;
  out["trend"] = verdicts;
  out["delta"] = c.delta;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "trend.json", out.dump(2) + "\n");
}

void run_ldscan(const ExperimentConfig& c, Workspace& ws) {
  TestFunction G = make_test_function(c, c.horizon);
  if (G.is_zero())
    throw ConfigError("kind ldscan requires a nonzero 'numerics.H'");
  Profile gamma = make_gamma(c);
  const double rho_hi = std::max(4.0 * c.rho, c.rho + 4.0);
  auto spline = ws.maps.fugacity_spline(rho_hi);
  HydroProblem prob;
  prob.phi = [spline](double u) { return spline(u); };
  prob.sigma = ws.kernel.sigma();
  prob.initial = gamma.value;
  prob.width = c.width;
  prob.horizon = c.horizon;
  auto times = snapshot_grid(c.horizon, c.snapshots);
  auto pde = solve(prob, c.J, c.cfl_safety, times);
  const double ref =
      pair_profile_with(pde.back().u, c.width, G, c.horizon);

  const double delta = c.delta;
  auto event = [&](const TrajectoryMeasure& traj) {
    double v = pair_profile_with(traj.profiles.back(), c.width, G, c.horizon);
    return std::abs(v - ref) > delta;
  };
  BaseSpec spec;
  spec.kernel = ws.kernel;
  spec.rho = c.rho;
  if (c.gamma_shape != "constant") spec.gamma = gamma.value;
  spec.width = c.width;
  spec.horizon = c.horizon;
  spec.snapshots = c.snapshots;
  spec.grid_cells = c.grid_cells;
  spec.threads = ws.threads;
  RandomSource master(ws.seed);
  auto rows = ld_probability_scan(event, c.Ns, c.replicas, spec, ws.maps,
                                  master);
  std::ostringstream os;
  os << "N,replicas,hits,p_hat,ci_lo,ci_hi,rate,censored\n";
  for (const auto& r : rows)
    os << r.N << ',' << r.replicas << ',' << r.hits << ','
       << csv::fmt(r.p_hat) << ',' << csv::fmt(r.ci_lo) << ','
       << csv::fmt(r.ci_hi) << ',' << csv::fmt(r.rate) << ','
       << (r.censored ? 1 : 0) << '\n';
  write_text(ws, "scan.csv", os.str());
  json out;
  out["reference_pairing"] = ref;
  out["delta"] = delta;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "summary.json", out.dump(2) + "\n");
}

void run_rate_estimate(const ExperimentConfig& c, Workspace& ws) {
  Profile gamma = make_gamma(c);
  const double rho_hi = std::max(4.0 * c.rho, c.rho + 4.0);
  auto spline = ws.maps.fugacity_spline(rho_hi);
  auto phi = [spline](double u) { return spline(u); };
  const double sigma = ws.kernel.sigma();
  HydroProblem prob;
  prob.phi = phi;
  prob.sigma = sigma;
  prob.initial = gamma.value;
  prob.width = c.width;
  prob.horizon = c.horizon;
  prob.sigma_on_drift = c.sigma_on_drift;
  TestFunction H0 = make_test_function(c, c.horizon);
  if (!H0.is_zero()) prob.drive = &H0;
  auto times = snapshot_grid(c.horizon, c.snapshots);
  auto pde = solve(prob, c.J, c.cfl_safety, times);
  auto traj = TrajectoryMeasure::from_fields(pde);

  SplinePolyFamily family;
  family.s0 = H0.is_zero() ? 0.25 * c.width : H0.support_lo();
  family.s1 = H0.is_zero() ? 0.75 * c.width : H0.support_hi();
  family.n_space = c.family_n_space;
  family.n_time = c.family_n_time;
  family.horizon = c.horizon;

  RandomSource master(ws.seed);
  auto est = rate_lower_approx(traj, family, sigma, phi, c.optimizer_budget,
                               master);

  // Analytic reference for a driven solution: (1/2 sigma) int <Phi(u),(dH0)^2>.
  double reference = 0.0;
  if (!H0.is_zero()) {
    std::vector<double> f(times.size());
    const int J = traj.cells();
    const double dx = c.width / J;
    for (size_t s = 0; s < times.size(); ++s) {
      double v = 0.0;
      for (int j = 0; j < J; ++j) {
        double x = (j + 0.5) * dx;
        double d = H0.du(times[s], x);
        v += phi(traj.profiles[s][j]) * d * d;
      }
      f[s] = v * dx;
    }
    reference = num::trapezoid(times, f) / (2.0 * sigma);
  }

  std::ostringstream trace;
  trace << "restart,value\n";
  for (size_t i = 0; i < est.restart_values.size(); ++i)
    trace << i << ',' << csv::fmt(est.restart_values[i]) << '\n';
  write_text(ws, "trace.csv", trace.str());

  json out;
  out["estimate"] = est.value;
  out["reference"] = reference;
  out["method"] = est.method;
  out["evals"] = est.evals;
  out["budget_exhausted"] = est.budget_exhausted;
  out["h_star_coeffs"] = est.h_star_coeffs;
  out["config_hash"] = fnv1a(c.canonical_json);
  write_text(ws, "summary.json", out.dump(2) + "\n");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = from_json(doc);
  validate(c);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

RunResult run_experiment(const ExperimentConfig& config,
                         const RunOverrides& overrides) {
  RunResult result;
  const std::string started = iso_now();
  try {
    validate(config);

    Workspace ws{make_g(config),
                 TransitionKernel(config.kernel),
                 make_law(config),
                 FugacityMaps(make_g(config), make_law(config),
                              {config.tail_tol, config.root_tol,
                               config.phi_max, config.quad_nodes}),
                 make_omega(config),
                 overrides.seed.value_or(config.seed),
                 fs::path(overrides.out_dir.value_or(config.out_dir)),
                 overrides.threads,
                 json::array(),
                 {}};
    fs::create_directories(ws.out);

    // Hypothesis gate; the working fugacity is the one the run will use.
    double phi_work = config.rho > 0.0
                          ? ws.maps.fugacity(config.rho) / config.a0
                          : 1.0;
    HypothesisReport rep =
        check_hypotheses(ws.g, ws.kernel, ws.omega, phi_work);
    if (config.kind == "check") {
      run_check(config, ws, rep);
    } else if (!rep.all_pass() && !overrides.allow_violations) {
      std::string which = !rep.h1_pass   ? "H1"
                          : !rep.h2_pass ? "H2"
                          : !rep.h3_pass ? "H3"
                                         : "H4";
      throw HypothesisViolation(which);
    } else if (config.kind == "equilibrium") {
      run_equilibrium(config, ws);
    } else if (config.kind == "hydro_compare") {
      run_hydro_compare(config, ws);
    } else if (config.kind == "girsanov") {
      run_girsanov(config, ws);
    } else if (config.kind == "superexp") {
      run_superexp(config, ws);
    } else if (config.kind == "ldscan") {
      run_ldscan(config, ws);
    } else if (config.kind == "rate_estimate") {
      run_rate_estimate(config, ws);
    }

    if (config.kind == "check" && !rep.all_pass() &&
        !overrides.allow_violations) {
      std::string which = !rep.h1_pass   ? "H1"
                          : !rep.h2_pass ? "H2"
                          : !rep.h3_pass ? "H3"
                                         : "H4";
      throw HypothesisViolation(which);
    }

    json manifest;
    manifest["config_hash"] = fnv1a(config.canonical_json);
    manifest["seed"] = ws.seed;
    manifest["tool_version"] = kVersion;
    manifest["start_time"] = started;
    manifest["end_time"] = iso_now();
    manifest["files"] = ws.manifest_files;
    write_text(ws, "manifest.json", manifest.dump(2) + "\n");

    result.exit_code = 0;
    result.message = "ok";
    result.files = ws.files;
  } catch (const ConfigError& e) {
    result.exit_code = 2;
    result.message = std::string("config error: ") + e.what();
  } catch (const HypothesisViolation& e) {
    result.exit_code = 3;
    result.message = std::string("hypothesis violation: ") + e.what();
  } catch (const std::exception& e) {
    result.exit_code = 4;
    result.message = std::string("runtime failure: ") + e.what();
  }
  return result;
}

}  // namespace zrp
