#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "zrp/equilibria.hpp"
#include "zrp/fields.hpp"
#include "zrp/media.hpp"
#include "zrp/random.hpp"
#include "zrp/rate_function.hpp"
#include "zrp/transition_kernel.hpp"

namespace zrp {

struct Configuration {
  std::vector<std::int32_t> eta;
  std::int64_t total = 0;

  static Configuration zeros(int L) {
    Configuration c;
    c.eta.assign(L, 0);
    return c;
  }
  int size() const { return static_cast<int>(eta.size()); }
  std::int32_t at(int x) const {
    int L = size();
    int i = x % L;
    return eta[i < 0 ? i + L : i];
  }
  void recompute_total() {
    total = 0;
    for (auto v : eta) total += v;
  }
};

// Binary indexed tree over nonnegative site weights; O(log L) update and
// weighted sampling.
class WeightTree {
 public:
  WeightTree() = default;
  explicit WeightTree(std::span<const double> w);

  int size() const { return static_cast<int>(w_.size()); }
  double total() const { return total_; }
  double get(int i) const { return w_[i]; }
  void set(int i, double w);
  // Returns the index whose cumulative-weight bucket contains target; the
  // caller draws target uniformly in [0, total()).
  int sample(double target) const;
  // Recompute all internal sums from the leaf weights.
  void rebuild();

 private:
  std::vector<double> w_;     // leaf weights
  std::vector<double> tree_;  // Fenwick partial sums, 1-based
  double total_ = 0.0;
};

struct JumpEvent {
  int site = 0;
  int displacement = 0;
  double dt = 0.0;  // macroscopic time increment
};

struct EventLog {
  std::vector<double> times;
  std::vector<std::int32_t> sites;
  std::vector<std::int32_t> displacements;
  std::size_t size() const { return times.size(); }
};

struct PathRecord {
  std::vector<double> snapshot_times;
  // Block-averaged density per grid cell, one row per snapshot.
  std::vector<std::vector<double>> profiles;
  int grid_cells = 0;
  int N = 0;
  int L = 0;
  double width = 0.0;  // W = L / N
  std::int64_t jump_count = 0;
  double girsanov_log_weight = 0.0;
  bool frozen = false;
  std::optional<EventLog> events;
  std::optional<Configuration> initial;  // kept alongside events for replay
};

struct RunOptions {
  int grid_cells = 0;  // 0: default min(L, 64); must divide L
  bool record_events = false;
  // When set, accumulates the Girsanov log weight of the realized path
  // against this H (jump sum exact; compensator exact in space, trapezoid
  // in time across each inter-event interval).
  const TestFunction* weight_h = nullptr;
  // Called at every snapshot time with the configuration then in force.
  std::function<void(double, const Configuration&)> observer;
};

// Dynamics state under generator N^2 L_p; owned by one thread.
class SimulationState {
 public:
  SimulationState(Configuration config, Environment env, RateFunction g,
                  TransitionKernel T, int N);

  const Configuration& config() const { return config_; }
  const Environment& env() const { return env_; }
  const RateFunction& g() const { return g_; }
  const TransitionKernel& kernel() const { return T_; }
  int N() const { return N_; }
  int L() const { return config_.size(); }
  double width() const { return double(L()) / N_; }
  double time() const { return time_; }
  double total_rate() const { return tree_.total(); }
  const WeightTree& tree() const { return tree_; }

  // Applies one jump (eta, weights, total) without advancing time.
  void apply_jump(int site, int displacement);
  void advance_time(double dt) { time_ += dt; }
  void rebuild_tree() { tree_.rebuild(); }

 private:
  Configuration config_;
  Environment env_;
  RateFunction g_;
  TransitionKernel T_;
  int N_;
  double time_ = 0.0;
  WeightTree tree_;
};

// Product measure nu_rho^p: site x drawn at fugacity Phi(rho)/p_x.
SimulationState init_equilibrium(const Environment& env, const RateFunction& g,
                                 const FugacityMaps& maps, double rho, int N,
                                 const TransitionKernel& T, RandomSource& rng);

// Slowly varying profile: site x drawn at fugacity Phi(gamma(x/N))/p_x.
SimulationState init_profile(const Environment& env, const RateFunction& g,
                             const FugacityMaps& maps,
                             const std::function<double(double)>& gamma, int N,
                             const TransitionKernel& T, RandomSource& rng);

// One event: exponential waiting time at rate N^2 * total_rate, site by
// weight, displacement by T. Throws Frozen when total_rate is 0.
JumpEvent step(SimulationState& state, RandomSource& rng);

// Repeated stepping to the horizon, recording block-density profiles at the
// snapshot grid (paths are piecewise constant). A frozen state is a legal
// terminal state: the remaining snapshots repeat the last configuration.
PathRecord run(SimulationState& state, double horizon,
               std::span<const double> snapshot_times, RandomSource& rng,
               const RunOptions& options = {});

// Same path law as the H-tilted generator, by thinning against the
// envelope rate N^2 * total_rate * exp(c/N), c = 2 * range * sup|dH|.
PathRecord run_tilted(SimulationState& state, const TestFunction& H,
                      double horizon, std::span<const double> snapshot_times,
                      RandomSource& rng, const RunOptions& options = {});

// Recomputes the path weight from a retained event log (replay). Throws
// MissingEvents when the record has no log.
double girsanov_log_weight(const PathRecord& record, const TestFunction& H,
                           const Environment& env, const RateFunction& g,
                           const TransitionKernel& T, int N);

// Uniform snapshot grid over (0, horizon], last point exactly horizon.
std::vector<double> snapshot_grid(double horizon, int count);

// Block-averaged density per grid cell (cells = grid_cells, must divide L).
std::vector<double> profile_of(const Configuration& config, int grid_cells);

// Rows "replica,time,grid_index,density".
void write_profiles_csv(std::span<const PathRecord> records, std::ostream& os);

}  // namespace zrp
