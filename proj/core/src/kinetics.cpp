#include "zrp/kinetics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>

#include "zrp/csv.hpp"
#include "zrp/errors.hpp"

namespace zrp {

WeightTree::WeightTree(std::span<const double> w)
    : w_(w.begin(), w.end()), tree_(w.size() + 1, 0.0) {
  rebuild();
}

void WeightTree::rebuild() {
  const int n = size();
  std::fill(tree_.begin(), tree_.end(), 0.0);
  total_ = 0.0;
  for (int i = 0; i < n; ++i) {
    total_ += w_[i];
    int j = i + 1;
    tree_[j] += w_[i];
    int parent = j + (j & -j);
    if (parent <= n) tree_[parent] += tree_[j];
  }
}

void WeightTree::set(int i, double w) {
  double delta = w - w_[i];
  if (delta == 0.0) return;
  w_[i] = w;
  total_ += delta;
  for (int j = i + 1; j <= size(); j += j & -j) tree_[j] += delta;
}

int WeightTree::sample(double target) const {
  const int n = size();
  int pos = 0;
  int bit = 1;
  while ((bit << 1) <= n) bit <<= 1;
  double rem = target;
  for (int k = bit; k > 0; k >>= 1) {
    int next = pos + k;
    if (next <= n && tree_[next] <= rem) {
      pos = next;
      rem -= tree_[next];
    }
  }
  if (pos >= n) pos = n - 1;
  // Guard against landing on a zero-weight leaf through rounding.
  if (w_[pos] <= 0.0) {
    for (int s = 1; s <= n; ++s) {
      int j = (pos + s) % n;
      if (w_[j] > 0.0) return j;
    }
  }
  return pos;
}

SimulationState::SimulationState(Configuration config, Environment env,
                                 RateFunction g, TransitionKernel T, int N)
    : config_(std::move(config)),
      env_(std::move(env)),
      g_(std::move(g)),
      T_(std::move(T)),
      N_(N) {
  if (env_.size() != config_.size())
    throw GridMismatch("environment and configuration lengths differ");
  config_.recompute_total();
  std::vector<double> w(config_.size());
  for (int x = 0; x < config_.size(); ++x)
    w[x] = env_.p[x] * g_(config_.eta[x]);
  tree_ = WeightTree(w);
}

void SimulationState::apply_jump(int site, int displacement) {
  const int L = config_.size();
  int dest = (site + displacement) % L;
  if (dest < 0) dest += L;
  if (dest == site) return;
  assert(config_.eta[site] > 0);
  config_.eta[site] -= 1;
  config_.eta[dest] += 1;
  tree_.set(site, env_.p[site] * g_(config_.eta[site]));
  tree_.set(dest, env_.p[dest] * g_(config_.eta[dest]));
}

namespace {

int wrap_site(int x, int L) {
  int i = x % L;
  return i < 0 ? i + L : i;
}

// Accumulates the Girsanov log weight of a realized path against H:
// sum over jumps of dH minus the integrated compensator
//   int N^2 sum_{x,y} p_x g(eta_s(x)) T(y) (e^{dH(s,x,y)} - 1) ds.
// Space is summed exactly over the sites H can touch; time dependence of H
// is handled by the trapezoid rule on each interval (rates are constant
// between events).
class PathWeigher {
 public:
  PathWeigher(const TestFunction& H, const Environment& env,
              const RateFunction& g, const TransitionKernel& T, int N)
      : h_(H), env_(env), g_(g), T_(T), N_(N), L_(env.size()) {
    active_ = !H.is_zero();
    if (!active_) return;
    int A = T_.range();
    lo_ = static_cast<int>(std::floor(N_ * H.support_lo())) - A;
    hi_ = static_cast<int>(std::ceil(N_ * H.support_hi())) + A;
    lo_ = std::max(lo_, 0);
    hi_ = std::min(hi_, L_ - 1);
    if (lo_ > hi_) {
      active_ = false;
      return;
    }
    if (!h_.time_dependent()) {
      c_.assign(hi_ - lo_ + 1, 0.0);
      for (int x = lo_; x <= hi_; ++x) c_[x - lo_] = tilt_sum(0.0, x);
    }
  }

  void reset(const std::vector<std::int32_t>* eta) {
    eta_ = eta;
    jump_sum_ = 0.0;
    comp_sum_ = 0.0;
    if (active_ && !h_.time_dependent()) {
      s_cache_ = 0.0;
      for (int x = lo_; x <= hi_; ++x)
        s_cache_ += env_.p[x] * g_((*eta_)[x]) * c_[x - lo_];
    }
  }

  double delta_h(double t, int x, int y) const {
    return h_(t, double(wrap_site(x + y, L_)) / N_) - h_(t, double(x) / N_);
  }

  void on_interval(double t0, double t1) {
    if (!active_ || t1 <= t0) return;
    const double nn = double(N_) * N_;
    if (!h_.time_dependent()) {
      comp_sum_ += (t1 - t0) * nn * s_cache_;
    } else {
      comp_sum_ += 0.5 * (t1 - t0) * nn * (spatial_sum(t0) + spatial_sum(t1));
    }
  }

  void on_jump(double t, int x, int y) {
    if (!active_) return;
    jump_sum_ += delta_h(t, x, y);
  }

  // Call after eta changed at `site`, with the pre/post values of g there.
  void on_rate_change(int site, double g_old, double g_new) {
    if (!active_ || h_.time_dependent()) return;
    if (site < lo_ || site > hi_) return;
    s_cache_ += env_.p[site] * (g_new - g_old) * c_[site - lo_];
  }

  double value() const { return jump_sum_ - comp_sum_; }
  bool active() const { return active_; }

 private:
  double tilt_sum(double t, int x) const {
    double s = 0.0;
    for (auto& [y, w] : T_.entries())
      s += w * std::expm1(delta_h(t, x, y));
    return s;
  }
  double spatial_sum(double t) const {
    double s = 0.0;
    for (int x = lo_; x <= hi_; ++x)
      s += env_.p[x] * g_((*eta_)[x]) * tilt_sum(t, x);
    return s;
  }

  const TestFunction& h_;
  const Environment& env_;
  const RateFunction& g_;
  const TransitionKernel& T_;
  int N_, L_;
  bool active_ = false;
  int lo_ = 0, hi_ = -1;
  std::vector<double> c_;  // time-independent tilt sums per site
  const std::vector<std::int32_t>* eta_ = nullptr;
  double s_cache_ = 0.0;
  double jump_sum_ = 0.0;
  double comp_sum_ = 0.0;
};

void check_snapshots(std::span<const double> snaps, double horizon) {
  if (snaps.empty()) throw GridMismatch("empty snapshot grid");
  for (size_t i = 0; i + 1 < snaps.size(); ++i)
    if (!(snaps[i] < snaps[i + 1]))
      throw GridMismatch("snapshot times must increase strictly");
  if (std::abs(snaps.back() - horizon) > 1e-12 * std::max(1.0, horizon))
    throw GridMismatch("last snapshot must equal the horizon");
}

int resolve_grid_cells(int requested, int L) {
  int J = requested > 0 ? requested : std::min(L, 64);
  if (J <= 0 || L % J != 0)
    throw GridMismatch("grid_cells must divide L");
  return J;
}

}  // namespace

SimulationState init_equilibrium(const Environment& env, const RateFunction& g,
                                 const FugacityMaps& maps, double rho, int N,
                                 const TransitionKernel& T,
                                 RandomSource& rng) {
  const int L = env.size();
  Configuration config = Configuration::zeros(L);
  const double phi = maps.fugacity(rho);
  for (int x = 0; x < L; ++x)
    config.eta[x] = sample_site(g, phi / env.p[x], maps.tail_tol(), rng);
  config.recompute_total();
  return SimulationState(std::move(config), env, g, T, N);
}

SimulationState init_profile(const Environment& env, const RateFunction& g,
                             const FugacityMaps& maps,
                             const std::function<double(double)>& gamma, int N,
                             const TransitionKernel& T, RandomSource& rng) {
  const int L = env.size();
  Configuration config = Configuration::zeros(L);
  std::map<double, double> phi_cache;  // gamma is piecewise constant often
  for (int x = 0; x < L; ++x) {
    double rho_x = gamma(double(x) / N);
    auto it = phi_cache.find(rho_x);
    if (it == phi_cache.end())
      it = phi_cache.emplace(rho_x, maps.fugacity(rho_x)).first;
    config.eta[x] = sample_site(g, it->second / env.p[x], maps.tail_tol(), rng);
  }
  config.recompute_total();
  return SimulationState(std::move(config), env, g, T, N);
}

JumpEvent step(SimulationState& state, RandomSource& rng) {
  const double rate = state.total_rate();
  if (!(rate > 0.0)) throw Frozen("total rate is zero");
  const double nn = double(state.N()) * state.N();
  JumpEvent ev;
  ev.dt = rng.exponential(nn * rate);
  ev.site = state.tree().sample(rng.u01() * rate);
  ev.displacement = state.kernel().sample(rng);
  state.advance_time(ev.dt);
  state.apply_jump(ev.site, ev.displacement);
  return ev;
}

namespace {

PathRecord run_impl(SimulationState& state, const TestFunction* tilt,
                    double horizon, std::span<const double> snaps,
                    RandomSource& rng, const RunOptions& options) {
  check_snapshots(snaps, horizon);
  const int L = state.L();
  const int J = resolve_grid_cells(options.grid_cells, L);

  PathRecord rec;
  rec.snapshot_times.assign(snaps.begin(), snaps.end());
  rec.grid_cells = J;
  rec.N = state.N();
  rec.L = L;
  rec.width = state.width();
  if (options.record_events) {
    rec.events = EventLog{};
    rec.initial = state.config();
  }

  const TestFunction no_weight;
  const TestFunction& weight_h =
      options.weight_h ? *options.weight_h : no_weight;
  PathWeigher weigher(weight_h, state.env(), state.g(), state.kernel(),
                      state.N());
  weigher.reset(&state.config().eta);

  // Thinning envelope for the tilted dynamics.
  double c_env = 0.0;
  std::vector<double> log_tilt;  // per (site-lo, kernel entry), time-indep
  int tilt_lo = 0, tilt_hi = -1;
  const auto& kernel_entries = state.kernel().entries();
  if (tilt != nullptr && !tilt->is_zero()) {
    c_env = 2.0 * state.kernel().range() * tilt->max_abs_du();
    int A = state.kernel().range();
    tilt_lo = std::max(
        0, static_cast<int>(std::floor(state.N() * tilt->support_lo())) - A);
    tilt_hi = std::min(
        L - 1, static_cast<int>(std::ceil(state.N() * tilt->support_hi())) + A);
    if (!tilt->time_dependent() && tilt_lo <= tilt_hi) {
      log_tilt.assign((tilt_hi - tilt_lo + 1) * kernel_entries.size(), 0.0);
      for (int x = tilt_lo; x <= tilt_hi; ++x)
        for (size_t e = 0; e < kernel_entries.size(); ++e) {
          int y = kernel_entries[e].first;
          log_tilt[(x - tilt_lo) * kernel_entries.size() + e] =
              (*tilt)(0.0, double(wrap_site(x + y, L)) / state.N()) -
              (*tilt)(0.0, double(x) / state.N());
        }
    }
  }
  auto log_tilt_at = [&](double t, int x, int y, size_t e) -> double {
    if (x >= tilt_lo && x <= tilt_hi) {
      if (!tilt->time_dependent())
        return log_tilt[(x - tilt_lo) * kernel_entries.size() + e];
      return (*tilt)(t, double(wrap_site(x + y, L)) / state.N()) -
             (*tilt)(t, double(x) / state.N());
    }
    return 0.0;
  };

  const double nn = double(state.N()) * state.N();
  const double env_factor = std::exp(c_env / state.N());
  size_t si = 0;
  const size_t n_snap = snaps.size();

  auto flush_until = [&](double t_cap) {
    while (si < n_snap && snaps[si] <= t_cap) {
      rec.profiles.push_back(profile_of(state.config(), J));
      if (options.observer) options.observer(snaps[si], state.config());
      ++si;
    }
  };

  std::int64_t events_since_rebuild = 0;
  while (si < n_snap) {
    const double rate = state.total_rate();
    if (!(rate > 0.0)) {
      rec.frozen = true;
      flush_until(horizon);
      state.advance_time(horizon - state.time());
      break;
    }
    const double dt = rng.exponential(nn * rate * env_factor);
    const double t_next = state.time() + dt;
    flush_until(std::min(t_next, horizon));
    if (t_next >= horizon) {
      weigher.on_interval(state.time(), horizon);
      state.advance_time(horizon - state.time());
      break;
    }
    weigher.on_interval(state.time(), t_next);
    const int x = state.tree().sample(rng.u01() * rate);
    int y;
    bool accept = true;
    if (tilt != nullptr && !tilt->is_zero()) {
      // Propose from the base kernel, accept with exp(dH - c/N).
      y = state.kernel().sample(rng);
      size_t e = 0;
      for (; e < kernel_entries.size(); ++e)
        if (kernel_entries[e].first == y) break;
      if (c_env > 0.0) {
        double ratio =
            std::exp(log_tilt_at(t_next, x, y, e) - c_env / state.N());
        accept = rng.u01() <= ratio;
      }
    } else {
      y = state.kernel().sample(rng);
    }
    state.advance_time(dt);
    if (accept) {
      weigher.on_jump(t_next, x, y);
      const int dest = wrap_site(x + y, L);
      const double g_old_x = state.g()(state.config().eta[x]);
      const double g_old_d = state.g()(state.config().eta[dest]);
      state.apply_jump(x, y);
      if (dest != x) {
        weigher.on_rate_change(x, g_old_x, state.g()(state.config().eta[x]));
        weigher.on_rate_change(dest, g_old_d,
                               state.g()(state.config().eta[dest]));
      }
      if (rec.events) {
        rec.events->times.push_back(t_next);
        rec.events->sites.push_back(x);
        rec.events->displacements.push_back(y);
      }
      ++rec.jump_count;
      if (++events_since_rebuild >= (1 << 20)) {
        state.rebuild_tree();
        events_since_rebuild = 0;
      }
    }
  }
  rec.girsanov_log_weight = weigher.active() ? weigher.value() : 0.0;
  return rec;
}

}  // namespace

PathRecord run(SimulationState& state, double horizon,
               std::span<const double> snapshot_times, RandomSource& rng,
               const RunOptions& options) {
  return run_impl(state, nullptr, horizon, snapshot_times, rng, options);
}

PathRecord run_tilted(SimulationState& state, const TestFunction& H,
                      double horizon, std::span<const double> snapshot_times,
                      RandomSource& rng, const RunOptions& options) {
  if (H.is_zero())
    return run_impl(state, nullptr, horizon, snapshot_times, rng, options);
  return run_impl(state, &H, horizon, snapshot_times, rng, options);
}

double girsanov_log_weight(const PathRecord& record, const TestFunction& H,
                           const Environment& env, const RateFunction& g,
                           const TransitionKernel& T, int N) {
  if (!record.events || !record.initial)
    throw MissingEvents("event log was not retained for this path");
  const double horizon = record.snapshot_times.back();
  std::vector<std::int32_t> eta = record.initial->eta;
  PathWeigher weigher(H, env, g, T, N);
  weigher.reset(&eta);
  const int L = static_cast<int>(eta.size());
  double t_prev = 0.0;
  const EventLog& log = *record.events;
  for (size_t i = 0; i < log.size(); ++i) {
    const double t = log.times[i];
    const int x = log.sites[i];
    const int y = log.displacements[i];
    weigher.on_interval(t_prev, t);
    weigher.on_jump(t, x, y);
    const int dest = wrap_site(x + y, L);
    if (dest != x) {
      const double g_old_x = g(eta[x]);
      const double g_old_d = g(eta[dest]);
      eta[x] -= 1;
      eta[dest] += 1;
      weigher.on_rate_change(x, g_old_x, g(eta[x]));
      weigher.on_rate_change(dest, g_old_d, g(eta[dest]));
    }
    t_prev = t;
  }
  weigher.on_interval(t_prev, horizon);
  return weigher.value();
}

std::vector<double> snapshot_grid(double horizon, int count) {
  if (count < 2) throw GridMismatch("snapshot grid needs >= 2 points");
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) t[i] = horizon * i / (count - 1);
  t.back() = horizon;
  return t;
}

std::vector<double> profile_of(const Configuration& config, int grid_cells) {
  const int L = config.size();
  if (grid_cells <= 0 || L % grid_cells != 0)
    throw GridMismatch("grid_cells must divide L");
  const int m = L / grid_cells;
  std::vector<double> u(grid_cells, 0.0);
  for (int c = 0; c < grid_cells; ++c) {
    long long s = 0;
    for (int i = c * m; i < (c + 1) * m; ++i) s += config.eta[i];
    u[c] = double(s) / m;
  }
  return u;
}

void write_profiles_csv(std::span<const PathRecord> records,
                        std::ostream& os) {
  os << "replica,time,grid_index,density\n";
  for (size_t r = 0; r < records.size(); ++r) {
    const PathRecord& rec = records[r];
    for (size_t s = 0; s < rec.snapshot_times.size(); ++s)
      for (int j = 0; j < rec.grid_cells; ++j)
        os << r << ',' << csv::fmt(rec.snapshot_times[s]) << ',' << j << ','
           << csv::fmt(rec.profiles[s][j]) << '\n';
  }
}

}  // namespace zrp
