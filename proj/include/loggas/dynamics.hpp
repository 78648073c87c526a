#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <vector>

#include "loggas/config_space.hpp"
#include "loggas/errors.hpp"
#include "loggas/parallel.hpp"
#include "loggas/potentials.hpp"
#include "loggas/rng.hpp"

namespace loggas {

struct SdeConfig {
  double dt = 1e-3;
  double t_final = 0.1;
  // Maximum dyadic halvings of a step whose proposal breaks the strict
  // particle ordering; past the cap the proposal is projected instead.
  int substep_cap = 12;
  // Evolution fails if more than this fraction of steps end in projection.
  double max_projection_fraction = 0.05;
  std::uint64_t seed = 0;
  // Record every record_stride-th step; 0 records only start and end.
  std::size_t record_stride = 0;
};

struct StepStats {
  std::uint64_t steps = 0;
  std::uint64_t splits = 0;
  std::uint64_t projections = 0;

  void merge(const StepStats& o) {
    steps += o.steps;
    splits += o.splits;
    projections += o.projections;
  }
  double projection_fraction() const {
    return steps ? static_cast<double>(projections) / static_cast<double>(steps)
                 : 0.0;
  }
};

// Minimum gap imposed when a capped step is projected back onto the ordered
// sector.
inline constexpr double kOrderingSeparation = 1e-9;

namespace detail {

// One Euler-Maruyama increment of dX = −(1/2)∇Ψ dt + dB with wall folding,
// driven by the supplied Gaussian increments (variance dt each). If the
// proposal leaves the strictly ordered sector the step is replaced by two
// half steps driven by the halved increments, i.e. the dyadic refinement of
// the linear interpolant of the same Brownian path; the map from (state,
// increments) to the result is therefore deterministic, which keeps
// common-noise couplings meaningful. At the halving cap the proposal is
// sorted and minimally separated instead, and the event is counted.
inline void advance(const ConditionalPotential& pot, double* x, std::size_t k,
                    double dt, const double* dw, int depth, int cap,
                    StepStats& st, double* scratch2k) {
  double* g = scratch2k;
  double* p = scratch2k + k;
  pot.gradient_raw(x, k, g);
  const double r = pot.window();
  bool ordered = true;
  double prev = -kInf;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = fold_into_window(x[i] - 0.5 * g[i] * dt + dw[i], r);
    if (!(p[i] > prev)) ordered = false;
    prev = p[i];
  }
  if (ordered) {
    std::copy(p, p + k, x);
    return;
  }
  if (depth >= cap) {
    std::sort(p, p + k);
    for (std::size_t i = 1; i < k; ++i)
      if (p[i] - p[i - 1] < kOrderingSeparation)
        p[i] = p[i - 1] + kOrderingSeparation;
    if (p[k - 1] > r) {
      p[k - 1] = r;
      for (std::size_t i = k - 1; i-- > 0;)
        p[i] = std::min(p[i], p[i + 1] - kOrderingSeparation);
    }
    std::copy(p, p + k, x);
    ++st.projections;
    return;
  }
  ++st.splits;
  std::vector<double> half(k);
  for (std::size_t i = 0; i < k; ++i) half[i] = 0.5 * dw[i];
  advance(pot, x, k, 0.5 * dt, half.data(), depth + 1, cap, st, scratch2k);
  advance(pot, x, k, 0.5 * dt, half.data(), depth + 1, cap, st, scratch2k);
}

inline std::size_t steps_for(double t_final, double dt) {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

}  // namespace detail

// Single integrator step from a strictly sorted state. noise holds one
// Gaussian increment of variance dt per particle.
inline Configuration step(const Configuration& state,
                          const ConditionalPotential& pot, double dt,
                          const std::vector<double>& noise,
                          const SdeConfig& cfg, StepStats* stats = nullptr) {
  if (noise.size() != state.count())
    throw std::invalid_argument("noise dimension mismatch");
  if (!state.strictly_sorted())
    throw std::domain_error("integrator state must be strictly sorted");
  std::vector<double> x = state.points();
  std::vector<double> scratch(2 * x.size());
  StepStats local;
  detail::advance(pot, x.data(), x.size(), dt, noise.data(), 0,
                  cfg.substep_cap, local, scratch.data());
  ++local.steps;
  if (stats) stats->merge(local);
  return Configuration::from_sorted(std::move(x));
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> states;
  StepStats stats;
};

namespace detail {

inline void check_projection_budget(const StepStats& st,
                                    const SdeConfig& cfg) {
  if (st.steps >= 64 && st.projection_fraction() > cfg.max_projection_fraction)
    throw NumericalInstabilityError(
        "ordering projections exceeded the configured fraction of steps");
}

// Drives one Brownian path: per_step(s, dw) receives Gaussian increments of
// variance dt. Step accounting stays with the caller, which knows how many
// states one increment advances.
template <class PerStep>
void run_path(const SdeConfig& cfg, std::uint64_t path_id, std::size_t n_steps,
              std::size_t k, PerStep&& per_step) {
  StreamRng rng(cfg.seed, path_id, 0x73646573ull);
  const double sq = std::sqrt(cfg.dt);
  std::vector<double> dw(k);
  for (std::size_t s = 0; s < n_steps; ++s) {
    for (std::size_t i = 0; i < k; ++i) dw[i] = sq * rng.normal();
    per_step(s, dw);
  }
}

}  // namespace detail

// Evolves one path, recording states at the configured stride. t_final must
// be an integer multiple of dt (within rounding).
inline Trajectory evolve(const Configuration& gamma0,
                         const ConditionalPotential& pot,
                         const SdeConfig& cfg, std::uint64_t path_id = 0) {
  if (!gamma0.strictly_sorted() || !gamma0.inside_window(pot.window()))
    throw std::domain_error("initial configuration invalid for evolution");
  const std::size_t n = detail::steps_for(cfg.t_final, cfg.dt);
  if (std::abs(static_cast<double>(n) * cfg.dt - cfg.t_final) >
      1e-9 * std::max(1.0, cfg.t_final))
    throw std::invalid_argument("t_final must be a multiple of dt");
  const std::size_t k = gamma0.count();
  Trajectory traj;
  std::vector<double> x = gamma0.points();
  std::vector<double> scratch(2 * k);
  auto record = [&](std::size_t s) {
    traj.times.push_back(static_cast<double>(s) * cfg.dt);
    traj.states.push_back(Configuration::from_sorted(std::vector<double>(x)));
  };
  record(0);
  detail::run_path(cfg, path_id, n, k,
                   [&](std::size_t s, const std::vector<double>& dw) {
                     detail::advance(pot, x.data(), k, cfg.dt, dw.data(), 0,
                                     cfg.substep_cap, traj.stats,
                                     scratch.data());
                     ++traj.stats.steps;
                     bool last = s + 1 == n;
                     if ((cfg.record_stride &&
                          (s + 1) % cfg.record_stride == 0 && !last) ||
                         last)
                       record(s + 1);
                   });
  detail::check_projection_budget(traj.stats, cfg);
  return traj;
}

// Two initial conditions driven by the same Brownian increments. The shared
// noise realizes the synchronous coupling whose contraction rate the
// Lipschitz benchmarks measure.
inline std::pair<Trajectory, Trajectory> evolve_coupled(
    const Configuration& a0, const Configuration& b0,
    const ConditionalPotential& pot, const SdeConfig& cfg,
    std::uint64_t path_id = 0) {
  if (a0.count() != b0.count())
    throw std::invalid_argument("coupled states need equal particle counts");
  const std::size_t n = detail::steps_for(cfg.t_final, cfg.dt);
  const std::size_t k = a0.count();
  Trajectory ta, tb;
  std::vector<double> xa = a0.points(), xb = b0.points();
  std::vector<double> scratch(2 * k);
  auto record = [&](std::size_t s) {
    double t = static_cast<double>(s) * cfg.dt;
    ta.times.push_back(t);
    ta.states.push_back(Configuration::from_sorted(std::vector<double>(xa)));
    tb.times.push_back(t);
    tb.states.push_back(Configuration::from_sorted(std::vector<double>(xb)));
  };
  record(0);
  detail::run_path(cfg, path_id, n, k,
                   [&](std::size_t s, const std::vector<double>& dw) {
                     detail::advance(pot, xa.data(), k, cfg.dt, dw.data(), 0,
                                     cfg.substep_cap, ta.stats, scratch.data());
                     ++ta.stats.steps;
                     detail::advance(pot, xb.data(), k, cfg.dt, dw.data(), 0,
                                     cfg.substep_cap, tb.stats, scratch.data());
                     ++tb.stats.steps;
                     bool last = s + 1 == n;
                     if ((cfg.record_stride &&
                          (s + 1) % cfg.record_stride == 0 && !last) ||
                         last)
                       record(s + 1);
                   });
  detail::check_projection_budget(ta.stats, cfg);
  detail::check_projection_budget(tb.stats, cfg);
  return {std::move(ta), std::move(tb)};
}

// Monte Carlo driver: n_paths independent Brownian paths, each driving every
// variant initial condition synchronously. The observer is called as
//   observe(chunk, path, record_index, states)
// where states[v] is variant v's particle vector at record_times[record_index].
// Observers keep one accumulator per chunk and merge in chunk order; the
// chunk decomposition is fixed by n_paths alone, so results are bit-identical
// for any thread count. record_times must be nondecreasing multiples of dt
// (0 allowed).
template <class Observer>
StepStats evolve_bundle(const std::vector<Configuration>& variants,
                        const ConditionalPotential& pot, const SdeConfig& cfg,
                        const std::vector<double>& record_times,
                        std::size_t n_paths, int threads, Observer&& observe) {
  if (variants.empty()) throw std::invalid_argument("no variant states");
  const std::size_t k = variants.front().count();
  for (const auto& v : variants) {
    if (v.count() != k)
      throw std::invalid_argument("variant particle counts differ");
    if (!v.strictly_sorted() || !v.inside_window(pot.window()))
      throw std::domain_error("variant configuration invalid for evolution");
  }
  std::vector<std::size_t> record_steps;
  record_steps.reserve(record_times.size());
  for (double t : record_times) {
    auto sidx = detail::steps_for(t, cfg.dt);
    if (std::abs(static_cast<double>(sidx) * cfg.dt - t) > 1e-9 * std::max(1.0, t))
      throw std::invalid_argument("record times must be multiples of dt");
    if (!record_steps.empty() && sidx < record_steps.back())
      throw std::invalid_argument("record times must be nondecreasing");
    record_steps.push_back(sidx);
  }
  if (record_steps.empty()) throw std::invalid_argument("no record times");
  const std::size_t n_steps = record_steps.back();

  StepStats total;
  std::mutex stats_mutex;
  parallel_chunks(
      n_paths, kReductionChunk, resolve_threads(threads),
      [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        StepStats local;
        std::vector<std::vector<double>> states(variants.size());
        std::vector<double> scratch(2 * k);
        for (std::size_t path = begin; path < end; ++path) {
          for (std::size_t v = 0; v < variants.size(); ++v)
            states[v] = variants[v].points();
          std::size_t next_rec = 0;
          while (next_rec < record_steps.size() &&
                 record_steps[next_rec] == 0) {
            observe(chunk, path, next_rec, states);
            ++next_rec;
          }
          detail::run_path(
              cfg, path, n_steps, k,
              [&](std::size_t s, const std::vector<double>& dw) {
                for (auto& xv : states) {
                  detail::advance(pot, xv.data(), k, cfg.dt, dw.data(), 0,
                                  cfg.substep_cap, local, scratch.data());
                  ++local.steps;
                }
                while (next_rec < record_steps.size() &&
                       record_steps[next_rec] == s + 1) {
                  observe(chunk, path, next_rec, states);
                  ++next_rec;
                }
              });
          detail::check_projection_budget(local, cfg);
        }
        std::lock_guard<std::mutex> lock(stats_mutex);
        total.merge(local);
      });
  detail::check_projection_budget(total, cfg);
  return total;
}

}  // namespace loggas
