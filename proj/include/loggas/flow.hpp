#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "loggas/clock.hpp"
#include "loggas/config_space.hpp"
#include "loggas/dynamics.hpp"
#include "loggas/errors.hpp"
#include "loggas/potentials.hpp"

namespace loggas {

// ---------------------------------------------------------------------------
// Scalar potentials on the interval.
// ---------------------------------------------------------------------------

// Potential with the derivatives the flow solvers need. value is required
// everywhere; deriv and second are consumed by the quantile Newton solver.
struct ScalarPotential {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  std::function<double(double)> second;
};

inline ScalarPotential quadratic_well(double stiffness, double center = 0.0) {
  if (!(stiffness >= 0))
    throw std::invalid_argument("quadratic well needs stiffness >= 0");
  ScalarPotential out;
  out.value = [stiffness, center](double x) {
    double d = x - center;
    return 0.5 * stiffness * d * d;
  };
  out.deriv = [stiffness, center](double x) { return stiffness * (x - center); };
  out.second = [stiffness](double) { return stiffness; };
  return out;
}

// One-particle restriction of an interacting potential: the energy of a
// single particle in the exterior field.
inline ScalarPotential one_particle_potential(const ConditionalPotential& pot) {
  ScalarPotential out;
  out.value = [pot](double x) {
    return pot.energy(Configuration::from_sorted({x}));
  };
  out.deriv = [pot](double x) {
    return pot.gradient(Configuration::from_sorted({x}))[0];
  };
  out.second = [pot](double x) {
    return pot.hessian_quadratic_form(Configuration::from_sorted({x}), {1.0});
  };
  return out;
}

// ---------------------------------------------------------------------------
// Cell-centered densities on [-r, r].
// ---------------------------------------------------------------------------

struct GridDensity {
  double r = 1.0;
  std::vector<double> p;  // cell averages; mass = sum p_j * dx

  std::size_t cells() const { return p.size(); }
  double dx() const { return 2.0 * r / static_cast<double>(p.size()); }
  double node(std::size_t j) const {
    return -r + (static_cast<double>(j) + 0.5) * dx();
  }

  double mass() const {
    double s = 0;
    for (double v : p) s += v;
    return s * dx();
  }

  void normalize() {
    double m = mass();
    if (!(m > 0)) throw std::invalid_argument("density has no mass");
    for (double& v : p) v /= m;
  }

  double l1_distance(const GridDensity& o) const {
    if (o.cells() != cells() || o.r != r)
      throw std::invalid_argument("grid mismatch in density distance");
    double s = 0;
    for (std::size_t j = 0; j < p.size(); ++j) s += std::abs(p[j] - o.p[j]);
    return s * dx();
  }

  double mean() const {
    double s = 0;
    for (std::size_t j = 0; j < p.size(); ++j) s += node(j) * p[j];
    return s * dx();
  }

  static GridDensity uniform(double r, std::size_t cells) {
    if (!(r > 0) || cells < 2)
      throw std::invalid_argument("bad density geometry");
    GridDensity d;
    d.r = r;
    d.p.assign(cells, 1.0 / (2.0 * r));
    return d;
  }

  static GridDensity from_function(double r, std::size_t cells,
                                   const std::function<double(double)>& f) {
    GridDensity d;
    d.r = r;
    d.p.resize(cells);
    for (std::size_t j = 0; j < cells; ++j) {
      double v = f(d.node(j));
      if (!(v >= 0))
        throw std::invalid_argument("density values must be nonnegative");
      d.p[j] = v;
    }
    d.normalize();
    return d;
  }

  static GridDensity gibbs(const ScalarPotential& psi, double r,
                           std::size_t cells) {
    GridDensity d;
    d.r = r;
    d.p.resize(cells);
    double lo = kInf;
    std::vector<double> e(cells);
    for (std::size_t j = 0; j < cells; ++j) {
      e[j] = psi.value(d.node(j));
      lo = std::min(lo, e[j]);
    }
    for (std::size_t j = 0; j < cells; ++j) d.p[j] = std::exp(-(e[j] - lo));
    d.normalize();
    return d;
  }
};

namespace detail {

inline void check_normalized(const GridDensity& d) {
  if (d.cells() < 2) throw std::invalid_argument("density grid too small");
  if (std::abs(d.mass() - 1.0) > 1e-9)
    throw std::invalid_argument("density is not normalized");
  for (double v : d.p)
    if (!(v >= 0)) throw std::invalid_argument("density has negative cells");
}

// z / (e^z - 1), continuously extended by 1 at z = 0. Multiplying the
// upwind neighbor by this factor makes e^{-psi} an exact discrete
// equilibrium of the flux below.
inline double bernoulli_ratio(double z) {
  if (z == 0) return 1.0;
  if (z > 700) return 0.0;          // e^z overflows; the ratio underflows
  if (z < -700) return -z;          // e^z underflows
  return z / std::expm1(z);
}

inline std::vector<double> psi_on_grid(const ScalarPotential& psi,
                                       const GridDensity& geom) {
  std::vector<double> out(geom.cells());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = psi.value(geom.node(j));
  return out;
}

}  // namespace detail

// log of the grid partition function  sum_j e^{-psi(x_j)} dx.
inline double grid_log_partition(const ScalarPotential& psi, double r,
                                 std::size_t cells) {
  GridDensity geom = GridDensity::uniform(r, cells);
  std::vector<double> e = detail::psi_on_grid(psi, geom);
  double lo = *std::min_element(e.begin(), e.end());
  double s = 0;
  for (double v : e) s += std::exp(-(v - lo));
  return -lo + std::log(s * geom.dx());
}

// ---------------------------------------------------------------------------
// Entropy and Fisher information relative to the Gibbs density.
// ---------------------------------------------------------------------------

// sum rho log(rho) * pi * dx with rho = p/pi and pi the normalized Gibbs
// cell density; 0 log 0 counts as 0, and mass sitting where pi underflows
// to zero makes the entropy +inf.
inline double entropy(const GridDensity& p, const ScalarPotential& psi) {
  detail::check_normalized(p);
  std::vector<double> e = detail::psi_on_grid(psi, p);
  double lo = *std::min_element(e.begin(), e.end());
  double z = 0;
  for (double v : e) z += std::exp(-(v - lo));
  z *= p.dx();
  double s = 0;
  for (std::size_t j = 0; j < p.cells(); ++j) {
    double pi = std::exp(-(e[j] - lo)) / z;
    if (p.p[j] <= 0) continue;
    if (pi <= 0) return kInf;
    double rho = p.p[j] / pi;
    s += rho * std::log(rho) * pi;
  }
  return s * p.dx();
}

// 4 * sum (d sqrt(rho))^2 * pi * dx with a central difference in the
// interior and one-sided stencils at the walls. Densities that vanish in
// the interior have infinite information by convention.
inline double fisher_information(const GridDensity& p,
                                 const ScalarPotential& psi) {
  detail::check_normalized(p);
  const std::size_t n = p.cells();
  for (std::size_t j = 1; j + 1 < n; ++j)
    if (!(p.p[j] > 0)) return kInf;
  std::vector<double> e = detail::psi_on_grid(psi, p);
  double lo = *std::min_element(e.begin(), e.end());
  double z = 0;
  for (double v : e) z += std::exp(-(v - lo));
  z *= p.dx();
  std::vector<double> pi(n), s(n);
  for (std::size_t j = 0; j < n; ++j) {
    pi[j] = std::exp(-(e[j] - lo)) / z;
    if (pi[j] <= 0) {
      if (p.p[j] > 0) return kInf;
      s[j] = 0;
      continue;
    }
    s[j] = std::sqrt(p.p[j] / pi[j]);
  }
  const double h = p.dx();
  double acc = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double ds;
    if (j == 0)
      ds = (s[1] - s[0]) / h;
    else if (j + 1 == n)
      ds = (s[n - 1] - s[n - 2]) / h;
    else
      ds = (s[j + 1] - s[j - 1]) / (2.0 * h);
    acc += ds * ds * pi[j];
  }
  return 4.0 * acc * h;
}

// ---------------------------------------------------------------------------
// Fokker-Planck evolution: dp/dt = kClock * (p'' + (psi' p)') with no-flux
// walls, discretized with the exponential-fitting flux
//   J_{j+1/2} = (kClock/dx) * (B(dPsi) p_j - B(-dPsi) p_{j+1})
// where dPsi = psi_{j+1} - psi_j and B is bernoulli_ratio. The flux
// vanishes identically on p = e^{-psi}, so the discrete equilibrium is
// exact, and explicit Euler keeps positivity under the reported step bound.
// ---------------------------------------------------------------------------

struct FpStats {
  std::size_t steps = 0;
  double max_coefficient = 0;  // stability requires dt * max_coefficient <= 1
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<GridDensity> states;
};

inline FlowTrajectory fokker_planck_trajectory(const GridDensity& p0,
                                               const ScalarPotential& psi,
                                               const std::vector<double>& times,
                                               double dt,
                                               FpStats* stats = nullptr) {
  detail::check_normalized(p0);
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (times.empty()) throw std::invalid_argument("no record times");
  std::vector<std::size_t> record_steps;
  for (double t : times) {
    auto sidx = detail::steps_for(t, dt);
    if (std::abs(static_cast<double>(sidx) * dt - t) > 1e-9 * std::max(1.0, t))
      throw std::invalid_argument("record times must be multiples of dt");
    if (!record_steps.empty() && sidx < record_steps.back())
      throw std::invalid_argument("record times must be nondecreasing");
    record_steps.push_back(sidx);
  }

  const std::size_t n = p0.cells();
  const double h = p0.dx();
  std::vector<double> e = detail::psi_on_grid(psi, p0);
  // Edge factors: bp[j] multiplies p_j, bm[j] multiplies p_{j+1} in the flux
  // through edge j+1/2, already scaled by kClock/dx.
  std::vector<double> bp(n - 1), bm(n - 1);
  double max_coef = 0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    double z = e[j + 1] - e[j];
    bp[j] = detail::bernoulli_ratio(z) * kClock / h;
    bm[j] = detail::bernoulli_ratio(-z) * kClock / h;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0;
    if (j + 1 < n) c += bp[j];
    if (j > 0) c += bm[j - 1];
    max_coef = std::max(max_coef, c / h);
  }
  if (dt * max_coef > 1.0)
    throw ConfigError("flow step too large for this grid: dt must be <= " +
                      std::to_string(1.0 / max_coef));

  FlowTrajectory out;
  GridDensity cur = p0;
  std::vector<double> flux(n - 1);
  std::size_t next_rec = 0;
  const std::size_t n_steps = record_steps.back();
  std::size_t done = 0;
  while (next_rec < record_steps.size() && record_steps[next_rec] == 0) {
    out.times.push_back(times[next_rec]);
    out.states.push_back(cur);
    ++next_rec;
  }
  for (std::size_t s = 0; s < n_steps; ++s) {
    for (std::size_t j = 0; j + 1 < n; ++j)
      flux[j] = bp[j] * cur.p[j] - bm[j] * cur.p[j + 1];
    for (std::size_t j = 0; j < n; ++j) {
      double div = 0;
      if (j + 1 < n) div += flux[j];
      if (j > 0) div -= flux[j - 1];
      cur.p[j] -= dt / h * div;
    }
    ++done;
    while (next_rec < record_steps.size() && record_steps[next_rec] == s + 1) {
      out.times.push_back(times[next_rec]);
      out.states.push_back(cur);
      ++next_rec;
    }
  }
  if (stats) {
    stats->steps += done;
    stats->max_coefficient = std::max(stats->max_coefficient, max_coef);
  }
  return out;
}

inline GridDensity fokker_planck_evolve(const GridDensity& p0,
                                        const ScalarPotential& psi, double t,
                                        double dt, FpStats* stats = nullptr) {
  return fokker_planck_trajectory(p0, psi, {t}, dt, stats).states.back();
}

// ---------------------------------------------------------------------------
// Quantile tools. The CDF of a cell-averaged density is piecewise linear,
// so quantile evaluation and the interval transport distance are exact.
// ---------------------------------------------------------------------------

namespace detail {

struct QuantileView {
  const GridDensity* d;
  std::vector<double> cum;  // cum[j] = mass of the first j cells

  explicit QuantileView(const GridDensity& dens) : d(&dens) {
    cum.resize(dens.cells() + 1);
    cum[0] = 0;
    for (std::size_t j = 0; j < dens.cells(); ++j)
      cum[j + 1] = cum[j] + dens.p[j] * dens.dx();
    // the last entry is 1 up to roundoff; pin it so inversion at s = 1 works
    cum.back() = std::max(cum.back(), 1.0);
  }

  double operator()(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t j = it == cum.begin()
                        ? 0
                        : static_cast<std::size_t>(it - cum.begin()) - 1;
    j = std::min(j, d->cells() - 1);
    double mass = cum[j + 1] - cum[j];
    double left = -d->r + static_cast<double>(j) * d->dx();
    if (mass <= 0) return left;
    return left + (s - cum[j]) / mass * d->dx();
  }
};

}  // namespace detail

inline std::vector<double> grid_quantiles(const GridDensity& p,
                                          std::size_t m) {
  detail::check_normalized(p);
  if (m < 2) throw std::invalid_argument("need at least two quantiles");
  detail::QuantileView q(p);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = q((static_cast<double>(i) + 0.5) / static_cast<double>(m));
  return out;
}

// Exact interval transport distance: both quantile functions are piecewise
// linear in s, so the squared difference is quadratic on every segment
// between merged mass breakpoints and Simpson integrates it exactly.
inline double w2_interval(const GridDensity& a, const GridDensity& b) {
  detail::check_normalized(a);
  detail::check_normalized(b);
  detail::QuantileView qa(a), qb(b);
  std::vector<double> brk;
  brk.reserve(qa.cum.size() + qb.cum.size());
  for (double s : qa.cum) brk.push_back(std::clamp(s, 0.0, 1.0));
  for (double s : qb.cum) brk.push_back(std::clamp(s, 0.0, 1.0));
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  double acc = 0;
  for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
    double s0 = brk[i], s1 = brk[i + 1];
    if (s1 <= s0) continue;
    double sm = 0.5 * (s0 + s1);
    double d0 = qa(s0) - qb(s0);
    double dm = qa(sm) - qb(sm);
    double d1 = qa(s1) - qb(s1);
    acc += (s1 - s0) / 6.0 * (d0 * d0 + 4.0 * dm * dm + d1 * d1);
  }
  return std::sqrt(std::max(acc, 0.0));
}

// Reconstruction from midpoint quantiles: the CDF through the points
// (q_i, (i+1/2)/m) extended by half a quantile cell on each side (clamped
// to the window) is inverted onto the cell grid.
inline GridDensity quantiles_to_grid(const std::vector<double>& q, double r,
                                     std::size_t cells) {
  const std::size_t m = q.size();
  if (m < 2) throw std::invalid_argument("need at least two quantiles");
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (!(q[i] < q[i + 1]))
      throw std::invalid_argument("quantiles must be strictly increasing");
  if (q.front() < -r || q.back() > r)
    throw std::invalid_argument("quantiles leave the window");
  std::vector<double> xs, cs;
  xs.reserve(m + 2);
  cs.reserve(m + 2);
  double lead = std::max(q.front() - 0.5 * (q[1] - q[0]), -r);
  double trail = std::min(q.back() + 0.5 * (q[m - 1] - q[m - 2]), r);
  xs.push_back(lead);
  cs.push_back(0.0);
  for (std::size_t i = 0; i < m; ++i) {
    xs.push_back(q[i]);
    cs.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(m));
  }
  xs.push_back(trail);
  cs.push_back(1.0);
  auto cdf = [&](double x) {
    if (x <= xs.front()) return 0.0;
    if (x >= xs.back()) return 1.0;
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    double w = xs[i + 1] - xs[i];
    if (w <= 0) return cs[i + 1];
    return cs[i] + (x - xs[i]) / w * (cs[i + 1] - cs[i]);
  };
  GridDensity out;
  out.r = r;
  out.p.resize(cells);
  double h = 2.0 * r / static_cast<double>(cells);
  double prev = cdf(-r);
  for (std::size_t j = 0; j < cells; ++j) {
    double next = cdf(-r + static_cast<double>(j + 1) * h);
    out.p[j] = std::max(next - prev, 0.0) / h;
    prev = next;
  }
  out.normalize();
  return out;
}

// Entropy of the law with midpoint quantiles q relative to the Gibbs
// density: (1/m) sum -log(gap * m) + (1/m) sum psi(q_i) + log_z. Along a
// linear interpolation of quantile vectors every term is convex whenever
// psi is, so displacement convexity holds exactly in this discretization.
inline double quantile_entropy(const std::vector<double>& q,
                               const ScalarPotential& psi, double log_z) {
  const std::size_t m = q.size();
  if (m < 2) throw std::invalid_argument("need at least two quantiles");
  double acc = 0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    double gap = q[i + 1] - q[i];
    if (!(gap > 0)) return kInf;
    acc -= std::log(gap * static_cast<double>(m));
  }
  for (double x : q) acc += psi.value(x);
  return acc / static_cast<double>(m) + log_z;
}

// ---------------------------------------------------------------------------
// Minimizing movement step in quantile coordinates: minimize
//   Ent(q) + W2(q, qprev)^2 / (2 * kClock * tau)
// over monotone quantile vectors in the window. The objective is smooth and
// convex for convex psi, with a tridiagonal Hessian; a damped Newton
// iteration with a monotonicity line search solves it to near roundoff.
// ---------------------------------------------------------------------------

struct JkoStats {
  std::size_t newton_iterations = 0;
  double objective = 0;  // scaled objective m * (Ent - log_z + prox term)
};

namespace detail {

inline void solve_tridiagonal(std::vector<double>& sub,
                              std::vector<double>& diag,
                              std::vector<double>& sup,
                              std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

inline double jko_objective(const std::vector<double>& q,
                            const std::vector<double>& qprev,
                            const ScalarPotential& psi, double inv_ctau) {
  const std::size_t m = q.size();
  double J = 0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    double gap = q[i + 1] - q[i];
    if (!(gap > 0)) return kInf;
    J -= std::log(gap * static_cast<double>(m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    double d = q[i] - qprev[i];
    J += psi.value(q[i]) + 0.5 * inv_ctau * d * d;
  }
  return J;
}

}  // namespace detail

inline std::vector<double> jko_quantile_step(const std::vector<double>& qprev,
                                             const ScalarPotential& psi,
                                             double window, double tau,
                                             JkoStats* stats = nullptr) {
  const std::size_t m = qprev.size();
  if (m < 2) throw std::invalid_argument("need at least two quantiles");
  if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  if (!psi.deriv || !psi.second)
    throw std::invalid_argument(
        "quantile step needs potential derivatives");
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (!(qprev[i] < qprev[i + 1]))
      throw std::invalid_argument("quantiles must be strictly increasing");
  if (qprev.front() < -window || qprev.back() > window)
    throw std::invalid_argument("quantiles leave the window");

  const double inv_ctau = 1.0 / (kClock * tau);
  std::vector<double> q = qprev;
  std::vector<double> g(m), sub(m), diag(m), sup(m), rhs(m), cand(m);
  bool pin_lo = false, pin_hi = false;
  const std::size_t max_iter = 80;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < m; ++i) {
      double gi = psi.deriv(q[i]) + inv_ctau * (q[i] - qprev[i]);
      if (i + 1 < m) gi += 1.0 / (q[i + 1] - q[i]);
      if (i > 0) gi -= 1.0 / (q[i] - q[i - 1]);
      g[i] = gi;
    }
    // A pinned wall coordinate is optimal while the objective grows inward.
    if (pin_lo && g[0] < 0) pin_lo = false;
    if (pin_hi && g[m - 1] > 0) pin_hi = false;

    for (std::size_t i = 0; i < m; ++i) {
      double d = psi.second(q[i]) + inv_ctau;
      if (i + 1 < m) {
        double gap = q[i + 1] - q[i];
        d += 1.0 / (gap * gap);
      }
      if (i > 0) {
        double gap = q[i] - q[i - 1];
        d += 1.0 / (gap * gap);
      }
      diag[i] = d;
      rhs[i] = -g[i];
    }
    sub[0] = 0;
    sup[m - 1] = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      double gap = q[i + 1] - q[i];
      sup[i] = -1.0 / (gap * gap);
      sub[i + 1] = sup[i];
    }
    if (pin_lo) {
      diag[0] = 1;
      sup[0] = 0;
      sub[1] = 0;
      rhs[0] = 0;
    }
    if (pin_hi) {
      diag[m - 1] = 1;
      sub[m - 1] = 0;
      sup[m - 2] = 0;
      rhs[m - 1] = 0;
    }
    detail::solve_tridiagonal(sub, diag, sup, rhs);

    double step_norm = 0, gd = 0;
    for (std::size_t i = 0; i < m; ++i) {
      step_norm = std::max(step_norm, std::abs(rhs[i]));
      gd += g[i] * rhs[i];
    }
    if (step_norm < 1e-12 * std::max(1.0, window)) break;

    double J0 = detail::jko_objective(q, qprev, psi, inv_ctau);
    // The predicted decrease -gd is the squared Newton decrement. The
    // objective is a sum of m unit-scale terms, so its evaluation noise is
    // of order m*eps; a decrement below that is not representable and the
    // line search would only chase rounding jitter.
    if (std::abs(gd) <= 64.0 * static_cast<double>(m) *
                           std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(J0)))
      break;
    double t = 1.0;
    bool accepted = false;
    double moved = 0.0;
    while (t >= 1e-13) {
      bool monotone = true;
      for (std::size_t i = 0; i < m; ++i)
        cand[i] = std::clamp(q[i] + t * rhs[i], -window, window);
      for (std::size_t i = 0; i + 1 < m; ++i)
        if (!(cand[i] < cand[i + 1])) {
          monotone = false;
          break;
        }
      if (monotone) {
        double J1 = detail::jko_objective(cand, qprev, psi, inv_ctau);
        if (J1 <= J0 + 1e-4 * t * gd) {
          for (std::size_t i = 0; i < m; ++i)
            moved = std::max(moved, std::abs(cand[i] - q[i]));
          q = cand;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      // A stalled search against a wall means the box constraint binds.
      if (!pin_lo && q[0] <= -window + 1e-12 && g[0] < 0) {
        pin_lo = true;
        continue;
      }
      if (!pin_hi && q[m - 1] >= window - 1e-12 && g[m - 1] > 0) {
        pin_hi = true;
        continue;
      }
      throw NumericalInstabilityError(
          "quantile minimization stalled; step norm " +
          std::to_string(step_norm));
    }
    if (q[0] <= -window) pin_lo = true;
    if (q[m - 1] >= window) pin_hi = true;
    // An accepted step that rounds to no movement has hit the same floor.
    if (moved == 0.0) break;
  }
  if (iter == max_iter)
    throw NumericalInstabilityError(
        "quantile minimization did not converge in 80 iterations");
  if (stats) {
    stats->newton_iterations += iter;
    stats->objective = detail::jko_objective(q, qprev, psi, inv_ctau);
  }
  return q;
}

inline GridDensity jko_step(const GridDensity& p, const ScalarPotential& psi,
                            double tau, std::size_t m = 256,
                            JkoStats* stats = nullptr) {
  std::vector<double> q = grid_quantiles(p, m);
  std::vector<double> qn = jko_quantile_step(q, psi, p.r, tau, stats);
  return quantiles_to_grid(qn, p.r, p.cells());
}

// Iterated minimizing movement. The quantile state is carried across steps
// and rendered onto the grid only at record times, so the reconstruction
// error does not accumulate.
inline FlowTrajectory jko_trajectory(const GridDensity& p0,
                                     const ScalarPotential& psi,
                                     const std::vector<double>& times,
                                     double tau, std::size_t m = 256,
                                     JkoStats* stats = nullptr) {
  detail::check_normalized(p0);
  if (times.empty()) throw std::invalid_argument("no record times");
  std::vector<std::size_t> record_steps;
  for (double t : times) {
    auto sidx = detail::steps_for(t, tau);
    if (std::abs(static_cast<double>(sidx) * tau - t) > 1e-9 * std::max(1.0, t))
      throw std::invalid_argument("record times must be multiples of tau");
    if (!record_steps.empty() && sidx < record_steps.back())
      throw std::invalid_argument("record times must be nondecreasing");
    record_steps.push_back(sidx);
  }
  std::vector<double> q = grid_quantiles(p0, m);
  FlowTrajectory out;
  std::size_t next_rec = 0;
  while (next_rec < record_steps.size() && record_steps[next_rec] == 0) {
    out.times.push_back(times[next_rec]);
    out.states.push_back(quantiles_to_grid(q, p0.r, p0.cells()));
    ++next_rec;
  }
  const std::size_t n_steps = record_steps.back();
  for (std::size_t s = 0; s < n_steps; ++s) {
    q = jko_quantile_step(q, psi, p0.r, tau, stats);
    while (next_rec < record_steps.size() && record_steps[next_rec] == s + 1) {
      out.times.push_back(times[next_rec]);
      out.states.push_back(quantiles_to_grid(q, p0.r, p0.cells()));
      ++next_rec;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residual checks along the flow. The generator runs at speed kClock, so
// the evolution inequalities carry explicit clock factors:
//   dissipation   d/dt Ent(p_t)  =  -kClock * Fisher(p_t)
//   evi           (1/(2 kClock)) d/dt W2^2(p_t, nu) + (K/2) W2^2
//                     <=  Ent(nu) - Ent(p_t)
// while displacement convexity of Ent along quantile interpolation is a
// static statement and carries the bare modulus K.
// ---------------------------------------------------------------------------

struct ResidualTable {
  std::string check;
  std::vector<double> times;
  std::vector<double> lhs, rhs, residual;
  double worst = 0;
  double tolerance = 0;
  bool pass = false;
};

inline ResidualTable verify_evi(const ScalarPotential& psi,
                                const GridDensity& sigma0,
                                const GridDensity& nu,
                                const std::vector<double>& t_grid, double K,
                                double dt, double tolerance = 5e-3) {
  if (t_grid.size() < 2)
    throw std::invalid_argument("evi needs at least two time nodes");
  detail::check_normalized(nu);
  FlowTrajectory traj = fokker_planck_trajectory(sigma0, psi, t_grid, dt);
  const double ent_nu = entropy(nu, psi);
  std::vector<double> w2(t_grid.size()), ent(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    w2[i] = w2_interval(traj.states[i], nu);
    ent[i] = entropy(traj.states[i], psi);
  }
  ResidualTable out;
  out.check = "evi";
  out.tolerance = tolerance;
  double worst = kInf;
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
    double dtg = t_grid[i + 1] - t_grid[i];
    double dw2 = (w2[i + 1] * w2[i + 1] - w2[i] * w2[i]) / dtg;
    double lhs = dw2 / (2.0 * kClock) + 0.5 * K * w2[i] * w2[i];
    double rhs = ent_nu - ent[i];
    out.times.push_back(t_grid[i]);
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    out.residual.push_back(rhs - lhs);
    worst = std::min(worst, rhs - lhs);
  }
  out.worst = worst;
  out.pass = worst >= -tolerance;
  return out;
}

inline ResidualTable verify_dissipation(const ScalarPotential& psi,
                                        const GridDensity& p0,
                                        const std::vector<double>& t_grid,
                                        double dt, double tolerance = 0.02) {
  if (t_grid.size() < 3)
    throw std::invalid_argument("dissipation needs at least three time nodes");
  FlowTrajectory traj = fokker_planck_trajectory(p0, psi, t_grid, dt);
  std::vector<double> ent(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    ent[i] = entropy(traj.states[i], psi);
  ResidualTable out;
  out.check = "dissipation";
  out.tolerance = tolerance;
  double worst = 0;
  for (std::size_t i = 1; i + 1 < t_grid.size(); ++i) {
    double dent = (ent[i + 1] - ent[i - 1]) / (t_grid[i + 1] - t_grid[i - 1]);
    double fisher = fisher_information(traj.states[i], psi);
    double rel = std::abs(dent + kClock * fisher) /
                 std::max(kClock * fisher, 1e-12);
    out.times.push_back(t_grid[i]);
    out.lhs.push_back(dent);
    out.rhs.push_back(-kClock * fisher);
    out.residual.push_back(rel);
    worst = std::max(worst, rel);
  }
  out.worst = worst;
  out.pass = worst < tolerance;
  return out;
}

struct DisplacementReport {
  std::vector<double> ts;
  std::vector<double> slack;
  double min_slack = 0;
  double w2 = 0;
  double tolerance = 0;
  bool pass = false;
};

// Entropy along the quantile interpolation between two densities, compared
// with the chord weakened by K/2 * t(1-t) * W2^2.
inline DisplacementReport verify_displacement_convexity(
    const ScalarPotential& psi, const GridDensity& p0, const GridDensity& p1,
    std::size_t samples, double K = 0, std::size_t m = 1024,
    double tolerance = 5e-3) {
  if (samples == 0) throw std::invalid_argument("need at least one sample");
  if (p0.r != p1.r) throw std::invalid_argument("window mismatch");
  std::vector<double> qa = grid_quantiles(p0, m);
  std::vector<double> qb = grid_quantiles(p1, m);
  const double log_z = grid_log_partition(psi, p0.r, p0.cells());
  const double e0 = quantile_entropy(qa, psi, log_z);
  const double e1 = quantile_entropy(qb, psi, log_z);
  double w2sq = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double d = qa[i] - qb[i];
    w2sq += d * d;
  }
  w2sq /= static_cast<double>(m);
  DisplacementReport out;
  out.w2 = std::sqrt(w2sq);
  out.tolerance = tolerance;
  std::vector<double> qt(m);
  double worst = kInf;
  for (std::size_t i = 1; i <= samples; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(samples + 1);
    for (std::size_t j = 0; j < m; ++j)
      qt[j] = (1.0 - t) * qa[j] + t * qb[j];
    double et = quantile_entropy(qt, psi, log_z);
    double chord =
        (1.0 - t) * e0 + t * e1 - 0.5 * K * t * (1.0 - t) * w2sq;
    out.ts.push_back(t);
    out.slack.push_back(chord - et);
    worst = std::min(worst, chord - et);
  }
  out.min_slack = worst;
  out.pass = worst >= -tolerance;
  return out;
}

// ---------------------------------------------------------------------------
// Ordered-pair densities on the strict triangle {x1 < x2}. Cells are the
// strictly ordered pairs of 1D cells; the missing diagonal implements the
// ordering constraint as a reflecting wall, matching the particle dynamics.
// ---------------------------------------------------------------------------

struct TriangleDensity {
  double r = 1.0;
  std::size_t n = 0;      // cells per axis
  std::vector<double> p;  // index(i, j) = j (j - 1) / 2 + i for i < j

  static std::size_t cell_count(std::size_t n) { return n * (n - 1) / 2; }
  std::size_t index(std::size_t i, std::size_t j) const {
    return j * (j - 1) / 2 + i;
  }
  double dx() const { return 2.0 * r / static_cast<double>(n); }
  double node(std::size_t a) const {
    return -r + (static_cast<double>(a) + 0.5) * dx();
  }

  double mass() const {
    double s = 0;
    for (double v : p) s += v;
    return s * dx() * dx();
  }

  void normalize() {
    double m = mass();
    if (!(m > 0)) throw std::invalid_argument("density has no mass");
    for (double& v : p) v /= m;
  }

  double l1_distance(const TriangleDensity& o) const {
    if (o.n != n || o.r != r)
      throw std::invalid_argument("grid mismatch in density distance");
    double s = 0;
    for (std::size_t a = 0; a < p.size(); ++a) s += std::abs(p[a] - o.p[a]);
    return s * dx() * dx();
  }

  static TriangleDensity uniform(double r, std::size_t n) {
    if (!(r > 0) || n < 3) throw std::invalid_argument("bad triangle grid");
    TriangleDensity d;
    d.r = r;
    d.n = n;
    d.p.assign(cell_count(n), 0.0);
    double area = static_cast<double>(cell_count(n)) * d.dx() * d.dx();
    for (double& v : d.p) v = 1.0 / area;
    return d;
  }

  static TriangleDensity gibbs(const ConditionalPotential& pot,
                               std::size_t n) {
    TriangleDensity d;
    d.r = pot.window();
    d.n = n;
    d.p.assign(cell_count(n), 0.0);
    double lo = kInf;
    std::vector<double> e(cell_count(n));
    for (std::size_t j = 1; j < n; ++j)
      for (std::size_t i = 0; i < j; ++i) {
        double v = pot.energy(Configuration::from_sorted({d.node(i), d.node(j)}));
        e[d.index(i, j)] = v;
        lo = std::min(lo, v);
      }
    for (std::size_t a = 0; a < e.size(); ++a)
      d.p[a] = std::exp(-(e[a] - lo));
    d.normalize();
    return d;
  }
};

inline TriangleDensity triangle_evolve(const TriangleDensity& p0,
                                       const ConditionalPotential& pot,
                                       double t, double dt,
                                       FpStats* stats = nullptr) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (p0.n < 3 || p0.p.size() != TriangleDensity::cell_count(p0.n))
    throw std::invalid_argument("bad triangle density");
  if (std::abs(p0.mass() - 1.0) > 1e-9)
    throw std::invalid_argument("density is not normalized");
  auto sidx = detail::steps_for(t, dt);
  if (std::abs(static_cast<double>(sidx) * dt - t) > 1e-9 * std::max(1.0, t))
    throw std::invalid_argument("final time must be a multiple of dt");

  const std::size_t n = p0.n;
  const double h = p0.dx();
  std::vector<double> e(TriangleDensity::cell_count(n));
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i)
      e[p0.index(i, j)] =
          pot.energy(Configuration::from_sorted({p0.node(i), p0.node(j)}));

  struct Edge {
    std::size_t a, b;
    double bp, bm;  // flux = bp p_a - bm p_b, scaled by kClock/dx
  };
  std::vector<Edge> edges;
  edges.reserve(2 * e.size());
  auto add_edge = [&](std::size_t a, std::size_t b) {
    double z = e[b] - e[a];
    edges.push_back({a, b, detail::bernoulli_ratio(z) * kClock / h,
                     detail::bernoulli_ratio(-z) * kClock / h});
  };
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      if (i + 1 < j) add_edge(p0.index(i, j), p0.index(i + 1, j));
      if (j + 1 < n) add_edge(p0.index(i, j), p0.index(i, j + 1));
    }
  std::vector<double> coef(e.size(), 0.0);
  for (const Edge& ed : edges) {
    coef[ed.a] += ed.bp / h;
    coef[ed.b] += ed.bm / h;
  }
  double max_coef = 0;
  for (double c : coef) max_coef = std::max(max_coef, c);
  if (dt * max_coef > 1.0)
    throw ConfigError("flow step too large for this grid: dt must be <= " +
                      std::to_string(1.0 / max_coef));

  TriangleDensity cur = p0;
  std::vector<double> div(e.size());
  for (std::size_t s = 0; s < sidx; ++s) {
    std::fill(div.begin(), div.end(), 0.0);
    for (const Edge& ed : edges) {
      double f = ed.bp * cur.p[ed.a] - ed.bm * cur.p[ed.b];
      div[ed.a] += f;
      div[ed.b] -= f;
    }
    for (std::size_t a = 0; a < cur.p.size(); ++a)
      cur.p[a] -= dt / h * div[a];
  }
  if (stats) {
    stats->steps += sidx;
    stats->max_coefficient = std::max(stats->max_coefficient, max_coef);
  }
  return cur;
}

inline double triangle_entropy(const TriangleDensity& p,
                               const ConditionalPotential& pot) {
  if (std::abs(p.mass() - 1.0) > 1e-9)
    throw std::invalid_argument("density is not normalized");
  const std::size_t n = p.n;
  std::vector<double> e(TriangleDensity::cell_count(n));
  double lo = kInf;
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      double v = pot.energy(Configuration::from_sorted({p.node(i), p.node(j)}));
      e[p.index(i, j)] = v;
      lo = std::min(lo, v);
    }
  double z = 0;
  for (double v : e) z += std::exp(-(v - lo));
  const double w = p.dx() * p.dx();
  z *= w;
  double s = 0;
  for (std::size_t a = 0; a < p.p.size(); ++a) {
    double pi = std::exp(-(e[a] - lo)) / z;
    if (p.p[a] <= 0) continue;
    if (pi <= 0) return kInf;
    double rho = p.p[a] / pi;
    s += rho * std::log(rho) * pi;
  }
  return s * w;
}

}  // namespace loggas