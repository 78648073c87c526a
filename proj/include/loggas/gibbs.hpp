#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "loggas/config_space.hpp"
#include "loggas/errors.hpp"
#include "loggas/potentials.hpp"
#include "loggas/rng.hpp"

namespace loggas {

enum class SamplerScheme { Metropolis, Mala };

struct SamplerConfig {
  std::size_t n_samples = 1000;
  std::size_t burn_in = 2000;
  std::size_t thinning = 5;
  // Initial proposal length scale; adapted during burn-in when adapt is set.
  double step_size = 0.3;
  SamplerScheme scheme = SamplerScheme::Metropolis;
  bool adapt = true;
  std::uint64_t seed = 1;
};

struct SamplerDiagnostics {
  double acceptance_rate = 0;  // measured after burn-in, adaptation frozen
  double adapted_step = 0;
  std::size_t total_steps = 0;
  double mean_energy = 0;
};

namespace detail {

// Energy of an unordered label vector: sort a scratch copy first.
inline double energy_unordered(const ConditionalPotential& pot,
                               std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return pot.energy(Configuration::from_sorted(std::move(x)));
}

// Gradient of the symmetric energy at unordered labels: computed at the
// sorted configuration and scattered back through the sort permutation.
inline void gradient_unordered(const ConditionalPotential& pot,
                               const std::vector<double>& x,
                               std::vector<double>& g,
                               std::vector<std::size_t>& order,
                               std::vector<double>& sorted,
                               std::vector<double>& gsorted) {
  const std::size_t k = x.size();
  order.resize(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  sorted.resize(k);
  gsorted.resize(k);
  for (std::size_t i = 0; i < k; ++i) sorted[i] = x[order[i]];
  pot.gradient_raw(sorted.data(), k, gsorted.data());
  g.resize(k);
  for (std::size_t i = 0; i < k; ++i) g[order[i]] = gsorted[i];
}

// Density of the wall-folded normal with mean mu and standard deviation sd,
// evaluated at y inside [-r, r]: the sum over the reflection group's images
// of y. Images beyond 12 standard deviations are dropped.
inline double folded_normal_density(double y, double mu, double sd, double r) {
  const double span = 4.0 * r;  // translation period of the reflection group
  const double lim = 12.0 * sd;
  double acc = 0;
  auto phi = [&](double u) {
    double t = (u - mu) / sd;
    return std::exp(-0.5 * t * t);
  };
  for (int m = 0;; ++m) {
    double base = m * span;
    bool any = false;
    // Images of y under translations by 4r and reflections across the walls.
    for (double img : {y + base, -2.0 * r - y + base}) {
      if (std::abs(img - mu) < lim) {
        acc += phi(img);
        any = true;
      }
    }
    if (m > 0) {
      for (double img : {y - base, -2.0 * r - y - base}) {
        if (std::abs(img - mu) < lim) {
          acc += phi(img);
          any = true;
        }
      }
    }
    if (!any && m * span > lim + 2.0 * r + std::abs(mu)) break;
  }
  return acc / (sd * std::sqrt(2.0 * M_PI));
}

// Drift taming: caps the proposal displacement at the window scale. Any
// deterministic mean function keeps Metropolis-Hastings exact as long as the
// same mean enters the proposal density.
inline double tamed_drift(double halfstep_times_grad, double r) {
  return std::clamp(halfstep_times_grad, -r, r);
}

}  // namespace detail

// Metropolis-Hastings sampler for the conditional Gibbs measure
// π ∝ exp(−Ψ) on the window, over unordered particle labels. Proposals are
// folded at the walls; the fold makes the random-walk kernel symmetric, and
// the adjusted scheme divides out the folded-normal densities exactly.
// Step-size adaptation runs only during burn-in (targets 0.234 for the
// random walk, 0.574 for the adjusted Langevin proposal), so the recorded
// chain is a fixed exact kernel. Collisions have infinite energy and are
// simply rejected. Acceptance collapse after burn-in is an error.
inline std::vector<Configuration> sample_conditional(
    const ConditionalPotential& pot, std::size_t k, const SamplerConfig& cfg,
    SamplerDiagnostics* diag = nullptr) {
  const double r = pot.window();
  StreamRng rng(cfg.seed, 0x676962, static_cast<std::uint64_t>(k));

  // Equally spaced start, strictly inside and collision-free.
  std::vector<double> x(k);
  for (std::size_t i = 0; i < k; ++i)
    x[i] = -0.8 * r + 1.6 * r * (static_cast<double>(i) + 0.5) /
                          static_cast<double>(std::max<std::size_t>(k, 1));
  double energy = detail::energy_unordered(pot, x);

  double step = cfg.step_size;
  const double target =
      cfg.scheme == SamplerScheme::Mala ? 0.574 : 0.234;
  const bool mala = cfg.scheme == SamplerScheme::Mala;

  std::vector<double> grad, gsorted, sorted, mean(k), y(k), grad_y, mean_y(k);
  std::vector<std::size_t> order;
  if (mala) detail::gradient_unordered(pot, x, grad, order, sorted, gsorted);

  std::size_t accepted_main = 0, main_steps = 0;
  double energy_sum = 0;
  std::vector<Configuration> out;
  out.reserve(cfg.n_samples);

  const std::size_t total =
      cfg.burn_in + cfg.n_samples * std::max<std::size_t>(cfg.thinning, 1);
  for (std::size_t t = 0; t < total; ++t) {
    double log_accept;
    bool accepted = false;
    if (!mala) {
      for (std::size_t i = 0; i < k; ++i)
        y[i] = fold_into_window(x[i] + step * rng.normal(), r);
      double ey = detail::energy_unordered(pot, y);
      log_accept = energy - ey;
      if (log_accept >= 0 || rng.uniform01() < std::exp(log_accept)) {
        x = y;
        energy = ey;
        accepted = true;
      }
    } else {
      const double h = step * step;
      for (std::size_t i = 0; i < k; ++i) {
        mean[i] = x[i] + detail::tamed_drift(-0.5 * h * grad[i], r);
        y[i] = fold_into_window(mean[i] + step * rng.normal(), r);
      }
      double ey = detail::energy_unordered(pot, y);
      if (ey == kInf) {
        log_accept = -kInf;
      } else {
        detail::gradient_unordered(pot, y, grad_y, order, sorted, gsorted);
        for (std::size_t i = 0; i < k; ++i)
          mean_y[i] = y[i] + detail::tamed_drift(-0.5 * h * grad_y[i], r);
        double log_q_fwd = 0, log_q_rev = 0;
        for (std::size_t i = 0; i < k; ++i) {
          log_q_fwd +=
              std::log(detail::folded_normal_density(y[i], mean[i], step, r));
          log_q_rev +=
              std::log(detail::folded_normal_density(x[i], mean_y[i], step, r));
        }
        log_accept = (energy - ey) + (log_q_rev - log_q_fwd);
      }
      if (log_accept >= 0 || rng.uniform01() < std::exp(log_accept)) {
        x = y;
        energy = ey;
        grad = grad_y;
        accepted = true;
      }
    }

    if (t < cfg.burn_in) {
      if (cfg.adapt) {
        double prob =
            log_accept >= 0 ? 1.0 : std::exp(std::max(log_accept, -50.0));
        double gain = 0.3 / std::pow(1.0 + static_cast<double>(t), 0.6);
        step = std::clamp(step * std::exp(gain * (prob - target)), 1e-6 * r,
                          2.0 * r);
      }
    } else {
      ++main_steps;
      if (accepted) ++accepted_main;
      std::size_t since = t - cfg.burn_in + 1;
      if (since % std::max<std::size_t>(cfg.thinning, 1) == 0 &&
          out.size() < cfg.n_samples) {
        std::vector<double> pts = x;
        out.push_back(Configuration(std::move(pts)));
        energy_sum += energy;
      }
    }
  }

  double acc_rate = main_steps
                        ? static_cast<double>(accepted_main) /
                              static_cast<double>(main_steps)
                        : 0.0;
  if (main_steps > 200 && acc_rate < 0.01)
    throw NumericalInstabilityError(
        "sampler acceptance collapsed after burn-in");
  if (diag) {
    diag->acceptance_rate = acc_rate;
    diag->adapted_step = step;
    diag->total_steps = total;
    diag->mean_energy = out.empty() ? 0 : energy_sum / out.size();
  }
  return out;
}

// Circular beta-ensemble sampler on [0, 2π)^k with single-site Metropolis
// sweeps: each site proposal mixes a fresh uniform angle with a wrapped local
// move, both symmetric. Used both as a distributional benchmark (the k = 2
// angular gap has closed-form density (1 − cos θ)/(2π) at β = 2) and to
// generate statistically plausible exterior data.
struct CbeConfig {
  std::size_t n_samples = 1000;
  std::size_t burn_in = 500;   // sweeps
  std::size_t thinning = 4;    // sweeps between records
  double local_step = 0.5;     // radians
  std::uint64_t seed = 1;
};

inline std::vector<std::vector<double>> sample_cbe(std::size_t k, double beta,
                                                   const CbeConfig& cfg) {
  StreamRng rng(cfg.seed, 0x636265, static_cast<std::uint64_t>(k));
  const double two_pi = 2.0 * M_PI;
  std::vector<double> th(k);
  for (std::size_t i = 0; i < k; ++i)
    th[i] = two_pi * (static_cast<double>(i) + 0.5) / static_cast<double>(k);

  auto pair_log = [&](double a, double b) {
    double s = std::abs(std::sin(0.5 * (a - b)));
    return s == 0 ? -kInf : std::log(2.0 * s);
  };
  auto site_energy = [&](std::size_t i, double v) {
    double acc = 0;
    for (std::size_t l = 0; l < k; ++l)
      if (l != i) acc += pair_log(v, th[l]);
    return beta * acc;
  };

  auto sweep = [&] {
    for (std::size_t i = 0; i < k; ++i) {
      double prop;
      if (rng.uniform01() < 0.5) {
        prop = rng.uniform(0.0, two_pi);
      } else {
        prop = std::fmod(th[i] + cfg.local_step * rng.normal(), two_pi);
        if (prop < 0) prop += two_pi;
      }
      double delta = site_energy(i, prop) - site_energy(i, th[i]);
      if (delta >= 0 || rng.uniform01() < std::exp(delta)) th[i] = prop;
    }
  };

  for (std::size_t t = 0; t < cfg.burn_in; ++t) sweep();
  std::vector<std::vector<double>> out;
  out.reserve(cfg.n_samples);
  for (std::size_t n = 0; n < cfg.n_samples; ++n) {
    for (std::size_t t = 0; t < std::max<std::size_t>(cfg.thinning, 1); ++t)
      sweep();
    out.push_back(th);
  }
  return out;
}

// Rescales circular-ensemble angles to particle positions with unit mean
// spacing centered at the origin: x = k·θ/(2π) − k/2, sorted.
inline Configuration cbe_to_line(const std::vector<double>& angles) {
  std::vector<double> x(angles.size());
  const double k = static_cast<double>(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i)
    x[i] = k * angles[i] / (2.0 * M_PI) - 0.5 * k;
  return Configuration(std::move(x));
}

// Deterministic exterior surrogate: one windowed circular-ensemble draw at
// the potential's inverse temperature, keeping points in r < |y| <= R.
inline ExteriorConfiguration sample_exterior_cbe(double beta, double r,
                                                 double R, std::size_t k,
                                                 std::uint64_t seed) {
  CbeConfig cc;
  cc.n_samples = 1;
  cc.burn_in = 400;
  cc.seed = seed;
  auto angles = sample_cbe(k, beta, cc);
  Configuration line = cbe_to_line(angles.front());
  std::vector<double> kept;
  for (double y : line.points())
    if (std::abs(y) > r && std::abs(y) <= R) kept.push_back(y);
  return ExteriorConfiguration::make(r, std::move(kept));
}

// Exact single-particle density on a uniform grid: pdf ∝ exp(−Ψ(x)) with
// trapezoid normalization, plus the interpolated CDF used by the
// Kolmogorov-Smirnov benchmark.
struct Density1P {
  std::vector<double> x;
  std::vector<double> pdf;
  std::vector<double> cdf;
  double log_z = 0;

  double cdf_at(double v) const {
    if (v <= x.front()) return 0;
    if (v >= x.back()) return 1;
    double h = x[1] - x[0];
    std::size_t j = std::min(
        x.size() - 2, static_cast<std::size_t>((v - x.front()) / h));
    double t = (v - x[j]) / h;
    // Trapezoid CDF is piecewise quadratic; linear interpolation of the pdf
    // inside the cell keeps it consistent with the normalization.
    double p = pdf[j] + t * (pdf[j + 1] - pdf[j]);
    return cdf[j] + 0.5 * (pdf[j] + p) * t * h;
  }
};

inline Density1P exact_density_1p(const ConditionalPotential& pot,
                                  std::size_t n_grid = 20001) {
  const double r = pot.window();
  Density1P d;
  d.x.resize(n_grid);
  d.pdf.resize(n_grid);
  d.cdf.resize(n_grid);
  double h = 2.0 * r / static_cast<double>(n_grid - 1);
  double emax = -kInf;
  std::vector<double> minus_psi(n_grid);
  for (std::size_t j = 0; j < n_grid; ++j) {
    d.x[j] = -r + h * static_cast<double>(j);
    double xc = std::clamp(d.x[j], -r, r);  // guard endpoint rounding
    minus_psi[j] = -pot.energy(Configuration::from_sorted({xc}));
    emax = std::max(emax, minus_psi[j]);
  }
  double z = 0;
  for (std::size_t j = 0; j < n_grid; ++j) {
    d.pdf[j] = std::exp(minus_psi[j] - emax);
    z += d.pdf[j] * (j == 0 || j + 1 == n_grid ? 0.5 : 1.0);
  }
  z *= h;
  d.log_z = std::log(z) + emax;
  for (auto& p : d.pdf) p /= z;
  d.cdf[0] = 0;
  for (std::size_t j = 1; j < n_grid; ++j)
    d.cdf[j] = d.cdf[j - 1] + 0.5 * (d.pdf[j - 1] + d.pdf[j]) * h;
  if (std::abs(d.cdf.back() - 1.0) > 1e-10)
    throw NumericalInstabilityError("single-particle density normalization");
  return d;
}

// Kolmogorov-Smirnov statistic of samples against a reference CDF.
template <class CdfFn>
double ks_statistic(std::vector<double> samples, CdfFn&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    worst = std::max(worst, std::abs((i + 1.0) / n - f));
    worst = std::max(worst, std::abs(f - i / n));
  }
  return worst;
}

}  // namespace loggas
