#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loggas/clock.hpp"
#include "loggas/config_space.hpp"
#include "loggas/cylinder.hpp"
#include "loggas/dynamics.hpp"
#include "loggas/errors.hpp"
#include "loggas/parallel.hpp"
#include "loggas/potentials.hpp"

namespace loggas {

// One-sided acceptance threshold for Monte Carlo margins.
inline constexpr double kVerifyZ = 3.0;

// ---------------------------------------------------------------------------
// Clock-mapped constants.
//
// All decay factors below are stated for the semigroup T_t generated by
// A = (1/2)Δ − (1/2)∇Ψ·∇ with Hess Ψ ≥ K. T_t is the unit-diffusion
// semigroup at time kClock·t (see clock.hpp), and with the project's
// carré du champ Γ(u) = Σ_i (∂_i u)² the variance identity reads
//   Var_t(u) = ∫₀ᵗ T_s Γ(T_{t−s} u) ds.
// Combining it with the commutation bound Γ(T_τ u) ≤ e^{−2K·kClock·τ} T_τΓ(u)
// in both time directions gives the integrated factors; every K = 0 value is
// the continuous K → 0 limit of its K-form, never a separately stated
// constant. With kClock = 1/2 the free motion of a mean statistic saturates
// the K = 0 variance factors exactly (Var_t = t·Γ), which the regression
// tests pin.
// ---------------------------------------------------------------------------

inline double be_decay(double K, double t) {
  return std::exp(-2.0 * K * kClock * t);
}

inline double poincare_upper_factor(double K, double t) {
  double lam = 2.0 * K * kClock;
  if (lam == 0) return t;
  return -std::expm1(-lam * t) / lam;
}

inline double poincare_lower_factor(double K, double t) {
  double lam = 2.0 * K * kClock;
  if (lam == 0) return t;
  return std::expm1(lam * t) / lam;
}

// Shared rate of the dimension-free Harnack family:
//   K / (2·(1 − e^{−2K·kClock·t}))  →  1/(4·kClock·t) as K → 0.
inline double harnack_rate(double K, double t) {
  if (K == 0) return 1.0 / (4.0 * kClock * t);
  return K / (2.0 * -std::expm1(-2.0 * K * kClock * t));
}

// Power-Harnack exponent: (T_t u)^α(γ) ≤ T_t(u^α)(η) · exp(exponent).
inline double harnack_exponent(double alpha, double dbar2, double K, double t) {
  return alpha / (alpha - 1.0) * dbar2 * harnack_rate(K, t);
}

// Log-Harnack additive term: T_t(log u)(γ) ≤ log(T_t u)(η) + coeff·d̄².
inline double log_harnack_coeff(double K, double t) {
  return harnack_rate(K, t);
}

inline double lipschitz_decay(double K, double t) {
  return std::exp(-K * kClock * t);
}

// Exponential-moment thresholds for 1-Lipschitz statistics at time t: the
// strict value sqrt(2/(kClock·t)) is the conservative unit-clock gate; the
// K-form sqrt(8K/(1 − e^{−2K·kClock·t})) → sqrt(4/(kClock·t)) is reported
// alongside.
inline double exp_moment_threshold_strict(double t) {
  return std::sqrt(2.0 / (kClock * t));
}
inline double exp_moment_threshold_limit(double K, double t) {
  if (K == 0) return std::sqrt(4.0 / (kClock * t));
  return std::sqrt(8.0 * K / -std::expm1(-2.0 * K * kClock * t));
}

// ---------------------------------------------------------------------------
// Moment accumulation.
// ---------------------------------------------------------------------------

// Running first and second moments of a fixed-dimension sample vector, with
// exact covariance of the vector of sample means. Merging is associative and
// performed in chunk order everywhere, which keeps reductions bit-stable.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(std::size_t dim)
      : d_(dim), s1_(dim, 0.0), s2_(dim * dim, 0.0) {}

  std::size_t dim() const { return d_; }
  std::size_t count() const { return n_; }

  void add(const double* v) {
    for (std::size_t i = 0; i < d_; ++i) {
      s1_[i] += v[i];
      for (std::size_t j = i; j < d_; ++j) s2_[i * d_ + j] += v[i] * v[j];
    }
    ++n_;
  }

  void merge(const MomentAccumulator& o) {
    for (std::size_t i = 0; i < s1_.size(); ++i) s1_[i] += o.s1_[i];
    for (std::size_t i = 0; i < s2_.size(); ++i) s2_[i] += o.s2_[i];
    n_ += o.n_;
  }

  double mean(std::size_t i) const { return s1_[i] / static_cast<double>(n_); }

  // Covariance of the sample means m_i, m_j.
  double cov_of_mean(std::size_t i, std::size_t j) const {
    if (n_ < 2) return 0;
    double n = static_cast<double>(n_);
    double a = i <= j ? s2_[i * d_ + j] : s2_[j * d_ + i];
    double c = (a - n * mean(i) * mean(j)) / (n - 1.0);
    return c / n;
  }

  // Variance of Σ_i g_i·m_i (delta method for smooth functions of means).
  double var_of_linear(const std::vector<double>& g) const {
    double acc = 0;
    for (std::size_t i = 0; i < d_; ++i) {
      if (g[i] == 0) continue;
      for (std::size_t j = 0; j < d_; ++j) {
        if (g[j] == 0) continue;
        acc += g[i] * g[j] * cov_of_mean(i, j);
      }
    }
    return std::max(acc, 0.0);
  }

 private:
  std::size_t d_ = 0;
  std::vector<double> s1_, s2_;
  std::size_t n_ = 0;
};

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

struct VerificationReport {
  std::string inequality;
  std::string potential;
  std::string observable;
  std::size_t k = 0;
  double t = 0;
  double curvature = 0;
  double left = 0;
  double right = 0;
  double margin = 0;  // right − left; the inequality asserts margin ≥ 0
  double pooled_stderr = 0;
  double z = 0;
  bool pass = false;
  bool inconclusive = false;
  std::size_t n_paths = 0;
  std::map<std::string, double> details;
};

namespace detail {

inline void finish_report(VerificationReport& rep) {
  rep.margin = rep.right - rep.left;
  if (rep.pooled_stderr > 0) {
    rep.z = rep.margin / rep.pooled_stderr;
  } else {
    rep.z = rep.margin >= 0 ? 1e18 : -1e18;
  }
  rep.pass = rep.z >= -kVerifyZ;
  rep.inconclusive = rep.pooled_stderr > 0.2 * std::abs(rep.right);
}

inline void stamp_common(VerificationReport& rep,
                         const ConditionalPotential& pot,
                         const std::string& observable, std::size_t k,
                         double t, double K, std::size_t n_paths) {
  rep.potential = pot.name();
  rep.observable = observable;
  rep.k = k;
  rep.t = t;
  rep.curvature = K;
  rep.n_paths = n_paths;
}

// --- Report assembly from a joint moment matrix. Each helper receives the
// indices of the statistics it consumes inside the accumulated vector, so
// the standalone checks and the batched suite share one set of formulas.

// Commutation: Σ_i d̂_i² ≤ e^{−2K·kClock·t}·mean Γ(u), d̂ the common-noise
// difference quotients at indices [d0, d0+k), Γ(u) at index gG.
inline VerificationReport assemble_commutation(const MomentAccumulator& m,
                                               std::size_t d0, std::size_t k,
                                               std::size_t gG, double K,
                                               double t) {
  VerificationReport rep;
  rep.inequality = "gradient-commutation";
  const double decay = be_decay(K, t);
  std::vector<double> g(m.dim(), 0.0);
  double left = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double di = m.mean(d0 + i);
    left += di * di;
    g[d0 + i] = -2.0 * di;
  }
  g[gG] = decay;
  rep.left = left;
  rep.right = decay * m.mean(gG);
  rep.pooled_stderr = std::sqrt(m.var_of_linear(g));
  rep.details["decay"] = decay;
  finish_report(rep);
  return rep;
}

// Two-sided local variance bounds; returns the composite carrying the worse
// side's numbers, with both sides in details.
inline VerificationReport assemble_variance(const MomentAccumulator& m,
                                            std::size_t d0, std::size_t k,
                                            std::size_t gG, std::size_t a,
                                            std::size_t a2, double K,
                                            double t) {
  const double mean_u = m.mean(a);
  const double variance = m.mean(a2) - mean_u * mean_u;
  const double up = poincare_upper_factor(K, t);
  const double lo = poincare_lower_factor(K, t);

  VerificationReport upper;
  upper.left = variance;
  upper.right = up * m.mean(gG);
  {
    std::vector<double> g(m.dim(), 0.0);
    g[gG] = up;
    g[a] = 2.0 * mean_u;
    g[a2] = -1.0;
    upper.pooled_stderr = std::sqrt(m.var_of_linear(g));
  }
  finish_report(upper);

  VerificationReport lower;
  {
    std::vector<double> g(m.dim(), 0.0);
    double grad2 = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double di = m.mean(d0 + i);
      grad2 += di * di;
      g[d0 + i] = -lo * 2.0 * di;
    }
    g[a] = -2.0 * mean_u;
    g[a2] = 1.0;
    lower.left = lo * grad2;
    lower.right = variance;
    lower.pooled_stderr = std::sqrt(m.var_of_linear(g));
  }
  finish_report(lower);

  VerificationReport rep = upper.z <= lower.z ? upper : lower;
  rep.inequality = "local-variance";
  rep.pass = upper.pass && lower.pass;
  rep.inconclusive = upper.inconclusive || lower.inconclusive;
  rep.details["upper_margin"] = upper.margin;
  rep.details["upper_stderr"] = upper.pooled_stderr;
  rep.details["upper_z"] = upper.z;
  rep.details["lower_margin"] = lower.margin;
  rep.details["lower_stderr"] = lower.pooled_stderr;
  rep.details["lower_z"] = lower.z;
  rep.details["variance"] = variance;
  rep.details["upper_factor"] = up;
  rep.details["lower_factor"] = lo;
  return rep;
}

// Power Harnack: mean(u at γ)^α ≤ e^{exponent}·mean(u^α at η); index a holds
// u on the γ ensemble, index bal holds u^α on the η ensemble.
inline VerificationReport assemble_power_harnack(const MomentAccumulator& m,
                                                 std::size_t a,
                                                 std::size_t bal, double alpha,
                                                 double dbar, double K,
                                                 double t) {
  VerificationReport rep;
  rep.inequality = "power-harnack";
  const double expo = harnack_exponent(alpha, dbar * dbar, K, t);
  rep.left = std::pow(std::max(m.mean(a), 0.0), alpha);
  rep.right = std::exp(expo) * m.mean(bal);
  std::vector<double> g(m.dim(), 0.0);
  g[a] = -alpha * std::pow(std::max(m.mean(a), 0.0), alpha - 1.0);
  g[bal] = std::exp(expo);
  rep.pooled_stderr = std::sqrt(m.var_of_linear(g));
  rep.details["alpha"] = alpha;
  rep.details["dbar"] = dbar;
  rep.details["exponent"] = expo;
  finish_report(rep);
  return rep;
}

// Log Harnack with additive regularization log_eps inside the logarithm:
// mean(log(u+ε) at γ) ≤ log(mean(u at η)+ε) + coeff·d̄².
inline VerificationReport assemble_log_harnack(const MomentAccumulator& m,
                                               std::size_t alog, std::size_t b,
                                               double log_eps, double dbar,
                                               double K, double t) {
  VerificationReport rep;
  rep.inequality = "log-harnack";
  const double coeff = log_harnack_coeff(K, t);
  rep.left = m.mean(alog);
  rep.right = std::log(m.mean(b) + log_eps) + coeff * dbar * dbar;
  std::vector<double> g(m.dim(), 0.0);
  g[alog] = -1.0;
  g[b] = 1.0 / (m.mean(b) + log_eps);
  rep.pooled_stderr = std::sqrt(m.var_of_linear(g));
  rep.details["dbar"] = dbar;
  rep.details["coeff"] = coeff;
  rep.details["log_eps"] = log_eps;
  finish_report(rep);
  return rep;
}

// Lipschitz contraction: |mean(u at γ) − mean(u at η)| ≤ L·e^{−K·kClock·t}·d̄.
inline VerificationReport assemble_lipschitz(const MomentAccumulator& m,
                                             std::size_t a, std::size_t b,
                                             double lip_bound, double dbar,
                                             double K, double t) {
  VerificationReport rep;
  rep.inequality = "lipschitz-contraction";
  const double diff = m.mean(a) - m.mean(b);
  rep.left = std::abs(diff);
  rep.right = lip_bound * lipschitz_decay(K, t) * dbar;
  std::vector<double> g(m.dim(), 0.0);
  g[a] = diff >= 0 ? -1.0 : 1.0;
  g[b] = -g[a];
  rep.pooled_stderr = std::sqrt(m.var_of_linear(g));
  rep.details["dbar"] = dbar;
  rep.details["lipschitz_bound"] = lip_bound;
  finish_report(rep);
  return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Monte Carlo plumbing shared by the estimators: evolve a variant bundle,
// reduce a per-path sample vector at each record time, chunk by chunk.
// ---------------------------------------------------------------------------

// fill(record_index, states, out) writes the dim-dimensional sample vector
// for one path at one record time. Result is indexed [chunk][record time].
template <class Fill>
std::vector<std::vector<MomentAccumulator>> bundle_moments(
    const std::vector<Configuration>& variants, const ConditionalPotential& pot,
    const SdeConfig& sde, const std::vector<double>& times,
    std::size_t n_paths, int threads, std::size_t dim, Fill&& fill,
    StepStats* stats = nullptr) {
  const std::size_t n_chunks = (n_paths + kReductionChunk - 1) / kReductionChunk;
  std::vector<std::vector<MomentAccumulator>> acc(
      n_chunks, std::vector<MomentAccumulator>(times.size(),
                                               MomentAccumulator(dim)));
  StepStats st = evolve_bundle(
      variants, pot, sde, times, n_paths, threads,
      [&](std::size_t chunk, std::size_t, std::size_t rec,
          const std::vector<std::vector<double>>& states) {
        std::vector<double> local(dim);
        fill(rec, states, local.data());
        acc[chunk][rec].add(local.data());
      });
  if (stats) stats->merge(st);
  return acc;
}

inline MomentAccumulator merge_chunks(
    const std::vector<std::vector<MomentAccumulator>>& acc, std::size_t rec) {
  if (acc.empty()) return MomentAccumulator(0);
  MomentAccumulator out(acc.front()[rec].dim());
  for (const auto& chunk : acc) out.merge(chunk[rec]);
  return out;
}

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

struct MeanEstimate {
  double value = 0;
  double stderr_ = 0;
  std::size_t n = 0;
};

inline MeanEstimate semigroup_estimate(const CylinderFunction& u,
                                       const Configuration& gamma, double t,
                                       const ConditionalPotential& pot,
                                       const SdeConfig& sde,
                                       std::size_t n_paths, int threads = 1) {
  if (t == 0) return {u.value(gamma), 0.0, 0};
  const std::size_t k = gamma.count();
  auto acc = bundle_moments(
      {gamma}, pot, sde, {t}, n_paths, threads, 1,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        out[0] = u.value_raw(s[0].data(), k);
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  return {m.mean(0), std::sqrt(m.cov_of_mean(0, 0)), m.count()};
}

// Finite-difference variant states: per coordinate a shift of ±eps chosen so
// the shifted configuration stays strictly sorted inside the window, with a
// 2·eps safety gap. signs[i] records the chosen direction.
inline std::vector<Configuration> fd_variants(const Configuration& gamma,
                                              double eps, double r,
                                              std::vector<double>& signs) {
  const std::size_t k = gamma.count();
  std::vector<Configuration> out;
  out.reserve(k + 1);
  out.push_back(gamma);
  signs.assign(k, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    double room_up = (i + 1 < k ? gamma[i + 1] : r) - gamma[i];
    double room_dn = gamma[i] - (i > 0 ? gamma[i - 1] : -r);
    double sign;
    if (room_up > 2 * eps)
      sign = 1.0;
    else if (room_dn > 2 * eps)
      sign = -1.0;
    else
      throw std::invalid_argument(
          "configuration too tight for finite-difference shifts");
    signs[i] = sign;
    std::vector<double> pts = gamma.points();
    pts[i] += sign * eps;
    out.push_back(Configuration::from_sorted(std::move(pts)));
  }
  return out;
}

struct GradientEstimate {
  double grad_norm2 = 0;  // plug-in Σ_i (∂_i T_t u)²
  double stderr_ = 0;
  std::vector<double> partials;
  std::vector<double> partial_stderr;
  double fd_eps = 0;
  std::size_t n = 0;
};

// Forward-difference estimate of the particle gradient of T_t u at gamma,
// using common Brownian noise across the base and shifted copies. The
// finite-difference bias is O(eps) and deliberately below the Monte Carlo
// resolution at the default eps.
inline GradientEstimate gradient_semigroup(const CylinderFunction& u,
                                           const Configuration& gamma,
                                           double t,
                                           const ConditionalPotential& pot,
                                           const SdeConfig& sde,
                                           std::size_t n_paths, double fd_eps,
                                           int threads = 1) {
  const std::size_t k = gamma.count();
  GradientEstimate est;
  est.fd_eps = fd_eps;
  if (t == 0) {
    est.partials = u.particle_gradient(gamma);
    est.partial_stderr.assign(k, 0.0);
    for (double g : est.partials) est.grad_norm2 += g * g;
    return est;
  }
  std::vector<double> signs;
  auto variants = fd_variants(gamma, fd_eps, pot.window(), signs);
  auto acc = bundle_moments(
      variants, pot, sde, {t}, n_paths, threads, k,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        double base = u.value_raw(s[0].data(), k);
        for (std::size_t i = 0; i < k; ++i)
          out[i] =
              (u.value_raw(s[i + 1].data(), k) - base) / (fd_eps * signs[i]);
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  est.n = m.count();
  est.partials.resize(k);
  est.partial_stderr.resize(k);
  std::vector<double> grad(k);
  for (std::size_t i = 0; i < k; ++i) {
    est.partials[i] = m.mean(i);
    est.partial_stderr[i] = std::sqrt(m.cov_of_mean(i, i));
    est.grad_norm2 += est.partials[i] * est.partials[i];
    grad[i] = 2.0 * est.partials[i];
  }
  est.stderr_ = std::sqrt(m.var_of_linear(grad));
  return est;
}

// ---------------------------------------------------------------------------
// Standalone inequality checks. Each evolves a common-noise bundle, reduces
// the per-path statistics it needs, and reports margin = right − left with a
// delta-method pooled standard error from the joint moment matrix, so the
// correlations induced by shared noise are accounted for. A check passes
// when the margin is not significantly negative (z ≥ −3) and is flagged
// inconclusive when the error bar exceeds 20% of the right side.
// ---------------------------------------------------------------------------

inline VerificationReport verify_be(const CylinderFunction& u,
                                    const Configuration& gamma, double t,
                                    const ConditionalPotential& pot, double K,
                                    const SdeConfig& sde, std::size_t n_paths,
                                    double fd_eps, int threads = 1) {
  const std::size_t k = gamma.count();
  std::vector<double> signs;
  auto variants = fd_variants(gamma, fd_eps, pot.window(), signs);
  auto acc = bundle_moments(
      variants, pot, sde, {t}, n_paths, threads, k + 1,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        double base = u.value_raw(s[0].data(), k);
        for (std::size_t i = 0; i < k; ++i)
          out[i] =
              (u.value_raw(s[i + 1].data(), k) - base) / (fd_eps * signs[i]);
        out[k] = u.carre_du_champ_raw(s[0].data(), k);
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  VerificationReport rep = detail::assemble_commutation(m, 0, k, k, K, t);
  detail::stamp_common(rep, pot, u.name(), k, t, K, n_paths);
  rep.details["fd_eps"] = fd_eps;
  return rep;
}

inline VerificationReport verify_poincare(const CylinderFunction& u,
                                          const Configuration& gamma, double t,
                                          const ConditionalPotential& pot,
                                          double K, const SdeConfig& sde,
                                          std::size_t n_paths, double fd_eps,
                                          int threads = 1) {
  const std::size_t k = gamma.count();
  std::vector<double> signs;
  auto variants = fd_variants(gamma, fd_eps, pot.window(), signs);
  auto acc = bundle_moments(
      variants, pot, sde, {t}, n_paths, threads, k + 3,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        double base = u.value_raw(s[0].data(), k);
        for (std::size_t i = 0; i < k; ++i)
          out[i] =
              (u.value_raw(s[i + 1].data(), k) - base) / (fd_eps * signs[i]);
        out[k] = u.carre_du_champ_raw(s[0].data(), k);
        out[k + 1] = base;
        out[k + 2] = base * base;
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  VerificationReport rep =
      detail::assemble_variance(m, 0, k, k, k + 1, k + 2, K, t);
  detail::stamp_common(rep, pot, u.name(), k, t, K, n_paths);
  rep.details["fd_eps"] = fd_eps;
  return rep;
}

inline VerificationReport verify_harnack(const CylinderFunction& u,
                                         const Configuration& gamma,
                                         const Configuration& eta,
                                         double alpha, double t,
                                         const ConditionalPotential& pot,
                                         double K, const SdeConfig& sde,
                                         std::size_t n_paths,
                                         int threads = 1) {
  if (!(alpha > 1))
    throw std::invalid_argument("power-harnack needs alpha > 1");
  if (u.range_lo() < 0)
    throw std::invalid_argument("power-harnack needs a nonnegative observable");
  const double dbar = bar_distance(gamma, eta, pot.window());
  if (!(dbar < kInf))
    throw std::invalid_argument("configurations at infinite distance");
  const std::size_t k = gamma.count();
  auto acc = bundle_moments(
      {gamma, eta}, pot, sde, {t}, n_paths, threads, 2,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        out[0] = u.value_raw(s[0].data(), k);
        out[1] = std::pow(u.value_raw(s[1].data(), k), alpha);
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  VerificationReport rep =
      detail::assemble_power_harnack(m, 0, 1, alpha, dbar, K, t);
  detail::stamp_common(rep, pot, u.name(), k, t, K, n_paths);
  return rep;
}

inline VerificationReport verify_log_harnack(
    const CylinderFunction& u, const Configuration& gamma,
    const Configuration& eta, double t, const ConditionalPotential& pot,
    double K, double log_eps, const SdeConfig& sde, std::size_t n_paths,
    int threads = 1) {
  if (u.range_lo() < 0)
    throw std::invalid_argument("log-harnack needs a nonnegative observable");
  if (!(log_eps > 0)) throw std::invalid_argument("log_eps must be positive");
  const double dbar = bar_distance(gamma, eta, pot.window());
  if (!(dbar < kInf))
    throw std::invalid_argument("configurations at infinite distance");
  const std::size_t k = gamma.count();
  auto acc = bundle_moments(
      {gamma, eta}, pot, sde, {t}, n_paths, threads, 2,
      [&](std::size_t, const std::vector<std::vector<double>>& s, double* out) {
        out[0] = std::log(u.value_raw(s[0].data(), k) + log_eps);
        out[1] = u.value_raw(s[1].data(), k);
      });
  MomentAccumulator m = merge_chunks(acc, 0);
  VerificationReport rep =
      detail::assemble_log_harnack(m, 0, 1, log_eps, dbar, K, t);
  detail::stamp_common(rep, pot, u.name(), k, t, K, n_paths);
  return rep;
}

inline VerificationReport verify_lipschitz_contraction(
    const CylinderFunction& u,
    const std::vector<std::pair<Configuration, Configuration>>& pairs,
    double t, const ConditionalPotential& pot, double K, const SdeConfig& sde,
    std::size_t n_paths, int threads = 1) {
  if (pairs.empty()) throw std::invalid_argument("no configuration pairs");
  VerificationReport worst;
  bool first = true;
  double worst_key = kInf;
  std::size_t worst_idx = 0;
  std::map<std::string, double> all;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [gamma, eta] = pairs[p];
    const double dbar = bar_distance(gamma, eta, pot.window());
    if (!(dbar < kInf))
      throw std::invalid_argument("pair at infinite distance");
    const std::size_t k = gamma.count();
    SdeConfig pair_sde = sde;
    pair_sde.seed = derive_seed(sde.seed, p, 0x6c6970);
    auto acc = bundle_moments(
        {gamma, eta}, pot, pair_sde, {t}, n_paths, threads, 2,
        [&](std::size_t, const std::vector<std::vector<double>>& s,
            double* out) {
          out[0] = u.value_raw(s[0].data(), k);
          out[1] = u.value_raw(s[1].data(), k);
        });
    MomentAccumulator m = merge_chunks(acc, 0);
    VerificationReport rep =
        detail::assemble_lipschitz(m, 0, 1, u.lipschitz_bound(k), dbar, K, t);
    detail::stamp_common(rep, pot, u.name(), k, t, K, n_paths);
    all["pair" + std::to_string(p) + "_margin"] = rep.margin;
    all["pair" + std::to_string(p) + "_z"] = rep.z;
    double key = rep.pooled_stderr > 0 ? rep.z : rep.margin;
    if (first || key < worst_key) {
      worst_key = key;
      worst = rep;
      worst_idx = p;
      first = false;
    }
  }
  for (const auto& [key, val] : all) worst.details[key] = val;
  worst.details["worst_pair"] = static_cast<double>(worst_idx);
  worst.details["n_pairs"] = static_cast<double>(pairs.size());
  return worst;
}

// Exponential moment of a 1-Lipschitz observable, centered at its starting
// value. Below the strict threshold the estimate must stabilize; the prefix
// means at 1/4, 1/2 and full sample size expose heavy-tail divergence.
struct ExpMomentReport {
  std::string potential;
  std::string observable;
  std::size_t k = 0;
  double t = 0;
  double s = 0;
  double estimate = 0;
  double stderr_ = 0;
  std::array<double, 3> prefix{};
  bool stable = false;
  double threshold_strict = 0;
  double threshold_limit = 0;
  bool within_strict = false;
  std::size_t n_paths = 0;
};

namespace detail {

inline void finish_exp_moment(
    ExpMomentReport& rep,
    const std::vector<std::vector<MomentAccumulator>>& acc, std::size_t rec,
    std::size_t index) {
  MomentAccumulator running(acc.front()[rec].dim());
  const std::size_t n_chunks = acc.size();
  std::array<std::size_t, 3> cut = {(n_chunks + 3) / 4, (n_chunks + 1) / 2,
                                    n_chunks};
  std::size_t next = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    running.merge(acc[c][rec]);
    while (next < 3 && c + 1 == cut[next]) {
      rep.prefix[next] = running.mean(index);
      ++next;
    }
  }
  rep.estimate = running.mean(index);
  rep.stderr_ = std::sqrt(running.cov_of_mean(index, index));
  double worst_rel = 0;
  for (double p : rep.prefix)
    worst_rel = std::max(worst_rel,
                         std::abs(p - rep.estimate) /
                             std::max(std::abs(rep.estimate), 1e-12));
  rep.stable = std::isfinite(rep.estimate) && worst_rel < 0.5;
}

}  // namespace detail

inline ExpMomentReport exp_moment(const CylinderFunction& u_lip,
                                  const Configuration& gamma, double t,
                                  double s, const ConditionalPotential& pot,
                                  const SdeConfig& sde, std::size_t n_paths,
                                  int threads = 1) {
  const std::size_t k = gamma.count();
  if (u_lip.lipschitz_bound(k) > 1.0 + 1e-9)
    throw std::invalid_argument(
        "exponential moment gate requires a 1-Lipschitz observable");
  const double base_val = u_lip.value(gamma);
  auto acc = bundle_moments(
      {gamma}, pot, sde, {t}, n_paths, threads, 1,
      [&](std::size_t, const std::vector<std::vector<double>>& st,
          double* out) {
        out[0] = std::exp(s * (u_lip.value_raw(st[0].data(), k) - base_val));
      });
  ExpMomentReport rep;
  rep.potential = pot.name();
  rep.observable = u_lip.name();
  rep.k = k;
  rep.t = t;
  rep.s = s;
  rep.n_paths = n_paths;
  rep.threshold_strict = exp_moment_threshold_strict(t);
  rep.threshold_limit = exp_moment_threshold_limit(0.0, t);
  rep.within_strict = s < rep.threshold_strict;
  detail::finish_exp_moment(rep, acc, 0, 0);
  return rep;
}

// ---------------------------------------------------------------------------
// Batched suite: one shared ensemble serves every inequality. The variant
// bundle is [γ, k finite-difference shifts of γ, η]; all observables and all
// record times are evaluated on the same simulated paths, so a full grid
// point costs one simulation instead of seven.
// ---------------------------------------------------------------------------

struct SuiteConfig {
  std::vector<double> times;
  std::vector<CylinderFunction> observables;  // nonnegative-valued
  CylinderFunction lip_observable;            // 1-Lipschitz, for exp moments
  double K = 0;
  double alpha = 2.0;
  double log_eps = 1e-3;
  double fd_eps = 1e-4;
  double exp_s = 1.5;
  std::size_t n_paths = 100000;
  int threads = 1;
};

struct SuiteOutput {
  // Indexed [time][observable].
  std::vector<std::vector<VerificationReport>> commutation;
  std::vector<std::vector<VerificationReport>> variance;
  std::vector<std::vector<VerificationReport>> harnack_fwd, harnack_rev;
  std::vector<std::vector<VerificationReport>> log_harnack_fwd,
      log_harnack_rev;
  std::vector<std::vector<VerificationReport>> lipschitz;
  std::vector<ExpMomentReport> exp_moments;  // per time
  StepStats stats;

  std::vector<const VerificationReport*> all() const {
    std::vector<const VerificationReport*> out;
    for (const auto* grid : {&commutation, &variance, &harnack_fwd,
                             &harnack_rev, &log_harnack_fwd, &log_harnack_rev,
                             &lipschitz})
      for (const auto& row : *grid)
        for (const auto& rep : row) out.push_back(&rep);
    return out;
  }
};

inline SuiteOutput run_inequality_suite(const ConditionalPotential& pot,
                                        const Configuration& gamma,
                                        const Configuration& eta,
                                        const SdeConfig& sde,
                                        const SuiteConfig& cfg) {
  const std::size_t k = gamma.count();
  const std::size_t n_obs = cfg.observables.size();
  for (const auto& u : cfg.observables)
    if (u.range_lo() < 0)
      throw std::invalid_argument("suite observables must be nonnegative");
  if (cfg.lip_observable.lipschitz_bound(k) > 1.0 + 1e-9)
    throw std::invalid_argument("suite needs a 1-Lipschitz exp observable");
  const double dbar = bar_distance(gamma, eta, pot.window());
  if (!(dbar < kInf))
    throw std::invalid_argument("suite configurations at infinite distance");

  std::vector<double> signs;
  auto variants = fd_variants(gamma, cfg.fd_eps, pot.window(), signs);
  variants.push_back(eta);
  const std::size_t eta_slot = variants.size() - 1;

  // Per-observable block layout inside the sample vector:
  //   [d_0..d_{k-1}, Γ(u), u(γ), u²(γ), u^α(γ), log(u+ε)(γ),
  //    u(η), u^α(η), log(u+ε)(η)]
  // followed by one slot for the centered exponential statistic.
  const std::size_t block = k + 8;
  const std::size_t dim = n_obs * block + 1;
  const std::size_t exp_slot = n_obs * block;
  const double lip_base = cfg.lip_observable.value(gamma);

  StepStats stats;
  auto acc = bundle_moments(
      variants, pot, sde, cfg.times, cfg.n_paths, cfg.threads, dim,
      [&](std::size_t, const std::vector<std::vector<double>>& s,
          double* out) {
        for (std::size_t o = 0; o < n_obs; ++o) {
          const CylinderFunction& u = cfg.observables[o];
          const std::size_t off = o * block;
          double base = u.value_raw(s[0].data(), k);
          for (std::size_t i = 0; i < k; ++i)
            out[off + i] = (u.value_raw(s[i + 1].data(), k) - base) /
                           (cfg.fd_eps * signs[i]);
          out[off + k] = u.carre_du_champ_raw(s[0].data(), k);
          out[off + k + 1] = base;
          out[off + k + 2] = base * base;
          out[off + k + 3] = std::pow(base, cfg.alpha);
          out[off + k + 4] = std::log(base + cfg.log_eps);
          double bval = u.value_raw(s[eta_slot].data(), k);
          out[off + k + 5] = bval;
          out[off + k + 6] = std::pow(bval, cfg.alpha);
          out[off + k + 7] = std::log(bval + cfg.log_eps);
        }
        out[exp_slot] = std::exp(
            cfg.exp_s *
            (cfg.lip_observable.value_raw(s[0].data(), k) - lip_base));
      },
      &stats);

  SuiteOutput result;
  result.stats = stats;
  auto grid_init = [&](std::vector<std::vector<VerificationReport>>& g) {
    g.assign(cfg.times.size(), std::vector<VerificationReport>(n_obs));
  };
  grid_init(result.commutation);
  grid_init(result.variance);
  grid_init(result.harnack_fwd);
  grid_init(result.harnack_rev);
  grid_init(result.log_harnack_fwd);
  grid_init(result.log_harnack_rev);
  grid_init(result.lipschitz);
  result.exp_moments.resize(cfg.times.size());

  for (std::size_t ti = 0; ti < cfg.times.size(); ++ti) {
    const double t = cfg.times[ti];
    MomentAccumulator m = merge_chunks(acc, ti);
    for (std::size_t o = 0; o < n_obs; ++o) {
      const CylinderFunction& u = cfg.observables[o];
      const std::size_t off = o * block;
      const std::size_t d0 = off, gG = off + k, a = off + k + 1,
                        a2 = off + k + 2, aal = off + k + 3,
                        alog = off + k + 4, b = off + k + 5,
                        bal = off + k + 6, blog = off + k + 7;
      auto stamp = [&](VerificationReport& rep) {
        detail::stamp_common(rep, pot, u.name(), k, t, cfg.K, cfg.n_paths);
      };
      result.commutation[ti][o] =
          detail::assemble_commutation(m, d0, k, gG, cfg.K, t);
      result.commutation[ti][o].details["fd_eps"] = cfg.fd_eps;
      stamp(result.commutation[ti][o]);
      result.variance[ti][o] =
          detail::assemble_variance(m, d0, k, gG, a, a2, cfg.K, t);
      stamp(result.variance[ti][o]);
      result.harnack_fwd[ti][o] = detail::assemble_power_harnack(
          m, a, bal, cfg.alpha, dbar, cfg.K, t);
      stamp(result.harnack_fwd[ti][o]);
      result.harnack_rev[ti][o] = detail::assemble_power_harnack(
          m, b, aal, cfg.alpha, dbar, cfg.K, t);
      stamp(result.harnack_rev[ti][o]);
      result.log_harnack_fwd[ti][o] = detail::assemble_log_harnack(
          m, alog, b, cfg.log_eps, dbar, cfg.K, t);
      stamp(result.log_harnack_fwd[ti][o]);
      result.log_harnack_rev[ti][o] = detail::assemble_log_harnack(
          m, blog, a, cfg.log_eps, dbar, cfg.K, t);
      stamp(result.log_harnack_rev[ti][o]);
      result.lipschitz[ti][o] = detail::assemble_lipschitz(
          m, a, b, u.lipschitz_bound(k), dbar, cfg.K, t);
      stamp(result.lipschitz[ti][o]);
    }
    ExpMomentReport& er = result.exp_moments[ti];
    er.potential = pot.name();
    er.observable = cfg.lip_observable.name();
    er.k = k;
    er.t = t;
    er.s = cfg.exp_s;
    er.n_paths = cfg.n_paths;
    er.threshold_strict = exp_moment_threshold_strict(t);
    er.threshold_limit = exp_moment_threshold_limit(0.0, t);
    er.within_strict = cfg.exp_s < er.threshold_strict;
    detail::finish_exp_moment(er, acc, ti, exp_slot);
  }
  return result;
}

}  // namespace loggas