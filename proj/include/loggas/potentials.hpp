#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "loggas/config_space.hpp"
#include "loggas/rng.hpp"

namespace loggas {

enum class PotentialKind { DysonLog, Riesz };

// Interaction energy of an interior configuration conditioned on fixed
// exterior points, relative to the empty interior. Two families:
//
//   DysonLog: pair term −β·log|x_i − x_j|, exterior term −β·log|1 − x_i/y|.
//   The exterior normalization by y makes each far-field summand decay like
//   x_i/y, so the energy stays finite as the cutoff R grows.
//
//   Riesz:    pair term β·|x_i − x_j|^{−s} with s in (0,1), exterior term
//   β·(|x_i − y|^{−s} − |y|^{−s}); the subtracted constant again anchors the
//   empty configuration at zero energy.
//
// Exterior points with |y| > R do not interact at all; the active set is
// cached at construction, so adding far points leaves every value bitwise
// unchanged. Coincident interior points have energy +inf. Points outside the
// closed window [−r, r] are a domain error.
class ConditionalPotential {
 public:
  ConditionalPotential(PotentialKind kind, double beta, double s, double r,
                       double R, ExteriorConfiguration exterior)
      : kind_(kind), beta_(beta), s_(s), r_(r), R_(R) {
    if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
    if (!(r > 0)) throw std::invalid_argument("window half-width must be positive");
    if (!(R >= r)) throw std::invalid_argument("cutoff must be >= window");
    if (kind == PotentialKind::Riesz && !(s > 0 && s < 1))
      throw std::invalid_argument("Riesz exponent must lie in (0,1)");
    if (exterior.r != r)
      exterior = ExteriorConfiguration::make(r, std::move(exterior.points));
    for (double y : exterior.points)
      if (std::abs(y) <= R) active_.push_back(y);
    sqrt_half_ = (kind == PotentialKind::Riesz && s == 0.5);
  }

  static ConditionalPotential dyson_log(double beta, double r, double R,
                                        ExteriorConfiguration ext) {
    return ConditionalPotential(PotentialKind::DysonLog, beta, 0.0, r, R,
                                std::move(ext));
  }

  static ConditionalPotential riesz(double beta, double s, double r, double R,
                                    ExteriorConfiguration ext) {
    return ConditionalPotential(PotentialKind::Riesz, beta, s, r, R,
                                std::move(ext));
  }

  PotentialKind kind() const { return kind_; }
  double beta() const { return beta_; }
  double riesz_exponent() const { return s_; }
  double window() const { return r_; }
  double cutoff() const { return R_; }
  const std::vector<double>& active_exterior() const { return active_; }

  std::string name() const {
    char buf[96];
    if (kind_ == PotentialKind::DysonLog)
      std::snprintf(buf, sizeof(buf), "dyson_log(beta=%g)", beta_);
    else
      std::snprintf(buf, sizeof(buf), "riesz(beta=%g,s=%g)", beta_, s_);
    return buf;
  }

  double energy(const Configuration& c) const {
    require_in_window(c);
    const auto& x = c.points();
    double acc = 0;
    if (kind_ == PotentialKind::DysonLog) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
          double d = x[j] - x[i];
          if (d == 0) return kInf;
          acc += std::log(d);
        }
        for (double y : active_) {
          // log|1 - x/y| via log1p for the far field where x/y is small.
          double t = x[i] / y;
          acc += std::abs(t) < 0.5 ? std::log1p(-t) : std::log(std::abs(1.0 - t));
        }
      }
      return -beta_ * acc;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) {
        double d = x[j] - x[i];
        if (d == 0) return kInf;
        acc += inv_pow_s(d);
      }
      for (double y : active_)
        acc += inv_pow_s(std::abs(x[i] - y)) - inv_pow_s(std::abs(y));
    }
    return beta_ * acc;
  }

  // Gradient for strictly sorted interior input; raw-pointer form used by the
  // integrators. Collisions are the caller's error here.
  void gradient_raw(const double* x, std::size_t k, double* out) const {
    if (kind_ == PotentialKind::DysonLog) {
      for (std::size_t i = 0; i < k; ++i) out[i] = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          double inv = 1.0 / (x[i] - x[j]);
          out[i] += inv;
          out[j] -= inv;
        }
        for (double y : active_) out[i] += 1.0 / (x[i] - y);
      }
      for (std::size_t i = 0; i < k; ++i) out[i] *= -beta_;
      return;
    }
    for (std::size_t i = 0; i < k; ++i) out[i] = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        // d/dx |x|^{-s} = -s·sign(x)·|x|^{-s-1}; here x[i] < x[j].
        double gp = s_ * inv_pow_s1(x[j] - x[i]);
        out[i] += gp;
        out[j] -= gp;
      }
      for (double y : active_) {
        double d = x[i] - y;
        double gp = -s_ * sign(d) * inv_pow_s1(std::abs(d));
        out[i] += gp;
      }
    }
    for (std::size_t i = 0; i < k; ++i) out[i] *= beta_;
  }

  std::vector<double> gradient(const Configuration& c) const {
    require_in_window(c);
    if (!c.strictly_sorted())
      throw std::domain_error("gradient undefined at coincident points");
    std::vector<double> g(c.count());
    gradient_raw(c.points().data(), c.count(), g.data());
    return g;
  }

  // Second derivative of the energy along direction v, as a quadratic form.
  // Both families give a sum of nonnegative terms, which is the convexity
  // statement made testable.
  double hessian_quadratic_form(const Configuration& c,
                                const std::vector<double>& v) const {
    require_in_window(c);
    if (v.size() != c.count())
      throw std::invalid_argument("direction dimension mismatch");
    if (!c.strictly_sorted())
      throw std::domain_error("hessian undefined at coincident points");
    const auto& x = c.points();
    double acc = 0;
    if (kind_ == PotentialKind::DysonLog) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
          double dv = v[i] - v[j];
          double d = x[i] - x[j];
          acc += dv * dv / (d * d);
        }
        for (double y : active_) {
          double d = y - x[i];
          acc += v[i] * v[i] / (d * d);
        }
      }
      return beta_ * acc;
    }
    const double f = s_ * (s_ + 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) {
        double dv = v[i] - v[j];
        acc += dv * dv * inv_pow_s2(x[j] - x[i]);
      }
      for (double y : active_)
        acc += v[i] * v[i] * inv_pow_s2(std::abs(x[i] - y));
    }
    return beta_ * f * acc;
  }

 private:
  static double sign(double u) { return u < 0 ? -1.0 : 1.0; }

  void require_in_window(const Configuration& c) const {
    if (!c.inside_window(r_))
      throw std::domain_error("configuration point outside window");
  }

  // a^{-s}, a^{-s-1}, a^{-s-2} for a > 0. The s = 1/2 case runs on sqrt and
  // division only; it is the exponent the diffusion benchmarks use and pow
  // would dominate their runtime.
  double inv_pow_s(double a) const {
    if (sqrt_half_) return 1.0 / std::sqrt(a);
    return std::pow(a, -s_);
  }
  double inv_pow_s1(double a) const {
    if (sqrt_half_) return 1.0 / (a * std::sqrt(a));
    return std::pow(a, -s_ - 1.0);
  }
  double inv_pow_s2(double a) const {
    if (sqrt_half_) return 1.0 / (a * a * std::sqrt(a));
    return std::pow(a, -s_ - 2.0);
  }

  PotentialKind kind_;
  double beta_;
  double s_;
  double r_;
  double R_;
  bool sqrt_half_ = false;
  std::vector<double> active_;
};

struct ConvexityReport {
  std::string potential;
  std::size_t k = 0;
  std::size_t n_configs = 0;
  std::size_t n_directions = 0;
  std::uint64_t seed = 0;
  double min_quadratic_form = kInf;
  double min_midpoint_slack_rel = kInf;
  double hessian_tolerance = -1e-10;
  double midpoint_tolerance = -1e-9;

  bool hessian_pass() const { return min_quadratic_form >= hessian_tolerance; }
  bool midpoint_pass() const {
    return min_midpoint_slack_rel >= midpoint_tolerance;
  }
  bool pass() const { return hessian_pass() && midpoint_pass(); }
};

// Randomized convexity certificate: samples configurations and directions,
// records the worst Hessian quadratic form, and cross-checks with midpoint
// energy inequalities on sampled pairs. Sampling floors the minimum gap at
// 1e-7·r; nearer collisions the energies blow up and the midpoint slack is
// rounding noise, while convexity there is carried by the +inf collision
// value anyway.
inline ConvexityReport certify_convexity(const ConditionalPotential& pot,
                                         std::size_t k, std::size_t n_configs,
                                         std::size_t n_directions,
                                         std::uint64_t seed) {
  ConvexityReport rep;
  rep.potential = pot.name();
  rep.k = k;
  rep.n_configs = n_configs;
  rep.n_directions = n_directions;
  rep.seed = seed;
  const double r = pot.window();
  const double gap_floor = 1e-7 * r;
  StreamRng rng(seed, 0x636f6e76);

  auto draw_config = [&]() {
    for (;;) {
      std::vector<double> pts(k);
      for (auto& x : pts) x = rng.uniform(-r, r);
      Configuration c(std::move(pts));
      if (k < 2 || c.min_gap() >= gap_floor) return c;
    }
  };

  for (std::size_t t = 0; t < n_configs; ++t) {
    Configuration c = draw_config();
    for (std::size_t d = 0; d < n_directions; ++d) {
      std::vector<double> v(k);
      double norm2 = 0;
      for (auto& vi : v) {
        vi = rng.normal();
        norm2 += vi * vi;
      }
      if (norm2 == 0) continue;
      double inv = 1.0 / std::sqrt(norm2);
      for (auto& vi : v) vi *= inv;
      double q = pot.hessian_quadratic_form(c, v);
      rep.min_quadratic_form = std::min(rep.min_quadratic_form, q);
    }
  }

  for (std::size_t t = 0; t < n_configs; ++t) {
    Configuration a = draw_config();
    Configuration b = draw_config();
    std::vector<double> mid(k);
    for (std::size_t i = 0; i < k; ++i) mid[i] = 0.5 * (a[i] + b[i]);
    double ea = pot.energy(a);
    double eb = pot.energy(b);
    double em = pot.energy(Configuration::from_sorted(std::move(mid)));
    double scale = std::max({1.0, std::abs(ea), std::abs(eb)});
    double slack = (0.5 * (ea + eb) - em) / scale;
    rep.min_midpoint_slack_rel = std::min(rep.min_midpoint_slack_rel, slack);
  }
  return rep;
}

}  // namespace loggas
