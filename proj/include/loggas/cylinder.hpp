#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "loggas/config_space.hpp"

namespace loggas {

// Observables are cylinder functions u(γ) = F(z_1, ..., z_m) with
// z_j = Σ_{x in γ} φ_j(x): a smooth outer function of finitely many linear
// statistics. At most kMaxObservableSlots statistics per observable.
inline constexpr std::size_t kMaxObservableSlots = 4;

// Window-adapted profile φ. All closed forms below are C¹ on the line; the
// three compactly supported kinds also vanish together with their derivative
// at the support edge. LinearWindow is plain a·(x − c) on its window, used
// for mean-type statistics whose window covers the whole box.
struct Profile {
  enum class Kind { Bump, SineWindow, PolyWindow, LinearWindow };

  Kind kind = Kind::SineWindow;
  double center = 0;
  double width = 1;
  double amplitude = 1;

  double value(double x) const {
    // Linear profiles carry no support cutoff: the window edge is a valid
    // evaluation point and the statistic must stay exact there.
    if (kind == Kind::LinearWindow) return amplitude * (x - center);
    double z = (x - center) / width;
    if (std::abs(z) >= 1) return 0.0;
    switch (kind) {
      case Kind::Bump:
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - z * z));
      case Kind::SineWindow: {
        double c = std::cos(0.5 * M_PI * z);
        return amplitude * c * c;
      }
      case Kind::PolyWindow: {
        double q = 1.0 - z * z;
        return amplitude * q * q * q;
      }
      case Kind::LinearWindow:
        return amplitude * (x - center);
    }
    return 0;
  }

  double deriv(double x) const {
    if (kind == Kind::LinearWindow) return amplitude;
    double z = (x - center) / width;
    if (std::abs(z) >= 1) return 0.0;
    switch (kind) {
      case Kind::Bump: {
        double q = 1.0 - z * z;
        return amplitude * std::exp(1.0 - 1.0 / q) * (-2.0 * z / (q * q)) / width;
      }
      case Kind::SineWindow:
        return -amplitude * (0.5 * M_PI) * std::sin(M_PI * z) / width;
      case Kind::PolyWindow: {
        double q = 1.0 - z * z;
        return -amplitude * 6.0 * z * q * q / width;
      }
      case Kind::LinearWindow:
        return amplitude;
    }
    return 0;
  }

  double sup_abs() const {
    return kind == Kind::LinearWindow ? std::abs(amplitude) * width
                                      : std::abs(amplitude);
  }

  // Valid analytic bounds on |φ'|:
  //   Bump:       max of 2|z|e^{1−1/(1−z²)}/(1−z²)² is ≈ 2.171 at z² = 3^{-1/2}
  //   SineWindow: (π/2)|sin(πz)| ≤ π/2
  //   PolyWindow: 6|z|(1−z²)² peaks at z = 5^{-1/2} with value 96/(25√5) ≈ 1.718
  double sup_deriv() const {
    double a = std::abs(amplitude);
    switch (kind) {
      case Kind::Bump:
        return a * 2.2 / width;
      case Kind::SineWindow:
        return a * (0.5 * M_PI) / width;
      case Kind::PolyWindow:
        return a * 1.72 / width;
      case Kind::LinearWindow:
        return a;
    }
    return 0;
  }
};

// Expression tree for the outer function, with forward-mode first
// derivatives in up to kMaxObservableSlots variables.
class CylExpr;
using ExprPtr = std::shared_ptr<const CylExpr>;

class CylExpr {
 public:
  enum class Op { Const, Var, Add, Mul, Exp, Tanh, PowInt };

  struct Dual {
    double v = 0;
    std::array<double, kMaxObservableSlots> d{};
  };

  static ExprPtr constant(double c) {
    auto e = std::make_shared<CylExpr>();
    e->op_ = Op::Const;
    e->c_ = c;
    return e;
  }
  static ExprPtr var(std::size_t j) {
    if (j >= kMaxObservableSlots)
      throw std::invalid_argument("observable slot index out of range");
    auto e = std::make_shared<CylExpr>();
    e->op_ = Op::Var;
    e->index_ = j;
    return e;
  }
  static ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Op::Add, a, b); }
  static ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(Op::Mul, a, b); }
  static ExprPtr exp(ExprPtr a) { return unary(Op::Exp, a); }
  static ExprPtr tanh(ExprPtr a) { return unary(Op::Tanh, a); }
  static ExprPtr powi(ExprPtr a, int n) {
    if (n < 1) throw std::invalid_argument("integer power must be >= 1");
    auto e = unary_mut(Op::PowInt, a);
    e->ipow_ = n;
    return e;
  }

  double eval(const double* z) const {
    switch (op_) {
      case Op::Const: return c_;
      case Op::Var: return z[index_];
      case Op::Add: return a_->eval(z) + b_->eval(z);
      case Op::Mul: return a_->eval(z) * b_->eval(z);
      case Op::Exp: return std::exp(a_->eval(z));
      case Op::Tanh: return std::tanh(a_->eval(z));
      case Op::PowInt: {
        double base = a_->eval(z);
        double p = 1;
        for (int i = 0; i < ipow_; ++i) p *= base;
        return p;
      }
    }
    return 0;
  }

  Dual eval_dual(const double* z, std::size_t m) const {
    Dual out;
    switch (op_) {
      case Op::Const:
        out.v = c_;
        return out;
      case Op::Var:
        out.v = z[index_];
        out.d[index_] = 1;
        return out;
      case Op::Add: {
        Dual a = a_->eval_dual(z, m), b = b_->eval_dual(z, m);
        out.v = a.v + b.v;
        for (std::size_t j = 0; j < m; ++j) out.d[j] = a.d[j] + b.d[j];
        return out;
      }
      case Op::Mul: {
        Dual a = a_->eval_dual(z, m), b = b_->eval_dual(z, m);
        out.v = a.v * b.v;
        for (std::size_t j = 0; j < m; ++j)
          out.d[j] = a.d[j] * b.v + a.v * b.d[j];
        return out;
      }
      case Op::Exp: {
        Dual a = a_->eval_dual(z, m);
        out.v = std::exp(a.v);
        for (std::size_t j = 0; j < m; ++j) out.d[j] = out.v * a.d[j];
        return out;
      }
      case Op::Tanh: {
        Dual a = a_->eval_dual(z, m);
        out.v = std::tanh(a.v);
        double sech2 = 1.0 - out.v * out.v;
        for (std::size_t j = 0; j < m; ++j) out.d[j] = sech2 * a.d[j];
        return out;
      }
      case Op::PowInt: {
        Dual a = a_->eval_dual(z, m);
        double pm1 = 1;
        for (int i = 0; i < ipow_ - 1; ++i) pm1 *= a.v;
        out.v = pm1 * a.v;
        double f = ipow_ * pm1;
        for (std::size_t j = 0; j < m; ++j) out.d[j] = f * a.d[j];
        return out;
      }
    }
    return out;
  }

 private:
  static ExprPtr binary(Op op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<CylExpr>();
    e->op_ = op;
    e->a_ = std::move(a);
    e->b_ = std::move(b);
    return e;
  }
  static std::shared_ptr<CylExpr> unary_mut(Op op, ExprPtr a) {
    auto e = std::make_shared<CylExpr>();
    e->op_ = op;
    e->a_ = std::move(a);
    return e;
  }
  static ExprPtr unary(Op op, ExprPtr a) { return unary_mut(op, a); }

  Op op_ = Op::Const;
  double c_ = 0;
  std::size_t index_ = 0;
  int ipow_ = 1;
  ExprPtr a_, b_;
};

namespace expr {
inline ExprPtr c(double v) { return CylExpr::constant(v); }
inline ExprPtr z(std::size_t j) { return CylExpr::var(j); }
inline ExprPtr operator+(ExprPtr a, ExprPtr b) { return CylExpr::add(a, b); }
inline ExprPtr operator*(ExprPtr a, ExprPtr b) { return CylExpr::mul(a, b); }
inline ExprPtr tanh(ExprPtr a) { return CylExpr::tanh(a); }
inline ExprPtr powi(ExprPtr a, int n) { return CylExpr::powi(a, n); }
}  // namespace expr

// Cylinder observable together with declared envelope data. partial_bounds[j]
// must dominate |∂F/∂z_j| over the box of reachable statistics (|z_j| up to
// count·sup|φ_j|); range_lo/range_hi must bracket the observable's values on
// the window. The factories below set these from closed forms; they are
// checked against dense numeric scans in the test suite.
class CylinderFunction {
 public:
  CylinderFunction() = default;
  CylinderFunction(std::string name, ExprPtr f, std::vector<Profile> profiles,
                   std::vector<double> partial_bounds, double range_lo,
                   double range_hi)
      : name_(std::move(name)),
        f_(std::move(f)),
        profiles_(std::move(profiles)),
        partial_bounds_(std::move(partial_bounds)),
        range_lo_(range_lo),
        range_hi_(range_hi) {
    if (profiles_.empty() || profiles_.size() > kMaxObservableSlots)
      throw std::invalid_argument("observable needs 1..4 profiles");
    if (partial_bounds_.size() != profiles_.size())
      throw std::invalid_argument("one partial bound per profile required");
  }

  const std::string& name() const { return name_; }
  std::size_t slots() const { return profiles_.size(); }
  double range_lo() const { return range_lo_; }
  double range_hi() const { return range_hi_; }
  double sup_abs() const {
    return std::max(std::abs(range_lo_), std::abs(range_hi_));
  }

  double value_raw(const double* x, std::size_t k) const {
    double z[kMaxObservableSlots];
    stats(x, k, z);
    return f_->eval(z);
  }

  double value(const Configuration& c) const {
    return value_raw(c.points().data(), c.count());
  }

  // du/dx_i = Σ_j ∂F/∂z_j · φ_j'(x_i).
  void particle_gradient_raw(const double* x, std::size_t k,
                             double* out) const {
    double z[kMaxObservableSlots];
    stats(x, k, z);
    CylExpr::Dual d = f_->eval_dual(z, profiles_.size());
    for (std::size_t i = 0; i < k; ++i) {
      double g = 0;
      for (std::size_t j = 0; j < profiles_.size(); ++j)
        g += d.d[j] * profiles_[j].deriv(x[i]);
      out[i] = g;
    }
  }

  std::vector<double> particle_gradient(const Configuration& c) const {
    std::vector<double> g(c.count());
    particle_gradient_raw(c.points().data(), c.count(), g.data());
    return g;
  }

  double carre_du_champ_raw(const double* x, std::size_t k) const {
    double z[kMaxObservableSlots];
    stats(x, k, z);
    CylExpr::Dual d = f_->eval_dual(z, profiles_.size());
    double acc = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double g = 0;
      for (std::size_t j = 0; j < profiles_.size(); ++j)
        g += d.d[j] * profiles_[j].deriv(x[i]);
      acc += g * g;
    }
    return acc;
  }

  // Lipschitz bound with respect to the interior matching distance for
  // configurations of the given count: each particle derivative is at most
  // B = Σ_j partial_bounds[j]·sup|φ_j'|, so the particle gradient has
  // Euclidean norm at most √count·B, and the matching distance is Euclidean
  // on sorted coordinates.
  double lipschitz_bound(std::size_t count) const {
    double b = 0;
    for (std::size_t j = 0; j < profiles_.size(); ++j)
      b += partial_bounds_[j] * profiles_[j].sup_deriv();
    return std::sqrt(static_cast<double>(count)) * b;
  }

 private:
  void stats(const double* x, std::size_t k, double* z) const {
    for (std::size_t j = 0; j < profiles_.size(); ++j) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += profiles_[j].value(x[i]);
      z[j] = s;
    }
  }

  std::string name_;
  ExprPtr f_;
  std::vector<Profile> profiles_;
  std::vector<double> partial_bounds_;
  double range_lo_ = 0;
  double range_hi_ = 1;
};

// Squared particle gradient Σ_i (du/dx_i)². Defined without the customary
// 1/2 so that Γ(u) = A(u²) − 2u·Au for the generator A = (1/2)Δ − (1/2)∇Ψ·∇;
// the mean statistic with an identity profile then has Γ ≡ count.
inline double carre_du_champ(const CylinderFunction& u,
                             const Configuration& c) {
  return u.carre_du_champ_raw(c.points().data(), c.count());
}

// Built-in observables. Widths scale with the window half-width r so every
// compact profile vanishes, with its derivative, before the boundary.
//
//   smooth-occupancy   0.5 + 0.5·tanh(z), z a sine-window statistic.
//                      |∂F| ≤ 1/2, values in (0,1).
//   window-moment      z² for a bump statistic; |z| ≤ 0.6·count so
//                      |∂F| ≤ 1.2·count, values in [0, 0.36·count²].
//   product-occupancy  (1/4)(1+tanh z₁)(1+tanh z₂) for two disjoint window
//                      statistics; each |∂F| ≤ 1/2, values in (0,1).
//   scaled-mean        count^{-1/2}·Σ x_i; particle gradient is the constant
//                      vector count^{-1/2}·(1,...,1), so the Lipschitz bound
//                      is exactly 1.
inline CylinderFunction make_builtin_observable(const std::string& name,
                                                double r, std::size_t count) {
  using namespace expr;
  if (name == "smooth-occupancy") {
    Profile p{Profile::Kind::SineWindow, 0.0, r, 0.8};
    return CylinderFunction(name, c(0.5) + c(0.5) * tanh(z(0)), {p}, {0.5},
                            0.0, 1.0);
  }
  if (name == "window-moment") {
    Profile p{Profile::Kind::Bump, 0.2 * r, 0.7 * r, 0.6};
    double zmax = 0.6 * static_cast<double>(count);
    return CylinderFunction(name, powi(z(0), 2), {p}, {2.0 * zmax}, 0.0,
                            zmax * zmax);
  }
  if (name == "product-occupancy") {
    Profile p1{Profile::Kind::SineWindow, -0.45 * r, 0.5 * r, 0.7};
    Profile p2{Profile::Kind::PolyWindow, 0.45 * r, 0.5 * r, 0.7};
    ExprPtr f = c(0.25) * ((c(1.0) + tanh(z(0))) * (c(1.0) + tanh(z(1))));
    return CylinderFunction(name, f, {p1, p2}, {0.5, 0.5}, 0.0, 1.0);
  }
  if (name == "scaled-mean") {
    double a = 1.0 / std::sqrt(static_cast<double>(count == 0 ? 1 : count));
    Profile p{Profile::Kind::LinearWindow, 0.0, r, a};
    double m = a * static_cast<double>(count) * r;
    return CylinderFunction(name, z(0), {p}, {1.0}, -m, m);
  }
  throw std::invalid_argument("unknown observable: " + name);
}

inline std::vector<std::string> builtin_observable_names() {
  return {"smooth-occupancy", "window-moment", "product-occupancy",
          "scaled-mean"};
}

}  // namespace loggas
