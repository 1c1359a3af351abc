// Smooth scalar building blocks: the exp(-1/t) smooth step, the blending
// function theta, the odd profile gamma and the three-piece planar
// partition of unity.
//
// All profiles are immutable values; evaluation is pure.

#ifndef COOPEMBED_SMOOTH_KIT_HPP
#define COOPEMBED_SMOOTH_KIT_HPP

#include "coopembed/core.hpp"

#include <array>
#include <cmath>
#include <string>

namespace coopembed {

namespace detail {

// h(t) = exp(-1/t) for t > 0, else 0.
inline double flat_exp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// Unit smooth step on [0,1] written in terms of t and 1-t separately so
// that the midpoint evaluates to exactly 1/2.
inline double unit_step(double t, double one_minus_t) {
  if (t <= 0.0) return 0.0;
  if (one_minus_t <= 0.0) return 1.0;
  const double p = flat_exp(t);
  const double q = flat_exp(one_minus_t);
  return p / (p + q);
}

inline double unit_step_slope(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double s = 1.0 - t;
  const double p = flat_exp(t);
  const double q = flat_exp(s);
  const double denom = p + q;
  return (p / (t * t) * q + p * q / (s * s)) / (denom * denom);
}

// Antiderivative of the unit step, I(s) = int_0^s unit_step, tabulated
// once and evaluated by quintic Hermite interpolation using the exact
// first and second derivatives.
class UnitStepIntegral {
 public:
  static const UnitStepIntegral& instance() {
    static const UnitStepIntegral table;
    return table;
  }

  double operator()(double s) const {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return values_[kCells] + (s - 1.0);
    const double scaled = s * kCells;
    std::size_t k = static_cast<std::size_t>(scaled);
    if (k >= kCells) k = kCells - 1;
    const double h = 1.0 / kCells;
    const double t = scaled - static_cast<double>(k);
    const double x0 = static_cast<double>(k) * h;
    const double x1 = static_cast<double>(k + 1) * h;
    const double p0 = values_[k], p1 = values_[k + 1];
    const double d0 = unit_step(x0, 1.0 - x0) * h, d1 = unit_step(x1, 1.0 - x1) * h;
    const double dd0 = second(x0) * h * h, dd1 = second(x1) * h * h;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    const double h3 = 0.5 * (t3 - 2 * t4 + t5);
    const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h5 = 10 * t3 - 15 * t4 + 6 * t5;
    return h0 * p0 + h1 * d0 + h2 * dd0 + h3 * dd1 + h4 * d1 + h5 * p1;
  }

  /// Integral over the whole unit interval (1/2 up to quadrature error).
  double total() const { return values_[kCells]; }

 private:
  static constexpr std::size_t kCells = 2048;

  static double second(double x) { return unit_step_slope(x); }

  UnitStepIntegral() {
    // 8-point Gauss-Legendre per cell.
    static constexpr std::array<double, 8> nodes = {
        -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
        0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static constexpr std::array<double, 8> weights = {
        0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
        0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    values_[0] = 0.0;
    const double h = 1.0 / kCells;
    for (std::size_t k = 0; k < kCells; ++k) {
      const double mid = (static_cast<double>(k) + 0.5) * h;
      double acc = 0.0;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double x = mid + 0.5 * h * nodes[q];
        acc += weights[q] * unit_step(x, 1.0 - x);
      }
      values_[k + 1] = values_[k] + 0.5 * h * acc;
    }
  }

  std::array<double, kCells + 1> values_{};
};

}  // namespace detail

/// C-infinity step: 0 for x <= a, 1 for x >= b, strictly increasing in
/// between.
struct SmoothStep {
  double a = 0.0;
  double b = 1.0;

  SmoothStep() = default;
  SmoothStep(double left, double right) : a(left), b(right) {
    if (!(std::isfinite(a) && std::isfinite(b) && a < b))
      throw ConfigError("SmoothStep requires finite a < b");
  }

  double operator()(double x) const {
    require_finite(x, "smooth_step");
    const double w = b - a;
    return detail::unit_step((x - a) / w, (b - x) / w);
  }

  /// 1 - step(x), evaluated without cancellation so the flat tail near b
  /// keeps its (tiny, positive) value.
  double complement(double x) const {
    require_finite(x, "smooth_step");
    const double w = b - a;
    return detail::unit_step((b - x) / w, (x - a) / w);
  }

  double slope(double x) const {
    require_finite(x, "smooth_step");
    const double w = b - a;
    return detail::unit_step_slope((x - a) / w) / w;
  }

  /// int_a^x step(t) dt.
  double integral_from_left(double x) const {
    const double w = b - a;
    return w * detail::UnitStepIntegral::instance()((x - a) / w);
  }
};

inline double smooth_step(double x, const SmoothStep& spec) { return spec(x); }

/// Plateau bump: 1 on [inner_lo, inner_hi], 0 outside (outer_lo, outer_hi).
struct PlateauBump {
  SmoothStep rise;
  SmoothStep fall;

  PlateauBump() = default;
  PlateauBump(double outer_lo, double inner_lo, double inner_hi, double outer_hi)
      : rise(outer_lo, inner_lo), fall(inner_hi, outer_hi) {
    if (!(inner_lo <= inner_hi)) throw ConfigError("PlateauBump requires inner_lo <= inner_hi");
  }

  double operator()(double x) const { return rise(x) * fall.complement(x); }
};

// ---------------------------------------------------------------------------
// theta

/// Blending function on R^n: 0 exactly on {u in H, |u| <= 1/2}, 1 exactly
/// where |u| >= 1 or |S(u)| >= 1/2, strictly between elsewhere.
struct ThetaSpec {
  int n = 3;
  double inner_radius = 0.5;
  double outer_radius = 1.0;
  double s_halfwidth = 0.5;

  ThetaSpec() = default;
  explicit ThetaSpec(int dim) : n(dim) {
    if (n < 2) throw ConfigError("ThetaSpec requires n >= 2");
  }

  // psi_r(t) = 1 - step(t; 1/2, 1), psi_s(s) = 1 - step(s; 0, 1/2)
  SmoothStep radial() const { return {inner_radius, outer_radius}; }
  SmoothStep sum_step() const { return {0.0, s_halfwidth}; }

  template <class Derived>
  double operator()(const Eigen::MatrixBase<Derived>& u) const {
    if (!u.allFinite()) throw DomainError("theta: non-finite input");
    const double r = u.norm();
    const double s = std::abs(u.sum());
    if (r >= outer_radius || s >= s_halfwidth) return 1.0;
    const double psi_r = radial().complement(r);
    const double psi_s = sum_step().complement(s);
    return 1.0 - psi_r * psi_s;
  }

  /// Analytic gradient of theta.
  template <class Derived>
  Eigen::Matrix<double, Derived::RowsAtCompileTime, 1> gradient(const Eigen::MatrixBase<Derived>& u) const {
    using V = Eigen::Matrix<double, Derived::RowsAtCompileTime, 1>;
    V grad = V::Zero(u.size());
    const double r = u.norm();
    const double sum = u.sum();
    const double s = std::abs(sum);
    if (r >= outer_radius || s >= s_halfwidth) return grad;
    const double psi_r = radial().complement(r);
    const double psi_s = sum_step().complement(s);
    const double dpsi_r = -radial().slope(r);
    const double dpsi_s = -sum_step().slope(s);
    if (r > 0.0 && dpsi_r != 0.0) grad -= (dpsi_r * psi_s / r) * u;
    if (dpsi_s != 0.0) grad.array() -= psi_r * dpsi_s * (sum > 0 ? 1.0 : -1.0);
    return grad;
  }
};

template <class Derived>
double theta(const Eigen::MatrixBase<Derived>& u, const ThetaSpec& spec) {
  return spec(u);
}

// ---------------------------------------------------------------------------
// gamma

/// Odd profile gamma(x) = J*m(x) - l(x) for x >= 0, where m is a ramp that
/// equals x on [0,1] and saturates by x = 2, and l has slope
/// slope_cap * step(x; 2, 3). Its zeros are exactly {0, +-nP}.
class GammaProfile {
 public:
  GammaProfile() = default;

  GammaProfile(int n, double J) : n_(n), J_(J), slope_cap_(1.0 / (4.0 * n)) {
    if (n < 1) throw ConfigError("GammaProfile requires n >= 1");
    if (!(J > 0.0) || !std::isfinite(J)) throw ConfigError("GammaProfile requires finite J > 0");
    nP_ = find_positive_zero();
  }

  int n() const { return n_; }
  double J() const { return J_; }
  double slope_cap() const { return slope_cap_; }
  double nP() const { return nP_; }
  double P() const { return nP_ / n_; }
  bool tail_flipped() const { return tail_sign_ < 0; }

  /// Saturation level m(infinity) = 2 - int_1^2 step.
  double ramp_limit() const { return 2.0 - ramp_step().integral_from_left(2.0); }

  double operator()(double x) const {
    require_finite(x, "gamma");
    const double ax = std::abs(x);
    const double v = J_ * ramp(ax) - tail_sign_ * tail(ax);
    return x < 0 ? -v : v;
  }

  double slope(double x) const {
    require_finite(x, "gamma");
    const double ax = std::abs(x);
    return J_ * (1.0 - ramp_step()(ax)) - tail_sign_ * slope_cap_ * tail_step()(ax);
  }

  /// Same profile with the slow decay turned into slow growth, so the
  /// nonzero roots disappear. nP is kept from the original construction.
  /// Used only for defect injection.
  GammaProfile with_flipped_tail() const {
    GammaProfile g = *this;
    g.tail_sign_ = -tail_sign_;
    return g;
  }

 private:
  static SmoothStep ramp_step() { return {1.0, 2.0}; }
  static SmoothStep tail_step() { return {2.0, 3.0}; }

  double ramp(double x) const {
    if (x <= 1.0) return x;
    return x - ramp_step().integral_from_left(x);
  }

  double tail(double x) const {
    if (x <= 2.0) return 0.0;
    return slope_cap_ * tail_step().integral_from_left(x);
  }

  double find_positive_zero() const {
    double lo = 2.0;
    double hi = 2.0 + 8.0 * n_ * J_ * ramp_limit();
    const auto value = [&](double x) { return J_ * ramp(x) - tail(x); };
    if (!(value(lo) > 0.0 && value(hi) < 0.0))
      throw ConstructionError("gamma: positive root is not bracketed by [2, 2 + 8 n J m_inf]");
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (value(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  int n_ = 3;
  double J_ = 1.0;
  double slope_cap_ = 1.0 / 12.0;
  double nP_ = 0.0;
  double tail_sign_ = 1.0;
};

inline double gamma(double x, const GammaProfile& spec) { return spec(x); }

// ---------------------------------------------------------------------------
// planar partition of unity

struct PolarPoint {
  double r = 0.0;
  double angle = 0.0;
};

inline PolarPoint to_polar(const Vec2& u) { return {std::hypot(u[0], u[1]), std::atan2(u[1], u[0])}; }

/// Annular sector A = [lambda1, lambda2] x [-1, 1] in (radius, polar angle)
/// with two nested collars A' and A''.
struct PartitionSpec {
  double lambda1 = 1.0;
  double lambda2 = 2.0;
  double delta_r = 0.2;
  double delta_theta = 0.1;

  PartitionSpec() = default;
  PartitionSpec(double l1, double l2, double dr, double dth)
      : lambda1(l1), lambda2(l2), delta_r(dr), delta_theta(dth) {
    validate();
  }

  void validate() const {
    if (!(lambda1 > 0.0 && lambda1 < lambda2)) throw ConfigError("partition: need 0 < lambda1 < lambda2");
    if (!(delta_r > 0.0 && delta_theta > 0.0)) throw ConfigError("partition: collar widths must be positive");
    if (!(lambda1 - 2.0 * delta_r > 0.0)) throw ConfigError("partition: need lambda1 - 2 delta_r > 0");
    if (!(1.0 + 2.0 * delta_theta < kHalfPi)) throw ConfigError("partition: need 1 + 2 delta_theta < pi/2");
  }

  /// Largest radius in A''.
  double outer_radius() const { return lambda2 + 2.0 * delta_r; }

  bool in_A(const PolarPoint& p) const {
    return p.r >= lambda1 && p.r <= lambda2 && std::abs(p.angle) <= 1.0;
  }
  bool in_A1(const PolarPoint& p) const {
    return p.r >= lambda1 - delta_r && p.r <= lambda2 + delta_r && std::abs(p.angle) <= 1.0 + delta_theta;
  }
  bool in_A2(const PolarPoint& p) const {
    return p.r >= lambda1 - 2 * delta_r && p.r <= lambda2 + 2 * delta_r &&
           std::abs(p.angle) <= 1.0 + 2 * delta_theta;
  }

  PlateauBump inner_radial() const { return {lambda1 - delta_r, lambda1, lambda2, lambda2 + delta_r}; }
  PlateauBump inner_angular() const { return {-1.0 - delta_theta, -1.0, 1.0, 1.0 + delta_theta}; }
  PlateauBump outer_radial() const {
    return {lambda1 - 2 * delta_r, lambda1 - delta_r, lambda2 + delta_r, lambda2 + 2 * delta_r};
  }
  PlateauBump outer_angular() const {
    return {-1.0 - 2 * delta_theta, -1.0 - delta_theta, 1.0 + delta_theta, 1.0 + 2 * delta_theta};
  }
};

struct PartitionWeights {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho3 = 1.0;
};

inline PartitionWeights rho_partition(const Vec2& u, const PartitionSpec& spec) {
  if (!u.allFinite()) throw DomainError("rho_partition: non-finite input");
  const PolarPoint p = to_polar(u);
  if (!spec.in_A2(p)) return {0.0, 0.0, 1.0};
  PartitionWeights w;
  w.rho1 = spec.inner_radial()(p.r) * spec.inner_angular()(p.angle);
  w.rho3 = 1.0 - spec.outer_radial()(p.r) * spec.outer_angular()(p.angle);
  w.rho2 = 1.0 - w.rho1 - w.rho3;
  return w;
}

}  // namespace coopembed

#endif  // COOPEMBED_SMOOTH_KIT_HPP
