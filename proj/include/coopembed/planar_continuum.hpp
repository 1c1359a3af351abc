// Planar field with a continuum of Neumann steady states.
//
// The arcs phi_lambda(x) = lambda (cos(sin x), sin(sin x)) on
// [-pi/2, pi/2] solve phi'' + alpha(phi) = 0 with alpha := -phi'' read
// through polar coordinates. The global field g blends alpha, a rightward
// drift and a linear attraction to e = (e1, 0):
//
//   g = rho1 alpha + rho2 (1, 0) + rho3 (e - u).

#ifndef COOPEMBED_PLANAR_CONTINUUM_HPP
#define COOPEMBED_PLANAR_CONTINUUM_HPP

#include "coopembed/core.hpp"
#include "coopembed/field.hpp"
#include "coopembed/smooth_kit.hpp"

#include <cmath>

namespace coopembed {

inline void check_arc_parameter(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("arc radius must be positive");
}

inline Vec2 phi(double lambda, double x) {
  check_arc_parameter(lambda);
  if (!(x >= -kHalfPi && x <= kHalfPi)) throw DomainError("phi: x outside [-pi/2, pi/2]");
  const double s = std::sin(x);
  return {lambda * std::cos(s), lambda * std::sin(s)};
}

/// First derivative in x (vanishes at x = +-pi/2 through the cos x factor).
inline Vec2 phi_d(double lambda, double x) {
  check_arc_parameter(lambda);
  const double s = std::sin(x);
  const double c = std::cos(x);
  return {-lambda * c * std::sin(s), lambda * c * std::cos(s)};
}

inline Vec2 phi_dd(double lambda, double x) {
  check_arc_parameter(lambda);
  const double s = std::sin(x);
  const double c2 = std::cos(x) * std::cos(x);
  return {lambda * s * std::sin(s) - lambda * c2 * std::cos(s),
          -lambda * s * std::cos(s) - lambda * c2 * std::sin(s)};
}

struct ArcCoordinates {
  double lambda = 0.0;
  double x = 0.0;
};

/// Inverse of (lambda, x) -> phi_lambda(x). Defined where the polar angle
/// lies in [-1, 1], the range of sin.
inline ArcCoordinates polar_inverse(const Vec2& u) {
  const PolarPoint p = to_polar(u);
  if (!(p.r > 0.0)) throw DomainError("polar_inverse: u = 0");
  if (std::abs(p.angle) >= kHalfPi) throw DomainError("polar_inverse: polar angle outside (-pi/2, pi/2)");
  if (std::abs(p.angle) > 1.0) throw DomainError("polar_inverse: polar angle outside [-1, 1], arcsin undefined");
  return {p.r, std::asin(p.angle)};
}

/// alpha(u) = -phi''_{lambda(u)}(x(u)), written with sin x = angle and
/// cos^2 x = 1 - angle^2. In that form it is an entire function of the
/// polar coordinates, which is the extension used on all of A''.
inline Vec2 alpha_polar(double r, double angle) {
  const double c2 = 1.0 - angle * angle;
  const double sa = std::sin(angle);
  const double ca = std::cos(angle);
  return {-(r * angle * sa - r * c2 * ca), r * angle * ca + r * c2 * sa};
}

inline Vec2 alpha(const Vec2& u, const PartitionSpec& spec) {
  const PolarPoint p = to_polar(u);
  if (!spec.in_A2(p)) throw DomainError("alpha: point outside A''");
  return alpha_polar(p.r, p.angle);
}

/// The blended planar field g and its configuration.
class PlanarField {
 public:
  PlanarField() = default;

  PlanarField(PartitionSpec partition, double e1) : partition_(partition), e1_(e1) {
    partition_.validate();
    if (!(e1_ > partition_.outer_radius()))
      throw ConfigError("planar: need e1 > lambda2 + 2 delta_r");
  }

  const PartitionSpec& partition() const { return partition_; }
  double e1() const { return e1_; }
  Vec2 rest_point() const { return {e1_, 0.0}; }

  /// Radius of a disc around the origin outside of which g = e - u.
  double region_radius() const { return e1_ + partition_.outer_radius(); }

  Vec2 operator()(const Vec2& u) const {
    if (!u.allFinite()) throw DomainError("g_planar: non-finite input");
    const PolarPoint p = to_polar(u);
    const Vec2 toward_rest = rest_point() - u;
    if (!partition_.in_A2(p)) return toward_rest;
    const PartitionSpec& s = partition_;
    const double rho1 = s.inner_radial()(p.r) * s.inner_angular()(p.angle);
    const double rho3 = 1.0 - s.outer_radial()(p.r) * s.outer_angular()(p.angle);
    const double rho2 = 1.0 - rho1 - rho3;
    Vec2 out = rho2 * Vec2(1.0, 0.0) + rho3 * toward_rest;
    if (rho1 > 0.0) out += rho1 * alpha_polar(p.r, p.angle);
    return out;
  }

  VectorField<2> handle() const {
    return VectorField<2>(2, [self = *this](const Vec2& u) { return self(u); }, "planar");
  }

 private:
  PartitionSpec partition_{};
  double e1_ = 3.4;
};

inline Vec2 g_planar(const Vec2& u, const PlanarField& field) { return field(u); }

struct DissipationResult {
  double min_value = 0.0;  // min of u . g(u) over the sampled circle
  Vec2 argmin = Vec2::Zero();
  double max_value = 0.0;  // negative iff g points inward everywhere sampled
  Vec2 argmax = Vec2::Zero();
  int samples = 0;
};

/// Samples u . g(u) on the circle |u| = radius. Outside the region where
/// g = e - u this is u1 e1 - |u|^2 < 0.
inline DissipationResult outward_dissipation_check(const PlanarField& field, double radius,
                                                   int samples = 3600) {
  if (!(radius > field.e1())) throw ConfigError("outward_dissipation_check: radius must exceed e1");
  DissipationResult out;
  out.min_value = std::numeric_limits<double>::infinity();
  out.max_value = -std::numeric_limits<double>::infinity();
  out.samples = samples;
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * kPi * k / samples;
    const Vec2 u(radius * std::cos(t), radius * std::sin(t));
    const double v = u.dot(field(u));
    if (v < out.min_value) {
      out.min_value = v;
      out.argmin = u;
    }
    if (v > out.max_value) {
      out.max_value = v;
      out.argmax = u;
    }
  }
  return out;
}

}  // namespace coopembed

#endif  // COOPEMBED_PLANAR_CONTINUUM_HPP
