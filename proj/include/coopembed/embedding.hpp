// Strongly cooperative embedding of a planar field.
//
// A planar field g is rescaled into the disc where the template M
// vanishes, carried onto H = {S(u) = 0} by the isometry pi, extended off H
// by G(u) = g~(u - S(u)/n) and blended:
//
//   f(u) = Q M(u) + (1 - theta(u)) G(u).

#ifndef COOPEMBED_EMBEDDING_HPP
#define COOPEMBED_EMBEDDING_HPP

#include "coopembed/core.hpp"
#include "coopembed/field.hpp"
#include "coopembed/planar_continuum.hpp"
#include "coopembed/roots.hpp"
#include "coopembed/smooth_kit.hpp"
#include "coopembed/template_system.hpp"

#include <cmath>
#include <functional>
#include <memory>

namespace coopembed {

/// u - (S(u)/n) (1,...,1).
template <class Derived>
Eigen::Matrix<double, Derived::RowsAtCompileTime, 1> project_H(const Eigen::MatrixBase<Derived>& u) {
  using V = Eigen::Matrix<double, Derived::RowsAtCompileTime, 1>;
  const double mean = u.sum() / static_cast<double>(u.size());
  return V(u.array() - mean);
}

/// Fixed orthonormal basis of H in R^3: b1 = (1,-1,0)/sqrt2, b2 = (1,1,-2)/sqrt6.
struct IsometryH {
  static Vec3 b1() { return Vec3(1.0, -1.0, 0.0) / std::sqrt(2.0); }
  static Vec3 b2() { return Vec3(1.0, 1.0, -2.0) / std::sqrt(6.0); }

  static Eigen::Matrix<double, 3, 2> basis() {
    Eigen::Matrix<double, 3, 2> m;
    m.col(0) = b1();
    m.col(1) = b2();
    return m;
  }

  static Vec3 lift(const Vec2& p) { return p[0] * b1() + p[1] * b2(); }

  /// Coordinates in the basis; only defined on H.
  static Vec2 unlift(const Vec3& h) {
    if (!(std::abs(h.sum()) <= 1e-9)) throw DomainError("unlift: point is not on H");
    return coordinates(h);
  }

  /// (h.b1, h.b2) without the on-H check; equals unlift(project_H(u)).
  static Vec2 coordinates(const Vec3& u) { return {u.dot(b1()), u.dot(b2())}; }
};

inline Vec3 lift(const Vec2& p) { return IsometryH::lift(p); }
inline Vec2 unlift(const Vec3& h) { return IsometryH::unlift(h); }

/// Velocity-scaled planar field p -> sigma g(p / sigma). Equilibria map by
/// sigma, time is unchanged.
struct ScaledPlanarField {
  PlanarField base;
  double sigma = 1.0;

  Vec2 operator()(const Vec2& p) const { return sigma * base(Vec2(p / sigma)); }

  Vec2 rest_point() const { return sigma * base.rest_point(); }

  /// Bounding box of the scaled A'', where g differs from e - u.
  Box<2> detail_box() const {
    const auto& s = base.partition();
    const double rmin = s.lambda1 - 2.0 * s.delta_r;
    const double rmax = s.outer_radius();
    const double amax = 1.0 + 2.0 * s.delta_theta;
    Box<2> b;
    b.lo = Vec2(rmin * std::cos(amax), -rmax * std::sin(amax)) * sigma;
    b.hi = Vec2(rmax, rmax * std::sin(amax)) * sigma;
    return b;
  }

  /// Finest planar feature (collar width), in scaled coordinates.
  double feature_size() const {
    const auto& s = base.partition();
    return sigma * std::min(s.delta_r, s.delta_theta * (s.lambda1 - 2.0 * s.delta_r));
  }
};

/// sigma = eps / R_radius.
inline ScaledPlanarField rescale_into_disc(const PlanarField& g, double region_radius, double eps) {
  if (!(eps > 0.0)) throw ConfigError("rescale_into_disc: epsilon must be positive");
  if (!(region_radius > 0.0)) throw ConfigError("rescale_into_disc: region radius must be positive");
  return {g, eps / region_radius};
}

/// G(u) = pi g_scaled(pi^{-1}(u - S(u)/n)). Maps R^3 into H and is
/// constant along the diagonal.
class LiftedField {
 public:
  using Planar = std::function<Vec2(const Vec2&)>;

  LiftedField() : planar_([](const Vec2&) { return Vec2::Zero(); }) {}

  explicit LiftedField(const ScaledPlanarField& g)
      : planar_([g](const Vec2& p) { return g(p); }), detail_(g.detail_box()), feature_(g.feature_size()),
        has_detail_(true) {}

  /// Arbitrary planar field without fine structure hints.
  explicit LiftedField(Planar planar) : planar_(std::move(planar)) {}

  Vec3 operator()(const Vec3& u) const { return IsometryH::lift(planar_(IsometryH::coordinates(u))); }

  Vec2 planar(const Vec2& p) const { return planar_(p); }

  /// Jacobian of G at u: B Dg B^T with B = [b1 b2].
  Mat<3> jacobian_at(const Vec2& p) const {
    const auto dg = jacobian<2>(planar_, p).value;
    const auto basis = IsometryH::basis();
    return basis * dg * basis.transpose();
  }

  bool has_detail() const { return has_detail_; }
  const Box<2>& detail_box() const { return detail_; }
  double feature_size() const { return feature_; }

 private:
  Planar planar_;
  Box<2> detail_{Vec2::Zero(), Vec2::Zero()};
  double feature_ = 0.0;
  bool has_detail_ = false;
};

inline LiftedField build_G(const ScaledPlanarField& gtilde) { return LiftedField(gtilde); }

// ---------------------------------------------------------------------------
// Q selection

struct SelectQOptions {
  double grid_step = 0.05;
  double margin = 1.25;
  std::size_t verify_samples = 100000;
  std::uint64_t seed = 0x0C0FFEEULL;
  unsigned jobs = 0;
};

struct SelectQResult {
  double Q = 0.0;
  double m1 = 0.0;  // min off-diagonal dM_i/du_j on the support of 1 - theta
  double m2 = 0.0;  // min off-diagonal d/du_j[(1 - theta) G_i] there
  Vec3 argmin_m1 = Vec3::Zero();
  Vec3 argmin_m2 = Vec3::Zero();
  double min_verified_entry = 0.0;
  std::size_t grid_points = 0;
  int attempts = 0;
};

/// Q = margin * max(1, -m2 / m1).
inline double q_from_bounds(double m1, double m2, double margin) {
  if (!(m1 > 0.0)) throw ConstructionError("select_Q: template is not strongly cooperative on the blend support");
  return margin * std::max(1.0, -m2 / m1);
}

class EmbeddedField;

namespace detail {

inline double compute_m1(const TemplateField<3>& tmpl, double step, Vec3& where, std::size_t& count) {
  const BoxGrid grid(3, -1.0, 1.0, step);
  const std::size_t blocks = 64;
  std::vector<ArgMin<Vec3>> partial(blocks);
  std::vector<std::size_t> counts(blocks, 0);
  parallel_blocks(grid.total, blocks, [&](std::size_t lo, std::size_t hi, std::size_t b) {
    Vec3 u;
    for (std::size_t idx = lo; idx < hi; ++idx) {
      grid.point(idx, u);
      if (u.norm() > 1.0 || std::abs(u.sum()) > 0.5) continue;
      ++counts[b];
      partial[b].offer(min_off_diagonal<3>(jacobian<3>(tmpl, u).value).value, idx, u);
    }
  });
  ArgMin<Vec3> best;
  count = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    best.merge(partial[b]);
    count += counts[b];
  }
  where = best.where;
  return best.value;
}

// G is constant along the diagonal, so the compact set {|u| <= 1,
// |S| <= 1/2} is scanned as (planar point p) x (diagonal offset t):
// u = lift(p) + t (1,1,1). Planar points come from a coarse grid over the
// unit disc plus a fine grid over the box where g has structure. G and
// DG are computed once per planar point.
inline double compute_m2(const ThetaSpec& theta, const LiftedField& G, double step, Vec3& where,
                         std::size_t& count) {
  std::vector<Vec2> planar_points;
  const auto add_grid = [&](const Box<2>& box, double h) {
    const int nx = static_cast<int>(std::ceil((box.hi[0] - box.lo[0]) / h)) + 1;
    const int ny = static_cast<int>(std::ceil((box.hi[1] - box.lo[1]) / h)) + 1;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        const Vec2 p(box.lo[0] + (box.hi[0] - box.lo[0]) * i / std::max(1, nx - 1),
                     box.lo[1] + (box.hi[1] - box.lo[1]) * j / std::max(1, ny - 1));
        if (p.norm() <= 1.0) planar_points.push_back(p);
      }
  };
  add_grid(Box<2>::cube(2, 1.0), step / 5.0);
  if (G.has_detail() && G.feature_size() > 0.0) add_grid(G.detail_box(), G.feature_size() * step / 0.4);

  const int n_offsets = static_cast<int>(std::ceil(1.0 / step)) + 1;  // S in [-1/2, 1/2]
  const std::size_t blocks = 64;
  std::vector<ArgMin<Vec3>> partial(blocks);
  std::vector<std::size_t> counts(blocks, 0);
  parallel_blocks(planar_points.size(), blocks, [&](std::size_t lo, std::size_t hi, std::size_t b) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const Vec2& p = planar_points[idx];
      const Vec3 h = IsometryH::lift(p);
      const Vec3 Gv = G(h);
      const Mat<3> DG = G.jacobian_at(p);
      for (int k = 0; k < n_offsets; ++k) {
        const double s = -0.5 + static_cast<double>(k) / (n_offsets - 1);
        const Vec3 u = h + Vec3::Constant(s / 3.0);
        if (u.norm() > 1.0) continue;
        ++counts[b];
        const double th = theta(u);
        const Vec3 grad = theta.gradient(u);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            const double d = (1.0 - th) * DG(i, j) - grad[j] * Gv[i];
            partial[b].offer(d, idx * n_offsets + k, u);
          }
      }
    }
  });
  ArgMin<Vec3> best;
  count = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    best.merge(partial[b]);
    count += counts[b];
  }
  where = best.where;
  return best.value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// the embedded field

class EmbeddedField {
 public:
  EmbeddedField() = default;

  EmbeddedField(TemplateField<3> tmpl, LiftedField G, double Q) : tmpl_(std::move(tmpl)), G_(std::move(G)), Q_(Q) {
    if (tmpl_.rescaled()) throw ConfigError("EmbeddedField: template must be unrescaled");
    if (!(Q_ > 0.0)) throw ConfigError("EmbeddedField: Q must be positive");
  }

  const TemplateField<3>& template_field() const { return tmpl_; }
  const LiftedField& G() const { return G_; }
  double Q() const { return Q_; }
  double P() const { return tmpl_.P(); }

  Vec3 operator()(const Vec3& u) const {
    const double s = u.sum();
    const double th = tmpl_.theta()(u);
    const Vec3 M = th * (Vec3::Constant(s / 3.0) - u) + Vec3::Constant(tmpl_.gamma()(s));
    if (th >= 1.0) return Q_ * M;
    return Q_ * M + (1.0 - th) * G_(u);
  }

  VectorField<3> handle() const {
    return VectorField<3>(3, [self = *this](const Vec3& u) { return self(u); }, "embedded");
  }

  EmbeddedField with_Q(double Q) const { return EmbeddedField(tmpl_, G_, Q); }
  EmbeddedField with_template(TemplateField<3> tmpl) const { return EmbeddedField(std::move(tmpl), G_, Q_); }

 private:
  TemplateField<3> tmpl_{};
  LiftedField G_{};
  double Q_ = 1.0;
};

inline Vec3 eval_f(const Vec3& u, const EmbeddedField& field) { return field(u); }

namespace detail {

// Smallest off-diagonal Jacobian entry of f over random samples in the
// cube [-2P, 2P]^3 and, separately, in the blend support.
inline double sampled_min_embedded(const EmbeddedField& f, std::size_t samples, std::uint64_t seed, unsigned jobs,
                                   Vec3* where = nullptr) {
  const CounterRng rng(seed, 31);
  const double big = 2.0 * f.P();
  const std::size_t blocks = 64;
  std::vector<ArgMin<Vec3>> partial(blocks);
  parallel_blocks(
      2 * samples, blocks,
      [&](std::size_t lo, std::size_t hi, std::size_t b) {
        for (std::size_t s = lo; s < hi; ++s) {
          const double half = s < samples ? big : 1.0;
          Vec3 u;
          for (int k = 0; k < 3; ++k) u[k] = rng.uniform(3 * s + k, -half, half);
          partial[b].offer(min_off_diagonal<3>(jacobian<3>(f, u).value).value, s, u);
        }
      },
      jobs);
  ArgMin<Vec3> best;
  for (auto& p : partial) best.merge(p);
  if (where) *where = best.where;
  return best.value;
}

}  // namespace detail

/// Chooses Q large enough that every off-diagonal Jacobian entry of f is
/// positive, then confirms by sampling. One refinement retry.
inline SelectQResult select_Q(const TemplateField<3>& tmpl, const LiftedField& G, const SelectQOptions& opts = {}) {
  if (!(opts.grid_step > 0.0)) throw ConfigError("select_Q: grid_step must be positive");
  if (!(opts.margin >= 1.0)) throw ConfigError("select_Q: margin must be >= 1");
  SelectQResult result;
  double step = opts.grid_step;
  for (int attempt = 1; attempt <= 2; ++attempt, step *= 0.5) {
    std::size_t c1 = 0, c2 = 0;
    result.m1 = detail::compute_m1(tmpl, step, result.argmin_m1, c1);
    result.m2 = detail::compute_m2(tmpl.theta(), G, step, result.argmin_m2, c2);
    result.grid_points = c1 + c2;
    result.attempts = attempt;
    result.Q = q_from_bounds(result.m1, result.m2, opts.margin);
    const EmbeddedField f(tmpl, G, result.Q);
    result.min_verified_entry = detail::sampled_min_embedded(f, opts.verify_samples, opts.seed, opts.jobs);
    if (result.min_verified_entry > 0.0) return result;
  }
  throw ConstructionError("select_Q: sampled Jacobian has a non-positive off-diagonal entry after refinement");
}

/// Zeros of f in the box, seeded from a grid over the box and a second
/// grid over the blend support [-1,1]^3 (where the planar dynamics live).
template <class Field>
RootCensus<3> zero_census(const Field& f, const Box<3>& box, const CensusOptions& opts = {}) {
  std::vector<Box<3>> seed_boxes{box};
  if (auto inner = box.intersect(Box<3>::cube(3, 1.0))) seed_boxes.push_back(*inner);
  return newton_census<3>(f, box, seed_boxes, opts);
}

}  // namespace coopembed

#endif  // COOPEMBED_EMBEDDING_HPP
