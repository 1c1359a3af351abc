// The template strongly cooperative field
//
//   M_i(u) = theta(u) (S(u)/n - u_i) + gamma(S(u)),
//
// its orthogonal split M = a + b, numerical selection of the slope J and
// the simplified arctan variant with theta = 1.

#ifndef COOPEMBED_TEMPLATE_SYSTEM_HPP
#define COOPEMBED_TEMPLATE_SYSTEM_HPP

#include "coopembed/core.hpp"
#include "coopembed/field.hpp"
#include "coopembed/smooth_kit.hpp"

#include <cmath>
#include <vector>

namespace coopembed {

template <int Dim>
struct ABSplit {
  Vec<Dim> a;  // theta(u) (S(u)/n - u_i)
  Vec<Dim> b;  // gamma(S(u)) in every component
};

template <int Dim = 3>
class TemplateField {
 public:
  using State = Vec<Dim>;

  TemplateField() = default;

  TemplateField(int n, GammaProfile gamma) : n_(n), theta_(n), gamma_(std::move(gamma)) {
    if (Dim != Eigen::Dynamic && Dim != n) throw ConfigError("TemplateField: n does not match Dim");
    if (gamma_.n() != n) throw ConfigError("TemplateField: gamma built for a different n");
  }

  int n() const { return n_; }
  const ThetaSpec& theta() const { return theta_; }
  const GammaProfile& gamma() const { return gamma_; }
  double J() const { return gamma_.J(); }
  double P() const { return gamma_.P(); }
  double nP() const { return gamma_.nP(); }
  bool rescaled() const { return scale_ != 1.0 || rescaled_; }
  double state_scale() const { return scale_; }

  /// Radius of the disc of equilibria in H (epsilon).
  double disc_radius() const { return theta_.inner_radius / scale_; }

  /// The attracting equilibrium (P,...,P), or (1,...,1) once rescaled.
  State upper_equilibrium() const { return State::Constant(n_, P() / scale_); }
  State lower_equilibrium() const { return -upper_equilibrium(); }

  State operator()(const State& u) const {
    if (scale_ == 1.0) return eval_unscaled(u);
    return eval_unscaled(State(scale_ * u)) / scale_;
  }

  ABSplit<Dim> decompose(const State& u) const {
    const State x = scale_ * u;
    const double s = x.sum();
    const double th = theta_(x);
    ABSplit<Dim> out;
    out.a = (th * (State::Constant(n_, s / n_) - x)) / scale_;
    out.a.array() -= out.a.sum() / n_;  // a lies in H up to rounding of this last step
    out.b = State::Constant(n_, gamma_(s) / scale_);
    return out;
  }

  /// Chain-rule Jacobian (used as an oracle against finite differences).
  Mat<Dim> analytic_jacobian(const State& u) const {
    const State x = scale_ * u;
    const double s = x.sum();
    const double th = theta_(x);
    const State grad = theta_.gradient(x);
    const State centred = State::Constant(n_, s / n_) - x;
    Mat<Dim> jac = centred * grad.transpose();
    jac.array() += th / n_ + gamma_.slope(s);
    jac.diagonal().array() -= th;
    return jac;
  }

  VectorField<Dim> handle() const {
    return VectorField<Dim>(n_, [self = *this](const State& u) { return self(u); }, "template");
  }

  /// u -> M(P u) / P. Equilibria move to +-(1,...,1), the disc shrinks to
  /// radius 1/(2P).
  TemplateField rescaled_to_unit() const {
    if (rescaled()) return *this;  // P is already 1
    TemplateField out = *this;
    out.scale_ = P();
    out.rescaled_ = true;
    return out;
  }

  /// Same field with gamma replaced (defect injection).
  TemplateField with_gamma(GammaProfile g) const {
    TemplateField out = *this;
    out.gamma_ = std::move(g);
    return out;
  }

 private:
  State eval_unscaled(const State& u) const {
    const double s = u.sum();
    const double th = theta_(u);
    return th * (State::Constant(n_, s / n_) - u) + State::Constant(n_, gamma_(s));
  }

  int n_ = Dim > 0 ? Dim : 3;
  ThetaSpec theta_{};
  GammaProfile gamma_{};
  double scale_ = 1.0;
  bool rescaled_ = false;
};

template <int Dim>
Vec<Dim> eval_M(const Vec<Dim>& u, const TemplateField<Dim>& field) {
  return field(u);
}

template <int Dim>
ABSplit<Dim> decompose_ab(const Vec<Dim>& u, const TemplateField<Dim>& field) {
  return field.decompose(u);
}

template <int Dim>
TemplateField<Dim> rescale_to_unit(const TemplateField<Dim>& field) {
  return field.rescaled_to_unit();
}

// ---------------------------------------------------------------------------
// J selection

struct SelectJOptions {
  double grid_step = 0.05;
  double margin = 1.25;
  std::size_t verify_samples = 100000;
  std::uint64_t seed = 0x5EEDULL;
  unsigned jobs = 0;
};

struct SelectJResult {
  double J = 0.0;
  double min_theta_term = 0.0;      // m*: smallest off-diagonal derivative of the theta term
  VecX argmin;                      // grid point attaining m*
  std::size_t grid_points = 0;      // points of the compact set visited
  double min_verified_entry = 0.0;  // smallest sampled off-diagonal entry of M
  double grid_step_used = 0.0;
  int attempts = 0;
};

namespace detail {

// Visits every point of the regular grid on [lo, hi]^n, step h, in
// lexicographic order. Points are decoded from a linear index so the
// scan can be split into independent blocks.
struct BoxGrid {
  int n = 3;
  double lo = -1.0;
  double step = 0.1;
  std::size_t per_axis = 0;
  std::size_t total = 0;

  BoxGrid(int dim, double lower, double upper, double h) : n(dim), lo(lower), step(h) {
    per_axis = static_cast<std::size_t>(std::floor((upper - lower) / h + 0.5)) + 1;
    total = 1;
    for (int k = 0; k < n; ++k) total *= per_axis;
  }

  template <int Dim>
  void point(std::size_t index, Vec<Dim>& out) const {
    for (int k = n - 1; k >= 0; --k) {
      out[k] = lo + step * static_cast<double>(index % per_axis);
      index /= per_axis;
    }
  }
};

// Smallest off-diagonal d/du_j [theta(u) (S(u)/n - u_i)] over the grid
// points of {|u| <= 2, |S(u)| <= 1}, by central differences.
template <int Dim>
ArgMin<Vec<Dim>> theta_term_min(const ThetaSpec& theta, int n, double step, unsigned jobs,
                                std::size_t& visited) {
  const BoxGrid grid(n, -2.0, 2.0, step);
  const double h = 1e-5;
  const std::size_t blocks = 64;
  std::vector<ArgMin<Vec<Dim>>> partial(blocks);
  std::vector<std::size_t> counts(blocks, 0);
  parallel_blocks(
      grid.total, blocks,
      [&](std::size_t lo, std::size_t hi, std::size_t b) {
        Vec<Dim> u(n), probe(n);
        for (std::size_t idx = lo; idx < hi; ++idx) {
          grid.point(idx, u);
          if (u.norm() > 2.0 || std::abs(u.sum()) > 1.0) continue;
          ++counts[b];
          for (int j = 0; j < n; ++j) {
            probe = u;
            probe[j] = u[j] + h;
            const double tp = theta(probe);
            const double sp = probe.sum() / n;
            probe[j] = u[j] - h;
            const double tm = theta(probe);
            const double sm = probe.sum() / n;
            for (int i = 0; i < n; ++i) {
              if (i == j) continue;
              const double d = (tp * (sp - u[i]) - tm * (sm - u[i])) / (2.0 * h);
              partial[b].offer(d, idx, u);
            }
          }
        }
      },
      jobs);
  ArgMin<Vec<Dim>> best;
  visited = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    best.merge(partial[b]);
    visited += counts[b];
  }
  return best;
}

// Samples the compact set {|u| <= 2, |S(u)| <= 1} by rejection from the
// cube [-2,2]^n, returning the smallest off-diagonal Jacobian entry.
template <int Dim, class Field>
double sampled_min_off_diagonal(const Field& field, int n, std::size_t samples, std::uint64_t seed,
                                unsigned jobs) {
  const CounterRng rng(seed, 17);
  const std::size_t blocks = 64;
  std::vector<double> partial(blocks, std::numeric_limits<double>::infinity());
  parallel_blocks(
      samples, blocks,
      [&](std::size_t lo, std::size_t hi, std::size_t b) {
        Vec<Dim> u(n);
        for (std::size_t s = lo; s < hi; ++s) {
          // Each sample owns a disjoint counter range, retried until accepted.
          for (std::uint64_t attempt = 0;; ++attempt) {
            const std::uint64_t base = (static_cast<std::uint64_t>(s) * 64 + attempt) * n;
            for (int k = 0; k < n; ++k) u[k] = rng.uniform(base + k, -2.0, 2.0);
            if (u.norm() <= 2.0 && std::abs(u.sum()) <= 1.0) break;
          }
          const auto jac = jacobian<Dim>(field, u);
          partial[b] = std::min(partial[b], min_off_diagonal<Dim>(jac.value).value);
        }
      },
      jobs);
  double best = std::numeric_limits<double>::infinity();
  for (double v : partial) best = std::min(best, v);
  return best;
}

}  // namespace detail

/// Chooses J = margin * max(0, -m*) + margin, where m* is the grid minimum
/// of the off-diagonal derivatives of the theta term, then confirms strong
/// cooperativity of the resulting M by random sampling.
template <int Dim = 3>
SelectJResult select_J(const ThetaSpec& theta, int n, const SelectJOptions& opts = {}) {
  if (!(opts.grid_step > 0.0 && opts.grid_step <= 0.05)) throw ConfigError("select_J: grid_step must be in (0, 0.05]");
  if (!(opts.margin >= 1.1)) throw ConfigError("select_J: margin must be >= 1.1");
  SelectJResult result;
  double step = opts.grid_step;
  for (int attempt = 1; attempt <= 2; ++attempt, step *= 0.5) {
    std::size_t visited = 0;
    const auto best = detail::theta_term_min<Dim>(theta, n, step, opts.jobs, visited);
    result.min_theta_term = best.value;
    result.argmin = best.where.template cast<double>();
    result.grid_points = visited;
    result.grid_step_used = step;
    result.attempts = attempt;
    result.J = opts.margin * std::max(0.0, -best.value) + opts.margin;
    const TemplateField<Dim> field(n, GammaProfile(n, result.J));
    result.min_verified_entry =
        detail::sampled_min_off_diagonal<Dim>(field, n, opts.verify_samples, opts.seed, opts.jobs);
    if (result.min_verified_entry > 0.0) return result;
  }
  throw ConstructionError("select_J: sampled Jacobian has a non-positive off-diagonal entry after refinement");
}

// ---------------------------------------------------------------------------
// Simplified template: theta = 1, gamma = delta * atan(x (x+1) (1-x))

struct SimpleTemplate {
  int n = 3;
  double delta = 0.0;

  explicit SimpleTemplate(int dim) : n(dim) {
    if (n < 2) throw ConfigError("simple_template requires n >= 2");
    // d/dx atan(c(x)) with c = x - x^3; sampled over [-10, 10].
    double peak = 0.0;
    const int samples = 200001;
    for (int k = 0; k < samples; ++k) {
      const double x = -10.0 + 20.0 * k / (samples - 1);
      peak = std::max(peak, std::abs(cubic_atan_slope(x)));
    }
    delta = 0.9 * (1.0 / (2.0 * n)) / peak;
  }

  static double cubic(double x) { return x * (x + 1.0) * (1.0 - x); }
  static double cubic_atan_slope(double x) {
    const double c = cubic(x);
    return (1.0 - 3.0 * x * x) / (1.0 + c * c);
  }

  double gamma(double x) const { return delta * std::atan(cubic(x)); }
  double gamma_slope(double x) const { return delta * cubic_atan_slope(x); }

  template <int Dim>
  Vec<Dim> operator()(const Vec<Dim>& u) const {
    const double s = u.sum();
    return (Vec<Dim>::Constant(n, s / n) - u) + Vec<Dim>::Constant(n, gamma(s));
  }

  template <int Dim>
  Mat<Dim> analytic_jacobian(const Vec<Dim>& u) const {
    Mat<Dim> jac = Mat<Dim>::Constant(n, n, 1.0 / n + gamma_slope(u.sum()));
    jac.diagonal().array() -= 1.0;
    return jac;
  }
};

template <int Dim = 3>
VectorField<Dim> simple_template(int n) {
  const SimpleTemplate t(n);
  return VectorField<Dim>(n, [t](const Vec<Dim>& u) { return t(u); }, "simple_template");
}

}  // namespace coopembed

#endif  // COOPEMBED_TEMPLATE_SYSTEM_HPP
