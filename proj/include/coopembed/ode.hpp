// Adaptive Dormand-Prince 5(4) integration with dense output on an
// equal-interval time grid, the H-constrained variant, limit
// classification and the pairwise order-preservation test.

#ifndef COOPEMBED_ODE_HPP
#define COOPEMBED_ODE_HPP

#include "coopembed/core.hpp"
#include "coopembed/field.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace coopembed {

/// Equal-interval samples of a solution plus the S-decomposition
/// diagnostics v = S(u)/n and w = u - v (1,...,1).
template <int Dim>
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec<Dim>> states;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  const Vec<Dim>& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }

  double v(std::size_t k) const { return states[k].sum() / static_cast<double>(states[k].size()); }
  Vec<Dim> w(std::size_t k) const { return Vec<Dim>(states[k].array() - v(k)); }
  double normw(std::size_t k) const { return w(k).norm(); }
};

/// 17 significant digits, the precision used by every emitted file.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// CSV with header t,u1,...,un,v,normw.
template <int Dim>
void write_trajectory_csv(std::ostream& os, const Trajectory<Dim>& traj) {
  const int n = traj.empty() ? (Dim > 0 ? Dim : 0) : static_cast<int>(traj.states.front().size());
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",u" << i;
  os << ",v,normw\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format_double(traj.times[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_double(traj.states[k][i]);
    os << ',' << format_double(traj.v(k)) << ',' << format_double(traj.normw(k)) << '\n';
  }
}

enum class IntegrationFailure { step_underflow, divergence, max_steps };

/// Integration stopped early. Carries the samples produced so far and
/// the last accepted state.
template <int Dim>
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(IntegrationFailure kind, double t, Vec<Dim> last, Trajectory<Dim> partial, const std::string& what)
      : std::runtime_error(what), kind_(kind), time_(t), last_(std::move(last)), partial_(std::move(partial)) {}

  IntegrationFailure kind() const { return kind_; }
  double time() const { return time_; }
  const Vec<Dim>& last_state() const { return last_; }
  const Trajectory<Dim>& partial() const { return partial_; }

 private:
  IntegrationFailure kind_;
  double time_;
  Vec<Dim> last_;
  Trajectory<Dim> partial_;
};

struct IntegrateOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double output_interval = 0.0;  // 0: T / 1000
  double initial_step = 0.0;     // 0: automatic
  double max_step = 0.0;         // 0: unbounded
  std::size_t max_steps = 20'000'000;
};

namespace detail {

struct DopriTableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline void check_tolerances(double T, const IntegrateOptions& opts) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("integrate: T must be positive");
  const auto in_range = [](double x) { return x >= 1e-12 && x <= 1e-3; };
  if (!in_range(opts.rtol) || !in_range(opts.atol)) throw ConfigError("integrate: tolerances must lie in [1e-12, 1e-3]");
}

}  // namespace detail

/// Adaptive DOPRI5 with optional projection after each accepted step.
template <int Dim, class Field, class Projector>
Trajectory<Dim> integrate_projected(const Field& field, const Vec<Dim>& u0, double T, const IntegrateOptions& opts,
                                    const Projector& project) {
  detail::check_tolerances(T, opts);
  using V = Vec<Dim>;
  using B = detail::DopriTableau;
  const int n = static_cast<int>(u0.size());
  const double out_dt = opts.output_interval > 0.0 ? opts.output_interval : T / 1000.0;
  const std::size_t n_out = static_cast<std::size_t>(std::ceil(T / out_dt - 1e-9));

  Trajectory<Dim> traj;
  traj.times.reserve(n_out + 1);
  traj.states.reserve(n_out + 1);
  std::size_t next_out = 0;
  const auto out_time = [&](std::size_t k) { return k >= n_out ? T : static_cast<double>(k) * out_dt; };

  V y = project(u0);
  if (!y.allFinite()) throw DomainError("integrate: non-finite initial state");
  traj.times.push_back(0.0);
  traj.states.push_back(y);
  next_out = 1;

  V k1 = field(y), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), err(n);
  const auto norm_scaled = [&](const V& v, const V& ya, const V& yb) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sc = opts.atol + opts.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      acc += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(acc / n);
  };

  double h = opts.initial_step;
  if (!(h > 0.0)) {
    // Hairer-Wanner starting step heuristic.
    const double d0 = norm_scaled(y, y, y), d1 = norm_scaled(k1, y, y);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, T);
    const V ye = y + h0 * k1;
    const V fe = field(ye);
    const double d2 = norm_scaled(V(fe - k1), y, y) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100.0 * h0, h1, T});
  }
  if (opts.max_step > 0.0) h = std::min(h, opts.max_step);

  const auto fail = [&](IntegrationFailure kind, double t, const std::string& msg) {
    throw IntegrationError<Dim>(kind, t, y, traj, msg);
  };

  double t = 0.0;
  std::size_t steps = 0;
  bool last_rejected = false;
  while (t < T) {
    if (++steps > opts.max_steps) fail(IntegrationFailure::max_steps, t, "integrate: step budget exhausted");
    if (t + h > T) h = T - t;
    if (h < 1e-14 * std::max(1.0, std::abs(t))) fail(IntegrationFailure::step_underflow, t, "integrate: step size underflow");

    k2 = field(V(y + h * (B::a21 * k1)));
    k3 = field(V(y + h * (B::a31 * k1 + B::a32 * k2)));
    k4 = field(V(y + h * (B::a41 * k1 + B::a42 * k2 + B::a43 * k3)));
    k5 = field(V(y + h * (B::a51 * k1 + B::a52 * k2 + B::a53 * k3 + B::a54 * k4)));
    k6 = field(V(y + h * (B::a61 * k1 + B::a62 * k2 + B::a63 * k3 + B::a64 * k4 + B::a65 * k5)));
    y1 = y + h * (B::a71 * k1 + B::a73 * k3 + B::a74 * k4 + B::a75 * k5 + B::a76 * k6);
    k7 = field(y1);
    err = h * (B::e1 * k1 + B::e3 * k3 + B::e4 * k4 + B::e5 * k5 + B::e6 * k6 + B::e7 * k7);
    const double e = norm_scaled(err, y, y1);

    if (!std::isfinite(e) || !y1.allFinite()) {
      if (!y.allFinite() || h < 1e-10 * std::max(1.0, t)) fail(IntegrationFailure::divergence, t, "integrate: solution diverged");
      h *= 0.25;
      last_rejected = true;
      continue;
    }
    if (e <= 1.0) {
      // Dense output coefficients on [t, t + h].
      const V r1 = y;
      const V r2 = y1 - y;
      const V r3 = h * k1 - r2;
      const V r4 = r2 - h * k7 - r3;
      const V r5 = h * (B::d1 * k1 + B::d3 * k3 + B::d4 * k4 + B::d5 * k5 + B::d6 * k6 + B::d7 * k7);
      const double t_new = t + h;
      while (next_out <= n_out && out_time(next_out) <= t_new * (1.0 + 1e-15)) {
        const double s = (out_time(next_out) - t) / h;
        const double s1 = 1.0 - s;
        const V val = r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
        traj.times.push_back(out_time(next_out));
        traj.states.push_back(project(val));
        ++next_out;
      }
      const V projected = project(y1);
      const bool moved = projected != y1;
      y = projected;
      k1 = moved ? field(y) : k7;
      t = t_new;
      if (!y.allFinite() || !k1.allFinite()) fail(IntegrationFailure::divergence, t, "integrate: solution diverged");
      double fac = e == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(e, -0.2));
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= std::max(0.2, fac);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      last_rejected = true;
    }
    if (opts.max_step > 0.0) h = std::min(h, opts.max_step);
  }
  // Guard against rounding in the final output time.
  while (next_out <= n_out) {
    traj.times.push_back(out_time(next_out));
    traj.states.push_back(y);
    ++next_out;
  }
  return traj;
}

template <int Dim, class Field>
Trajectory<Dim> integrate(const Field& field, const Vec<Dim>& u0, double T, const IntegrateOptions& opts = {}) {
  return integrate_projected<Dim>(field, u0, T, opts, [](const Vec<Dim>& v) { return v; });
}

/// Integration constrained to H: every accepted state is re-projected by
/// u -> u - S(u)/n.
template <int Dim, class Field>
Trajectory<Dim> integrate_on_H(const Field& field, const Vec<Dim>& u0, double T, const IntegrateOptions& opts = {}) {
  if (!(std::abs(u0.sum()) <= 1e-12)) throw ConfigError("integrate_on_H: initial state is not on H");
  return integrate_projected<Dim>(field, u0, T, opts, [](const Vec<Dim>& v) {
    return Vec<Dim>(v.array() - v.sum() / static_cast<double>(v.size()));
  });
}

/// Index of the unique candidate that every state in the trailing tail
/// fraction stays within tol of; nullopt if none or several qualify.
template <int Dim>
std::optional<std::size_t> classify_limit(const Trajectory<Dim>& traj, const std::vector<Vec<Dim>>& candidates,
                                          double tol = 1e-6, double tail = 0.2) {
  if (candidates.empty()) throw ConfigError("classify_limit: no candidates");
  if (!(tail > 0.0 && tail <= 0.5)) throw ConfigError("classify_limit: tail must be in (0, 1/2]");
  if (traj.empty()) return std::nullopt;
  const double t_start = traj.final_time() * (1.0 - tail);
  std::optional<std::size_t> match;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    bool all_close = true;
    for (std::size_t k = 0; k < traj.size() && all_close; ++k)
      if (traj.times[k] >= t_start && (traj.states[k] - candidates[c]).norm() > tol) all_close = false;
    if (all_close) {
      if (match) return std::nullopt;
      match = c;
    }
  }
  return match;
}

struct OrderResult {
  bool passed = true;
  double first_violation_time = -1.0;
  int component = -1;
  /// Smallest v_i(t) - u_i(t) over grid times t > 0.
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Integrates the pair (u, v) as one stacked system, so both share every
/// step and their errors largely cancel in v - u. The order counts as
/// reversed only where v_i - u_i < -(atol + rtol max(|u_i|, |v_i|)).
template <int Dim, class Field>
OrderResult order_preservation_test(const Field& field, const Vec<Dim>& u0, const Vec<Dim>& v0, double T,
                                    const IntegrateOptions& opts = {}) {
  if (((v0 - u0).array() < 0.0).any()) throw ConfigError("order_preservation_test: need u0 <= v0");
  if (u0 == v0) throw ConfigError("order_preservation_test: need u0 != v0");
  constexpr int Pair = Dim == Eigen::Dynamic ? Eigen::Dynamic : 2 * Dim;
  const int n = static_cast<int>(u0.size());
  Vec<Pair> y0(2 * n);
  y0 << u0, v0;
  const auto pair_field = [&](const Vec<Pair>& y) {
    Vec<Pair> out(2 * n);
    out << field(Vec<Dim>(y.head(n))), field(Vec<Dim>(y.tail(n)));
    return out;
  };
  const auto traj = integrate<Pair>(pair_field, y0, T, opts);
  OrderResult out;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    for (int i = 0; i < n; ++i) {
      const double a = traj.states[k][i], b = traj.states[k][n + i];
      const double gap = b - a;
      out.min_gap = std::min(out.min_gap, gap);
      const double budget = opts.atol + opts.rtol * std::max(std::abs(a), std::abs(b));
      if (gap < -budget && out.passed) {
        out.passed = false;
        out.first_violation_time = traj.times[k];
        out.component = i;
      }
    }
  }
  return out;
}

}  // namespace coopembed

#endif  // COOPEMBED_ODE_HPP
