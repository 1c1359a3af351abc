// Method of lines for u_t = d_i u_xx + f(u) on (-pi/2, pi/2) with Neumann
// boundary conditions: cell-centred grid, mirror ghost cells, explicit RK4
// under the diffusive step limit.

#ifndef COOPEMBED_PDE_HPP
#define COOPEMBED_PDE_HPP

#include "coopembed/core.hpp"
#include "coopembed/embedding.hpp"
#include "coopembed/ode.hpp"
#include "coopembed/planar_continuum.hpp"

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace coopembed {

/// N cells of width h = pi/N over (-pi/2, pi/2); node k sits at the cell
/// centre -pi/2 + (k + 1/2) h.
struct Grid1D {
  int N = 101;

  Grid1D() = default;
  explicit Grid1D(int cells) : N(cells) {
    if (N < 3) throw ConfigError("Grid1D requires N >= 3");
  }

  double h() const { return kPi / N; }
  double x(int k) const { return -kHalfPi + (k + 0.5) * h(); }
};

template <int Dim>
struct GridFunction {
  Grid1D grid;
  std::vector<Vec<Dim>> values;

  GridFunction() = default;
  GridFunction(Grid1D g, const Vec<Dim>& fill) : grid(g), values(static_cast<std::size_t>(g.N), fill) {}

  int components() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  bool finite() const {
    for (const auto& v : values)
      if (!v.allFinite()) return false;
    return true;
  }
};

/// Max over nodes of the Euclidean norm |a(x_k) - b(x_k)|. Invariant
/// under the isometry onto H, so arc profiles sit exactly sigma |l - m|
/// apart.
template <int Dim>
double sup_distance(const GridFunction<Dim>& a, const GridFunction<Dim>& b) {
  if (a.values.size() != b.values.size()) throw ConfigError("sup_distance: grids differ");
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) d = std::max(d, (a.values[k] - b.values[k]).norm());
  return d;
}

struct PDEConfig {
  std::vector<double> d{1.0, 1.0, 1.0};
  int N = 401;
  double c_cfl = 0.4;

  void validate(int n) const {
    if (static_cast<int>(d.size()) != n) throw ConfigError("pde: need one diffusion coefficient per component");
    for (double di : d)
      if (!(di > 0.0)) throw ConfigError("pde: diffusion coefficients must be positive");
    if (N < 3) throw ConfigError("pde: N must be >= 3");
    if (!(c_cfl > 0.0 && c_cfl <= 1.0)) throw ConfigError("pde: c_cfl must be in (0, 1]");
  }

  double max_d() const { return *std::max_element(d.begin(), d.end()); }

  /// c_cfl h^2 / (2 max d).
  double time_step(const Grid1D& g) const { return c_cfl * g.h() * g.h() / (2.0 * max_d()); }
};

/// Second difference with mirror ghosts u_{-1} = u_0, u_N = u_{N-1}.
template <int Dim>
void laplacian(const std::vector<Vec<Dim>>& u, double h, std::vector<Vec<Dim>>& out) {
  const std::size_t N = u.size();
  out.resize(N);
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t k = 0; k < N; ++k) {
    const Vec<Dim>& left = k == 0 ? u[0] : u[k - 1];
    const Vec<Dim>& right = k + 1 == N ? u[N - 1] : u[k + 1];
    out[k] = (left - 2.0 * u[k] + right) * inv_h2;
  }
}

template <int Dim>
GridFunction<Dim> laplacian(const GridFunction<Dim>& gf) {
  GridFunction<Dim> out;
  out.grid = gf.grid;
  laplacian<Dim>(gf.values, gf.grid.h(), out.values);
  return out;
}

/// max_{k,i} |d_i (L u)_{k,i} + f_i(u_k)|.
template <int Dim, class Field>
double steady_residual(const Field& field, const GridFunction<Dim>& profile, const std::vector<double>& d) {
  std::vector<Vec<Dim>> lap;
  laplacian<Dim>(profile.values, profile.grid.h(), lap);
  const int n = profile.components();
  if (static_cast<int>(d.size()) != n) throw ConfigError("steady_residual: need one diffusion coefficient per component");
  double worst = 0.0;
  for (std::size_t k = 0; k < profile.values.size(); ++k) {
    const Vec<Dim> react = field(profile.values[k]);
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(d[i] * lap[k][i] + react[i]));
  }
  return worst;
}

/// The PDE solution became non-finite.
class BlowupError : public std::runtime_error {
 public:
  BlowupError(double t, const std::string& what) : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

template <int Dim>
struct MarchOptions {
  /// Called with (t, state) every `snapshot_every` steps and at the end;
  /// returning false stops the march.
  std::function<bool(double, const GridFunction<Dim>&)> on_snapshot;
  std::size_t snapshot_every = 0;
  /// Overrides the diffusive step limit when positive (must not exceed it).
  double dt = 0.0;
};

template <int Dim>
struct MarchResult {
  GridFunction<Dim> state;
  double time = 0.0;
  std::size_t steps = 0;
  double dt = 0.0;
  bool stopped_early = false;
};

/// Explicit RK4 method of lines up to time T.
template <int Dim, class Field>
MarchResult<Dim> time_march(const Field& field, const GridFunction<Dim>& u0, double T, const PDEConfig& cfg,
                            const MarchOptions<Dim>& opts = {}) {
  if (!(T > 0.0)) throw ConfigError("time_march: T must be positive");
  const int n = u0.components();
  cfg.validate(n);
  const Grid1D& grid = u0.grid;
  const double dt_max = cfg.time_step(grid);
  double dt = opts.dt > 0.0 ? std::min(opts.dt, dt_max) : dt_max;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  dt = T / static_cast<double>(steps);
  const std::size_t N = u0.values.size();
  const double h = grid.h();
  Eigen::Array<double, Dim, 1> dcoef(n);
  for (int i = 0; i < n; ++i) dcoef[i] = cfg.d[i];

  MarchResult<Dim> out;
  out.state = u0;
  out.dt = dt;
  std::vector<Vec<Dim>>& u = out.state.values;
  std::vector<Vec<Dim>> lap(N), stage(N), k1(N), k2(N), k3(N), k4(N);
  const auto rhs = [&](const std::vector<Vec<Dim>>& x, std::vector<Vec<Dim>>& k) {
    laplacian<Dim>(x, h, lap);
    for (std::size_t j = 0; j < N; ++j) k[j] = (dcoef * lap[j].array()).matrix() + field(x[j]);
  };
  for (std::size_t s = 1; s <= steps; ++s) {
    rhs(u, k1);
    for (std::size_t j = 0; j < N; ++j) stage[j] = u[j] + 0.5 * dt * k1[j];
    rhs(stage, k2);
    for (std::size_t j = 0; j < N; ++j) stage[j] = u[j] + 0.5 * dt * k2[j];
    rhs(stage, k3);
    for (std::size_t j = 0; j < N; ++j) stage[j] = u[j] + dt * k3[j];
    rhs(stage, k4);
    for (std::size_t j = 0; j < N; ++j) u[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    const double t = s == steps ? T : static_cast<double>(s) * dt;
    out.time = t;
    out.steps = s;
    if (!out.state.finite()) throw BlowupError(t, "time_march: non-finite values");
    const bool snap = opts.on_snapshot && ((opts.snapshot_every > 0 && s % opts.snapshot_every == 0) || s == steps);
    if (snap && !opts.on_snapshot(t, out.state)) {
      out.stopped_early = s != steps;
      break;
    }
  }
  return out;
}

/// sigma * lift(phi_lambda(x_k)) at every node.
inline GridFunction<3> arc_profile_unchecked(double lambda, const Grid1D& grid, double sigma) {
  GridFunction<3> out(grid, Vec3::Zero());
  for (int k = 0; k < grid.N; ++k) out.values[k] = sigma * lift(phi(lambda, grid.x(k)));
  return out;
}

inline GridFunction<3> arc_profile(double lambda, const Grid1D& grid, double sigma, const PartitionSpec& spec) {
  if (!(lambda >= spec.lambda1 && lambda <= spec.lambda2))
    throw ConfigError("arc_profile: lambda outside [lambda1, lambda2]");
  return arc_profile_unchecked(lambda, grid, sigma);
}

template <int Dim>
GridFunction<Dim> homogeneous_profile(const Grid1D& grid, const Vec<Dim>& value) {
  return GridFunction<Dim>(grid, value);
}

// ---------------------------------------------------------------------------
// comparison and instability experiments

struct SandwichResult {
  bool passed = true;
  double first_violation_time = -1.0;
  int node = -1;
  int component = -1;
  /// Smallest of (u - lower) and (upper - u) over all snapshots.
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t snapshots = 0;
};

/// Marches the PDE from u0 together with the homogeneous solutions started
/// at the constant bounds (same RK4 steps), checking
/// lower(t) <= u(x,t) <= upper(t) at every snapshot within tol.
template <int Dim, class Field>
SandwichResult sandwich_test(const Field& field, const GridFunction<Dim>& u0, const Vec<Dim>& lower,
                             const Vec<Dim>& upper, double T, const PDEConfig& cfg, std::size_t snapshot_every = 50,
                             double tol = 1e-8) {
  for (const auto& v : u0.values)
    if (((v - lower).array() < 0.0).any() || ((upper - v).array() < 0.0).any())
      throw ConfigError("sandwich_test: initial profile is not between the bounds");
  const int n = u0.components();
  const double dt_full = cfg.time_step(u0.grid);
  const std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt_full - 1e-12));
  const double dt = T / static_cast<double>(steps);

  // Homogeneous solutions: the same RK4 recursion applied to one node.
  Vec<Dim> lo = lower, hi = upper;
  const auto rk4 = [&](Vec<Dim>& y) {
    const Vec<Dim> a = field(y);
    const Vec<Dim> b = field(Vec<Dim>(y + 0.5 * dt * a));
    const Vec<Dim> c = field(Vec<Dim>(y + 0.5 * dt * b));
    const Vec<Dim> e = field(Vec<Dim>(y + dt * c));
    y += (dt / 6.0) * (a + 2.0 * b + 2.0 * c + e);
  };
  std::size_t envelope_steps = 0;
  SandwichResult out;
  MarchOptions<Dim> opts;
  opts.dt = dt;
  opts.snapshot_every = snapshot_every;
  opts.on_snapshot = [&](double t, const GridFunction<Dim>& state) {
    const std::size_t target = static_cast<std::size_t>(std::llround(t / dt));
    while (envelope_steps < target) {
      rk4(lo);
      rk4(hi);
      ++envelope_steps;
    }
    ++out.snapshots;
    for (std::size_t k = 0; k < state.values.size(); ++k)
      for (int i = 0; i < n; ++i) {
        const double below = state.values[k][i] - lo[i];
        const double above = hi[i] - state.values[k][i];
        out.min_margin = std::min({out.min_margin, below, above});
        if ((below < -tol || above < -tol) && out.passed) {
          out.passed = false;
          out.first_violation_time = t;
          out.node = static_cast<int>(k);
          out.component = i;
        }
      }
    return true;
  };
  time_march<Dim>(field, u0, T, cfg, opts);
  return out;
}

struct GrowthResult {
  bool grew = false;
  double time = 0.0;  // time at which the growth factor was reached (or T)
  double initial_distance = 0.0;
  double final_distance = 0.0;
};

/// Adds a seeded uniform perturbation of the given amplitude to `base`
/// and marches until the sup-distance to `base` has grown by `factor`.
template <int Dim, class Field>
GrowthResult perturbation_growth(const Field& field, const GridFunction<Dim>& base, double amplitude, double T,
                                 const PDEConfig& cfg, std::uint64_t seed, double factor = 10.0,
                                 std::size_t snapshot_every = 20) {
  const CounterRng rng(seed, 73);
  GridFunction<Dim> start = base;
  const int n = base.components();
  for (std::size_t k = 0; k < start.values.size(); ++k)
    for (int i = 0; i < n; ++i) start.values[k][i] += amplitude * rng.uniform(k * n + i, -1.0, 1.0);
  GrowthResult out;
  out.initial_distance = sup_distance(start, base);
  MarchOptions<Dim> opts;
  opts.snapshot_every = snapshot_every;
  opts.on_snapshot = [&](double t, const GridFunction<Dim>& state) {
    out.final_distance = sup_distance(state, base);
    out.time = t;
    if (out.final_distance >= factor * out.initial_distance) {
      out.grew = true;
      return false;
    }
    return true;
  };
  time_march<Dim>(field, start, T, cfg, opts);
  return out;
}

// ---------------------------------------------------------------------------
// profile files: header x,u1,...,un; 17 significant digits

template <int Dim>
void write_profile_csv(std::ostream& os, const GridFunction<Dim>& gf) {
  const int n = gf.components();
  os << "x";
  for (int i = 1; i <= n; ++i) os << ",u" << i;
  os << '\n';
  for (int k = 0; k < gf.grid.N; ++k) {
    os << format_double(gf.grid.x(k));
    for (int i = 0; i < n; ++i) os << ',' << format_double(gf.values[k][i]);
    os << '\n';
  }
}

/// Reads a profile written by write_profile_csv. The node count fixes the
/// grid; x values are checked against it.
template <int Dim>
GridFunction<Dim> read_profile_csv(std::istream& is, int n) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("profile csv: empty input");
  std::vector<Vec<Dim>> rows;
  std::vector<double> xs;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != n + 1) throw ConfigError("profile csv: wrong column count");
    xs.push_back(vals[0]);
    Vec<Dim> v(n);
    for (int i = 0; i < n; ++i) v[i] = vals[i + 1];
    rows.push_back(v);
  }
  GridFunction<Dim> gf;
  gf.grid = Grid1D(static_cast<int>(rows.size()));
  for (int k = 0; k < gf.grid.N; ++k)
    if (std::abs(xs[k] - gf.grid.x(k)) > 1e-9) throw ConfigError("profile csv: nodes do not match a cell-centred grid");
  gf.values = std::move(rows);
  return gf;
}

}  // namespace coopembed

#endif  // COOPEMBED_PDE_HPP
