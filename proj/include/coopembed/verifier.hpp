// End-to-end certification suite: every check records its measured value,
// its tolerance and its sample count in a reproducible JSON report.

#ifndef COOPEMBED_VERIFIER_HPP
#define COOPEMBED_VERIFIER_HPP

#include "coopembed/config.hpp"
#include "coopembed/ode.hpp"

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace coopembed {

// ---------------------------------------------------------------------------
// standalone checks

/// Uniform point of a box from consecutive counters.
template <int Dim>
Vec<Dim> sample_box(const CounterRng& rng, std::uint64_t index, const Box<Dim>& box) {
  const int n = static_cast<int>(box.lo.size());
  Vec<Dim> u(n);
  for (int k = 0; k < n; ++k) u[k] = rng.uniform(index * n + k, box.lo[k], box.hi[k]);
  return u;
}

template <int Dim>
struct CooperativityResult {
  bool passed = false;
  double min_entry = 0.0;
  Vec<Dim> argmin;
  int row = -1, col = -1;
  std::size_t samples = 0;
};

/// Minimum positive margin required of every off-diagonal entry.
inline constexpr double kCooperativityMargin = 1e-10;

/// Samples the off-diagonal Jacobian entries at `samples` seeded points
/// of each box. Pass iff the smallest entry is >= 1e-10.
template <int Dim, class Field>
CooperativityResult<Dim> check_cooperativity(const Field& field, const std::vector<Box<Dim>>& boxes,
                                             std::size_t samples, std::uint64_t seed, unsigned jobs = 0) {
  if (samples < 10000) throw ConfigError("check_cooperativity: need at least 1e4 samples");
  if (boxes.empty()) throw ConfigError("check_cooperativity: no box");
  const CounterRng rng(seed, 101);
  const std::size_t total = samples * boxes.size();
  struct Best {
    double value = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
    int row = -1, col = -1;
  };
  const std::size_t blocks = 64;
  std::vector<Best> partial(blocks);
  parallel_blocks(
      total, blocks,
      [&](std::size_t lo, std::size_t hi, std::size_t b) {
        for (std::size_t s = lo; s < hi; ++s) {
          const Vec<Dim> u = sample_box<Dim>(rng, s, boxes[s / samples]);
          const auto m = min_off_diagonal<Dim>(jacobian<Dim>(field, u).value);
          if (m.value < partial[b].value) partial[b] = {m.value, s, m.row, m.col};
        }
      },
      jobs);
  Best best;
  for (const auto& p : partial)
    if (p.value < best.value || (p.value == best.value && p.index < best.index)) best = p;
  CooperativityResult<Dim> out;
  out.min_entry = best.value;
  out.argmin = sample_box<Dim>(rng, best.index, boxes[best.index / samples]);
  out.row = best.row;
  out.col = best.col;
  out.samples = total;
  out.passed = best.value >= kCooperativityMargin;
  return out;
}

struct BasinResult {
  std::vector<std::size_t> counts;  // per candidate
  std::size_t unresolved = 0;       // no unique limit
  std::size_t misclassified = 0;    // a limit other than the expected one
  std::size_t runs = 0;
  bool passed() const { return unresolved == 0 && misclassified == 0; }
};

struct BasinOptions {
  int n_ics = 100;        // per sign of S(u0)
  int h_ics = 50;         // constrained to H
  double half_width = 0;  // off-H ICs from [-hw, hw]^3; H ICs from the lifted square
  double T = 200.0;
  double tol = 1e-6;
  IntegrateOptions ode{};
  std::uint64_t seed = 1;
  unsigned jobs = 0;
};

/// candidates = {+P 1, -P 1, lift(sigma e)}. Off-H initial conditions are
/// expected at the candidate matching sign(S(u0)); H-constrained ones at
/// the third.
template <class Field>
BasinResult basin_experiment(const Field& field, const std::vector<Vec3>& candidates, const BasinOptions& opts) {
  if (candidates.size() != 3) throw ConfigError("basin_experiment: need three candidates");
  const CounterRng rng(opts.seed, 211);
  const Box<3> cube = Box<3>::cube(3, opts.half_width);
  const Box<2> square = Box<2>::cube(2, opts.half_width);
  const std::size_t off = 2 * static_cast<std::size_t>(opts.n_ics);
  const std::size_t total = off + static_cast<std::size_t>(opts.h_ics);
  std::vector<int> limit(total, -1), expected(total, -1);
  parallel_for(
      total,
      [&](std::size_t k) {
        Trajectory<3> traj;
        try {
          if (k < off) {
            Vec3 u0 = sample_box<3>(rng, k, cube);
            const bool positive = k < off / 2;
            if ((u0.sum() > 0.0) != positive) u0 = -u0;
            if (u0.sum() == 0.0) u0.array() += positive ? 1e-3 : -1e-3;
            expected[k] = positive ? 0 : 1;
            traj = integrate<3>(field, u0, opts.T, opts.ode);
          } else {
            const Vec3 u0 = project_H(lift(sample_box<2>(rng, k, square)));
            expected[k] = 2;
            traj = integrate_on_H<3>(field, u0, opts.T, opts.ode);
          }
        } catch (const std::runtime_error&) {
          return;  // unresolved
        }
        if (const auto c = classify_limit<3>(traj, candidates, opts.tol)) limit[k] = static_cast<int>(*c);
      },
      opts.jobs);
  BasinResult out;
  out.counts.assign(3, 0);
  out.runs = total;
  for (std::size_t k = 0; k < total; ++k) {
    if (limit[k] < 0) {
      ++out.unresolved;
      continue;
    }
    ++out.counts[limit[k]];
    if (limit[k] != expected[k]) ++out.misclassified;
  }
  return out;
}

struct ContinuumResult {
  std::vector<double> lambdas;
  std::vector<double> residuals;
  std::vector<double> ratios;  // residual(N) / residual(2N)
  double max_residual = 0.0;
  double min_distance_ratio = std::numeric_limits<double>::infinity();  // d_ij / (sigma |l_i - l_j|)
  bool residuals_ok = true, ratios_ok = true, distances_ok = true;
  bool passed() const { return residuals_ok && ratios_ok && distances_ok; }
};

struct ContinuumOptions {
  int N = 401;
  std::vector<double> d{1.0, 1.0, 1.0};
  double residual_tol = 5e-4;
  double ratio_lo = 3.4, ratio_hi = 4.6;
  double distance_factor = 0.9;
  unsigned jobs = 0;
};

/// Residuals of the arc profiles sigma lift(phi_lambda) at N and 2N nodes
/// and their pairwise sup-distances. lambdas may lie outside the arc
/// range on purpose (the residual then fails).
template <class Field>
ContinuumResult continuum_check(const Field& field, const std::vector<double>& lambdas, double sigma,
                                const ContinuumOptions& opts = {}) {
  if (lambdas.empty()) throw ConfigError("continuum_check: no lambda samples");
  const Grid1D grid(opts.N), fine(2 * opts.N);
  ContinuumResult out;
  out.lambdas = lambdas;
  out.residuals.assign(lambdas.size(), 0.0);
  out.ratios.assign(lambdas.size(), 0.0);
  std::vector<GridFunction<3>> profiles(lambdas.size());
  parallel_for(
      lambdas.size(),
      [&](std::size_t k) {
        profiles[k] = arc_profile_unchecked(lambdas[k], grid, sigma);
        out.residuals[k] = steady_residual<3>(field, profiles[k], opts.d);
        const double r2 = steady_residual<3>(field, arc_profile_unchecked(lambdas[k], fine, sigma), opts.d);
        out.ratios[k] = r2 > 0.0 ? out.residuals[k] / r2 : std::numeric_limits<double>::infinity();
      },
      opts.jobs);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    out.max_residual = std::max(out.max_residual, out.residuals[k]);
    if (!(out.residuals[k] <= opts.residual_tol)) out.residuals_ok = false;
    if (!(out.ratios[k] >= opts.ratio_lo && out.ratios[k] <= opts.ratio_hi)) out.ratios_ok = false;
    for (std::size_t m = k + 1; m < lambdas.size(); ++m) {
      const double gap = sigma * std::abs(lambdas[k] - lambdas[m]);
      const double ratio = sup_distance(profiles[k], profiles[m]) / gap;
      out.min_distance_ratio = std::min(out.min_distance_ratio, ratio);
      if (!(ratio >= opts.distance_factor)) out.distances_ok = false;
    }
  }
  return out;
}

/// lambda_k = lambda1 + k (lambda2 - lambda1) / (count - 1).
inline std::vector<double> lambda_samples(double lambda1, double lambda2, int count) {
  if (count < 1) throw ConfigError("lambda_samples: count must be positive");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    out[k] = count == 1 ? lambda1 : lambda1 + (lambda2 - lambda1) * k / (count - 1);
  if (count > 1) out.back() = lambda2;
  return out;
}

// ---------------------------------------------------------------------------
// the report

struct CheckRecord {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tol = 0.0;
  std::string pass_if;  // how value is compared with tol
  std::size_t samples = 0;
  std::optional<std::vector<double>> argmin;
  json details = json::object();
  double wall_seconds = 0.0;
};

struct VerificationReport {
  json config;
  std::vector<CheckRecord> checks;
  bool aborted = false;
  std::string abort_reason;

  bool passed() const {
    return !aborted && std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.passed; });
  }
  std::string verdict() const { return aborted ? "aborted" : passed() ? "pass" : "fail"; }

  std::vector<std::string> failed_checks() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.passed) out.push_back(c.name);
    return out;
  }

  const CheckRecord* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  /// Wall times are left out unless asked for, so reruns are byte-identical.
  json to_json(bool with_times = false) const {
    json j;
    j["config"] = config;
    json arr = json::array();
    for (const auto& c : checks) {
      json r;
      r["name"] = c.name;
      r["status"] = c.passed ? "pass" : "fail";
      r["value"] = c.value;
      r["tol"] = c.tol;
      r["pass_if"] = c.pass_if;
      r["samples"] = c.samples;
      if (c.argmin) r["argmin"] = *c.argmin;
      if (!c.details.empty()) r["details"] = c.details;
      if (with_times) r["wall_time"] = c.wall_seconds;
      arr.push_back(std::move(r));
    }
    j["checks"] = std::move(arr);
    if (aborted) j["abort_reason"] = abort_reason;
    j["verdict"] = verdict();
    return j;
  }
};

namespace detail {

template <int Dim>
std::vector<double> to_std(const Vec<Dim>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline json vec_json(const VecX& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline CheckRecord make_record(std::string name, bool passed, double value, double tol, std::string pass_if,
                               std::size_t samples) {
  CheckRecord r;
  r.name = std::move(name);
  r.passed = passed;
  r.value = value;
  r.tol = tol;
  r.pass_if = std::move(pass_if);
  r.samples = samples;
  return r;
}

}  // namespace detail

/// Names of all checks in execution order.
inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{
      "theta_sets",           "partition_of_unity", "select_J",           "gamma_profile",
      "template_cooperativity", "template_trichotomy", "orthogonal_split", "planar_convergence",
      "planar_dissipation",   "select_Q",           "embedded_cooperativity", "zero_census",
      "basin_experiment",     "order_preservation", "scalar_reduction",   "continuum",
      "instability",          "sandwich"};
  return names;
}

/// Checks each cataloged defect must fail; every other check must pass.
///   small_q: Q = 0.01 no longer dominates the blend terms on the support
///     of 1 - theta (cooperativity and order break there), and relaxation
///     at rate ~Q leaves every trajectory unconverged at T.
///   gamma_tail_flip: gamma grows past nP, so +-P(1,1,1) are no longer
///     zeros and S grows without bound (the absolute scalar-reduction
///     tolerance cannot hold for |v| ~ e^{Q T / 4}).
///   noncooperative: the added rotation has Jacobian entries -kappa/sqrt(3)
///     but is tangent to H and vanishes on the diagonal and near the arcs.
inline std::vector<std::string> expected_failures(Defect d) {
  switch (d) {
    case Defect::small_q: return {"embedded_cooperativity", "basin_experiment", "order_preservation"};
    case Defect::gamma_tail_flip:
      return {"gamma_profile", "template_trichotomy", "zero_census", "basin_experiment", "scalar_reduction"};
    case Defect::noncooperative: return {"embedded_cooperativity", "order_preservation"};
    default: return {};
  }
}

// ---------------------------------------------------------------------------
// individual suite checks

namespace checks {

inline CheckRecord theta_sets(const ThetaSpec& theta, std::uint64_t seed) {
  const CounterRng rng(seed, 1);
  const int per = 1000;
  std::size_t bad_zero = 0, bad_one = 0, bad_inner = 0;
  std::uint64_t c = 0;
  // theta = 0 on H within radius 1/2
  for (int k = 0; k < per; ++k) {
    const double r = 0.5 * std::sqrt(rng.uniform(c++)), a = rng.uniform(c++, 0.0, 2.0 * kPi);
    const Vec3 u = project_H(lift(Vec2(r * std::cos(a), r * std::sin(a))));
    if (theta(u) != 0.0) ++bad_zero;
  }
  // theta = 1 where |u| >= 1 or |S| >= 1/2
  for (int k = 0; k < per;) {
    const Vec3 u(rng.uniform(c, -2.0, 2.0), rng.uniform(c + 1, -2.0, 2.0), rng.uniform(c + 2, -2.0, 2.0));
    c += 3;
    if (!(u.norm() >= 1.0 || std::abs(u.sum()) >= 0.5)) continue;
    ++k;
    if (theta(u) != 1.0) ++bad_one;
  }
  // strictly inside (0, 1) elsewhere. Near the boundaries 1 - theta or
  // theta drops below the double resolution, so the samples keep away:
  // at |u| = 0.9, |S| = 0.4 the product psi_r psi_s is still ~5e-4.
  for (int k = 0; k < per;) {
    const Vec3 u(rng.uniform(c, -1.0, 1.0), rng.uniform(c + 1, -1.0, 1.0), rng.uniform(c + 2, -1.0, 1.0));
    c += 3;
    const double r = u.norm(), s = std::abs(u.sum());
    if (r > 0.9 || s > 0.4 || (r < 0.55 && s < 0.05)) continue;
    ++k;
    const double t = theta(u);
    if (!(t > 0.0 && t < 1.0)) ++bad_inner;
  }
  auto rec = detail::make_record("theta_sets", bad_zero + bad_one + bad_inner == 0,
                                 static_cast<double>(bad_zero + bad_one + bad_inner), 0.0, "value <= tol", 3 * per);
  rec.details = {{"violations_zero_set", bad_zero}, {"violations_one_set", bad_one}, {"violations_interior", bad_inner}};
  return rec;
}

inline CheckRecord partition_of_unity(const PartitionSpec& spec, std::uint64_t seed) {
  const CounterRng rng(seed, 2);
  const int samples = 10000;
  const double R = 1.25 * spec.outer_radius();
  double worst = 0.0;
  std::size_t plateau_bad = 0, range_bad = 0;
  for (int k = 0; k < samples; ++k) {
    const Vec2 u(rng.uniform(2 * k, -R, R), rng.uniform(2 * k + 1, -R, R));
    if (u.norm() == 0.0) continue;
    const auto w = rho_partition(u, spec);
    worst = std::max(worst, std::abs(w.rho1 + w.rho2 + w.rho3 - 1.0));
    for (double x : {w.rho1, w.rho2, w.rho3})
      if (!(x >= 0.0 && x <= 1.0)) ++range_bad;
    const PolarPoint p = to_polar(u);
    if (spec.in_A(p) && w.rho1 != 1.0) ++plateau_bad;
    if (spec.in_A1(p) && w.rho3 != 0.0) ++plateau_bad;
    if (!spec.in_A2(p) && w.rho3 != 1.0) ++plateau_bad;
    if (!spec.in_A1(p) && w.rho1 != 0.0) ++plateau_bad;
  }
  const double tol = 1e-15;
  auto rec = detail::make_record("partition_of_unity", worst <= tol && plateau_bad == 0 && range_bad == 0, worst, tol,
                                 "value <= tol and no plateau or range violation", samples);
  rec.details = {{"plateau_violations", plateau_bad}, {"range_violations", range_bad}};
  return rec;
}

inline CheckRecord select_J_record(const SelectJResult* sel, double J) {
  if (!sel) {
    auto rec = detail::make_record("select_J", J > 0.0, J, 0.0, "value > tol (J given in config)", 0);
    return rec;
  }
  auto rec = detail::make_record("select_J", sel->min_verified_entry > 0.0, sel->min_verified_entry, 0.0,
                                 "value > tol (sampled min off-diagonal entry of M)", sel->grid_points);
  rec.argmin = std::vector<double>(sel->argmin.data(), sel->argmin.data() + sel->argmin.size());
  rec.details = {{"J", sel->J},
                 {"min_theta_term", sel->min_theta_term},
                 {"grid_step", sel->grid_step_used},
                 {"attempts", sel->attempts}};
  return rec;
}

inline CheckRecord gamma_profile(const GammaProfile& g) {
  const int n = g.n();
  const double nP = g.nP();
  const double root_tol = 1e-12;
  const double at_root = g(nP);
  const bool beyond_negative = g(nP + 1.0) < 0.0;
  // sign scans on (0, nP) and (nP, 2 nP]
  std::size_t sign_bad = 0;
  const int scan = 10000;
  for (int k = 1; k < scan; ++k) {
    const double x = nP * k / scan;
    if (!(g(x) > 0.0)) ++sign_bad;
    const double y = nP + nP * k / scan;
    if (!(g(y) < 0.0)) ++sign_bad;
  }
  // central-difference slope on [-2 nP, 2 nP]
  const int grid = 100000;
  const double h = 1e-6;
  double min_slope = std::numeric_limits<double>::infinity(), odd_err = 0.0;
  for (int k = 0; k <= grid; ++k) {
    const double x = -2.0 * nP + 4.0 * nP * k / grid;
    min_slope = std::min(min_slope, (g(x + h) - g(x - h)) / (2.0 * h));
    odd_err = std::max(odd_err, std::abs(g(x) + g(-x)));
  }
  const double slope_floor = -1.0 / (2.0 * n) + 1e-9;
  const bool ok = std::abs(at_root) <= root_tol && beyond_negative && sign_bad == 0 && min_slope >= slope_floor &&
                  odd_err == 0.0;
  auto rec = detail::make_record("gamma_profile", ok, min_slope, slope_floor,
                                 "value >= tol and |gamma(nP)| <= 1e-12 and sign pattern and oddness hold",
                                 static_cast<std::size_t>(2 * (scan - 1) + grid + 1));
  rec.details = {{"nP", nP},           {"gamma_at_nP", at_root}, {"root_tol", root_tol},
                 {"gamma_beyond_nP_negative", beyond_negative}, {"sign_violations", sign_bad},
                 {"odd_max_error", odd_err}};
  return rec;
}

template <class Field>
CheckRecord cooperativity_record(const std::string& name, const Field& field, double P, std::size_t samples,
                                 std::uint64_t seed, unsigned jobs) {
  const std::vector<Box<3>> boxes{Box<3>::cube(3, 2.0 * P), Box<3>::cube(3, 1.0)};
  const auto res = check_cooperativity<3>(field, boxes, samples, seed, jobs);
  auto rec = detail::make_record(name, res.passed, res.min_entry, kCooperativityMargin, "value >= tol", res.samples);
  rec.argmin = detail::to_std<3>(res.argmin);
  rec.details = {{"entry", {res.row, res.col}}, {"boxes", {"[-2P,2P]^3", "[-1,1]^3"}}};
  return rec;
}

inline CheckRecord template_trichotomy(const TemplateField<3>& M, const SystemConfig& cfg, unsigned jobs) {
  const double P = M.P();
  const Vec3 up = M.upper_equilibrium(), down = M.lower_equilibrium();
  const CounterRng rng(cfg.run.seed, 3);
  const std::size_t off = 2 * static_cast<std::size_t>(cfg.run.n_ics);
  const std::size_t total = off + static_cast<std::size_t>(cfg.run.h_ics);
  IntegrateOptions ode;
  ode.rtol = cfg.run.rtol;
  ode.atol = cfg.run.atol;
  std::vector<double> err(total, std::numeric_limits<double>::infinity());
  const Box<3> cube = Box<3>::cube(3, 2.0 * P);
  const double disc = M.disc_radius();
  parallel_for(
      total,
      [&](std::size_t k) {
        try {
          if (k < off) {
            Vec3 u0 = sample_box<3>(rng, k, cube);
            const bool positive = k < off / 2;
            if ((u0.sum() > 0.0) != positive) u0 = -u0;
            const auto traj = integrate<3>(M, u0, cfg.run.T, ode);
            err[k] = (traj.final_state() - (positive ? up : down)).norm();
          } else {
            const double r = disc * std::sqrt(rng.uniform(2 * k)), a = rng.uniform(2 * k + 1, 0.0, 2.0 * kPi);
            const Vec3 u0 = project_H(lift(Vec2(r * std::cos(a), r * std::sin(a))));
            const auto traj = integrate_on_H<3>(M, u0, cfg.run.T, ode);
            double worst = 0.0;
            for (const auto& s : traj.states) worst = std::max(worst, (s - u0).norm());
            err[k] = worst;
          }
        } catch (const std::runtime_error&) {
        }
      },
      jobs);
  const double conv_tol = 1e-6, fixed_tol = 1e-9;
  double worst_conv = 0.0, worst_fixed = 0.0;
  std::size_t failures = 0;
  for (std::size_t k = 0; k < total; ++k) {
    const bool conv = k < off;
    (conv ? worst_conv : worst_fixed) = std::max(conv ? worst_conv : worst_fixed, err[k]);
    if (!(err[k] <= (conv ? conv_tol : fixed_tol))) ++failures;
  }
  auto rec = detail::make_record("template_trichotomy", failures == 0, static_cast<double>(failures), 0.0,
                                 "value <= tol (failing initial conditions)", total);
  rec.details = {{"max_distance_to_limit", worst_conv}, {"convergence_tol", conv_tol},
                 {"max_drift_in_disc", worst_fixed},    {"fixed_tol", fixed_tol},
                 {"T", cfg.run.T}};
  return rec;
}

inline CheckRecord orthogonal_split(const TemplateField<3>& M, std::uint64_t seed) {
  const CounterRng rng(seed, 4);
  const int samples = 10000;
  const Box<3> big = Box<3>::cube(3, 2.0 * M.P()), small = Box<3>::cube(3, 1.0);
  double worst = 0.0;
  Vec3 where = Vec3::Zero();
  for (int k = 0; k < samples; ++k) {
    const Vec3 u = sample_box<3>(rng, k, k % 2 ? small : big);
    const auto ab = M.decompose(u);
    const double r = std::abs(ab.a.dot(ab.b)) / (1.0 + ab.a.norm() * ab.b.norm());
    if (r > worst) {
      worst = r;
      where = u;
    }
  }
  const double tol = 1e-14;
  auto rec = detail::make_record("orthogonal_split", worst <= tol, worst, tol,
                                 "value <= tol (|a.b| / (1 + |a||b|))", samples);
  rec.argmin = detail::to_std<3>(where);
  return rec;
}

inline CheckRecord planar_convergence(const PlanarField& g, const SystemConfig& cfg, unsigned jobs) {
  const int ics = 200;
  const double T = 500.0;
  const double hw = 2.0 * g.e1();
  const Box<2> box = Box<2>::cube(2, hw);
  const CounterRng rng(cfg.run.seed, 5);
  IntegrateOptions ode;
  ode.rtol = cfg.run.rtol;
  ode.atol = cfg.run.atol;
  std::vector<double> err(ics, std::numeric_limits<double>::infinity());
  parallel_for(
      ics,
      [&](std::size_t k) {
        try {
          const auto traj = integrate<2>(g, sample_box<2>(rng, k, box), T, ode);
          err[k] = (traj.final_state() - g.rest_point()).norm();
        } catch (const std::runtime_error&) {
        }
      },
      jobs);
  const double tol = 1e-6;
  const double worst = *std::max_element(err.begin(), err.end());
  const auto failures = static_cast<std::size_t>(std::count_if(err.begin(), err.end(), [&](double e) { return !(e <= tol); }));
  CensusOptions copts;
  copts.seeds_per_axis = 60;
  copts.jobs = jobs;
  const auto census = newton_census<2>(g, box, {box}, copts);
  const double root_tol = 1e-10;
  const bool unique = census.isolated.size() == 1 && !census.degenerate_set() &&
                      (census.isolated.front().point - g.rest_point()).norm() <= root_tol;
  auto rec = detail::make_record("planar_convergence", failures == 0 && unique, worst, tol,
                                 "value <= tol and exactly one Newton root at e", ics);
  json roots = json::array();
  for (const auto& r : census.isolated) roots.push_back(detail::to_std<2>(r.point));
  rec.details = {{"failures", failures},     {"newton_roots", roots},     {"newton_seeds", census.seeds},
                 {"degenerate_points", census.degenerate_points.size()}, {"box_half_width", hw},
                 {"root_tol", root_tol}, {"T", T}};
  return rec;
}

inline CheckRecord planar_dissipation(const PlanarField& g) {
  const double R = g.region_radius();
  double worst = -std::numeric_limits<double>::infinity();
  Vec2 where = Vec2::Zero();
  int samples = 0;
  json per = json::array();
  for (double f : {1.0, 1.5, 2.0, 4.0}) {
    const auto res = outward_dissipation_check(g, f * R);
    samples += res.samples;
    per.push_back({{"radius", f * R}, {"max", res.max_value}, {"min", res.min_value}});
    if (res.max_value > worst) {
      worst = res.max_value;
      where = res.argmax;
    }
  }
  auto rec = detail::make_record("planar_dissipation", worst < 0.0, worst, 0.0, "value < tol (max of u.g on circles)",
                                 static_cast<std::size_t>(samples));
  rec.argmin = detail::to_std<2>(where);
  rec.details = {{"circles", per}};
  return rec;
}

inline CheckRecord select_Q_record(const SelectQResult* sel, double Q, double Q_effective) {
  if (!sel) return detail::make_record("select_Q", Q > 0.0, Q, 0.0, "value > tol (Q given in config)", 0);
  auto rec = detail::make_record("select_Q", sel->min_verified_entry > 0.0, sel->min_verified_entry, 0.0,
                                 "value > tol (sampled min off-diagonal entry of f)", sel->grid_points);
  rec.argmin = detail::to_std<3>(sel->argmin_m2);
  rec.details = {{"Q", sel->Q}, {"Q_effective", Q_effective}, {"m1", sel->m1}, {"m2", sel->m2},
                 {"attempts", sel->attempts}};
  return rec;
}

inline CheckRecord zero_census_record(const BuiltSystem& sys, unsigned jobs) {
  const double P = sys.P();
  CensusOptions copts;
  copts.jobs = jobs;
  const auto census = zero_census(sys.f, Box<3>::cube(3, 2.0 * P), copts);
  const std::vector<Vec3> expected{Vec3::Constant(P), Vec3::Constant(-P), sys.planar_rest()};
  const double tol = 1e-6;
  std::size_t matched = 0;
  double worst = 0.0;
  for (const auto& e : expected) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : census.isolated) best = std::min(best, (r.point - e).norm());
    if (best <= tol) ++matched;
    worst = std::max(worst, best);
  }
  const bool ok = census.isolated.size() == 3 && matched == 3 && !census.degenerate_set();
  auto rec = detail::make_record("zero_census", ok, static_cast<double>(census.isolated.size()), 3.0,
                                 "value == tol, each expected root within 1e-6, no degenerate zeros", census.seeds);
  json roots = json::array();
  for (const auto& r : census.isolated) roots.push_back(detail::to_std<3>(r.point));
  rec.details = {{"roots", roots},
                 {"expected", {detail::to_std<3>(expected[0]), detail::to_std<3>(expected[1]),
                               detail::to_std<3>(expected[2])}},
                 {"matched", matched},
                 {"match_tol", tol},
                 {"max_match_distance", worst},
                 {"degenerate_points", census.degenerate_points.size()}};
  return rec;
}

inline CheckRecord basin_record(const BuiltSystem& sys, unsigned jobs) {
  const auto& cfg = sys.config;
  BasinOptions o;
  o.n_ics = cfg.run.n_ics;
  o.h_ics = cfg.run.h_ics;
  o.half_width = 2.0 * sys.P();
  o.T = cfg.run.T;
  o.ode.rtol = cfg.run.rtol;
  o.ode.atol = cfg.run.atol;
  o.seed = cfg.run.seed;
  o.jobs = jobs;
  const std::vector<Vec3> cand{Vec3::Constant(sys.P()), Vec3::Constant(-sys.P()), sys.planar_rest()};
  const auto res = basin_experiment(sys.f, cand, o);
  auto rec = detail::make_record("basin_experiment", res.passed(), static_cast<double>(res.unresolved + res.misclassified),
                                 0.0, "value <= tol (unresolved + misclassified)", res.runs);
  rec.details = {{"counts", {{"plus_P", res.counts[0]}, {"minus_P", res.counts[1]}, {"planar_rest", res.counts[2]}}},
                 {"unresolved", res.unresolved},
                 {"misclassified", res.misclassified},
                 {"classify_tol", o.tol},
                 {"T", o.T}};
  return rec;
}

inline CheckRecord order_record(const BuiltSystem& sys, unsigned jobs) {
  const auto& cfg = sys.config;
  const CounterRng rng(cfg.run.seed, 6);
  const int pairs = cfg.run.order_pairs;
  IntegrateOptions ode;
  ode.rtol = cfg.run.rtol;
  ode.atol = cfg.run.atol;
  ode.output_interval = cfg.run.order_T / 2000.0;
  // steps no longer than the sampling interval keep the discrete step map
  // order-preserving near the stiff equilibria
  ode.max_step = ode.output_interval;
  std::vector<OrderResult> res(static_cast<std::size_t>(pairs));
  std::vector<char> crashed(static_cast<std::size_t>(pairs), 0);
  parallel_for(
      static_cast<std::size_t>(pairs),
      [&](std::size_t k) {
        // even pairs in the blend support, odd pairs in the large cube
        const double hw = k % 2 ? 2.0 * sys.P() : 1.0;
        const Vec3 u0 = sample_box<3>(rng, 2 * k, Box<3>::cube(3, hw));
        Vec3 gap;
        for (int i = 0; i < 3; ++i) gap[i] = rng.uniform((2 * k + 1) * 3 + i, 1e-3, 0.1) * hw;
        try {
          res[k] = order_preservation_test<3>(sys.f, u0, Vec3(u0 + gap), cfg.run.order_T, ode);
        } catch (const std::runtime_error&) {
          crashed[k] = 1;
        }
      },
      jobs);
  std::size_t violations = 0;
  double min_gap = std::numeric_limits<double>::infinity(), first = -1.0;
  for (std::size_t k = 0; k < res.size(); ++k) {
    if (crashed[k] || !res[k].passed) {
      ++violations;
      if (!crashed[k] && (first < 0.0 || res[k].first_violation_time < first)) first = res[k].first_violation_time;
    }
    if (!crashed[k]) min_gap = std::min(min_gap, res[k].min_gap);
  }
  auto rec = detail::make_record("order_preservation", violations == 0, static_cast<double>(violations), 0.0,
                                 "value <= tol (pairs whose order reverses beyond atol + rtol |u|)",
                                 static_cast<std::size_t>(pairs));
  rec.details = {{"min_gap", min_gap}, {"first_violation_time", first}, {"T", cfg.run.order_T}};
  return rec;
}

namespace detail_reduction {

// Cubic Hermite value on [t0, t1] from end states and derivatives.
inline Vec3 hermite(const Vec3& y0, const Vec3& d0, const Vec3& y1, const Vec3& d1, double h, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}

}  // namespace detail_reduction

/// v = S(u)/n against v' = Q gamma(n v) for the template (Q = 1) and the
/// embedded field, and w(t) - w(0) against the quadrature of -theta(u) w
/// along the template trajectory.
inline CheckRecord scalar_reduction(const BuiltSystem& sys, unsigned jobs) {
  const auto& cfg = sys.config;
  const int count = cfg.run.reduction_trajectories;
  const double T = cfg.run.reduction_T;
  const TemplateField<3>& M = sys.tmpl;
  const GammaProfile& gam = M.gamma();
  const double Q = sys.embedded.Q();
  const CounterRng rng(cfg.run.seed, 7);
  IntegrateOptions ode;
  ode.rtol = 1e-12;
  ode.atol = 1e-12;
  ode.output_interval = 1e-3;
  IntegrateOptions coarse = ode;
  coarse.output_interval = 1e-2;

  std::vector<double> dev_vM(count, std::numeric_limits<double>::infinity()), dev_vf = dev_vM, dev_w = dev_vM;
  // Gauss-Legendre, 5 points on [0, 1]
  static const double gx[5] = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155, 0.95308992296933200};
  static const double gw[5] = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444, 0.23931433524968324,
                               0.11846344252809454};
  parallel_for(
      static_cast<std::size_t>(count),
      [&](std::size_t k) {
        const double hw = k % 2 ? 2.0 * M.P() : 1.0;
        const Vec3 u0 = sample_box<3>(rng, k, Box<3>::cube(3, hw));
        const Vec<1> v0 = Vec<1>::Constant(u0.sum() / 3.0);
        try {
          const auto tm = integrate<3>(M, u0, T, ode);
          const auto vm = integrate<1>([&](const Vec<1>& v) { return Vec<1>::Constant(gam(3.0 * v[0])); }, v0, T, ode);
          double d = 0.0;
          for (std::size_t i = 0; i < tm.size(); ++i) d = std::max(d, std::abs(tm.v(i) - vm.states[i][0]));
          dev_vM[k] = d;

          // w quadrature: Hermite interpolation of u between samples
          Vec3 acc = tm.w(0);
          double dw = 0.0;
          Vec3 d0 = M(tm.states[0]);
          for (std::size_t i = 0; i + 1 < tm.size(); ++i) {
            const double h = tm.times[i + 1] - tm.times[i];
            const Vec3 d1 = M(tm.states[i + 1]);
            for (int q = 0; q < 5; ++q) {
              const Vec3 u = detail_reduction::hermite(tm.states[i], d0, tm.states[i + 1], d1, h, gx[q]);
              const Vec3 w = u.array() - u.sum() / 3.0;
              acc -= h * gw[q] * M.theta()(u) * w;
            }
            d0 = d1;
            dw = std::max(dw, (acc - tm.w(i + 1)).norm());
          }
          dev_w[k] = dw;

          const auto tf = integrate<3>(sys.f, u0, T, coarse);
          const auto vf =
              integrate<1>([&](const Vec<1>& v) { return Vec<1>::Constant(Q * gam(3.0 * v[0])); }, v0, T, coarse);
          d = 0.0;
          for (std::size_t i = 0; i < tf.size(); ++i) d = std::max(d, std::abs(tf.v(i) - vf.states[i][0]));
          dev_vf[k] = d;
        } catch (const std::runtime_error&) {
        }
      },
      jobs);
  const auto mx = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::isnan(x) ? std::numeric_limits<double>::infinity() : std::max(m, x);
    return m;
  };
  const double a = mx(dev_vM), b = mx(dev_vf), c = mx(dev_w);
  const double worst = std::max({a, b, c});
  const double tol = 1e-6;
  auto rec = detail::make_record("scalar_reduction", worst <= tol, worst, tol, "value <= tol", 3 * count);
  rec.details = {{"v_template", a}, {"v_embedded", b}, {"w_template", c}, {"T", T}};
  return rec;
}

inline CheckRecord continuum_record(const BuiltSystem& sys, unsigned jobs) {
  const auto& cfg = sys.config;
  ContinuumOptions o;
  o.N = cfg.pde.N;
  o.d = cfg.pde.d;
  o.jobs = jobs;
  const auto lambdas = lambda_samples(cfg.planar.lambda1, cfg.planar.lambda2, cfg.run.lambda_samples);
  const auto res = continuum_check(sys.f, lambdas, sys.sigma(), o);
  auto rec = detail::make_record("continuum", res.passed(), res.max_residual, o.residual_tol,
                                 "value <= tol, ratio N->2N in [3.4, 4.6], pairwise distance >= 0.9 sigma dlambda",
                                 lambdas.size());
  const double min_ratio = *std::min_element(res.ratios.begin(), res.ratios.end());
  const double max_ratio = *std::max_element(res.ratios.begin(), res.ratios.end());
  rec.details = {{"N", o.N},
                 {"lambdas", res.lambdas},
                 {"residuals", res.residuals},
                 {"ratios", res.ratios},
                 {"ratio_range", {min_ratio, max_ratio}},
                 {"ratio_bounds", {o.ratio_lo, o.ratio_hi}},
                 {"min_distance_ratio", std::isfinite(res.min_distance_ratio) ? json(res.min_distance_ratio) : json()},
                 {"distance_factor", o.distance_factor}};
  return rec;
}

inline CheckRecord instability_record(const BuiltSystem& sys, unsigned jobs) {
  const auto& cfg = sys.config;
  const auto lambdas = lambda_samples(cfg.planar.lambda1, cfg.planar.lambda2, cfg.run.lambda_samples);
  PDEConfig pc = cfg.pde;
  pc.N = cfg.run.instability_N;
  const Grid1D grid(pc.N);
  const double amp = 1e-3, factor = 10.0;
  std::vector<GrowthResult> res(lambdas.size());
  std::vector<char> blew(lambdas.size(), 0);
  parallel_for(
      lambdas.size(),
      [&](std::size_t k) {
        try {
          res[k] = perturbation_growth<3>(sys.f, arc_profile_unchecked(lambdas[k], grid, sys.sigma()), amp,
                                          cfg.run.instability_T, pc, cfg.run.seed + k, factor);
        } catch (const BlowupError& e) {
          blew[k] = 1;  // left the profile without bound: counts as growth
          res[k].grew = true;
          res[k].time = e.time();
        }
      },
      jobs);
  std::size_t stable = 0;
  double latest = 0.0;
  json times = json::array();
  for (std::size_t k = 0; k < res.size(); ++k) {
    if (!res[k].grew) ++stable;
    latest = std::max(latest, res[k].time);
    times.push_back(res[k].time);
  }
  auto rec = detail::make_record("instability", stable == 0, static_cast<double>(stable), 0.0,
                                 "value <= tol (profiles not departing by 10x before T)", lambdas.size());
  rec.details = {{"growth_times", times}, {"latest_growth_time", latest}, {"amplitude", amp},
                 {"factor", factor},      {"T", cfg.run.instability_T},   {"N", pc.N}};
  return rec;
}

inline CheckRecord sandwich_record(const BuiltSystem& sys) {
  const auto& cfg = sys.config;
  PDEConfig pc = cfg.pde;
  pc.N = cfg.run.sandwich_N;
  const Grid1D grid(pc.N);
  const double P = sys.P();
  const CounterRng rng(cfg.run.seed, 8);
  GridFunction<3> u0(grid, Vec3::Zero());
  for (int k = 0; k < grid.N; ++k)
    for (int i = 0; i < 3; ++i) u0.values[k][i] = rng.uniform(3 * k + i, -2.0 * P, 2.0 * P);
  const double tol = 1e-8;
  SandwichResult res;
  bool blew = false;
  try {
    res = sandwich_test<3>(sys.f, u0, Vec3::Constant(-2.0 * P), Vec3::Constant(2.0 * P), cfg.run.sandwich_T, pc, 50, tol);
  } catch (const BlowupError&) {
    blew = true;
    res.passed = false;
  }
  auto rec = detail::make_record("sandwich", res.passed, res.min_margin, -tol, "value >= tol (smallest envelope margin)",
                                 res.snapshots);
  rec.details = {{"first_violation_time", res.first_violation_time},
                 {"node", res.node},
                 {"component", res.component},
                 {"blowup", blew},
                 {"T", cfg.run.sandwich_T},
                 {"N", pc.N}};
  return rec;
}

}  // namespace checks

// ---------------------------------------------------------------------------
// the suite

struct SuiteOptions {
  unsigned jobs = 0;
  /// Called after each check (progress reporting).
  std::function<void(const CheckRecord&)> on_check;
};

/// Runs every check in dependency order. Construction failures abort the
/// run and return the partial report.
inline VerificationReport run_full_suite(const SystemConfig& cfg_in, const SuiteOptions& opts = {}) {
  cfg_in.validate();
  VerificationReport report;
  report.config = config_to_json(cfg_in);
  const unsigned jobs = opts.jobs;
  const std::uint64_t seed = cfg_in.run.seed;
  using clock = std::chrono::steady_clock;
  const auto run = [&](const std::function<CheckRecord()>& body) {
    const auto t0 = clock::now();
    CheckRecord rec = body();
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (opts.on_check) opts.on_check(rec);
    report.checks.push_back(std::move(rec));
  };

  try {
    run([&] { return checks::theta_sets(ThetaSpec(cfg_in.n), seed); });
    run([&] { return checks::partition_of_unity(cfg_in.partition(), seed); });

    // J first, so the template checks precede the Q selection
    SystemConfig cfg = cfg_in;
    std::optional<SelectJResult> jsel;
    run([&] {
      if (!cfg.tmpl.J) {
        SelectJOptions o;
        o.grid_step = cfg.tmpl.grid_step;
        o.margin = cfg.tmpl.margin;
        o.seed = seed ^ 0x4A4A4A4AULL;
        o.jobs = jobs;
        jsel = select_J<3>(ThetaSpec(cfg.n), cfg.n, o);
        cfg.tmpl.J = jsel->J;
      }
      return checks::select_J_record(jsel ? &*jsel : nullptr, *cfg.tmpl.J);
    });
    report.config = config_to_json(cfg);
    TemplateField<3> M(cfg.n, GammaProfile(cfg.n, *cfg.tmpl.J));
    if (cfg.defect == Defect::gamma_tail_flip) M = M.with_gamma(M.gamma().with_flipped_tail());

    run([&] { return checks::gamma_profile(M.gamma()); });
    run([&] {
      return checks::cooperativity_record("template_cooperativity", M, M.P(),
                                          static_cast<std::size_t>(cfg.run.cooperativity_samples), seed, jobs);
    });
    run([&] { return checks::template_trichotomy(M, cfg, jobs); });
    run([&] { return checks::orthogonal_split(M, seed); });

    const PlanarField g(cfg.partition(), cfg.planar.e1);
    run([&] { return checks::planar_convergence(g, cfg, jobs); });
    run([&] { return checks::planar_dissipation(g); });

    const BuiltSystem sys = build_system(cfg, jobs);
    report.config = resolved_json(sys);
    run([&] {
      return checks::select_Q_record(sys.q_selection ? &*sys.q_selection : nullptr, *sys.config.embedding.Q,
                                     sys.embedded.Q());
    });
    run([&] {
      return checks::cooperativity_record("embedded_cooperativity", sys.f, sys.P(),
                                          static_cast<std::size_t>(cfg.run.cooperativity_samples), seed + 1, jobs);
    });
    run([&] { return checks::zero_census_record(sys, jobs); });
    run([&] { return checks::basin_record(sys, jobs); });
    run([&] { return checks::order_record(sys, jobs); });
    run([&] { return checks::scalar_reduction(sys, jobs); });
    run([&] { return checks::continuum_record(sys, jobs); });
    run([&] { return checks::instability_record(sys, jobs); });
    run([&] { return checks::sandwich_record(sys); });
  } catch (const ConstructionError& e) {
    report.aborted = true;
    report.abort_reason = e.what();
  }
  return report;
}

}  // namespace coopembed

#endif  // COOPEMBED_VERIFIER_HPP
