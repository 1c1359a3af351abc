// Grid-seeded damped Newton search for the zeros of a vector field.

#ifndef COOPEMBED_ROOTS_HPP
#define COOPEMBED_ROOTS_HPP

#include "coopembed/core.hpp"
#include "coopembed/field.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace coopembed {

template <int Dim>
struct Box {
  Vec<Dim> lo;
  Vec<Dim> hi;

  static Box cube(int n, double half_width) {
    return {Vec<Dim>::Constant(n, -half_width), Vec<Dim>::Constant(n, half_width)};
  }
  bool contains(const Vec<Dim>& u, double slack = 0.0) const {
    return ((u - lo).array() >= -slack).all() && ((hi - u).array() >= -slack).all();
  }
  std::optional<Box> intersect(const Box& o) const {
    Box out{lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)};
    if (((out.hi - out.lo).array() < 0.0).any()) return std::nullopt;
    return out;
  }
};

struct NewtonOptions {
  int max_iterations = 100;
  double residual_tol = 1e-12;  // accepted as converged outright
  double root_tol = 1e-9;       // max |f| for a converged point to count as a root
  double step_tol = 1e-14;
  double singular_ratio = 1e-7;  // sigma_min / sigma_max below this flags a degenerate root
};

template <int Dim>
struct NewtonOutcome {
  bool converged = false;
  Vec<Dim> point;
  double residual = 0.0;
  int iterations = 0;
  bool degenerate = false;
};

/// Damped Newton iteration; the linear step is a minimum-norm least
/// squares solve so singular Jacobians (manifolds of zeros) are handled.
template <int Dim, class Field>
NewtonOutcome<Dim> newton_solve(const Field& field, Vec<Dim> x, const NewtonOptions& opts = {}) {
  NewtonOutcome<Dim> out;
  Vec<Dim> fx = field(x);
  double res = fx.norm();
  int it = 0;
  for (; it < opts.max_iterations && std::isfinite(res) && res > opts.residual_tol; ++it) {
    const Mat<Dim> jac = jacobian<Dim>(field, x).value;
    const Vec<Dim> dx = jac.completeOrthogonalDecomposition().solve(-fx);
    if (!dx.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      const Vec<Dim> trial = x + t * dx;
      const Vec<Dim> ft = field(trial);
      const double rt = ft.norm();
      if (std::isfinite(rt) && rt < res) {
        x = trial;
        fx = ft;
        res = rt;
        improved = true;
        break;
      }
    }
    if (!improved || t * dx.norm() <= opts.step_tol * (1.0 + x.norm())) break;
  }
  out.point = x;
  out.residual = res;
  out.iterations = it;
  out.converged = std::isfinite(res) && res <= opts.root_tol;
  if (out.converged) {
    const Mat<Dim> jac = jacobian<Dim>(field, x).value;
    Eigen::JacobiSVD<Mat<Dim>> svd(jac);
    const auto& sv = svd.singularValues();
    out.degenerate = sv.maxCoeff() == 0.0 || sv.minCoeff() < opts.singular_ratio * sv.maxCoeff();
  }
  return out;
}

template <int Dim>
struct Root {
  Vec<Dim> point;
  double residual = 0.0;
  std::size_t seeds = 0;  // number of seeds that converged to this root
};

template <int Dim>
struct RootCensus {
  std::vector<Root<Dim>> isolated;          // nondegenerate roots, clustered
  std::vector<Vec<Dim>> degenerate_points;  // converged points with singular Jacobian
  std::size_t seeds = 0;

  /// A manifold of zeros was detected (e.g. the disc of equilibria in H).
  bool degenerate_set() const { return !degenerate_points.empty(); }
};

struct CensusOptions {
  int seeds_per_axis = 20;
  double cluster_tol = 1e-8;
  NewtonOptions newton{};
  unsigned jobs = 0;
};

namespace detail {

template <int Dim>
std::vector<Vec<Dim>> grid_seeds(const Box<Dim>& box, int per_axis) {
  const int n = static_cast<int>(box.lo.size());
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= static_cast<std::size_t>(per_axis);
  std::vector<Vec<Dim>> seeds(total, Vec<Dim>(n));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (int k = n - 1; k >= 0; --k) {
      const double frac = per_axis == 1 ? 0.5 : static_cast<double>(rem % per_axis) / (per_axis - 1);
      seeds[idx][k] = box.lo[k] + frac * (box.hi[k] - box.lo[k]);
      rem /= per_axis;
    }
  }
  return seeds;
}

template <int Dim>
bool lex_less(const Vec<Dim>& a, const Vec<Dim>& b) {
  for (int k = 0; k < a.size(); ++k)
    if (a[k] != b[k]) return a[k] < b[k];
  return false;
}

}  // namespace detail

/// Newton from a regular grid of seeds over each box; roots outside the
/// first (search) box are discarded. Isolated roots are clustered at
/// cluster_tol; the result is sorted and independent of thread count.
template <int Dim, class Field>
RootCensus<Dim> newton_census(const Field& field, const Box<Dim>& search, const std::vector<Box<Dim>>& seed_boxes,
                              const CensusOptions& opts = {}) {
  std::vector<Vec<Dim>> seeds;
  for (const auto& b : seed_boxes) {
    auto s = detail::grid_seeds(b, opts.seeds_per_axis);
    seeds.insert(seeds.end(), s.begin(), s.end());
  }
  std::vector<NewtonOutcome<Dim>> outcomes(seeds.size());
  parallel_for(
      seeds.size(), [&](std::size_t i) { outcomes[i] = newton_solve<Dim>(field, seeds[i], opts.newton); },
      opts.jobs);

  RootCensus<Dim> census;
  census.seeds = seeds.size();
  std::vector<NewtonOutcome<Dim>> found;
  for (const auto& o : outcomes) {
    if (!o.converged || !search.contains(o.point, 1e-12)) continue;
    if (o.degenerate)
      census.degenerate_points.push_back(o.point);
    else
      found.push_back(o);
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return detail::lex_less<Dim>(a.point, b.point); });
  for (const auto& o : found) {
    bool merged = false;
    for (auto& r : census.isolated) {
      if ((r.point - o.point).norm() <= opts.cluster_tol) {
        ++r.seeds;
        r.residual = std::min(r.residual, o.residual);
        merged = true;
        break;
      }
    }
    if (!merged) census.isolated.push_back({o.point, o.residual, 1});
  }
  std::sort(census.degenerate_points.begin(), census.degenerate_points.end(),
            [](const auto& a, const auto& b) { return detail::lex_less<Dim>(a, b); });
  return census;
}

}  // namespace coopembed

#endif  // COOPEMBED_ROOTS_HPP
