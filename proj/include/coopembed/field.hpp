// Type-erased vector fields and finite-difference Jacobians.

#ifndef COOPEMBED_FIELD_HPP
#define COOPEMBED_FIELD_HPP

#include "coopembed/core.hpp"

#include <functional>
#include <string>
#include <utility>

namespace coopembed {

/// An evaluatable field R^n -> R^n. Handles are cheap to copy and share
/// the underlying callable.
template <int Dim>
class VectorField {
 public:
  using State = Vec<Dim>;
  using Fn = std::function<State(const State&)>;

  VectorField() = default;
  VectorField(int n, Fn fn, std::string name = {}) : n_(n), fn_(std::move(fn)), name_(std::move(name)) {}

  State operator()(const State& u) const { return fn_(u); }

  int dim() const { return n_; }
  const std::string& name() const { return name_; }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  int n_ = Dim > 0 ? Dim : 0;
  Fn fn_;
  std::string name_;
};

template <int Dim>
struct JacobianEstimate {
  Mat<Dim> value;
  /// Largest |D(h) - D(h/2)| over entries; a proxy for the truncation error.
  double error = 0.0;
};

/// Central differences with step 1e-6 * max(1, |u|) and one level of
/// Richardson extrapolation.
template <int Dim, class Field>
JacobianEstimate<Dim> jacobian(const Field& field, const Vec<Dim>& u) {
  const int n = static_cast<int>(u.size());
  const double base = 1e-6 * std::max(1.0, u.norm());
  JacobianEstimate<Dim> out;
  out.value = Mat<Dim>::Zero(n, n);
  Vec<Dim> probe = u;
  for (int j = 0; j < n; ++j) {
    auto central = [&](double h) {
      const double hi = u[j] + h, lo = u[j] - h;
      probe[j] = hi;
      const Vec<Dim> fp = field(probe);
      probe[j] = lo;
      const Vec<Dim> fm = field(probe);
      probe[j] = u[j];
      if (!fp.allFinite() || !fm.allFinite()) throw DomainError("jacobian: non-finite field evaluation");
      // divide by the spacing actually represented, not 2h
      return Vec<Dim>((fp - fm) / (hi - lo));
    };
    const Vec<Dim> coarse = central(base);
    const Vec<Dim> fine = central(0.5 * base);
    out.value.col(j) = (4.0 * fine - coarse) / 3.0;
    out.error = std::max(out.error, (fine - coarse).cwiseAbs().maxCoeff());
  }
  return out;
}

/// Smallest off-diagonal entry of a square matrix and its (row, col).
template <int Dim>
struct OffDiagonalMin {
  double value = std::numeric_limits<double>::infinity();
  int row = -1;
  int col = -1;
};

template <int Dim>
OffDiagonalMin<Dim> min_off_diagonal(const Mat<Dim>& m) {
  OffDiagonalMin<Dim> best;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) < best.value) best = {m(i, j), i, j};
  return best;
}

}  // namespace coopembed

#endif  // COOPEMBED_FIELD_HPP
