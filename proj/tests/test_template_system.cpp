#include "coopembed/ode.hpp"
#include "coopembed/template_system.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace coopembed;

namespace {

constexpr double kJ = 3.2867201615488493;
// grid minimum of the theta term and the resulting J, from
// tests/oracle/derive_constants.py (numpy, independent differencing)
constexpr double kMStarRef = -1.629376130685145;
constexpr double kJRef = 3.2867201633564314;
constexpr std::size_t kGridPointsRef = 112993;

const TemplateField<3>& field() {
  static const TemplateField<3> M(3, GammaProfile(3, kJ));
  return M;
}

}  // namespace

TEST(EvalM, Examples) {
  const auto& M = field();
  EXPECT_EQ(M(Vec3(0.2, -0.2, 0.0)), Vec3::Zero());
  for (double c : {-30.0, -1.0, -0.1, 0.0, 0.07, 0.4, 2.0, 25.0}) {
    const Vec3 v = M(Vec3::Constant(c));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(v[i], M.gamma()(3 * c), 1e-14 * (1 + std::abs(c))) << c;
  }
  EXPECT_LE(M(Vec3::Constant(M.P())).norm(), 1e-12);
  EXPECT_LE(M(Vec3::Constant(-M.P())).norm(), 1e-12);
}

TEST(EvalM, Construction) {
  EXPECT_THROW(TemplateField<3>(2, GammaProfile(2, 1.0)), ConfigError);
  EXPECT_THROW(TemplateField<3>(3, GammaProfile(2, 1.0)), ConfigError);
}

TEST(SelectJ, MatchesIndependentGridScan) {
  SelectJOptions o;
  o.verify_samples = 20000;
  const auto r = select_J<3>(ThetaSpec(3), 3, o);
  EXPECT_EQ(r.grid_points, kGridPointsRef);
  EXPECT_NEAR(r.min_theta_term, kMStarRef, 1e-7);
  EXPECT_NEAR(r.J, kJRef, 1e-7);
  EXPECT_DOUBLE_EQ(r.J, 1.25 * -r.min_theta_term + 1.25);
  EXPECT_GT(r.min_verified_entry, 0.0);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_LE(r.argmin.norm(), 2.0);
  EXPECT_LE(std::abs(r.argmin.sum()), 1.0);
}

TEST(SelectJ, ConstantThetaGivesOneOverN) {
  // theta == 1 away from a single point: the term is S/n - u_i, slope 1/n
  ThetaSpec th(3);
  th.inner_radius = 0.0;
  th.outer_radius = 1e-12;
  std::size_t visited = 0;
  const auto best = detail::theta_term_min<3>(th, 3, 0.05, 0, visited);
  EXPECT_NEAR(best.value, 1.0 / 3.0, 1e-9);
}

TEST(SelectJ, RejectsBadOptions) {
  SelectJOptions o;
  o.grid_step = 0.1;
  EXPECT_THROW(select_J<3>(ThetaSpec(3), 3, o), ConfigError);
  o.grid_step = 0.05;
  o.margin = 1.05;
  EXPECT_THROW(select_J<3>(ThetaSpec(3), 3, o), ConfigError);
}

TEST(Decompose, Examples) {
  const auto& M = field();
  for (double c : {-3.0, 0.2, 7.0}) EXPECT_LE(M.decompose(Vec3::Constant(c)).a.norm(), 1e-15);
  const auto s = M.decompose(Vec3(0.125, 0.25, -0.375));  // exactly on H, norm < 1/2
  EXPECT_EQ(s.a.norm(), 0.0);
  EXPECT_EQ(s.b.norm(), 0.0);
}

TEST(Decompose, OrthogonalAndSumsToM) {
  const auto& M = field();
  const CounterRng rng(12);
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const double hw = k % 2 ? 2 * M.P() : 1.0;
    const Vec3 u(rng.uniform(3 * k, -hw, hw), rng.uniform(3 * k + 1, -hw, hw), rng.uniform(3 * k + 2, -hw, hw));
    const auto s = M.decompose(u);
    ASSERT_LE(std::abs(s.a.dot(s.b)), 1e-14 * (1 + s.a.norm() * s.b.norm())) << u.transpose();
    ASSERT_LE((s.a + s.b - M(u)).norm(), 1e-12 * (1 + M(u).norm()));
  }
}

TEST(Jacobian, IdentityField) {
  const auto id = [](const Vec3& u) { return u; };
  const auto j = jacobian<3>(id, Vec3(0.3, -2.0, 5.0));
  EXPECT_LE((j.value - Mat<3>::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Jacobian, DiagonalOfM) {
  const auto& M = field();
  for (double c : {0.0, 0.05, 0.3, 1.0, 10.0, -4.0}) {
    const Vec3 u = Vec3::Constant(c);
    const auto j = jacobian<3>(M, u).value;
    const double expect = M.theta()(u) / 3.0 + M.gamma().slope(3 * c);
    for (int r = 0; r < 3; ++r) {
      for (int q = 0; q < 3; ++q) {
        if (r != q) {
          EXPECT_NEAR(j(r, q), expect, 1e-7) << c;
        }
      }
    }
  }
  // theta = 0 at the origin: the entry is exactly gamma'(0) = J
  EXPECT_NEAR(jacobian<3>(M, Vec3::Zero()).value(0, 1), kJ, 1e-7);
}

TEST(Jacobian, AnalyticAgrees) {
  const auto& M = field();
  const CounterRng rng(5);
  for (std::uint64_t k = 0; k < 500; ++k) {
    const Vec3 u(rng.uniform(3 * k, -1.2, 1.2), rng.uniform(3 * k + 1, -1.2, 1.2), rng.uniform(3 * k + 2, -1.2, 1.2));
    EXPECT_LE((jacobian<3>(M, u).value - M.analytic_jacobian(u)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Cooperativity, TemplateOffDiagonalPositive) {
  const auto& M = field();
  const CounterRng rng(8);
  double worst = 1e300;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const double hw = k % 2 ? 2 * M.P() : 1.0;
    const Vec3 u(rng.uniform(3 * k, -hw, hw), rng.uniform(3 * k + 1, -hw, hw), rng.uniform(3 * k + 2, -hw, hw));
    worst = std::min(worst, min_off_diagonal<3>(M.analytic_jacobian(u)).value);
  }
  EXPECT_GT(worst, 0.0);
}

TEST(Rescale, UnitEquilibriaAndDisc) {
  const auto R = rescale_to_unit(field());
  EXPECT_LE(R(Vec3::Ones()).norm(), 1e-13);
  EXPECT_LE(R(Vec3::Constant(-1.0)).norm(), 1e-13);
  const double eps = R.disc_radius();
  EXPECT_NEAR(eps, 0.5 / field().P(), 1e-15);
  const Vec3 h = Vec3(1, -1, 0).normalized() * eps * 0.999;
  EXPECT_EQ(R(h), Vec3::Zero());
  // rescaling again changes nothing
  const auto R2 = rescale_to_unit(R);
  const Vec3 u(0.3, -0.02, 0.9);
  EXPECT_EQ(R2(u), R(u));
}

TEST(Rescale, ConjugateOfOriginal) {
  const auto& M = field();
  const auto R = rescale_to_unit(M);
  const double P = M.P();
  const Vec3 u(0.4, 0.1, -0.2);
  EXPECT_LE((R(u) - M(Vec3(P * u)) / P).norm(), 1e-15);
}

TEST(SimpleTemplate, ZerosAndCooperativity) {
  const SimpleTemplate t(3);
  EXPECT_EQ(t.gamma(0.0), 0.0);
  EXPECT_EQ(t.gamma(1.0), 0.0);
  EXPECT_EQ(t.gamma(-1.0), 0.0);
  for (double x = -5.0; x <= 5.0; x += 0.01) {
    if (std::abs(x) < 1e-9 || std::abs(std::abs(x) - 1.0) < 1e-9) continue;
    EXPECT_NE(t.gamma(x), 0.0);
  }
  const auto f = simple_template<3>(3);
  const CounterRng rng(2);
  for (std::uint64_t k = 0; k < 2000; ++k) {
    const Vec3 u(rng.uniform(3 * k, -3, 3), rng.uniform(3 * k + 1, -3, 3), rng.uniform(3 * k + 2, -3, 3));
    EXPECT_GT(min_off_diagonal<3>(jacobian<3>(f, u).value).value, 0.0);
  }
  EXPECT_LE(f(Vec3::Ones() / 3.0 * 1.0).norm(), 1e-15);
}

TEST(ScalarReduction, MeanFollowsGammaOde) {
  const auto& M = field();
  const auto& g = M.gamma();
  IntegrateOptions o;
  o.rtol = 1e-12;
  o.atol = 1e-12;
  o.output_interval = 0.05;
  const auto scalar = [&](const Vec<1>& v) { return Vec<1>(g(3 * v[0])); };
  for (const Vec3& u0 : {Vec3(0.3, -0.1, 0.05), Vec3(-5, 2, 1), Vec3(10, 20, -4)}) {
    const auto traj = integrate<3>(M, u0, 50.0, o);
    const auto ref = integrate<1>(scalar, Vec<1>(u0.sum() / 3), 50.0, o);
    ASSERT_EQ(traj.size(), ref.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) worst = std::max(worst, std::abs(traj.v(k) - ref.states[k][0]));
    EXPECT_LE(worst, 1e-6) << u0.transpose();
  }
}

TEST(Trichotomy, SignOfSumDecides) {
  const auto& M = field();
  for (const Vec3& u0 : {Vec3(0.01, 0.0, 0.0), Vec3(-30, 10, 25), Vec3(-0.02, 0.01, 0.0), Vec3(30, -20, -15)}) {
    const auto traj = integrate<3>(M, u0, 200.0);
    const Vec3 target = u0.sum() > 0 ? M.upper_equilibrium() : M.lower_equilibrium();
    EXPECT_LE((traj.final_state() - target).norm(), 1e-6) << u0.transpose();
  }
}
