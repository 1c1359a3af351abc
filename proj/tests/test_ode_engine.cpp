#include "coopembed/ode.hpp"
#include "coopembed/template_system.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace coopembed;

namespace {

constexpr double kJ = 3.2867201615488493;

Vec<1> decay(const Vec<1>& u) { return -u; }

}  // namespace

TEST(Integrate, LinearDecay) {
  const auto traj = integrate<1>(decay, Vec<1>(1.0), 1.0);
  EXPECT_NEAR(traj.final_state()[0], std::exp(-1.0), 1e-8);
  EXPECT_EQ(traj.final_time(), 1.0);
  EXPECT_EQ(traj.size(), 1001u);
  for (std::size_t k = 0; k < traj.size(); ++k)
    EXPECT_NEAR(traj.states[k][0], std::exp(-traj.times[k]), 1e-9);
}

TEST(Integrate, OutputGrid) {
  IntegrateOptions o;
  o.output_interval = 0.3;
  const auto traj = integrate<1>(decay, Vec<1>(2.0), 1.0, o);
  ASSERT_EQ(traj.size(), 5u);
  EXPECT_DOUBLE_EQ(traj.times[1], 0.3);
  EXPECT_EQ(traj.times.back(), 1.0);
}

TEST(Integrate, HarmonicOscillator) {
  const auto rot = [](const Vec2& u) { return Vec2(u[1], -u[0]); };
  IntegrateOptions o;
  o.rtol = 1e-12;
  o.atol = 1e-12;
  const auto traj = integrate<2>(rot, Vec2(1.0, 0.0), 2 * kPi, o);
  EXPECT_LE((traj.final_state() - Vec2(1.0, 0.0)).norm(), 1e-9);
}

TEST(Integrate, Validation) {
  IntegrateOptions o;
  EXPECT_THROW(integrate<1>(decay, Vec<1>(1.0), 0.0), ConfigError);
  EXPECT_THROW(integrate<1>(decay, Vec<1>(1.0), -1.0), ConfigError);
  o.rtol = 1e-13;
  EXPECT_THROW(integrate<1>(decay, Vec<1>(1.0), 1.0, o), ConfigError);
  o.rtol = 1e-2;
  EXPECT_THROW(integrate<1>(decay, Vec<1>(1.0), 1.0, o), ConfigError);
  EXPECT_THROW(integrate<1>(decay, Vec<1>(std::nan("")), 1.0), DomainError);
}

TEST(Integrate, BlowupCarriesPartialTrajectory) {
  const auto quad = [](const Vec<1>& u) { return Vec<1>(u[0] * u[0]); };
  try {
    integrate<1>(quad, Vec<1>(1.0), 2.0);
    FAIL() << "expected an integration error";
  } catch (const IntegrationError<1>& e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LE(e.time(), 1.0);
    EXPECT_FALSE(e.partial().empty());
    EXPECT_LE(e.partial().final_time(), e.time());
  }
}

TEST(Integrate, Deterministic) {
  const TemplateField<3> M(3, GammaProfile(3, kJ));
  const auto a = integrate<3>(M, Vec3(0.3, -2.0, 1.0), 20.0);
  const auto b = integrate<3>(M, Vec3(0.3, -2.0, 1.0), 20.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a.states[k], b.states[k]);
}

TEST(Integrate, ToleranceConvergence) {
  const TemplateField<3> M(3, GammaProfile(3, kJ));
  const Vec3 u0(0.2, -0.5, 0.4);
  IntegrateOptions loose, tight;
  loose.rtol = 1e-8;
  loose.atol = 1e-10;
  tight.rtol = 5e-9;
  tight.atol = 5e-11;
  const auto a = integrate<3>(M, u0, 5.0, loose).final_state();
  const auto b = integrate<3>(M, u0, 5.0, tight).final_state();
  const double budget = loose.atol + loose.rtol * a.cwiseAbs().maxCoeff();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 10 * budget);
}

TEST(IntegrateOnH, StaysOnPlaneAndTemplateDiscIsFixed) {
  const TemplateField<3> M(3, GammaProfile(3, kJ));
  const Vec3 h = Vec3(1, 1, -2).normalized() * 0.45;
  const auto traj = integrate_on_H<3>(M, h, 50.0);
  for (const auto& s : traj.states) {
    EXPECT_LE(std::abs(s.sum()), 1e-12);
    EXPECT_LE((s - h).norm(), 1e-9);
  }
  EXPECT_THROW(integrate_on_H<3>(M, Vec3(1, 0, 0), 1.0), ConfigError);
}

TEST(IntegrateOnH, ContractsOutsideDisc) {
  // theta > 0 off the disc, so w' = -theta w shrinks the H component
  const TemplateField<3> M(3, GammaProfile(3, kJ));
  const Vec3 h = Vec3(1, -1, 0).normalized() * 3.0;
  const auto traj = integrate_on_H<3>(M, h, 50.0);
  EXPECT_LE(traj.final_state().norm(), 1.0);
  EXPECT_GE(traj.final_state().norm(), 0.5 - 1e-9);
}

TEST(ClassifyLimit, Cases) {
  Trajectory<2> constant;
  for (int k = 0; k <= 10; ++k) {
    constant.times.push_back(k);
    constant.states.push_back(Vec2(1.0, 2.0));
  }
  const std::vector<Vec2> cands{Vec2(0, 0), Vec2(1, 2), Vec2(-1, 0)};
  EXPECT_EQ(classify_limit<2>(constant, cands), std::optional<std::size_t>(1));

  Trajectory<2> flip = constant;
  for (int k = 0; k <= 10; ++k) flip.states[k] = k % 2 ? cands[0] : cands[2];
  EXPECT_EQ(classify_limit<2>(flip, cands), std::nullopt);
  EXPECT_THROW(classify_limit<2>(constant, {}), ConfigError);
  EXPECT_THROW(classify_limit<2>(constant, cands, 1e-6, 0.9), ConfigError);
}

TEST(ClassifyLimit, TemplateNegativeSum) {
  const TemplateField<3> M(3, GammaProfile(3, kJ));
  const auto traj = integrate<3>(M, Vec3(-1.0, 0.3, 0.2), 200.0);
  const std::vector<Vec3> cands{M.upper_equilibrium(), M.lower_equilibrium()};
  EXPECT_EQ(classify_limit<3>(traj, cands), std::optional<std::size_t>(1));
}

TEST(OrderPreservation, CooperativeLinearField) {
  Mat<3> A;
  A << -3, 1, 0.5, 0.2, -2, 1, 1, 1, -4;
  const auto lin = [&](const Vec3& u) { return Vec3(A * u); };
  const auto r = order_preservation_test<3>(lin, Vec3(-1, 0, 0.5), Vec3(-0.9, 0.1, 0.5), 10.0);
  EXPECT_TRUE(r.passed);
  EXPECT_GE(r.min_gap, 0.0);
}

TEST(OrderPreservation, RotationFails) {
  const auto rot = [](const Vec3& u) { return Vec3(u[1], -u[0], 0.0); };
  const auto r = order_preservation_test<3>(rot, Vec3(0, 0, 0), Vec3(0.1, 0.1, 0.1), 10.0);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.first_violation_time, 0.0);
  EXPECT_LT(r.first_violation_time, 10.0);
  EXPECT_LT(r.min_gap, 0.0);
}

TEST(OrderPreservation, Preconditions) {
  const auto id = [](const Vec3& u) { return Vec3(-u); };
  EXPECT_THROW(order_preservation_test<3>(id, Vec3(1, 1, 1), Vec3(1, 1, 1), 1.0), ConfigError);
  EXPECT_THROW(order_preservation_test<3>(id, Vec3(1, 1, 1), Vec3(2, 0, 2), 1.0), ConfigError);
}

TEST(TrajectoryCsv, SeventeenDigits) {
  const auto traj = integrate<1>(decay, Vec<1>(1.0), 1.0);
  std::ostringstream os;
  write_trajectory_csv<1>(os, traj);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,u1,v,normw");
  EXPECT_NE(s.find("0.36787944"), std::string::npos);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
