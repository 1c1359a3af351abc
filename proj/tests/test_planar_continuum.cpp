#include "coopembed/ode.hpp"
#include "coopembed/planar_continuum.hpp"
#include "coopembed/roots.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace coopembed;

namespace {

const PartitionSpec kSpec(1.0, 2.0, 0.2, 0.1);
const PlanarField kField(kSpec, 3.4);

}  // namespace

TEST(Phi, Examples) {
  for (double lambda : {1.0, 1.3, 2.0}) {
    EXPECT_EQ(phi(lambda, 0.0), Vec2(lambda, 0.0));
    for (double x = -kHalfPi; x <= kHalfPi; x += 0.05) {
      EXPECT_NEAR(phi(lambda, x).norm(), lambda, 1e-15);
      EXPECT_EQ(phi(2 * lambda, x), 2.0 * phi(lambda, x));
    }
  }
  EXPECT_THROW(phi(1.0, 2.0), DomainError);
  EXPECT_THROW(phi(0.0, 0.0), DomainError);
  EXPECT_THROW(phi(-1.0, 0.0), DomainError);
}

TEST(Phi, DerivativesMatchDifferences) {
  const double h = 1e-5;
  for (double x = -1.5; x <= 1.5; x += 0.1) {
    const Vec2 d1 = (phi(1.7, x + h) - phi(1.7, x - h)) / (2 * h);
    const Vec2 d2 = (phi(1.7, x + h) - 2 * phi(1.7, x) + phi(1.7, x - h)) / (h * h);
    EXPECT_LE((phi_d(1.7, x) - d1).norm(), 1e-9);
    EXPECT_LE((phi_dd(1.7, x) - d2).norm(), 1e-5);
  }
}

TEST(PhiDD, Examples) {
  EXPECT_EQ(phi_dd(1.5, 0.0), Vec2(-1.5, 0.0));
  const Vec2 top = phi_dd(1.5, kHalfPi);
  EXPECT_NEAR(top[0], 1.5 * std::sin(1.0), 1e-15);
  EXPECT_NEAR(top[1], -1.5 * std::cos(1.0), 1e-15);
}

TEST(PolarInverse, RoundTrip) {
  const auto a = polar_inverse(Vec2(1.5, 0.0));
  EXPECT_EQ(a.lambda, 1.5);
  EXPECT_EQ(a.x, 0.0);
  for (double lambda = 1.0; lambda <= 2.0; lambda += 0.125)
    for (double x = -1.55; x <= 1.55; x += 0.1) {
      const auto p = polar_inverse(phi(lambda, x));
      EXPECT_NEAR(p.lambda, lambda, 1e-14);
      EXPECT_NEAR(p.x, x, 1e-7);  // asin is ill-conditioned near the ends
    }
  EXPECT_THROW(polar_inverse(Vec2(0.0, 0.0)), DomainError);
  EXPECT_THROW(polar_inverse(Vec2(-1.0, 0.1)), DomainError);
  EXPECT_THROW(polar_inverse(Vec2(std::cos(1.1), std::sin(1.1))), DomainError);
}

TEST(Alpha, Examples) {
  EXPECT_EQ(alpha(Vec2(1.5, 0.0), kSpec), Vec2(1.5, 0.0));
  for (double lambda = 1.0; lambda <= 2.0; lambda += 0.25)
    for (double x = -kHalfPi; x <= kHalfPi; x += 0.1)
      EXPECT_LE((alpha(phi(lambda, x), kSpec) + phi_dd(lambda, x)).norm(), 1e-14);
  EXPECT_THROW(alpha(Vec2(5.0, 0.0), kSpec), DomainError);
}

TEST(GPlanar, EqualsAlphaOnA) {
  for (double lambda = 1.0; lambda <= 2.0; lambda += 0.1)
    for (double x = -kHalfPi; x <= kHalfPi; x += 0.05) {
      const Vec2 u = phi(lambda, x);
      EXPECT_EQ(kField(u), alpha(u, kSpec));
    }
}

TEST(GPlanar, LinearOutside) {
  const CounterRng rng(6);
  const double R = kField.region_radius();
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const double r = R * (1.0 + rng.uniform(2 * k, 1e-6, 3.0));
    const double t = rng.uniform(2 * k + 1, -kPi, kPi);
    const Vec2 u(r * std::cos(t), r * std::sin(t));
    EXPECT_EQ(kField(u), kField.rest_point() - u);
  }
}

TEST(GPlanar, AxisInvariant) {
  for (double u1 = -20.0; u1 <= 20.0; u1 += 0.013) EXPECT_EQ(kField(Vec2(u1, 0.0))[1], 0.0) << u1;
  IntegrateOptions o;
  for (double u1 : {-15.0, 0.3, 1.5, 2.2, 9.0}) {
    const auto traj = integrate<2>(kField, Vec2(u1, 0.0), 50.0, o);
    for (const auto& s : traj.states) ASSERT_LE(std::abs(s[1]), 1e-9);
  }
}

TEST(GPlanar, NoZerosOffAxisInCollar) {
  // On the rim of A' rho1 = rho3 = 0 and g = (1,0). Within 1/745 of a
  // collar width from the rim rho1 ~ exp(-1/t) underflows, so g2 > 0 is
  // only representable away from that band; g itself never vanishes.
  const double tr = kSpec.delta_r / 700.0, ta = kSpec.delta_theta / 700.0;
  const CounterRng rng(10);
  int tested = 0, in_band = 0;
  for (std::uint64_t k = 0; tested < 10000; ++k) {
    const double r = rng.uniform(2 * k, kSpec.lambda1 - kSpec.delta_r, kSpec.lambda2 + kSpec.delta_r);
    const double a = rng.uniform(2 * k + 1, -1.0 - kSpec.delta_theta, 1.0 + kSpec.delta_theta);
    if (std::abs(a) < 1e-9) continue;
    ++tested;
    const Vec2 g = kField(Vec2(r * std::cos(a), r * std::sin(a)));
    EXPECT_GT(g.norm(), 0.0);
    const bool band = r < kSpec.lambda1 - kSpec.delta_r + tr || r > kSpec.lambda2 + kSpec.delta_r - tr ||
                      std::abs(a) > 1.0 + kSpec.delta_theta - ta;
    if (band) {
      ++in_band;
      continue;
    }
    EXPECT_GT(std::abs(g[1]), 0.0) << r << " " << a;
  }
  EXPECT_LT(in_band, 50);
}

TEST(GPlanar, Validation) {
  EXPECT_THROW(PlanarField(kSpec, 2.4), ConfigError);
  EXPECT_THROW(PlanarField(kSpec, 2.0), ConfigError);
  EXPECT_THROW(kField(Vec2(std::nan(""), 0.0)), DomainError);
}

TEST(Dissipation, Examples) {
  const double e1 = kField.e1();
  const auto r = outward_dissipation_check(kField, 2 * e1);
  EXPECT_DOUBLE_EQ(Vec2(2 * e1, 0).dot(kField(Vec2(2 * e1, 0))), -2 * e1 * e1);
  EXPECT_LT(r.max_value, 0.0);
  for (double factor : {1.0, 1.5, 2.0, 4.0}) {
    const double radius = factor * kField.region_radius();
    EXPECT_LT(outward_dissipation_check(kField, radius).max_value, 0.0) << radius;
  }
  EXPECT_THROW(outward_dissipation_check(kField, 0.9 * e1), ConfigError);
}

TEST(PlanarFlow, UniqueEquilibrium) {
  const Box<2> box = Box<2>::cube(2, 2 * kField.e1());
  CensusOptions o;
  o.seeds_per_axis = 60;
  const auto census = newton_census<2>(kField, box, {box}, o);
  ASSERT_EQ(census.isolated.size(), 1u);
  EXPECT_FALSE(census.degenerate_set());
  EXPECT_LE((census.isolated[0].point - kField.rest_point()).norm(), 1e-10);
}

TEST(PlanarFlow, ConvergesToRestPoint) {
  const CounterRng rng(11);
  const double hw = 2 * kField.e1();
  for (std::uint64_t k = 0; k < 40; ++k) {
    const Vec2 u0(rng.uniform(2 * k, -hw, hw), rng.uniform(2 * k + 1, -hw, hw));
    const auto traj = integrate<2>(kField, u0, 500.0);
    EXPECT_LE((traj.final_state() - kField.rest_point()).norm(), 1e-6) << u0.transpose();
  }
}
