#include "coopembed/verifier.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace coopembed;

namespace {

const BuiltSystem& sys() {
  static const BuiltSystem s = build_system(load_config(COOPEMBED_DEFAULT_CONFIG));
  return s;
}

std::vector<Box<3>> big_box() { return {Box<3>::cube(3, 2 * sys().P())}; }

}  // namespace

TEST(Cooperativity, EmbeddedAndTemplatePass) {
  const auto f = check_cooperativity<3>(sys().f, big_box(), 10000, 1);
  EXPECT_TRUE(f.passed);
  EXPECT_GT(f.min_entry, 0.0);
  EXPECT_EQ(f.samples, 10000u);
  const auto m = check_cooperativity<3>(sys().tmpl, big_box(), 10000, 1);
  EXPECT_TRUE(m.passed);
}

TEST(Cooperativity, RotationFailsWithLocation) {
  const auto rot = [](const Vec3& u) { return Vec3(u[1], -u[0], 0.0); };
  const auto r = check_cooperativity<3>(rot, big_box(), 10000, 1);
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.min_entry, -1.0, 1e-8);
  EXPECT_EQ(r.row, 1);
  EXPECT_EQ(r.col, 0);
  EXPECT_TRUE(big_box()[0].contains(r.argmin));
}

TEST(Cooperativity, DeterministicAcrossThreadCounts) {
  const auto a = check_cooperativity<3>(sys().f, big_box(), 10000, 5, 1);
  const auto b = check_cooperativity<3>(sys().f, big_box(), 10000, 5, 4);
  EXPECT_EQ(a.min_entry, b.min_entry);
  EXPECT_EQ(a.argmin, b.argmin);
  EXPECT_THROW(check_cooperativity<3>(sys().f, big_box(), 100, 5), ConfigError);
}

TEST(Basin, SmallRun) {
  BasinOptions o;
  o.n_ics = 10;
  o.h_ics = 5;
  o.half_width = 2 * sys().P();
  o.seed = 3;
  const std::vector<Vec3> cand{Vec3::Constant(sys().P()), Vec3::Constant(-sys().P()), sys().planar_rest()};
  const auto r = basin_experiment(sys().f, cand, o);
  EXPECT_TRUE(r.passed());
  ASSERT_EQ(r.counts.size(), 3u);
  EXPECT_EQ(r.counts[0], 10u);
  EXPECT_EQ(r.counts[1], 10u);
  EXPECT_EQ(r.counts[2], 5u);
  EXPECT_THROW(basin_experiment(sys().f, {cand[0]}, o), ConfigError);
}

TEST(Continuum, DefaultPasses) {
  const auto l = lambda_samples(1.0, 2.0, 11);
  ASSERT_EQ(l.size(), 11u);
  EXPECT_EQ(l.front(), 1.0);
  EXPECT_EQ(l.back(), 2.0);
  const auto r = continuum_check(sys().f, l, sys().sigma());
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.max_residual, 5e-4);
  for (double q : r.ratios) {
    EXPECT_GE(q, 3.4);
    EXPECT_LE(q, 4.6);
  }
  EXPECT_GE(r.min_distance_ratio, 0.9);
}

TEST(Continuum, OffArcSampleFails) {
  const auto r = continuum_check(sys().f, {1.5, 2.5}, sys().sigma());
  EXPECT_FALSE(r.residuals_ok);
  EXPECT_LE(r.residuals[0], 5e-4);
  EXPECT_GT(r.residuals[1], 5e-4);
}

TEST(Continuum, SingleSampleIsResidualOnly) {
  const auto r = continuum_check(sys().f, {1.5}, sys().sigma());
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(std::isinf(r.min_distance_ratio));
  EXPECT_THROW(continuum_check(sys().f, {}, sys().sigma()), ConfigError);
}

TEST(Checks, StandaloneRecordsPass) {
  EXPECT_TRUE(checks::theta_sets(ThetaSpec(3), 1).passed);
  EXPECT_TRUE(checks::partition_of_unity(sys().config.partition(), 1).passed);
  EXPECT_TRUE(checks::gamma_profile(sys().tmpl.gamma()).passed);
  EXPECT_TRUE(checks::orthogonal_split(sys().tmpl, 1).passed);
  EXPECT_TRUE(checks::planar_dissipation(sys().planar).passed);
  EXPECT_FALSE(checks::gamma_profile(sys().tmpl.gamma().with_flipped_tail()).passed);
}

TEST(ExpectedFailures, CatalogShape) {
  EXPECT_TRUE(expected_failures(Defect::none).empty());
  const auto& names = check_names();
  EXPECT_EQ(names.size(), 18u);
  std::set<std::string> all(names.begin(), names.end());
  for (Defect d : {Defect::small_q, Defect::gamma_tail_flip, Defect::noncooperative}) {
    const auto e = expected_failures(d);
    EXPECT_FALSE(e.empty());
    for (const auto& n : e) EXPECT_TRUE(all.count(n)) << n;
  }
}

TEST(Suite, DefaultPassesAndIsReproducible) {
  const auto cfg = load_config(COOPEMBED_DEFAULT_CONFIG);
  const auto a = run_full_suite(cfg);
  EXPECT_EQ(a.verdict(), "pass");
  ASSERT_EQ(a.checks.size(), check_names().size());
  for (std::size_t k = 0; k < a.checks.size(); ++k) EXPECT_EQ(a.checks[k].name, check_names()[k]);
  SuiteOptions o;
  o.jobs = 1;
  const auto b = run_full_suite(cfg, o);
  EXPECT_EQ(json_string(a.to_json()), json_string(b.to_json()));
  // every check reports its tolerance and comparison
  for (const auto& c : a.to_json()["checks"]) {
    EXPECT_TRUE(c.contains("tol"));
    EXPECT_FALSE(c["pass_if"].get<std::string>().empty());
  }
}

TEST(Suite, SmallQPinpointsCooperativityFailure) {
  auto cfg = load_config(COOPEMBED_DEFAULT_CONFIG);
  cfg.embedding.Q = 0.01;
  const auto sys2 = build_system(cfg);
  const auto rec = checks::cooperativity_record("embedded_cooperativity", sys2.f, sys2.P(), 10000, 2, 0);
  EXPECT_FALSE(rec.passed);
  EXPECT_LT(rec.value, 0.0);
  ASSERT_TRUE(rec.argmin.has_value());
  EXPECT_EQ(rec.argmin->size(), 3u);
}

TEST(Suite, ConfigErrorBeforeAnyRun) {
  auto cfg = load_config(COOPEMBED_DEFAULT_CONFIG);
  cfg.planar.e1 = cfg.planar.lambda2 + 2 * cfg.planar.delta_r;
  int calls = 0;
  SuiteOptions o;
  o.on_check = [&](const CheckRecord&) { ++calls; };
  EXPECT_THROW(run_full_suite(cfg, o), ConfigError);
  EXPECT_EQ(calls, 0);
}

TEST(Report, JsonShape) {
  VerificationReport r;
  r.config = json::object();
  CheckRecord c;
  c.name = "x";
  c.passed = false;
  c.value = 1.0;
  c.tol = 0.5;
  c.pass_if = "value <= tol";
  c.wall_seconds = 0.25;
  r.checks.push_back(c);
  const auto j = r.to_json(true);
  EXPECT_EQ(j["verdict"], "fail");
  EXPECT_EQ(j["checks"][0]["status"], "fail");
  EXPECT_TRUE(j["checks"][0].contains("wall_time"));
  EXPECT_FALSE(r.to_json(false)["checks"][0].contains("wall_time"));
  r.aborted = true;
  r.abort_reason = "why";
  EXPECT_EQ(r.to_json()["verdict"], "aborted");
  EXPECT_EQ(r.failed_checks(), std::vector<std::string>{"x"});
}
