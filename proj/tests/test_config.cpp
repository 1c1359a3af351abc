#include "coopembed/config.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace coopembed;

namespace {

json default_json() {
  std::ifstream in(COOPEMBED_DEFAULT_CONFIG);
  return json::parse(in);
}

}  // namespace

TEST(Config, DefaultLoads) {
  const auto c = load_config(COOPEMBED_DEFAULT_CONFIG);
  EXPECT_EQ(c.n, 3);
  EXPECT_FALSE(c.tmpl.J.has_value());
  EXPECT_FALSE(c.embedding.Q.has_value());
  EXPECT_EQ(c.planar.e1, 3.4);
  EXPECT_EQ(c.pde.N, 401);
  EXPECT_EQ(c.run.seed, 1u);
  EXPECT_EQ(c.defect, Defect::none);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError); }

TEST(Config, RejectsUnknownKeys) {
  auto j = default_json();
  j["planar"]["lambda3"] = 4.0;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = default_json();
  j["extra"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, ValidationGates) {
  const auto bad = [](auto edit) {
    auto j = default_json();
    edit(j);
    return j;
  };
  EXPECT_THROW(config_from_json(bad([](json& j) { j["planar"]["lambda1"] = 2.0; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["planar"]["e1"] = 2.4; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["schema"] = 2; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["n"] = 4; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["template"]["margin"] = 1.0; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["template"]["J"] = -1.0; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["template"]["J"] = "manual"; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["run"]["rtol"] = 1e-14; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["pde"]["d"] = {1.0, 1.0}; })), ConfigError);
  EXPECT_THROW(config_from_json(bad([](json& j) { j["defect"] = "bogus"; })), ConfigError);
  EXPECT_NO_THROW(config_from_json(bad([](json& j) { j["template"]["J"] = 3.5; })));
}

TEST(Config, RoundTripThroughJson) {
  auto c = load_config(COOPEMBED_DEFAULT_CONFIG);
  c.tmpl.J = 3.25;
  c.defect = Defect::gamma_tail_flip;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(json_string(config_to_json(back)), json_string(config_to_json(c)));
  EXPECT_EQ(*back.tmpl.J, 3.25);
  EXPECT_EQ(back.defect, Defect::gamma_tail_flip);
}

TEST(Config, DefectNames) {
  for (Defect d : {Defect::none, Defect::small_q, Defect::gamma_tail_flip, Defect::noncooperative})
    EXPECT_EQ(parse_defect(defect_name(d)), d);
}

TEST(Config, EnvSeedOverride) {
  auto c = load_config(COOPEMBED_DEFAULT_CONFIG);
  ::setenv("COOPEMBED_SEED", "77", 1);
  apply_env_overrides(c);
  EXPECT_EQ(c.run.seed, 77u);
  ::setenv("COOPEMBED_SEED", "x7", 1);
  EXPECT_THROW(apply_env_overrides(c), ConfigError);
  ::unsetenv("COOPEMBED_SEED");
}

TEST(JsonWriter, SeventeenDigitsAndNulls) {
  json j = json::object();
  j["a"] = 0.1;
  j["b"] = 2.0;
  j["c"] = std::numeric_limits<double>::quiet_NaN();
  j["v"] = {1.5, 2.5};
  const std::string s = json_string(j);
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(s.find("2.0"), std::string::npos);
  EXPECT_NE(s.find("null"), std::string::npos);
  EXPECT_NE(s.find("[1.5, 2.5]"), std::string::npos);
  EXPECT_EQ(json::parse(s)["a"].get<double>(), 0.1);
}

TEST(BuildSystem, ResolvedConstants) {
  const auto sys = build_system(load_config(COOPEMBED_DEFAULT_CONFIG));
  // J from the independent grid scan in tests/oracle/derive_constants.py
  EXPECT_NEAR(*sys.config.tmpl.J, 3.2867201633564314, 1e-7);
  EXPECT_NEAR(sys.tmpl.nP(), 3 * sys.P(), 1e-12);
  EXPECT_GT(*sys.config.embedding.Q, 1.25);
  EXPECT_DOUBLE_EQ(sys.sigma(), 0.5 / 5.8);
  const auto j = resolved_json(sys);
  EXPECT_TRUE(j.contains("derived"));
  EXPECT_GT(j["derived"]["P"].get<double>(), 0.0);
}

TEST(BuildSystem, ResolvedConfigIsAFixpoint) {
  const auto sys = build_system(load_config(COOPEMBED_DEFAULT_CONFIG));
  const std::string first = json_string(resolved_json(sys));
  const auto again = build_system(config_from_json(json::parse(first)));
  EXPECT_EQ(json_string(resolved_json(again)), first);
}

TEST(BuildSystem, Defects) {
  auto c = load_config(COOPEMBED_DEFAULT_CONFIG);
  c.defect = Defect::small_q;
  const auto small = build_system(c);
  EXPECT_EQ(small.embedded.Q(), kSmallQ);
  c.defect = Defect::gamma_tail_flip;
  EXPECT_TRUE(build_system(c).tmpl.gamma().tail_flipped());
  c.defect = Defect::noncooperative;
  const auto rot = build_system(c);
  const Vec3 far(30.0, 1.0, -2.0);
  EXPECT_GT((rot.f(far) - rot.embedded(far)).norm(), 1.0);
  const Vec3 h = lift(Vec2(0.1, -0.3));  // theta = 0: no rotation
  EXPECT_EQ(rot.f(h), rot.embedded(h));
}
