#include <string>

#include <gtest/gtest.h>

#include "ahflow/config.hpp"

namespace {

using ahflow::Config;
using ahflow::ConfigError;

std::string error_of(const std::string& text) {
  try {
    Config::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsFillEveryKey) {
  const auto c = Config::parse("");
  EXPECT_EQ(c.integer("n"), 3);
  EXPECT_DOUBLE_EQ(c.real("h"), 0.05);
  EXPECT_EQ(c.text("flow.kind"), "deturck");
  EXPECT_TRUE(c.boolean("flow.normalized"));
  EXPECT_EQ(c.list("experiment.deltas"), (std::vector<double>{1e-3, 1e-4}));
  EXPECT_EQ(c.origin("n"), "default");
}

TEST(Config, SectionsCommentsAndOrigins) {
  const auto c = Config::parse(
      "# sample\n"
      "n = 4\n"
      "mu = 1.5   ; inline comment\n"
      "[flow]\n"
      "kind = ricci\n"
      "t_end = 2.5\n"
      "[experiment]\n"
      "levels = 0.1, 0.05\n");
  EXPECT_EQ(c.integer("n"), 4);
  EXPECT_DOUBLE_EQ(c.real("mu"), 1.5);
  EXPECT_EQ(c.text("flow.kind"), "ricci");
  EXPECT_DOUBLE_EQ(c.real("flow.t_end"), 2.5);
  EXPECT_EQ(c.list("experiment.levels").size(), 2u);
  EXPECT_EQ(c.origin("flow.kind"), "line 5");
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_EQ(error_of("n = 3\nn = 4\n"), "line 2: duplicate key 'n' (first set on line 1)");
  EXPECT_NE(error_of("[flow]\nspeed = 3\n").find("line 2: unknown key 'flow.speed'"), std::string::npos);
  EXPECT_NE(error_of("[nope]\n").find("unknown section [nope]"), std::string::npos);
  EXPECT_NE(error_of("h = fast\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("[flow]\nkind = heat\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("n = 3\njust words\n").find("line 2"), std::string::npos);
}

TEST(Config, RangeChecksDependOnDimension) {
  EXPECT_NE(error_of("mu = 2.5\n").find("mu in (0, n-1) = (0, 2)"), std::string::npos);
  EXPECT_EQ(error_of("n = 4\nmu = 2.5\n"), "");
  EXPECT_FALSE(error_of("[sector]\ntheta = 2\n").empty());
  EXPECT_FALSE(error_of("h = -0.1\n").empty());
}

TEST(Config, OverridesWinAndAreValidated) {
  auto c = Config::parse("[flow]\nt_end = 1\n");
  c.set("flow.t_end=7");
  EXPECT_DOUBLE_EQ(c.real("flow.t_end"), 7.0);
  EXPECT_EQ(c.origin("flow.t_end"), "--set");
  EXPECT_THROW(c.set("flow.t_end"), ConfigError);
  EXPECT_THROW(c.set("bogus=1"), ConfigError);
  EXPECT_THROW(c.set("mu=9"), ConfigError);
}

TEST(Config, OverridesAreValidatedTogether) {
  auto c = Config::parse("");
  // each assignment alone violates mu < n - 1, together they are fine
  c.apply({"mu=2.5", "n=4"});
  EXPECT_DOUBLE_EQ(c.real("mu"), 2.5);
  EXPECT_THROW(c.set("n=3"), ConfigError);
  // a rejected batch leaves the previous values in place
  EXPECT_EQ(c.integer("n"), 4);
  EXPECT_THROW(c.apply({"h=0.1", "mu=7"}), ConfigError);
  EXPECT_DOUBLE_EQ(c.real("h"), 0.05);
}

TEST(Config, EchoRoundTrips) {
  auto c = Config::parse("n = 4\n[sector]\nomega = 1\n");
  c.set("flow.segments=4");
  const auto text = c.echo();
  EXPECT_NE(text.find("omega = 1\n"), std::string::npos);
  EXPECT_NE(text.find("# default"), std::string::npos);
  // re-reading the echo sets every key explicitly, so only the default marks go away
  std::string unmarked = text;
  for (auto at = unmarked.find("  # default"); at != std::string::npos; at = unmarked.find("  # default"))
    unmarked.erase(at, 11);
  EXPECT_EQ(Config::parse(text).echo(), unmarked);
}

}  // namespace
