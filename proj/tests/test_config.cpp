#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "viosched/config.hpp"

using namespace viosched;

TEST(Config, ParsesSectionsAndDottedKeys) {
  Config cfg = Config::from_string(
      "top = 1\n"
      "[policy]\n"
      "chi_T = 70.5  # comment\n"
      "l_I = 40\n"
      "[monitor]\n"
      "mode = sim\n"
      "cores = 0,1\n");
  EXPECT_EQ(cfg.get_int("top", -1), 1);
  EXPECT_DOUBLE_EQ(cfg.get_double("policy.chi_T", 0), 70.5);
  EXPECT_EQ(cfg.get_int("policy.l_I", 0), 40);
  EXPECT_EQ(cfg.get_str("monitor.mode"), "sim");
  EXPECT_EQ(cfg.get_int_list("monitor.cores", {}), (std::vector<int>{0, 1}));
}

TEST(Config, LaterAssignmentsWinAndOverlay) {
  Config cfg = Config::from_string("a = 1\na = 2\n");
  EXPECT_EQ(cfg.get_int("a", 0), 2);
  Config other = Config::from_string("a = 3\nb = 4\n");
  cfg.overlay(other);
  EXPECT_EQ(cfg.get_int("a", 0), 3);
  EXPECT_EQ(cfg.get_int("b", 0), 4);
}

TEST(Config, MalformedLineReportsLineNumber) {
  try {
    Config::from_string("ok = 1\nbroken line\n");
    FAIL() << "expected MalformedRowError";
  } catch (const MalformedRowError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Config, TypeErrors) {
  Config cfg = Config::from_string("x = notanumber\nb = maybe\n");
  EXPECT_THROW(cfg.get_double("x", 0), ConfigError);
  EXPECT_THROW(cfg.get_int("x", 0), ConfigError);
  EXPECT_THROW(cfg.get_bool("b", false), ConfigError);
  EXPECT_DOUBLE_EQ(cfg.get_double("missing", 7.0), 7.0);
}

TEST(Config, SnapshotIsSortedAndStable) {
  Config cfg = Config::from_string("z = 1\na = 2\n");
  EXPECT_EQ(cfg.snapshot(), "a = 2\nz = 1\n");
}

TEST(Config, MissingFileThrows) {
  EXPECT_THROW(Config::from_file("/nonexistent/path.cfg"), FileNotFoundError);
}
