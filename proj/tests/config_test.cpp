#include <gpm/config.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace gpm;

TEST_CASE("config files parse dotted keys, comments, and whitespace") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "gpm_config_basic.cfg").string();
  std::ofstream(path) << "# comment line\n"
                      << "penalty.lambda = 0.25\n"
                      << "train.max_iters=500   # trailing comment\n"
                      << "\n"
                      << "penalty.kind=mcp\n";
  FlatConfig cfg = FlatConfig::from_file(path);
  CHECK(cfg.get_double("penalty.lambda", 0) == 0.25);
  CHECK(cfg.get_int("train.max_iters", 0) == 500);
  CHECK(cfg.get_string("penalty.kind", "") == "mcp");
  CHECK(cfg.get_double("absent.key", 7.5) == 7.5);
}

TEST_CASE("command-line overrides win") {
  FlatConfig base;
  base.set("penalty.lambda", "0.3");
  base.set("train.lr", "0.01");
  FlatConfig overrides;
  overrides.set("penalty.lambda", "0.9");
  base.merge_overrides(overrides);
  CHECK(base.get_double("penalty.lambda", 0) == 0.9);
  CHECK(base.get_double("train.lr", 0) == 0.01);
}

TEST_CASE("unknown keys are rejected by name") {
  FlatConfig cfg;
  cfg.set("penalty.lambda", "0.1");
  cfg.set("penalti.lambda", "0.1");  // typo
  try {
    cfg.reject_unknown({"penalty.lambda"});
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("penalti.lambda") != std::string::npos);
  }
}

TEST_CASE("typed getters validate their input") {
  FlatConfig cfg;
  cfg.set("a", "not-a-number");
  cfg.set("b", "yes");
  CHECK_THROWS_AS(cfg.get_double("a", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("a", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
  cfg.set("c", "true");
  CHECK(cfg.get_bool("c", false));
}

TEST_CASE("malformed lines carry their line number") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "gpm_config_bad.cfg").string();
  std::ofstream(path) << "penalty.lambda=0.1\nthis line has no equals\n";
  try {
    FlatConfig::from_file(path);
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
