#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ckpt/config.hpp"

using namespace ckpt;

namespace {

std::string write_temp(const std::string& content) {
  std::string path = "ckpt_test_config.txt";
  std::ofstream f(path);
  f << content;
  return path;
}

}  // namespace

TEST_CASE("config file: full round trip") {
  std::string path = write_temp(
      "# model\n"
      "n = 9\n"
      "dt = 0.004\n"
      "kappa = 0.03\n"
      "alpha = 0.5   # coupling\n"
      "forcing = 0.8\n"
      "solver = sor\n"
      "solver_tol = 1e-11\n"
      "solver_maxit = 4000\n"
      "tangent_mode = straightforward\n"
      "seed = 12\n"
      "\n"
      "steps = 40\n"
      "strategy = multilevel\n"
      "fanouts = 4,10\n"
      "row = 3\n"
      "eps = 1e-6\n"
      "noise = 0.1\n"
      "max_iters = 77\n"
      "direction_seed = 9\n");
  RunConfig cfg;
  cfg.load_file(path);
  std::remove(path.c_str());

  CHECK(cfg.model.n == 9);
  CHECK(cfg.model.dt == 0.004);
  CHECK(cfg.model.kappa == 0.03);
  CHECK(cfg.model.alpha == 0.5);
  CHECK(cfg.model.solver == SolverKind::Sor);
  CHECK(cfg.model.tangent_mode == TangentMode::Straightforward);
  CHECK(cfg.model.seed == 12);
  CHECK(cfg.steps == 40);
  CHECK(cfg.fanouts == std::vector<int>{4, 10});
  CHECK(cfg.row == 3);
  CHECK(cfg.max_iters == 77);

  Schedule s = cfg.make_schedule();
  CHECK(s.total_steps == 40);
  CHECK(validate_schedule(s).valid);
}

TEST_CASE("config file: errors carry the key and the line") {
  SUBCASE("unknown key") {
    std::string path = write_temp("n = 9\nkapa = 0.1\n");
    RunConfig cfg;
    try {
      cfg.load_file(path);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find("kapa") != std::string::npos);
      CHECK(msg.find(":2") != std::string::npos);
    }
    std::remove(path.c_str());
  }
  SUBCASE("bad number") {
    std::string path = write_temp("dt = fast\n");
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.load_file(path), ConfigError);
    std::remove(path.c_str());
  }
  SUBCASE("missing equals sign") {
    std::string path = write_temp("n 9\n");
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.load_file(path), ConfigError);
    std::remove(path.c_str());
  }
  SUBCASE("missing file") {
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.load_file("does_not_exist.txt"), ConfigError);
  }
}

TEST_CASE("config overrides") {
  RunConfig cfg;
  cfg.apply_overrides({"steps=64", "snapshots=9", "solver=pcg"});
  CHECK(cfg.steps == 64);
  CHECK(cfg.snapshots == 9);
  CHECK_THROWS_AS(cfg.apply_overrides({"bogus=1"}), ConfigError);
  CHECK_THROWS_AS(cfg.apply_overrides({"steps"}), ConfigError);
  CHECK_THROWS_AS(cfg.apply_overrides({"solver=cg"}), ConfigError);
  CHECK_THROWS_AS(cfg.apply_overrides({"tangent_mode=forward"}), ConfigError);
}

TEST_CASE("strategy selection, including inline arguments") {
  RunConfig cfg;
  cfg.steps = 64;

  cfg.strategy = "storeall";
  CHECK(schedule_stats(cfg.make_schedule()).advances == 63);

  cfg.strategy = "binomial";
  cfg.snapshots = 9;
  CHECK(schedule_stats(cfg.make_schedule()).advances == 126);

  cfg.strategy = "binomial:5";
  CHECK(schedule_stats(cfg.make_schedule()).advances == optimal_cost(64, 5).advances);

  cfg.strategy = "multilevel:4,4,4";
  CostReport r = schedule_stats(cfg.make_schedule());
  CHECK(r.extra_avg == 2.25);
  CHECK(r.peak_slots == 9);

  cfg.strategy = "interp:8";
  CHECK(cfg.make_schedule().total_steps == 64);

  cfg.strategy = "multilevel";
  cfg.fanouts.clear();
  CHECK_THROWS_AS(cfg.make_schedule(), ConfigError);

  cfg.strategy = "zigzag";
  CHECK_THROWS_AS(cfg.make_schedule(), ConfigError);
}

TEST_CASE("parse_int_list") {
  CHECK(parse_int_list("4,4,4") == std::vector<int>{4, 4, 4});
  CHECK(parse_int_list("10") == std::vector<int>{10});
  CHECK_THROWS_AS(parse_int_list("4,,4"), ConfigError);
  CHECK_THROWS_AS(parse_int_list("4,x"), ConfigError);
}

TEST_CASE("config to_text is stable") {
  RunConfig cfg;
  std::string a = cfg.to_text();
  std::string b = cfg.to_text();
  CHECK(a == b);
  CHECK(a.find("strategy = binomial") != std::string::npos);
}
