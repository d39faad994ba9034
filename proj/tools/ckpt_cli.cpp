#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "ckpt/apps.hpp"
#include "ckpt/config.hpp"
#include "ckpt/csv.hpp"
#include "ckpt/driver.hpp"
#include "ckpt/schedule.hpp"
#include "ckpt/validate.hpp"

using nlohmann::json;

namespace {

struct Cli {
  ckpt::RunConfig cfg;
  std::string config_path;
  std::vector<std::string> overrides;
  bool as_json = false;
  std::string out_dir_flag;

  void finalize() {
    if (!config_path.empty()) cfg.load_file(config_path);
    cfg.apply_overrides(overrides);
    if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  }

  // Writes `content` to out_dir/name when an output directory is set,
  // otherwise prints it to stdout.
  void emit(const std::string& name, const std::string& content) const {
    if (cfg.out_dir.empty()) {
      std::fputs(content.c_str(), stdout);
      return;
    }
    std::filesystem::create_directories(cfg.out_dir);
    std::filesystem::path p = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    f << content;
    std::printf("wrote %s\n", p.string().c_str());
  }
};

json to_json(const ckpt::CostReport& r) {
  return json{{"advances", r.advances},
              {"taped", r.taped},
              {"extra_avg", r.extra_avg},
              {"peak_slots", r.peak_slots},
              {"repetition", r.repetition}};
}

json to_json(const ckpt::RunReport& r) {
  return json{{"primal_steps", r.primal_steps},
              {"advances", r.advances},
              {"taped", r.taped},
              {"primal_seconds", r.primal_seconds},
              {"derivative_seconds", r.derivative_seconds},
              {"slowdown", r.slowdown},
              {"peak_snapshot_bytes", r.peak_snapshot_bytes},
              {"peak_tape_bytes", r.peak_tape_bytes}};
}

json to_json(const ckpt::DotProductReport& r) {
  return json{{"epsilon", r.epsilon},
              {"dd_dd", r.dd_dd},
              {"ydot_ydot", r.ydot_ydot},
              {"xbar_xdot", r.xbar_xdot},
              {"tangent_adjoint_rel", r.tangent_adjoint_rel},
              {"dd_tangent_rel", r.dd_tangent_rel}};
}

void print_report(const Cli& cli, const json& j, const std::string& text) {
  if (cli.as_json)
    std::printf("%s\n", j.dump().c_str());
  else
    std::fputs(text.c_str(), stdout);
}

int cmd_schedule(Cli& cli) {
  ckpt::Schedule s = cli.cfg.make_schedule();
  ckpt::CostReport stats = ckpt::schedule_stats(s);
  std::string text = ckpt::to_text(s);
  cli.emit("schedule.txt", text);
  print_report(cli, to_json(stats), stats.to_text());
  return 0;
}

int cmd_simulate(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::State s0 = ckpt::init_state(cli.cfg.model, cli.cfg.model.seed);
  auto t0 = std::chrono::steady_clock::now();
  ckpt::State sf = ckpt::run_forward(s0, cli.cfg.steps, cli.cfg.model);
  ckpt::RunReport report;
  report.primal_steps = cli.cfg.steps;
  report.primal_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cli.emit("final_state.csv", ckpt::field_csv(sf.t, sf.step));
  print_report(cli, to_json(report), report.to_text());
  return 0;
}

int cmd_tangent(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::State s0 = ckpt::init_state(cli.cfg.model, cli.cfg.model.seed);
  ckpt::TangentState ds0 = ckpt::normal_direction(cli.cfg.model.n, cli.cfg.direction_seed);
  auto t0 = std::chrono::steady_clock::now();
  auto [sf, ydot] = ckpt::run_tangent(s0, ds0, cli.cfg.steps, cli.cfg.model);
  ckpt::RunReport report;
  report.primal_steps = cli.cfg.steps;
  report.taped = cli.cfg.steps;
  report.derivative_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cli.emit("final_state.csv", ckpt::field_csv(sf.t, sf.step));
  cli.emit("final_tangent.csv", ckpt::field_csv(ydot.t, sf.step));
  print_report(cli, to_json(report), report.to_text());
  return 0;
}

int cmd_adjoint(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::State s0 = ckpt::init_state(cli.cfg.model, cli.cfg.model.seed);
  ckpt::CotangentState bar{ckpt::normal_direction(cli.cfg.model.n, cli.cfg.direction_seed).t};
  ckpt::Schedule sched = cli.cfg.make_schedule();
  ckpt::RunReport report;
  ckpt::CotangentState xbar =
      ckpt::run_adjoint(s0, bar, cli.cfg.steps, cli.cfg.model, sched, nullptr, &report);
  cli.emit("gradient.csv", ckpt::field_csv(xbar.t, 0));
  print_report(cli, to_json(report), report.to_text());
  return 0;
}

int cmd_dot_product(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::Schedule sched = cli.cfg.make_schedule();
  ckpt::DotProductReport r = ckpt::dot_product_test(cli.cfg.model, cli.cfg.steps,
                                                    cli.cfg.direction_seed, cli.cfg.eps, sched);
  print_report(cli, to_json(r), r.to_text());
  if (r.tangent_adjoint_rel > 1e-10) {
    std::fprintf(stderr, "error: dot-product self-check failed: tangent_adjoint_rel %.3g > 1e-10\n",
                 r.tangent_adjoint_rel);
    return 1;
  }
  return 0;
}

int cmd_eps_sweep(Cli& cli, const std::string& eps_list) {
  cli.cfg.model.validate();
  std::vector<double> eps;
  if (eps_list.empty()) {
    for (int k = 1; k <= 12; ++k) eps.push_back(std::pow(10.0, -k));
  } else {
    for (int v : ckpt::parse_int_list(eps_list)) eps.push_back(std::pow(10.0, -v));
  }
  auto rows = ckpt::eps_sweep(cli.cfg.model, cli.cfg.steps, cli.cfg.direction_seed, eps);
  cli.emit("eps_sweep.csv", ckpt::eps_sweep_csv(rows));
  return 0;
}

int cmd_fd_check(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::State s0 = ckpt::init_state(cli.cfg.model, cli.cfg.model.seed);
  ckpt::TransportFunctional f(cli.cfg.observation_row());
  ckpt::Field fd = ckpt::fd_gradient_oracle(f, s0, cli.cfg.steps, cli.cfg.model);
  ckpt::Field adj =
      ckpt::sensitivity_map(cli.cfg.model, cli.cfg.steps, cli.cfg.observation_row(),
                            cli.cfg.make_schedule());
  double scale = ckpt::norm_inf(fd);
  double err = ckpt::norm_inf(adj - fd) / (scale > 0.0 ? scale : 1.0);
  json j{{"max_component_rel_error", err}, {"scale", scale}};
  char buf[96];
  std::snprintf(buf, sizeof buf, "max_component_rel_error %.6g\nscale %.6g\n", err, scale);
  print_report(cli, j, buf);
  if (err > 1e-6) {
    std::fprintf(stderr, "error: fd-check self-check failed: %.3g > 1e-6\n", err);
    return 1;
  }
  return 0;
}

int cmd_bench(Cli& cli, const std::string& steps_list) {
  cli.cfg.model.validate();
  std::vector<int> ls = ckpt::parse_int_list(steps_list);
  auto points = ckpt::slowdown_curve(cli.cfg.model, cli.cfg.snapshots, ls);
  cli.emit("bench.csv", ckpt::slowdown_csv(points));
  return 0;
}

int cmd_sensitivity(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::Field map = ckpt::sensitivity_map(cli.cfg.model, cli.cfg.steps,
                                          cli.cfg.observation_row(), cli.cfg.make_schedule());
  cli.emit("sensitivity.csv", ckpt::field_csv(map, 0));
  return 0;
}

int cmd_assimilate(Cli& cli) {
  cli.cfg.model.validate();
  ckpt::TwinExperiment twin = ckpt::make_twin_observations(cli.cfg.model, cli.cfg.steps,
                                                           cli.cfg.model.seed, cli.cfg.row);
  ckpt::AssimilationResult r =
      ckpt::assimilate(cli.cfg.model, cli.cfg.steps, twin, cli.cfg.noise,
                       cli.cfg.direction_seed, cli.cfg.max_iters, cli.cfg.make_schedule());
  cli.emit("trace.csv", ckpt::assimilation_trace_csv(r));
  cli.emit("recovered_state.csv", ckpt::field_csv(r.recovered, 0));
  double j0 = r.trace.front().j;
  double jf = r.trace.back().j;
  json j{{"iterations", r.trace.back().iter},
         {"j_initial", j0},
         {"j_final", jf},
         {"reduction", j0 > 0.0 ? j0 / jf : 0.0},
         {"converged", r.converged},
         {"line_search_failed", r.line_search_failed},
         {"spot_checks_run", r.spot_checks_run},
         {"spot_checks_passed", r.spot_checks_passed}};
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "iterations %d\nj_initial %.12g\nj_final %.12g\nconverged %d\n"
                "line_search_failed %d\nspot_checks %d/%d\n",
                r.trace.back().iter, j0, jf, r.converged ? 1 : 0, r.line_search_failed ? 1 : 0,
                r.spot_checks_passed, r.spot_checks_run);
  print_report(cli, j, buf);
  return r.converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  CLI::App app{"Checkpointed tangent/adjoint differentiation of an unsteady tracer model"};
  app.require_subcommand(1);
  app.add_option("--config", cli.config_path, "flat key=value config file");
  app.add_option("--set", cli.overrides, "override a config key (key=value), repeatable");
  app.add_flag("--json", cli.as_json, "print reports as single-line JSON");
  app.add_option("--out", cli.out_dir_flag, "directory for output files (default: stdout)");

  // Common sugar: forwarded into the config as overrides so that the same
  // validation and precedence (file, then --set, then flags) applies.
  auto add_override_opt = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                              const std::string& help) {
    sub->add_option_function<std::string>(
           flag, [&cli, key](const std::string& v) { cli.overrides.push_back(key + "=" + v); },
           help)
        ->expected(1);
  };
  // Let --set/--out/--json appear after the subcommand name too.
  auto sub = [&](CLI::App& parent, const char* name, const char* help) {
    CLI::App* s = parent.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  CLI::App* sc_schedule = sub(app, "schedule", "print a schedule and its cost report");
  add_override_opt(sc_schedule, "--steps", "steps", "number of time steps");
  add_override_opt(sc_schedule, "--snapshots", "snapshots", "snapshot slots");
  add_override_opt(sc_schedule, "--strategy", "strategy",
                   "storeall | binomial | multilevel:4,4,4 | interp:8");

  CLI::App* sc_sim = sub(app, "simulate", "run the primal model");
  add_override_opt(sc_sim, "--steps", "steps", "number of time steps");

  CLI::App* sc_tan = sub(app, "tangent", "run the tangent model");
  add_override_opt(sc_tan, "--steps", "steps", "number of time steps");
  add_override_opt(sc_tan, "--direction-seed", "direction_seed", "seed of the input direction");

  CLI::App* sc_adj = sub(app, "adjoint", "run the checkpointed adjoint");
  add_override_opt(sc_adj, "--steps", "steps", "number of time steps");
  add_override_opt(sc_adj, "--strategy", "strategy", "checkpointing strategy");
  add_override_opt(sc_adj, "--snapshots", "snapshots", "snapshot slots");
  add_override_opt(sc_adj, "--direction-seed", "direction_seed", "seed of the output weight");

  CLI::App* sc_val = sub(app, "validate", "derivative correctness checks");
  sc_val->require_subcommand(1);
  CLI::App* sc_dot = sub(*sc_val, "dot-product", "three-way dot product test");
  add_override_opt(sc_dot, "--steps", "steps", "number of time steps");
  add_override_opt(sc_dot, "--eps", "eps", "divided-difference step");
  add_override_opt(sc_dot, "--direction-seed", "direction_seed", "seed of the direction");
  add_override_opt(sc_dot, "--strategy", "strategy", "checkpointing strategy");
  add_override_opt(sc_dot, "--snapshots", "snapshots", "snapshot slots");
  CLI::App* sc_eps = sub(*sc_val, "eps-sweep", "divided-difference error vs epsilon");
  std::string eps_list;
  sc_eps->add_option("--eps-exponents", eps_list, "comma list of -log10(eps), default 1..12");
  add_override_opt(sc_eps, "--steps", "steps", "number of time steps");
  CLI::App* sc_fd = sub(*sc_val, "fd-check", "adjoint gradient vs central differences");
  add_override_opt(sc_fd, "--steps", "steps", "number of time steps");
  add_override_opt(sc_fd, "--row", "row", "functional row");
  add_override_opt(sc_fd, "--snapshots", "snapshots", "snapshot slots");

  CLI::App* sc_bench = sub(app, "bench", "binomial slowdown curve over step counts");
  std::string steps_list = "16,32,64,128,256";
  sc_bench->add_option("--steps-list", steps_list, "comma list of step counts");
  add_override_opt(sc_bench, "--snapshots", "snapshots", "snapshot slots");

  CLI::App* sc_sens = sub(app, "sensitivity", "transport sensitivity map");
  add_override_opt(sc_sens, "--steps", "steps", "number of time steps");
  add_override_opt(sc_sens, "--row", "row", "transport row");

  CLI::App* sc_assim = sub(app, "assimilate", "twin-experiment assimilation");
  add_override_opt(sc_assim, "--steps", "steps", "number of time steps");
  add_override_opt(sc_assim, "--noise", "noise", "relative noise amplitude");
  add_override_opt(sc_assim, "--max-iters", "max_iters", "descent iteration cap");

  CLI11_PARSE(app, argc, argv);

  try {
    cli.finalize();
    if (sc_schedule->parsed()) return cmd_schedule(cli);
    if (sc_sim->parsed()) return cmd_simulate(cli);
    if (sc_tan->parsed()) return cmd_tangent(cli);
    if (sc_adj->parsed()) return cmd_adjoint(cli);
    if (sc_val->parsed()) {
      if (sc_dot->parsed()) return cmd_dot_product(cli);
      if (sc_eps->parsed()) return cmd_eps_sweep(cli, eps_list);
      if (sc_fd->parsed()) return cmd_fd_check(cli);
    }
    if (sc_bench->parsed()) return cmd_bench(cli, steps_list);
    if (sc_sens->parsed()) return cmd_sensitivity(cli);
    if (sc_assim->parsed()) return cmd_assimilate(cli);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
