#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ckpt/model.hpp"
#include "ckpt/schedule.hpp"

namespace ckpt {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value run configuration: the model parameters plus the schedule
// strategy, step count, seeds and output knobs. Parsed from files of
// "key = value" lines ('#' starts a comment) and from "key=value" override
// strings; unknown keys and malformed values are rejected with the offending
// key and line.
struct RunConfig {
  ModelConfig model;
  int steps = 10;
  std::string strategy = "binomial";  // storeall | binomial | multilevel | interp
  int snapshots = 5;
  std::vector<int> fanouts;
  int stride = 1;
  int row = -1;  // -1 = middle row
  double eps = 1e-7;
  double noise = 0.05;
  int max_iters = 200;
  std::uint64_t direction_seed = 1;
  std::string out_dir;

  // Applies one key=value pair; `where` names the source for error messages.
  void apply(const std::string& key, const std::string& value, const std::string& where);

  void load_file(const std::string& path);
  void apply_overrides(const std::vector<std::string>& assignments);

  int observation_row() const { return row >= 0 ? row : model.n / 2; }

  // Builds the schedule selected by `strategy` for `steps` time steps.
  // Accepts inline strategy arguments: "multilevel:4,4,4", "binomial:9",
  // "interp:8".
  Schedule make_schedule() const;

  std::string to_text() const;
};

std::vector<int> parse_int_list(const std::string& text);

}  // namespace ckpt
