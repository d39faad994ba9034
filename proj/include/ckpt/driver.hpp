#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ckpt/model.hpp"
#include "ckpt/schedule.hpp"

namespace ckpt {

// Bank of d snapshot slots plus the initial state, which is held separately,
// never evicted, and restorable as slot kInitialSlot. Restores return
// bit-identical copies of what was stored.
class SnapshotStore {
 public:
  explicit SnapshotStore(int slots) : steps_(std::size_t(slots > 0 ? slots : 0), -1) {}

  void set_initial(const State& s);
  void store(int slot, const State& s);
  const State& restore(int slot) const;

  bool occupied(int slot) const { return steps_[std::size_t(slot)] >= 0; }
  int stored_step(int slot) const { return steps_[std::size_t(slot)]; }
  int slot_count() const { return int(steps_.size()); }
  int peak_slots() const { return peak_slots_; }
  std::size_t peak_bytes() const { return peak_bytes_; }

  // Bracketing snapshots around `step` for interpolation; the initial state
  // counts as a left bracket. Returns nullptr when no bracket exists.
  const State* left_bracket(int step) const;
  const State* right_bracket(int step) const;

 private:
  std::vector<State> slots_{};
  std::vector<int> steps_;  // -1 = empty
  State initial_{};
  bool have_initial_ = false;
  int used_ = 0;
  int peak_slots_ = 0;
  std::size_t bytes_ = 0;
  std::size_t peak_bytes_ = 0;
};

struct RunReport {
  std::int64_t primal_steps = 0;  // Advance executions plus taped forwards
  std::int64_t advances = 0;
  std::int64_t taped = 0;
  double primal_seconds = 0.0;
  double derivative_seconds = 0.0;
  double slowdown = 0.0;  // derivative wall time / primal wall time
  std::size_t peak_snapshot_bytes = 0;
  std::size_t peak_tape_bytes = 0;

  std::string to_text() const;
};

// A scalar functional J = sum_k g_k(state_k) accumulated along a trajectory
// s_0..s_l. The adjoint sweep injects dg_k/ds as a cotangent source whenever
// it passes state k.
class ScalarFunctional {
 public:
  virtual ~ScalarFunctional() = default;
  virtual double contribution(int k, const State& s, const ModelConfig& cfg) const = 0;
  virtual void add_cotangent(int k, const State& s, Field& bar, const ModelConfig& cfg) const = 0;
};

double evaluate_functional(const ScalarFunctional& j, const State& s0, int l,
                           const ModelConfig& cfg);

using StepObserver = std::function<void(const State&)>;

// l applications of `step`; the observer, when given, sees every new state
// (indices 1..l).
State run_forward(const State& s0, int l, const ModelConfig& cfg,
                  const StepObserver& observe = {});

// Propagates (state, tangent) pairs forward in lockstep.
std::pair<State, TangentState> run_tangent(const State& s0, const TangentState& ds0, int l,
                                           const ModelConfig& cfg);

// Executes a checkpointing schedule: Advance runs primal steps, Store/Restore
// use the snapshot bank, Adjoint runs the taped forward of one step and then
// its backward sweep, carrying the cotangent from bar_final at step l back to
// step 0. The result is schedule-independent for exact (non-interpolated)
// schedules. `functional`, when given, adds its per-state cotangent sources
// during the sweep (pass a zero bar_final for a pure functional gradient).
CotangentState run_adjoint(const State& s0, const CotangentState& bar_final, int l,
                           const ModelConfig& cfg, const Schedule& schedule,
                           const ScalarFunctional* functional = nullptr,
                           RunReport* report = nullptr);

struct InterpolatedAdjointResult {
  CotangentState xbar;
  bool has_error = false;
  double rel_error_vs_exact = 0.0;  // vs the exact (store-all) adjoint
};

// Executes a schedule that may contain interpolation-flagged adjoint steps:
// their input states are rebuilt by linear interpolation (in the step index)
// between the bracketing snapshots. With `compute_error` the exact adjoint is
// run as well and the relative 2-norm error of the gradient is reported.
InterpolatedAdjointResult run_adjoint_interpolated(const State& s0, const CotangentState& bar_final,
                                                   int l, const ModelConfig& cfg,
                                                   const Schedule& schedule, bool compute_error,
                                                   const ScalarFunctional* functional = nullptr,
                                                   RunReport* report = nullptr);

struct SlowdownPoint {
  int l = 0;
  double advances_ratio = 0.0;  // (advances + l) / l for the binomial schedule
  double wall_slowdown = 0.0;   // measured adjoint wall time / primal wall time
};

// Sweeps the binomial strategy with d snapshot slots over the given lengths.
std::vector<SlowdownPoint> slowdown_curve(const ModelConfig& cfg, int d,
                                          const std::vector<int>& l_list);

std::string slowdown_csv(const std::vector<SlowdownPoint>& points);

}  // namespace ckpt
