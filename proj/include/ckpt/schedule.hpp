#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ckpt {

// Slot index that refers to the initial state (step 0). The initial state is
// held outside the snapshot slots and can always be restored at no cost.
inline constexpr int kInitialSlot = -1;

enum class ActionKind : std::uint8_t { Advance, Store, Restore, Adjoint, Done };

// One instruction of a checkpointing schedule. A schedule is executed against
// a "current state" plus a bank of snapshot slots:
//   Advance {from,to}  run primal steps from..to-1 (requires current == from)
//   Store {slot,step}  copy current state into slot (requires current == step)
//   Restore {slot}     current state becomes the slot's content (-1 = initial)
//   Adjoint {step}     taped forward of this one step, then its backward sweep
//                      (requires current == step unless `interpolated`)
//   Done               end of stream
struct ScheduleAction {
  ActionKind kind = ActionKind::Done;
  int from = 0;
  int to = 0;
  int slot = 0;
  int step = 0;
  bool interpolated = false;

  static ScheduleAction advance(int from, int to) {
    return {ActionKind::Advance, from, to, 0, 0, false};
  }
  static ScheduleAction store(int slot, int step) {
    return {ActionKind::Store, 0, 0, slot, step, false};
  }
  static ScheduleAction restore(int slot) {
    return {ActionKind::Restore, 0, 0, slot, 0, false};
  }
  static ScheduleAction adjoint(int step, bool interp = false) {
    return {ActionKind::Adjoint, 0, 0, 0, step, interp};
  }
  static ScheduleAction done() { return {}; }

  bool operator==(const ScheduleAction&) const = default;
};

struct Schedule {
  std::vector<ScheduleAction> actions;
  int total_steps = 0;  // l: adjoint steps l-1 .. 0 appear exactly once each
  int slot_budget = 0;  // d: store slots are in [0, d)
};

// Cost analytics of a schedule (or of the optimal-cost recurrence).
// `advances` counts primal steps executed by Advance actions only; the taped
// forward inside each Adjoint action is counted in `taped` (= l). The average
// number of duplicate executions per time step is advances / l, since every
// step is taped exactly once.
struct CostReport {
  std::int64_t advances = 0;
  std::int64_t taped = 0;
  double extra_avg = 0.0;  // advances / l
  int peak_slots = 0;      // distinct snapshot slots written
  int repetition = 0;      // smallest t with eta(d, t) >= l

  std::string to_text() const;
};

struct ValidationReport {
  bool valid = true;
  std::string rule;    // first violated rule, empty when valid
  std::string detail;  // action index and context
  int peak_slots = 0;

  std::string to_text() const;
};

/// eta(d, t) = (d+t)! / (d! t!), the maximal number of time steps reversible
/// with d snapshots when every step may be executed at most t+1 times.
/// Computed in the multiplicative form; throws std::overflow_error if the
/// value does not fit in 64 bits.
std::uint64_t eta(int d, int t);

/// Smallest t with eta(d, t) >= l.
int repetition_number(std::int64_t l, int d);

/// Minimal Advance count for reversing l steps with d slots, in closed form:
/// t*l - eta(d+1, t-1) with t = repetition_number(l, d). Valid for d >= 1.
std::int64_t closed_form_advances(std::int64_t l, int d);

/// Dynamic-programming optimum: the minimal number of Advance-executed primal
/// steps needed to reverse l steps with a budget of d snapshot slots.
/// Recurrence: the first split advances k steps and stores step k, the tail
/// is reversed with one slot fewer, the head with the full budget again:
///   Cost(l, d) = min_{1<=k<l} [ k + Cost(l-k, d-1) + Cost(k, d) ]
/// with Cost(0,.) = Cost(1,.) = 0 and the replay base
/// Cost(l, 0) = Cost(l, 1) = l(l-1)/2 (reversal from the start state alone).
/// Ties in k are broken toward the smallest split.
CostReport optimal_cost(int l, int d);

/// Optimal binomial checkpointing schedule: advances == optimal_cost(l, d)
/// exactly, peak slots <= d. Requires l >= 1, d >= 1.
Schedule binomial_schedule(int l, int d);

/// Multi-level recursive checkpointing: splits the step range into
/// fanouts[0] equidistant intervals, recursing with fanouts[1..] inside each.
/// A snapshot is stored at the start of every sub-interval except the first,
/// whose start state is inherited from the enclosing level. Peak slots is
/// sum(fanout_i - 1). The product of the fanouts must equal l.
Schedule multilevel_schedule(int l, const std::vector<int>& fanouts);

/// Store-all (two-sweep) schedule: the forward sweep stores every state
/// 0..l-1 in its own slot, the backward sweep restores and adjoints each step
/// in reverse. No step is re-executed by Advance after the forward sweep.
Schedule storeall_schedule(int l);

/// Single-level snapshot-every-`stride` schedule. The forward sweep stores
/// steps 0, stride, 2*stride, ... and also step l (so every gap has a right
/// bracket). Backward, steps whose input state was not stored carry the
/// `interpolated` flag: the executor rebuilds their input by linear
/// interpolation between the bracketing snapshots.
Schedule interp_schedule(int l, int stride);

/// Exact counts obtained by replaying the action stream symbolically.
/// Throws std::invalid_argument if the schedule fails validation.
CostReport schedule_stats(const Schedule& s);

/// Simulates slot occupancy and state availability. Reports the first
/// violated rule (e.g. "restore-before-store", "advance-from-unheld-state",
/// "adjoint-order") or success, plus the peak number of distinct slots used.
ValidationReport validate_schedule(const Schedule& s);

/// Line-oriented text form, one action per line:
///   ADVANCE <from> <to> | STORE <slot> <step> | RESTORE <slot>
///   | ADJOINT <step> [INTERP] | DONE
std::string to_text(const Schedule& s);

}  // namespace ckpt
