#include "ckpt/driver.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include "ckpt/tape.hpp"

namespace ckpt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void SnapshotStore::set_initial(const State& s) {
  initial_ = s;
  have_initial_ = true;
}

void SnapshotStore::store(int slot, const State& s) {
  if (slot < 0 || slot >= slot_count())
    throw std::out_of_range("SnapshotStore: store slot out of range");
  std::size_t i = std::size_t(slot);
  if (slots_.empty()) slots_.resize(steps_.size());
  if (steps_[i] < 0) {
    ++used_;
    bytes_ += s.t.bytes();
    if (used_ > peak_slots_) peak_slots_ = used_;
    if (bytes_ > peak_bytes_) peak_bytes_ = bytes_;
  }
  slots_[i] = s;
  steps_[i] = s.step;
}

const State& SnapshotStore::restore(int slot) const {
  if (slot == kInitialSlot) {
    if (!have_initial_) throw std::logic_error("SnapshotStore: initial state was never set");
    return initial_;
  }
  if (slot < 0 || slot >= slot_count())
    throw std::out_of_range("SnapshotStore: restore slot out of range");
  if (steps_[std::size_t(slot)] < 0)
    throw std::logic_error("SnapshotStore: restore of never-stored slot");
  return slots_[std::size_t(slot)];
}

const State* SnapshotStore::left_bracket(int step) const {
  const State* best = nullptr;
  int best_step = -1;
  if (have_initial_ && 0 <= step) {
    best = &initial_;
    best_step = 0;
  }
  for (std::size_t i = 0; i < steps_.size(); ++i)
    if (steps_[i] >= 0 && steps_[i] <= step && steps_[i] > best_step) {
      best = &slots_[i];
      best_step = steps_[i];
    }
  return best;
}

const State* SnapshotStore::right_bracket(int step) const {
  const State* best = nullptr;
  int best_step = -1;
  for (std::size_t i = 0; i < steps_.size(); ++i)
    if (steps_[i] > step && (best_step < 0 || steps_[i] < best_step)) {
      best = &slots_[i];
      best_step = steps_[i];
    }
  return best;
}

double evaluate_functional(const ScalarFunctional& j, const State& s0, int l,
                           const ModelConfig& cfg) {
  double total = j.contribution(0, s0, cfg);
  State s = s0;
  for (int k = 1; k <= l; ++k) {
    s = step(s, cfg);
    total += j.contribution(k, s, cfg);
  }
  return total;
}

State run_forward(const State& s0, int l, const ModelConfig& cfg, const StepObserver& observe) {
  if (l < 0) throw std::invalid_argument("run_forward: l must be >= 0");
  State s = s0;
  for (int k = 0; k < l; ++k) {
    s = step(s, cfg);
    if (observe) observe(s);
  }
  return s;
}

std::pair<State, TangentState> run_tangent(const State& s0, const TangentState& ds0, int l,
                                           const ModelConfig& cfg) {
  if (l < 0) throw std::invalid_argument("run_tangent: l must be >= 0");
  State s = s0;
  TangentState ds = ds0;
  for (int k = 0; k < l; ++k) {
    TangentState ds_next = tangent_step(s, ds, cfg);
    s = step(s, cfg);
    ds = std::move(ds_next);
  }
  return {std::move(s), std::move(ds)};
}

namespace {

CotangentState execute_adjoint(const State& s0, const CotangentState& bar_final, int l,
                               const ModelConfig& cfg, const Schedule& schedule,
                               bool allow_interpolation, const ScalarFunctional* functional,
                               RunReport* report) {
  if (schedule.total_steps != l)
    throw std::invalid_argument("run_adjoint: schedule was built for a different step count");
  if (s0.step != 0) throw std::invalid_argument("run_adjoint: s0 must be at step 0");
  ValidationReport v = validate_schedule(schedule);
  if (!v.valid)
    throw std::invalid_argument("run_adjoint: invalid schedule (" + v.rule + "): " + v.detail);

  auto t0 = std::chrono::steady_clock::now();

  SnapshotStore snaps(schedule.slot_budget);
  snaps.set_initial(s0);
  TapeStack tape;
  State cur = s0;
  Field bar = bar_final.t;
  bool bar_seeded = false;
  std::int64_t advances = 0, taped = 0;

  for (const ScheduleAction& a : schedule.actions) {
    switch (a.kind) {
      case ActionKind::Advance:
        for (int k = a.from; k < a.to; ++k) cur = step(cur, cfg);
        advances += a.to - a.from;
        break;
      case ActionKind::Store:
        snaps.store(a.slot, cur);
        break;
      case ActionKind::Restore:
        cur = snaps.restore(a.slot);
        break;
      case ActionKind::Adjoint: {
        State s_in;
        if (a.interpolated) {
          if (!allow_interpolation)
            throw std::invalid_argument(
                "run_adjoint: schedule has interpolated steps; use run_adjoint_interpolated");
          const State* lo = snaps.left_bracket(a.step);
          const State* hi = snaps.right_bracket(a.step);
          if (!lo || !hi)
            throw std::logic_error("run_adjoint: missing interpolation brackets");
          double w = double(a.step - lo->step) / double(hi->step - lo->step);
          s_in.step = a.step;
          s_in.t = (1.0 - w) * lo->t;
          axpy(w, hi->t, s_in.t);
        } else {
          s_in = cur;
        }
        // Taped forward of this one step: the input is pushed just before
        // the state is overwritten, and popped by the backward sweep.
        tape.push_field(s_in.t);
        tape.push_scalar(double(s_in.step));
        State s_out = step(s_in, cfg);
        ++taped;
        if (!bar_seeded) {
          bar_seeded = true;
          if (functional) functional->add_cotangent(a.step + 1, s_out, bar, cfg);
        }
        State popped;
        popped.step = int(tape.pop_scalar());
        popped.t = tape.pop_field();
        bar = adjoint_step(popped, CotangentState{std::move(bar)}, cfg).t;
        if (functional) functional->add_cotangent(a.step, popped, bar, cfg);
        if (!a.interpolated) cur = std::move(popped);
        break;
      }
      case ActionKind::Done:
        break;
    }
  }
  if (l >= 1 && !bar_seeded) throw std::logic_error("run_adjoint: schedule adjointed no steps");

  if (report) {
    report->advances = advances;
    report->taped = taped;
    report->primal_steps = advances + taped;
    report->derivative_seconds = seconds_since(t0);
    report->peak_snapshot_bytes = snaps.peak_bytes();
    report->peak_tape_bytes = tape.peak_bytes();
    report->slowdown = report->primal_seconds > 0.0
                           ? report->derivative_seconds / report->primal_seconds
                           : 0.0;
  }
  return CotangentState{std::move(bar)};
}

}  // namespace

CotangentState run_adjoint(const State& s0, const CotangentState& bar_final, int l,
                           const ModelConfig& cfg, const Schedule& schedule,
                           const ScalarFunctional* functional, RunReport* report) {
  return execute_adjoint(s0, bar_final, l, cfg, schedule, /*allow_interpolation=*/false,
                         functional, report);
}

InterpolatedAdjointResult run_adjoint_interpolated(const State& s0, const CotangentState& bar_final,
                                                   int l, const ModelConfig& cfg,
                                                   const Schedule& schedule, bool compute_error,
                                                   const ScalarFunctional* functional,
                                                   RunReport* report) {
  InterpolatedAdjointResult res;
  res.xbar = execute_adjoint(s0, bar_final, l, cfg, schedule, /*allow_interpolation=*/true,
                             functional, report);
  if (compute_error) {
    CotangentState exact =
        run_adjoint(s0, bar_final, l, cfg, storeall_schedule(l), functional, nullptr);
    double denom = norm2(exact.t);
    res.has_error = true;
    res.rel_error_vs_exact = denom > 0.0 ? norm2(res.xbar.t - exact.t) / denom
                                         : norm2(res.xbar.t);
  }
  return res;
}

std::vector<SlowdownPoint> slowdown_curve(const ModelConfig& cfg, int d,
                                          const std::vector<int>& l_list) {
  std::vector<SlowdownPoint> out;
  out.reserve(l_list.size());
  State s0 = init_state(cfg, cfg.seed);
  for (int l : l_list) {
    Schedule sched = binomial_schedule(l, d);
    CostReport stats = schedule_stats(sched);
    SlowdownPoint p;
    p.l = l;
    p.advances_ratio = double(stats.advances + l) / double(l);

    auto t0 = std::chrono::steady_clock::now();
    State sf = run_forward(s0, l, cfg);
    double fwd = seconds_since(t0);

    CotangentState bar{Field(cfg.n, 1.0)};
    RunReport rpt;
    rpt.primal_seconds = fwd;
    run_adjoint(s0, bar, l, cfg, sched, nullptr, &rpt);
    p.wall_slowdown = fwd > 0.0 ? rpt.derivative_seconds / fwd : 0.0;
    (void)sf;
    out.push_back(p);
  }
  return out;
}

std::string slowdown_csv(const std::vector<SlowdownPoint>& points) {
  std::string out = "l,advances_ratio,wall_slowdown\n";
  char buf[96];
  for (const SlowdownPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.6g\n", p.l, p.advances_ratio, p.wall_slowdown);
    out += buf;
  }
  return out;
}

std::string RunReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "primal_steps %lld\n"
                "advances %lld\n"
                "taped %lld\n"
                "primal_seconds %.6g\n"
                "derivative_seconds %.6g\n"
                "slowdown %.6g\n"
                "peak_snapshot_bytes %zu\n"
                "peak_tape_bytes %zu\n",
                (long long)primal_steps, (long long)advances, (long long)taped, primal_seconds,
                derivative_seconds, slowdown, peak_snapshot_bytes, peak_tape_bytes);
  return buf;
}

}  // namespace ckpt
