#include "ckpt/schedule.hpp"

#include <cstdarg>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace ckpt {

namespace {

using u128 = unsigned __int128;

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

}  // namespace

std::uint64_t eta(int d, int t) {
  if (d < 0 || t < 0) throw std::invalid_argument("eta: d and t must be nonnegative");
  // C(d+t, d) by the multiplicative form over the smaller index.
  int k = d < t ? d : t;
  std::int64_t n = std::int64_t(d) + t;
  u128 acc = 1;
  for (int i = 1; i <= k; ++i) {
    acc = acc * u128(n - k + i) / u128(i);
    if (acc > std::numeric_limits<std::uint64_t>::max())
      throw std::overflow_error(fmt("eta(%d, %d) exceeds 64 bits", d, t));
  }
  return std::uint64_t(acc);
}

int repetition_number(std::int64_t l, int d) {
  if (l < 1) throw std::invalid_argument("repetition_number: l must be >= 1");
  if (d < 1) throw std::invalid_argument("repetition_number: d must be >= 1");
  // eta(d, t) = eta(d, t-1) * (d+t) / t, exactly.
  u128 acc = 1;
  int t = 0;
  while (acc < u128(l)) {
    ++t;
    acc = acc * u128(d + t) / u128(t);
  }
  return t;
}

std::int64_t closed_form_advances(std::int64_t l, int d) {
  int t = repetition_number(l, d);
  std::uint64_t corr = t >= 1 ? eta(d + 1, t - 1) : 0;  // eta(., -1) := 0 (l == 1)
  return std::int64_t(t) * l - std::int64_t(corr);
}

namespace {

// Memoized recurrence over (steps, slots). Slot counts follow the convention
// of the schedule executor: to return to a step other than step 0, its state
// must sit in a slot for the whole time it is needed, so with one slot (or
// none beyond the free initial state) the only option is replay-from-start.
struct DpTable {
  int l = 0, d = 0;
  std::vector<std::int64_t> cost;  // (d+1) x (l+1)
  std::vector<int> split;

  std::int64_t& c(int ll, int dd) { return cost[std::size_t(dd) * (l + 1) + ll]; }
  int& k(int ll, int dd) { return split[std::size_t(dd) * (l + 1) + ll]; }
};

DpTable build_dp(int l, int d) {
  DpTable t;
  t.l = l;
  t.d = d;
  t.cost.assign(std::size_t(d + 1) * (l + 1), 0);
  t.split.assign(std::size_t(d + 1) * (l + 1), 0);
  for (int dd = 0; dd <= d; ++dd) {
    for (int ll = 0; ll <= l; ++ll) {
      if (ll <= 1) {
        t.c(ll, dd) = 0;
        continue;
      }
      if (dd <= 1) {
        t.c(ll, dd) = std::int64_t(ll) * (ll - 1) / 2;  // replay from start
        continue;
      }
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      int best_k = 1;
      for (int k = 1; k < ll; ++k) {
        std::int64_t v = k + t.c(ll - k, dd - 1) + t.c(k, dd);
        if (v < best) {  // ties broken toward the smallest split
          best = v;
          best_k = k;
        }
      }
      t.c(ll, dd) = best;
      t.k(ll, dd) = best_k;
    }
  }
  return t;
}

// Peak number of simultaneously held snapshots for the optimal split tree,
// not counting the slot (or free initial state) holding the segment start.
int dp_peak_slots(DpTable& t, int ll, int dd) {
  if (ll <= 1 || dd <= 1) return 0;
  int k = t.k(ll, dd);
  int tail = 1 + dp_peak_slots(t, ll - k, dd - 1);
  int head = dp_peak_slots(t, k, dd);
  return tail > head ? tail : head;
}

}  // namespace

CostReport optimal_cost(int l, int d) {
  if (l < 1) throw std::invalid_argument("optimal_cost: l must be >= 1");
  if (d < 0) throw std::invalid_argument("optimal_cost: d must be >= 0");
  DpTable t = build_dp(l, d);
  CostReport r;
  r.advances = t.c(l, d);
  r.taped = l;
  r.extra_avg = double(r.advances) / double(l);
  r.peak_slots = dp_peak_slots(t, l, d);
  r.repetition = d >= 1 ? repetition_number(l, d) : 0;
  return r;
}

namespace {

// Reverses steps [begin, begin+len). Preconditions: the current state is at
// `begin`, and `begin` stays restorable from `src` (kInitialSlot = the free
// initial state) for the whole segment. `spare` slots starting at `next_slot`
// may be written inside; they are dead once the segment is done.
void gen_binomial(int begin, int len, int spare, int src, int next_slot,
                  DpTable& dp, std::vector<ScheduleAction>& out) {
  if (len == 1) {
    out.push_back(ScheduleAction::adjoint(begin));
    return;
  }
  if (spare == 0) {
    for (int j = len - 1; j >= 0; --j) {
      if (j < len - 1) out.push_back(ScheduleAction::restore(src));
      if (j > 0) out.push_back(ScheduleAction::advance(begin, begin + j));
      out.push_back(ScheduleAction::adjoint(begin + j));
    }
    return;
  }
  int k = dp.k(len, spare + 1);
  out.push_back(ScheduleAction::advance(begin, begin + k));
  out.push_back(ScheduleAction::store(next_slot, begin + k));
  gen_binomial(begin + k, len - k, spare - 1, next_slot, next_slot + 1, dp, out);
  out.push_back(ScheduleAction::restore(src));
  gen_binomial(begin, k, spare, src, next_slot, dp, out);
}

}  // namespace

Schedule binomial_schedule(int l, int d) {
  if (l < 1) throw std::invalid_argument("binomial_schedule: l must be >= 1");
  if (d < 1) throw std::invalid_argument("binomial_schedule: d must be >= 1");
  DpTable dp = build_dp(l, d);
  Schedule s;
  s.total_steps = l;
  s.slot_budget = d;
  gen_binomial(0, l, d - 1, kInitialSlot, 0, dp, s.actions);
  s.actions.push_back(ScheduleAction::done());
  return s;
}

namespace {

void gen_multilevel(int begin, std::size_t level, const std::vector<int>& fanouts,
                    const std::vector<int>& span, int src, int next_slot,
                    std::vector<ScheduleAction>& out) {
  if (level == fanouts.size()) {
    out.push_back(ScheduleAction::adjoint(begin));
    return;
  }
  int f = fanouts[level];
  int sub = span[level + 1];
  // Advance across the interval, storing the start of every sub-interval
  // except the first (its start state is inherited from the caller).
  for (int i = 1; i < f; ++i) {
    out.push_back(ScheduleAction::advance(begin + (i - 1) * sub, begin + i * sub));
    out.push_back(ScheduleAction::store(next_slot + i - 1, begin + i * sub));
  }
  // Reverse sub-intervals last to first.
  for (int i = f - 1; i >= 0; --i) {
    int sub_src = i > 0 ? next_slot + i - 1 : src;
    if (i < f - 1) out.push_back(ScheduleAction::restore(sub_src));
    gen_multilevel(begin + i * sub, level + 1, fanouts, span, sub_src,
                   next_slot + f - 1, out);
  }
}

}  // namespace

Schedule multilevel_schedule(int l, const std::vector<int>& fanouts) {
  if (l < 1) throw std::invalid_argument("multilevel_schedule: l must be >= 1");
  std::int64_t prod = 1;
  int slots = 0;
  for (int f : fanouts) {
    if (f < 2) throw std::invalid_argument("multilevel_schedule: every fanout must be >= 2");
    prod *= f;
    slots += f - 1;
    if (prod > l) break;
  }
  if (prod != l)
    throw std::invalid_argument(
        fmt("multilevel_schedule: fanouts multiply to %lld, not l=%d", (long long)prod, l));
  // span[i] = number of steps covered at recursion depth i.
  std::vector<int> span(fanouts.size() + 1, 1);
  for (std::size_t i = fanouts.size(); i-- > 0;) span[i] = span[i + 1] * fanouts[i];
  Schedule s;
  s.total_steps = l;
  s.slot_budget = slots;
  gen_multilevel(0, 0, fanouts, span, kInitialSlot, 0, s.actions);
  s.actions.push_back(ScheduleAction::done());
  return s;
}

Schedule storeall_schedule(int l) {
  if (l < 1) throw std::invalid_argument("storeall_schedule: l must be >= 1");
  Schedule s;
  s.total_steps = l;
  s.slot_budget = l;
  for (int k = 0; k < l; ++k) {
    s.actions.push_back(ScheduleAction::store(k, k));
    if (k < l - 1) s.actions.push_back(ScheduleAction::advance(k, k + 1));
  }
  s.actions.push_back(ScheduleAction::adjoint(l - 1));
  for (int k = l - 2; k >= 0; --k) {
    s.actions.push_back(ScheduleAction::restore(k));
    s.actions.push_back(ScheduleAction::adjoint(k));
  }
  s.actions.push_back(ScheduleAction::done());
  return s;
}

Schedule interp_schedule(int l, int stride) {
  if (l < 1) throw std::invalid_argument("interp_schedule: l must be >= 1");
  if (stride < 1 || stride > l)
    throw std::invalid_argument("interp_schedule: stride must be in [1, l]");
  Schedule s;
  s.total_steps = l;
  // Snapshots at 0, stride, 2*stride, ... (< l) and at l, so that every
  // interpolated step has a right bracket.
  std::vector<int> snap_slot(l + 1, -1);
  int slot = 0;
  s.actions.push_back(ScheduleAction::store(slot, 0));
  snap_slot[0] = slot++;
  int cur = 0;
  for (int step = stride; step < l; step += stride) {
    s.actions.push_back(ScheduleAction::advance(cur, step));
    s.actions.push_back(ScheduleAction::store(slot, step));
    snap_slot[step] = slot++;
    cur = step;
  }
  s.actions.push_back(ScheduleAction::advance(cur, l));
  s.actions.push_back(ScheduleAction::store(slot, l));
  snap_slot[l] = slot++;
  s.slot_budget = slot;
  for (int step = l - 1; step >= 0; --step) {
    if (snap_slot[step] >= 0) {
      s.actions.push_back(ScheduleAction::restore(snap_slot[step]));
      s.actions.push_back(ScheduleAction::adjoint(step));
    } else {
      s.actions.push_back(ScheduleAction::adjoint(step, /*interp=*/true));
    }
  }
  s.actions.push_back(ScheduleAction::done());
  return s;
}

namespace {

struct SimOutcome {
  bool valid = true;
  std::string rule;
  std::string detail;
  std::int64_t advances = 0;
  std::int64_t taped = 0;
  int peak_slots = 0;
};

constexpr int kNowhere = -2;  // current state unknown/consumed

SimOutcome simulate(const Schedule& s) {
  SimOutcome r;
  const int l = s.total_steps;
  const int d = s.slot_budget;
  auto fail = [&](std::size_t idx, const char* rule, std::string detail) {
    r.valid = false;
    r.rule = rule;
    r.detail = fmt("action %zu: ", idx) + detail;
  };

  if (s.actions.empty() || s.actions.back().kind != ActionKind::Done) {
    fail(s.actions.size(), "done-missing", "stream must end with DONE");
    return r;
  }

  std::vector<int> slot_step(std::size_t(d > 0 ? d : 0), -1);  // -1 = never stored
  int current = 0;  // executor starts holding the initial state (step 0)
  int expected_adjoint = l - 1;
  int distinct_slots = 0;

  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    const ScheduleAction& a = s.actions[i];
    switch (a.kind) {
      case ActionKind::Advance: {
        if (a.from < 0 || a.to > l) {
          fail(i, "step-range", fmt("ADVANCE %d %d outside [0, %d]", a.from, a.to, l));
          return r;
        }
        if (a.from >= a.to) {
          fail(i, "advance-order", fmt("ADVANCE %d %d needs from < to", a.from, a.to));
          return r;
        }
        if (current != a.from) {
          fail(i, "advance-from-unheld-state",
               fmt("ADVANCE %d %d but current state is %d", a.from, a.to, current));
          return r;
        }
        r.advances += a.to - a.from;
        current = a.to;
        break;
      }
      case ActionKind::Store: {
        if (a.slot < 0 || a.slot >= d) {
          fail(i, "slot-range", fmt("STORE slot %d outside [0, %d)", a.slot, d));
          return r;
        }
        if (a.step < 0 || a.step > l) {
          fail(i, "step-range", fmt("STORE step %d outside [0, %d]", a.step, l));
          return r;
        }
        if (current != a.step) {
          fail(i, "store-from-unheld-state",
               fmt("STORE of step %d but current state is %d", a.step, current));
          return r;
        }
        if (slot_step[a.slot] == -1) ++distinct_slots;
        slot_step[a.slot] = a.step;
        break;
      }
      case ActionKind::Restore: {
        if (a.slot == kInitialSlot) {
          current = 0;
          break;
        }
        if (a.slot < 0 || a.slot >= d) {
          fail(i, "slot-range", fmt("RESTORE slot %d outside [0, %d)", a.slot, d));
          return r;
        }
        if (slot_step[a.slot] == -1) {
          fail(i, "restore-before-store", fmt("RESTORE of never-stored slot %d", a.slot));
          return r;
        }
        current = slot_step[a.slot];
        break;
      }
      case ActionKind::Adjoint: {
        if (a.step != expected_adjoint) {
          fail(i, "adjoint-order",
               fmt("ADJOINT %d but the next step to adjoint is %d", a.step, expected_adjoint));
          return r;
        }
        if (a.interpolated) {
          bool left = false, right = false;  // initial state is a free left bracket
          if (a.step > 0) left = true;
          for (int sl = 0; sl < d; ++sl) {
            if (slot_step[sl] == -1) continue;
            if (slot_step[sl] <= a.step) left = true;
            if (slot_step[sl] > a.step) right = true;
          }
          if (!left || !right) {
            fail(i, "interp-brackets-missing",
                 fmt("ADJOINT %d INTERP without bracketing snapshots", a.step));
            return r;
          }
          // current state untouched: the input is synthesized by the executor
        } else {
          if (current != a.step) {
            fail(i, "adjoint-input-unavailable",
                 fmt("ADJOINT %d but current state is %d", a.step, current));
            return r;
          }
        }
        ++r.taped;
        --expected_adjoint;
        break;
      }
      case ActionKind::Done: {
        if (i + 1 != s.actions.size()) {
          fail(i, "action-after-done", "DONE must be the last action");
          return r;
        }
        break;
      }
    }
  }
  if (expected_adjoint != -1) {
    fail(s.actions.size() - 1, "adjoint-missing",
         fmt("steps %d..0 were never adjointed", expected_adjoint));
    return r;
  }
  (void)kNowhere;
  r.peak_slots = distinct_slots;
  return r;
}

}  // namespace

CostReport schedule_stats(const Schedule& s) {
  SimOutcome o = simulate(s);
  if (!o.valid)
    throw std::invalid_argument("schedule_stats: invalid schedule (" + o.rule + "): " + o.detail);
  CostReport r;
  r.advances = o.advances;
  r.taped = o.taped;
  r.extra_avg = s.total_steps > 0 ? double(o.advances) / double(s.total_steps) : 0.0;
  r.peak_slots = o.peak_slots;
  r.repetition = s.slot_budget >= 1 ? repetition_number(s.total_steps, s.slot_budget) : 0;
  return r;
}

ValidationReport validate_schedule(const Schedule& s) {
  SimOutcome o = simulate(s);
  ValidationReport r;
  r.valid = o.valid;
  r.rule = o.rule;
  r.detail = o.detail;
  r.peak_slots = o.peak_slots;
  return r;
}

std::string to_text(const Schedule& s) {
  std::string out;
  for (const ScheduleAction& a : s.actions) {
    switch (a.kind) {
      case ActionKind::Advance:
        out += fmt("ADVANCE %d %d\n", a.from, a.to);
        break;
      case ActionKind::Store:
        out += fmt("STORE %d %d\n", a.slot, a.step);
        break;
      case ActionKind::Restore:
        out += fmt("RESTORE %d\n", a.slot);
        break;
      case ActionKind::Adjoint:
        out += a.interpolated ? fmt("ADJOINT %d INTERP\n", a.step) : fmt("ADJOINT %d\n", a.step);
        break;
      case ActionKind::Done:
        out += "DONE\n";
        break;
    }
  }
  return out;
}

std::string CostReport::to_text() const {
  std::string out;
  out += fmt("advances %lld\n", (long long)advances);
  out += fmt("taped %lld\n", (long long)taped);
  out += fmt("extra_avg %.12g\n", extra_avg);
  out += fmt("peak_slots %d\n", peak_slots);
  out += fmt("repetition %d\n", repetition);
  return out;
}

std::string ValidationReport::to_text() const {
  std::string out;
  out += fmt("valid %d\n", valid ? 1 : 0);
  if (!valid) {
    out += "rule " + rule + "\n";
    out += "detail " + detail + "\n";
  }
  out += fmt("peak_slots %d\n", peak_slots);
  return out;
}

}  // namespace ckpt
