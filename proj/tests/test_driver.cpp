#include <doctest.h>

#include <stdexcept>

#include "ckpt/driver.hpp"
#include "ckpt/rng.hpp"
#include "dense_oracle.hpp"

using namespace ckpt;

namespace {

Field random_field(int n, std::uint64_t seed) {
  Rng rng(seed);
  Field f(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f.at(i, j) = rng.normal();
  return f;
}

ModelConfig tight_cfg(int n) {
  ModelConfig cfg;
  cfg.n = n;
  cfg.solver_tol = 1e-14;
  return cfg;
}

}  // namespace

TEST_CASE("snapshot store: bit-identical restores, initial state, brackets") {
  SnapshotStore snaps(3);
  ModelConfig cfg = tight_cfg(5);
  State s0 = init_state(cfg, 0);
  snaps.set_initial(s0);

  State s2 = run_forward(s0, 2, cfg);
  snaps.store(1, s2);
  CHECK(snaps.restore(1).t == s2.t);
  CHECK(snaps.restore(kInitialSlot).t == s0.t);
  CHECK(snaps.peak_slots() == 1);
  CHECK(snaps.peak_bytes() == s2.t.bytes());

  State s4 = run_forward(s2, 2, cfg);
  snaps.store(0, s4);
  CHECK(snaps.peak_bytes() == 2 * s2.t.bytes());

  CHECK(snaps.left_bracket(3)->step == 2);
  CHECK(snaps.right_bracket(3)->step == 4);
  CHECK(snaps.left_bracket(1)->step == 0);  // the initial state
  CHECK(snaps.right_bracket(4) == nullptr);

  snaps.store(0, s2);  // overwrite does not grow the payload
  CHECK(snaps.peak_bytes() == 2 * s2.t.bytes());
  CHECK(snaps.peak_slots() == 2);

  CHECK_THROWS_AS(snaps.restore(2), std::logic_error);
  CHECK_THROWS_AS(snaps.store(7, s2), std::out_of_range);
}

TEST_CASE("run_forward: composition and dense oracle") {
  ModelConfig cfg = tight_cfg(5);
  State s0 = init_state(cfg, 0);

  State unchanged = run_forward(s0, 0, cfg);
  CHECK(unchanged.t == s0.t);

  State ab = run_forward(s0, 5, cfg);
  State a_then_b = run_forward(run_forward(s0, 2, cfg), 3, cfg);
  CHECK(ab.t == a_then_b.t);  // determinism makes composition bit-identical
  CHECK(ab.step == 5);

  State dense_state = s0;
  for (int k = 0; k < 3; ++k) dense_state = dense::dense_step(dense_state, cfg);
  State fast = run_forward(s0, 3, cfg);
  CHECK(norm_inf(fast.t - dense_state.t) <= 1e-12);
}

TEST_CASE("run_tangent: zero direction and linearity") {
  ModelConfig cfg = tight_cfg(9);
  State s0 = init_state(cfg, 0);

  auto [sf0, zero] = run_tangent(s0, TangentState{Field(9)}, 10, cfg);
  CHECK(norm2(zero.t) == 0.0);

  TangentState ds{random_field(9, 5)};
  auto [sf1, y1] = run_tangent(s0, ds, 10, cfg);
  auto [sf2, y2] = run_tangent(s0, TangentState{2.0 * ds.t}, 10, cfg);
  CHECK(norm2(y2.t - 2.0 * y1.t) == 0.0);  // doubling is exact in binary
  CHECK(sf1.t == sf2.t);
}

TEST_CASE("run_adjoint: schedule equivalence across strategies") {
  ModelConfig cfg = tight_cfg(9);
  State s0 = init_state(cfg, 0);
  const int l = 27;
  CotangentState bar{random_field(9, 6)};

  CotangentState g_store = run_adjoint(s0, bar, l, cfg, storeall_schedule(l));
  CotangentState g_binom = run_adjoint(s0, bar, l, cfg, binomial_schedule(l, 3));
  CotangentState g_multi = run_adjoint(s0, bar, l, cfg, multilevel_schedule(l, {3, 3, 3}));

  double scale = norm2(g_store.t);
  CHECK(norm2(g_binom.t - g_store.t) / scale <= 1e-12);
  CHECK(norm2(g_multi.t - g_store.t) / scale <= 1e-12);
  CHECK(norm2(g_multi.t - g_binom.t) / scale <= 1e-12);
  // Snapshots restore bit-exactly and every replayed state is the same
  // composition of steps, so the three gradients are in fact identical.
  CHECK(g_binom.t == g_store.t);
  CHECK(g_multi.t == g_store.t);
}

TEST_CASE("run_adjoint: zero weight, linearity, dense transpose oracle") {
  ModelConfig cfg = tight_cfg(5);
  State s0 = init_state(cfg, 0);
  const int l = 3;
  Schedule sched = binomial_schedule(l, 2);

  CotangentState zero{Field(5)};
  CHECK(norm2(run_adjoint(s0, zero, l, cfg, sched).t) == 0.0);

  CotangentState bar{random_field(5, 7)};
  CotangentState g1 = run_adjoint(s0, bar, l, cfg, sched);
  CotangentState g2 = run_adjoint(s0, CotangentState{2.0 * bar.t}, l, cfg, sched);
  CHECK(g2.t == 2.0 * g1.t);

  // Dense oracle: product of transposed one-step Jacobians along the
  // trajectory, applied back to front.
  State s = s0;
  std::vector<dense::Matrix> jacs;
  for (int k = 0; k < l; ++k) {
    jacs.push_back(dense::dense_step_jacobian(s, cfg));
    s = dense::dense_step(s, cfg);
  }
  std::vector<double> w = dense::to_vec(bar.t);
  for (int k = l - 1; k >= 0; --k) w = dense::matvec_t(jacs[std::size_t(k)], w);
  Field oracle = dense::to_field(w, 5);
  CHECK(norm_inf(g1.t - oracle) <= 1e-11);
}

TEST_CASE("run_adjoint: executed counts match schedule stats exactly") {
  ModelConfig cfg = tight_cfg(9);
  State s0 = init_state(cfg, 0);
  CotangentState bar{random_field(9, 8)};
  for (int l : {1, 7, 20}) {
    for (int d : {1, 2, 4}) {
      Schedule sched = binomial_schedule(l, d);
      CostReport stats = schedule_stats(sched);
      RunReport report;
      run_adjoint(s0, bar, l, cfg, sched, nullptr, &report);
      CAPTURE(l);
      CAPTURE(d);
      CHECK(report.advances == stats.advances);
      CHECK(report.taped == l);
      CHECK(report.primal_steps == stats.advances + l);
      CHECK(report.peak_tape_bytes ==
            s0.t.bytes() + sizeof(double));  // one-step tape: one field + step counter
    }
  }
}

TEST_CASE("run_adjoint: bad inputs are rejected") {
  ModelConfig cfg = tight_cfg(5);
  State s0 = init_state(cfg, 0);
  CotangentState bar{Field(5)};
  CHECK_THROWS_AS(run_adjoint(s0, bar, 4, cfg, binomial_schedule(5, 2)), std::invalid_argument);
  CHECK_THROWS_AS(run_adjoint(s0, bar, 5, cfg, interp_schedule(5, 5)), std::invalid_argument);
  State s1 = run_forward(s0, 1, cfg);
  CHECK_THROWS_AS(run_adjoint(s1, bar, 5, cfg, binomial_schedule(5, 2)), std::invalid_argument);
}

TEST_CASE("run_adjoint: snapshot memory follows the strategy") {
  ModelConfig cfg = tight_cfg(9);
  State s0 = init_state(cfg, 0);
  CotangentState bar{random_field(9, 9)};
  std::size_t payload = s0.t.bytes();

  RunReport r50, r100, store50, store100;
  run_adjoint(s0, bar, 50, cfg, binomial_schedule(50, 5), nullptr, &r50);
  run_adjoint(s0, bar, 100, cfg, binomial_schedule(100, 5), nullptr, &r100);
  CHECK(r50.peak_snapshot_bytes == r100.peak_snapshot_bytes);  // independent of l
  CHECK(r50.peak_snapshot_bytes <= 5 * payload);

  run_adjoint(s0, bar, 50, cfg, storeall_schedule(50), nullptr, &store50);
  run_adjoint(s0, bar, 100, cfg, storeall_schedule(100), nullptr, &store100);
  CHECK(store50.peak_snapshot_bytes == 50 * payload);
  CHECK(store100.peak_snapshot_bytes == 100 * payload);

  // Total adjoint memory (snapshots plus tape): linear in l with slope of
  // one state payload for store-all, flat for binomial with fixed d.
  auto total = [](const RunReport& r) { return r.peak_snapshot_bytes + r.peak_tape_bytes; };
  CHECK(total(store100) - total(store50) == 50 * payload);
  CHECK(total(r100) == total(r50));
  CHECK(total(r50) <= 5 * payload + payload + sizeof(double));
  CHECK(r50.peak_tape_bytes == payload + sizeof(double));  // one-step tape only
}

TEST_CASE("run_adjoint_interpolated: exact at stride 1, approximate otherwise") {
  ModelConfig cfg = tight_cfg(9);
  State s0 = init_state(cfg, 0);
  const int l = 20;
  CotangentState bar{random_field(9, 10)};

  InterpolatedAdjointResult exact =
      run_adjoint_interpolated(s0, bar, l, cfg, interp_schedule(l, 1), true);
  CHECK(exact.has_error);
  CHECK(exact.rel_error_vs_exact == 0.0);

  InterpolatedAdjointResult coarse =
      run_adjoint_interpolated(s0, bar, l, cfg, interp_schedule(l, l), true);
  CHECK(coarse.rel_error_vs_exact > 0.0);

  // On the diffusion-dominated default config the interpolation error decays
  // as the stride shrinks (measured behavior, not a theorem).
  double prev = 1e300;
  for (int stride : {20, 10, 5, 2, 1}) {
    InterpolatedAdjointResult r =
        run_adjoint_interpolated(s0, bar, l, cfg, interp_schedule(l, stride), true);
    CHECK(r.rel_error_vs_exact <= prev);
    prev = r.rel_error_vs_exact;
  }
}

TEST_CASE("slowdown_curve: deterministic ratios match the schedule stats") {
  ModelConfig cfg = tight_cfg(5);
  cfg.solver_tol = 1e-10;
  std::vector<int> ls = {4, 8, 16, 32};
  auto points = slowdown_curve(cfg, 3, ls);
  REQUIRE(points.size() == ls.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    CostReport stats = schedule_stats(binomial_schedule(ls[i], 3));
    CHECK(points[i].l == ls[i]);
    CHECK(points[i].advances_ratio == double(stats.advances + ls[i]) / ls[i]);
    CHECK(points[i].advances_ratio >= prev);  // nondecreasing in l
    prev = points[i].advances_ratio;
  }
  std::string csv = slowdown_csv(points);
  CHECK(csv.rfind("l,advances_ratio,wall_slowdown\n", 0) == 0);
}
