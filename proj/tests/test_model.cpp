#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "ckpt/csv.hpp"
#include "ckpt/model.hpp"
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

TEST_CASE("config: stability bound and parameter checks") {
  ModelConfig ok;
  ok.validate();

  ModelConfig bad = ok;
  bad.n = 2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.n = 64;  // h shrinks, diffusion number blows past the bound
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.n = 64;
  bad.dt = 1e-5;
  bad.validate();
}

TEST_CASE("elliptic operator: symmetric positive definite") {
  EllipticSystem sys{9, 0.1};
  Field x = random_field(9, 1), y = random_field(9, 2);
  double axy = dot(apply_operator(sys, x), y);
  double xay = dot(x, apply_operator(sys, y));
  CHECK(std::fabs(axy - xay) <= 1e-14 * std::fabs(axy));
  CHECK(dot(apply_operator(sys, x), x) > 0.0);
}

TEST_CASE("solve_sor: residual certified") {
  EllipticSystem sys{9, 1.0 / 10.0};
  SUBCASE("zero rhs") {
    SolveResult r = solve_sor(sys, Field(9), 1e-12, 100);
    CHECK(r.converged);
    CHECK(r.iters == 0);
    CHECK(norm2(r.x) == 0.0);
  }
  SUBCASE("random rhs") {
    Field b = random_field(9, 3);
    SolveResult r = solve_sor(sys, b, 1e-12, 5000);
    REQUIRE(r.converged);
    CHECK(norm2(b - apply_operator(sys, r.x)) / norm2(b) <= 1e-12);
  }
  SUBCASE("agrees with pcg") {
    Field b = random_field(9, 4);
    SolveResult rs = solve_sor(sys, b, 1e-12, 5000);
    SolveResult rp = solve_pcg(sys, b, 1e-12, 5000);
    REQUIRE(rs.converged);
    REQUIRE(rp.converged);
    CHECK(norm2(rs.x - rp.x) / norm2(rp.x) <= 1e-11);
  }
  SUBCASE("non-convergence is flagged, not fatal") {
    Field b = random_field(9, 5);
    SolveResult r = solve_sor(sys, b, 1e-12, 2);
    CHECK(!r.converged);
    CHECK(r.iters == 2);
  }
}

TEST_CASE("solve_pcg: residual certified, beats sor on iterations") {
  EllipticSystem sys{17, 1.0 / 18.0};
  Field b = random_field(17, 6);
  SolveResult rp = solve_pcg(sys, b, 1e-12, 10000);
  SolveResult rs = solve_sor(sys, b, 1e-12, 10000);
  REQUIRE(rp.converged);
  REQUIRE(rs.converged);
  CHECK(norm2(b - apply_operator(sys, rp.x)) / norm2(b) <= 1e-12);
  CHECK(rp.iters <= rs.iters);

  SolveResult rz = solve_pcg(sys, Field(17), 1e-12, 100);
  CHECK(rz.converged);
  CHECK(norm2(rz.x) == 0.0);
}

TEST_CASE("init_state: deterministic, bounded, golden snapshot") {
  ModelConfig cfg;
  cfg.n = 5;
  State a = init_state(cfg, 0);
  State b = init_state(cfg, 0);
  CHECK(a.t == b.t);
  CHECK(a.step == 0);
  CHECK(all_finite(a.t));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      CHECK(a.t.at(i, j) >= 0.0);
      CHECK(a.t.at(i, j) < 2.0);  // two bumps of amplitude < 1 each
    }
  State c = init_state(cfg, 1);
  CHECK(c.t != a.t);

  const double golden[25] = {
      0.00815942533606576,    0.20234408002188287,  0.19076462130377264,
      0.0068372516852807106,  9.3162620807345103e-06,
      0.023158243333462634,   0.57431321834702032,  0.54149217565759,
      0.019408892309115681,   2.6444339569128268e-05,
      0.0025788297858894442,  0.079130093562434875, 0.11663977497671435,
      0.0052187023613118749,  5.5069771361931972e-06,
      0.0011954469821164469,  0.25431853984530156,  0.86202709918181342,
      0.046263713792704893,   3.9296344858820446e-05,
      0.00027760514357684767, 0.059508428247805473, 0.20185276630472104,
      0.010834138071623176,   9.2014726135551594e-06};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(a.t.at(i, j) == golden[i * 5 + j]);
}

TEST_CASE("field csv: header, shape, round-trip precision") {
  Field f(3);
  f.at(0, 0) = 1.0 / 3.0;
  f.at(2, 2) = -2.5e-17;
  std::string csv = field_csv(f, 7);
  CHECK(csv.rfind("# N=3 step=7\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(std::count(csv.begin(), csv.end(), ',') == 6);   // 2 per row
  // %.17g preserves doubles exactly: parsing the last cell back must return
  // the stored bits.
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
  std::size_t last_comma = csv.rfind(',');
  CHECK(std::strtod(csv.c_str() + last_comma + 1, nullptr) == -2.5e-17);
}

TEST_CASE("step: fixed point and diffusive decay") {
  ModelConfig cfg = tight_cfg(5);
  cfg.alpha = 0.0;
  cfg.forcing = 0.0;

  State zero;
  zero.t = Field(5);
  State z1 = step(zero, cfg);
  CHECK(norm2(z1.t) == 0.0);
  CHECK(z1.step == 1);

  State s = init_state(cfg, 0);
  State s1 = step(s, cfg);
  CHECK(norm2(s1.t) < norm2(s.t));  // pure diffusion contracts on Dirichlet domain
}

TEST_CASE("step: matches the dense oracle") {
  ModelConfig cfg = tight_cfg(5);
  State s = init_state(cfg, 0);
  State fast = step(s, cfg);
  State slow = dense::dense_step(s, cfg);
  CHECK(norm_inf(fast.t - slow.t) <= 1e-13);
  CHECK(fast.step == slow.step);
}

TEST_CASE("step: derived velocity field is discretely divergence free") {
  ModelConfig cfg = tight_cfg(9);
  State s = init_state(cfg, 3);
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);
  Field u = d_dy(psi, cfg.h());
  u *= -1.0;
  Field v = d_dx(psi, cfg.h());
  Field div = d_dx(u, cfg.h()) + d_dy(v, cfg.h());
  CHECK(norm_inf(div) <= 1e-12);
}

TEST_CASE("tangent_step: linearity and divided differences") {
  ModelConfig cfg = tight_cfg(9);
  State s = init_state(cfg, 0);

  TangentState zero{Field(9)};
  CHECK(norm2(tangent_step(s, zero, cfg).t) == 0.0);

  TangentState ds{random_field(9, 11)};
  TangentState t1 = tangent_step(s, ds, cfg);
  TangentState ds3{3.0 * ds.t};
  TangentState t3 = tangent_step(s, ds3, cfg);
  CHECK(norm2(t3.t - 3.0 * t1.t) / norm2(t1.t) <= 1e-12);

  // Forward difference of the primal step.
  double eps = 1e-7;
  State sp = s;
  axpy(eps, ds.t, sp.t);
  Field dd = step(sp, cfg).t - step(s, cfg).t;
  dd *= 1.0 / eps;
  CHECK(norm2(dd - t1.t) / norm2(t1.t) <= 1e-5);
}

TEST_CASE("tangent_step vs dense Jacobian, adjoint_step vs its transpose") {
  ModelConfig cfg = tight_cfg(5);
  State s = init_state(cfg, 0);
  dense::Matrix j = dense::dense_step_jacobian(s, cfg);

  Field ds = random_field(5, 21);
  Field tangent = tangent_step(s, TangentState{ds}, cfg).t;
  Field tangent_oracle = dense::to_field(dense::matvec(j, dense::to_vec(ds)), 5);
  CHECK(norm_inf(tangent - tangent_oracle) <= 1e-12);

  Field bar = random_field(5, 22);
  Field adj = adjoint_step(s, CotangentState{bar}, cfg).t;
  Field adj_oracle = dense::to_field(dense::matvec_t(j, dense::to_vec(bar)), 5);
  CHECK(norm_inf(adj - adj_oracle) <= 1e-12);
}

TEST_CASE("adjoint_step: zero cotangent and transpose identity") {
  for (SolverKind solver : {SolverKind::Pcg, SolverKind::Sor}) {
    ModelConfig cfg = tight_cfg(9);
    cfg.solver = solver;
    State s = init_state(cfg, 0);

    CotangentState zero{Field(9)};
    CHECK(norm2(adjoint_step(s, zero, cfg).t) == 0.0);

    TangentState ds{random_field(9, 31)};
    CotangentState bar{random_field(9, 32)};
    double lhs = dot(tangent_step(s, ds, cfg).t, bar.t);
    double rhs = dot(ds.t, adjoint_step(s, bar, cfg).t);
    CAPTURE(solver == SolverKind::Sor ? "sor" : "pcg");
    CHECK(std::fabs(lhs - rhs) / std::fabs(lhs) <= 1e-12);
  }
}

TEST_CASE("straightforward solver differentiation") {
  EllipticSystem sys{9, 0.1};
  Field b = random_field(9, 41);
  Field db = random_field(9, 42);

  SUBCASE("sor: zero derivative input stays zero") {
    TangentSolveResult r = tangent_solve_straightforward(SolverKind::Sor, sys, b, Field(9),
                                                         1e-12, 5000);
    REQUIRE(r.converged);
    CHECK(norm2(r.dx) == 0.0);
  }
  SUBCASE("sor converges to the black-box derivative") {
    TangentSolveResult r = tangent_solve_straightforward(SolverKind::Sor, sys, b, db, 1e-12, 5000);
    REQUIRE(r.converged);
    SolveResult bb = solve_pcg(sys, db, 1e-13, 5000);
    REQUIRE(bb.converged);
    CHECK(norm2(r.dx - bb.x) / norm2(bb.x) <= 1e-8);
  }
  SUBCASE("pcg with forced high iteration count becomes coherent") {
    TangentSolveResult r = tangent_solve_straightforward(SolverKind::Pcg, sys, b, db, 1e-12,
                                                         5000, /*force_iters=*/400);
    SolveResult bb = solve_pcg(sys, db, 1e-13, 5000);
    REQUIRE(bb.converged);
    CHECK(norm2(r.dx - bb.x) / norm2(bb.x) <= 1e-8);
  }
  SUBCASE("tangent_step in straightforward mode still matches blackbox with sor") {
    ModelConfig cfg = tight_cfg(9);
    cfg.solver = SolverKind::Sor;
    cfg.tangent_mode = TangentMode::Straightforward;
    State s = init_state(cfg, 0);
    TangentState ds{random_field(9, 43)};
    Field straightforward = tangent_step(s, ds, cfg).t;
    cfg.tangent_mode = TangentMode::Blackbox;
    Field blackbox = tangent_step(s, ds, cfg).t;
    CHECK(norm2(straightforward - blackbox) / norm2(blackbox) <= 1e-8);
  }
}
