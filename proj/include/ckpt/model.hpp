#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ckpt/field.hpp"

namespace ckpt {

enum class SolverKind : std::uint8_t { Sor, Pcg };
enum class TangentMode : std::uint8_t { Straightforward, Blackbox };

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Toy unsteady tracer model on the N x N interior of the unit square with
// homogeneous Dirichlet boundaries. One step:
//   1. solve the elliptic system  -lap(psi) = alpha*T + forcing
//   2. u = -dpsi/dy, v = dpsi/dx (centered differences)
//   3. T <- T + dt * ( -u*dT/dx - v*dT/dy + kappa*lap(T) )
// The step is nonlinear in T because the advecting velocity depends on T
// through psi.
struct ModelConfig {
  int n = 16;
  double dt = 0.005;
  double kappa = 0.05;
  double alpha = 1.0;
  double forcing = 1.0;  // amplitude of the steady elliptic source term
  SolverKind solver = SolverKind::Pcg;
  double solver_tol = 1e-12;  // relative residual target
  int solver_maxit = 20000;
  TangentMode tangent_mode = TangentMode::Blackbox;
  std::uint64_t seed = 0;

  double h() const { return 1.0 / (n + 1); }

  // Throws std::invalid_argument on bad parameters, including violation of
  // the explicit-step stability bound dt*(4*kappa/h^2 + Umax/h) <= 0.9 with
  // a conservative Umax estimate.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct State {
  Field t;       // tracer field
  int step = 0;  // time index k
};

struct TangentState {
  Field t;
};

struct CotangentState {
  Field t;
};

// Matrix-free 5-point Laplacian A = -lap with homogeneous Dirichlet boundary;
// symmetric positive definite on the interior grid.
struct EllipticSystem {
  int n = 0;
  double h = 0.0;
};

inline EllipticSystem elliptic_system(const ModelConfig& cfg) { return {cfg.n, cfg.h()}; }

Field apply_operator(const EllipticSystem& sys, const Field& x);

// Centered first differences and the 5-point Laplacian, all zero outside the
// interior (Dirichlet padding).
Field d_dx(const Field& f, double h);
Field d_dy(const Field& f, double h);
Field laplacian5(const Field& f, double h);

struct SolveResult {
  Field x;
  int iters = 0;
  bool converged = false;
  double rel_residual = 0.0;
};

// Successive over-relaxation, omega = 1.5, lexicographic sweeps. Stops when
// the true relative residual ||b - A x|| / ||b|| drops below tol.
SolveResult solve_sor(const EllipticSystem& sys, const Field& b, double tol, int maxit);

// Conjugate gradient with Jacobi (diagonal) preconditioning; same contract.
SolveResult solve_pcg(const EllipticSystem& sys, const Field& b, double tol, int maxit);

// Solves with the configured solver and throws SolverFailure on
// non-convergence.
Field solve_elliptic(const ModelConfig& cfg, const Field& b);

// Steady elliptic source term: forcing * sin(pi x) * sin(pi y).
Field forcing_field(const ModelConfig& cfg);

// Deterministic smooth initial tracer: the sum of two Gaussian bumps whose
// centers, widths and amplitudes are drawn from the seeded generator
// (centers in [0.25,0.75]^2, widths in [0.08,0.15], amplitudes in [0.5,1]).
State init_state(const ModelConfig& cfg, std::uint64_t seed);

State step(const State& s, const ModelConfig& cfg);

// Directional derivative of `step` at s in direction ds. In Blackbox mode
// the tangent elliptic system is handed to the primal solver; in
// Straightforward mode the solver iterations themselves are differentiated
// in lockstep, with termination controlled by the primal residual only.
TangentState tangent_step(const State& s, const TangentState& ds, const ModelConfig& cfg);

// Transpose of the tangent map at s_in, propagating the output cotangent to
// an input cotangent. psi, u, v are recomputed from s_in, and the adjoint
// elliptic system is solved with the primal solver (A is self-adjoint).
CotangentState adjoint_step(const State& s_in, const CotangentState& bar_out,
                            const ModelConfig& cfg);

struct TangentSolveResult {
  Field x;       // primal solution
  Field dx;      // derivative iterate at primal termination
  int iters = 0;
  bool converged = false;
};

// Primal iteration and its hand-differentiated copy run in lockstep;
// convergence is decided by the primal residual alone. For SOR (a linear
// fixed point) the derivative converges to A^{-1} db; for PCG the scalar
// products make the iteration nonlinear and the derivative at primal
// termination need not match. `force_iters` > 0 ignores tol and runs that
// many iterations (breakdown-guarded), the "very high iteration count" mode.
TangentSolveResult tangent_solve_straightforward(SolverKind kind, const EllipticSystem& sys,
                                                 const Field& b, const Field& db, double tol,
                                                 int maxit, int force_iters = 0);

}  // namespace ckpt
