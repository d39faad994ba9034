#include "ckpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "ckpt/rng.hpp"

namespace ckpt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSorOmega = 1.5;

double stability_number(const ModelConfig& cfg) {
  // Conservative velocity scale: |psi| <= ||rhs||_inf / 8 by the maximum
  // principle, tracer bounded by ~2 (two unit bumps), gradients ~4*psi.
  double rhs_bound = 2.0 * std::fabs(cfg.alpha) + std::fabs(cfg.forcing);
  double umax_est = 0.5 * rhs_bound;
  double h = cfg.h();
  return cfg.dt * (4.0 * cfg.kappa / (h * h) + umax_est / h);
}

}  // namespace

void ModelConfig::validate() const {
  auto bad = [](const std::string& msg) { throw std::invalid_argument("ModelConfig: " + msg); };
  if (n < 3) bad("n must be >= 3");
  if (!(dt > 0.0)) bad("dt must be > 0");
  if (kappa < 0.0) bad("kappa must be >= 0");
  if (!(solver_tol > 0.0)) bad("solver_tol must be > 0");
  if (solver_maxit < 1) bad("solver_maxit must be >= 1");
  double s = stability_number(*this);
  if (s > 0.9) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "stability bound violated: dt*(4*kappa/h^2 + Umax/h) = %.6g > 0.9", s);
    bad(buf);
  }
}

Field apply_operator(const EllipticSystem& sys, const Field& x) {
  Field y(sys.n);
  double ih2 = 1.0 / (sys.h * sys.h);
  for (int i = 0; i < sys.n; ++i)
    for (int j = 0; j < sys.n; ++j)
      y.at(i, j) = (4.0 * x.at(i, j) - x.pad(i - 1, j) - x.pad(i + 1, j) - x.pad(i, j - 1) -
                    x.pad(i, j + 1)) *
                   ih2;
  return y;
}

Field d_dx(const Field& f, double h) {
  Field g(f.n());
  double c = 0.5 / h;
  for (int i = 0; i < f.n(); ++i)
    for (int j = 0; j < f.n(); ++j) g.at(i, j) = c * (f.pad(i + 1, j) - f.pad(i - 1, j));
  return g;
}

Field d_dy(const Field& f, double h) {
  Field g(f.n());
  double c = 0.5 / h;
  for (int i = 0; i < f.n(); ++i)
    for (int j = 0; j < f.n(); ++j) g.at(i, j) = c * (f.pad(i, j + 1) - f.pad(i, j - 1));
  return g;
}

Field laplacian5(const Field& f, double h) {
  Field g(f.n());
  double ih2 = 1.0 / (h * h);
  for (int i = 0; i < f.n(); ++i)
    for (int j = 0; j < f.n(); ++j)
      g.at(i, j) = (f.pad(i - 1, j) + f.pad(i + 1, j) + f.pad(i, j - 1) + f.pad(i, j + 1) -
                    4.0 * f.at(i, j)) *
                   ih2;
  return g;
}

SolveResult solve_sor(const EllipticSystem& sys, const Field& b, double tol, int maxit) {
  SolveResult res;
  res.x = Field(sys.n);
  double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  double h2 = sys.h * sys.h;
  Field& x = res.x;
  for (int it = 1; it <= maxit; ++it) {
    for (int i = 0; i < sys.n; ++i) {
      for (int j = 0; j < sys.n; ++j) {
        double gs = 0.25 * (h2 * b.at(i, j) + x.pad(i - 1, j) + x.pad(i + 1, j) +
                            x.pad(i, j - 1) + x.pad(i, j + 1));
        x.at(i, j) = (1.0 - kSorOmega) * x.at(i, j) + kSorOmega * gs;
      }
    }
    res.iters = it;
    res.rel_residual = norm2(b - apply_operator(sys, x)) / bnorm;
    if (res.rel_residual <= tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

SolveResult solve_pcg(const EllipticSystem& sys, const Field& b, double tol, int maxit) {
  SolveResult res;
  res.x = Field(sys.n);
  double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  double inv_diag = sys.h * sys.h / 4.0;  // Jacobi preconditioner
  Field& x = res.x;
  Field r = b;
  Field z = inv_diag * r;
  Field p = z;
  double rho = dot(r, z);
  for (int it = 1; it <= maxit; ++it) {
    Field q = apply_operator(sys, p);
    double pq = dot(p, q);
    if (pq <= 0.0) break;  // breakdown; A is SPD so r must be ~0
    double a = rho / pq;
    axpy(a, p, x);
    axpy(-a, q, r);
    res.iters = it;
    res.rel_residual = norm2(b - apply_operator(sys, x)) / bnorm;
    if (res.rel_residual <= tol) {
      res.converged = true;
      return res;
    }
    z = inv_diag * r;
    double rho2 = dot(r, z);
    if (rho2 <= 0.0) break;
    double beta = rho2 / rho;
    p *= beta;
    p += z;
    rho = rho2;
  }
  res.rel_residual = norm2(b - apply_operator(sys, x)) / bnorm;
  res.converged = res.rel_residual <= tol;
  return res;
}

Field solve_elliptic(const ModelConfig& cfg, const Field& b) {
  EllipticSystem sys = elliptic_system(cfg);
  SolveResult r = cfg.solver == SolverKind::Sor ? solve_sor(sys, b, cfg.solver_tol, cfg.solver_maxit)
                                                : solve_pcg(sys, b, cfg.solver_tol, cfg.solver_maxit);
  if (!r.converged) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "elliptic solver did not converge: rel_residual %.3g after %d iterations",
                  r.rel_residual, r.iters);
    throw SolverFailure(buf);
  }
  return std::move(r.x);
}

Field forcing_field(const ModelConfig& cfg) {
  Field f(cfg.n);
  double h = cfg.h();
  for (int i = 0; i < cfg.n; ++i) {
    double x = (i + 1) * h;
    for (int j = 0; j < cfg.n; ++j) {
      double y = (j + 1) * h;
      f.at(i, j) = cfg.forcing * std::sin(kPi * x) * std::sin(kPi * y);
    }
  }
  return f;
}

State init_state(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  double cx[2], cy[2], sig[2], amp[2];
  for (int b = 0; b < 2; ++b) {
    cx[b] = rng.uniform(0.25, 0.75);
    cy[b] = rng.uniform(0.25, 0.75);
    sig[b] = rng.uniform(0.08, 0.15);
    amp[b] = rng.uniform(0.5, 1.0);
  }
  State s;
  s.t = Field(cfg.n);
  s.step = 0;
  double h = cfg.h();
  for (int i = 0; i < cfg.n; ++i) {
    double x = (i + 1) * h;
    for (int j = 0; j < cfg.n; ++j) {
      double y = (j + 1) * h;
      double v = 0.0;
      for (int b = 0; b < 2; ++b) {
        double dx = x - cx[b], dy = y - cy[b];
        v += amp[b] * std::exp(-(dx * dx + dy * dy) / (2.0 * sig[b] * sig[b]));
      }
      s.t.at(i, j) = v;
    }
  }
  return s;
}

State step(const State& s, const ModelConfig& cfg) {
  const double h = cfg.h();
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);

  Field u = d_dy(psi, h);
  u *= -1.0;
  Field v = d_dx(psi, h);

  Field tx = d_dx(s.t, h);
  Field ty = d_dy(s.t, h);
  Field lap = laplacian5(s.t, h);

  State out;
  out.step = s.step + 1;
  out.t = Field(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j)
      out.t.at(i, j) = s.t.at(i, j) + cfg.dt * (-u.at(i, j) * tx.at(i, j) -
                                                v.at(i, j) * ty.at(i, j) +
                                                cfg.kappa * lap.at(i, j));
  return out;
}

TangentState tangent_step(const State& s, const TangentState& ds, const ModelConfig& cfg) {
  const double h = cfg.h();
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field db = cfg.alpha * ds.t;

  Field psi, dpsi;
  if (cfg.tangent_mode == TangentMode::Blackbox) {
    // The tangent elliptic system is linear with the same operator, so the
    // original solver is reused on the differentiated right-hand side.
    psi = solve_elliptic(cfg, b);
    dpsi = solve_elliptic(cfg, db);
  } else {
    EllipticSystem sys = elliptic_system(cfg);
    TangentSolveResult r = tangent_solve_straightforward(cfg.solver, sys, b, db, cfg.solver_tol,
                                                         cfg.solver_maxit);
    if (!r.converged) throw SolverFailure("straightforward tangent solve did not converge");
    psi = std::move(r.x);
    dpsi = std::move(r.dx);
  }

  Field u = d_dy(psi, h);
  u *= -1.0;
  Field v = d_dx(psi, h);
  Field du = d_dy(dpsi, h);
  du *= -1.0;
  Field dv = d_dx(dpsi, h);

  Field tx = d_dx(s.t, h);
  Field ty = d_dy(s.t, h);
  Field dtx = d_dx(ds.t, h);
  Field dty = d_dy(ds.t, h);
  Field dlap = laplacian5(ds.t, h);

  TangentState out;
  out.t = Field(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j)
      out.t.at(i, j) =
          ds.t.at(i, j) + cfg.dt * (-du.at(i, j) * tx.at(i, j) - u.at(i, j) * dtx.at(i, j) -
                                    dv.at(i, j) * ty.at(i, j) - v.at(i, j) * dty.at(i, j) +
                                    cfg.kappa * dlap.at(i, j));
  return out;
}

CotangentState adjoint_step(const State& s_in, const CotangentState& bar_out,
                            const ModelConfig& cfg) {
  const double h = cfg.h();
  // Recompute psi, u, v from the step's input state.
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s_in.t, b);
  Field psi = solve_elliptic(cfg, b);
  Field u = d_dy(psi, h);
  u *= -1.0;
  Field v = d_dx(psi, h);
  Field tx = d_dx(s_in.t, h);
  Field ty = d_dy(s_in.t, h);

  const Field& bar = bar_out.t;

  // Transpose of the advection/diffusion update. The centered differences
  // are skew-adjoint and the Laplacian self-adjoint under Dirichlet padding.
  Field ubar(cfg.n), vbar(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j) {
      ubar.at(i, j) = u.at(i, j) * bar.at(i, j);
      vbar.at(i, j) = v.at(i, j) * bar.at(i, j);
    }
  Field bar_t = bar;
  Field t1 = d_dx(ubar, h);
  Field t2 = d_dy(vbar, h);
  Field t3 = laplacian5(bar, h);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j)
      bar_t.at(i, j) += cfg.dt * (t1.at(i, j) + t2.at(i, j) + cfg.kappa * t3.at(i, j));

  // Velocity cotangents flow back through psi; A is self-adjoint so the
  // adjoint elliptic system is solved with the primal solver.
  Field txbar(cfg.n), tybar(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j) {
      txbar.at(i, j) = tx.at(i, j) * bar.at(i, j);
      tybar.at(i, j) = ty.at(i, j) * bar.at(i, j);
    }
  Field bar_psi = d_dx(tybar, h);
  bar_psi -= d_dy(txbar, h);
  bar_psi *= cfg.dt;
  Field w = solve_elliptic(cfg, bar_psi);
  axpy(cfg.alpha, w, bar_t);

  return CotangentState{std::move(bar_t)};
}

TangentSolveResult tangent_solve_straightforward(SolverKind kind, const EllipticSystem& sys,
                                                 const Field& b, const Field& db, double tol,
                                                 int maxit, int force_iters) {
  TangentSolveResult res;
  res.x = Field(sys.n);
  res.dx = Field(sys.n);
  double bnorm = norm2(b);
  if (bnorm == 0.0 && force_iters <= 0) {
    // Zero primal system: the primal loop would not run at all, and neither
    // does its derivative.
    res.converged = true;
    return res;
  }
  int iters_wanted = force_iters > 0 ? std::min(force_iters, maxit) : maxit;

  if (kind == SolverKind::Sor) {
    double h2 = sys.h * sys.h;
    Field& x = res.x;
    Field& dx = res.dx;
    for (int it = 1; it <= iters_wanted; ++it) {
      for (int i = 0; i < sys.n; ++i) {
        for (int j = 0; j < sys.n; ++j) {
          double gs = 0.25 * (h2 * b.at(i, j) + x.pad(i - 1, j) + x.pad(i + 1, j) +
                              x.pad(i, j - 1) + x.pad(i, j + 1));
          double dgs = 0.25 * (h2 * db.at(i, j) + dx.pad(i - 1, j) + dx.pad(i + 1, j) +
                               dx.pad(i, j - 1) + dx.pad(i, j + 1));
          x.at(i, j) = (1.0 - kSorOmega) * x.at(i, j) + kSorOmega * gs;
          dx.at(i, j) = (1.0 - kSorOmega) * dx.at(i, j) + kSorOmega * dgs;
        }
      }
      res.iters = it;
      // Convergence test on the non-differentiated variables only.
      double rel = bnorm > 0.0 ? norm2(b - apply_operator(sys, x)) / bnorm : 0.0;
      if (force_iters <= 0 && rel <= tol) {
        res.converged = true;
        return res;
      }
    }
    res.converged = force_iters > 0;
    return res;
  }

  // PCG with every statement differentiated; the scalar products make the
  // derivative recursion nonlinear in the inputs.
  double inv_diag = sys.h * sys.h / 4.0;
  Field& x = res.x;
  Field& dx = res.dx;
  Field r = b, dr = db;
  Field z = inv_diag * r, dz = inv_diag * dr;
  Field p = z, dp = dz;
  double rho = dot(r, z);
  double drho = dot(dr, z) + dot(r, dz);
  for (int it = 1; it <= iters_wanted; ++it) {
    Field q = apply_operator(sys, p);
    Field dq = apply_operator(sys, dp);
    double pq = dot(p, q);
    if (pq <= 0.0) break;
    double dpq = dot(dp, q) + dot(p, dq);
    double a = rho / pq;
    double da = (drho * pq - rho * dpq) / (pq * pq);
    axpy(a, p, x);
    axpy(da, p, dx);
    axpy(a, dp, dx);
    axpy(-a, q, r);
    axpy(-da, q, dr);
    axpy(-a, dq, dr);
    res.iters = it;
    double rel = bnorm > 0.0 ? norm2(b - apply_operator(sys, x)) / bnorm : 0.0;
    if (force_iters <= 0 && rel <= tol) {
      res.converged = true;
      return res;
    }
    // Past the round-off floor the recurrences only amplify noise and the
    // scalar divisions eventually break down; stop there even when a higher
    // iteration count was forced.
    if (rel <= 1e-14 || !std::isfinite(rel)) break;
    z = inv_diag * r;
    dz = inv_diag * dr;
    double rho2 = dot(r, z);
    if (rho2 <= 0.0) break;
    double drho2 = dot(dr, z) + dot(r, dz);
    double beta = rho2 / rho;
    double dbeta = (drho2 * rho - rho2 * drho) / (rho * rho);
    // dp uses the pre-update direction.
    Field dp_new = dz;
    axpy(dbeta, p, dp_new);
    axpy(beta, dp, dp_new);
    dp = std::move(dp_new);
    p *= beta;
    p += z;
    rho = rho2;
    drho = drho2;
  }
  if (force_iters > 0) {
    res.converged = true;
  } else {
    double rel = bnorm > 0.0 ? norm2(b - apply_operator(sys, x)) / bnorm : 0.0;
    res.converged = rel <= tol;
  }
  return res;
}

}  // namespace ckpt
