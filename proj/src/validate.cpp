#include "ckpt/validate.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ckpt/rng.hpp"

namespace ckpt {

TangentState normal_direction(int n, std::uint64_t seed) {
  Rng rng(seed);
  TangentState ds;
  ds.t = Field(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ds.t.at(i, j) = rng.normal();
  return ds;
}

Field divided_difference(const State& s0, const TangentState& ds0, int l, const ModelConfig& cfg,
                         double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("divided_difference: eps must be > 0");
  State sp = s0;
  axpy(eps, ds0.t, sp.t);
  Field fp = run_forward(sp, l, cfg).t;
  Field f0 = run_forward(s0, l, cfg).t;
  fp -= f0;
  fp *= 1.0 / eps;
  return fp;
}

DotProductReport dot_product_test(const ModelConfig& cfg, int l, std::uint64_t seed, double eps,
                                  const Schedule& schedule) {
  State s0 = init_state(cfg, cfg.seed);
  TangentState ds0 = normal_direction(cfg.n, seed);

  Field dd = divided_difference(s0, ds0, l, cfg, eps);
  auto [sf, ydot] = run_tangent(s0, ds0, l, cfg);
  CotangentState xbar = run_adjoint(s0, CotangentState{ydot.t}, l, cfg, schedule);

  DotProductReport r;
  r.epsilon = eps;
  r.dd_dd = dot(dd, dd);
  r.ydot_ydot = dot(ydot.t, ydot.t);
  r.xbar_xdot = dot(xbar.t, ds0.t);
  r.tangent_adjoint_rel =
      r.ydot_ydot != 0.0 ? std::fabs(r.ydot_ydot - r.xbar_xdot) / std::fabs(r.ydot_ydot) : 0.0;
  double yn = norm2(ydot.t);
  r.dd_tangent_rel = yn > 0.0 ? norm2(dd - ydot.t) / yn : norm2(dd);
  return r;
}

std::vector<EpsSweepRow> eps_sweep(const ModelConfig& cfg, int l, std::uint64_t seed,
                                   const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw std::invalid_argument("eps_sweep: eps_list must not be empty");
  State s0 = init_state(cfg, cfg.seed);
  TangentState ds0 = normal_direction(cfg.n, seed);
  auto [sf, ydot] = run_tangent(s0, ds0, l, cfg);
  double yn = norm2(ydot.t);

  std::vector<EpsSweepRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) {
    Field dd = divided_difference(s0, ds0, l, cfg, eps);
    EpsSweepRow row;
    row.eps = eps;
    row.rel_error = yn > 0.0 ? norm2(dd - ydot.t) / yn : norm2(dd);
    rows.push_back(row);
  }
  return rows;
}

std::string eps_sweep_csv(const std::vector<EpsSweepRow>& rows) {
  std::string out = "eps,rel_error\n";
  char buf[80];
  for (const EpsSweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.eps, r.rel_error);
    out += buf;
  }
  return out;
}

Field fd_gradient_oracle(const ScalarFunctional& functional, const State& s0, int l,
                         const ModelConfig& cfg, double rel_step) {
  if (cfg.n > 7 || l > 5)
    throw std::invalid_argument("fd_gradient_oracle: meant for n <= 7, l <= 5 only");
  double scale = rms(s0.t);
  if (scale == 0.0) scale = 1.0;
  double delta = rel_step * scale;
  Field g(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.n; ++j) {
      State sp = s0, sm = s0;
      sp.t.at(i, j) += delta;
      sm.t.at(i, j) -= delta;
      double jp = evaluate_functional(functional, sp, l, cfg);
      double jm = evaluate_functional(functional, sm, l, cfg);
      g.at(i, j) = (jp - jm) / (2.0 * delta);
    }
  }
  return g;
}

std::string DotProductReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epsilon %.6g\n"
                "dd_dd %.15e\n"
                "ydot_ydot %.15e\n"
                "xbar_xdot %.15e\n"
                "tangent_adjoint_rel %.6g\n"
                "dd_tangent_rel %.6g\n",
                epsilon, dd_dd, ydot_ydot, xbar_xdot, tangent_adjoint_rel, dd_tangent_rel);
  return buf;
}

}  // namespace ckpt
