#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ckpt/driver.hpp"
#include "ckpt/model.hpp"

namespace ckpt {

// The three-way correctness test: with an arbitrary direction Xdot,
//   DD = (F(X + eps*Xdot) - F(X)) / eps       (divided differences)
//   Ydot = F'(X) * Xdot                       (tangent sweep)
//   Xbar = F'*(X) * Ydot                      (adjoint sweep, Ybar := Ydot)
// must satisfy (DD.DD) ~ (Ydot.Ydot) = (Xbar.Xdot). The tangent/adjoint pair
// agrees to round-off; DD carries the finite-difference approximation error.
struct DotProductReport {
  double epsilon = 0.0;
  double dd_dd = 0.0;
  double ydot_ydot = 0.0;
  double xbar_xdot = 0.0;
  double tangent_adjoint_rel = 0.0;  // |ydot_ydot - xbar_xdot| / ydot_ydot
  double dd_tangent_rel = 0.0;       // ||DD - Ydot|| / ||Ydot||, reported only

  std::string to_text() const;
};

// Unit-normal direction field drawn from the seeded generator.
TangentState normal_direction(int n, std::uint64_t seed);

// Forward-difference quotient of the final state in direction ds0.
Field divided_difference(const State& s0, const TangentState& ds0, int l, const ModelConfig& cfg,
                         double eps);

DotProductReport dot_product_test(const ModelConfig& cfg, int l, std::uint64_t seed, double eps,
                                  const Schedule& schedule);

struct EpsSweepRow {
  double eps = 0.0;
  double rel_error = 0.0;  // ||DD(eps) - Ydot|| / ||Ydot||
};

std::vector<EpsSweepRow> eps_sweep(const ModelConfig& cfg, int l, std::uint64_t seed,
                                   const std::vector<double>& eps_list);

std::string eps_sweep_csv(const std::vector<EpsSweepRow>& rows);

// Brute-force gradient of a functional by central differences on every
// component of the initial tracer field, with step rel_step relative to the
// field's RMS scale. Only meant for tiny configurations (n <= 7, l <= 5).
Field fd_gradient_oracle(const ScalarFunctional& functional, const State& s0, int l,
                         const ModelConfig& cfg, double rel_step = 1e-6);

}  // namespace ckpt
