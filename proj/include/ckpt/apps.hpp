#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ckpt/driver.hpp"
#include "ckpt/model.hpp"

namespace ckpt {

// J = dt * sum_{k=1..l} sum_j T_k(row, j) * v_k(row, j), the tracer flux
// through one grid row, with v = dpsi/dx the cross-row velocity.
class TransportFunctional : public ScalarFunctional {
 public:
  explicit TransportFunctional(int row) : row_(row) {}

  double contribution(int k, const State& s, const ModelConfig& cfg) const override;
  void add_cotangent(int k, const State& s, Field& bar, const ModelConfig& cfg) const override;

  int row() const { return row_; }

 private:
  int row_;
};

// Convenience over a stored trajectory s_0..s_l.
double heat_transport_J(std::span<const State> trajectory, int row, const ModelConfig& cfg);

// Gradient of the transport functional with respect to the initial tracer
// field, from one checkpointed adjoint integration.
Field sensitivity_map(const ModelConfig& cfg, int l, int row, const Schedule& schedule);

// Per-step observables extracted from a truth run: the full psi field (sea
// surface height analog) and one fixed tracer row (second observable), for
// trajectory indices 1..l.
struct ObservationSet {
  int n = 0;
  int l = 0;
  int row = 0;
  std::vector<Field> psi;                  // psi[k-1] observed at index k
  std::vector<std::vector<double>> t_row;  // t_row[k-1] observed at index k
};

struct TwinExperiment {
  State truth;  // the initial state the assimilation should recover
  ObservationSet obs;
};

// Runs the truth trajectory from init_state(cfg, seed) and extracts the
// observables after every step. row < 0 selects the middle row.
TwinExperiment make_twin_observations(const ModelConfig& cfg, int l, std::uint64_t seed,
                                      int row = -1);

// J = dt * sum_{k=1..l} ( ||psi_k - psi_k^o||^2 + ||T_k(row,.) - T_k^o||^2 ),
// both observation terms with unit weight.
class MisfitFunctional : public ScalarFunctional {
 public:
  explicit MisfitFunctional(const ObservationSet& obs) : obs_(&obs) {}

  double contribution(int k, const State& s, const ModelConfig& cfg) const override;
  void add_cotangent(int k, const State& s, Field& bar, const ModelConfig& cfg) const override;

 private:
  const ObservationSet* obs_;
};

struct AssimilationIteration {
  int iter = 0;
  double j = 0.0;
  double grad_norm = 0.0;
  double step_len = 0.0;
};

struct AssimilationResult {
  std::vector<AssimilationIteration> trace;
  Field initial_guess;  // truth + white noise
  Field recovered;      // minimizer found
  bool converged = false;          // J reduced by at least 100x
  bool line_search_failed = false;
  int spot_checks_run = 0;
  int spot_checks_passed = 0;
};

// Twin-experiment variational assimilation: starting from the truth initial
// field perturbed by seeded white noise (amplitude relative to the field
// RMS), minimizes the misfit by steepest descent with an Armijo backtracking
// line search (c = 1e-4, halving, at most 40 halvings; the accepted step is
// also grown by doubling while the test keeps passing). Every gradient comes
// from one checkpointed adjoint run over `schedule`. Stops when J has
// dropped by two orders of magnitude or after max_iters iterations. Every
// 10th iteration the gradient is spot-checked against a tangent-mode
// directional derivative.
AssimilationResult assimilate(const ModelConfig& cfg, int l, const TwinExperiment& twin,
                              double noise_amplitude, std::uint64_t seed, int max_iters,
                              const Schedule& schedule);

std::string assimilation_trace_csv(const AssimilationResult& r);

}  // namespace ckpt
