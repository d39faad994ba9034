#include "ckpt/apps.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include "ckpt/rng.hpp"

namespace ckpt {

namespace {

Field masked_row(const Field& f, int row) {
  Field m(f.n());
  for (int j = 0; j < f.n(); ++j) m.at(row, j) = f.at(row, j);
  return m;
}

}  // namespace

double TransportFunctional::contribution(int k, const State& s, const ModelConfig& cfg) const {
  if (k == 0) return 0.0;
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);
  Field v = d_dx(psi, cfg.h());
  double sum = 0.0;
  for (int j = 0; j < cfg.n; ++j) sum += s.t.at(row_, j) * v.at(row_, j);
  return cfg.dt * sum;
}

void TransportFunctional::add_cotangent(int k, const State& s, Field& bar,
                                        const ModelConfig& cfg) const {
  if (k == 0) return;
  const double h = cfg.h();
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);
  Field v = d_dx(psi, h);

  // Direct dependence through T on the selected row.
  for (int j = 0; j < cfg.n; ++j) bar.at(row_, j) += cfg.dt * v.at(row_, j);

  // Dependence through v = d/dx of psi(T); d/dx is skew-adjoint and A is
  // self-adjoint, so the chain collapses onto one primal solve.
  Field bar_psi = d_dx(masked_row(s.t, row_), h);
  bar_psi *= -cfg.dt;
  Field w = solve_elliptic(cfg, bar_psi);
  axpy(cfg.alpha, w, bar);
}

double heat_transport_J(std::span<const State> trajectory, int row, const ModelConfig& cfg) {
  TransportFunctional f(row);
  double total = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k)
    total += f.contribution(int(k), trajectory[k], cfg);
  return total;
}

Field sensitivity_map(const ModelConfig& cfg, int l, int row, const Schedule& schedule) {
  if (row < 0 || row >= cfg.n) throw std::invalid_argument("sensitivity_map: row out of range");
  State s0 = init_state(cfg, cfg.seed);
  TransportFunctional f(row);
  CotangentState zero{Field(cfg.n)};
  return run_adjoint(s0, zero, l, cfg, schedule, &f).t;
}

TwinExperiment make_twin_observations(const ModelConfig& cfg, int l, std::uint64_t seed, int row) {
  if (row < 0) row = cfg.n / 2;
  if (row >= cfg.n) throw std::invalid_argument("make_twin_observations: row out of range");
  TwinExperiment twin;
  twin.truth = init_state(cfg, seed);
  twin.obs.n = cfg.n;
  twin.obs.l = l;
  twin.obs.row = row;
  twin.obs.psi.reserve(l);
  twin.obs.t_row.reserve(l);
  run_forward(twin.truth, l, cfg, [&](const State& s) {
    Field b = forcing_field(cfg);
    axpy(cfg.alpha, s.t, b);
    twin.obs.psi.push_back(solve_elliptic(cfg, b));
    std::vector<double> slice(cfg.n);
    for (int j = 0; j < cfg.n; ++j) slice[j] = s.t.at(row, j);
    twin.obs.t_row.push_back(std::move(slice));
  });
  return twin;
}

double MisfitFunctional::contribution(int k, const State& s, const ModelConfig& cfg) const {
  if (k == 0) return 0.0;
  const ObservationSet& o = *obs_;
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);
  psi -= o.psi[std::size_t(k - 1)];
  double sum = dot(psi, psi);
  const std::vector<double>& row_obs = o.t_row[std::size_t(k - 1)];
  for (int j = 0; j < cfg.n; ++j) {
    double r = s.t.at(o.row, j) - row_obs[std::size_t(j)];
    sum += r * r;
  }
  return cfg.dt * sum;
}

void MisfitFunctional::add_cotangent(int k, const State& s, Field& bar,
                                     const ModelConfig& cfg) const {
  if (k == 0) return;
  const ObservationSet& o = *obs_;
  Field b = forcing_field(cfg);
  axpy(cfg.alpha, s.t, b);
  Field psi = solve_elliptic(cfg, b);
  psi -= o.psi[std::size_t(k - 1)];
  psi *= 2.0 * cfg.dt;
  Field w = solve_elliptic(cfg, psi);  // A self-adjoint
  axpy(cfg.alpha, w, bar);
  const std::vector<double>& row_obs = o.t_row[std::size_t(k - 1)];
  for (int j = 0; j < cfg.n; ++j)
    bar.at(o.row, j) += 2.0 * cfg.dt * (s.t.at(o.row, j) - row_obs[std::size_t(j)]);
}

namespace {

// Directional derivative of J through the tangent model, for spot checks.
double tangent_directional(const ScalarFunctional& f, const State& s0, const TangentState& dir,
                           int l, const ModelConfig& cfg) {
  State s = s0;
  TangentState ds = dir;
  Field g0(cfg.n);
  f.add_cotangent(0, s, g0, cfg);
  double dj = dot(g0, ds.t);
  for (int k = 1; k <= l; ++k) {
    TangentState ds_next = tangent_step(s, ds, cfg);
    s = step(s, cfg);
    ds = std::move(ds_next);
    Field gk(cfg.n);
    f.add_cotangent(k, s, gk, cfg);
    dj += dot(gk, ds.t);
  }
  return dj;
}

}  // namespace

AssimilationResult assimilate(const ModelConfig& cfg, int l, const TwinExperiment& twin,
                              double noise_amplitude, std::uint64_t seed, int max_iters,
                              const Schedule& schedule) {
  MisfitFunctional misfit(twin.obs);
  AssimilationResult res;

  Rng rng(seed);
  Field x = twin.truth.t;
  double noise_scale = noise_amplitude * rms(twin.truth.t);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j) x.at(i, j) += noise_scale * rng.normal();
  res.initial_guess = x;

  auto j_of = [&](const Field& field) {
    State s{field, 0};
    return evaluate_functional(misfit, s, l, cfg);
  };
  auto grad_of = [&](const Field& field) {
    State s{field, 0};
    CotangentState zero{Field(cfg.n)};
    return run_adjoint(s, zero, l, cfg, schedule, &misfit).t;
  };

  double j0 = j_of(x);
  double j_cur = j0;
  double target = j0 * 1e-2;
  double t = 1.0;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 40;

  Field g = grad_of(x);
  res.trace.push_back({0, j_cur, norm2(g), 0.0});
  res.converged = j_cur <= target;  // noise_amplitude == 0 gives J == 0

  for (int iter = 1; !res.converged && iter <= max_iters; ++iter) {
    if ((iter - 1) % 10 == 0) {
      Rng dir_rng(seed ^ (0x5bd1e995ULL * std::uint64_t(iter)));
      TangentState dir{Field(cfg.n)};
      for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j) dir.t.at(i, j) = dir_rng.normal();
      double dj_tan = tangent_directional(misfit, State{x, 0}, dir, l, cfg);
      double dj_adj = dot(g, dir.t);
      double denom = std::max(std::fabs(dj_tan), std::fabs(dj_adj));
      ++res.spot_checks_run;
      if (denom == 0.0 || std::fabs(dj_tan - dj_adj) / denom <= 1e-6) ++res.spot_checks_passed;
    }

    double gg = dot(g, g);
    if (gg == 0.0) break;

    // Armijo backtracking on J(x - t g), with growth while the test passes.
    t *= 2.0;
    double j_trial = j_of(x - t * g);
    int halvings = 0;
    while (j_trial > j_cur - kArmijo * t * gg && halvings < kMaxHalvings) {
      t *= 0.5;
      ++halvings;
      j_trial = j_of(x - t * g);
    }
    if (j_trial > j_cur - kArmijo * t * gg) {
      res.line_search_failed = true;
      break;
    }
    if (halvings == 0) {
      for (int grow = 0; grow < 40; ++grow) {
        double t2 = t * 2.0;
        double j2 = j_of(x - t2 * g);
        if (j2 > j_cur - kArmijo * t2 * gg || j2 >= j_trial) break;
        t = t2;
        j_trial = j2;
      }
    }

    x -= t * g;
    j_cur = j_trial;
    g = grad_of(x);
    res.trace.push_back({iter, j_cur, norm2(g), t});
    res.converged = j_cur <= target;
  }

  res.recovered = x;
  return res;
}

std::string assimilation_trace_csv(const AssimilationResult& r) {
  std::string out = "iter,J,grad_norm,step\n";
  char buf[128];
  for (const AssimilationIteration& it : r.trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", it.iter, it.j, it.grad_norm,
                  it.step_len);
    out += buf;
  }
  return out;
}

}  // namespace ckpt
