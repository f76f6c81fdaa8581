#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "precmom/errors.hpp"
#include "precmom/objective.hpp"
#include "precmom/preconditioner.hpp"
#include "precmom/rng.hpp"
#include "precmom/vectors.hpp"

namespace precmom {

// gd and heavy_ball are phb with an identity preconditioner (gd additionally
// with beta1 = 0); nesterov is pn with an identity preconditioner. Baselines
// share the preconditioned code paths, they are not separate
// implementations.
enum class Method { Gd, HeavyBall, Nesterov, Phb, Pn };

inline bool is_momentum_family(Method m) {
  return m == Method::Gd || m == Method::HeavyBall || m == Method::Phb;
}

// Assumed spectral bounds e*I <= D_hat <= Gamma*I that theory parameters are
// computed from. Exact (1, 1) for identity scaling; for data-dependent rules
// they are the caller's assumption and the run reports what was observed.
struct TheoryBounds {
  double e = 1.0;
  double Gamma = 1.0;
};

struct PhbState {
  DenseVector x;
  DenseVector v;  // momentum buffer V_k
  long k = 0;
};

struct PnState {
  DenseVector x;    // main sequence x^k
  DenseVector x_f;  // gradient-step sequence x_f^k
  DenseVector x_g;  // extrapolation point x_g^k
  long k = 0;
};

struct PnParams {
  double gamma = 0.0;
  double xi = 1.0;     // extrapolation strength, >= 0
  double theta = 0.5;  // convex-combination weight in [0, 1]
};

// gamma = (1 - beta1)^2 e / (12 L); the effective step gamma/(1-beta1) then
// stays within e/(4L) with a factor-3 margin.
inline double phb_theory_gamma(double L, double e, double beta1) {
  if (!(L > 0.0) || !(e > 0.0)) {
    throw InvalidConstantsError("phb_theory_gamma requires L > 0 and e > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) {
    throw InvalidConstantsError("phb_theory_gamma requires beta1 in [0, 1)");
  }
  return (1.0 - beta1) * (1.0 - beta1) * e / (12.0 * L);
}

inline double momentum_scale(double gamma, double beta1) {
  return gamma / (1.0 - beta1);
}

// gamma = e/L, xi = sqrt(L Gamma / (mu e)), theta = xi / (1 + xi).
inline PnParams pn_theory_params(double L, double mu, double e, double Gamma) {
  if (!(mu > 0.0) || !(L >= mu)) {
    throw InvalidConstantsError("pn_theory_params requires 0 < mu <= L");
  }
  if (!(e > 0.0) || !(Gamma >= e)) {
    throw InvalidConstantsError("pn_theory_params requires 0 < e <= Gamma");
  }
  PnParams p;
  p.gamma = e / L;
  p.xi = std::sqrt(L * Gamma / (mu * e));
  p.theta = p.xi / (1.0 + p.xi);
  return p;
}

// Extrapolation matched to an arbitrary (tuned) step: xi = sqrt(Gamma/(gamma mu)).
inline PnParams pn_params_for_gamma(double gamma, double mu, double Gamma) {
  if (!(gamma > 0.0) || !(mu > 0.0) || !(Gamma > 0.0)) {
    throw InvalidConstantsError(
        "pn_params_for_gamma requires positive gamma, mu, Gamma");
  }
  PnParams p;
  p.gamma = gamma;
  p.xi = std::sqrt(Gamma / (gamma * mu));
  p.theta = p.xi / (1.0 + p.xi);
  return p;
}

namespace detail {

// V_{k+1} = beta1 V_k + D_hat^{-1} g, x_{k+1} = x_k - gamma V_{k+1}.
inline void phb_step_core(const DenseVector& x, const DenseVector& v,
                          const DenseVector& g, const DiagMatrix& d_hat,
                          double gamma, double beta1, DenseVector& x_out,
                          DenseVector& v_out) {
  const std::size_t d = x.size();
  x_out.resize(d);
  v_out.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    v_out[i] = beta1 * v[i] + g[i] / d_hat.diag[i];
    x_out[i] = x[i] - gamma * v_out[i];
  }
}

// x_f' = x_g - gamma D_hat^{-1} g, x' = xi (x_f' - x_f) + x_f,
// x_g' = theta x_f' + (1 - theta) x'.
inline void pn_step_core(const DenseVector& x_f, const DenseVector& x_g,
                         const DenseVector& g, const DiagMatrix& d_hat,
                         const PnParams& p, DenseVector& x_f_out,
                         DenseVector& x_out, DenseVector& x_g_out) {
  const std::size_t d = x_f.size();
  x_f_out.resize(d);
  x_out.resize(d);
  x_g_out.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    x_f_out[i] = x_g[i] - p.gamma * g[i] / d_hat.diag[i];
    x_out[i] = p.xi * (x_f_out[i] - x_f[i]) + x_f[i];
    x_g_out[i] = p.theta * x_f_out[i] + (1.0 - p.theta) * x_out[i];
  }
}

}  // namespace detail

// One momentum step followed by the preconditioner transition at the fresh
// point. Pure in both state arguments.
inline std::pair<PhbState, PreconditionerState> phb_step(
    const PhbState& state, const ObjectiveProblem& obj,
    const PreconditionerState& precond, const PrecondRule& rule, double gamma,
    double beta1, RngStream& rng) {
  require_same_dim(state.x.size(), obj.dim(), "phb_step");
  require_same_dim(state.v.size(), precond.d_hat.dim(), "phb_step state");
  DenseVector g = obj.grad(state.x);
  if (!all_finite(g)) {
    throw DivergenceError(state.k, "non-finite gradient");
  }
  PhbState next;
  detail::phb_step_core(state.x, state.v, g, precond.d_hat, gamma, beta1,
                        next.x, next.v);
  next.k = state.k + 1;
  if (!all_finite(next.x)) {
    throw DivergenceError(next.k, "non-finite iterate");
  }
  PreconditionerState p_next = precond_step(precond, rule, obj, next.x, rng);
  return {std::move(next), std::move(p_next)};
}

inline std::pair<PnState, PreconditionerState> pn_step(
    const PnState& state, const ObjectiveProblem& obj,
    const PreconditionerState& precond, const PrecondRule& rule,
    const PnParams& params, RngStream& rng) {
  require_same_dim(state.x_g.size(), obj.dim(), "pn_step");
  DenseVector g = obj.grad(state.x_g);
  if (!all_finite(g)) {
    throw DivergenceError(state.k, "non-finite gradient");
  }
  PnState next;
  detail::pn_step_core(state.x_f, state.x_g, g, precond.d_hat, params, next.x_f,
                       next.x, next.x_g);
  next.k = state.k + 1;
  if (!all_finite(next.x) || !all_finite(next.x_g)) {
    throw DivergenceError(next.k, "non-finite iterate");
  }
  PreconditionerState p_next =
      precond_step(precond, rule, obj, next.x_g, rng);
  return {std::move(next), std::move(p_next)};
}

// Weighted running average with geometric weights w_k = (1-rho)^{-(k+1)},
// rho = mu F / (4 Gamma). Maintained online: the normalized tail weight
// u_k = W_k / w_k obeys u_k = 1 + (1-rho) u_{k-1}, and the average moves by
// (x_k - avg) / u_k.
class OnlineWeightedAverage {
 public:
  explicit OnlineWeightedAverage(double rho) : rho_(rho) {
    if (!(rho > 0.0 && rho < 1.0)) {
      throw InvalidWeightsError(
          "averaging weight ratio mu*F/(4*Gamma) must lie in (0, 1), got " +
          std::to_string(rho));
    }
  }

  void add(const DenseVector& x) {
    if (avg_.empty()) {
      avg_ = x;
      u_ = 1.0;
      return;
    }
    require_same_dim(x.size(), avg_.size(), "weighted average");
    u_ = 1.0 + (1.0 - rho_) * u_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      avg_[i] += (x[i] - avg_[i]) / u_;
    }
  }

  bool empty() const { return avg_.empty(); }
  const DenseVector& value() const {
    if (avg_.empty()) throw InvalidWeightsError("average of zero iterates");
    return avg_;
  }

 private:
  double rho_;
  double u_ = 0.0;
  DenseVector avg_;
};

inline DenseVector averaged_output(const std::vector<DenseVector>& xs,
                                   double mu, double F, double Gamma) {
  if (xs.empty()) throw InvalidWeightsError("average of zero iterates");
  OnlineWeightedAverage avg(mu * F / (4.0 * Gamma));
  for (const DenseVector& x : xs) avg.add(x);
  return avg.value();
}

enum class GammaMode { Explicit, Theory };

struct RunConfig {
  Method method = Method::Gd;
  PrecondRule rule{};  // forced to identity for gd/heavy_ball/nesterov
  GammaMode gamma_mode = GammaMode::Explicit;
  double gamma = 0.0;
  double beta1 = 0.0;  // forced to 0 for gd
  std::optional<PnParams> pn_override;
  long iters = 1000;
  double tol_grad_sq = 0.0;
  std::uint64_t seed = 42;
  double floor_e = 1e-8;
  DenseVector x0;  // empty means the origin
  TheoryBounds bounds{};
  bool average_output = false;  // momentum family only
  bool record_iterates = false;
  // Replaces the objective's own (L, mu) when resolving theory parameters;
  // a testing aid for probing how the guarantees respond to wrong constants.
  std::optional<ObjectiveConstants> constants_override;
};

struct RunRow {
  long iter = 0;
  double f = 0.0;
  double grad_sq = 0.0;
  double elapsed_ms = 0.0;
  double dhat_min = 0.0;
  double dhat_max = 0.0;
  std::optional<double> test_loss;
  std::optional<double> f_avg;
};

struct RunReport {
  std::vector<RunRow> rows;
  bool diverged = false;
  long diverged_at = -1;
  DenseVector x0;
  DenseVector x_final;
  std::optional<DenseVector> x_avg;

  Method method = Method::Gd;
  PrecondRule rule{};
  double gamma = 0.0;
  double beta1 = 0.0;
  PnParams pn{};
  bool used_theory = false;
  double floor_e = 1e-8;
  TheoryBounds bounds{};
  long iters_requested = 0;
  double tol_grad_sq = 0.0;
  double observed_e = 0.0;
  double observed_Gamma = 0.0;
  DiagMatrix dhat_init;  // pristine matrix before any information arrived

  // Full trajectories, populated only when record_iterates was set.
  std::vector<DenseVector> xs, vs, xfs, xgs;
  std::vector<DiagMatrix> dhats;  // dhats[k] scales step k
  std::vector<double> f_xf;       // pn only

  bool reached_tolerance() const {
    return !diverged && !rows.empty() && tol_grad_sq > 0.0 &&
           rows.back().grad_sq <= tol_grad_sq;
  }
};

namespace detail {

inline void resolve_parameters(const RunConfig& cfg,
                               const ObjectiveProblem& obj, RunConfig& eff,
                               PnParams& pn, double& gamma) {
  eff = cfg;
  if (eff.method == Method::Gd) eff.beta1 = 0.0;
  if (eff.method == Method::Gd || eff.method == Method::HeavyBall ||
      eff.method == Method::Nesterov) {
    eff.rule = PrecondRule::identity();
    eff.bounds = TheoryBounds{1.0, 1.0};
  }
  if (!(eff.beta1 >= 0.0 && eff.beta1 < 1.0)) {
    throw InvalidConstantsError("beta1 must lie in [0, 1)");
  }
  if (!(eff.bounds.e > 0.0) || !(eff.bounds.Gamma >= eff.bounds.e)) {
    throw InvalidConstantsError("assumed bounds require 0 < e <= Gamma");
  }
  const ObjectiveConstants c =
      eff.constants_override ? *eff.constants_override : obj.constants();
  if (is_momentum_family(eff.method)) {
    gamma = eff.gamma_mode == GammaMode::Theory
                ? phb_theory_gamma(c.L, eff.bounds.e, eff.beta1)
                : eff.gamma;
    if (!(gamma > 0.0)) {
      throw InvalidConstantsError("step size gamma must be positive");
    }
  } else {
    if (eff.pn_override) {
      pn = *eff.pn_override;
    } else if (eff.gamma_mode == GammaMode::Theory) {
      pn = pn_theory_params(c.L, c.mu, eff.bounds.e, eff.bounds.Gamma);
    } else {
      pn = pn_params_for_gamma(eff.gamma, c.mu, eff.bounds.Gamma);
    }
    if (!(pn.gamma > 0.0) || !(pn.xi >= 0.0) ||
        !(pn.theta >= 0.0 && pn.theta <= 1.0)) {
      throw InvalidConstantsError("pn parameters out of range");
    }
    gamma = pn.gamma;
    if (eff.average_output) {
      throw InvalidWeightsError(
          "weighted averaging is defined for the momentum family only");
    }
  }
  if (eff.iters < 0) throw InvalidConstantsError("iters must be >= 0");
}

}  // namespace detail

// Instrumented driver around the step functions. Records one row per visited
// iterate (so a full run yields iters + 1 rows), stops early once
// grad_sq <= tol, and reports divergence by truncating at the last finite
// iterate instead of throwing. test_obj, when given, is evaluated at every
// recorded iterate (held-out loss).
inline RunReport run(const RunConfig& cfg, const ObjectiveProblem& obj,
                     const ObjectiveProblem* test_obj = nullptr) {
  RunConfig eff;
  PnParams pn;
  double gamma = 0.0;
  detail::resolve_parameters(cfg, obj, eff, pn, gamma);
  const std::size_t d = obj.dim();
  if (eff.record_iterates && d > 1024) {
    throw InvalidConstantsError(
        "full iterate recording is limited to dimension <= 1024");
  }

  RunReport rep;
  rep.method = eff.method;
  rep.rule = eff.rule;
  rep.gamma = gamma;
  rep.beta1 = eff.beta1;
  rep.pn = pn;
  rep.used_theory = eff.gamma_mode == GammaMode::Theory && !eff.pn_override;
  rep.floor_e = eff.floor_e;
  rep.bounds = eff.bounds;
  rep.iters_requested = eff.iters;
  rep.tol_grad_sq = eff.tol_grad_sq;

  DenseVector x = eff.x0.empty() ? DenseVector(d, 0.0) : eff.x0;
  require_same_dim(x.size(), d, "run x0");
  rep.x0 = x;

  RngStream rng(eff.seed);
  PreconditionerState precond = PreconditionerState::initial(d, eff.floor_e);
  rep.dhat_init = precond.d_hat;

  const bool momentum = is_momentum_family(eff.method);
  std::optional<OnlineWeightedAverage> avg;
  if (eff.average_output) {
    const ObjectiveConstants c =
        eff.constants_override ? *eff.constants_override : obj.constants();
    avg.emplace(c.mu * momentum_scale(gamma, eff.beta1) /
                (4.0 * eff.bounds.Gamma));
  }

  DenseVector v(d, 0.0);
  DenseVector x_f = x, x_g = x;

  double f = obj.eval(x);
  DenseVector g = obj.grad(x);  // at x for momentum, at x_g for pn
  // pn monitors the main sequence x^k, which detaches from x_g after k = 0.
  DenseVector g_main = momentum ? DenseVector{} : g;
  // Information at x0 turns the pristine matrix into D_hat_0 before any step.
  precond = precond_step(precond, eff.rule, obj, x, rng, &g);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0]() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  };

  for (long k = 0;; ++k) {
    double grad_sq = momentum ? norm_sq(g) : norm_sq(g_main);
    if (!std::isfinite(f) || !std::isfinite(grad_sq)) {
      rep.diverged = true;
      rep.diverged_at = k;
      break;
    }
    if (avg) avg->add(x);
    RunRow row;
    row.iter = k;
    row.f = f;
    row.grad_sq = grad_sq;
    row.elapsed_ms = elapsed_ms();
    row.dhat_min = precond.d_hat.min_entry();
    row.dhat_max = precond.d_hat.max_entry();
    if (test_obj) row.test_loss = test_obj->eval(x);
    if (avg && eff.record_iterates) row.f_avg = obj.eval(avg->value());
    rep.rows.push_back(row);
    if (eff.record_iterates) {
      rep.xs.push_back(x);
      rep.dhats.push_back(precond.d_hat);
      if (momentum) {
        rep.vs.push_back(v);
      } else {
        rep.xfs.push_back(x_f);
        rep.xgs.push_back(x_g);
        rep.f_xf.push_back(obj.eval(x_f));
      }
    }
    if (grad_sq <= eff.tol_grad_sq || k == eff.iters) break;

    DenseVector x_next, v_next, xf_next, xg_next;
    if (momentum) {
      detail::phb_step_core(x, v, g, precond.d_hat, gamma, eff.beta1, x_next,
                            v_next);
    } else {
      detail::pn_step_core(x_f, x_g, g, precond.d_hat, pn, xf_next, x_next,
                           xg_next);
    }
    const DenseVector& info_point = momentum ? x_next : xg_next;
    if (!all_finite(x_next) || !all_finite(info_point)) {
      rep.diverged = true;
      rep.diverged_at = k + 1;
      break;
    }
    DenseVector g_next = obj.grad(info_point);
    precond = precond_step(precond, eff.rule, obj, info_point, rng, &g_next);
    if (momentum) {
      x = std::move(x_next);
      v = std::move(v_next);
      g = std::move(g_next);
      f = obj.eval(x);
    } else {
      x = std::move(x_next);
      x_f = std::move(xf_next);
      x_g = std::move(xg_next);
      g = std::move(g_next);
      f = obj.eval(x);
      g_main = obj.grad(x);
    }
  }

  rep.x_final = x;
  if (avg && !avg->empty()) rep.x_avg = avg->value();
  rep.observed_e = precond.observed_min;
  rep.observed_Gamma = precond.observed_max;
  return rep;
}

// Measure-then-rerun: a conservative probe pass records the spectrum the
// clamped diagonals actually visited, and the second pass uses those
// observations as the assumed bounds for theory parameters.
struct TwoPhaseResult {
  RunReport probe;
  RunReport final;
};

inline TwoPhaseResult run_two_phase(const RunConfig& cfg,
                                    const ObjectiveProblem& obj,
                                    const ObjectiveProblem* test_obj = nullptr) {
  const ObjectiveConstants c = obj.constants();
  RunConfig probe_cfg = cfg;
  probe_cfg.gamma_mode = GammaMode::Explicit;
  probe_cfg.average_output = false;
  if (is_momentum_family(cfg.method)) {
    probe_cfg.gamma = phb_theory_gamma(c.L, cfg.floor_e, cfg.beta1);
  } else {
    probe_cfg.pn_override = PnParams{cfg.floor_e / c.L, 1.0, 0.5};
  }
  TwoPhaseResult out;
  out.probe = run(probe_cfg, obj, test_obj);
  RunConfig final_cfg = cfg;
  final_cfg.gamma_mode = GammaMode::Theory;
  final_cfg.pn_override.reset();
  final_cfg.bounds = TheoryBounds{out.probe.observed_e,
                                  out.probe.observed_Gamma};
  out.final = run(final_cfg, obj, test_obj);
  return out;
}

// Powers of two from 2^-20 up to 2^0, ascending.
inline std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int p = -20; p <= 0; ++p) grid.push_back(std::ldexp(1.0, p));
  return grid;
}

struct TuneEntry {
  double gamma = 0.0;
  double final_f = 0.0;
  double final_grad_sq = 0.0;
  long iters_run = 0;
  bool diverged = false;
  bool reached_tol = false;
};

struct TuneResult {
  std::vector<TuneEntry> entries;
  std::size_t best_index = 0;
  double best_gamma() const { return entries[best_index].gamma; }
};

// Grid sweep over step sizes; every candidate gets its own child stream
// derived from (cfg.seed, grid index), so results do not depend on
// completion order. Lowest final objective wins, exact ties resolving to the
// smaller step because the grid is ascending.
inline TuneResult tune_gamma(const RunConfig& cfg, const ObjectiveProblem& obj,
                             const std::vector<double>& grid = default_gamma_grid()) {
  if (grid.empty()) throw TuningError("empty step-size grid");
  obj.constants();  // warm the cached constants before forking threads
  std::vector<std::future<RunReport>> futures;
  futures.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RunConfig c = cfg;
    c.gamma_mode = GammaMode::Explicit;
    c.gamma = grid[i];
    c.pn_override.reset();
    c.seed = RngStream::derive(cfg.seed, i).seed();
    futures.push_back(std::async(
        std::launch::async, [c, &obj]() { return run(c, obj, nullptr); }));
  }
  TuneResult result;
  bool any_finished = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RunReport rep = futures[i].get();
    TuneEntry e;
    e.gamma = grid[i];
    e.diverged = rep.diverged;
    e.iters_run = rep.rows.empty() ? 0 : rep.rows.back().iter;
    if (!rep.rows.empty()) {
      e.final_f = rep.rows.back().f;
      e.final_grad_sq = rep.rows.back().grad_sq;
    }
    e.reached_tol = rep.reached_tolerance();
    if (!e.diverged) {
      if (!any_finished || e.final_f < result.entries[result.best_index].final_f) {
        result.best_index = result.entries.size();
      }
      any_finished = true;
    }
    result.entries.push_back(e);
  }
  if (!any_finished) {
    throw TuningError("every step size in the grid diverged");
  }
  return result;
}

}  // namespace precmom
