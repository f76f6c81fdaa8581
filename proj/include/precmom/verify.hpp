#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "precmom/errors.hpp"
#include "precmom/objective.hpp"
#include "precmom/optimizer.hpp"
#include "precmom/preconditioner.hpp"
#include "precmom/rng.hpp"
#include "precmom/vectors.hpp"

namespace precmom {

enum class CheckStatus { Pass, Fail, NotApplicable };

// One inequality family checked over many items. Each item contributes
// margin = bound - observed; the item fails when the margin drops below
// -(tol_abs + tol_rel * |bound|). worst_margin is the smallest margin seen.
struct CheckReport {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  std::size_t items = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::string note;

  void record(double bound, double observed, double tol_abs, double tol_rel) {
    ++items;
    double margin = bound - observed;
    worst_margin = std::min(worst_margin, margin);
    if (!(margin >= -(tol_abs + tol_rel * std::abs(bound)))) {
      status = CheckStatus::Fail;
    }
  }

  bool passed() const { return status != CheckStatus::Fail; }

  static CheckReport not_applicable(std::string name, std::string why) {
    CheckReport r;
    r.name = std::move(name);
    r.status = CheckStatus::NotApplicable;
    r.note = std::move(why);
    return r;
  }
};

namespace detail {

inline void require_full_trace(const RunReport& rep, const char* check) {
  if (rep.xs.empty()) {
    throw PreconditionError(std::string(check) +
                            " needs a run recorded with record_iterates");
  }
  if (rep.diverged) {
    throw PreconditionError(std::string(check) + " got a diverged run");
  }
}

// Bounds the check trusts; the run must not have left them.
inline TheoryBounds checked_bounds(const RunReport& rep,
                                   const std::optional<TheoryBounds>& override_b,
                                   const char* check) {
  TheoryBounds b = override_b ? *override_b : rep.bounds;
  if (rep.observed_e < b.e * (1.0 - 1e-12) ||
      rep.observed_Gamma > b.Gamma * (1.0 + 1e-12)) {
    throw PreconditionError(
        std::string(check) + ": scaling matrices left the assumed bounds [" +
        std::to_string(b.e) + ", " + std::to_string(b.Gamma) + "], observed [" +
        std::to_string(rep.observed_e) + ", " +
        std::to_string(rep.observed_Gamma) + "]");
  }
  return b;
}

// beta2 used by the update that produced dhats[j].
inline double step_beta2(const PrecondRule& rule, long j) {
  return beta2_at(rule.beta2, j + 1);
}

inline const DiagMatrix& dhat_before(const RunReport& rep, long k) {
  return k == 0 ? rep.dhat_init : rep.dhats[static_cast<std::size_t>(k - 1)];
}

}  // namespace detail

// ||grad f(x)||^2 <= 2L (f(x) - f*) at each probe point. Tight (equality)
// exactly when the objective is an isotropic quadratic.
inline CheckReport check_gradient_bound(const ObjectiveProblem& obj,
                                        const ReferenceSolution& ref,
                                        const std::vector<DenseVector>& points,
                                        double tol_abs = 1e-12,
                                        double tol_rel = 1e-12) {
  CheckReport rep;
  rep.name = "gradient-vs-suboptimality bound";
  const double L = obj.constants().L;
  for (const DenseVector& x : points) {
    double bound = 2.0 * L * (obj.eval(x) - ref.f_star);
    double observed = norm_sq(obj.grad(x));
    rep.record(bound, observed, tol_abs, tol_rel);
  }
  return rep;
}

// e ||z||^2 <= ||z||_D^2 <= Gamma ||z||^2 and the mirrored inequalities in
// the inverse norm, for probe vectors z.
inline CheckReport check_norm_equivalence(const DiagMatrix& d_hat, double e,
                                          double Gamma, std::size_t probes,
                                          RngStream& rng,
                                          double tol_rel = 1e-12) {
  CheckReport rep;
  rep.name = "induced-norm sandwich";
  for (std::size_t p = 0; p < probes; ++p) {
    DenseVector z = rng.gaussian(d_hat.dim());
    double l2 = norm_sq(z);
    double nd = induced_norm_sq(z, d_hat);
    double ni = inv_induced_norm_sq(z, d_hat);
    rep.record(Gamma * l2, nd, 0.0, tol_rel);
    rep.record(nd, e * l2, 0.0, tol_rel);
    rep.record(l2 / e, ni, 0.0, tol_rel);
    rep.record(ni, l2 / Gamma, 0.0, tol_rel);
  }
  return rep;
}

// ||z||_{D_{k+1}}^2 <= (1 + (1-b2) C) ||z||_{D_k}^2 along the recorded
// matrix trajectory, C from the rule family at the observed spectrum bounds.
inline CheckReport check_scale_drift(const RunReport& run, std::size_t probes,
                                     RngStream& rng, double tol_rel = 1e-12) {
  detail::require_full_trace(run, "scale-drift check");
  std::optional<double> c =
      theory_C(run.rule, run.observed_e, run.observed_Gamma);
  if (!c) {
    return CheckReport::not_applicable(
        "scale-drift bound", "accumulating rule has no drift constant");
  }
  CheckReport rep;
  rep.name = "scale-drift bound";
  std::vector<DenseVector> zs;
  for (std::size_t p = 0; p < probes; ++p) {
    zs.push_back(rng.gaussian(run.dhat_init.dim()));
  }
  for (std::size_t j = 0; j < run.dhats.size(); ++j) {
    const DiagMatrix& prev = j == 0 ? run.dhat_init : run.dhats[j - 1];
    const DiagMatrix& next = run.dhats[j];
    const double b2 = run.rule.uses_smoothing()
                          ? detail::step_beta2(run.rule, static_cast<long>(j))
                          : 0.0;
    const double factor = 1.0 + (1.0 - b2) * *c;
    for (const DenseVector& z : zs) {
      rep.record(factor * induced_norm_sq(z, prev), induced_norm_sq(z, next),
                 0.0, tol_rel);
    }
  }
  return rep;
}

// Per-step descent inequality of the momentum method over its virtual
// sequence xt_k = x_k - beta1 gamma/(1-beta1) V_{k-1}:
//   F/2 (f(x_k)-f*) <= (1 - mu F/(4 Gamma)) ||xt_k - x*||_{D_{k-1}}^2
//                      - ||xt_{k+1} - x*||_{D_k}^2
//                      + 3LF/e ||x_k - xt_k||_{D_k}^2.
// Side conditions: F <= e/(4L), and for smoothing rules
// beta2 >= 1 - mu F / (4 Gamma C).
inline CheckReport check_hb_descent(const RunReport& run,
                                    const ObjectiveConstants& consts,
                                    const ReferenceSolution& ref,
                                    std::optional<TheoryBounds> bounds = {},
                                    double tol_abs = 1e-9,
                                    double tol_rel = 1e-9) {
  detail::require_full_trace(run, "momentum descent check");
  if (!is_momentum_family(run.method)) {
    throw PreconditionError("momentum descent check needs a momentum run");
  }
  if (run.rule.variant == PrecondVariant::AdaGrad) {
    return CheckReport::not_applicable(
        "momentum descent inequality",
        "accumulating rule has no drift constant");
  }
  TheoryBounds b = detail::checked_bounds(run, bounds, "momentum descent");
  const double F = momentum_scale(run.gamma, run.beta1);
  if (F > b.e / (4.0 * consts.L) * (1.0 + 1e-12)) {
    throw PreconditionError(
        "momentum descent check requires gamma/(1-beta1) <= e/(4L)");
  }
  const double rho = consts.mu * F / (4.0 * b.Gamma);
  if (run.rule.uses_smoothing()) {
    std::optional<double> c = theory_C(run.rule, b.e, b.Gamma);
    if (c && *c > 0.0) {
      const double b2_min = 1.0 - rho / *c;
      for (std::size_t j = 0; j < run.dhats.size(); ++j) {
        if (detail::step_beta2(run.rule, static_cast<long>(j)) <
            b2_min - 1e-15) {
          throw PreconditionError(
              "momentum descent check requires beta2 >= 1 - mu F/(4 Gamma C)");
        }
      }
    }
  }
  CheckReport rep;
  rep.name = "momentum descent inequality";
  const double cv = run.beta1 * run.gamma / (1.0 - run.beta1);
  auto x_tilde = [&](std::size_t k) {
    return add_scaled(run.xs[k], -cv, run.vs[k]);
  };
  const std::size_t steps = run.xs.size() - 1;
  DenseVector xt_next = x_tilde(0);
  for (std::size_t k = 0; k < steps; ++k) {
    DenseVector xt_k = std::move(xt_next);
    xt_next = x_tilde(k + 1);
    const DiagMatrix& d_prev = detail::dhat_before(run, static_cast<long>(k));
    const DiagMatrix& d_k = run.dhats[k];
    double bound =
        (1.0 - rho) * induced_norm_sq(subtract(xt_k, ref.x_star), d_prev) -
        induced_norm_sq(subtract(xt_next, ref.x_star), d_k) +
        (3.0 * consts.L * F / b.e) *
            induced_norm_sq(subtract(run.xs[k], xt_k), d_k);
    double observed = 0.5 * F * (run.rows[k].f - ref.f_star);
    rep.record(bound, observed, tol_abs, tol_rel);
  }
  return rep;
}

namespace detail {

inline void require_pn_side_conditions(const RunReport& run,
                                       const ObjectiveConstants& consts,
                                       const TheoryBounds& b,
                                       const char* check) {
  const PnParams& p = run.pn;
  if (run.method != Method::Pn && run.method != Method::Nesterov) {
    throw PreconditionError(std::string(check) + " needs an accelerated run");
  }
  if (p.xi < 1.0 - 1e-12) {
    throw PreconditionError(std::string(check) + " requires xi >= 1");
  }
  if (p.xi * p.xi * p.gamma * consts.mu / b.Gamma < 1.0 - 1e-12) {
    throw PreconditionError(std::string(check) +
                            " requires xi^2 gamma mu / Gamma >= 1");
  }
  if (p.gamma > b.e / consts.L * (1.0 + 1e-12)) {
    throw PreconditionError(std::string(check) + " requires gamma <= e/L");
  }
  if (std::abs(p.theta - p.xi / (1.0 + p.xi)) > 1e-12 * (1.0 + p.theta)) {
    throw PreconditionError(std::string(check) +
                            " requires theta = xi/(1+xi)");
  }
}

inline double pn_lyapunov(const RunReport& run, const ReferenceSolution& ref,
                          std::size_t k, const DiagMatrix& d) {
  return induced_norm_sq(subtract(run.xs[k], ref.x_star), d) +
         2.0 * run.pn.gamma * run.pn.xi * run.pn.xi *
             (run.f_xf[k] - ref.f_star);
}

}  // namespace detail

// Same-matrix Lyapunov contraction of the accelerated method, holding for
// any admissible run regardless of how the matrices evolve:
//   Psi_{k+1}[D_k] <= (1 - 1/xi) Psi_k[D_k].
inline CheckReport check_pn_lyapunov_step(const RunReport& run,
                                          const ObjectiveConstants& consts,
                                          const ReferenceSolution& ref,
                                          std::optional<TheoryBounds> bounds = {},
                                          double tol_abs = 1e-9,
                                          double tol_rel = 1e-9) {
  detail::require_full_trace(run, "accelerated contraction check");
  TheoryBounds b =
      detail::checked_bounds(run, bounds, "accelerated contraction");
  detail::require_pn_side_conditions(run, consts, b,
                                     "accelerated contraction check");
  CheckReport rep;
  rep.name = "accelerated contraction, same matrix";
  const double factor = 1.0 - 1.0 / run.pn.xi;
  for (std::size_t k = 0; k + 1 < run.xs.size(); ++k) {
    const DiagMatrix& d_k = run.dhats[k];
    double bound = factor * detail::pn_lyapunov(run, ref, k, d_k);
    double observed = detail::pn_lyapunov(run, ref, k + 1, d_k);
    rep.record(bound, observed, tol_abs, tol_rel);
  }
  return rep;
}

// Cross-matrix contraction with factor (1 - 1/(2 xi)), requiring every
// smoothing weight to satisfy beta2 >= 1 - (1/(2C)) sqrt(mu e / (L Gamma)).
inline CheckReport check_pn_lyapunov_chained(const RunReport& run,
                                             const ObjectiveConstants& consts,
                                             const ReferenceSolution& ref,
                                             std::optional<TheoryBounds> bounds = {},
                                             double tol_abs = 1e-9,
                                             double tol_rel = 1e-9) {
  detail::require_full_trace(run, "accelerated chained contraction check");
  if (run.rule.variant == PrecondVariant::AdaGrad) {
    return CheckReport::not_applicable(
        "accelerated contraction, chained",
        "accumulating rule has no drift constant");
  }
  TheoryBounds b =
      detail::checked_bounds(run, bounds, "accelerated chained contraction");
  detail::require_pn_side_conditions(run, consts, b,
                                     "accelerated chained contraction check");
  std::optional<double> c = theory_C(run.rule, b.e, b.Gamma);
  if (c && *c > 0.0) {
    const double b2_min =
        1.0 - std::sqrt(consts.mu * b.e / (consts.L * b.Gamma)) / (2.0 * *c);
    for (std::size_t j = 0; j < run.dhats.size(); ++j) {
      if (detail::step_beta2(run.rule, static_cast<long>(j)) <
          b2_min - 1e-15) {
        throw PreconditionError(
            "chained contraction requires beta2 >= 1 - "
            "sqrt(mu e/(L Gamma))/(2C)");
      }
    }
  }
  CheckReport rep;
  rep.name = "accelerated contraction, chained";
  const double factor = 1.0 - 1.0 / (2.0 * run.pn.xi);
  for (std::size_t k = 0; k + 1 < run.xs.size(); ++k) {
    double bound =
        factor * detail::pn_lyapunov(
                     run, ref, k, detail::dhat_before(run, static_cast<long>(k)));
    double observed = detail::pn_lyapunov(run, ref, k + 1, run.dhats[k]);
    rep.record(bound, observed, tol_abs, tol_rel);
  }
  return rep;
}

enum class EnvelopeKind {
  MomentumAveraged,     // f(weighted average) under the momentum method
  AcceleratedDistance,  // induced-norm distance under the accelerated method
};

// Convergence-rate envelopes for runs that used the theory parameters.
// MomentumAveraged, at every recorded prefix average over x_0..x_k:
//   f(avg) - f* <= 4 exp(-(1-b1) mu e (k+1) / (48 L Gamma)) L ||x0-x*||_{D_{-1}}^2
// AcceleratedDistance, at every iterate j:
//   ||x^j - x*||_{D_{j-1}}^2 <= exp(-j sqrt(mu e/(4 L Gamma)))
//                               [ ||x0-x*||_{D_{-1}}^2 + 2Gamma/mu (f(x0)-f*) ].
inline CheckReport check_rate_envelope(const RunReport& run,
                                       const ObjectiveConstants& consts,
                                       const ReferenceSolution& ref,
                                       EnvelopeKind kind,
                                       std::optional<TheoryBounds> bounds = {},
                                       double tol_rel = 1e-6,
                                       double l_scale = 1.0) {
  detail::require_full_trace(run, "rate envelope check");
  if (!run.used_theory) {
    return CheckReport::not_applicable(
        "rate envelope", "run did not use the theory step parameters");
  }
  TheoryBounds b = detail::checked_bounds(run, bounds, "rate envelope");
  const double L = consts.L * l_scale;
  const double mu = consts.mu;
  CheckReport rep;
  const double dist0_sq =
      induced_norm_sq(subtract(run.xs[0], ref.x_star), run.dhat_init);
  if (kind == EnvelopeKind::MomentumAveraged) {
    if (!is_momentum_family(run.method)) {
      throw PreconditionError("averaged envelope needs a momentum run");
    }
    rep.name = "momentum averaged-output envelope";
    const double rate = (1.0 - run.beta1) * mu * b.e / (48.0 * L * b.Gamma);
    bool saw_avg = false;
    for (const RunRow& row : run.rows) {
      if (!row.f_avg) continue;
      saw_avg = true;
      double bound = 4.0 * std::exp(-rate * static_cast<double>(row.iter + 1)) *
                     L * dist0_sq;
      rep.record(bound, *row.f_avg - ref.f_star, 0.0, tol_rel);
    }
    if (!saw_avg) {
      throw PreconditionError(
          "averaged envelope needs a run with averaging recorded");
    }
  } else {
    if (run.method != Method::Pn && run.method != Method::Nesterov) {
      throw PreconditionError("distance envelope needs an accelerated run");
    }
    rep.name = "accelerated distance envelope";
    const double rate = std::sqrt(mu * b.e / (4.0 * L * b.Gamma));
    const double psi0 =
        dist0_sq + (2.0 * b.Gamma / mu) * (run.rows[0].f - ref.f_star);
    // The squared distance cannot resolve below the rounding floor of the
    // iterates themselves, about eps^2 relative to the initial potential.
    // Once the envelope sinks under that floor the comparison measures
    // arithmetic, not the method, so those tail items are skipped.
    const double eps = std::numeric_limits<double>::epsilon();
    const double resolution = 4096.0 * eps * eps * psi0;
    std::size_t skipped = 0;
    for (std::size_t j = 0; j < run.xs.size(); ++j) {
      double bound = std::exp(-rate * static_cast<double>(j)) * psi0;
      if (bound < resolution) {
        ++skipped;
        continue;
      }
      double observed = induced_norm_sq(
          subtract(run.xs[j], ref.x_star),
          detail::dhat_before(run, static_cast<long>(j)));
      rep.record(bound, observed, 0.0, tol_rel);
    }
    if (skipped > 0) {
      rep.note = std::to_string(skipped) +
                 " tail items below numerical resolution skipped";
    }
  }
  return rep;
}

// Central finite differences against the analytic gradient, one item per
// coordinate. Errors are measured relative to the larger of the two values
// and the gradient's overall scale, falling back to absolute near zero.
inline CheckReport finite_diff_check_gradient(const ObjectiveProblem& obj,
                                              const DenseVector& x, double h,
                                              double tol = 1e-5) {
  CheckReport rep;
  rep.name = "finite-difference gradient check";
  DenseVector g = obj.grad(x);
  double g_scale = 0.0;
  for (double v : g) g_scale = std::max(g_scale, std::abs(v));
  DenseVector xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    double fd = (obj.eval(xp) - obj.eval(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
    double denom =
        std::max({std::abs(g[i]), std::abs(fd), 1e-3 * g_scale, 1e-12});
    rep.record(tol, std::abs(fd - g[i]) / denom, 0.0, 0.0);
  }
  return rep;
}

inline CheckReport finite_diff_check_hvp(const ObjectiveProblem& obj,
                                         const DenseVector& x,
                                         const DenseVector& v, double h,
                                         double tol = 1e-4) {
  CheckReport rep;
  rep.name = "finite-difference hvp check";
  DenseVector hv = obj.hessian_vec(x, v);
  double scale = 0.0;
  for (double t : hv) scale = std::max(scale, std::abs(t));
  DenseVector gp = obj.grad(add_scaled(x, h, v));
  DenseVector gm = obj.grad(add_scaled(x, -h, v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fd = (gp[i] - gm[i]) / (2.0 * h);
    double denom =
        std::max({std::abs(hv[i]), std::abs(fd), 1e-3 * scale, 1e-12});
    rep.record(tol, std::abs(fd - hv[i]) / denom, 0.0, 0.0);
  }
  return rep;
}

}  // namespace precmom
