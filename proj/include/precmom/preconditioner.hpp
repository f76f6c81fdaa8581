#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "precmom/errors.hpp"
#include "precmom/objective.hpp"
#include "precmom/rng.hpp"
#include "precmom/vectors.hpp"

namespace precmom {

// Diagonal update families. QuadraticSmoothing is the square-root moving
// average D_k = sqrt(b2 D^2 + (1-b2) H^2); LinearSmoothing is
// D_k = b2 D + (1-b2) H; AdaGrad accumulates D_k = sqrt(D^2 + H^2).
enum class PrecondVariant { Identity, AdaGrad, QuadraticSmoothing, LinearSmoothing };

// Where curvature information comes from: squared gradient entries, or a
// Rademacher Hessian-diagonal estimate v o (grad^2 f) v.
enum class InfoSource { GradientSquare, Hutchinson };

// Which running diagonal the next update smooths against: the unclamped
// accumulator (quadratic-family default) or the clamped optimizer-facing one
// (linear-family default).
enum class ChainMode { RuleDefault, Clamped, Unclamped };

struct Beta2Schedule {
  enum class Mode { Fixed, InvIter, InvHorizon };
  Mode mode = Mode::Fixed;
  double fixed_value = 0.999;
  long horizon = 0;  // K, required by InvHorizon
};

// Smoothing weight at step k (1-based) of a K-step run.
inline double beta2_schedule(Beta2Schedule::Mode mode, long k, long K,
                             double fixed_value = 0.999) {
  switch (mode) {
    case Beta2Schedule::Mode::Fixed:
      if (!(fixed_value >= 0.0 && fixed_value <= 1.0)) {
        throw ScheduleError("fixed beta2 outside [0, 1]");
      }
      return fixed_value;
    case Beta2Schedule::Mode::InvIter:
      if (k < 1) throw ScheduleError("1 - 1/k schedule undefined for k < 1");
      return 1.0 - 1.0 / static_cast<double>(k);
    case Beta2Schedule::Mode::InvHorizon:
      if (K < 1) throw ScheduleError("1 - 1/K schedule requires K >= 1");
      return 1.0 - 1.0 / static_cast<double>(K);
  }
  return fixed_value;
}

inline double beta2_at(const Beta2Schedule& s, long k) {
  return beta2_schedule(s.mode, k, s.horizon, s.fixed_value);
}

struct PrecondRule {
  PrecondVariant variant = PrecondVariant::Identity;
  InfoSource source = InfoSource::GradientSquare;
  Beta2Schedule beta2{};
  int hutchinson_probes = 1;
  ChainMode chain = ChainMode::RuleDefault;

  bool uses_smoothing() const {
    return variant == PrecondVariant::QuadraticSmoothing ||
           variant == PrecondVariant::LinearSmoothing;
  }

  static PrecondRule identity() { return PrecondRule{}; }

  static PrecondRule adagrad() {
    PrecondRule r;
    r.variant = PrecondVariant::AdaGrad;
    r.source = InfoSource::GradientSquare;
    return r;
  }

  static PrecondRule adam(double beta2 = 0.999) {
    PrecondRule r;
    r.variant = PrecondVariant::QuadraticSmoothing;
    r.source = InfoSource::GradientSquare;
    r.beta2.fixed_value = beta2;
    return r;
  }

  static PrecondRule oasis(double beta2 = 0.999) {
    PrecondRule r;
    r.variant = PrecondVariant::LinearSmoothing;
    r.source = InfoSource::Hutchinson;
    r.beta2.fixed_value = beta2;
    return r;
  }
};

// Running preconditioner. d_unclamped carries the raw accumulator D_k,
// d_hat the clamped max(e, D_k) the optimizer divides by. observed_min/max
// track the spectrum of every d_hat produced so far, including the initial
// one.
struct PreconditionerState {
  DenseVector d_unclamped;
  DiagMatrix d_hat;
  double floor_e = 1e-8;
  double observed_min = 0.0;
  double observed_max = 0.0;
  long step_index = -1;  // index of the last produced d_hat, -1 = initial

  static PreconditionerState initial(std::size_t dim, double floor_e) {
    if (!(floor_e > 0.0)) {
      throw InvalidPreconditionerError("floor e must be positive");
    }
    PreconditionerState s;
    s.floor_e = floor_e;
    // The initial matrix must itself respect the floor.
    double v = std::max(1.0, floor_e);
    s.d_unclamped.assign(dim, v);
    s.d_hat = DiagMatrix(DenseVector(dim, v));
    s.observed_min = v;
    s.observed_max = v;
    return s;
  }
};

// v o (grad^2 f(x) v); with v Rademacher this estimates the Hessian
// diagonal, exactly so when the Hessian is diagonal.
inline DenseVector hutchinson_sample(const ObjectiveProblem& obj,
                                     const DenseVector& x,
                                     const DenseVector& v) {
  return hadamard(v, obj.hessian_vec(x, v));
}

// Diagonal curvature information at x: diag(g o g) for the gradient-square
// source, averaged Rademacher estimates for Hutchinson. The caller may pass
// the gradient it already computed to avoid a second evaluation.
inline DiagMatrix information_matrix(const PrecondRule& rule,
                                     const ObjectiveProblem& obj,
                                     const DenseVector& x, RngStream& rng,
                                     const DenseVector* grad_hint = nullptr) {
  require_same_dim(x.size(), obj.dim(), "information_matrix");
  switch (rule.source) {
    case InfoSource::GradientSquare: {
      DenseVector g = grad_hint ? *grad_hint : obj.grad(x);
      return DiagMatrix(hadamard(g, g));
    }
    case InfoSource::Hutchinson: {
      int probes = std::max(1, rule.hutchinson_probes);
      DenseVector acc(x.size(), 0.0);
      for (int p = 0; p < probes; ++p) {
        DenseVector sample = hutchinson_sample(obj, x, rng.rademacher(x.size()));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sample[i];
      }
      if (probes > 1) {
        for (double& v : acc) v /= static_cast<double>(probes);
      }
      return DiagMatrix(std::move(acc));
    }
  }
  return DiagMatrix(DenseVector(x.size(), 0.0));
}

// The update rules square their operand for the square-root families, so
// squared-gradient information enters as |g_i| while Hessian estimates pass
// through unchanged.
inline DenseVector information_to_update_operand(const PrecondRule& rule,
                                                 const DiagMatrix& info) {
  if (rule.source == InfoSource::GradientSquare) {
    DenseVector h(info.dim());
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (!(info.diag[i] >= 0.0)) {
        throw InvalidPreconditionerError(
            "gradient-square information must be nonnegative");
      }
      h[i] = std::sqrt(info.diag[i]);
    }
    return h;
  }
  return info.diag;
}

// One preconditioner transition D_k -> D_{k+1} -> D_hat_{k+1} = max(e, .).
// Pure: returns the successor state, inputs untouched.
inline PreconditionerState update(const PreconditionerState& state,
                                  const PrecondRule& rule,
                                  const DenseVector& h) {
  require_same_dim(h.size(), state.d_hat.dim(), "preconditioner update");
  PreconditionerState next = state;
  next.step_index = state.step_index + 1;
  if (rule.variant == PrecondVariant::Identity) {
    return next;  // matrix unchanged, extrema already recorded
  }
  const double b2 = rule.uses_smoothing()
                        ? beta2_at(rule.beta2, next.step_index + 1)
                        : 0.0;
  const bool chain_clamped =
      rule.chain == ChainMode::Clamped ||
      (rule.chain == ChainMode::RuleDefault &&
       rule.variant == PrecondVariant::LinearSmoothing);
  const DenseVector& prev =
      chain_clamped ? state.d_hat.diag : state.d_unclamped;
  DenseVector d_new(h.size());
  switch (rule.variant) {
    case PrecondVariant::AdaGrad:
      for (std::size_t i = 0; i < h.size(); ++i) {
        d_new[i] = std::sqrt(prev[i] * prev[i] + h[i] * h[i]);
      }
      break;
    case PrecondVariant::QuadraticSmoothing:
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (prev[i] < 0.0) {
          throw StateCorruptionError(
              "square-root smoothing over a negative running diagonal");
        }
        d_new[i] =
            std::sqrt(b2 * prev[i] * prev[i] + (1.0 - b2) * h[i] * h[i]);
      }
      break;
    case PrecondVariant::LinearSmoothing:
      for (std::size_t i = 0; i < h.size(); ++i) {
        d_new[i] = b2 * prev[i] + (1.0 - b2) * h[i];
      }
      break;
    case PrecondVariant::Identity:
      break;
  }
  DenseVector clamped(d_new.size());
  for (std::size_t i = 0; i < d_new.size(); ++i) {
    clamped[i] = std::max(state.floor_e, d_new[i]);
  }
  next.d_unclamped = std::move(d_new);
  next.d_hat = DiagMatrix(std::move(clamped));
  next.observed_min = std::min(state.observed_min, next.d_hat.min_entry());
  next.observed_max = std::max(state.observed_max, next.d_hat.max_entry());
  return next;
}

// Gather information at x and fold it into the state in one call.
inline PreconditionerState precond_step(const PreconditionerState& state,
                                        const PrecondRule& rule,
                                        const ObjectiveProblem& obj,
                                        const DenseVector& x, RngStream& rng,
                                        const DenseVector* grad_hint = nullptr) {
  if (rule.variant == PrecondVariant::Identity) {
    PreconditionerState next = state;
    next.step_index = state.step_index + 1;
    return next;
  }
  DiagMatrix info = information_matrix(rule, obj, x, rng, grad_hint);
  return update(state, rule, information_to_update_operand(rule, info));
}

// Scale-drift constant of the clamped diagonals under bounds e <= D <= Gamma:
// Gamma^2/(2e^2) for the square-root families' smoothing, 2*Gamma/e for the
// linear one, 0 when the matrix never changes. AdaGrad has no such constant
// (its drift is unbounded a priori), signalled by an empty optional.
inline std::optional<double> theory_C(const PrecondRule& rule, double e,
                                      double Gamma) {
  switch (rule.variant) {
    case PrecondVariant::Identity:
      return 0.0;
    case PrecondVariant::QuadraticSmoothing:
      return Gamma * Gamma / (2.0 * e * e);
    case PrecondVariant::LinearSmoothing:
      return 2.0 * Gamma / e;
    case PrecondVariant::AdaGrad:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace precmom
