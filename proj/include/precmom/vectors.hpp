#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "precmom/errors.hpp"

namespace precmom {

using DenseVector = std::vector<double>;

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimensions " +
                         std::to_string(a) + " and " + std::to_string(b) +
                         " do not match");
  }
}

// All reductions in this library accumulate left to right in index order;
// that order is part of the determinism contract, not an implementation
// detail.
inline double dot(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const DenseVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline DenseVector hadamard(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a.size(), b.size(), "hadamard");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// x + alpha * y
inline DenseVector add_scaled(const DenseVector& x, double alpha,
                              const DenseVector& y) {
  require_same_dim(x.size(), y.size(), "add_scaled");
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + alpha * y[i];
  return out;
}

inline DenseVector subtract(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a.size(), b.size(), "subtract");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline bool all_finite(const DenseVector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Diagonal positive-definite matrix stored as its diagonal. Positivity is
// enforced at the operations that require it, not at construction, because
// intermediate states (running unclamped diagonals) may legitimately hold
// zeros.
struct DiagMatrix {
  DenseVector diag;

  DiagMatrix() = default;
  explicit DiagMatrix(DenseVector d) : diag(std::move(d)) {}

  static DiagMatrix identity(std::size_t dim) {
    return DiagMatrix(DenseVector(dim, 1.0));
  }

  std::size_t dim() const { return diag.size(); }

  double min_entry() const {
    double m = diag.empty() ? 0.0 : diag[0];
    for (double v : diag) m = std::min(m, v);
    return m;
  }

  double max_entry() const {
    double m = diag.empty() ? 0.0 : diag[0];
    for (double v : diag) m = std::max(m, v);
    return m;
  }

  DiagMatrix inverse() const {
    DenseVector inv(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
      if (!(diag[i] > 0.0)) {
        throw InvalidPreconditionerError(
            "inverse requires strictly positive diagonal, entry " +
            std::to_string(i) + " is " + std::to_string(diag[i]));
      }
      inv[i] = 1.0 / diag[i];
    }
    return DiagMatrix(std::move(inv));
  }
};

// ||x||_A^2 = sum_i A_ii x_i^2
inline double induced_norm_sq(const DenseVector& x, const DiagMatrix& a) {
  require_same_dim(x.size(), a.dim(), "induced_norm_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += a.diag[i] * x[i] * x[i];
  return s;
}

// ||x||_{A^{-1}}^2 = sum_i x_i^2 / A_ii, requires A_ii > 0.
inline double inv_induced_norm_sq(const DenseVector& x, const DiagMatrix& a) {
  require_same_dim(x.size(), a.dim(), "inv_induced_norm_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(a.diag[i] > 0.0)) {
      throw InvalidPreconditionerError(
          "inv_induced_norm_sq requires strictly positive diagonal, entry " +
          std::to_string(i) + " is " + std::to_string(a.diag[i]));
    }
    s += x[i] * x[i] / a.diag[i];
  }
  return s;
}

}  // namespace precmom
