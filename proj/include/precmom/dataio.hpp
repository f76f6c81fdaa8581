#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "precmom/errors.hpp"
#include "precmom/format.hpp"
#include "precmom/rng.hpp"
#include "precmom/vectors.hpp"

namespace precmom {

// Dense row-major design matrix with labels in {-1, +1}. Sparse input is
// densified at parse time; the problems handled here are small enough that
// dense storage is the simpler contract.
struct Dataset {
  std::vector<double> features;  // n x d, row-major
  std::vector<double> labels;
  std::size_t n = 0;
  std::size_t d = 0;

  double at(std::size_t i, std::size_t j) const {
    return features[i * d + j];
  }
};

namespace detail {

struct SparseRow {
  double label = 0.0;
  std::vector<std::pair<std::size_t, double>> entries;  // 1-based indices
};

inline bool parse_libsvm_line(std::string_view line, std::size_t line_no,
                              SparseRow& row) {
  // Text from '#' onward is comment.
  if (auto hash = line.find('#'); hash != std::string_view::npos) {
    line = line.substr(0, hash);
  }
  std::istringstream ss{std::string(line)};
  std::string tok;
  if (!(ss >> tok)) return false;  // blank or comment-only line
  double raw_label = 0.0;
  if (!parse_double(tok, raw_label)) {
    throw ParseError(line_no, "label '" + tok + "' is not numeric");
  }
  if (raw_label == 1.0) {
    row.label = 1.0;
  } else if (raw_label == -1.0) {
    row.label = -1.0;
  } else if (raw_label == 0.0) {
    row.label = -1.0;  // {0, 1} labelled data maps onto {-1, +1}
  } else {
    throw ParseError(line_no, "label must be -1, 0 or +1, got '" + tok + "'");
  }
  row.entries.clear();
  std::size_t prev_index = 0;
  while (ss >> tok) {
    auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
      throw ParseError(line_no, "malformed feature token '" + tok + "'");
    }
    std::size_t index = 0;
    if (!parse_size(std::string_view(tok).substr(0, colon), index)) {
      throw ParseError(line_no, "feature index in '" + tok + "' is not an integer");
    }
    if (index == 0) {
      throw ParseError(line_no, "feature indices are 1-based, got 0");
    }
    if (index <= prev_index) {
      throw ParseError(line_no, "feature indices must be strictly increasing");
    }
    double value = 0.0;
    if (!parse_double(std::string_view(tok).substr(colon + 1), value)) {
      throw ParseError(line_no, "feature value in '" + tok + "' is not numeric");
    }
    row.entries.emplace_back(index, value);
    prev_index = index;
  }
  return true;
}

}  // namespace detail

// LibSVM text: "label idx:val idx:val ...", 1-based strictly increasing
// indices, '#' comments, blank lines skipped. Labels may be {-1,+1} or
// {0,1}; {0,1} is remapped. The width is the largest index seen unless
// d_min forces more columns.
inline Dataset parse_libsvm(std::istream& in, std::size_t d_min = 0) {
  std::vector<detail::SparseRow> rows;
  std::size_t d = d_min;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::SparseRow row;
    if (!detail::parse_libsvm_line(line, line_no, row)) continue;
    if (!row.entries.empty()) d = std::max(d, row.entries.back().first);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDatasetError("no data rows in input");
  if (d == 0) throw EmptyDatasetError("no features in input");
  Dataset out;
  out.n = rows.size();
  out.d = d;
  out.features.assign(out.n * out.d, 0.0);
  out.labels.resize(out.n);
  for (std::size_t i = 0; i < out.n; ++i) {
    out.labels[i] = rows[i].label;
    for (const auto& [idx, val] : rows[i].entries) {
      out.features[i * out.d + (idx - 1)] = val;
    }
  }
  return out;
}

inline Dataset parse_libsvm_file(const std::string& path,
                                 std::size_t d_min = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  return parse_libsvm(in, d_min);
}

// Canonical serialization: "+1"/"-1" labels, only nonzero entries, shortest
// round-trip numbers, one trailing newline per row. parse(to_libsvm(ds))
// reproduces ds exactly when every row keeps its last column nonzero.
inline std::string to_libsvm(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.n; ++i) {
    out += ds.labels[i] > 0 ? "+1" : "-1";
    for (std::size_t j = 0; j < ds.d; ++j) {
      double v = ds.at(i, j);
      if (v != 0.0) {
        out += ' ';
        out += std::to_string(j + 1);
        out += ':';
        out += fmt_double(v);
      }
    }
    out += '\n';
  }
  return out;
}

inline void write_libsvm_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError(0, "cannot write '" + path + "'");
  out << to_libsvm(ds);
}

// Seeded uniform shuffle, then the first floor(n * train_fraction) rows form
// the training split. The same (seed, fraction, n) always produces the same
// index partition.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                                 double train_fraction,
                                                 std::uint64_t seed) {
  if (ds.n == 0) throw EmptyDatasetError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidConstantsError("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(ds.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng = RngStream::derive(seed, 0x5B17);
  for (std::size_t i = ds.n - 1; i > 0; --i) {
    std::size_t j = rng.next_below(i + 1);
    std::swap(order[i], order[j]);
  }
  std::size_t n_train =
      static_cast<std::size_t>(static_cast<double>(ds.n) * train_fraction);
  if (n_train == 0 || n_train == ds.n) {
    throw InvalidConstantsError("train fraction leaves an empty split");
  }
  auto take = [&ds](const std::vector<std::size_t>& idx, std::size_t lo,
                    std::size_t hi) {
    Dataset out;
    out.n = hi - lo;
    out.d = ds.d;
    out.features.resize(out.n * out.d);
    out.labels.resize(out.n);
    for (std::size_t r = lo; r < hi; ++r) {
      std::size_t src = idx[r];
      out.labels[r - lo] = ds.labels[src];
      for (std::size_t j = 0; j < ds.d; ++j) {
        out.features[(r - lo) * ds.d + j] = ds.features[src * ds.d + j];
      }
    }
    return out;
  };
  return {take(order, 0, n_train), take(order, n_train, ds.n)};
}

// Scale each column by its maximum absolute value; all-zero columns stay
// zero.
inline void normalize_columns_maxabs(Dataset& ds) {
  for (std::size_t j = 0; j < ds.d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      m = std::max(m, std::abs(ds.at(i, j)));
    }
    if (m > 0.0) {
      for (std::size_t i = 0; i < ds.n; ++i) ds.features[i * ds.d + j] /= m;
    }
  }
}

// Gaussian features with per-column scales log-spaced from 1 down to
// 1/spread, labels from a planted hyperplane with flip noise. The last
// column of at least one row is guaranteed nonzero by construction
// (continuous draws), so the serialized width equals d.
inline Dataset make_synthetic_classification(std::size_t n, std::size_t d,
                                             std::uint64_t seed,
                                             double spread = 1.0,
                                             double flip_prob = 0.0) {
  if (n == 0 || d == 0) throw EmptyDatasetError("empty synthetic dataset");
  RngStream rng = RngStream::derive(seed, 0xDA7A);
  DenseVector w_true = rng.gaussian(d);
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.features.resize(n * d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double t = d == 1 ? 0.0
                        : static_cast<double>(j) / static_cast<double>(d - 1);
      double x = rng.next_gaussian() * std::pow(spread, -t);
      ds.features[i * d + j] = x;
      z += x * w_true[j];
    }
    double y = z >= 0.0 ? 1.0 : -1.0;
    if (flip_prob > 0.0 && rng.next_uniform() < flip_prob) y = -y;
    ds.labels[i] = y;
  }
  return ds;
}

}  // namespace precmom
