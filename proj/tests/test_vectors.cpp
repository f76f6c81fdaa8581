#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "precmom/format.hpp"
#include "precmom/vectors.hpp"

using namespace precmom;

TEST_CASE("dot accumulates left to right in index order") {
  // Chosen so a different summation order changes the result: the large
  // cancelling pair must meet first.
  DenseVector a{1e16, -1e16, 1.0};
  DenseVector b{1.0, 1.0, 1.0};
  CHECK(dot(a, b) == 1.0);
  // Hand-rolled right-to-left gives 0, confirming order sensitivity.
  double rtl = 0.0;
  for (std::size_t i = a.size(); i-- > 0;) rtl += a[i] * b[i];
  CHECK(rtl == 0.0);
}

TEST_CASE("dot and norm_sq agree on simple values") {
  DenseVector x{3.0, -4.0};
  CHECK(norm_sq(x) == 25.0);
  CHECK(dot(x, x) == 25.0);
  CHECK(norm_sq(DenseVector{}) == 0.0);
}

TEST_CASE("dimension mismatches throw DimensionError") {
  DenseVector a{1.0, 2.0};
  DenseVector b{1.0};
  CHECK_THROWS_AS(dot(a, b), DimensionError);
  CHECK_THROWS_AS(hadamard(a, b), DimensionError);
  CHECK_THROWS_AS(add_scaled(a, 1.0, b), DimensionError);
  CHECK_THROWS_AS(subtract(a, b), DimensionError);
  CHECK_THROWS_AS(induced_norm_sq(a, DiagMatrix::identity(1)), DimensionError);
}

TEST_CASE("elementwise helpers compute the stated formulas") {
  DenseVector a{1.0, 2.0, 3.0};
  DenseVector b{4.0, 5.0, 6.0};
  CHECK(hadamard(a, b) == DenseVector{4.0, 10.0, 18.0});
  CHECK(add_scaled(a, 2.0, b) == DenseVector{9.0, 12.0, 15.0});
  CHECK(subtract(b, a) == DenseVector{3.0, 3.0, 3.0});
}

TEST_CASE("all_finite flags inf and nan") {
  CHECK(all_finite({1.0, -2.0, 0.0}));
  CHECK_FALSE(all_finite({1.0, std::numeric_limits<double>::infinity()}));
  CHECK_FALSE(all_finite({std::numeric_limits<double>::quiet_NaN()}));
  CHECK(all_finite({}));
}

TEST_CASE("DiagMatrix tracks extremes and inverts entrywise") {
  DiagMatrix d(DenseVector{2.0, 0.5, 4.0});
  CHECK(d.dim() == 3);
  CHECK(d.min_entry() == 0.5);
  CHECK(d.max_entry() == 4.0);
  DiagMatrix inv = d.inverse();
  CHECK(inv.diag == DenseVector{0.5, 2.0, 0.25});
  CHECK(DiagMatrix::identity(2).diag == DenseVector{1.0, 1.0});
}

TEST_CASE("inverse and inv_induced_norm_sq reject nonpositive entries") {
  DiagMatrix zero(DenseVector{1.0, 0.0});
  DiagMatrix negative(DenseVector{1.0, -2.0});
  CHECK_THROWS_AS(zero.inverse(), InvalidPreconditionerError);
  CHECK_THROWS_AS(negative.inverse(), InvalidPreconditionerError);
  DenseVector x{1.0, 1.0};
  CHECK_THROWS_AS(inv_induced_norm_sq(x, zero), InvalidPreconditionerError);
}

TEST_CASE("induced norms match hand-expanded sums") {
  DiagMatrix d(DenseVector{2.0, 3.0});
  DenseVector x{1.0, -2.0};
  // 2*1 + 3*4 = 14; 1/2 + 4/3
  CHECK(induced_norm_sq(x, d) == 14.0);
  CHECK(inv_induced_norm_sq(x, d) == Catch::Approx(0.5 + 4.0 / 3.0).epsilon(1e-15));
  // identity reduces both to the euclidean norm
  DiagMatrix id = DiagMatrix::identity(2);
  CHECK(induced_norm_sq(x, id) == norm_sq(x));
  CHECK(inv_induced_norm_sq(x, id) == norm_sq(x));
}

TEST_CASE("fmt_double round-trips through parse_double") {
  for (double v : {0.0, -0.0, 1.0, -1.0, 0.1, 1e300, -1e-300, 3.141592653589793,
                   0.711, -1.245}) {
    double back = 42.0;
    REQUIRE(parse_double(fmt_double(v), back));
    CHECK(back == v);
  }
}

TEST_CASE("parse_double accepts a leading plus and rejects garbage") {
  double v = 0.0;
  CHECK(parse_double("+1", v));
  CHECK(v == 1.0);
  CHECK(parse_double("+0.5", v));
  CHECK(v == 0.5);
  CHECK_FALSE(parse_double("", v));
  CHECK_FALSE(parse_double("+", v));
  CHECK_FALSE(parse_double("++1", v));
  CHECK_FALSE(parse_double("1.0x", v));
  CHECK_FALSE(parse_double("1.0 ", v));
}

TEST_CASE("parse_size parses full strings only") {
  std::size_t n = 0;
  CHECK(parse_size("42", n));
  CHECK(n == 42);
  CHECK_FALSE(parse_size("", n));
  CHECK_FALSE(parse_size("42x", n));
  CHECK_FALSE(parse_size("-1", n));
}
