#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "precmom/objective.hpp"
#include "precmom/rng.hpp"
#include "precmom/verify.hpp"

using namespace precmom;

TEST_CASE("diagonal quadratic matches hand-computed values") {
  // f(x) = 0.5 (2 x0^2 + 5 x1^2) - (4 x0 - 10 x1)
  ObjectiveProblem obj =
      ObjectiveProblem::quadratic_diag({2.0, 5.0}, {4.0, -10.0});
  CHECK(obj.eval({1.0, 1.0}) == 9.5);
  CHECK(obj.grad({1.0, 1.0}) == DenseVector{-2.0, 15.0});
  CHECK(obj.hessian_vec({0.0, 0.0}, {1.0, 2.0}) == DenseVector{2.0, 10.0});
  ReferenceSolution ref = solve_reference(obj);
  CHECK(ref.x_star == DenseVector{2.0, -2.0});
  CHECK(ref.f_star == -14.0);
  CHECK(ref.grad_norm == 0.0);
}

TEST_CASE("diagonal quadratic constants are the spectrum extremes") {
  ObjectiveProblem obj =
      ObjectiveProblem::quadratic_diag({1.0, 100.0}, {0.0, 0.0});
  ObjectiveConstants c = obj.constants();
  CHECK(c.L == 100.0);
  CHECK(c.mu == 1.0);
}

TEST_CASE("diagonal quadratic rejects nonpositive curvature and mismatch") {
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_diag({1.0, 0.0}, {0.0, 0.0}),
                  InvalidConstantsError);
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_diag({1.0, -1.0}, {0.0, 0.0}),
                  InvalidConstantsError);
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_diag({1.0}, {0.0, 0.0}),
                  DimensionError);
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_diag({}, {}), DimensionError);
}

TEST_CASE("dense quadratic matches hand-computed values") {
  ObjectiveProblem obj =
      ObjectiveProblem::quadratic_dense({2.0, 1.0, 1.0, 2.0}, 2, {1.0, 0.0});
  CHECK(obj.eval({1.0, 1.0}) == 2.0);
  CHECK(obj.grad({1.0, 1.0}) == DenseVector{2.0, 3.0});
  CHECK(obj.hessian_vec({0.0, 0.0}, {1.0, 0.0}) == DenseVector{2.0, 1.0});
  ObjectiveConstants c = obj.constants();
  CHECK(c.L == Catch::Approx(3.0).epsilon(1e-12));
  CHECK(c.mu == Catch::Approx(1.0).epsilon(1e-12));
  ReferenceSolution ref = solve_reference(obj);
  // A^{-1} b for A = [[2,1],[1,2]], b = (1,0) is (2/3, -1/3)
  CHECK(ref.x_star[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(ref.x_star[1] == Catch::Approx(-1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("dense quadratic validates shape, symmetry, definiteness") {
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_dense({1.0, 2.0, 3.0}, 2,
                                                    {0.0, 0.0}),
                  DimensionError);
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_dense({1.0, 2.0, 3.0, 4.0}, 2,
                                                    {0.0, 0.0}),
                  InvalidConstantsError);
  // symmetric but indefinite
  CHECK_THROWS_AS(ObjectiveProblem::quadratic_dense({1.0, 0.0, 0.0, -1.0}, 2,
                                                    {0.0, 0.0}),
                  InvalidConstantsError);
}

TEST_CASE("logistic loss at zero weights is log 2 plus nothing") {
  ObjectiveProblem obj =
      ObjectiveProblem::logistic_l2({2.0}, 1, 1, {1.0}, 0.1);
  CHECK(obj.eval({0.0}) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
  // grad at 0: -y sigmoid(0) x / n + lambda*0 = -0.5 * 2 = -1
  CHECK(obj.grad({0.0}) == DenseVector{-1.0});
  // hessian at 0: sigma(1-sigma) x x' / n + lambda = 0.25*4 + 0.1
  CHECK(obj.hessian_vec({0.0}, {1.0}) == DenseVector{1.1});
  ObjectiveConstants c = obj.constants();
  CHECK(c.L == Catch::Approx(1.1).epsilon(1e-12));
  CHECK(c.mu == 0.1);
}

TEST_CASE("logistic factory validates labels and regularizer") {
  CHECK_THROWS_AS(ObjectiveProblem::logistic_l2({1.0}, 1, 1, {0.0}, 0.1),
                  InvalidConstantsError);
  CHECK_THROWS_AS(ObjectiveProblem::logistic_l2({1.0}, 1, 1, {2.0}, 0.1),
                  InvalidConstantsError);
  CHECK_THROWS_AS(ObjectiveProblem::logistic_l2({1.0}, 1, 1, {1.0}, -0.1),
                  InvalidConstantsError);
  CHECK_THROWS_AS(ObjectiveProblem::logistic_l2({}, 0, 0, {}, 0.1),
                  EmptyDatasetError);
  CHECK_THROWS_AS(ObjectiveProblem::logistic_l2({1.0, 2.0}, 1, 1, {1.0}, 0.1),
                  DimensionError);
}

TEST_CASE("unregularized logistic evaluates but refuses constants") {
  ObjectiveProblem obj =
      ObjectiveProblem::logistic_l2({1.0}, 1, 1, {1.0}, 0.0);
  CHECK(obj.eval({0.0}) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(obj.constants(), NoStrongConvexityError);
  CHECK_THROWS_AS(solve_reference(obj), NoStrongConvexityError);
}

TEST_CASE("softplus and sigmoid are stable at extreme arguments") {
  CHECK(stable_softplus(1000.0) == 1000.0);
  CHECK(stable_softplus(-1000.0) == 0.0);
  CHECK(stable_softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(stable_sigmoid(1000.0) == 1.0);
  CHECK(stable_sigmoid(-1000.0) == 0.0);
  CHECK(stable_sigmoid(0.0) == 0.5);
  // complementary identity on moderate values
  for (double z : {-30.0, -2.0, -0.1, 0.3, 5.0, 30.0}) {
    CHECK(stable_sigmoid(z) + stable_sigmoid(-z) ==
          Catch::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("analytic derivatives agree with central differences") {
  RngStream rng(421);
  ObjectiveProblem quad = make_synthetic_quadratic(6, 50.0, 7);
  ObjectiveProblem logi = make_logistic_toy(40, 5, 9, 1e-2, 3.0, 0.1);
  for (const ObjectiveProblem* obj : {&quad, &logi}) {
    for (int p = 0; p < 5; ++p) {
      DenseVector x = rng.gaussian(obj->dim());
      CheckReport g = finite_diff_check_gradient(*obj, x, 1e-6, 1e-5);
      INFO(g.name << " worst margin " << g.worst_margin);
      CHECK(g.passed());
      DenseVector v = rng.gaussian(obj->dim());
      CheckReport h = finite_diff_check_hvp(*obj, x, v, 1e-5, 1e-4);
      INFO(h.name << " worst margin " << h.worst_margin);
      CHECK(h.passed());
    }
  }
}

TEST_CASE("objectives satisfy their stated convexity envelopes") {
  // mu/2 ||y-x||^2 <= f(y) - f(x) - g(x)'(y-x) <= L/2 ||y-x||^2
  RngStream rng(77);
  ObjectiveProblem quad = make_synthetic_quadratic(8, 200.0, 3);
  ObjectiveProblem logi = make_logistic_toy(60, 6, 5, 5e-2, 4.0, 0.05);
  for (const ObjectiveProblem* obj : {&quad, &logi}) {
    ObjectiveConstants c = obj->constants();
    for (int p = 0; p < 200; ++p) {
      DenseVector x = rng.gaussian(obj->dim(), 2.0);
      DenseVector y = rng.gaussian(obj->dim(), 2.0);
      DenseVector diff = subtract(y, x);
      double gap = obj->eval(y) - obj->eval(x) - dot(obj->grad(x), diff);
      double dist = norm_sq(diff);
      REQUIRE(gap >= 0.5 * c.mu * dist - 1e-9 * (1.0 + std::abs(gap)));
      REQUIRE(gap <= 0.5 * c.L * dist + 1e-9 * (1.0 + std::abs(gap)));
    }
  }
}

TEST_CASE("gradient norm bound against suboptimality holds on probes") {
  RngStream rng(91);
  ObjectiveProblem logi = make_logistic_toy(60, 6, 15, 1e-2, 4.0, 0.05);
  ReferenceSolution ref = solve_reference(logi);
  std::vector<DenseVector> points;
  for (int p = 0; p < 300; ++p) {
    points.push_back(add_scaled(ref.x_star, 1.0, rng.gaussian(logi.dim(), 2.0)));
  }
  CheckReport rep = check_gradient_bound(logi, ref, points);
  INFO("worst margin " << rep.worst_margin);
  CHECK(rep.passed());
  CHECK(rep.items == 300);
}

TEST_CASE("synthetic quadratic spans the requested condition number") {
  ObjectiveProblem obj = make_synthetic_quadratic(10, 1000.0, 42);
  ObjectiveConstants c = obj.constants();
  CHECK(c.L == 1.0);
  CHECK(c.mu == Catch::Approx(1e-3).epsilon(1e-12));
  // deterministic in the seed
  ObjectiveProblem again = make_synthetic_quadratic(10, 1000.0, 42);
  CHECK(obj.digest() == again.digest());
  CHECK(obj.linear_term() == again.linear_term());
  ObjectiveProblem other = make_synthetic_quadratic(10, 1000.0, 43);
  CHECK(obj.digest() != other.digest());
}

TEST_CASE("newton reference certifies a true minimizer") {
  ObjectiveProblem obj = make_logistic_toy(80, 6, 21, 1e-2, 5.0, 0.0);
  ReferenceSolution ref = solve_reference(obj);
  CHECK(ref.grad_norm <= 1e-10);
  RngStream rng(33);
  for (int p = 0; p < 50; ++p) {
    DenseVector probe = add_scaled(ref.x_star, 1.0, rng.gaussian(obj.dim()));
    REQUIRE(obj.eval(probe) >= ref.f_star - 1e-12);
  }
}

TEST_CASE("reference cache stores, reloads, and survives corruption") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "precmom_cache_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  setenv("PRECOND_MOMENTUM_CACHE", dir.c_str(), 1);

  ObjectiveProblem obj = make_logistic_toy(50, 4, 55, 1e-2, 2.0, 0.0);
  ReferenceSolution first = solve_reference(obj);
  fs::path file =
      dir / ("precmom-ref-" + detail::hex64(obj.digest()) + ".txt");
  REQUIRE(fs::exists(file));

  // loads back bit-identically through the public entry point
  ReferenceSolution second = solve_reference(obj);
  CHECK(second.x_star == first.x_star);
  CHECK(second.f_star == first.f_star);

  // and through the cache reader directly
  ReferenceSolution direct;
  REQUIRE(detail::try_load_cached_reference(file, obj, {}, direct));
  CHECK(direct.x_star == first.x_star);

  // a corrupted entry fails certification and is recomputed, not trusted
  {
    std::ifstream in(file);
    std::string header, digest, dim, values;
    std::getline(in, header);
    std::getline(in, digest);
    std::getline(in, dim);
    std::getline(in, values);
    in.close();
    std::ofstream out(file, std::ios::trunc);
    out << header << "\n" << digest << "\n" << dim << "\n";
    out << "1.5 " << values.substr(values.find(' ') + 1) << "\n";
  }
  ReferenceSolution fixed;
  CHECK_FALSE(detail::try_load_cached_reference(file, obj, {}, fixed));
  ReferenceSolution recomputed = solve_reference(obj);
  CHECK(recomputed.grad_norm <= 1e-10);
  CHECK(recomputed.x_star == first.x_star);

  // quadratics never touch the cache
  ObjectiveProblem quad = make_synthetic_quadratic(4, 10.0, 1);
  (void)solve_reference(quad);
  fs::path qfile =
      dir / ("precmom-ref-" + detail::hex64(quad.digest()) + ".txt");
  CHECK_FALSE(fs::exists(qfile));

  unsetenv("PRECOND_MOMENTUM_CACHE");
  fs::remove_all(dir);
}

TEST_CASE("digest reflects every defining field") {
  ObjectiveProblem a = ObjectiveProblem::quadratic_diag({1.0, 2.0}, {0.0, 0.0});
  ObjectiveProblem b = ObjectiveProblem::quadratic_diag({1.0, 2.0}, {0.0, 1.0});
  ObjectiveProblem c = ObjectiveProblem::quadratic_diag({1.0, 3.0}, {0.0, 0.0});
  CHECK(a.digest() != b.digest());
  CHECK(a.digest() != c.digest());
  ObjectiveProblem l1 = ObjectiveProblem::logistic_l2({1.0}, 1, 1, {1.0}, 0.1);
  ObjectiveProblem l2 = ObjectiveProblem::logistic_l2({1.0}, 1, 1, {1.0}, 0.2);
  ObjectiveProblem l3 = ObjectiveProblem::logistic_l2({1.0}, 1, 1, {-1.0}, 0.1);
  CHECK(l1.digest() != l2.digest());
  CHECK(l1.digest() != l3.digest());
}

TEST_CASE("logistic toy honors its spread and flip controls") {
  ObjectiveProblem obj = make_logistic_toy(30, 4, 11, 1e-3, 8.0, 0.0);
  CHECK(obj.sample_count() == 30);
  CHECK(obj.dim() == 4);
  for (double y : obj.labels()) REQUIRE((y == 1.0 || y == -1.0));
  // deterministic in the seed
  ObjectiveProblem again = make_logistic_toy(30, 4, 11, 1e-3, 8.0, 0.0);
  CHECK(obj.digest() == again.digest());
}
