#include <cmath>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "truncaug/simd/kernels.hpp"
#include "truncaug/solver.hpp"

using namespace truncaug;
using testutil::kThird;

TEST_CASE("two-state chain") {
  const FiniteKernel k = FiniteKernel::from_dense({0, 1}, std::vector<double>{0.5, 0.5, 0.25, 0.75});
  const StationaryResult r = solve_stationary_elimination(k);
  CHECK(r.pi[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.pi[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.residual <= 1e-15);
  CHECK(r.method == "elimination");
  const StationaryResult p = power_iterate(k);
  CHECK(std::fabs(p.pi[0] - r.pi[0]) <= 1e-10);
  CHECK(std::fabs(p.pi[1] - r.pi[1]) <= 1e-10);
}

TEST_CASE("single state") {
  const FiniteKernel k = FiniteKernel::from_dense({7}, std::vector<double>{1.0});
  CHECK(solve_stationary_elimination(k).as_dist() == SparseDist::point(7));
  const StationaryResult p = power_iterate(k);
  CHECK(p.iterations <= 1);
  CHECK(p.pi[0] == 1.0);
}

TEST_CASE("augmented walk on {0,1}") {
  const auto scheme = TruncationScheme::prefix({1, 2}, SparseDist::point(0));
  const StationaryResult r = solve_stationary_elimination(augment(testutil::walk_kernel(), scheme, 2));
  CHECK(r.level.value() == 2);
  CHECK(r.pi[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.pi[1] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("periodic chain needs damping") {
  const FiniteKernel swap = FiniteKernel::from_dense({0, 1}, std::vector<double>{0, 1, 1, 0});
  PowerOptions never;
  never.damping = Damping::Never;
  never.max_iters = 200;
  never.initial = {0.9, 0.1};
  try {
    power_iterate(swap, never);
    FAIL("expected IterationLimit");
  } catch (const IterationLimitError& e) {
    CHECK(e.kind() == ErrorKind::IterationLimit);
    CHECK(e.last_iterate().size() == 2);
    CHECK(e.residual() > 0.1);
  }
  PowerOptions automatic;
  automatic.initial = {0.9, 0.1};
  const StationaryResult r = power_iterate(swap, automatic);
  CHECK(r.method == "power-damped");
  CHECK(std::fabs(r.pi[0] - 0.5) <= 1e-12);
}

TEST_CASE("reducible kernels are rejected, transient states get no mass") {
  const FiniteKernel two_classes = FiniteKernel::from_dense({0, 1}, std::vector<double>{1, 0, 0, 1});
  try {
    solve_stationary_elimination(two_classes);
    FAIL("expected ReducibleKernel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ReducibleKernel);
  }
  const FiniteKernel transient =
      FiniteKernel::from_dense({0, 1, 2}, std::vector<double>{0.5, 0.5, 0, 0, 0.5, 0.5, 0, 0.5, 0.5});
  const StationaryResult r = solve_stationary_elimination(transient);
  CHECK(r.pi[0] == 0.0);
  CHECK(r.pi[1] == doctest::Approx(0.5));
}

TEST_CASE("elimination, power iteration and an eigenvector oracle agree") {
  std::mt19937_64 gen(2024);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 7;
    const Eigen::MatrixXd M = oracle::random_irreducible(n, gen);
    const FiniteKernel k = testutil::from_eigen(M);
    const StationaryResult e = solve_stationary_elimination(k);
    const StationaryResult p = power_iterate(k);
    const Eigen::VectorXd ref = oracle::eigen_stationary(M);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(e.pi[i] - ref(i)) <= 1e-10);
      CHECK(std::fabs(e.pi[i] - p.pi[i]) <= 1e-8);
      sum += e.pi[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-10);
    CHECK(e.residual <= 1e-10);
    // pi(B) is preserved by one kernel step for every singleton B.
    const Eigen::VectorXd step = M.transpose() * Eigen::Map<const Eigen::VectorXd>(e.pi.data(), n);
    for (int i = 0; i < n; ++i) CHECK(std::fabs(step(i) - e.pi[i]) <= 1e-10);
  }
}

TEST_CASE("dense and sparse backends agree") {
  const auto scheme = TruncationScheme::prefix({300}, SparseDist({{0, 0.5}, {1, 0.5}}));
  const AugmentedKernel pn = augment(testutil::walk_kernel(0.4), scheme, 1);
  const StationaryResult d = solve_stationary_elimination(pn, Backend::Dense);
  const StationaryResult s = solve_stationary_elimination(pn, Backend::Sparse);
  CHECK(s.method == "elimination-sparse");
  for (std::size_t i = 0; i < d.pi.size(); ++i) CHECK(std::fabs(d.pi[i] - s.pi[i]) <= 1e-14);
  const Eigen::MatrixXd M = oracle::walk_augmented(0.4, 300, {{0, 0.5}, {1, 0.5}});
  const Eigen::VectorXd ref = oracle::linear_stationary(M);
  for (int i = 0; i < 300; ++i) CHECK(std::fabs(d.pi[i] - ref(i)) <= 1e-12);
}

TEST_CASE("large sparse solve") {
  const auto scheme = TruncationScheme::prefix({5000}, SparseDist::point(0));
  const StationaryResult r = solve_stationary_elimination(augment(testutil::walk_kernel(), scheme, 1));
  CHECK(r.method == "elimination-sparse");
  CHECK(r.residual <= 1e-12);
  CHECK(r.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scalar and vector paths give the same solve") {
  const auto scheme = TruncationScheme::prefix({700}, SparseDist::point(0));
  const AugmentedKernel pn = augment(testutil::walk_kernel(0.45), scheme, 1);
  const simd::Isa before = simd::active_isa();
  simd::set_active_isa(simd::Isa::Scalar);
  const StationaryResult a = solve_stationary_elimination(pn, Backend::Dense);
  simd::set_active_isa(simd::Isa::Avx2);
  const StationaryResult b = solve_stationary_elimination(pn, Backend::Dense);
  simd::set_active_isa(before);
  for (std::size_t i = 0; i < a.pi.size(); ++i) CHECK(std::fabs(a.pi[i] - b.pi[i]) <= 1e-13 * std::max(a.pi[i], 1e-300) + 1e-300);
}

TEST_CASE("weighted total variation") {
  CHECK(weighted_tv(SparseDist::point(0), SparseDist::point(0), WeightFn::one()) == 0.0);
  CHECK(weighted_tv(SparseDist::point(0), SparseDist::point(1), WeightFn::one()) == 2.0);
  CHECK(weighted_tv(SparseDist::point(0), SparseDist::point(1), WeightFn::linear(1.0)) == 3.0);
}

TEST_CASE("weighted total variation is the supremum over |f| <= r") {
  // Brute force over sign patterns on supports of size <= 10.
  std::mt19937_64 gen(5);
  const WeightFn r = WeightFn::linear(0.5);
  for (int t = 0; t < 50; ++t) {
    const SparseDist a = testutil::random_measure(gen, 10, 0.7);
    const SparseDist b = testutil::random_measure(gen, 10, 0.7);
    double best = 0.0;
    for (unsigned mask = 0; mask < (1u << 10); ++mask) {
      double v = 0.0;
      for (StateId x = 0; x < 10; ++x) {
        const double f = ((mask >> x) & 1u) ? r(x) : -r(x);
        v += f * (a.mass(x) - b.mass(x));
      }
      best = std::max(best, v);
    }
    CHECK(std::fabs(weighted_tv(a, b, r) - best) <= 1e-12);
  }
}

TEST_CASE("weighted total variation is a metric") {
  std::mt19937_64 gen(6);
  for (const WeightFn& r : {WeightFn::one(), WeightFn::linear(2.0)}) {
    for (int t = 0; t < 200; ++t) {
      const SparseDist a = testutil::random_measure(gen, 30);
      const SparseDist b = testutil::random_measure(gen, 30);
      const SparseDist c = testutil::random_measure(gen, 30);
      CHECK(weighted_tv(a, b, r) == weighted_tv(b, a, r));
      CHECK(weighted_tv(a, c, r) <= weighted_tv(a, b, r) + weighted_tv(b, c, r) + 1e-12);
      CHECK(weighted_tv(a, a, r) == 0.0);
      if (!(a == b)) CHECK(weighted_tv(a, b, r) > 0.0);
    }
  }
  const std::vector<double> w{1, 2, 3}, m1{0.2, 0.3, 0.5}, m2{0.5, 0.5, 0.0};
  CHECK(weighted_tv(w, m1, m2) == doctest::Approx(0.3 + 0.4 + 1.5));
}
