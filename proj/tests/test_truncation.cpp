#include <cmath>

#include <doctest.h>

#include "helpers.hpp"
#include "truncaug/truncation.hpp"

using namespace truncaug;
using testutil::kThird;

namespace {

double dense_entry(const AugmentedKernel& pn, StateId x, StateId y) {
  return pn.matrix.entry(*pn.matrix.index_of(x), *pn.matrix.index_of(y));
}

KernelSpec three_state() {
  return kernel_from_triples({{0, 1, 0.5}, {0, 2, 0.5}, {1, 0, 1.0}, {2, 0, 0.3}, {2, 2, 0.7}}, "three");
}

}  // namespace

TEST_CASE("exit mass") {
  const KernelSpec k = testutil::walk_kernel();
  const auto scheme = TruncationScheme::prefix({1, 2}, SparseDist::point(0));
  CHECK(exit_mass(k, scheme, 1, 2) == doctest::Approx(kThird).epsilon(1e-15));
  CHECK(exit_mass(k, scheme, 0, 2) == 0.0);
  CHECK_THROWS_AS(exit_mass(k, scheme, 5, 2), Error);

  const KernelSpec f = three_state();
  const auto whole = TruncationScheme::prefix({3}, SparseDist::point(0));
  for (StateId x = 0; x < 3; ++x) CHECK(exit_mass(f, whole, x, 1) == 0.0);
}

TEST_CASE("fixed-state augmentation of the walk on {0,1}") {
  const KernelSpec k = testutil::walk_kernel();
  const auto scheme = TruncationScheme::prefix({1, 2}, SparseDist::point(0));
  const AugmentedKernel pn = augment(k, scheme, 2);
  CHECK(dense_entry(pn, 0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(dense_entry(pn, 0, 1) == doctest::Approx(kThird).epsilon(1e-15));
  CHECK(dense_entry(pn, 1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(dense_entry(pn, 1, 1) == 0.0);

  const AugmentedKernel fixed = fixed_state_augment(k, scheme, 2, 0);
  CHECK(fixed.matrix.to_dense() == pn.matrix.to_dense());
  CHECK_THROWS_AS(fixed_state_augment(k, scheme, 2, 1), Error);
}

TEST_CASE("split re-entry on {0,1,2}") {
  const KernelSpec k = testutil::walk_kernel();
  const auto scheme = TruncationScheme::prefix({2, 3}, SparseDist({{0, 0.5}, {1, 0.5}}));
  const AugmentedKernel pn = augment(k, scheme, 2);
  CHECK(dense_entry(pn, 2, 1) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(dense_entry(pn, 2, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(dense_entry(pn, 2, 2) == 0.0);
}

TEST_CASE("re-entry must live in A_1") {
  CHECK_THROWS_AS(TruncationScheme::prefix({1, 2}, SparseDist::point(1)), Error);
  try {
    TruncationScheme::prefix({2, 4}, SparseDist({{0, 0.5}, {3, 0.5}}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ReentryOutsideA1);
  }
  CHECK_THROWS_AS(TruncationScheme({{0, 1}, {0, 2}}, SparseDist::point(0)), Error);  // not nested
}

TEST_CASE("whole finite state space reproduces the kernel") {
  const KernelSpec f = three_state();
  const auto scheme = TruncationScheme::prefix({1, 3}, SparseDist::point(0));
  const AugmentedKernel pn = augment(f, scheme, 2);
  for (StateId x = 0; x < 3; ++x) {
    const SparseDist row = kernel_row(f, x);
    for (StateId y = 0; y < 3; ++y) CHECK(dense_entry(pn, x, y) == row.mass(y));
  }
}

TEST_CASE("dominance, stochasticity and monotone escape over nested levels") {
  for (double p : {0.05, kThird, 0.49}) {
    const KernelSpec k = testutil::walk_kernel(p);
    for (const SparseDist& nu : {SparseDist::point(0), SparseDist({{0, 0.2}, {1, 0.3}, {2, 0.5}})}) {
      std::vector<std::size_t> sizes;
      for (std::size_t s = 3; s <= 80; ++s) sizes.push_back(s);
      const auto scheme = TruncationScheme::prefix(sizes, nu);
      for (std::size_t n = 1; n <= scheme.level_count(); ++n) {
        const AugmentedKernel pn = augment(k, scheme, n);
        CHECK(max_dominance_violation(k, pn) <= 1e-12);
        CHECK(max_row_defect(pn.matrix) <= 1e-12);
        if (n > 1) {
          for (StateId x : scheme.level(n - 1)) {
            CHECK(exit_mass(k, scheme, x, n) <= exit_mass(k, scheme, x, n - 1));
          }
        }
      }
    }
  }
}

TEST_CASE("level sets of a Lyapunov function") {
  const KernelSpec k = testutil::walk_kernel();
  const auto s = level_sets_from_g(k, LyapunovFn::linear(1.0), {1, 3, 5}, 0, SparseDist::point(0));
  REQUIRE(s.level_count() == 3);
  CHECK(s.level(1).size() == 2);
  CHECK(s.level(2).size() == 4);
  CHECK(s.level(3).size() == 6);
  CHECK(s.level(3).back() == 5);
  const auto t = level_sets_from_g(k, LyapunovFn::linear(3.0), {6}, 0, SparseDist::point(0));
  CHECK(std::vector<StateId>(t.level(1).begin(), t.level(1).end()) == std::vector<StateId>{0, 1, 2});
  CHECK_THROWS_AS(level_sets_from_g(k, LyapunovFn::linear(1.0), {3, 1}, 0, SparseDist::point(0)), Error);
  CHECK_THROWS_AS(level_sets_from_g(k, LyapunovFn::zero(), {1}, 0, SparseDist::point(0), 1000), Error);
}
