#include <cmath>
#include <limits>

#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "truncaug/drift_verify.hpp"

using namespace truncaug;
using testutil::kThird;

TEST_CASE("walk drift certificate") {
  const KernelSpec k = testutil::walk_kernel();
  const DriftReport ok = check_drift(k, {LyapunovFn::linear(3.0), WeightFn::one(), 2.0, {0}, prefix_window(101)});
  CHECK(ok.pass);
  CHECK(std::fabs(ok.worst_slack) <= 1e-10);
  CHECK(ok.window_size == 101);
  CHECK(ok.window_max == 100);

  const DriftReport low_b = check_drift(k, {LyapunovFn::linear(3.0), WeightFn::one(), 0.5, {0}, prefix_window(101)});
  CHECK_FALSE(low_b.pass);
  CHECK(low_b.worst_state == 0);
  CHECK(low_b.worst_slack == doctest::Approx(1.5));

  const DriftReport zero = check_drift(k, {LyapunovFn::zero(), WeightFn::one(), 0.0, {0}, prefix_window(20)});
  CHECK_FALSE(zero.pass);
  CHECK(zero.worst_slack == doctest::Approx(1.0));
}

TEST_CASE("unbounded Lyapunov function on a successor") {
  const KernelSpec k = testutil::walk_kernel();
  const LyapunovFn g([](StateId x) { return x >= 5 ? std::numeric_limits<double>::infinity() : 1.0; }, "blowup");
  try {
    check_drift(k, {g, WeightFn::one(), 1.0, {0}, prefix_window(5)});
    FAIL("expected UnboundedG");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnboundedG);
  }
}

TEST_CASE("minorization constants") {
  const KernelSpec k = testutil::walk_kernel();
  CHECK(max_minorization_lambda(k, {0}, SparseDist::point(0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(max_minorization_lambda(k, {0, 1}, SparseDist::point(0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(max_minorization_lambda(k, {0, 1}, SparseDist::point(1)) == 0.0);
  // The residual P - lambda phi stays nonnegative.
  for (const SparseDist& phi : {SparseDist::point(0), SparseDist({{0, 0.5}, {1, 0.5}})}) {
    const std::vector<StateId> C{0, 1, 2};
    const double lam = max_minorization_lambda(k, C, phi);
    for (StateId x : C) {
      const SparseDist row = kernel_row(k, x);
      for (StateId y = 0; y < 5; ++y) CHECK(row.mass(y) - lam * phi.mass(y) >= -1e-12);
    }
  }
}

TEST_CASE("confined m-step kernel") {
  const KernelSpec k = testutil::walk_kernel();
  const FiniteKernel k2 = m_step_confined_kernel(k, {0, 1, 2}, 2);
  CHECK(k2.entry(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(k2.entry(0, 1) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  CHECK(k2.entry(0, 2) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));

  const FiniteKernel k1 = m_step_confined_kernel(k, {0, 1, 2}, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const SparseDist row = kernel_row(k, i);
    for (std::size_t j = 0; j < 3; ++j) CHECK(k1.entry(i, j) == row.mass(j));
  }

  const KernelSpec absorbing = kernel_from_triples({{0, 0, 0.5}, {0, 1, 0.5}, {1, 1, 1.0}}, "abs");
  const FiniteKernel ka = m_step_confined_kernel(absorbing, {0, 1}, 3);
  CHECK(ka.entry(1, 1) == 1.0);
  CHECK(ka.entry(1, 0) == 0.0);

  std::vector<double> prev(5, 1.0);
  for (std::size_t m = 1; m <= 6; ++m) {
    const FiniteKernel km = m_step_confined_kernel(k, {0, 1, 2, 3, 4}, m);
    for (std::size_t i = 0; i < km.size(); ++i) {
      CHECK(km.row_sum(i) <= 1.0 + 1e-12);
      CHECK(km.row_sum(i) <= prev[i] + 1e-15);
      prev[i] = km.row_sum(i);
    }
  }
  CHECK(max_confined_minorization_lambda(k, {0, 1, 2}, {0}, SparseDist::point(0), 2) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("first-passage cost of the walk") {
  const KernelSpec k = testutil::walk_kernel();
  const FirstPassageCost h = first_passage_cost(k, {0}, WeightFn::one(), prefix_window(201));
  CHECK(h.at(0) == 0.0);
  CHECK(h.equation_residual <= 1e-10);
  for (StateId x = 0; x <= 50; ++x) CHECK(std::fabs(h.at(x) - 3.0 * x) <= 1e-8);
  for (StateId x = 1; x <= 200; ++x) CHECK(h.at(x) >= 1.0);
  // Linear-solve and Monte Carlo oracles.
  for (int x : {1, 5, 20}) CHECK(std::fabs(h.at(x) - oracle::walk_hitting_time(kThird, x, 201)) <= 1e-9);
  const oracle::McEstimate mc = oracle::walk_hitting_time_mc(kThird, 5, 20000, 8);
  CHECK(std::fabs(h.at(5) - mc.mean) <= 4.0 * mc.std_error);

  const FirstPassageCost all = first_passage_cost(k, prefix_window(10), WeightFn::one(), prefix_window(10));
  for (StateId x = 0; x < 10; ++x) CHECK(all.at(x) == 0.0);
}

TEST_CASE("drift pass bounds the first-passage cost") {
  const KernelSpec k = testutil::walk_kernel();
  const LyapunovFn g = LyapunovFn::linear(3.0);
  REQUIRE(check_drift(k, {g, WeightFn::one(), 2.0, {0}, prefix_window(150)}).pass);
  const FirstPassageCost h = first_passage_cost(k, {0}, WeightFn::one(), prefix_window(150), g);
  CHECK_FALSE(h.approximate);
  for (StateId x = 0; x < 150; ++x) CHECK(h.at(x) <= g(x) + 1e-9);

  const FirstPassageCost w = first_passage_cost(k, {0}, WeightFn::linear(1.0), prefix_window(150));
  CHECK(w.approximate);
}

TEST_CASE("singular first-passage system") {
  // State 1 never reaches C = {0}.
  const KernelSpec k = kernel_from_triples({{0, 0, 0.5}, {0, 1, 0.5}, {1, 1, 1.0}}, "trap");
  try {
    first_passage_cost(k, {0}, WeightFn::one(), {0, 1});
    FAIL("expected SingularSystem");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularSystem);
  }
}

TEST_CASE("r-regularity ladder") {
  const KernelSpec k = testutil::walk_kernel();
  const std::vector<std::vector<StateId>> ladder{prefix_window(100), prefix_window(200), prefix_window(400)};
  const RRegularityReport at0 = check_r_regularity(k, SparseDist::point(0), {0}, WeightFn::one(), ladder);
  CHECK(at0.pass);
  CHECK(at0.bound == 0.0);
  const RRegularityReport at5 =
      check_r_regularity(k, SparseDist::point(5), {0}, WeightFn::one(), ladder, LyapunovFn::linear(3.0));
  CHECK(std::fabs(at5.bound - 15.0) <= 1e-8);
  CHECK(at5.ladder_values.size() == 3);
  CHECK(at5.g_integral.value() == doctest::Approx(15.0));

  // Masses 2^-k at states 2^k: each term contributes about 3, so the ladder keeps growing.
  std::vector<Mass> heavy;
  for (int j = 1; j <= 12; ++j) heavy.push_back({StateId{1} << j, std::ldexp(1.0, -j)});
  const SparseDist nu = SparseDist(heavy).normalized();
  try {
    check_r_regularity(k, nu, {0}, WeightFn::one(), {prefix_window(64), prefix_window(128), prefix_window(256)});
    FAIL("expected NoStabilization");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoStabilization);
  }
}

TEST_CASE("small-set certificate validation") {
  SmallSetCert ok{{0}, 0.5, SparseDist::point(0), 1, {}, true};
  CHECK_NOTHROW(ok.validate());
  SmallSetCert off_c = ok;
  off_c.phi = SparseDist::point(1);
  CHECK_THROWS_AS(off_c.validate(), Error);
  off_c.phi_on_small_set = false;
  CHECK_NOTHROW(off_c.validate());
  SmallSetCert bad_lambda = ok;
  bad_lambda.lambda = 0.0;
  CHECK_THROWS_AS(bad_lambda.validate(), Error);
  SmallSetCert m2 = ok;
  m2.m = 2;
  m2.confinement = {1, 2};
  CHECK_THROWS_AS(m2.validate(), Error);
}
