#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>
#include <doctest.h>

#include "truncaug/kernel_model.hpp"
#include "truncaug/solver.hpp"

namespace testutil {

inline constexpr double kThird = 1.0 / 3.0;

inline truncaug::KernelSpec walk_kernel(double p = kThird) {
  using truncaug::SparseDist;
  using truncaug::StateId;
  return truncaug::KernelSpec::countable(
      [p](StateId x) {
        if (x == 0) return SparseDist({{0, 1.0 - p}, {1, p}});
        return SparseDist({{x - 1, 1.0 - p}, {x + 1, p}});
      },
      "walk");
}

inline truncaug::FiniteKernel from_eigen(const Eigen::MatrixXd& P) {
  std::vector<double> dense;
  std::vector<truncaug::StateId> states;
  for (int i = 0; i < P.rows(); ++i) {
    states.push_back(static_cast<truncaug::StateId>(i));
    for (int j = 0; j < P.cols(); ++j) dense.push_back(P(i, j));
  }
  return truncaug::FiniteKernel::from_dense(states, dense);
}

inline truncaug::SparseDist random_measure(std::mt19937_64& gen, truncaug::StateId span, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<truncaug::Mass> e;
  for (truncaug::StateId x = 0; x < span; ++x) {
    if (u(gen) < density) e.push_back({x, u(gen)});
  }
  return truncaug::SparseDist(e);
}

}  // namespace testutil
