#pragma once

// Reference computations that share no code with the library: dense Eigen
// linear algebra on matrices built directly from the model formulas, and a
// plain Monte Carlo hitting-time estimate.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Walk P(x,x+1)=p, P(x,max(x-1,0))=1-p on {0..N-1}; exit mass spread by nu.
inline Eigen::MatrixXd walk_augmented(double p, int n, const std::vector<std::pair<int, double>>& nu) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    const int down = x == 0 ? 0 : x - 1;
    P(x, down) += 1.0 - p;
    if (x + 1 < n) {
      P(x, x + 1) += p;
    } else {
      for (auto [z, w] : nu) P(x, z) += p * w;
    }
  }
  return P;
}

// pi from the eigenvector of P^T for the eigenvalue closest to 1.
inline Eigen::VectorXd eigen_stationary(const Eigen::MatrixXd& P) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(P.transpose());
  int best = 0;
  for (int i = 1; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
  }
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

// pi from (P^T - I) pi = 0 with one equation replaced by sum pi = 1.
inline Eigen::VectorXd linear_stationary(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return A.fullPivLu().solve(b);
}

// Same for a generator: pi G = 0.
inline Eigen::VectorXd generator_stationary(const Eigen::MatrixXd& G) {
  const int n = static_cast<int>(G.rows());
  Eigen::MatrixXd A = G.transpose();
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return A.fullPivLu().solve(b);
}

// Birth-death generator on {0..N-1}, exits at N-1 redirected to 0.
inline Eigen::MatrixXd bd_truncated_generator(double up, double down, int n) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    const double beta = x == 0 ? up : up + down;
    if (x > 0) G(x, x - 1) += down;
    G(x, x + 1 < n ? x + 1 : 0) += up;
    G(x, x) -= beta;
  }
  return G;
}

// Expected hitting time of {0} from x for the walk, by a linear solve on
// {0..window-1} with h = 0 at 0 and a reflecting-free cut at the top
// (the upward escape probability past a few hundred states is negligible).
inline double walk_hitting_time(double p, int x, int window) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(window, window);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(window);
  b(0) = 0.0;
  for (int s = 1; s < window; ++s) {
    A(s, s - 1) -= 1.0 - p;
    if (s + 1 < window) A(s, s + 1) -= p;
  }
  return A.partialPivLu().solve(b)(x);
}

// Monte Carlo estimate of the same hitting time with std::mt19937_64.
struct McEstimate {
  double mean;
  double std_error;
};

inline McEstimate walk_hitting_time_mc(double p, int x, int trials, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0;
  double sum2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    int s = x;
    double steps = 0.0;
    while (s != 0) {
      s += u(gen) < p ? 1 : -1;
      steps += 1.0;
    }
    sum += steps;
    sum2 += steps * steps;
  }
  const double mean = sum / trials;
  const double var = sum2 / trials - mean * mean;
  return {mean, std::sqrt(var / trials)};
}

// Random irreducible stochastic matrix: positive weights on a Hamiltonian
// cycle plus random sparse extras.
inline Eigen::MatrixXd random_irreducible(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    P(i, (i + 1) % n) = 0.05 + u(gen);
    for (int j = 0; j < n; ++j) {
      if (u(gen) < 0.5) P(i, j) += u(gen);
    }
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

}  // namespace oracle
