#pragma once

// Exact stationary solves for finite kernels and the r-weighted total
// variation distance.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncaug/kernel_model.hpp"
#include "truncaug/truncation.hpp"

namespace truncaug {

struct StationaryResult {
  std::optional<std::size_t> level;
  std::vector<StateId> states;
  std::vector<double> pi;  // aligned with states
  double residual = 0.0;   // ||pi P - pi||_1
  std::string method;
  std::size_t iterations = 0;

  SparseDist as_dist() const;
};

enum class Backend { Auto, Dense, Sparse };

// Problems up to this size use the dense backend under Backend::Auto.
inline constexpr std::size_t kDenseLimit = 2048;

// Strongly connected components with no edges leaving them, each sorted.
std::vector<std::vector<std::size_t>> recurrent_classes(const FiniteKernel& kernel);

// Grassmann-Taksar-Heyman state reduction. Every pivot is an off-diagonal
// row sum, so no like-signed quantities are subtracted. Transient states
// get mass 0; more than one recurrent class throws ReducibleKernel.
StationaryResult solve_stationary_elimination(const FiniteKernel& kernel,
                                              Backend backend = Backend::Auto);
StationaryResult solve_stationary_elimination(const AugmentedKernel& kernel,
                                              Backend backend = Backend::Auto);

enum class Damping { Auto, Always, Never };

struct PowerOptions {
  double tol = 1e-12;
  std::size_t max_iters = 1'000'000;
  // Auto switches to the lazy kernel (I + P) / 2 once the residual stops
  // shrinking, which is what a periodic kernel does.
  Damping damping = Damping::Auto;
  std::vector<double> initial;  // empty: uniform
};

class IterationLimitError : public Error {
 public:
  IterationLimitError(std::vector<double> last_iterate, double residual);

  const std::vector<double>& last_iterate() const { return last_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> last_;
  double residual_;
};

StationaryResult power_iterate(const FiniteKernel& kernel, const PowerOptions& options = {});

// ||pi P - pi||_1
double stationarity_residual(const FiniteKernel& kernel, std::span<const double> pi);

// sum_x r(x) |mu1(x) - mu2(x)|, which is the supremum of
// int f d(mu1 - mu2) over |f| <= r. No factor 1/2: r = 1 gives sum |diff|.
double weighted_tv(const SparseDist& mu1, const SparseDist& mu2, const WeightFn& r);

// Same norm on vectors aligned with a common state list.
double weighted_tv(std::span<const double> weights, std::span<const double> mu1,
                   std::span<const double> mu2);

}  // namespace truncaug
