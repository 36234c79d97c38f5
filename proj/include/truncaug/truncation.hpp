#pragma once

// Truncation sets A_1 ⊆ A_2 ⊆ ... and the augmented kernels
//   P_n(x, y) = P(x, y) + P(x, A_n^c) nu(y),   x, y in A_n.

#include <cstddef>
#include <span>
#include <vector>

#include "truncaug/kernel_model.hpp"

namespace truncaug {

class TruncationScheme {
 public:
  // levels[0] is A_1. Each level is sorted on construction. Throws Config
  // if the sets are not nested and ReentryOutsideA1 if nu leaves A_1.
  TruncationScheme(std::vector<std::vector<StateId>> levels, SparseDist reentry);

  // A_n = {0, ..., sizes[n-1] - 1}
  static TruncationScheme prefix(const std::vector<std::size_t>& sizes, SparseDist reentry);

  std::size_t level_count() const { return levels_.size(); }
  // 1-based, as A_n.
  std::span<const StateId> level(std::size_t n) const;
  bool contains(std::size_t n, StateId x) const;
  bool first_set_contains(std::span<const StateId> set) const;

  const SparseDist& reentry() const { return reentry_; }
  TruncationScheme with_reentry(SparseDist reentry) const;

 private:
  std::vector<std::vector<StateId>> levels_;
  SparseDist reentry_;
};

struct AugmentedKernel {
  std::size_t level = 0;
  FiniteKernel matrix;
  // P(x, A_n^c) for each local row.
  std::vector<double> exit_mass;
};

// 1 - sum_{y in A_n} P(x, y), clamped at 0 for float residue up to 1e-12.
double exit_mass(const KernelSpec& k, const TruncationScheme& scheme, StateId x, std::size_t n);

AugmentedKernel augment(const KernelSpec& k, const TruncationScheme& scheme, std::size_t n);

// augment with nu = delta_z
AugmentedKernel fixed_state_augment(const KernelSpec& k, const TruncationScheme& scheme,
                                    std::size_t n, StateId z);

// A_n = {x reachable from seed : g(x) <= thresholds[n-1]}.
TruncationScheme level_sets_from_g(const KernelSpec& k, const LyapunovFn& g,
                                   const std::vector<double>& thresholds, StateId seed,
                                   SparseDist reentry, std::size_t cap = 1'000'000);

// max over x, y in A_n of P(x, y) - P_n(x, y); <= 1e-12 for an augmentation.
double max_dominance_violation(const KernelSpec& k, const AugmentedKernel& pn);

// max over rows of |sum_y P_n(x, y) - 1|
double max_row_defect(const FiniteKernel& kernel);

}  // namespace truncaug
