#pragma once

// State spaces, measures and transition kernels shared by every other module.
//
// Countable states are canonicalized to nonnegative integers. General
// (continuous) state kernels are sampler-only and live on the real line.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncaug/error.hpp"
#include "truncaug/rng.hpp"

namespace truncaug {

using StateId = std::uint64_t;

inline constexpr double kRowTolerance = 1e-12;

struct Mass {
  StateId state;
  double mass;

  friend bool operator==(const Mass&, const Mass&) = default;
};

// Finite nonnegative measure, entries sorted by state with no duplicates.
// Used both for probability measures (phi, nu, pi) and for rate rows.
class SparseDist {
 public:
  SparseDist() = default;
  // Sorts, merges duplicate states and drops zero entries. Negative masses
  // above -kRowTolerance are clamped to 0; anything below is rejected.
  explicit SparseDist(std::vector<Mass> entries);

  static SparseDist point(StateId state) { return SparseDist({{state, 1.0}}); }

  std::span<const Mass> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double mass(StateId state) const;
  double total() const;
  bool contains(StateId state) const { return mass(state) > 0.0; }

  // Rescales so the total is exactly 1 (within rounding).
  SparseDist normalized() const;

  friend bool operator==(const SparseDist&, const SparseDist&) = default;

 private:
  std::vector<Mass> entries_;
};

// A probability distribution must be nonnegative with total within
// kRowTolerance of 1. Returns the normalized copy or throws kind.
SparseDist require_probability(const SparseDist& dist, ErrorKind kind, const std::string& what);

StateId sample(const SparseDist& dist, Rng& rng);

using StateFn = std::function<double(StateId)>;

// r: S -> [1, inf)
class WeightFn {
 public:
  WeightFn(StateFn fn, std::string label);
  static WeightFn one();
  // r(x) = 1 + slope * x
  static WeightFn linear(double slope);

  double operator()(StateId x) const;
  const std::string& label() const { return label_; }

 private:
  StateFn fn_;
  std::string label_;
};

// g: S -> [0, inf)
class LyapunovFn {
 public:
  LyapunovFn(StateFn fn, std::string label);
  static LyapunovFn zero();
  static LyapunovFn linear(double slope);

  double operator()(StateId x) const;
  const std::string& label() const { return label_; }
  StateFn as_function() const { return fn_; }

 private:
  StateFn fn_;
  std::string label_;
};

enum class KernelMode { Countable, General };

using RowFn = std::function<SparseDist(StateId)>;
using GeneralSampler = std::function<double(double, Rng&)>;

// A transition kernel. Countable kernels enumerate sparse rows; general
// kernels can only be sampled. Both must be pure: samplers receive the
// caller's random stream explicitly.
class KernelSpec {
 public:
  static KernelSpec countable(RowFn row, std::string name);
  static KernelSpec general(GeneralSampler sampler, std::string name);

  KernelMode mode() const { return mode_; }
  const std::string& name() const { return name_; }

  // Raw access; validation happens in kernel_row.
  const RowFn& row_fn() const { return row_; }
  const GeneralSampler& sampler() const { return sampler_; }

 private:
  KernelMode mode_ = KernelMode::Countable;
  RowFn row_;
  GeneralSampler sampler_;
  std::string name_;
};

// P(x, .) validated and normalized to a probability distribution.
SparseDist kernel_row(const KernelSpec& k, StateId x);

// (Pw)(x) = sum_y P(x, y) w(y)
double apply_kernel(const KernelSpec& k, const StateFn& w, StateId x);

// sum_x mu(x) w(x)
double measure_integral(const SparseDist& mu, const StateFn& w);

// Breadth-first enumeration of row supports from seed, restricted to states
// accepted by keep. Throws NonFiniteLevelSet if more than cap states are found.
std::vector<StateId> enumerate_reachable(const KernelSpec& k, StateId seed,
                                         const std::function<bool(StateId)>& keep,
                                         std::size_t cap);

// Finite row-major sparse kernel on an explicit, sorted list of states.
// Column indices are local positions in states().
class FiniteKernel {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
  };

  FiniteKernel() = default;
  // rows[i] holds (local column, value) pairs for states[i].
  FiniteKernel(std::vector<StateId> states, const std::vector<std::vector<Entry>>& rows);

  std::size_t size() const { return states_.size(); }
  std::span<const StateId> states() const { return states_; }
  std::optional<std::size_t> index_of(StateId state) const;

  std::span<const Entry> row(std::size_t i) const {
    return {cols_vals_.data() + row_ptr_[i], cols_vals_.data() + row_ptr_[i + 1]};
  }
  double entry(std::size_t i, std::size_t j) const;
  double row_sum(std::size_t i) const;

  // Row-major n*n copy.
  std::vector<double> to_dense() const;

  static FiniteKernel from_dense(std::vector<StateId> states, std::span<const double> dense);

 private:
  std::vector<StateId> states_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Entry> cols_vals_;
};

// Kernel on an explicit finite state set given as (row, col, prob) triples.
KernelSpec kernel_from_triples(const std::vector<std::tuple<StateId, StateId, double>>& triples,
                               std::string name);

// Parses "row,col,prob" lines (optional header line, '#' comments).
KernelSpec load_kernel_csv(const std::string& path);

}  // namespace truncaug
