#include "truncaug/truncation.hpp"

#include <algorithm>
#include <cmath>

namespace truncaug {

TruncationScheme::TruncationScheme(std::vector<std::vector<StateId>> levels, SparseDist reentry)
    : levels_(std::move(levels)) {
  if (levels_.empty()) throw Error(ErrorKind::Config, "truncation needs at least one level");
  for (auto& level : levels_) {
    std::sort(level.begin(), level.end());
    level.erase(std::unique(level.begin(), level.end()), level.end());
    if (level.empty()) throw Error(ErrorKind::Config, "empty truncation set");
  }
  for (std::size_t n = 1; n < levels_.size(); ++n) {
    if (!std::includes(levels_[n].begin(), levels_[n].end(), levels_[n - 1].begin(),
                       levels_[n - 1].end())) {
      throw Error(ErrorKind::Config, "truncation sets are not nested at level " + std::to_string(n + 1));
    }
  }
  reentry_ = require_probability(reentry, ErrorKind::ReentryOutsideA1, "re-entry distribution");
  for (const Mass& e : reentry_.entries()) {
    if (!contains(1, e.state)) {
      throw Error(ErrorKind::ReentryOutsideA1,
                  "re-entry distribution charges state " + std::to_string(e.state) + " outside A_1");
    }
  }
}

TruncationScheme TruncationScheme::prefix(const std::vector<std::size_t>& sizes, SparseDist reentry) {
  std::vector<std::vector<StateId>> levels;
  levels.reserve(sizes.size());
  for (std::size_t size : sizes) {
    std::vector<StateId> level(size);
    for (std::size_t i = 0; i < size; ++i) level[i] = i;
    levels.push_back(std::move(level));
  }
  return TruncationScheme(std::move(levels), std::move(reentry));
}

std::span<const StateId> TruncationScheme::level(std::size_t n) const {
  if (n < 1 || n > levels_.size()) {
    throw Error(ErrorKind::Config, "truncation level " + std::to_string(n) + " out of range");
  }
  return levels_[n - 1];
}

bool TruncationScheme::contains(std::size_t n, StateId x) const {
  const auto set = level(n);
  return std::binary_search(set.begin(), set.end(), x);
}

bool TruncationScheme::first_set_contains(std::span<const StateId> set) const {
  return std::all_of(set.begin(), set.end(), [&](StateId x) { return contains(1, x); });
}

TruncationScheme TruncationScheme::with_reentry(SparseDist reentry) const {
  return TruncationScheme(levels_, std::move(reentry));
}

namespace {

double interior_to_exit(double interior, StateId x) {
  const double out = 1.0 - interior;
  if (out < -kRowTolerance) {
    throw Error(ErrorKind::InvalidKernel,
                "row " + std::to_string(x) + " has interior mass above 1: " + std::to_string(interior));
  }
  return std::clamp(out, 0.0, 1.0);
}

}  // namespace

double exit_mass(const KernelSpec& k, const TruncationScheme& scheme, StateId x, std::size_t n) {
  if (!scheme.contains(n, x)) {
    throw Error(ErrorKind::StateOutsideTruncation,
                "state " + std::to_string(x) + " not in A_" + std::to_string(n));
  }
  double interior = 0.0;
  const SparseDist krow = kernel_row(k, x);
  for (const Mass& e : krow.entries()) {
    if (scheme.contains(n, e.state)) interior += e.mass;
  }
  return interior_to_exit(interior, x);
}

AugmentedKernel augment(const KernelSpec& k, const TruncationScheme& scheme, std::size_t n) {
  const auto states = scheme.level(n);
  AugmentedKernel out;
  out.level = n;
  out.exit_mass.resize(states.size());

  auto local = [&](StateId y) -> std::optional<std::uint32_t> {
    auto it = std::lower_bound(states.begin(), states.end(), y);
    if (it == states.end() || *it != y) return std::nullopt;
    return static_cast<std::uint32_t>(it - states.begin());
  };
  std::vector<FiniteKernel::Entry> reentry_cols;
  for (const Mass& e : scheme.reentry().entries()) {
    reentry_cols.push_back({*local(e.state), e.mass});
  }

  std::vector<std::vector<FiniteKernel::Entry>> rows(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    double interior = 0.0;
    const SparseDist krow = kernel_row(k, states[i]);
    for (const Mass& e : krow.entries()) {
      if (auto j = local(e.state)) {
        rows[i].push_back({*j, e.mass});
        interior += e.mass;
      }
    }
    const double exit = interior_to_exit(interior, states[i]);
    out.exit_mass[i] = exit;
    if (exit > 0.0) {
      for (const auto& r : reentry_cols) rows[i].push_back({r.col, exit * r.value});
    }
  }
  out.matrix = FiniteKernel(std::vector<StateId>(states.begin(), states.end()), rows);
  return out;
}

AugmentedKernel fixed_state_augment(const KernelSpec& k, const TruncationScheme& scheme,
                                    std::size_t n, StateId z) {
  return augment(k, scheme.with_reentry(SparseDist::point(z)), n);
}

TruncationScheme level_sets_from_g(const KernelSpec& k, const LyapunovFn& g,
                                   const std::vector<double>& thresholds, StateId seed,
                                   SparseDist reentry, std::size_t cap) {
  if (thresholds.empty()) throw Error(ErrorKind::Config, "no thresholds given");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw Error(ErrorKind::Config, "thresholds must be strictly increasing");
    }
  }
  const double top = thresholds.back();
  const auto all = enumerate_reachable(k, seed, [&](StateId x) { return g(x) <= top; }, cap);
  std::vector<std::vector<StateId>> levels;
  for (double t : thresholds) {
    std::vector<StateId> level;
    for (StateId x : all) {
      if (g(x) <= t) level.push_back(x);
    }
    levels.push_back(std::move(level));
  }
  return TruncationScheme(std::move(levels), std::move(reentry));
}

double max_dominance_violation(const KernelSpec& k, const AugmentedKernel& pn) {
  const auto& m = pn.matrix;
  double worst = -1.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const SparseDist row = kernel_row(k, m.states()[i]);
    for (const Mass& e : row.entries()) {
      if (auto j = m.index_of(e.state)) worst = std::max(worst, e.mass - m.entry(i, *j));
    }
    for (const auto& e : m.row(i)) worst = std::max(worst, row.mass(m.states()[e.col]) - e.value);
  }
  return worst;
}

double max_row_defect(const FiniteKernel& kernel) {
  double worst = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    worst = std::max(worst, std::fabs(kernel.row_sum(i) - 1.0));
  }
  return worst;
}

}  // namespace truncaug
