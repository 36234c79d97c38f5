#include "truncaug/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "truncaug/simd/kernels.hpp"

namespace truncaug {

SparseDist StationaryResult::as_dist() const {
  std::vector<Mass> entries;
  entries.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) entries.push_back({states[i], pi[i]});
  return SparseDist(std::move(entries));
}

std::vector<std::vector<std::size_t>> recurrent_classes(const FiniteKernel& kernel) {
  // Iterative Tarjan.
  const std::size_t n = kernel.size();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  struct Frame {
    std::size_t v;
    std::size_t edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto row = kernel.row(f.v);
      if (f.edge < row.size()) {
        const std::size_t w = row[f.edge++].col;
        if (row[f.edge - 1].value <= 0.0) continue;
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> component;
        std::size_t w = 0;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = components.size();
          component.push_back(w);
        } while (w != v);
        components.push_back(std::move(component));
      }
    }
  }

  std::vector<bool> closed(components.size(), true);
  for (std::size_t v = 0; v < n; ++v) {
    for (const auto& e : kernel.row(v)) {
      if (e.value > 0.0 && comp[e.col] != comp[v]) closed[comp[v]] = false;
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (!closed[c]) continue;
    std::sort(components[c].begin(), components[c].end());
    out.push_back(std::move(components[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<double> gth_dense(const FiniteKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<double> a = kernel.to_dense();
  std::vector<double> pivot(n, 0.0);
  for (std::size_t k = n - 1; k >= 1; --k) {
    double* row_k = a.data() + k * n;
    const double s = simd::sum({row_k, k});
    if (!(s > 0.0)) throw Error(ErrorKind::ReducibleKernel, "zero pivot in state reduction");
    pivot[k] = s;
    for (std::size_t i = 0; i < k; ++i) {
      const double aik = a[i * n + k];
      if (aik != 0.0) simd::axpy(aik / s, {row_k, k}, {a.data() + i * n, k});
    }
  }
  std::vector<double> x(n, 0.0);
  x[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += x[i] * a[i * n + k];
    x[k] = acc / pivot[k];
  }
  return x;
}

std::vector<double> gth_sparse(const FiniteKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<std::unordered_map<std::uint32_t, double>> rows(n);
  std::vector<std::vector<std::uint32_t>> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : kernel.row(i)) {
      if (e.col == i || e.value == 0.0) continue;
      rows[i][e.col] = e.value;
      preds[e.col].push_back(static_cast<std::uint32_t>(i));
    }
  }
  std::vector<double> pivot(n, 0.0);
  std::vector<std::pair<std::uint32_t, double>> lower;
  for (std::size_t k = n - 1; k >= 1; --k) {
    lower.clear();
    double s = 0.0;
    for (const auto& [j, v] : rows[k]) {
      if (j < k) lower.emplace_back(j, v);
    }
    std::sort(lower.begin(), lower.end());
    for (const auto& [j, v] : lower) s += v;
    if (!(s > 0.0)) throw Error(ErrorKind::ReducibleKernel, "zero pivot in state reduction");
    pivot[k] = s;
    for (std::uint32_t i : preds[k]) {
      if (i >= k) continue;
      const double factor = rows[i].at(static_cast<std::uint32_t>(k)) / s;
      for (const auto& [j, v] : lower) {
        if (j == i) continue;
        auto [it, inserted] = rows[i].try_emplace(j, 0.0);
        it->second += factor * v;
        if (inserted) preds[j].push_back(i);
      }
    }
  }
  std::vector<double> x(n, 0.0);
  x[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<std::uint32_t> from = preds[k];
    std::sort(from.begin(), from.end());
    double acc = 0.0;
    for (std::uint32_t i : from) {
      if (i < k) acc += x[i] * rows[i].at(static_cast<std::uint32_t>(k));
    }
    x[k] = acc / pivot[k];
  }
  return x;
}

FiniteKernel restrict_to(const FiniteKernel& kernel, const std::vector<std::size_t>& keep) {
  std::vector<std::int64_t> local(kernel.size(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) local[keep[i]] = static_cast<std::int64_t>(i);
  std::vector<StateId> states;
  std::vector<std::vector<FiniteKernel::Entry>> rows(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    states.push_back(kernel.states()[keep[i]]);
    for (const auto& e : kernel.row(keep[i])) {
      if (local[e.col] >= 0) rows[i].push_back({static_cast<std::uint32_t>(local[e.col]), e.value});
    }
  }
  return FiniteKernel(std::move(states), rows);
}

void normalize(std::vector<double>& x) {
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  for (double& v : x) v /= total;
}

}  // namespace

double stationarity_residual(const FiniteKernel& kernel, std::span<const double> pi) {
  if (pi.size() != kernel.size()) throw Error(ErrorKind::DimensionMismatch, "pi length != kernel size");
  std::vector<double> next(pi.size(), 0.0);
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    for (const auto& e : kernel.row(i)) next[e.col] += pi[i] * e.value;
  }
  return simd::abs_diff(next, pi);
}

StationaryResult solve_stationary_elimination(const FiniteKernel& kernel, Backend backend) {
  if (kernel.size() == 0) throw Error(ErrorKind::DimensionMismatch, "empty kernel");
  const auto classes = recurrent_classes(kernel);
  if (classes.size() != 1) {
    throw Error(ErrorKind::ReducibleKernel,
                std::to_string(classes.size()) + " recurrent classes detected");
  }
  const auto& recurrent = classes.front();
  const bool whole = recurrent.size() == kernel.size();
  const FiniteKernel reduced = whole ? FiniteKernel() : restrict_to(kernel, recurrent);
  const FiniteKernel& target = whole ? kernel : reduced;

  const bool dense =
      backend == Backend::Dense || (backend == Backend::Auto && target.size() <= kDenseLimit);
  std::vector<double> x = target.size() == 1 ? std::vector<double>{1.0}
                          : dense            ? gth_dense(target)
                                             : gth_sparse(target);
  normalize(x);

  StationaryResult out;
  out.states.assign(kernel.states().begin(), kernel.states().end());
  out.pi.assign(kernel.size(), 0.0);
  for (std::size_t i = 0; i < recurrent.size(); ++i) out.pi[recurrent[i]] = x[i];
  out.residual = stationarity_residual(kernel, out.pi);
  out.method = dense ? "elimination" : "elimination-sparse";
  return out;
}

StationaryResult solve_stationary_elimination(const AugmentedKernel& kernel, Backend backend) {
  StationaryResult out = solve_stationary_elimination(kernel.matrix, backend);
  out.level = kernel.level;
  return out;
}

IterationLimitError::IterationLimitError(std::vector<double> last_iterate, double residual)
    : Error(ErrorKind::IterationLimit, "power iteration stopped at residual " + std::to_string(residual)),
      last_(std::move(last_iterate)),
      residual_(residual) {}

StationaryResult power_iterate(const FiniteKernel& kernel, const PowerOptions& options) {
  const std::size_t n = kernel.size();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "empty kernel");
  std::vector<double> pi = options.initial;
  if (pi.empty()) pi.assign(n, 1.0 / static_cast<double>(n));
  if (pi.size() != n) throw Error(ErrorKind::DimensionMismatch, "initial vector length != kernel size");
  normalize(pi);

  const bool dense = n <= kDenseLimit;
  const std::vector<double> a = dense ? kernel.to_dense() : std::vector<double>{};
  bool damped = options.damping == Damping::Always;
  std::vector<double> next(n);
  std::vector<double> history;  // residuals, for stall detection
  std::size_t stalled = 0;
  double residual = 0.0;

  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    if (dense) {
      for (std::size_t i = 0; i < n; ++i) {
        if (pi[i] != 0.0) simd::axpy(pi[i], {a.data() + i * n, n}, next);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& e : kernel.row(i)) next[e.col] += pi[i] * e.value;
      }
    }
    residual = simd::abs_diff(next, pi);
    if (residual <= options.tol) {
      StationaryResult out;
      out.states.assign(kernel.states().begin(), kernel.states().end());
      out.pi = std::move(pi);
      out.residual = residual;
      out.method = damped ? "power-damped" : "power";
      out.iterations = iter;
      return out;
    }
    if (options.damping == Damping::Auto && !damped) {
      history.push_back(residual);
      const std::size_t h = history.size();
      if (h >= 3 && history[h - 1] > 0.999 * history[h - 3]) {
        if (++stalled >= 10) damped = true;
      } else {
        stalled = 0;
      }
    }
    if (damped) {
      for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * (next[i] + pi[i]);
    }
    normalize(next);
    std::swap(pi, next);
  }
  throw IterationLimitError(std::move(pi), residual);
}

double weighted_tv(const SparseDist& mu1, const SparseDist& mu2, const WeightFn& r) {
  const auto a = mu1.entries();
  const auto b = mu2.entries();
  double total = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].state < b[j].state)) {
      total += r(a[i].state) * a[i].mass;
      ++i;
    } else if (i == a.size() || b[j].state < a[i].state) {
      total += r(b[j].state) * b[j].mass;
      ++j;
    } else {
      total += r(a[i].state) * std::fabs(a[i].mass - b[j].mass);
      ++i;
      ++j;
    }
  }
  return total;
}

double weighted_tv(std::span<const double> weights, std::span<const double> mu1,
                   std::span<const double> mu2) {
  if (weights.size() != mu1.size() || mu1.size() != mu2.size()) {
    throw Error(ErrorKind::DimensionMismatch, "weighted_tv operands differ in length");
  }
  return simd::weighted_abs_diff(weights, mu1, mu2);
}

}  // namespace truncaug
