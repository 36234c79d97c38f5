#include "truncaug/drift_verify.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace truncaug {

namespace {

bool in_sorted(const std::vector<StateId>& set, StateId x) {
  return std::binary_search(set.begin(), set.end(), x);
}

std::vector<StateId> sorted_unique(std::vector<StateId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::vector<StateId> prefix_window(std::size_t size) {
  std::vector<StateId> w(size);
  for (std::size_t i = 0; i < size; ++i) w[i] = i;
  return w;
}

DriftReport check_drift(const KernelSpec& k, const DriftCert& cert) {
  if (cert.small_set.empty()) throw Error(ErrorKind::Config, "drift certificate has empty C");
  const auto small = sorted_unique(cert.small_set);
  const auto window = sorted_unique(cert.window);
  for (StateId c : small) {
    if (!in_sorted(window, c)) throw Error(ErrorKind::Config, "C is not contained in the window");
  }
  DriftReport report;
  report.window_size = window.size();
  report.window_min = window.front();
  report.window_max = window.back();
  report.worst_slack = -std::numeric_limits<double>::infinity();
  for (StateId x : window) {
    const double pg = apply_kernel(k, [&](StateId y) { return cert.g(y); }, x);
    const double slack = pg - cert.g(x) + cert.r(x) - (in_sorted(small, x) ? cert.b : 0.0);
    if (slack > report.worst_slack) {
      report.worst_slack = slack;
      report.worst_state = x;
    }
  }
  report.pass = report.worst_slack <= kDriftTolerance;
  return report;
}

void SmallSetCert::validate() const {
  if (small_set.empty()) throw Error(ErrorKind::InvalidCert, "empty small set");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::InvalidCert, "lambda must lie in (0, 1]");
  if (m < 1) throw Error(ErrorKind::InvalidCert, "m must be >= 1");
  const auto small = sorted_unique(small_set);
  double on_c = 0.0;
  for (const Mass& e : phi.entries()) {
    if (in_sorted(small, e.state)) on_c += e.mass;
  }
  if (std::fabs(phi.total() - 1.0) > kRowTolerance) throw Error(ErrorKind::InvalidCert, "phi must be a probability");
  if (phi_on_small_set && std::fabs(on_c - 1.0) > kRowTolerance) {
    throw Error(ErrorKind::InvalidCert, "phi must be a probability on C");
  }
  if (m > 1) {
    const auto conf = sorted_unique(confinement);
    for (StateId c : small) {
      if (!in_sorted(conf, c)) throw Error(ErrorKind::InvalidCert, "C must lie inside the confinement set");
    }
  }
}

double max_minorization_lambda(const KernelSpec& k, const std::vector<StateId>& small_set,
                               const SparseDist& phi) {
  double lambda = 1.0;
  for (StateId x : small_set) {
    const SparseDist row = kernel_row(k, x);
    for (const Mass& e : phi.entries()) lambda = std::min(lambda, row.mass(e.state) / e.mass);
  }
  return std::clamp(lambda, 0.0, 1.0);
}

FiniteKernel m_step_confined_kernel(const KernelSpec& k, const std::vector<StateId>& confinement,
                                    std::size_t m) {
  if (m < 1) throw Error(ErrorKind::Config, "m must be >= 1");
  const auto states = sorted_unique(confinement);
  const std::size_t n = states.size();
  auto local = [&](StateId y) -> std::optional<std::size_t> {
    auto it = std::lower_bound(states.begin(), states.end(), y);
    if (it == states.end() || *it != y) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
  };
  std::vector<std::vector<std::pair<std::size_t, double>>> one_step(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SparseDist krow = kernel_row(k, states[i]);
    for (const Mass& e : krow.entries()) {
      if (auto j = local(e.state)) one_step[i].emplace_back(*j, e.mass);
    }
  }
  std::vector<std::vector<FiniteKernel::Entry>> rows(n);
  std::vector<double> cur(n), next(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), 0.0);
    cur[i] = 1.0;
    for (std::size_t step = 0; step < m; ++step) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t a = 0; a < n; ++a) {
        if (cur[a] == 0.0) continue;
        for (const auto& [b, p] : one_step[a]) next[b] += cur[a] * p;
      }
      std::swap(cur, next);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (cur[j] != 0.0) rows[i].push_back({static_cast<std::uint32_t>(j), cur[j]});
    }
  }
  return FiniteKernel(states, rows);
}

double max_confined_minorization_lambda(const KernelSpec& k, const std::vector<StateId>& confinement,
                                        const std::vector<StateId>& small_set, const SparseDist& phi,
                                        std::size_t m) {
  const FiniteKernel km = m_step_confined_kernel(k, confinement, m);
  double lambda = 1.0;
  for (StateId x : small_set) {
    const auto i = km.index_of(x);
    if (!i) throw Error(ErrorKind::InvalidCert, "small set state outside the confinement set");
    for (const Mass& e : phi.entries()) {
      const auto j = km.index_of(e.state);
      lambda = std::min(lambda, j ? km.entry(*i, *j) / e.mass : 0.0);
    }
  }
  return std::clamp(lambda, 0.0, 1.0);
}

double FirstPassageCost::at(StateId x) const {
  auto it = std::lower_bound(window.begin(), window.end(), x);
  if (it == window.end() || *it != x) {
    throw Error(ErrorKind::StateOutsideTruncation, "state " + std::to_string(x) + " outside the window");
  }
  return h[static_cast<std::size_t>(it - window.begin())];
}

FirstPassageCost first_passage_cost(const KernelSpec& k, const std::vector<StateId>& small_set,
                                    const WeightFn& r, const std::vector<StateId>& window,
                                    const std::optional<LyapunovFn>& boundary) {
  FirstPassageCost out;
  out.window = sorted_unique(window);
  out.h.assign(out.window.size(), 0.0);
  const auto small = sorted_unique(small_set);

  // Unknowns are the window states outside C.
  std::vector<std::int64_t> unknown(out.window.size(), -1);
  std::vector<std::size_t> free_states;
  for (std::size_t i = 0; i < out.window.size(); ++i) {
    if (!in_sorted(small, out.window[i])) {
      unknown[i] = static_cast<std::int64_t>(free_states.size());
      free_states.push_back(i);
    }
  }
  const auto d = static_cast<Eigen::Index>(free_states.size());
  if (d == 0) return out;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs(d);
  for (Eigen::Index row = 0; row < d; ++row) {
    const StateId x = out.window[free_states[static_cast<std::size_t>(row)]];
    double b = r(x);
    triplets.emplace_back(row, row, 1.0);
    const SparseDist krow = kernel_row(k, x);
    for (const Mass& e : krow.entries()) {
      auto it = std::lower_bound(out.window.begin(), out.window.end(), e.state);
      if (it != out.window.end() && *it == e.state) {
        const auto col = unknown[static_cast<std::size_t>(it - out.window.begin())];
        if (col >= 0) triplets.emplace_back(row, col, -e.mass);
      } else if (boundary) {
        b += e.mass * (*boundary)(e.state);
      } else {
        out.approximate = true;
      }
    }
    rhs[row] = b;
  }
  Eigen::SparseMatrix<double> a(d, d);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularSystem, "first-passage system is singular (C not reachable from the window)");
  }
  Eigen::VectorXd h = lu.solve(rhs);
  const Eigen::VectorXd correction = lu.solve(rhs - a * h);
  h += correction;
  out.equation_residual = (a * h - rhs).lpNorm<Eigen::Infinity>();

  for (Eigen::Index row = 0; row < d; ++row) {
    const double v = h[row];
    const StateId x = out.window[free_states[static_cast<std::size_t>(row)]];
    if (!std::isfinite(v) || v < r(x) * (1.0 - 1e-9)) {
      throw Error(ErrorKind::SingularSystem,
                  "confined kernel has spectral radius >= 1 numerically at state " + std::to_string(x));
    }
    out.h[free_states[static_cast<std::size_t>(row)]] = v;
  }
  return out;
}

RRegularityReport check_r_regularity(const KernelSpec& k, const SparseDist& nu,
                                     const std::vector<StateId>& small_set, const WeightFn& r,
                                     const std::vector<std::vector<StateId>>& window_ladder,
                                     const std::optional<LyapunovFn>& g) {
  if (window_ladder.size() < 2) throw Error(ErrorKind::Config, "window ladder needs at least two windows");
  RRegularityReport report;
  if (g) report.g_integral = measure_integral(nu, [&](StateId x) { return (*g)(x); });
  for (const auto& window : window_ladder) {
    const FirstPassageCost cost = first_passage_cost(k, small_set, r, window, g);
    double value = 0.0;
    for (const Mass& e : nu.entries()) {
      auto it = std::lower_bound(cost.window.begin(), cost.window.end(), e.state);
      if (it != cost.window.end() && *it == e.state) {
        value += e.mass * cost.h[static_cast<std::size_t>(it - cost.window.begin())];
      } else if (g) {
        value += e.mass * (*g)(e.state);
      }
    }
    report.ladder_values.push_back(value);
  }
  const double last = report.ladder_values.back();
  const double prev = report.ladder_values[report.ladder_values.size() - 2];
  report.bound = last;
  const double scale = std::max(std::fabs(last), std::fabs(prev));
  report.pass = scale == 0.0 || std::fabs(last - prev) < kStabilizationTolerance * scale;
  if (!report.pass) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "ladder values did not stabilize:";
    for (double v : report.ladder_values) msg << ' ' << v;
    throw Error(ErrorKind::NoStabilization, msg.str());
  }
  return report;
}

}  // namespace truncaug
