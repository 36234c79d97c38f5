#include "truncaug/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "truncaug/parallel.hpp"

namespace truncaug {

RateKernel::RateKernel(RowFn rates, std::string name) : rates_(std::move(rates)), name_(std::move(name)) {}

SparseDist RateKernel::rates(StateId x) const {
  SparseDist row = rates_(x);
  if (row.mass(x) != 0.0) {
    throw Error(ErrorKind::InvalidKernel, "rate kernel '" + name_ + "' has a diagonal entry at " +
                                              std::to_string(x));
  }
  const double beta = row.total();
  if (!(beta > 0.0)) throw Error(ErrorKind::ZeroExitRate, "beta(" + std::to_string(x) + ") = 0");
  if (!std::isfinite(beta)) throw Error(ErrorKind::InvalidKernel, "beta(" + std::to_string(x) + ") is not finite");
  return row;
}

double RateKernel::exit_rate(StateId x) const { return rates(x).total(); }

RateKernel rate_kernel_from_triples(const std::vector<std::tuple<StateId, StateId, double>>& triples,
                                    std::string name) {
  auto table = std::make_shared<std::map<StateId, std::vector<Mass>>>();
  for (const auto& [from, to, rate] : triples) {
    (*table)[from].push_back({to, rate});
    table->try_emplace(to);
  }
  auto rows = std::make_shared<std::map<StateId, SparseDist>>();
  for (auto& [state, entries] : *table) rows->emplace(state, SparseDist(std::move(entries)));
  const std::string kernel_name = name;
  return RateKernel(
      [rows, kernel_name](StateId x) {
        auto it = rows->find(x);
        if (it == rows->end()) {
          throw Error(ErrorKind::InvalidKernel, "state " + std::to_string(x) + " not in '" + kernel_name + "'");
        }
        return it->second;
      },
      std::move(name));
}

KernelSpec embedded_chain(const RateKernel& q) {
  return KernelSpec::countable(
      [q](StateId x) {
        const SparseDist row = q.rates(x);
        const double beta = row.total();
        std::vector<Mass> out;
        out.reserve(row.size());
        for (const Mass& e : row.entries()) out.push_back({e.state, e.mass / beta});
        return SparseDist(std::move(out));
      },
      "embedded(" + q.name() + ")");
}

FiniteKernel TruncatedRateKernel::embedded() const {
  std::vector<std::vector<FiniteKernel::Entry>> rows(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    for (const auto& e : rates.row(i)) rows[i].push_back({e.col, e.value / beta[i]});
  }
  return FiniteKernel(std::vector<StateId>(rates.states().begin(), rates.states().end()), rows);
}

double TruncatedRateKernel::balance_residual(std::span<const double> pi) const {
  std::vector<double> flow(rates.size(), 0.0);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    flow[i] -= pi[i] * beta[i];
    for (const auto& e : rates.row(i)) flow[e.col] += pi[i] * e.value;
  }
  double total = 0.0;
  for (double f : flow) total += std::fabs(f);
  return total;
}

TruncatedRateKernel truncate_rate_kernel(const RateKernel& q, const TruncationScheme& scheme, std::size_t n) {
  const auto states = scheme.level(n);
  auto local = [&](StateId y) -> std::optional<std::uint32_t> {
    auto it = std::lower_bound(states.begin(), states.end(), y);
    if (it == states.end() || *it != y) return std::nullopt;
    return static_cast<std::uint32_t>(it - states.begin());
  };
  TruncatedRateKernel out;
  out.level = n;
  out.beta.resize(states.size());
  std::vector<std::vector<FiniteKernel::Entry>> rows(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const SparseDist row = q.rates(states[i]);
    double outside = 0.0;
    for (const Mass& e : row.entries()) {
      if (auto j = local(e.state)) {
        rows[i].push_back({*j, e.mass});
      } else {
        outside += e.mass;
      }
    }
    if (outside > 0.0) {
      for (const Mass& e : scheme.reentry().entries()) rows[i].push_back({*local(e.state), outside * e.mass});
    }
    out.beta[i] = row.total();
  }
  out.rates = FiniteKernel(std::vector<StateId>(states.begin(), states.end()), rows);
  return out;
}

StationaryResult solve_stationary_ctmc(const TruncatedRateKernel& qn) {
  StationaryResult eta = solve_stationary_elimination(qn.embedded());
  double total = 0.0;
  for (std::size_t i = 0; i < eta.pi.size(); ++i) {
    eta.pi[i] /= qn.beta[i];
    total += eta.pi[i];
  }
  for (double& v : eta.pi) v /= total;
  eta.level = qn.level;
  eta.residual = qn.balance_residual(eta.pi);
  eta.method = "embedded-" + eta.method;
  return eta;
}

CtmcDriftReport check_ctmc_drift(const RateKernel& q, const LyapunovFn& g, const WeightFn& r,
                                 const std::vector<StateId>& small_set, const std::vector<StateId>& window) {
  if (small_set.empty()) throw Error(ErrorKind::Config, "empty small set");
  std::vector<StateId> small = small_set;
  std::sort(small.begin(), small.end());
  CtmcDriftReport report;
  report.window_size = window.size();
  double bound = 0.0;
  for (StateId x : small) {
    const SparseDist row = q.rates(x);
    const double beta = row.total();
    const double rg = measure_integral(row, [&](StateId y) { return g(y); }) / beta;
    bound = std::max(bound, beta * g(x) + 1.0 / beta + g(x) + beta * rg);
  }
  report.small_set_bound = bound;
  for (StateId x : window) {
    if (std::binary_search(small.begin(), small.end(), x)) continue;
    const double gx = g(x);
    const double drift = measure_integral(q.rates(x), [&](StateId y) { return g(y) - gx; });
    const double slack = drift + r(x);
    if (!report.worst_slack || slack > *report.worst_slack) {
      report.worst_slack = slack;
      report.worst_state = x;
    }
  }
  report.pass = !report.worst_slack || *report.worst_slack <= kDriftTolerance;
  return report;
}

JumpChain::JumpChain(RateKernel q, SmallSetCert cert, SimulationOptions options)
    : q_(std::move(q)), chain_(embedded_chain(q_), std::move(cert), options), options_(options) {}

JumpChain::JumpChain(RateKernel q, SmallSetCert cert, const TruncationScheme& scheme, std::size_t level,
                     SimulationOptions options)
    : q_(std::move(q)), chain_(embedded_chain(q_), std::move(cert), scheme, level, options), options_(options) {}

JumpCycleRecord JumpChain::cycle(std::span<const Functional> functionals, Rng& rng) const {
  if (chain_.cert().m != 1) throw Error(ErrorKind::InvalidCert, "jump cycles need an m = 1 certificate");
  JumpCycleRecord rec;
  rec.time_integrals.assign(functionals.size(), 0.0);
  rec.jump_sums.assign(functionals.size(), 0.0);
  SplitChainState s = chain_.start(rng);
  while (true) {
    // beta_n = beta, so holding times are the same under Q and Q_n.
    const double hold = rng.exponential(q_.exit_rate(s.x));
    rec.total_time += hold;
    for (std::size_t i = 0; i < functionals.size(); ++i) {
      const double v = functionals[i].f(s.x);
      rec.time_integrals[i] += v * hold;
      rec.jump_sums[i] += v;
    }
    if (++rec.jump_count > options_.cycle_cap) {
      throw Error(ErrorKind::CycleLengthCap, "jump cycle exceeded " + std::to_string(options_.cycle_cap) + " jumps");
    }
    s = chain_.advance(std::move(s), rng);
    if (s.beta == Beta::Regeneration) break;
  }
  return rec;
}

JumpCycleRecord simulate_jump_cycle(const RateKernel& q, const SmallSetCert& cert,
                                    std::span<const Functional> functionals, Rng& rng,
                                    SimulationOptions options) {
  return JumpChain(q, cert, options).cycle(functionals, rng);
}

JumpCycleBatch run_jump_cycles(const JumpChain& chain, std::span<const Functional> functionals,
                               std::size_t n_cycles, std::uint64_t seed) {
  JumpCycleBatch batch;
  for (const auto& f : functionals) batch.ids.push_back(f.id);
  const std::size_t batches = (n_cycles + kCyclesPerBatch - 1) / kCyclesPerBatch;
  std::vector<std::vector<JumpCycleRecord>> parts(batches);
  parallel_for(batches, [&](std::size_t b) {
    Rng rng(seed, b);
    const std::size_t begin = b * kCyclesPerBatch;
    const std::size_t end = std::min(n_cycles, begin + kCyclesPerBatch);
    for (std::size_t i = begin; i < end; ++i) parts[b].push_back(chain.cycle(functionals, rng));
  });
  for (auto& p : parts) {
    for (auto& r : p) batch.cycles.push_back(std::move(r));
  }
  return batch;
}

RatioEstimate time_ratio_estimator(const JumpCycleBatch& batch, const std::string& functional_id) {
  const auto it = std::find(batch.ids.begin(), batch.ids.end(), functional_id);
  if (it == batch.ids.end()) {
    throw Error(ErrorKind::UnknownFunctional, "functional '" + functional_id + "' not recorded");
  }
  const std::size_t idx = static_cast<std::size_t>(it - batch.ids.begin());
  const std::size_t n = batch.cycles.size();
  if (n < 2) throw Error(ErrorKind::InsufficientCycles, "time-ratio estimator needs at least 2 cycles");
  double sum_f = 0.0;
  double sum_t = 0.0;
  for (const auto& c : batch.cycles) {
    sum_f += c.time_integrals[idx];
    sum_t += c.total_time;
  }
  const double nd = static_cast<double>(n);
  RatioEstimate est;
  est.n_cycles = n;
  est.point = sum_f / sum_t;
  double ss = 0.0;
  for (const auto& c : batch.cycles) {
    const double d = c.time_integrals[idx] - est.point * c.total_time;
    ss += d * d;
  }
  est.std_error = std::sqrt(ss / (nd - 1.0)) / ((sum_t / nd) * std::sqrt(nd));
  return est;
}

}  // namespace truncaug
