#include "truncaug/regenerative.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "truncaug/parallel.hpp"

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

std::vector<std::string> ids_of(std::span<const Functional> fs) {
  std::vector<std::string> ids;
  for (const auto& f : fs) ids.push_back(f.id);
  return ids;
}

constexpr double kAcceptTolerance = 1e-9;

}  // namespace

Functional Functional::one() {
  return {"one", [](StateId) { return 1.0; }};
}

Functional Functional::indicator(std::vector<StateId> set) {
  set = sorted_unique(std::move(set));
  std::ostringstream id;
  id << "I{";
  for (std::size_t i = 0; i < set.size(); ++i) id << (i ? "," : "") << set[i];
  id << "}";
  return {id.str(), [set](StateId x) { return in_sorted(set, x) ? 1.0 : 0.0; }};
}

double CycleBatch::mean_tau() const {
  if (cycles.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : cycles) total += static_cast<double>(c.tau);
  return total / static_cast<double>(cycles.size());
}

double CycleBatch::gamma_rate() const {
  double steps = 0.0;
  double gammas = 0.0;
  for (const auto& c : cycles) {
    steps += static_cast<double>(c.tau);
    gammas += static_cast<double>(c.gamma_count);
  }
  return steps > 0.0 ? gammas / steps : 0.0;
}

std::uint64_t CycleBatch::total_split_attempts() const {
  std::uint64_t total = 0;
  for (const auto& c : cycles) total += c.split_attempts;
  return total;
}

SplitChain::SplitChain(KernelSpec kernel, SmallSetCert cert, SimulationOptions options)
    : kernel_(std::move(kernel)), cert_(std::move(cert)), options_(options) {
  prepare();
}

SplitChain::SplitChain(KernelSpec kernel, SmallSetCert cert, const TruncationScheme& scheme,
                       std::size_t level, SimulationOptions options)
    : kernel_(std::move(kernel)), cert_(std::move(cert)), options_(options), level_(level) {
  const auto states = scheme.level(level);
  level_states_.assign(states.begin(), states.end());
  reentry_ = scheme.reentry();
  if (!scheme.first_set_contains(cert_.small_set)) {
    throw Error(ErrorKind::Config, "small set C must lie inside A_1");
  }
  for (const Mass& e : cert_.phi.entries()) {
    if (!scheme.contains(1, e.state)) throw Error(ErrorKind::Config, "phi must be supported in A_1");
  }
  prepare();
}

void SplitChain::prepare() {
  if (kernel_.mode() != KernelMode::Countable) {
    throw Error(ErrorKind::GeneralMode, "SplitChain needs a countable kernel; use simulate_general_cycle");
  }
  cert_.validate();
  small_set_ = sorted_unique(cert_.small_set);
  const double lambda = cert_.lambda;
  if (cert_.m == 1) {
    for (StateId x : small_set_) {
      const SparseDist row = kernel_row(kernel_, x);
      std::vector<Mass> rest;
      for (const Mass& e : row.entries()) rest.push_back(e);
      for (const Mass& e : cert_.phi.entries()) rest.push_back({e.state, -lambda * e.mass});
      // Merge without the constructor's negativity check so we can report it.
      std::sort(rest.begin(), rest.end(), [](const Mass& a, const Mass& b) { return a.state < b.state; });
      std::vector<Mass> merged;
      for (const Mass& e : rest) {
        if (!merged.empty() && merged.back().state == e.state) {
          merged.back().mass += e.mass;
        } else {
          merged.push_back(e);
        }
      }
      for (Mass& e : merged) {
        if (e.mass < -kRowTolerance) {
          std::ostringstream msg;
          msg << "H(" << x << ", " << e.state << ") = " << e.mass / std::max(1.0 - lambda, 1e-300)
              << " < 0; lambda exceeds the minorization constant";
          throw Error(ErrorKind::NegativeResidual, msg.str());
        }
        e.mass = std::max(e.mass, 0.0);
      }
      SparseDist h(std::move(merged));
      // When lambda = 1, H is arbitrary; keep P(x, .).
      residual_.emplace(x, h.total() > kRowTolerance ? h.normalized() : row);
    }
  } else {
    confinement_ = sorted_unique(cert_.confinement);
    confined_ = m_step_confined_kernel(kernel_, confinement_, cert_.m);
    for (StateId x : small_set_) {
      const std::size_t i = *confined_.index_of(x);
      for (const Mass& e : cert_.phi.entries()) {
        const auto j = confined_.index_of(e.state);
        const double km = j ? confined_.entry(i, *j) : 0.0;
        if (lambda * e.mass > km + kRowTolerance) {
          std::ostringstream msg;
          msg << "lambda phi(" << e.state << ") exceeds K_m(" << x << ", " << e.state << ") = " << km;
          throw Error(ErrorKind::InvalidCert, msg.str());
        }
      }
    }
  }
}

bool SplitChain::in_small_set(StateId x) const { return in_sorted(small_set_, x); }

bool SplitChain::in_level(StateId x) const { return !level_ || in_sorted(level_states_, x); }

StateId SplitChain::draw_reentry(Rng& rng) const { return sample(reentry_, rng); }

SplitStep SplitChain::plain_step(StateId x, Rng& rng) const {
  const StateId y = sample(kernel_row(kernel_, x), rng);
  if (!in_level(y)) return {draw_reentry(rng), Beta::Reentry};
  return {y, Beta::None};
}

SplitStep SplitChain::split(StateId x, Rng& rng) const {
  if (cert_.m != 1) throw Error(ErrorKind::InvalidCert, "split needs an m = 1 certificate");
  auto it = residual_.find(x);
  if (it == residual_.end()) {
    throw Error(ErrorKind::InvalidCert, "split attempted outside C at state " + std::to_string(x));
  }
  if (rng.uniform() < cert_.lambda) return {sample(cert_.phi, rng), Beta::Regeneration};
  const StateId y = sample(it->second, rng);
  if (!in_level(y)) return {draw_reentry(rng), Beta::Reentry};
  return {y, Beta::None};
}

SplitChain::Block SplitChain::m_step_block(StateId x, Rng& rng) const {
  if (cert_.m < 2) throw Error(ErrorKind::InvalidCert, "m_step_block needs m > 1");
  if (!in_small_set(x)) {
    throw Error(ErrorKind::InvalidCert, "block started outside C at state " + std::to_string(x));
  }
  Block block;
  block.path.reserve(cert_.m);
  block.confined = true;
  StateId cur = x;
  for (std::size_t step = 0; step < cert_.m; ++step) {
    const SplitStep s = plain_step(cur, rng);
    block.path.emplace_back(s.next, s.beta);
    if (s.beta != Beta::None || !in_sorted(confinement_, s.next)) block.confined = false;
    cur = s.next;
  }
  if (block.confined) {
    const StateId y = block.path.back().first;
    const double target = cert_.lambda * cert_.phi.mass(y);
    if (target > 0.0) {
      const double km = confined_.entry(*confined_.index_of(x), *confined_.index_of(y));
      const double accept = target / km;
      if (!(accept <= 1.0 + kAcceptTolerance)) {
        throw Error(ErrorKind::InvalidCert, "thinning probability above 1 at state " + std::to_string(y));
      }
      if (rng.uniform() < accept) block.beta_at_m = Beta::Regeneration;
    }
  }
  block.path.back().second = block.beta_at_m == Beta::Regeneration ? Beta::Regeneration
                                                                     : block.path.back().second;
  return block;
}

SplitChainState SplitChain::start(Rng& rng) const {
  SplitChainState s;
  s.x = sample(cert_.phi, rng);
  return s;
}

SplitChainState SplitChain::advance(SplitChainState s, Rng& rng) const {
  ++s.clock;
  if (s.pending_fill.empty() && in_small_set(s.x)) {
    if (cert_.m == 1) {
      const SplitStep step = split(s.x, rng);
      s.x = step.next;
      s.beta = step.beta;
      return s;
    }
    Block block = m_step_block(s.x, rng);
    s.pending_fill.assign(block.path.rbegin(), block.path.rend());
  }
  if (!s.pending_fill.empty()) {
    std::tie(s.x, s.beta) = s.pending_fill.back();
    s.pending_fill.pop_back();
    return s;
  }
  const SplitStep step = plain_step(s.x, rng);
  s.x = step.next;
  s.beta = step.beta;
  return s;
}

CycleRecord SplitChain::cycle(std::span<const Functional> functionals, Rng& rng) const {
  CycleRecord rec;
  rec.truncation_level = level_;
  rec.f_sums.assign(functionals.size(), 0.0);
  SplitChainState s = start(rng);
  while (true) {
    for (std::size_t i = 0; i < functionals.size(); ++i) rec.f_sums[i] += functionals[i].f(s.x);
    if (++rec.tau > options_.cycle_cap) {
      throw Error(ErrorKind::CycleLengthCap,
                  "cycle exceeded " + std::to_string(options_.cycle_cap) + " steps");
    }
    if (s.pending_fill.empty() && in_small_set(s.x)) ++rec.split_attempts;
    s = advance(std::move(s), rng);
    if (s.beta == Beta::Reentry) ++rec.gamma_count;
    if (s.beta == Beta::Regeneration) break;
  }
  return rec;
}

SplitChain::KilledCycle SplitChain::killed_cycle(const SparseDist& start, const TruncationScheme& scheme,
                                                 std::size_t level, std::span<const Functional> functionals,
                                                 Rng& rng) const {
  if (truncated()) throw Error(ErrorKind::Config, "killed cycles run on the untruncated chain");
  KilledCycle rec;
  rec.f_sums.assign(functionals.size(), 0.0);
  SplitChainState s;
  s.x = sample(start, rng);
  while (true) {
    if (!scheme.contains(level, s.x)) {
      rec.killed = true;
      break;
    }
    for (std::size_t i = 0; i < functionals.size(); ++i) rec.f_sums[i] += functionals[i].f(s.x);
    if (++rec.length > options_.cycle_cap) {
      throw Error(ErrorKind::CycleLengthCap,
                  "killed cycle exceeded " + std::to_string(options_.cycle_cap) + " steps");
    }
    s = advance(std::move(s), rng);
    if (s.beta == Beta::Regeneration) break;
  }
  return rec;
}

SplitStep split_step(const KernelSpec& k, const SmallSetCert& cert, StateId x, Rng& rng) {
  return SplitChain(k, cert).split(x, rng);
}

CycleRecord simulate_cycle(const KernelSpec& k, const SmallSetCert& cert,
                           std::span<const Functional> functionals, Rng& rng, SimulationOptions options) {
  return SplitChain(k, cert, options).cycle(functionals, rng);
}

CycleRecord simulate_truncated_cycle(const KernelSpec& k, const SmallSetCert& cert,
                                     const TruncationScheme& scheme, std::size_t level,
                                     std::span<const Functional> functionals, Rng& rng,
                                     SimulationOptions options) {
  return SplitChain(k, cert, scheme, level, options).cycle(functionals, rng);
}

SplitChain::Block m_step_split_step(const KernelSpec& k, const SmallSetCert& cert, StateId x, Rng& rng) {
  return SplitChain(k, cert).m_step_block(x, rng);
}

namespace {

template <typename Record, typename MakeOne>
std::vector<Record> batched(std::size_t count, std::uint64_t seed, std::uint64_t stream_offset,
                            const MakeOne& make_one) {
  const std::size_t batches = (count + kCyclesPerBatch - 1) / kCyclesPerBatch;
  std::vector<std::vector<Record>> parts(batches);
  parallel_for(batches, [&](std::size_t b) {
    Rng rng(seed, stream_offset + b);
    const std::size_t begin = b * kCyclesPerBatch;
    const std::size_t end = std::min(count, begin + kCyclesPerBatch);
    parts[b].reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) parts[b].push_back(make_one(rng));
  });
  std::vector<Record> out;
  out.reserve(count);
  for (auto& p : parts) {
    for (auto& r : p) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

CycleBatch run_cycles(const SplitChain& chain, std::span<const Functional> functionals,
                      std::size_t n_cycles, std::uint64_t seed, std::uint64_t stream_offset) {
  CycleBatch batch;
  batch.ids = ids_of(functionals);
  batch.cycles = batched<CycleRecord>(n_cycles, seed, stream_offset,
                                      [&](Rng& rng) { return chain.cycle(functionals, rng); });
  return batch;
}

RatioEstimate ratio_estimator(const CycleBatch& batch, const std::string& functional_id) {
  const auto it = std::find(batch.ids.begin(), batch.ids.end(), functional_id);
  if (it == batch.ids.end()) {
    throw Error(ErrorKind::UnknownFunctional, "functional '" + functional_id + "' not recorded");
  }
  const std::size_t idx = static_cast<std::size_t>(it - batch.ids.begin());
  const std::size_t n = batch.cycles.size();
  if (n < 2) throw Error(ErrorKind::InsufficientCycles, "ratio estimator needs at least 2 cycles");
  double sum_f = 0.0;
  double sum_tau = 0.0;
  for (const auto& c : batch.cycles) {
    sum_f += c.f_sums[idx];
    sum_tau += static_cast<double>(c.tau);
  }
  const double nd = static_cast<double>(n);
  const double mean_tau = sum_tau / nd;
  RatioEstimate est;
  est.n_cycles = n;
  est.point = sum_f / sum_tau;
  double ss = 0.0;
  for (const auto& c : batch.cycles) {
    const double d = c.f_sums[idx] - est.point * static_cast<double>(c.tau);
    ss += d * d;
  }
  est.std_error = std::sqrt(ss / (nd - 1.0)) / (mean_tau * std::sqrt(nd));
  return est;
}

CouplingReport coupling_check(const KernelSpec& k, const SmallSetCert& cert,
                              const TruncationScheme& scheme, std::size_t level,
                              const std::vector<StateId>& set, std::size_t horizon, std::size_t trials,
                              std::uint64_t seed) {
  const SplitChain plain(k, cert);
  const SplitChain trunc(k, cert, scheme, level);
  const auto target = sorted_unique(set);
  const std::size_t width = horizon + 1;

  const std::size_t batches = (trials + kCyclesPerBatch - 1) / kCyclesPerBatch;
  std::vector<std::vector<std::uint64_t>> hits_u(batches, std::vector<std::uint64_t>(width, 0));
  std::vector<std::vector<std::uint64_t>> hits_t(batches, std::vector<std::uint64_t>(width, 0));
  parallel_for(batches, [&](std::size_t b) {
    Rng rng_u(seed, b);
    Rng rng_t(seed, (std::uint64_t{1} << 32) + b);
    const std::size_t begin = b * kCyclesPerBatch;
    const std::size_t end = std::min(trials, begin + kCyclesPerBatch);
    for (std::size_t t = begin; t < end; ++t) {
      SplitChainState s = plain.start(rng_u);
      bool alive = scheme.contains(level, s.x);
      for (std::size_t step = 0; step < width && alive; ++step) {
        if (step > 0) {
          s = plain.advance(std::move(s), rng_u);
          alive = s.beta != Beta::Regeneration && scheme.contains(level, s.x);
          if (!alive) break;
        }
        if (in_sorted(target, s.x)) ++hits_u[b][step];
      }
      SplitChainState r = trunc.start(rng_t);
      for (std::size_t step = 0; step < width; ++step) {
        if (step > 0) {
          r = trunc.advance(std::move(r), rng_t);
          if (r.beta != Beta::None) break;
        }
        if (in_sorted(target, r.x)) ++hits_t[b][step];
      }
    }
  });

  CouplingReport report;
  report.horizon = horizon;
  report.trials = trials;
  const double nd = static_cast<double>(trials);
  for (std::size_t step = 0; step < width; ++step) {
    std::uint64_t hu = 0;
    std::uint64_t ht = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      hu += hits_u[b][step];
      ht += hits_t[b][step];
    }
    const double pu = static_cast<double>(hu) / nd;
    const double pt = static_cast<double>(ht) / nd;
    const double var = (pu * (1.0 - pu) + pt * (1.0 - pt)) / nd;
    const double z = var > 0.0 ? (pu - pt) / std::sqrt(var) : 0.0;
    report.untruncated.push_back(pu);
    report.truncated.push_back(pt);
    report.z_scores.push_back(z);
    report.max_abs_diff = std::max(report.max_abs_diff, std::fabs(pu - pt));
    report.max_abs_z = std::max(report.max_abs_z, std::fabs(z));
  }
  return report;
}

RatioEstimate pi_n_via_ratio_formula(const KernelSpec& k, const SmallSetCert& cert,
                                     const TruncationScheme& scheme, std::size_t level,
                                     const std::vector<StateId>& set, std::size_t cycles_phi,
                                     std::size_t cycles_nu, std::uint64_t seed) {
  if (cycles_phi < 2 || cycles_nu < 2) {
    throw Error(ErrorKind::InsufficientCycles, "ratio formula needs at least 2 cycles from phi and from nu");
  }
  const SplitChain chain(k, cert);
  const std::vector<Functional> fs{Functional::indicator(set)};
  using Killed = SplitChain::KilledCycle;
  const auto from_phi = batched<Killed>(cycles_phi, seed, 0, [&](Rng& rng) {
    return chain.killed_cycle(cert.phi, scheme, level, fs, rng);
  });
  const auto from_nu = batched<Killed>(cycles_nu, seed, std::uint64_t{1} << 32, [&](Rng& rng) {
    return chain.killed_cycle(scheme.reentry(), scheme, level, fs, rng);
  });

  struct Moments {
    double occupation = 0.0;
    double length = 0.0;
    double killed = 0.0;
  };
  auto means = [](const std::vector<Killed>& v) {
    Moments m;
    for (const auto& c : v) {
      m.occupation += c.f_sums[0];
      m.length += static_cast<double>(c.length);
      m.killed += c.killed ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(v.size());
    m.occupation /= n;
    m.length /= n;
    m.killed /= n;
    return m;
  };
  const Moments p = means(from_phi);
  const Moments q = means(from_nu);
  const double survive = 1.0 - q.killed;  // P_nu(tau < T_n)

  RatioEstimate est;
  est.n_cycles = cycles_phi + cycles_nu;
  double g_a = 0.0, g_t = 0.0, g_k = 0.0, g_A = 0.0, g_T = 0.0, g_s = 0.0;
  if (p.killed == 0.0) {
    est.point = p.occupation / p.length;
    g_a = 1.0 / p.length;
    g_t = -est.point / p.length;
  } else {
    if (!(survive > 0.0)) {
      throw Error(ErrorKind::DegenerateDenominator, "estimated P_nu(tau < T_n) is 0");
    }
    const double num = p.occupation + p.killed * q.occupation / survive;
    const double den = p.length + p.killed * q.length / survive;
    est.point = num / den;
    const double pi = est.point;
    g_a = 1.0 / den;
    g_t = -pi / den;
    g_k = (q.occupation - pi * q.length) / (survive * den);
    g_A = p.killed / (survive * den);
    g_T = -pi * p.killed / (survive * den);
    // d/ds of k A / s and k T / s; s = 1 - killed_nu so d/dkilled_nu = -d/ds.
    g_s = -(-p.killed * q.occupation / (survive * survive) + pi * p.killed * q.length / (survive * survive)) / den;
  }
  auto group_var = [](const std::vector<Killed>& v, double ga, double gt, double gk) {
    double mean = 0.0;
    std::vector<double> lin(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      lin[i] = ga * v[i].f_sums[0] + gt * static_cast<double>(v[i].length) + gk * (v[i].killed ? 1.0 : 0.0);
      mean += lin[i];
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : lin) ss += (x - mean) * (x - mean);
    return ss / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size());
  };
  est.std_error = std::sqrt(group_var(from_phi, g_a, g_t, g_k) + group_var(from_nu, g_A, g_T, g_s));
  return est;
}

CycleRecord simulate_general_cycle(const KernelSpec& k, const GeneralSmallSet& cert,
                                   std::span<const GeneralFunctional> functionals, Rng& rng,
                                   SimulationOptions options) {
  if (k.mode() != KernelMode::General) {
    throw Error(ErrorKind::Config, "simulate_general_cycle needs a sampler kernel");
  }
  if (!(cert.lambda > 0.0 && cert.lambda <= 1.0)) throw Error(ErrorKind::InvalidCert, "lambda must lie in (0, 1]");
  CycleRecord rec;
  rec.f_sums.assign(functionals.size(), 0.0);
  double x = cert.sample_phi(rng);
  while (true) {
    for (std::size_t i = 0; i < functionals.size(); ++i) rec.f_sums[i] += functionals[i].f(x);
    if (++rec.tau > options.cycle_cap) {
      throw Error(ErrorKind::CycleLengthCap, "cycle exceeded " + std::to_string(options.cycle_cap) + " steps");
    }
    const double y = k.sampler()(x, rng);
    if (cert.contains(x)) {
      ++rec.split_attempts;
      const double density = cert.transition_density(x, y);
      const double target = cert.lambda * cert.phi_density(y);
      double accept = 0.0;
      if (target > 0.0 && std::isfinite(density)) {
        accept = density > 0.0 ? target / density : 2.0;
        if (accept > 1.0 + kAcceptTolerance) {
          throw Error(ErrorKind::InvalidCert, "declared lambda phi exceeds the transition density");
        }
      }
      if (rng.uniform() < accept) break;
    }
    x = y;
  }
  return rec;
}

CycleBatch run_general_cycles(const KernelSpec& k, const GeneralSmallSet& cert,
                              std::span<const GeneralFunctional> functionals, std::size_t n_cycles,
                              std::uint64_t seed, SimulationOptions options) {
  CycleBatch batch;
  for (const auto& f : functionals) batch.ids.push_back(f.id);
  batch.cycles = batched<CycleRecord>(n_cycles, seed, 0, [&](Rng& rng) {
    return simulate_general_cycle(k, cert, functionals, rng, options);
  });
  return batch;
}

}  // namespace truncaug
