#pragma once

// Split-chain simulation. A small-set certificate (C, lambda, phi, m) lets
// the chain be enriched with a flag beta: beta = 1 marks a regeneration
// (the next state is phi-distributed and independent of the past), beta = 2
// marks an attempted exit from A_n that was redirected to nu under the
// augmented kernel. Cycles between regenerations are i.i.d., so cycle sums
// give ratio estimators of pi and pi_n.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncaug/drift_verify.hpp"
#include "truncaug/kernel_model.hpp"
#include "truncaug/truncation.hpp"

namespace truncaug {

enum class Beta : std::uint8_t { None = 0, Regeneration = 1, Reentry = 2 };

struct Functional {
  std::string id;
  StateFn f;

  static Functional one();
  // id "I{a,b,...}"
  static Functional indicator(std::vector<StateId> set);
};

struct SplitStep {
  StateId next;
  Beta beta;
};

struct SplitChainState {
  StateId x = 0;
  Beta beta = Beta::None;
  std::uint64_t clock = 0;
  // Remaining states of an m-step block, emitted before any new split attempt.
  std::vector<std::pair<StateId, Beta>> pending_fill;
};

struct CycleRecord {
  std::uint64_t tau = 0;
  std::vector<double> f_sums;  // aligned with CycleBatch::ids
  std::uint64_t gamma_count = 0;
  std::uint64_t split_attempts = 0;
  std::optional<std::size_t> truncation_level;
};

struct CycleBatch {
  std::vector<std::string> ids;
  std::vector<CycleRecord> cycles;

  double mean_tau() const;
  // beta = 2 events per step
  double gamma_rate() const;
  std::uint64_t total_split_attempts() const;
};

struct RatioEstimate {
  double point = 0.0;
  double std_error = 0.0;
  std::size_t n_cycles = 0;
};

struct SimulationOptions {
  std::uint64_t cycle_cap = 10'000'000;
};

// Countable-state split chain under P, or under P_n when a truncation is
// attached. Precomputes the residual kernels H(x, .) on C (m = 1) or the
// confined kernel K_m on A_1 (m > 1).
class SplitChain {
 public:
  SplitChain(KernelSpec kernel, SmallSetCert cert, SimulationOptions options = {});
  SplitChain(KernelSpec kernel, SmallSetCert cert, const TruncationScheme& scheme, std::size_t level,
             SimulationOptions options = {});

  const SmallSetCert& cert() const { return cert_; }
  bool truncated() const { return level_.has_value(); }
  std::optional<std::size_t> level() const { return level_; }
  bool in_small_set(StateId x) const;
  bool in_level(StateId x) const;

  // One transition from x in C (m = 1): with prob lambda beta = 1 and the
  // next state ~ phi, else next ~ H(x, .). Under P_n a draw outside A_n
  // becomes beta = 2 with next ~ nu.
  SplitStep split(StateId x, Rng& rng) const;

  // m steps from x in C. beta_at_m = 1 with probability
  // lambda phi(X_m) / K_m(x, X_m) when the path stays in A_1.
  struct Block {
    std::vector<std::pair<StateId, Beta>> path;
    Beta beta_at_m = Beta::None;
    bool confined = false;
  };
  Block m_step_block(StateId x, Rng& rng) const;

  // Ordinary (non-split) transition under P or P_n.
  SplitStep plain_step(StateId x, Rng& rng) const;

  SplitChainState start(Rng& rng) const;
  // Applies the split only when emitting from C with no pending block.
  SplitChainState advance(SplitChainState s, Rng& rng) const;

  // Runs from X_0 ~ phi up to the first beta = 1 event.
  CycleRecord cycle(std::span<const Functional> functionals, Rng& rng) const;

  // Untruncated chain from X_0 ~ start, stopped at tau ∧ T_n where T_n is
  // the exit time from A_n of the given scheme.
  struct KilledCycle {
    std::uint64_t length = 0;  // tau ∧ T_n
    std::vector<double> f_sums;
    bool killed = false;  // T_n < tau
  };
  KilledCycle killed_cycle(const SparseDist& start, const TruncationScheme& scheme, std::size_t level,
                           std::span<const Functional> functionals, Rng& rng) const;

 private:
  void prepare();
  StateId draw_reentry(Rng& rng) const;

  KernelSpec kernel_;
  SmallSetCert cert_;
  SimulationOptions options_;
  std::vector<StateId> small_set_;
  std::optional<std::size_t> level_;
  std::vector<StateId> level_states_;
  SparseDist reentry_;
  std::map<StateId, SparseDist> residual_;  // H(x, .) for x in C when m = 1
  FiniteKernel confined_;                   // K_m when m > 1
  std::vector<StateId> confinement_;
};

SplitStep split_step(const KernelSpec& k, const SmallSetCert& cert, StateId x, Rng& rng);

CycleRecord simulate_cycle(const KernelSpec& k, const SmallSetCert& cert,
                           std::span<const Functional> functionals, Rng& rng,
                           SimulationOptions options = {});

CycleRecord simulate_truncated_cycle(const KernelSpec& k, const SmallSetCert& cert,
                                     const TruncationScheme& scheme, std::size_t level,
                                     std::span<const Functional> functionals, Rng& rng,
                                     SimulationOptions options = {});

SplitChain::Block m_step_split_step(const KernelSpec& k, const SmallSetCert& cert, StateId x, Rng& rng);

// Cycles are simulated in fixed batches; batch b uses Rng(seed, stream_offset + b)
// so results do not depend on the worker count.
inline constexpr std::size_t kCyclesPerBatch = 1024;

CycleBatch run_cycles(const SplitChain& chain, std::span<const Functional> functionals,
                      std::size_t n_cycles, std::uint64_t seed, std::uint64_t stream_offset = 0);

// point = mean(f) / mean(tau); std_error = sd(f_i - point tau_i) / (mean(tau) sqrt(N)).
RatioEstimate ratio_estimator(const CycleBatch& batch, const std::string& functional_id);

struct CouplingReport {
  std::size_t horizon = 0;
  std::size_t trials = 0;
  std::vector<double> untruncated;  // P_phi(X_k in B, tau ∧ T_n > k)
  std::vector<double> truncated;    // P~_{phi,n}(X_k in B, tau ∧ Gamma > k)
  std::vector<double> z_scores;
  double max_abs_diff = 0.0;
  double max_abs_z = 0.0;
};

CouplingReport coupling_check(const KernelSpec& k, const SmallSetCert& cert,
                              const TruncationScheme& scheme, std::size_t level,
                              const std::vector<StateId>& set, std::size_t horizon, std::size_t trials,
                              std::uint64_t seed);

// pi_n(B) from killed cycles of the untruncated chain started from phi and
// from nu:
//   [E_phi S + P_phi(T_n<tau) E_nu S / P_nu(tau<T_n)]
//   / [E_phi L + P_phi(T_n<tau) E_nu L / P_nu(tau<T_n)]
// with S the B-occupation and L = tau ∧ T_n. Delta-method standard error.
RatioEstimate pi_n_via_ratio_formula(const KernelSpec& k, const SmallSetCert& cert,
                                     const TruncationScheme& scheme, std::size_t level,
                                     const std::vector<StateId>& set, std::size_t cycles_phi,
                                     std::size_t cycles_nu, std::uint64_t seed);

// General (sampler-only) state space on the real line. Splitting uses
// Bernoulli thinning of each transition out of C, which requires the
// transition density: accept with lambda phi(y) / p(x, y).
struct GeneralSmallSet {
  std::function<bool(double)> contains;
  double lambda = 0.0;
  std::function<double(Rng&)> sample_phi;
  std::function<double(double)> phi_density;
  // Density of P(x, .) at y w.r.t. the same reference measure as phi;
  // +inf marks an atom (never accepted).
  std::function<double(double, double)> transition_density;
};

using RealFn = std::function<double(double)>;

struct GeneralFunctional {
  std::string id;
  RealFn f;
};

CycleRecord simulate_general_cycle(const KernelSpec& k, const GeneralSmallSet& cert,
                                   std::span<const GeneralFunctional> functionals, Rng& rng,
                                   SimulationOptions options = {});

CycleBatch run_general_cycles(const KernelSpec& k, const GeneralSmallSet& cert,
                              std::span<const GeneralFunctional> functionals, std::size_t n_cycles,
                              std::uint64_t seed, SimulationOptions options = {});

}  // namespace truncaug
