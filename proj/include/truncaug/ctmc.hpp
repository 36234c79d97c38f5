#pragma once

// Markov jump processes on countable spaces: rate kernels, embedded chains,
// truncated rate kernels Q_n and time-ratio regenerative estimation. Nothing
// here assumes bounded jump rates.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truncaug/drift_verify.hpp"
#include "truncaug/kernel_model.hpp"
#include "truncaug/regenerative.hpp"
#include "truncaug/solver.hpp"
#include "truncaug/truncation.hpp"

namespace truncaug {

// Off-diagonal rates Q(x, y), y != x. beta(x) = sum_y Q(x, y).
class RateKernel {
 public:
  RateKernel(RowFn rates, std::string name);

  // Validated row: nonnegative, no diagonal, 0 < beta < inf.
  SparseDist rates(StateId x) const;
  double exit_rate(StateId x) const;
  const std::string& name() const { return name_; }

 private:
  RowFn rates_;
  std::string name_;
};

RateKernel rate_kernel_from_triples(const std::vector<std::tuple<StateId, StateId, double>>& triples,
                                    std::string name);

// R(x, y) = Q(x, y) / beta(x), R(x, x) = 0.
KernelSpec embedded_chain(const RateKernel& q);

struct TruncatedRateKernel {
  std::size_t level = 0;
  // Q_n(x, y) = Q(x, y) + Q(x, A_n^c) nu(y) on A_n. A re-entry into x itself
  // shows up as a diagonal entry (a jump that returns to x).
  FiniteKernel rates;
  std::vector<double> beta;  // beta_n(x) = beta(x)

  FiniteKernel embedded() const;
  // sum_y |sum_x pi(x) G(x, y)| with G = Q_n - diag(beta)
  double balance_residual(std::span<const double> pi) const;
};

TruncatedRateKernel truncate_rate_kernel(const RateKernel& q, const TruncationScheme& scheme, std::size_t n);

// pi_n(x) ∝ eta(x) / beta(x) with eta stationary for the embedded chain of Q_n.
// The residual field holds the generator balance residual.
StationaryResult solve_stationary_ctmc(const TruncatedRateKernel& qn);

struct CtmcDriftReport {
  bool pass = false;
  // max over window \ C of sum_y Q(x,y)(g(y) - g(x)) + r(x); empty if vacuous.
  std::optional<double> worst_slack;
  std::optional<StateId> worst_state;
  // sup over C of beta g + 1/beta + g + beta (Rg)
  double small_set_bound = 0.0;
  std::size_t window_size = 0;
};

CtmcDriftReport check_ctmc_drift(const RateKernel& q, const LyapunovFn& g, const WeightFn& r,
                                 const std::vector<StateId>& small_set, const std::vector<StateId>& window);

struct JumpCycleRecord {
  double total_time = 0.0;
  std::vector<double> time_integrals;  // sum_k f(Y_k) hold_k
  std::vector<double> jump_sums;       // sum_k f(Y_k)
  std::uint64_t jump_count = 0;
};

struct JumpCycleBatch {
  std::vector<std::string> ids;
  std::vector<JumpCycleRecord> cycles;
};

// Jump process whose embedded chain is split with an m = 1 certificate. With
// a truncation attached the dynamics are those of Q_n.
class JumpChain {
 public:
  JumpChain(RateKernel q, SmallSetCert cert, SimulationOptions options = {});
  JumpChain(RateKernel q, SmallSetCert cert, const TruncationScheme& scheme, std::size_t level,
            SimulationOptions options = {});

  JumpCycleRecord cycle(std::span<const Functional> functionals, Rng& rng) const;

 private:
  RateKernel q_;
  SplitChain chain_;
  SimulationOptions options_;
};

JumpCycleRecord simulate_jump_cycle(const RateKernel& q, const SmallSetCert& cert,
                                    std::span<const Functional> functionals, Rng& rng,
                                    SimulationOptions options = {});

JumpCycleBatch run_jump_cycles(const JumpChain& chain, std::span<const Functional> functionals,
                               std::size_t n_cycles, std::uint64_t seed);

// point = sum int f / sum time, delta-method standard error.
RatioEstimate time_ratio_estimator(const JumpCycleBatch& batch, const std::string& functional_id);

}  // namespace truncaug
