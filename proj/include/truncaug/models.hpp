#pragma once

// Canonical test models with known stationary distributions, and two
// demonstrations (a continuous-state chain and a side-by-side comparison of
// re-entry augmentation against a last-state self-loop completion).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "truncaug/ctmc.hpp"
#include "truncaug/drift_verify.hpp"
#include "truncaug/kernel_model.hpp"
#include "truncaug/regenerative.hpp"

namespace truncaug {

using ModelParams = std::map<std::string, double>;

struct ModelSpec {
  std::string name;
  ModelParams params;
  std::optional<KernelSpec> kernel;  // discrete time (countable or sampler)
  std::optional<RateKernel> rates;   // continuous time
  StateFn analytic_pi;               // empty when unknown
  // Discrete chains: cert on P. Jump processes: cert on the embedded chain.
  std::optional<SmallSetCert> cert;
  std::optional<GeneralSmallSet> general_cert;
  std::optional<LyapunovFn> g;
  std::optional<WeightFn> r;
  double b = 0.0;
  // States of a finite model, when the whole space is known.
  std::optional<std::vector<StateId>> finite_states;

  bool is_ctmc() const { return rates.has_value(); }
};

// Window used for the analytic-pi self-check at construction.
inline constexpr std::size_t kSelfCheckWindow = 200;
inline constexpr double kSelfCheckTolerance = 1e-12;

// P(x, x+1) = p, P(x, max(x-1, 0)) = 1 - p; pi(x) = (1 - rho) rho^x with
// rho = p / (1 - p). Default cert C = {0}, phi = delta_0, lambda = 1 - p,
// g(x) = x / (1 - 2p), r = 1, b = (1 - p) / (1 - 2p).
ModelSpec reflected_walk(double p);

// Q(x, x+1) = up, Q(x, x-1) = down for x >= 1; pi(x) = (1 - theta) theta^x.
ModelSpec birth_death_ctmc(double up, double down);

// Q(x, x+1) = up, Q(x, x-1) = 2 up x: beta(x) = up (1 + 2x) is unbounded.
// pi is Poisson(1/2).
ModelSpec unbounded_rate_bd(double up);

struct ContinuousArOptions {
  double c = 1.0;                  // C = [0, c]
  std::optional<double> lambda;    // declared minorization constant
  std::uint64_t check_seed = 12345;
  std::size_t check_samples = 100'000;
};

inline constexpr double kContinuousSafety = 0.9;

// X' = max(a X + noise_scale Z, 0), Z standard normal. Sampler-only. The
// declared lambda (default: the exact infimum of c p(x, y) over C x C) is
// checked against 10^5 sampled density values and then scaled by 0.9.
ModelSpec continuous_reflected_ar(double a, double noise_scale, const ContinuousArOptions& options = {});

// Dispatch by name: reflected_walk{p}, birth_death_ctmc{up, down},
// unbounded_rate_bd{up}, continuous_reflected_ar{a, noise_scale, c, lambda}.
ModelSpec make_model(const std::string& name, const ModelParams& params);

// Exit mass of each row placed on the largest state of A_n.
AugmentedKernel last_state_augment(const KernelSpec& k, const TruncationScheme& scheme, std::size_t n);

struct BadAugmentationRow {
  std::size_t set_size = 0;
  double reentry_distance = 0.0;    // ||pi_n - pi||_1 with nu = delta_0
  double self_loop_distance = 0.0;  // same for the last-state self-loop completion
};

// Prefix truncations of reflected_walk(p), one row per size.
std::vector<BadAugmentationRow> bad_augmentation_demo(double p, const std::vector<std::size_t>& sizes);

// Analytic pi on {0..} until the mass drops below 1e-300 past min_size
// (at most max_size states).
SparseDist analytic_reference(const ModelSpec& model, std::size_t min_size, std::size_t max_size = 1'000'000);

}  // namespace truncaug
