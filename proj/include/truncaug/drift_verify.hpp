#pragma once

// Finite-window checks of the drift, minorization and r-regularity
// conditions, plus first-passage costs used as Lyapunov functions.
// A pass certifies the inequality on the stated window only.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "truncaug/kernel_model.hpp"

namespace truncaug {

struct DriftCert {
  LyapunovFn g;
  WeightFn r;
  double b = 0.0;
  std::vector<StateId> small_set;
  std::vector<StateId> window;
};

struct DriftReport {
  bool pass = false;
  double worst_slack = 0.0;
  StateId worst_state = 0;
  std::size_t window_size = 0;
  StateId window_min = 0;
  StateId window_max = 0;
};

// slack(x) = (Pg)(x) - g(x) + r(x) - b I_C(x); pass iff slack <= 1e-10 on the window.
DriftReport check_drift(const KernelSpec& k, const DriftCert& cert);

inline constexpr double kDriftTolerance = 1e-10;
// Applied to the largest feasible lambda before splitting.
inline constexpr double kSplitSafety = 0.999;

struct SmallSetCert {
  std::vector<StateId> small_set;
  double lambda = 0.0;
  SparseDist phi;
  std::size_t m = 1;
  // Confinement set for m > 1 (the A_1 of the m-step condition).
  std::vector<StateId> confinement;
  // Discrete-time certificates put phi on C. Certificates for the embedded
  // chain of a jump process only need R(x, .) >= lambda phi on S.
  bool phi_on_small_set = true;

  // Throws InvalidCert unless phi is a probability (on C when required),
  // 0 < lambda <= 1, m >= 1 and, for m > 1, C ⊆ confinement.
  void validate() const;
};

// min over x in C and y in supp(phi) of P(x, y) / phi(y), clamped to [0, 1].
double max_minorization_lambda(const KernelSpec& k, const std::vector<StateId>& small_set,
                               const SparseDist& phi);

// K_m(x, y) = P_x(X_m = y, X_1..X_m stay in A1) for x, y in A1.
FiniteKernel m_step_confined_kernel(const KernelSpec& k, const std::vector<StateId>& confinement,
                                    std::size_t m);

// Same as max_minorization_lambda with K_m in place of P.
double max_confined_minorization_lambda(const KernelSpec& k, const std::vector<StateId>& confinement,
                                        const std::vector<StateId>& small_set, const SparseDist& phi,
                                        std::size_t m);

struct FirstPassageCost {
  std::vector<StateId> window;
  std::vector<double> h;  // aligned with window
  // True when mass escaped the window with no boundary function supplied
  // (the escaped cost was taken as 0, so h is a lower bound).
  bool approximate = false;
  double equation_residual = 0.0;

  double at(StateId x) const;
};

// Solves h = r + P h on window \ C with h = 0 on C. Successors outside the
// window contribute boundary(y) if given, else 0.
FirstPassageCost first_passage_cost(const KernelSpec& k, const std::vector<StateId>& small_set,
                                    const WeightFn& r, const std::vector<StateId>& window,
                                    const std::optional<LyapunovFn>& boundary = std::nullopt);

struct RRegularityReport {
  bool pass = false;
  double bound = 0.0;  // E_nu sum_{j < T(C)} r(X_j) on the largest window
  std::vector<double> ladder_values;
  std::optional<double> g_integral;  // int g dnu when g is supplied
};

// Evaluates E_nu sum_{j<T(C)} r(X_j) on each window of the ladder. Passes
// when the last two values differ by less than 1e-8 relatively; otherwise
// throws NoStabilization, which suggests (but does not prove) that nu is
// not r-regular.
RRegularityReport check_r_regularity(const KernelSpec& k, const SparseDist& nu,
                                     const std::vector<StateId>& small_set, const WeightFn& r,
                                     const std::vector<std::vector<StateId>>& window_ladder,
                                     const std::optional<LyapunovFn>& g = std::nullopt);

inline constexpr double kStabilizationTolerance = 1e-8;

// {0, 1, ..., size - 1}
std::vector<StateId> prefix_window(std::size_t size);

}  // namespace truncaug
