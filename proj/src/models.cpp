#include "truncaug/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "truncaug/solver.hpp"

namespace truncaug {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void self_check_discrete(const ModelSpec& m) {
  std::vector<double> flow(kSelfCheckWindow + 2, 0.0);
  for (StateId x = 0; x <= kSelfCheckWindow; ++x) {
    const SparseDist krow = kernel_row(*m.kernel, x);
    for (const Mass& e : krow.entries()) {
      if (e.state < flow.size()) flow[e.state] += m.analytic_pi(x) * e.mass;
    }
  }
  for (StateId y = 0; y < kSelfCheckWindow; ++y) {
    if (std::fabs(flow[y] - m.analytic_pi(y)) > kSelfCheckTolerance) {
      throw Error(ErrorKind::InvalidKernel, m.name + ": analytic pi fails pi P = pi at state " + std::to_string(y));
    }
  }
}

void self_check_ctmc(const ModelSpec& m) {
  std::vector<double> flow(kSelfCheckWindow + 2, 0.0);
  for (StateId x = 0; x <= kSelfCheckWindow; ++x) {
    const SparseDist row = m.rates->rates(x);
    if (x < flow.size()) flow[x] -= m.analytic_pi(x) * row.total();
    for (const Mass& e : row.entries()) {
      if (e.state < flow.size()) flow[e.state] += m.analytic_pi(x) * e.mass;
    }
  }
  for (StateId y = 0; y < kSelfCheckWindow; ++y) {
    if (std::fabs(flow[y]) > kSelfCheckTolerance) {
      throw Error(ErrorKind::InvalidKernel, m.name + ": analytic pi fails pi Q = 0 at state " + std::to_string(y));
    }
  }
}

void check_default_cert(const ModelSpec& m) {
  const auto& cert = *m.cert;
  cert.validate();
  const KernelSpec k = m.is_ctmc() ? embedded_chain(*m.rates) : *m.kernel;
  if (!(max_minorization_lambda(k, cert.small_set, cert.phi) > 0.0)) {
    throw Error(ErrorKind::InvalidCert, m.name + ": default cert has no minorization");
  }
  const auto window = prefix_window(kSelfCheckWindow + 1);
  if (m.is_ctmc()) {
    if (!check_ctmc_drift(*m.rates, *m.g, *m.r, cert.small_set, window).pass) {
      throw Error(ErrorKind::InvalidCert, m.name + ": default drift certificate fails");
    }
  } else if (!check_drift(k, DriftCert{*m.g, *m.r, m.b, cert.small_set, window}).pass) {
    throw Error(ErrorKind::InvalidCert, m.name + ": default drift certificate fails");
  }
}

}  // namespace

ModelSpec reflected_walk(double p) {
  if (!(p > 0.0 && p < 0.5)) throw Error(ErrorKind::ParamOutOfRange, "reflected_walk needs 0 < p < 1/2, got " + fmt(p));
  ModelSpec m;
  m.name = "reflected_walk";
  m.params = {{"p", p}};
  m.kernel = KernelSpec::countable(
      [p](StateId x) {
        if (x == 0) return SparseDist({{0, 1.0 - p}, {1, p}});
        return SparseDist({{x - 1, 1.0 - p}, {x + 1, p}});
      },
      "reflected_walk(p=" + fmt(p) + ")");
  const double rho = p / (1.0 - p);
  m.analytic_pi = [rho](StateId x) { return (1.0 - rho) * std::pow(rho, static_cast<double>(x)); };
  m.cert = SmallSetCert{{0}, 1.0 - p, SparseDist::point(0), 1, {}, true};
  m.g = LyapunovFn::linear(1.0 / (1.0 - 2.0 * p));
  m.r = WeightFn::one();
  m.b = (1.0 - p) / (1.0 - 2.0 * p);
  self_check_discrete(m);
  check_default_cert(m);
  return m;
}

ModelSpec birth_death_ctmc(double up, double down) {
  if (!(up > 0.0 && up < down)) {
    throw Error(ErrorKind::ParamOutOfRange, "birth_death_ctmc needs 0 < up < down");
  }
  ModelSpec m;
  m.name = "birth_death_ctmc";
  m.params = {{"up", up}, {"down", down}};
  m.rates = RateKernel(
      [up, down](StateId x) {
        if (x == 0) return SparseDist({{1, up}});
        return SparseDist({{x - 1, down}, {x + 1, up}});
      },
      "birth_death_ctmc(up=" + fmt(up) + ",down=" + fmt(down) + ")");
  const double theta = up / down;
  m.analytic_pi = [theta](StateId x) { return (1.0 - theta) * std::pow(theta, static_cast<double>(x)); };
  m.cert = SmallSetCert{{0}, 1.0, SparseDist::point(1), 1, {}, false};
  m.g = LyapunovFn::linear(1.0 / (down - up));
  m.r = WeightFn::one();
  self_check_ctmc(m);
  check_default_cert(m);
  return m;
}

ModelSpec unbounded_rate_bd(double up) {
  if (!(up > 0.0)) throw Error(ErrorKind::ParamOutOfRange, "unbounded_rate_bd needs up > 0");
  ModelSpec m;
  m.name = "unbounded_rate_bd";
  m.params = {{"up", up}};
  m.rates = RateKernel(
      [up](StateId x) {
        if (x == 0) return SparseDist({{1, up}});
        return SparseDist({{x - 1, 2.0 * up * static_cast<double>(x)}, {x + 1, up}});
      },
      "unbounded_rate_bd(up=" + fmt(up) + ")");
  // Detailed balance pi(x) up = pi(x+1) 2 up (x+1) gives Poisson(1/2).
  m.analytic_pi = [](StateId x) {
    const double xd = static_cast<double>(x);
    return std::exp(-0.5 + xd * std::log(0.5) - std::lgamma(xd + 1.0));
  };
  m.cert = SmallSetCert{{0}, 1.0, SparseDist::point(1), 1, {}, false};
  m.g = LyapunovFn::linear(1.0 / up);
  m.r = WeightFn::one();
  self_check_ctmc(m);
  check_default_cert(m);
  return m;
}

ModelSpec continuous_reflected_ar(double a, double noise_scale, const ContinuousArOptions& options) {
  if (!(std::fabs(a) < 1.0)) throw Error(ErrorKind::ParamOutOfRange, "continuous_reflected_ar needs |a| < 1");
  if (!(noise_scale > 0.0)) throw Error(ErrorKind::ParamOutOfRange, "noise_scale must be > 0");
  const double c = options.c;
  if (!(c > 0.0)) throw Error(ErrorKind::ParamOutOfRange, "small set bound c must be > 0");
  const double sigma = noise_scale;

  ModelSpec m;
  m.name = "continuous_reflected_ar";
  m.params = {{"a", a}, {"noise_scale", noise_scale}, {"c", c}};
  m.kernel = KernelSpec::general(
      [a, sigma](double x, Rng& rng) { return std::max(a * x + sigma * rng.normal(), 0.0); },
      "continuous_reflected_ar(a=" + fmt(a) + ",noise_scale=" + fmt(sigma) + ")");

  auto density = [a, sigma](double x, double y) {
    if (y <= 0.0) return std::numeric_limits<double>::infinity();  // atom at 0
    return normal_pdf((y - a * x) / sigma) / sigma;
  };
  // |y - a x| over [0, c]^2 is largest at a corner.
  const double farthest = c * std::max(1.0, 1.0 - a);
  const double exact_inf = std::min(1.0, c * normal_pdf(farthest / sigma) / sigma);
  const double declared = options.lambda.value_or(exact_inf);
  if (!(declared > 0.0 && declared <= 1.0)) {
    throw Error(ErrorKind::ParamOutOfRange, "declared lambda must lie in (0, 1]");
  }
  Rng rng(options.check_seed, 0);
  double empirical_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < options.check_samples; ++i) {
    const double x = c * rng.uniform();
    const double y = c * rng.uniform_open0();
    empirical_min = std::min(empirical_min, c * density(x, y));
  }
  if (empirical_min < declared) {
    throw Error(ErrorKind::MinorizationRejected,
                "sampled density bound " + fmt(empirical_min) + " below declared lambda " + fmt(declared));
  }
  GeneralSmallSet cert;
  cert.contains = [c](double x) { return x >= 0.0 && x <= c; };
  cert.lambda = kContinuousSafety * declared;
  cert.sample_phi = [c](Rng& r) { return c * r.uniform_open0(); };
  cert.phi_density = [c](double y) { return (y > 0.0 && y <= c) ? 1.0 / c : 0.0; };
  cert.transition_density = density;
  m.params["lambda"] = cert.lambda;
  m.general_cert = std::move(cert);
  return m;
}

ModelSpec make_model(const std::string& name, const ModelParams& params) {
  auto get = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(ErrorKind::Config, "model " + name + " needs parameter '" + key + "'");
  };
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; })) {
        throw Error(ErrorKind::Config, "model " + name + " has no parameter '" + k + "'");
      }
    }
  };
  if (name == "reflected_walk") {
    allow({"p"});
    return reflected_walk(get("p"));
  }
  if (name == "birth_death_ctmc") {
    allow({"up", "down"});
    return birth_death_ctmc(get("up"), get("down"));
  }
  if (name == "unbounded_rate_bd") {
    allow({"up"});
    return unbounded_rate_bd(get("up", 1.0));
  }
  if (name == "continuous_reflected_ar") {
    allow({"a", "noise_scale", "c", "lambda"});
    ContinuousArOptions options;
    options.c = get("c", 1.0);
    if (params.count("lambda")) options.lambda = get("lambda");
    return continuous_reflected_ar(get("a"), get("noise_scale", 1.0), options);
  }
  throw Error(ErrorKind::Config, "unknown model '" + name + "'");
}

AugmentedKernel last_state_augment(const KernelSpec& k, const TruncationScheme& scheme, std::size_t n) {
  const auto states = scheme.level(n);
  AugmentedKernel out;
  out.level = n;
  out.exit_mass.resize(states.size());
  std::vector<std::vector<FiniteKernel::Entry>> rows(states.size());
  const auto last = static_cast<std::uint32_t>(states.size() - 1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    double interior = 0.0;
    const SparseDist krow = kernel_row(k, states[i]);
    for (const Mass& e : krow.entries()) {
      auto it = std::lower_bound(states.begin(), states.end(), e.state);
      if (it != states.end() && *it == e.state) {
        rows[i].push_back({static_cast<std::uint32_t>(it - states.begin()), e.mass});
        interior += e.mass;
      }
    }
    const double exit = std::max(0.0, 1.0 - interior);
    out.exit_mass[i] = exit;
    if (exit > 0.0) rows[i].push_back({last, exit});
  }
  out.matrix = FiniteKernel(std::vector<StateId>(states.begin(), states.end()), rows);
  return out;
}

SparseDist analytic_reference(const ModelSpec& model, std::size_t min_size, std::size_t max_size) {
  if (!model.analytic_pi) throw Error(ErrorKind::Config, model.name + " has no analytic stationary distribution");
  std::vector<Mass> entries;
  for (StateId x = 0; x < max_size; ++x) {
    const double v = model.analytic_pi(x);
    if (v > 0.0) entries.push_back({x, v});
    if (x >= min_size && v < 1e-300) break;
  }
  return SparseDist(std::move(entries));
}

std::vector<BadAugmentationRow> bad_augmentation_demo(double p, const std::vector<std::size_t>& sizes) {
  const ModelSpec walk = reflected_walk(p);
  const WeightFn one = WeightFn::one();
  std::vector<BadAugmentationRow> rows;
  for (std::size_t size : sizes) {
    const TruncationScheme scheme = TruncationScheme::prefix({size}, SparseDist::point(0));
    const SparseDist reference = analytic_reference(walk, size);
    BadAugmentationRow row;
    row.set_size = size;
    row.reentry_distance =
        weighted_tv(solve_stationary_elimination(augment(*walk.kernel, scheme, 1)).as_dist(), reference, one);
    row.self_loop_distance = weighted_tv(
        solve_stationary_elimination(last_state_augment(*walk.kernel, scheme, 1)).as_dist(), reference, one);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace truncaug
