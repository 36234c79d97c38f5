#include "truncaug/kernel_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace truncaug {

SparseDist::SparseDist(std::vector<Mass> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Mass& a, const Mass& b) { return a.state < b.state; });
  std::vector<Mass> merged;
  merged.reserve(entries_.size());
  for (const Mass& e : entries_) {
    if (!std::isfinite(e.mass)) {
      throw Error(ErrorKind::InvalidKernel, "non-finite mass at state " + std::to_string(e.state));
    }
    if (!merged.empty() && merged.back().state == e.state) {
      merged.back().mass += e.mass;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](Mass& e) {
    if (e.mass < -kRowTolerance) {
      throw Error(ErrorKind::InvalidKernel,
                  "negative mass " + std::to_string(e.mass) + " at state " + std::to_string(e.state));
    }
    return e.mass <= 0.0;
  });
  entries_ = std::move(merged);
}

double SparseDist::mass(StateId state) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), state,
                             [](const Mass& e, StateId s) { return e.state < s; });
  return (it != entries_.end() && it->state == state) ? it->mass : 0.0;
}

double SparseDist::total() const {
  double s = 0.0;
  for (const Mass& e : entries_) s += e.mass;
  return s;
}

SparseDist SparseDist::normalized() const {
  const double t = total();
  SparseDist out = *this;
  if (t > 0.0) {
    for (Mass& e : out.entries_) e.mass /= t;
  }
  return out;
}

SparseDist require_probability(const SparseDist& dist, ErrorKind kind, const std::string& what) {
  const double t = dist.total();
  if (std::fabs(t - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " has total mass " << t;
    throw Error(kind, msg.str());
  }
  return dist.normalized();
}

StateId sample(const SparseDist& dist, Rng& rng) {
  const auto entries = dist.entries();
  if (entries.empty()) throw Error(ErrorKind::InvalidKernel, "sampling from an empty measure");
  if (entries.size() == 1) return entries.front().state;
  double u = rng.uniform() * dist.total();
  for (const Mass& e : entries) {
    u -= e.mass;
    if (u < 0.0) return e.state;
  }
  return entries.back().state;
}

WeightFn::WeightFn(StateFn fn, std::string label) : fn_(std::move(fn)), label_(std::move(label)) {}

WeightFn WeightFn::one() {
  return WeightFn([](StateId) { return 1.0; }, "one");
}

WeightFn WeightFn::linear(double slope) {
  if (!(slope >= 0.0)) throw Error(ErrorKind::ParamOutOfRange, "weight slope must be >= 0");
  std::ostringstream label;
  label << "1+" << slope << "x";
  return WeightFn([slope](StateId x) { return 1.0 + slope * static_cast<double>(x); }, label.str());
}

double WeightFn::operator()(StateId x) const {
  const double v = fn_(x);
  if (!(v >= 1.0)) {
    throw Error(ErrorKind::ParamOutOfRange,
                "weight " + label_ + " below 1 at state " + std::to_string(x));
  }
  return v;
}

LyapunovFn::LyapunovFn(StateFn fn, std::string label) : fn_(std::move(fn)), label_(std::move(label)) {}

LyapunovFn LyapunovFn::zero() {
  return LyapunovFn([](StateId) { return 0.0; }, "zero");
}

LyapunovFn LyapunovFn::linear(double slope) {
  if (!(slope >= 0.0)) throw Error(ErrorKind::ParamOutOfRange, "Lyapunov slope must be >= 0");
  std::ostringstream label;
  label << slope << "x";
  return LyapunovFn([slope](StateId x) { return slope * static_cast<double>(x); }, label.str());
}

double LyapunovFn::operator()(StateId x) const {
  const double v = fn_(x);
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::UnboundedG, "g(" + std::to_string(x) + ") is not finite");
  }
  if (v < 0.0) {
    throw Error(ErrorKind::ParamOutOfRange, "g(" + std::to_string(x) + ") is negative");
  }
  return v;
}

KernelSpec KernelSpec::countable(RowFn row, std::string name) {
  KernelSpec k;
  k.mode_ = KernelMode::Countable;
  k.row_ = std::move(row);
  k.name_ = std::move(name);
  return k;
}

KernelSpec KernelSpec::general(GeneralSampler sampler, std::string name) {
  KernelSpec k;
  k.mode_ = KernelMode::General;
  k.sampler_ = std::move(sampler);
  k.name_ = std::move(name);
  return k;
}

SparseDist kernel_row(const KernelSpec& k, StateId x) {
  if (k.mode() != KernelMode::Countable) {
    throw Error(ErrorKind::GeneralMode, "kernel '" + k.name() + "' is sampler-only");
  }
  return require_probability(k.row_fn()(x), ErrorKind::InvalidKernel,
                             "row " + std::to_string(x) + " of kernel '" + k.name() + "'");
}

double apply_kernel(const KernelSpec& k, const StateFn& w, StateId x) {
  return measure_integral(kernel_row(k, x), w);
}

double measure_integral(const SparseDist& mu, const StateFn& w) {
  double s = 0.0;
  for (const Mass& e : mu.entries()) s += e.mass * w(e.state);
  return s;
}

std::vector<StateId> enumerate_reachable(const KernelSpec& k, StateId seed,
                                         const std::function<bool(StateId)>& keep,
                                         std::size_t cap) {
  std::vector<StateId> found;
  if (!keep(seed)) return found;
  std::unordered_set<StateId> seen{seed};
  std::deque<StateId> frontier{seed};
  while (!frontier.empty()) {
    const StateId x = frontier.front();
    frontier.pop_front();
    found.push_back(x);
    if (found.size() > cap) {
      throw Error(ErrorKind::NonFiniteLevelSet,
                  "enumeration exceeded cap of " + std::to_string(cap) + " states");
    }
    const SparseDist krow = kernel_row(k, x);
    for (const Mass& e : krow.entries()) {
      if (seen.insert(e.state).second && keep(e.state)) frontier.push_back(e.state);
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

FiniteKernel::FiniteKernel(std::vector<StateId> states, const std::vector<std::vector<Entry>>& rows)
    : states_(std::move(states)) {
  if (rows.size() != states_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "row count does not match state count");
  }
  if (!std::is_sorted(states_.begin(), states_.end()) ||
      std::adjacent_find(states_.begin(), states_.end()) != states_.end()) {
    throw Error(ErrorKind::DimensionMismatch, "states must be strictly increasing");
  }
  row_ptr_.reserve(rows.size() + 1);
  for (const auto& r : rows) {
    std::vector<Entry> sorted = r;
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i].col >= states_.size()) {
        throw Error(ErrorKind::DimensionMismatch, "column index out of range");
      }
      if (!cols_vals_.empty() && cols_vals_.size() > row_ptr_.back() &&
          cols_vals_.back().col == sorted[i].col) {
        cols_vals_.back().value += sorted[i].value;
      } else if (sorted[i].value != 0.0) {
        cols_vals_.push_back(sorted[i]);
      }
    }
    row_ptr_.push_back(cols_vals_.size());
  }
}

std::optional<std::size_t> FiniteKernel::index_of(StateId state) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), state);
  if (it == states_.end() || *it != state) return std::nullopt;
  return static_cast<std::size_t>(it - states_.begin());
}

double FiniteKernel::entry(std::size_t i, std::size_t j) const {
  for (const Entry& e : row(i)) {
    if (e.col == j) return e.value;
  }
  return 0.0;
}

double FiniteKernel::row_sum(std::size_t i) const {
  double s = 0.0;
  for (const Entry& e : row(i)) s += e.value;
  return s;
}

std::vector<double> FiniteKernel::to_dense() const {
  const std::size_t n = size();
  std::vector<double> dense(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Entry& e : row(i)) dense[i * n + e.col] = e.value;
  }
  return dense;
}

FiniteKernel FiniteKernel::from_dense(std::vector<StateId> states, std::span<const double> dense) {
  const std::size_t n = states.size();
  if (dense.size() != n * n) throw Error(ErrorKind::DimensionMismatch, "dense matrix is not n*n");
  std::vector<std::vector<Entry>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (dense[i * n + j] != 0.0) rows[i].push_back({static_cast<std::uint32_t>(j), dense[i * n + j]});
    }
  }
  return FiniteKernel(std::move(states), rows);
}

KernelSpec kernel_from_triples(const std::vector<std::tuple<StateId, StateId, double>>& triples,
                               std::string name) {
  std::map<StateId, std::vector<Mass>> rows;
  for (const auto& [from, to, p] : triples) {
    rows[from].push_back({to, p});
    rows.try_emplace(to);
  }
  auto table = std::make_shared<std::map<StateId, SparseDist>>();
  for (auto& [state, entries] : rows) {
    SparseDist row(std::move(entries));
    if (row.empty()) {
      throw Error(ErrorKind::InvalidKernel, "state " + std::to_string(state) + " has no outgoing row");
    }
    table->emplace(state, require_probability(row, ErrorKind::InvalidKernel,
                                              "row " + std::to_string(state)));
  }
  const std::string kernel_name = name;
  return KernelSpec::countable(
      [table, kernel_name](StateId x) {
        auto it = table->find(x);
        if (it == table->end()) {
          throw Error(ErrorKind::InvalidKernel,
                      "state " + std::to_string(x) + " not in kernel '" + kernel_name + "'");
        }
        return it->second;
      },
      std::move(name));
}

KernelSpec load_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open kernel CSV " + path);
  std::vector<std::tuple<StateId, StateId, double>> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long long from = 0;
    long long to = 0;
    double p = 0.0;
    if (!(fields >> from >> to >> p)) {
      if (line_no == 1) continue;  // header
      throw Error(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": expected row,col,prob");
    }
    if (from < 0 || to < 0) {
      throw Error(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": negative state index");
    }
    triples.emplace_back(static_cast<StateId>(from), static_cast<StateId>(to), p);
  }
  if (triples.empty()) throw Error(ErrorKind::Config, "kernel CSV " + path + " has no entries");
  return kernel_from_triples(triples, path);
}

}  // namespace truncaug
