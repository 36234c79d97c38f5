#include "truncaug/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace truncaug {

namespace {

template <class F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, what + ": " + e.what());
  }
}

StateId state_of(const json& v) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorKind::Config, "state ids must be nonnegative integers, got " + v.dump());
  }
  return v.get<StateId>();
}

std::vector<std::tuple<StateId, StateId, double>> triples_of(const json& rows, const char* what) {
  if (!rows.is_array()) throw Error(ErrorKind::Config, std::string(what) + " must be an array of triples");
  std::vector<std::tuple<StateId, StateId, double>> out;
  for (const auto& t : rows) {
    if (!t.is_array() || t.size() != 3 || !t[2].is_number()) {
      throw Error(ErrorKind::Config, std::string(what) + " entries must be [x, y, value]");
    }
    out.emplace_back(state_of(t[0]), state_of(t[1]), t[2].get<double>());
  }
  return out;
}

const KernelSpec& countable_kernel_for(const ModelSpec& model, std::optional<KernelSpec>& holder) {
  if (model.is_ctmc()) {
    holder = embedded_chain(*model.rates);
    return *holder;
  }
  if (!model.kernel || model.kernel->mode() != KernelMode::Countable) {
    throw Error(ErrorKind::Config, model.name + " is simulation-only; no countable kernel");
  }
  return *model.kernel;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
  out << text;
}

ModelSpec model_from_json(const json& doc, const std::filesystem::path& base_dir) {
  return guarded("model", [&]() -> ModelSpec {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "model document must be an object");
    if (doc.contains("model")) {
      ModelParams params;
      if (doc.contains("params")) {
        for (const auto& [k, v] : doc.at("params").items()) {
          if (!v.is_number()) throw Error(ErrorKind::Config, "model parameter '" + k + "' must be a number");
          params[k] = v.get<double>();
        }
      }
      return make_model(doc.at("model").get<std::string>(), params);
    }
    ModelSpec m;
    if (doc.contains("kernel_csv")) {
      std::filesystem::path p = doc.at("kernel_csv").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      m.kernel = load_kernel_csv(p.string());
      m.name = "csv:" + p.filename().string();
    } else if (doc.contains("kernel")) {
      m.kernel = kernel_from_triples(triples_of(doc.at("kernel"), "kernel"), "kernel");
      m.name = "kernel";
    } else if (doc.contains("rates")) {
      m.rates = rate_kernel_from_triples(triples_of(doc.at("rates"), "rates"), "rates");
      m.name = "rates";
    } else {
      throw Error(ErrorKind::Config, "model document needs one of model, kernel_csv, kernel, rates");
    }
    return m;
  });
}

SparseDist dist_from_json(const json& doc) {
  return guarded("distribution", [&]() -> SparseDist {
    const json* table = &doc;
    if (doc.is_object()) {
      const std::string type = doc.value("type", "table");
      if (type == "point") return SparseDist::point(state_of(doc.at("state")));
      if (type != "table") throw Error(ErrorKind::Config, "unknown distribution type '" + type + "'");
      table = &doc.at("masses");
    }
    if (!table->is_array()) throw Error(ErrorKind::Config, "distribution must be [[state, mass], ...]");
    std::vector<Mass> entries;
    for (const auto& e : *table) {
      if (!e.is_array() || e.size() != 2 || !e[1].is_number()) {
        throw Error(ErrorKind::Config, "distribution entries must be [state, mass]");
      }
      entries.push_back({state_of(e[0]), e[1].get<double>()});
    }
    return SparseDist(std::move(entries));
  });
}

json dist_to_json(const SparseDist& dist) {
  json out = json::array();
  for (const Mass& e : dist.entries()) out.push_back({e.state, e.mass});
  return out;
}

WeightFn weight_from_json(const json& doc) {
  return guarded("weight", [&]() -> WeightFn {
    if (doc.is_number()) return WeightFn::linear(doc.get<double>());
    const std::string type = doc.is_string() ? doc.get<std::string>() : doc.value("type", "one");
    if (type == "one") return WeightFn::one();
    if (type == "linear") return WeightFn::linear(doc.at("slope").get<double>());
    throw Error(ErrorKind::Config, "unknown weight type '" + type + "'");
  });
}

LyapunovFn lyapunov_from_json(const json& doc) {
  return guarded("lyapunov function", [&]() -> LyapunovFn {
    if (doc.is_number()) return LyapunovFn::linear(doc.get<double>());
    const std::string type = doc.is_string() ? doc.get<std::string>() : doc.value("type", "zero");
    if (type == "zero") return LyapunovFn::zero();
    if (type == "linear") return LyapunovFn::linear(doc.at("slope").get<double>());
    throw Error(ErrorKind::Config, "unknown lyapunov type '" + type + "'");
  });
}

std::vector<StateId> states_from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorKind::Config, "state set must be an array");
  std::vector<StateId> out;
  for (const auto& v : doc) out.push_back(state_of(v));
  return out;
}

TruncationScheme scheme_from_json(const json& doc, const ModelSpec& model) {
  return guarded("truncation", [&]() -> TruncationScheme {
    if (!doc.contains("truncation")) throw Error(ErrorKind::Config, "config has no truncation section");
    const json& t = doc.at("truncation");
    const SparseDist nu = doc.contains("reentry") ? dist_from_json(doc.at("reentry")) : SparseDist::point(0);
    const std::string type = t.value("type", "prefix");
    if (type == "prefix") {
      std::vector<std::size_t> sizes;
      if (t.contains("sizes")) {
        sizes = t.at("sizes").get<std::vector<std::size_t>>();
      } else if (t.contains("range")) {
        const auto r = t.at("range").get<std::vector<std::size_t>>();
        if (r.size() != 2 || r[0] > r[1]) throw Error(ErrorKind::Config, "range must be [first, last]");
        for (std::size_t s = r[0]; s <= r[1]; ++s) sizes.push_back(s);
      } else {
        throw Error(ErrorKind::Config, "prefix truncation needs sizes or range");
      }
      if (sizes.empty()) throw Error(ErrorKind::Config, "truncation has no levels");
      for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] <= sizes[i - 1]) throw Error(ErrorKind::Config, "levels must be strictly increasing");
      }
      if (sizes.front() == 0) throw Error(ErrorKind::Config, "truncation sets must be nonempty");
      return TruncationScheme::prefix(sizes, nu);
    }
    if (type == "levelset") {
      const auto thresholds = t.at("thresholds").get<std::vector<double>>();
      std::optional<LyapunovFn> g;
      if (doc.contains("drift") && doc.at("drift").contains("g")) g = lyapunov_from_json(doc.at("drift").at("g"));
      if (!g) g = model.g;
      if (!g) throw Error(ErrorKind::Config, "levelset truncation needs drift.g or a model default g");
      std::optional<KernelSpec> holder;
      const KernelSpec& k = countable_kernel_for(model, holder);
      return level_sets_from_g(k, *g, thresholds, state_of(t.value("seed", json(0))), nu,
                               t.value("cap", std::size_t{1'000'000}));
    }
    throw Error(ErrorKind::Config, "unknown truncation type '" + type + "'");
  });
}

SmallSetCert cert_from_json(const json& doc, const ModelSpec& model) {
  return guarded("cert", [&]() -> SmallSetCert {
    SmallSetCert cert = model.cert.value_or(SmallSetCert{});
    bool changed = !model.cert.has_value();
    if (doc.contains("small_set")) {
      cert.small_set = states_from_json(doc.at("small_set"));
      changed = true;
    }
    if (doc.contains("phi")) {
      cert.phi = dist_from_json(doc.at("phi"));
      changed = true;
    }
    if (doc.contains("m")) {
      cert.m = doc.at("m").get<std::size_t>();
      changed = true;
    }
    if (doc.contains("confinement")) {
      cert.confinement = states_from_json(doc.at("confinement"));
      changed = true;
    }
    if (doc.contains("phi_on_small_set")) cert.phi_on_small_set = doc.at("phi_on_small_set").get<bool>();
    if (cert.small_set.empty()) throw Error(ErrorKind::Config, "small set C must be nonempty");
    if (cert.phi.entries().empty()) throw Error(ErrorKind::Config, "cert needs phi");

    const json lam = doc.value("lambda", json());
    if (lam.is_number()) {
      cert.lambda = lam.get<double>();
    } else if ((lam.is_string() && lam.get<std::string>() == "max") || (lam.is_null() && changed)) {
      std::optional<KernelSpec> holder;
      const KernelSpec& k = countable_kernel_for(model, holder);
      const double best = cert.m == 1 ? max_minorization_lambda(k, cert.small_set, cert.phi)
                                      : max_confined_minorization_lambda(k, cert.confinement, cert.small_set,
                                                                         cert.phi, cert.m);
      cert.lambda = kSplitSafety * best;
    } else if (!lam.is_null()) {
      throw Error(ErrorKind::Config, "lambda must be a number or \"max\"");
    }
    cert.validate();
    return cert;
  });
}

json to_json(const StationaryResult& result) {
  json pi = json::array();
  for (std::size_t i = 0; i < result.states.size(); ++i) pi.push_back({result.states[i], result.pi[i]});
  return {{"level", result.level ? json(*result.level) : json()},
          {"pi", pi},
          {"residual", result.residual},
          {"method", result.method}};
}

json to_json(const DriftReport& r) {
  return {{"pass", r.pass},           {"worst_slack", r.worst_slack}, {"worst_state", r.worst_state},
          {"window_size", r.window_size}, {"window_min", r.window_min}, {"window_max", r.window_max}};
}

json to_json(const CtmcDriftReport& r) {
  return {{"pass", r.pass},
          {"worst_slack", r.worst_slack ? json(*r.worst_slack) : json()},
          {"worst_state", r.worst_state ? json(*r.worst_state) : json()},
          {"small_set_bound", r.small_set_bound},
          {"window_size", r.window_size}};
}

json to_json(const RRegularityReport& r) {
  return {{"pass", r.pass},
          {"bound", r.bound},
          {"ladder_values", r.ladder_values},
          {"g_integral", r.g_integral ? json(*r.g_integral) : json()}};
}

json to_json(const RatioEstimate& e) {
  return {{"point", e.point}, {"std_error", e.std_error}, {"n_cycles", e.n_cycles}};
}

json to_json(const CouplingReport& r) {
  return {{"horizon", r.horizon},       {"trials", r.trials},          {"untruncated", r.untruncated},
          {"truncated", r.truncated},   {"z_scores", r.z_scores},      {"max_abs_diff", r.max_abs_diff},
          {"max_abs_z", r.max_abs_z}};
}

json to_json(const SmallSetCert& c) {
  return {{"small_set", c.small_set}, {"lambda", c.lambda},           {"phi", dist_to_json(c.phi)},
          {"m", c.m},                 {"confinement", c.confinement}, {"phi_on_small_set", c.phi_on_small_set}};
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace truncaug
