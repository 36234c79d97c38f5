#include "truncaug/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "truncaug/parallel.hpp"

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

const KernelSpec& discrete_kernel(const ModelSpec& m) {
  if (!m.kernel || m.kernel->mode() != KernelMode::Countable) {
    throw Error(ErrorKind::Config, m.name + " has no countable kernel");
  }
  return *m.kernel;
}

KernelSpec countable_view(const ModelSpec& m) { return m.is_ctmc() ? embedded_chain(*m.rates) : discrete_kernel(m); }

const TruncationScheme& scheme_of(const ExperimentConfig& cfg) {
  if (!cfg.scheme) throw Error(ErrorKind::Config, "config has no truncation section");
  return *cfg.scheme;
}

StationaryResult solve_on(const ExperimentConfig& cfg, const TruncationScheme& scheme, std::size_t level) {
  if (cfg.model.is_ctmc()) return solve_stationary_ctmc(truncate_rate_kernel(*cfg.model.rates, scheme, level));
  const AugmentedKernel pn = augment(discrete_kernel(cfg.model), scheme, level);
  if (cfg.solver == "power") {
    StationaryResult res = power_iterate(pn.matrix);
    res.level = level;
    return res;
  }
  return solve_stationary_elimination(pn, cfg.backend);
}

StateId max_state(const TruncationScheme& scheme) {
  const auto last = scheme.level(scheme.level_count());
  return last.back();
}

std::string set_id(const std::vector<StateId>& set) { return Functional::indicator(set).id; }

double mass_on(const StationaryResult& res, const std::vector<StateId>& set) {
  double total = 0.0;
  for (std::size_t i = 0; i < res.states.size(); ++i) {
    if (std::find(set.begin(), set.end(), res.states[i]) != set.end()) total += res.pi[i];
  }
  return total;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
  return out;
}

double parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::Config, "not a number: '" + s + "'");
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override) {
  return guarded("config", [&]() -> ExperimentConfig {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
    ExperimentConfig cfg;
    cfg.raw = doc;
    cfg.base_dir = base_dir;
    if (doc.contains("model") && doc.at("model").is_object()) {
      cfg.model = model_from_json(doc.at("model"), base_dir);
    } else {
      cfg.model = model_from_json(doc, base_dir);
    }
    if (doc.contains("truncation")) cfg.scheme = scheme_from_json(doc, cfg.model);
    if (doc.contains("weight")) cfg.r = weight_from_json(doc.at("weight"));
    if (doc.contains("solver")) {
      const json& s = doc.at("solver");
      cfg.solver = s.value("method", "elimination");
      if (cfg.solver != "elimination" && cfg.solver != "power") {
        throw Error(ErrorKind::Config, "solver.method must be elimination or power");
      }
      const std::string backend = s.value("backend", "auto");
      if (backend == "auto") cfg.backend = Backend::Auto;
      else if (backend == "dense") cfg.backend = Backend::Dense;
      else if (backend == "sparse") cfg.backend = Backend::Sparse;
      else throw Error(ErrorKind::Config, "solver.backend must be auto, dense or sparse");
    }
    if (doc.contains("reference")) {
      const json& ref = doc.at("reference");
      if (ref.contains("size")) cfg.reference_size = ref.at("size").get<std::size_t>();
    }
    if (doc.contains("simulation")) {
      const json& s = doc.at("simulation");
      cfg.simulation.cycles = s.value("cycles", std::size_t{0});
      if (s.contains("seed")) cfg.simulation.seed = s.at("seed").get<std::uint64_t>();
      if (s.contains("level")) cfg.simulation.level = s.at("level").get<std::size_t>();
      if (s.contains("sets")) {
        for (const auto& set : s.at("sets")) cfg.simulation.sets.push_back(states_from_json(set));
      }
      cfg.simulation.min_mass = s.value("min_mass", cfg.simulation.min_mass);
      if (seed_override) cfg.simulation.seed = seed_override;
    } else if (seed_override) {
      cfg.simulation.seed = seed_override;
    }
    if (doc.contains("cert") && doc.at("cert").contains("small_set") && doc.at("cert").at("small_set").empty()) {
      throw Error(ErrorKind::Config, "small set C must be nonempty");
    }
    return cfg;
  });
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  return config_from_json(read_json_file(path), path.parent_path(), seed_override);
}

StationaryResult solve_level(const ExperimentConfig& cfg, std::size_t level) {
  return solve_on(cfg, scheme_of(cfg), level);
}

StudyReport run_convergence_study(const ExperimentConfig& cfg) {
  const TruncationScheme& scheme = scheme_of(cfg);
  StudyReport report;
  report.model = cfg.model.name;
  report.weight = cfg.r.label();

  SparseDist reference;
  if (cfg.model.analytic_pi && !cfg.reference_size) {
    report.reference = "analytic";
    reference = analytic_reference(cfg.model, max_state(scheme) + 1);
  } else {
    // Finite chains are solved whole; otherwise a prefix 4x past the study.
    const KernelSpec k = countable_view(cfg.model);
    const std::size_t n_ref = cfg.reference_size.value_or(4 * (max_state(scheme) + 1));
    std::optional<std::vector<StateId>> whole;
    try {
      whole = enumerate_reachable(k, scheme.level(1).front(), [](StateId) { return true; }, n_ref);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteLevelSet) throw;
    }
    if (whole && !cfg.reference_size) {
      report.reference = "finite";
      std::sort(whole->begin(), whole->end());
      reference = solve_on(cfg, TruncationScheme({*whole}, scheme.reentry()), 1).as_dist();
    } else {
      report.reference = "surrogate";
      const auto ref_scheme = TruncationScheme::prefix({n_ref / 2, n_ref}, scheme.reentry());
      const SparseDist half = solve_on(cfg, ref_scheme, 1).as_dist();
      reference = solve_on(cfg, ref_scheme, 2).as_dist();
      report.caveat = "surrogate reference at set size " + std::to_string(n_ref) +
                      "; distance to size " + std::to_string(n_ref / 2) + " is " +
                      format_double(weighted_tv(half, reference, cfg.r));
    }
  }

  const std::size_t levels = scheme.level_count();
  report.rows.resize(levels);
  parallel_for(levels, [&](std::size_t i) {
    StudyRow& row = report.rows[i];
    row.level = i + 1;
    row.set_size = scheme.level(i + 1).size();
    try {
      const StationaryResult res = solve_on(cfg, scheme, i + 1);
      row.distance = weighted_tv(res.as_dist(), reference, cfg.r);
      row.residual = res.residual;
      row.method = res.method;
    } catch (const Error& e) {
      row.error = e.what();
      row.distance = std::numeric_limits<double>::quiet_NaN();
      row.residual = std::numeric_limits<double>::quiet_NaN();
      row.method = "failed";
    }
  });

  std::vector<const StudyRow*> ok;
  for (const auto& row : report.rows) {
    if (!row.error) ok.push_back(&row);
  }
  if (!ok.empty()) {
    std::size_t start = ok.size() - 1;
    while (start > 0 && ok[start]->distance <= ok[start - 1]->distance + kTrendSlack) --start;
    report.monotone = start == 0;
    report.decreasing_from = ok[start]->level;
  }
  return report;
}

std::string study_csv(const StudyReport& report) {
  std::ostringstream out;
  out << "level,set_size,distance_r,solver_residual,method\n";
  for (const auto& row : report.rows) {
    out << row.level << ',' << row.set_size << ',' << format_double(row.distance) << ','
        << format_double(row.residual) << ',' << row.method << '\n';
  }
  return out.str();
}

json to_json(const StudyReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r = {{"level", row.level},
              {"set_size", row.set_size},
              {"distance_r", row.error ? json() : json(row.distance)},
              {"solver_residual", row.error ? json() : json(row.residual)},
              {"method", row.method}};
    if (row.error) r["error"] = *row.error;
    rows.push_back(r);
  }
  return {{"model", report.model},
          {"weight", report.weight},
          {"reference", report.reference},
          {"caveat", report.caveat ? json(*report.caveat) : json()},
          {"monotone", report.monotone},
          {"decreasing_from_level", report.decreasing_from ? json(*report.decreasing_from) : json()},
          {"rows", rows}};
}

std::string study_plot_data(const StudyReport& report) {
  std::ostringstream out;
  out << "# set_size distance_r\n";
  for (const auto& row : report.rows) {
    if (!row.error) out << row.set_size << ' ' << format_double(row.distance) << '\n';
  }
  return out.str();
}

std::string study_plot_script(const StudyReport& report, const std::string& data_file) {
  std::ostringstream out;
  out << "set logscale y\n"
      << "set xlabel '|A_n|'\n"
      << "set ylabel 'weighted TV distance (r = " << report.weight << ")'\n"
      << "set title '" << report.model << "'\n"
      << "plot '" << data_file << "' using 1:2 with linespoints title 'distance'\n";
  return out.str();
}

json run_verification(const ExperimentConfig& cfg) {
  return guarded("verification", [&]() -> json {
    const ModelSpec& model = cfg.model;
    const json none = json::object();
    const json& cert_doc = cfg.raw.contains("cert") ? cfg.raw.at("cert") : none;
    const json& drift_doc = cfg.raw.contains("drift") ? cfg.raw.at("drift") : none;
    const SmallSetCert cert = cert_from_json(cert_doc, model);
    const KernelSpec k = countable_view(model);

    json out;
    out["model"] = model.name;
    out["cert"] = to_json(cert);
    bool all = true;

    const double best = cert.m == 1 ? max_minorization_lambda(k, cert.small_set, cert.phi)
                                    : max_confined_minorization_lambda(k, cert.confinement, cert.small_set,
                                                                       cert.phi, cert.m);
    const bool minor_ok = cert.lambda <= best + kRowTolerance;
    all = all && minor_ok;
    out["minorization"] = {{"lambda", cert.lambda}, {"max_lambda", best}, {"m", cert.m}, {"pass", minor_ok}};

    std::optional<LyapunovFn> g = model.g;
    if (drift_doc.contains("g")) g = lyapunov_from_json(drift_doc.at("g"));
    const WeightFn r = cfg.raw.contains("weight") ? cfg.r : model.r.value_or(cfg.r);
    const std::size_t window = drift_doc.value("window", kSelfCheckWindow);
    if (g) {
      if (model.is_ctmc()) {
        const auto rep = check_ctmc_drift(*model.rates, *g, r, cert.small_set, prefix_window(window));
        all = all && rep.pass;
        out["drift"] = to_json(rep);
      } else {
        DriftCert dc{*g, r, drift_doc.value("b", model.b), cert.small_set, prefix_window(window)};
        const auto rep = check_drift(k, dc);
        all = all && rep.pass;
        out["drift"] = to_json(rep);
        out["drift"]["b"] = dc.b;
      }
      out["drift"]["g"] = g->label();
      out["drift"]["r"] = r.label();
    } else {
      out["drift"] = {{"pass", nullptr}, {"note", "no Lyapunov function supplied"}};
    }

    if (!model.is_ctmc()) {
      const SparseDist nu = cfg.scheme ? cfg.scheme->reentry()
                            : cfg.raw.contains("reentry") ? dist_from_json(cfg.raw.at("reentry"))
                                                          : SparseDist::point(0);
      std::vector<std::vector<StateId>> ladder;
      for (std::size_t w : drift_doc.value("ladder", std::vector<std::size_t>{window / 2, window})) {
        ladder.push_back(prefix_window(w));
      }
      try {
        const auto rep = check_r_regularity(k, nu, cert.small_set, r, ladder, g);
        out["r_regularity"] = to_json(rep);
        all = all && rep.pass;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoStabilization && e.kind() != ErrorKind::SingularSystem) throw;
        out["r_regularity"] = {{"pass", false}, {"error", e.what()}};
        all = false;
      }
    }

    if (cfg.scheme) {
      json levels = json::array();
      for (std::size_t n = 1; n <= cfg.scheme->level_count(); ++n) {
        if (model.is_ctmc()) {
          const auto qn = truncate_rate_kernel(*model.rates, *cfg.scheme, n);
          double beta_defect = 0.0;
          for (std::size_t i = 0; i < qn.rates.size(); ++i) {
            beta_defect = std::max(beta_defect,
                                   std::fabs(qn.rates.row_sum(i) - model.rates->exit_rate(qn.rates.states()[i])));
          }
          const bool pass = beta_defect <= 1e-12 * std::max(1.0, qn.beta.empty() ? 1.0 : *std::max_element(qn.beta.begin(), qn.beta.end()));
          all = all && pass;
          levels.push_back({{"level", n}, {"beta_defect", beta_defect}, {"pass", pass}});
        } else {
          const auto pn = augment(k, *cfg.scheme, n);
          const double dom = max_dominance_violation(k, pn);
          const double rows = max_row_defect(pn.matrix);
          const bool pass = dom <= kRowTolerance && rows <= kRowTolerance;
          all = all && pass;
          levels.push_back({{"level", n}, {"dominance_violation", dom}, {"row_defect", rows}, {"pass", pass}});
        }
      }
      out["augmentation"] = levels;
    }
    out["pass"] = all;
    return out;
  });
}

CrossValidationReport run_cross_validation(const ExperimentConfig& cfg) {
  const TruncationScheme& scheme = scheme_of(cfg);
  if (!cfg.simulation.seed) throw Error(ErrorKind::Config, "cross-validation needs simulation.seed");
  CrossValidationReport report;
  report.level = cfg.simulation.level.value_or(scheme.level_count());
  report.cycles = cfg.simulation.cycles;
  report.seed = *cfg.simulation.seed;

  const json none = json::object();
  const SmallSetCert cert = cert_from_json(cfg.raw.contains("cert") ? cfg.raw.at("cert") : none, cfg.model);
  std::vector<std::vector<StateId>> sets = cfg.simulation.sets;
  if (sets.empty()) {
    const auto states = scheme.level(report.level);
    for (std::size_t i = 0; i < std::min<std::size_t>(3, states.size()); ++i) sets.push_back({states[i]});
  }
  std::vector<Functional> fs;
  for (const auto& s : sets) fs.push_back(Functional::indicator(s));

  const StationaryResult exact = solve_on(cfg, scheme, report.level);
  std::vector<RatioEstimate> estimates;
  if (cfg.model.is_ctmc()) {
    const JumpChain chain(*cfg.model.rates, cert, scheme, report.level);
    const JumpCycleBatch batch = run_jump_cycles(chain, fs, cfg.simulation.cycles, report.seed);
    for (const auto& f : fs) estimates.push_back(time_ratio_estimator(batch, f.id));
    double jumps = 0.0;
    for (const auto& c : batch.cycles) jumps += static_cast<double>(c.jump_count);
    report.mean_tau = batch.cycles.empty() ? 0.0 : jumps / static_cast<double>(batch.cycles.size());
    report.gamma_rate = std::numeric_limits<double>::quiet_NaN();
  } else {
    const SplitChain chain(discrete_kernel(cfg.model), cert, scheme, report.level);
    const CycleBatch batch = run_cycles(chain, fs, cfg.simulation.cycles, report.seed);
    for (const auto& f : fs) estimates.push_back(ratio_estimator(batch, f.id));
    report.mean_tau = batch.mean_tau();
    report.gamma_rate = batch.gamma_rate();
  }
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CrossValidationRow row;
    row.set = set_id(sets[i]);
    row.solver_mass = mass_on(exact, sets[i]);
    row.estimate = estimates[i];
    const double diff = row.estimate.point - row.solver_mass;
    row.z = row.estimate.std_error > 0.0 ? diff / row.estimate.std_error
            : diff == 0.0                ? 0.0
                                         : std::copysign(std::numeric_limits<double>::infinity(), diff);
    row.judged = row.solver_mass >= cfg.simulation.min_mass;
    if (row.judged) report.max_abs_z = std::max(report.max_abs_z, std::fabs(row.z));
    report.rows.push_back(row);
  }
  return report;
}

json to_json(const CrossValidationReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"set", r.set},
                    {"solver", r.solver_mass},
                    {"estimate", to_json(r.estimate)},
                    {"z", std::isfinite(r.z) ? json(r.z) : json(format_double(r.z))},
                    {"judged", r.judged}});
  }
  return {{"level", report.level},
          {"cycles", report.cycles},
          {"seed", report.seed},
          {"rows", rows},
          {"max_abs_z", report.max_abs_z},
          {"diagnostics",
           {{"mean_tau", report.mean_tau},
            {"gamma_rate", std::isfinite(report.gamma_rate) ? json(report.gamma_rate) : json()}}}};
}

std::vector<Functional> parse_functionals(const std::string& spec) {
  std::vector<Functional> out;
  for (const std::string& tok : split(spec, ';')) {
    if (tok == "one") {
      out.push_back(Functional::one());
      continue;
    }
    if (tok.front() == '[') throw Error(ErrorKind::Config, "interval functionals need a real-valued model");
    std::vector<StateId> set;
    for (const std::string& s : split(tok, ',')) {
      const double v = parse_number(s);
      if (v < 0 || v != std::floor(v)) throw Error(ErrorKind::Config, "bad state id '" + s + "'");
      set.push_back(static_cast<StateId>(v));
    }
    out.push_back(Functional::indicator(set));
  }
  if (out.empty()) throw Error(ErrorKind::Config, "no functionals given");
  return out;
}

std::vector<GeneralFunctional> parse_general_functionals(const std::string& spec) {
  std::vector<GeneralFunctional> out;
  for (const std::string& tok : split(spec, ';')) {
    if (tok == "one") {
      out.push_back({"one", [](double) { return 1.0; }});
      continue;
    }
    if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']') {
      throw Error(ErrorKind::Config, "real-valued models take functionals 'one' or '[a,b]', got '" + tok + "'");
    }
    const auto ends = split(tok.substr(1, tok.size() - 2), ',');
    if (ends.size() != 2) throw Error(ErrorKind::Config, "interval needs two endpoints: '" + tok + "'");
    const double a = parse_number(ends[0]);
    const double b = parse_number(ends[1]);
    out.push_back({"I" + tok, [a, b](double x) { return (x >= a && x <= b) ? 1.0 : 0.0; }});
  }
  if (out.empty()) throw Error(ErrorKind::Config, "no functionals given");
  return out;
}

json run_simulation(const SimulateRequest& req) {
  json estimates = json::array();
  json diagnostics;
  auto push = [&](const std::string& id, const RatioEstimate& e) {
    json item = to_json(e);
    item["functional"] = id;
    estimates.push_back(item);
  };
  const bool truncated = req.level.has_value();
  if (truncated && !req.scheme) throw Error(ErrorKind::Config, "--level needs a truncation in the config");

  if (req.model.general_cert) {
    if (truncated) throw Error(ErrorKind::Config, "real-valued models are simulated untruncated");
    const auto fs = parse_general_functionals(req.functionals);
    const CycleBatch batch = run_general_cycles(*req.model.kernel, *req.model.general_cert, fs, req.cycles, req.seed);
    for (const auto& f : fs) push(f.id, ratio_estimator(batch, f.id));
    diagnostics = {{"gamma_rate", batch.gamma_rate()}, {"mean_tau", batch.mean_tau()}};
  } else {
    if (!req.cert && !req.model.cert) throw Error(ErrorKind::Config, req.model.name + " needs a cert");
    const SmallSetCert cert = req.cert.value_or(*req.model.cert);
    const auto fs = parse_functionals(req.functionals);
    if (req.model.is_ctmc()) {
      const JumpChain chain = truncated ? JumpChain(*req.model.rates, cert, *req.scheme, *req.level)
                                        : JumpChain(*req.model.rates, cert);
      const JumpCycleBatch batch = run_jump_cycles(chain, fs, req.cycles, req.seed);
      for (const auto& f : fs) push(f.id, time_ratio_estimator(batch, f.id));
      double jumps = 0.0;
      double time = 0.0;
      for (const auto& c : batch.cycles) {
        jumps += static_cast<double>(c.jump_count);
        time += c.total_time;
      }
      const double n = std::max<double>(1.0, static_cast<double>(batch.cycles.size()));
      diagnostics = {{"gamma_rate", nullptr}, {"mean_tau", jumps / n}, {"mean_cycle_time", time / n}};
    } else {
      const KernelSpec& k = discrete_kernel(req.model);
      const SplitChain chain = truncated ? SplitChain(k, cert, *req.scheme, *req.level) : SplitChain(k, cert);
      const CycleBatch batch = run_cycles(chain, fs, req.cycles, req.seed);
      for (const auto& f : fs) push(f.id, ratio_estimator(batch, f.id));
      diagnostics = {{"gamma_rate", batch.gamma_rate()}, {"mean_tau", batch.mean_tau()}};
    }
  }
  return {{"model", req.model.name},
          {"level", truncated ? json(*req.level) : json()},
          {"cycles", req.cycles},
          {"seed", req.seed},
          {"estimates", estimates},
          {"diagnostics", diagnostics}};
}

StudyReport write_study_outputs(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const json none = json::object();
  const json& outputs = cfg.raw.contains("outputs") ? cfg.raw.at("outputs") : none;
  const std::string csv = outputs.value("csv", "study.csv");
  const std::string js = outputs.value("json", "study.json");
  const std::string plot = outputs.value("plot", "study.dat");
  // Fail before the study runs.
  if (cfg.raw.contains("simulation") && !cfg.simulation.seed) {
    throw Error(ErrorKind::Config, "simulation needs a seed (simulation.seed or --seed)");
  }

  const StudyReport report = run_convergence_study(cfg);
  json doc = to_json(report);
  if (cfg.raw.contains("simulation")) doc["cross_validation"] = to_json(run_cross_validation(cfg));

  write_text_file(out_dir / csv, study_csv(report));
  write_text_file(out_dir / js, dump(doc));
  write_text_file(out_dir / plot, study_plot_data(report));
  write_text_file(out_dir / (std::filesystem::path(plot).stem().string() + ".gp"), study_plot_script(report, plot));
  return report;
}

}  // namespace truncaug
