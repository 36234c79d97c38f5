// truncaug verify|solve|simulate|study|ctmc-study --config <file.json> [--seed N] [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "truncaug/experiment.hpp"

namespace fs = std::filesystem;
using namespace truncaug;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

void emit(const json& doc, const std::optional<fs::path>& out, const std::string& file) {
  if (out) {
    write_text_file(*out / file, dump(doc));
  } else {
    std::cout << dump(doc);
  }
}

void print_verification_summary(const json& rep) {
  auto mark = [](const json& v) { return v.is_boolean() ? (v.get<bool>() ? "PASS" : "FAIL") : "n/a"; };
  std::cerr << "minorization: " << mark(rep["minorization"]["pass"]) << " lambda=" << rep["minorization"]["lambda"]
            << " max=" << rep["minorization"]["max_lambda"] << "\n";
  const json& d = rep["drift"];
  std::cerr << "drift: " << mark(d["pass"]);
  if (d.contains("worst_slack")) std::cerr << " worst_slack=" << d["worst_slack"] << " worst_state=" << d["worst_state"];
  std::cerr << "\n";
  if (rep.contains("r_regularity")) {
    std::cerr << "r-regularity: " << mark(rep["r_regularity"]["pass"]);
    if (rep["r_regularity"].contains("bound")) std::cerr << " bound=" << rep["r_regularity"]["bound"];
    std::cerr << "\n";
  }
  std::cerr << "overall: " << mark(rep["pass"]) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary distributions by truncation-augmentation"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides simulation.seed)");
    sub->add_option("--out", out, "output directory");
  };

  auto* verify = app.add_subcommand("verify", "check drift, minorization, r-regularity and augmentation invariants");
  add_common(verify, true);

  auto* solve = app.add_subcommand("solve", "solve the augmented kernels of the configured truncation");
  add_common(solve, true);
  std::optional<std::size_t> solve_level_opt;
  solve->add_option("--level", solve_level_opt, "single level (default: all)");

  auto* simulate = app.add_subcommand("simulate", "regenerative split-chain simulation");
  add_common(simulate, false);
  std::string model_arg;
  std::vector<std::string> params;
  std::string cert_arg;
  std::optional<std::size_t> sim_level;
  std::size_t cycles = 100'000;
  std::string functionals = "one";
  simulate->add_option("--model", model_arg, "model JSON file or model name");
  simulate->add_option("--param", params, "model parameter key=value (with a model name)");
  simulate->add_option("--cert", cert_arg, "small-set certificate JSON file");
  simulate->add_option("--level", sim_level, "simulate the augmented chain at this level");
  simulate->add_option("--cycles", cycles, "number of regeneration cycles");
  simulate->add_option("--functionals", functionals, "e.g. \"one;0;0,1\" or \"[0,1]\"");

  auto* study = app.add_subcommand("study", "convergence study over truncation levels");
  add_common(study, true);
  auto* ctmc_study = app.add_subcommand("ctmc-study", "convergence study for a jump process");
  add_common(ctmc_study, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    const std::optional<fs::path> out_dir = out ? std::optional<fs::path>(*out) : std::nullopt;

    if (verify->parsed()) {
      const ExperimentConfig cfg = load_config(config, seed);
      const json rep = run_verification(cfg);
      print_verification_summary(rep);
      emit(rep, out_dir, "verification.json");
      return 0;
    }

    if (solve->parsed()) {
      const ExperimentConfig cfg = load_config(config, seed);
      if (!cfg.scheme) throw Error(ErrorKind::Config, "solve needs a truncation section");
      json results = json::array();
      if (solve_level_opt) {
        results.push_back(to_json(solve_level(cfg, *solve_level_opt)));
      } else {
        for (std::size_t n = 1; n <= cfg.scheme->level_count(); ++n) results.push_back(to_json(solve_level(cfg, n)));
      }
      emit(solve_level_opt ? results[0] : results, out_dir, "solve.json");
      return 0;
    }

    if (simulate->parsed()) {
      std::optional<ExperimentConfig> cfg;
      if (!config.empty()) cfg = load_config(config, seed);
      SimulateRequest req;
      if (!model_arg.empty()) {
        if (fs::exists(model_arg)) {
          req.model = model_from_json(read_json_file(model_arg), fs::path(model_arg).parent_path());
        } else {
          ModelParams mp;
          for (const auto& kv : params) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::Config, "--param expects key=value");
            try {
              mp[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
              throw Error(ErrorKind::Config, "bad parameter value in '" + kv + "'");
            }
          }
          req.model = make_model(model_arg, mp);
        }
      } else if (cfg) {
        req.model = cfg->model;
      } else {
        throw Error(ErrorKind::Config, "simulate needs --model or --config");
      }
      if (cfg) {
        req.scheme = cfg->scheme;
        if (cfg->simulation.cycles > 0) cycles = cfg->simulation.cycles;
        if (cfg->raw.contains("cert") && !req.model.general_cert) req.cert = cert_from_json(cfg->raw.at("cert"), req.model);
      }
      if (!cert_arg.empty()) req.cert = cert_from_json(read_json_file(cert_arg), req.model);
      req.level = sim_level;
      req.cycles = cycles;
      if (seed) {
        req.seed = *seed;
      } else if (cfg && cfg->simulation.seed) {
        req.seed = *cfg->simulation.seed;
      } else {
        throw Error(ErrorKind::Config, "simulate needs --seed");
      }
      req.functionals = functionals;
      emit(run_simulation(req), out_dir, "simulate.json");
      return 0;
    }

    if (study->parsed() || ctmc_study->parsed()) {
      const ExperimentConfig cfg = load_config(config, seed);
      if (ctmc_study->parsed() && !cfg.model.is_ctmc()) {
        throw Error(ErrorKind::Config, "ctmc-study needs a jump-process model");
      }
      if (study->parsed() && cfg.model.is_ctmc()) {
        throw Error(ErrorKind::Config, "use ctmc-study for jump-process models");
      }
      const fs::path dir = out_dir.value_or(fs::path("."));
      std::cout << study_csv(write_study_outputs(cfg, dir));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "truncaug: " << e.what() << "\n";
    return is_config_error(e.kind()) ? kConfigExit : kNumericExit;
  } catch (const json::exception& e) {
    std::cerr << "truncaug: config: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "truncaug: " << e.what() << "\n";
    return kNumericExit;
  }
  return 0;
}
