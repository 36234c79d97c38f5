#pragma once

// Config-driven experiments behind the CLI: convergence studies over
// truncation levels, verification reports and solver-vs-simulation
// cross-validation. Outputs depend only on the config and the seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "truncaug/io.hpp"

namespace truncaug {

struct SimulationSettings {
  std::size_t cycles = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> level;            // truncation level to simulate; default: last
  std::vector<std::vector<StateId>> sets;      // B sets for cross-validation
  double min_mass = 1e-3;                      // z-scores are judged only where pi_n(B) >= this
};

struct ExperimentConfig {
  json raw;
  std::filesystem::path base_dir;
  ModelSpec model;
  std::optional<TruncationScheme> scheme;
  WeightFn r = WeightFn::one();
  std::string solver = "elimination";          // elimination | power
  Backend backend = Backend::Auto;
  std::optional<std::size_t> reference_size;   // surrogate reference size override
  SimulationSettings simulation;
};

// Parses and validates. seed_override (the CLI --seed) replaces simulation.seed.
ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir = {},
                                  std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

StationaryResult solve_level(const ExperimentConfig& cfg, std::size_t level);

struct StudyRow {
  std::size_t level = 0;
  std::size_t set_size = 0;
  double distance = 0.0;
  double residual = 0.0;
  std::string method;
  std::optional<std::string> error;  // a failed level keeps its row
};

struct StudyReport {
  std::string model;
  std::string weight;
  std::string reference;   // "analytic" or "surrogate"
  std::optional<std::string> caveat;
  std::vector<StudyRow> rows;
  // Distances never increase by more than kTrendSlack from one level to the next.
  bool monotone = false;
  // First level from which the distances are monotone.
  std::optional<std::size_t> decreasing_from;
};

inline constexpr double kTrendSlack = 1e-14;

StudyReport run_convergence_study(const ExperimentConfig& cfg);

// `level,set_size,distance_r,solver_residual,method`
std::string study_csv(const StudyReport& report);
json to_json(const StudyReport& report);
// Two columns (level, distance) and a gnuplot script that reads them.
std::string study_plot_data(const StudyReport& report);
std::string study_plot_script(const StudyReport& report, const std::string& data_file);

json run_verification(const ExperimentConfig& cfg);

struct CrossValidationRow {
  std::string set;
  double solver_mass = 0.0;
  RatioEstimate estimate;
  double z = 0.0;
  bool judged = false;  // solver_mass >= min_mass
};

struct CrossValidationReport {
  std::size_t level = 0;
  std::size_t cycles = 0;
  std::uint64_t seed = 0;
  std::vector<CrossValidationRow> rows;
  double mean_tau = 0.0;
  double gamma_rate = 0.0;
  double max_abs_z = 0.0;  // over judged rows
};

CrossValidationReport run_cross_validation(const ExperimentConfig& cfg);
json to_json(const CrossValidationReport& report);

// Parses "one;0;0,1;[0,1.5]" into functionals (intervals only for
// sampler-only models, where states are real).
std::vector<Functional> parse_functionals(const std::string& spec);
std::vector<GeneralFunctional> parse_general_functionals(const std::string& spec);

struct SimulateRequest {
  ModelSpec model;
  std::optional<SmallSetCert> cert;       // default: model cert
  std::optional<TruncationScheme> scheme; // with level
  std::optional<std::size_t> level;
  std::size_t cycles = 0;
  std::uint64_t seed = 0;
  std::string functionals = "one";
};

// {estimates: [...], diagnostics: {gamma_rate, mean_tau}}
json run_simulation(const SimulateRequest& request);

// Writes study.csv, study.json, study.dat and study.gp (study.json carries
// the cross-validation table when the config simulates) into out_dir.
StudyReport write_study_outputs(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace truncaug
