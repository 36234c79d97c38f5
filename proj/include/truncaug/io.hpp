#pragma once

// JSON and CSV plumbing for models, schemes, certificates and results.
// Every parse failure surfaces as Error(Config, ...).

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "truncaug/ctmc.hpp"
#include "truncaug/drift_verify.hpp"
#include "truncaug/models.hpp"
#include "truncaug/regenerative.hpp"
#include "truncaug/solver.hpp"
#include "truncaug/truncation.hpp"

namespace truncaug {

using json = nlohmann::json;

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Accepted model documents:
//   {"model": <name>, "params": {...}}
//   {"kernel_csv": <path>}                  (row,col,prob), relative to base_dir
//   {"kernel": [[x, y, prob], ...]}
//   {"rates": [[x, y, rate], ...]}          jump process
ModelSpec model_from_json(const json& doc, const std::filesystem::path& base_dir = {});

// [[state, mass], ...], {"type": "point", "state": z} or
// {"type": "table", "masses": [[state, mass], ...]}
SparseDist dist_from_json(const json& doc);
json dist_to_json(const SparseDist& dist);

// {"type": "one"} | {"type": "linear", "slope": s}; a bare number s means linear.
WeightFn weight_from_json(const json& doc);
LyapunovFn lyapunov_from_json(const json& doc);

// Reads doc["truncation"] and doc["reentry"] (default nu = delta_0).
// Level sets need a Lyapunov function: doc["drift"]["g"] or the model default.
TruncationScheme scheme_from_json(const json& doc, const ModelSpec& model);

// {"small_set": [...], "lambda": l, "phi": dist, "m": 1, "confinement": [...]}
// Missing fields fall back to the model default. lambda "max" (or absent
// with no default) takes kSplitSafety times the largest feasible value.
SmallSetCert cert_from_json(const json& doc, const ModelSpec& model);

std::vector<StateId> states_from_json(const json& doc);

json to_json(const StationaryResult& result);
json to_json(const DriftReport& report);
json to_json(const CtmcDriftReport& report);
json to_json(const RRegularityReport& report);
json to_json(const RatioEstimate& estimate);
json to_json(const CouplingReport& report);
json to_json(const SmallSetCert& cert);

// Two-space indent, trailing newline.
std::string dump(const json& doc);

// Round-trip decimal form (%.17g).
std::string format_double(double v);

}  // namespace truncaug
