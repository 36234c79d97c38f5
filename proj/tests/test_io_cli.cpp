#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <doctest.h>

#include "truncaug/experiment.hpp"
#include "truncaug/io.hpp"

using namespace truncaug;
namespace fs = std::filesystem;

namespace {

ErrorKind config_error_kind(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("config accepted: " << doc.dump());
  return ErrorKind::InvalidKernel;
}

json walk_doc() {
  return {{"model", "reflected_walk"},
          {"params", {{"p", 1.0 / 3.0}}},
          {"truncation", {{"type", "prefix"}, {"range", {2, 12}}}}};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("truncaug_io_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TRUNCAUG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("distribution and function documents") {
  const SparseDist d = dist_from_json(json::parse("[[0, 0.25], [3, 0.75]]"));
  CHECK(d.mass(3) == 0.75);
  CHECK(dist_from_json(dist_to_json(d)) == d);
  CHECK(dist_from_json(json::parse(R"({"type": "point", "state": 4})")) == SparseDist::point(4));
  CHECK(dist_from_json(json::parse(R"({"type": "table", "masses": [[1, 1.0]]})")) == SparseDist::point(1));
  CHECK_THROWS_AS(dist_from_json(json::parse(R"({"type": "blob"})")), Error);
  CHECK(weight_from_json(json::parse("2"))(3) == 7.0);
  CHECK(weight_from_json(json::parse(R"("one")"))(9) == 1.0);
  CHECK(lyapunov_from_json(json::parse(R"({"type": "linear", "slope": 3})"))(2) == 6.0);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(dump(json::object()).back() == '\n');
}

TEST_CASE("models from documents") {
  TempDir tmp;
  write_text_file(tmp.path / "k.csv", "row,col,prob\n0,1,1\n1,0,0.5\n1,1,0.5\n");
  const ModelSpec csv = model_from_json(json::parse(R"({"kernel_csv": "k.csv"})"), tmp.path);
  CHECK(kernel_row(*csv.kernel, 1).mass(0) == 0.5);
  CHECK(kernel_row(*csv.kernel, 0) == SparseDist::point(1));
  const ModelSpec rates = model_from_json(json::parse(R"({"rates": [[0, 1, 2.0], [1, 0, 1.0]]})"));
  CHECK(rates.is_ctmc());
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kernel_csv": "missing.csv"})"), tmp.path), Error);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(config_from_json(walk_doc()));
  json bad = walk_doc();
  bad["params"]["p"] = 0.7;
  CHECK(config_error_kind(bad) == ErrorKind::ParamOutOfRange);
  bad = walk_doc();
  bad["truncation"] = {{"type", "prefix"}, {"sizes", {3, 2}}};
  CHECK(config_error_kind(bad) == ErrorKind::Config);
  bad = walk_doc();
  bad["cert"] = {{"small_set", json::array()}};
  CHECK(config_error_kind(bad) == ErrorKind::Config);
  bad = walk_doc();
  bad["simulation"] = {{"cycles", 10}};
  // Parsing does not need a seed; simulating does.
  CHECK_FALSE(config_from_json(bad).simulation.seed.has_value());
  CHECK_THROWS_AS(run_cross_validation(config_from_json(bad)), Error);
  CHECK(config_from_json(bad, {}, 5).simulation.seed == 5u);
  bad = walk_doc();
  bad["solver"] = {{"method", "magic"}};
  CHECK(config_error_kind(bad) == ErrorKind::Config);
  CHECK(config_error_kind(json::parse("[1]")) == ErrorKind::Config);
  CHECK(config_error_kind({{"model", "reflected_walk"}, {"params", {{"p", "x"}}}}) == ErrorKind::Config);
}

TEST_CASE("certificates from documents") {
  const ModelSpec walk = reflected_walk(1.0 / 3.0);
  const SmallSetCert dflt = cert_from_json(json::object(), walk);
  CHECK(dflt.lambda == doctest::Approx(2.0 / 3.0));
  const SmallSetCert wider = cert_from_json(json::parse(R"({"small_set": [0, 1]})"), walk);
  CHECK(wider.lambda == doctest::Approx(kSplitSafety * 2.0 / 3.0));  // inf over C of P(x, 0)
  CHECK_THROWS_AS(cert_from_json(json::parse(R"({"lambda": 1.5})"), walk), Error);
  // An infeasible but well-formed lambda parses; verification flags it.
  json doc = walk_doc();
  doc["cert"] = {{"lambda", 0.9}};
  CHECK(run_verification(config_from_json(doc)).at("minorization").at("pass") == false);
  const json round = to_json(dflt);
  CHECK(round.at("small_set") == json::array({0}));
}

TEST_CASE("convergence study") {
  const ExperimentConfig cfg = config_from_json(walk_doc());
  const StudyReport rep = run_convergence_study(cfg);
  CHECK(rep.reference == "analytic");
  CHECK(rep.monotone);
  REQUIRE(rep.rows.size() == 11);
  CHECK(rep.rows.front().set_size == 2);
  const std::string csv = study_csv(rep);
  CHECK(csv.rfind("level,set_size,distance_r,solver_residual,method\n", 0) == 0);
  CHECK(to_json(rep).at("rows").size() == 11);
  CHECK(study_plot_script(rep, "d.dat").find("d.dat") != std::string::npos);

  json power = walk_doc();
  power["solver"] = {{"method", "power"}};
  const StudyReport prep = run_convergence_study(config_from_json(power));
  for (std::size_t i = 0; i < prep.rows.size(); ++i) {
    CHECK(prep.rows[i].distance == doctest::Approx(rep.rows[i].distance).epsilon(1e-6));
  }
}

TEST_CASE("study references without an analytic pi") {
  // A finite custom kernel: the reference is the whole chain.
  const json finite = {{"kernel", {{0, 1, 1.0}, {1, 0, 0.5}, {1, 2, 0.5}, {2, 0, 1.0}}},
                       {"truncation", {{"type", "prefix"}, {"sizes", {1, 2, 3}}}}};
  const StudyReport f = run_convergence_study(config_from_json(finite));
  CHECK(f.reference == "finite");
  CHECK(f.rows.back().distance <= 1e-14);
  CHECK(f.rows.front().distance == doctest::Approx(2.0 * (1.0 - 0.4)));

  // An explicit reference size swaps in a larger truncation, with a caveat.
  json sur = walk_doc();
  sur["truncation"] = {{"type", "prefix"}, {"sizes", {5, 10, 40}}};
  sur["reference"] = {{"size", 40}};
  const StudyReport s = run_convergence_study(config_from_json(sur));
  CHECK(s.reference == "surrogate");
  REQUIRE(s.caveat.has_value());
  CHECK(s.caveat->find("size 40") != std::string::npos);
  CHECK(s.rows.back().distance == 0.0);
  CHECK(s.rows.front().distance > s.rows[1].distance);
}

TEST_CASE("verification report") {
  json doc = walk_doc();
  const json ok = run_verification(config_from_json(doc));
  CHECK(ok.at("pass") == true);
  CHECK(ok.at("minorization").at("pass") == true);
  doc["drift"] = {{"b", 0.5}};
  const json low = run_verification(config_from_json(doc));
  CHECK(low.at("drift").at("pass") == false);
  CHECK(low.at("drift").at("worst_state") == 0);
  CHECK(low.at("pass") == false);
}

TEST_CASE("cross-validation") {
  json doc = walk_doc();
  doc["simulation"] = {{"cycles", 20000}, {"seed", 3}, {"level", 2}};
  const CrossValidationReport rep = run_cross_validation(config_from_json(doc));
  CHECK(rep.rows.size() == 3);
  CHECK(rep.max_abs_z <= 4.0);
  CHECK(to_json(rep).at("rows").size() == 3);
  doc["simulation"]["cycles"] = 0;
  try {
    run_cross_validation(config_from_json(doc));
    FAIL("expected InsufficientCycles");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientCycles);
  }
}

TEST_CASE("functional specs") {
  const auto fs = parse_functionals("one; 0; 0,1");
  REQUIRE(fs.size() == 3);
  CHECK(fs[0].id == "one");
  CHECK(fs[2].f(1) == 1.0);
  CHECK(fs[2].f(2) == 0.0);
  const auto gs = parse_general_functionals("one;[0,1.5]");
  REQUIRE(gs.size() == 2);
  CHECK(gs[1].f(1.0) == 1.0);
  CHECK(gs[1].f(2.0) == 0.0);
  CHECK_THROWS_AS(parse_functionals("x"), Error);
}

TEST_CASE("simulate request") {
  SimulateRequest req{reflected_walk(1.0 / 3.0)};
  req.cycles = 5000;
  req.seed = 17;
  req.functionals = "0";
  const json a = run_simulation(req);
  const json b = run_simulation(req);
  CHECK(a == b);
  CHECK(a.at("estimates").size() == 1);
}

TEST_CASE("command line exit codes") {
  TempDir tmp;
  write_text_file(tmp.path / "ok.json", dump(walk_doc()));
  json bad = walk_doc();
  bad["params"]["p"] = 0.7;
  write_text_file(tmp.path / "bad.json", dump(bad));
  write_text_file(tmp.path / "broken.json", "{ not json");
  // Two absorbing states: no unique stationary distribution.
  const json reducible = {{"kernel", {{0, 0, 1.0}, {1, 1, 1.0}}},
                          {"truncation", {{"type", "prefix"}, {"sizes", {2}}}}};
  write_text_file(tmp.path / "reducible.json", dump(reducible));
  const std::string dir = tmp.path.string();

  CHECK(run_cli("solve --config " + dir + "/ok.json") == 0);
  CHECK(run_cli("verify --config " + dir + "/ok.json --out " + dir + "/v") == 0);
  CHECK(fs::exists(tmp.path / "v" / "verification.json"));
  CHECK(run_cli("study --config " + dir + "/ok.json --out " + dir + "/s") == 0);
  CHECK(fs::exists(tmp.path / "s" / "study.csv"));
  CHECK(run_cli("simulate --model reflected_walk --param p=0.25 --cycles 1000 --seed 1") == 0);
  CHECK(run_cli("ctmc-study --config " + dir + "/ok.json") == 2);  // not a jump process
  CHECK(run_cli("study --config " + dir + "/bad.json") == 2);
  CHECK(run_cli("study --config " + dir + "/broken.json") == 2);
  CHECK(run_cli("study --config " + dir + "/missing.json") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("solve --config " + dir + "/reducible.json") == 3);

  // Same seed, same bytes.
  json sim = walk_doc();
  sim["simulation"] = {{"cycles", 3000}, {"level", 2}};
  write_text_file(tmp.path / "sim.json", dump(sim));
  CHECK(run_cli("study --config " + dir + "/sim.json --seed 8 --out " + dir + "/r1") == 0);
  CHECK(run_cli("study --config " + dir + "/sim.json --seed 8 --out " + dir + "/r2") == 0);
  CHECK(slurp(tmp.path / "r1" / "study.json") == slurp(tmp.path / "r2" / "study.json"));
  CHECK(run_cli("study --config " + dir + "/sim.json --out " + dir + "/r3") == 2);  // no seed anywhere
  CHECK_FALSE(fs::exists(tmp.path / "r3"));
  CHECK(run_cli("verify --config " + dir + "/sim.json") == 0);
}
