#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "reinsure/report_io.hpp"

using namespace reinsure;
namespace fs = std::filesystem;

namespace {

const std::string kCli = REINSURE_CLI;
const std::string kScenarios = REINSURE_SCENARIO_DIR;
const std::string kData = REINSURE_TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("reinsure_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("solve writes every requested output", "[cli]") {
  const auto out = scratch("solve");
  REQUIRE(run("solve-spne --scenario " + kData + "/small_duopoly.toml --out " + out.string()) == 0);
  for (const char* f : {"report.txt", "report.json", "strategy.json", "curves_1.csv", "curves_2.csv", "indemnity_1.csv",
                        "indemnity_2.csv"})
    CHECK(fs::exists(out / f));
  const auto doc = json::parse(read_text(out / "report.json"));
  CHECK(doc["flags"]["pareto_optimal"] == true);

  const auto only_json = scratch("json_only");
  REQUIRE(run("solve-spne --scenario " + kData + "/small_duopoly.toml --format json --out " + only_json.string()) == 0);
  CHECK(fs::exists(only_json / "report.json"));
  CHECK_FALSE(fs::exists(only_json / "report.txt"));
  CHECK_FALSE(fs::exists(only_json / "curves_1.csv"));
}

TEST_CASE("exit codes", "[cli]") {
  const auto out = scratch("codes");
  const std::string o = " --out " + out.string();
  CHECK(run("solve-spne --scenario " + kData + "/zero_loading.toml" + o) == 1);
  CHECK(run("solve-spne --scenario " + kData + "/syntax_error.toml" + o) == 1);
  CHECK(run("solve-spne --scenario " + kData + "/missing.toml" + o) == 1);
  CHECK(run("solve-spne --scenario " + kData + "/small_duopoly.toml --grid-cells 50" + o) == 1);
  CHECK(run("solve-spne --scenario " + kData + "/small_duopoly.toml --format xml" + o) == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("solve-spne --scenario " + kData + "/general.toml" + o) == 2);
  CHECK(run("solve-stackelberg --scenario " + kData + "/small_duopoly.toml" + o) == 1);
}

TEST_CASE("verify accepts the solved strategy and rejects tampered premia", "[cli]") {
  const auto out = scratch("verify");
  const std::string scenario = " --scenario " + kData + "/small_duopoly.toml";
  REQUIRE(run("solve-spne" + scenario + " --out " + out.string()) == 0);
  const auto strategy = out / "strategy.json";
  CHECK(run("verify" + scenario + " --samples 200 --strategy " + strategy.string() + " --out " + out.string()) == 0);
  const auto verdict = json::parse(read_text(out / "verdict.json"));
  CHECK(verdict["passed"] == true);
  CHECK(verdict["reinsurers"].size() == 2);

  auto doc = json::parse(read_text(strategy));
  doc["premia"][0][0] = doc["premia"][0][0].get<double>() + 1.0;
  const auto tampered = out / "tampered.json";
  write_text(tampered, dump(doc));
  CHECK(run("verify" + scenario + " --samples 50 --strategy " + tampered.string() + " --out " + out.string()) == 4);
  CHECK(json::parse(read_text(out / "verdict.json"))["ir"]["passed"] == false);

  // a strategy solved on another grid is an input error
  CHECK(run("verify" + scenario + " --grid-cells 300 --strategy " + strategy.string() + " --out " + out.string()) == 1);
}

TEST_CASE("repeated runs produce identical files", "[cli]") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const std::string args = "solve-spne --scenario " + kData + "/small_duopoly.toml --deviations 100 --seed 7 --out ";
  REQUIRE(run(args + a.string()) == 0);
  REQUIRE(run(args + b.string() + " --threads 1") == 0);
  for (const auto& entry : fs::directory_iterator(a)) {
    INFO(entry.path().filename().string());
    CHECK(read_text(entry.path()) == read_text(b / entry.path().filename()));
  }
}

TEST_CASE("compare reports both markets", "[cli]") {
  const auto out = scratch("compare");
  REQUIRE(run("compare --scenario " + kScenarios + "/stackelberg.toml " + kScenarios +
              "/duopoly.toml --grid-cells 500 --out " + out.string()) == 0);
  const auto doc = json::parse(read_text(out / "compare.json"));
  CHECK(doc["insurers"].size() == 3);
  CHECK(doc["insurers"][0]["welfare_gain_delta"].get<double>() > 0.5);
}
