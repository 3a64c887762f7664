// Command-line front end: solve, verify and compare scenario files.
//
// Exit codes: 0 success, 1 scenario or input error, 2 unsupported dependence
// regime, 3 numerical failure, 4 verification failed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reinsure/reinsure.hpp"
#include "reinsure/report_io.hpp"
#include "reinsure/scenario.hpp"

namespace fs = std::filesystem;
using namespace reinsure;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitRegime = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerification = 4;

struct RunConfig {
  std::vector<std::string> scenarios;
  std::optional<std::size_t> grid_cells;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::vector<std::string> formats{"table", "csv", "json"};
  std::string strategy;
  std::size_t samples = 2000;
  std::size_t deviations = 0;
  unsigned threads = 0;
};

bool wants(const RunConfig& c, const std::string& f) {
  return std::find(c.formats.begin(), c.formats.end(), f) != c.formats.end();
}

fs::path output_dir(const RunConfig& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

DeviationOptions deviation_options(const RunConfig& c, std::size_t samples) {
  DeviationOptions o;
  o.samples = samples;
  o.seed = c.seed;
  o.threads = c.threads;
  return o;
}

/// Runs the sweep for every reinsurer; true if all pass.
bool sweep(const MarketSpec& market, const SpneStrategy& s, const DeviationOptions& o,
           std::vector<DeviationVerdict>* verdicts = nullptr) {
  bool ok = true;
  for (std::size_t j = 0; j < market.reinsurers(); ++j) {
    auto v = verify_no_deviation(market, s, j, o);
    ok = ok && v.passed;
    if (verdicts) verdicts->push_back(std::move(v));
  }
  return ok;
}

void write_solution(const RunConfig& c, const MarketSpec& market, const SpneStrategy& s, const EquilibriumReport& r,
                    const std::string& command) {
  const fs::path dir = output_dir(c);
  const std::string table = format_table(r);
  if (wants(c, "table")) {
    write_text(dir / "report.txt", table);
    std::cout << table;
  }
  if (wants(c, "json")) {
    write_text(dir / "report.json", dump(report_document(market, r, command)));
    write_text(dir / "strategy.json", dump(strategy_to_json(market, s, induced_allocation(market, s))));
  }
  if (wants(c, "csv")) {
    for (std::size_t i = 0; i < market.insurers(); ++i) {
      const std::string id = std::to_string(i + 1);
      write_text(dir / ("curves_" + id + ".csv"), curves_csv(market, i));
      write_text(dir / ("indemnity_" + id + ".csv"), indemnity_csv(market, s, i));
    }
  }
}

int cmd_solve(const RunConfig& c, bool stackelberg) {
  const MarketSpec market = load_market(c.scenarios.at(0), c.grid_cells);
  SpneStrategy s;
  EquilibriumReport r;
  if (stackelberg) {
    auto sol = solve_stackelberg(market);
    s = std::move(sol.strategy);
    r = std::move(sol.report);
  } else {
    s = construct_spne(market);
    r = build_report(market, s);
  }
  if (c.deviations > 0) r.deviation_check_passed = sweep(market, s, deviation_options(c, c.deviations));
  write_solution(c, market, s, r, stackelberg ? "solve-stackelberg" : "solve-spne");
  return 0;
}

int cmd_verify(const RunConfig& c) {
  const MarketSpec market = load_market(c.scenarios.at(0), c.grid_cells);
  require_supported_regime(market);
  const LoadedStrategy loaded = strategy_from_json(market, json::parse(read_text(c.strategy)));
  const SpneStrategy& s = loaded.strategy;
  const double eps = kDefaultPayoffTolerance;

  json verdict;
  bool passed = true;

  json insurers = json::array();
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    const double held = insurer_risk(market, s.prices, s.responses.rows[i], i);
    const double best = insurer_risk(market, s.prices, best_response(market, s.prices, i), i);
    const bool ok = held <= best + eps;
    passed = passed && ok;
    insurers.push_back({{"name", market.insurer(i).name},
                        {"risk", held},
                        {"best_response_risk", best},
                        {"best_response", ok}});
  }
  verdict["insurers"] = insurers;

  std::vector<DeviationVerdict> sweeps;
  sweep(market, s, deviation_options(c, c.samples), &sweeps);
  json reinsurers = json::array();
  for (std::size_t j = 0; j < market.reinsurers(); ++j) {
    const double residual = equilibrium_identity_check(market, s, j);
    const auto& v = sweeps[j];
    const bool id_ok = residual <= 1e-6;
    passed = passed && id_ok && v.passed;
    reinsurers.push_back({{"name", market.reinsurer(j).name},
                          {"risk", reinsurer_risk(market, s, j)},
                          {"identity_residual", residual},
                          {"identity_ok", id_ok},
                          {"deviation",
                           {{"samples", v.samples},
                            {"seed", c.seed},
                            {"equilibrium_risk", v.equilibrium_risk},
                            {"best_deviation_risk", v.best_deviation_risk},
                            {"worst_improvement", v.worst_improvement},
                            {"worst_sample", v.worst_sample},
                            {"worst_family", v.worst_family},
                            {"passed", v.passed}}}});
  }
  verdict["reinsurers"] = reinsurers;

  const PoCertificate cert = check_po(market, loaded.allocation, eps);
  const bool ir_ok = cert.ir.holds(eps);
  passed = passed && ir_ok && cert.pareto_optimal;
  verdict["ir"] = {{"passed", ir_ok}, {"insurer_margins", cert.ir.insurer}, {"reinsurer_margins", cert.ir.reinsurer}};
  json bad = json::array();
  for (const auto& v : cert.violations)
    bad.push_back({{"insurer", v.insurer}, {"cell", v.cell}, {"mass_outside", v.mass_outside}});
  verdict["po"] = {{"passed", cert.pareto_optimal},
                   {"support_ok", cert.support_ok},
                   {"aggregate_risk", cert.aggregate_risk},
                   {"support_violations", bad}};
  json beth = json::array();
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    beth.push_back({{"lowest_is_second", s.violations(clause_lowest_is_second, i)},
                    {"two_quoters", s.violations(clause_two_quoters, i)},
                    {"cheapest_quotes", s.violations(clause_cheapest_quotes, i)}});
  }
  verdict["beth_clause_failures"] = beth;
  verdict["passed"] = passed;

  const fs::path dir = output_dir(c);
  write_text(dir / "verdict.json", dump(verdict));
  std::cout << (passed ? "PASS" : "FAIL") << "\n";
  for (std::size_t i = 0; i < market.insurers(); ++i)
    if (!insurers[i]["best_response"].get<bool>()) std::cout << "  best response FAIL: " << market.insurer(i).name << "\n";
  for (std::size_t j = 0; j < market.reinsurers(); ++j) {
    if (!reinsurers[j]["identity_ok"].get<bool>()) std::cout << "  payoff identity FAIL: " << market.reinsurer(j).name << "\n";
    if (!sweeps[j].passed)
      std::cout << "  deviation FAIL: " << market.reinsurer(j).name << " improves by " << sweeps[j].worst_improvement
                << " (sample " << sweeps[j].worst_sample << ", " << sweeps[j].worst_family << ")\n";
  }
  if (!ir_ok) std::cout << "  IR FAIL\n";
  if (!cert.support_ok) std::cout << "  PO support FAIL\n";
  return passed ? 0 : kExitVerification;
}

EquilibriumReport solve_any(const MarketSpec& market) {
  if (market.reinsurers() == 1) return solve_stackelberg(market).report;
  return build_report(market, construct_spne(market));
}

int cmd_compare(const RunConfig& c) {
  if (c.scenarios.size() != 2) throw ValidationError("--scenario", "compare needs exactly two scenarios");
  const MarketSpec a = load_market(c.scenarios[0], c.grid_cells);
  const MarketSpec b = load_market(c.scenarios[1], c.grid_cells);
  const EquilibriumReport ra = solve_any(a);
  const EquilibriumReport rb = solve_any(b);
  const std::string la = fs::path(c.scenarios[0]).stem().string();
  const std::string lb = fs::path(c.scenarios[1]).stem().string();
  const std::string table = format_comparison(ra, rb, la, lb);
  const fs::path dir = output_dir(c);
  if (wants(c, "table")) {
    write_text(dir / "compare.txt", table);
    std::cout << table;
  }
  if (wants(c, "json")) {
    json doc = comparison_json(ra, rb);
    doc["scenarios"] = {la, lb};
    write_text(dir / "compare.json", dump(doc));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibria of reinsurance markets with Choquet pricing"};
  app.require_subcommand(1);
  RunConfig config;

  auto common = [&config](CLI::App* sub, bool many_scenarios) {
    auto* opt = sub->add_option("--scenario", config.scenarios, "scenario TOML file")->required();
    if (many_scenarios) opt->expected(2);
    else opt->expected(1);
    sub->add_option("--grid-cells", config.grid_cells, "uniform cells before crossing refinement")
        ->check(CLI::Range(std::size_t{100}, std::size_t{100000000}));
    sub->add_option("--seed", config.seed, "seed for deviation sampling");
    sub->add_option("--out", config.out, "output directory");
    sub->add_option("--format", config.formats, "comma-separated subset of table,csv,json")
        ->delimiter(',')
        ->check(CLI::IsMember({"table", "csv", "json"}));
    sub->add_option("--threads", config.threads, "worker threads for deviation sweeps (0 = all cores)");
  };

  auto* spne = app.add_subcommand("solve-spne", "canonical SPNE and its report");
  common(spne, false);
  spne->add_option("--deviations", config.deviations, "deviation samples per reinsurer to attach to the report");
  auto* stack = app.add_subcommand("solve-stackelberg", "single-reinsurer Stackelberg equilibrium");
  common(stack, false);
  stack->add_option("--deviations", config.deviations, "deviation samples per reinsurer to attach to the report");
  auto* verify = app.add_subcommand("verify", "check a serialized strategy");
  common(verify, false);
  verify->add_option("--strategy", config.strategy, "strategy.json written by a solve command")->required();
  verify->add_option("--samples", config.samples, "deviation samples per reinsurer");
  auto* compare = app.add_subcommand("compare", "solve two scenarios and compare welfare");
  common(compare, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (spne->parsed()) return cmd_solve(config, false);
    if (stack->parsed()) return cmd_solve(config, true);
    if (verify->parsed()) return cmd_verify(config);
    if (compare->parsed()) return cmd_compare(config);
  } catch (const UnsupportedRegime& e) {
    std::cerr << "unsupported regime: " << e.what() << "\n";
    return kExitRegime;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "invalid JSON: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
