#include <catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "reinsure/equilibrium.hpp"
#include "reinsure/report_io.hpp"
#include "support/oracles.hpp"

using namespace reinsure;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string& header) {
  std::istringstream in(text);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<double> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("six-decimal formatting", "[report]") {
  CHECK(fixed6(1.1008614) == "1.100861");
  CHECK(fixed6(-2.9334414) == "-2.933441");
  CHECK(fixed6(-1e-9) == "0.000000");
  CHECK(fixed6(0.0000006) == "0.000001");
  CHECK(csv_number(0.1) == "0.1");
}

TEST_CASE("report table and json carry the equilibrium numbers", "[report]") {
  const auto m = oracle::example_market(2, 2000);
  const auto s = construct_spne(m);
  const auto r = build_report(m, s);
  const auto table = format_table(r);
  CHECK_THAT(table, ContainsSubstring("Initial Risk"));
  CHECK_THAT(table, ContainsSubstring("Reinsurer 2"));
  CHECK_THAT(table, ContainsSubstring("Pareto optimal: yes"));

  const auto doc = report_document(m, r, "solve-spne");
  CHECK(doc["insurers"].size() == 3);
  CHECK(doc["reinsurers"].size() == 2);
  CHECK(doc["flags"]["individually_rational"] == true);
  CHECK(doc["flags"]["deviation_check_passed"].is_null());
  CHECK(doc["grid"]["cells"] == m.grid().cells());
  CHECK(doc["insurers"][0]["premium_paid"].size() == 2);
  const double gain = doc["insurers"][2]["welfare_gain"];
  CHECK(gain == r.insurers[2].welfare_gain);
}

TEST_CASE("curves csv has the documented columns and monotone curves", "[report]") {
  const auto m = oracle::example_market(2, 500);
  std::string header;
  const auto rows = parse_csv(curves_csv(m, 1), header);
  CHECK(header == "z,alpha_2,tau_21,tau_22,tau_bar_2");
  REQUIRE(rows.size() == m.grid().cells() + 1);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(rows[k][0] > rows[k - 1][0]);
    for (std::size_t c = 1; c < 5; ++c) CHECK(rows[k][c] <= rows[k - 1][c] + 1e-11);
  }
  CHECK(rows.back()[0] == 5.0);
}

TEST_CASE("indemnity csv columns add up and are 1-Lipschitz", "[report]") {
  const auto m = oracle::example_market(2, 500);
  const auto s = construct_spne(m);
  std::string header;
  const auto rows = parse_csv(indemnity_csv(m, s, 0), header);
  CHECK(header == "x,I_11,I_12,total");
  CHECK(rows.front()[3] == 0.0);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double dx = rows[k][0] - rows[k - 1][0];
    CHECK_THAT(rows[k][1] + rows[k][2], WithinAbs(rows[k][3], 1e-11));
    const double dt = rows[k][3] - rows[k - 1][3];
    CHECK(dt >= -1e-11);
    CHECK(dt <= dx + 1e-11);
  }
}

TEST_CASE("strategies survive a json round trip", "[report]") {
  const auto m = oracle::example_market(2, 500);
  const auto s = construct_spne(m);
  const auto alloc = induced_allocation(m, s);
  const json doc = json::parse(dump(strategy_to_json(m, s, alloc)));
  const auto loaded = strategy_from_json(m, doc);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(loaded.strategy.prices.nu[i][j].values().size() == s.prices.nu[i][j].values().size());
      for (std::size_t k = 0; k <= m.grid().cells(); ++k) CHECK(loaded.strategy.prices.nu[i][j][k] == s.prices.nu[i][j][k]);
      CHECK(loaded.strategy.responses.rows[i][j] == s.responses.rows[i][j]);
      CHECK(loaded.allocation.premia[i][j] == alloc.premia[i][j]);
    }
  }

  const auto coarse = oracle::example_market(2, 400);
  CHECK_THROWS_AS(strategy_from_json(coarse, doc), ValidationError);
  json broken = doc;
  broken.erase("prices");
  CHECK_THROWS_AS(strategy_from_json(m, broken), ValidationError);
}

TEST_CASE("comparison of monopoly and duopoly", "[report]") {
  const auto m1 = oracle::example_market(1, 2000);
  const auto m2 = oracle::example_market(2, 2000);
  const auto a = solve_stackelberg(m1).report;
  const auto b = build_report(m2, construct_spne(m2));
  const auto c = comparison_json(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    const double delta = c["insurers"][i]["welfare_gain_delta"];
    CHECK(delta > 0.5);
  }
  CHECK_THAT(format_comparison(a, b, "monopoly", "duopoly"), ContainsSubstring("Reinsurer 2 welfare gain"));
}
