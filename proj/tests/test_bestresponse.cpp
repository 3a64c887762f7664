#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "reinsure/bestresponse.hpp"
#include "reinsure/equilibrium.hpp"
#include "support/oracles.hpp"

using namespace reinsure;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kEps = 1e-9;

PricingMatrix uniform_prices(const MarketSpec& m, const std::function<SurvivalCurve(std::size_t, std::size_t)>& f) {
  PricingMatrix p;
  p.nu.resize(m.insurers());
  for (std::size_t i = 0; i < m.insurers(); ++i)
    for (std::size_t j = 0; j < m.reinsurers(); ++j) p.nu[i].push_back(f(i, j));
  return p;
}

/// Generous choice written out from the candidate-set definition.
std::size_t generous_by_sets(const std::vector<double>& prices, const std::vector<double>& tau) {
  const double mu = *std::min_element(prices.begin(), prices.end());
  if (tau[0] < mu && !nearly_equal(tau[0], mu, kEps)) return 0;
  std::vector<std::size_t> cand;
  if (nearly_equal(tau[0], mu, kEps)) cand.push_back(0);
  for (std::size_t j = 0; j < prices.size(); ++j)
    if (nearly_equal(prices[j], mu, kEps)) cand.push_back(j + 1);
  std::vector<std::size_t> kept;
  for (std::size_t k : cand) {
    bool excluded = false;
    for (std::size_t other : cand)
      if (tau[other] < tau[k] && !nearly_equal(tau[other], tau[k], kEps)) excluded = true;
    if (!excluded) kept.push_back(k);
  }
  // lowest reinsurer first, retention last
  std::sort(kept.begin(), kept.end(), [](std::size_t a, std::size_t b) {
    if (a == 0) return false;
    if (b == 0) return true;
    return a < b;
  });
  return kept.front();
}

}  // namespace

TEST_CASE("tied quotes go to the cheapest true preference", "[bestresponse]") {
  // j = 1 and j = 2 both quote 0.4 with true preferences 0.3 and 0.5
  std::vector<double> prices{0.4, 0.4};
  std::vector<double> tau{0.6, 0.3, 0.5};
  auto d = decide_cell(prices, tau, kEps, TieRule::generous);
  CHECK(d.regime == Regime::buy);
  CHECK(d.option == 1);
  tau = {0.6, 0.5, 0.3};
  CHECK(decide_cell(prices, tau, kEps, TieRule::generous).option == 2);
}

TEST_CASE("a retention tie with a cheaper insurer keeps the risk", "[bestresponse]") {
  std::vector<double> prices{0.2};
  std::vector<double> tau{0.2, 0.4};
  const auto d = decide_cell(prices, tau, kEps, TieRule::generous);
  CHECK(d.regime == Regime::indifferent);
  CHECK(d.option == kRetain);
  tau = {0.2, 0.1};
  CHECK(decide_cell(prices, tau, kEps, TieRule::generous).option == 1);
}

TEST_CASE("ties in both price and preference go to the lowest reinsurer", "[bestresponse]") {
  std::vector<double> prices{0.5, 0.3, 0.3};
  std::vector<double> tau{0.3, 0.3, 0.3, 0.3};
  const auto d = decide_cell(prices, tau, kEps, TieRule::generous);
  CHECK(d.regime == Regime::indifferent);
  CHECK(d.option == 2);
  CHECK(decide_cell(prices, tau, kEps, TieRule::retain).option == kRetain);
  CHECK(decide_cell(prices, tau, kEps, TieRule::first_index).option == 2);
}

TEST_CASE("generous choice agrees with the set definition on random cells", "[bestresponse][property]") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t m = 1 + trial % 4;
    std::vector<double> prices(m);
    std::vector<double> tau(m + 1);
    // coarse values make ties frequent
    for (auto& p : prices) p = 0.1 * level(rng);
    for (auto& t : tau) t = 0.1 * level(rng);
    const auto d = decide_cell(prices, tau, kEps, TieRule::generous);
    INFO("trial " << trial);
    CHECK(d.option == generous_by_sets(prices, tau));
  }
}

TEST_CASE("all-retain market buys nothing", "[bestresponse]") {
  const auto m = oracle::example_market(2, 500);
  const auto p = uniform_prices(m, [&](std::size_t i, std::size_t) {
    auto v = m.alpha(i);
    return scale(v, 2.0);
  });
  for (std::size_t i = 0; i < m.insurers(); ++i) {
    const auto row = best_response(m, p, i);
    for (const auto& g : row)
      for (double x : g) CHECK(x == 0.0);
    CHECK_THAT(insurer_risk(m, p, row, i), WithinAbs(m.initial_risk(i), 1e-15));
    const auto cls = classify_cells(m, p, i);
    for (auto r : cls.regime) CHECK(r == Regime::retain);
  }
}

TEST_CASE("monopoly quoting alpha: indifferent everywhere, cover where the reinsurer is cheaper",
          "[bestresponse][oracle]") {
  const auto m = oracle::example_market(1);
  const auto p = uniform_prices(m, [&](std::size_t i, std::size_t) { return m.alpha(i); });
  const auto cls = classify_cells(m, p, 0);
  for (auto r : cls.regime) CHECK(r == Regime::indifferent);
  const auto row = best_response(m, p, 0);
  const auto bands = oracle::bands(row[0], m.grid());
  REQUIRE(bands.size() == 1);
  CHECK(oracle::same_edge(m, 0, bands[0].first, std::log(1.15) / 2.5, 1e-10));
  CHECK(oracle::same_edge(m, 0, bands[0].second, 2.0 * std::log(10.0 / 1.15), 1e-10));
  const auto sel = generous_distribution(m, p, cls);
  for (std::size_t k = 0; k < m.grid().cells(); ++k) CHECK(sel.mass[k] == row[0][k]);
}

TEST_CASE("duopoly bands of insurer 1 under second-lowest prices", "[bestresponse][oracle]") {
  const auto m = oracle::example_market(2);
  const auto s = construct_spne(m);
  const auto& row = s.responses.rows[0];

  // oracle: closed-form cell scan of which reinsurer is strictly cheapest
  auto wins = [](std::size_t j) {
    return [j](double z) {
      const auto v = oracle::example_preferences(0, 2, z);
      for (std::size_t o = 0; o < v.size(); ++o)
        if (o != j + 1 && !(v[j + 1] < v[o])) return false;
      return true;
    };
  };
  for (std::size_t j = 0; j < 2; ++j) {
    const auto expected = oracle::intervals(wins(j), 5.0);
    const auto got = oracle::bands(row[j], m.grid());
    REQUIRE(expected.size() == got.size());
    for (std::size_t b = 0; b < got.size(); ++b) {
      CHECK(oracle::same_edge(m, 0, got[b].first, expected[b].first, 1e-9));
      CHECK(oracle::same_edge(m, 0, got[b].second, expected[b].second, 1e-9));
    }
  }
  // the frozen values: reinsurer 2 on (ln(1.1)/2, 2 ln(1.15/1.1)), reinsurer 1 up to 2 ln(10/1.15)
  const auto b2 = oracle::bands(row[1], m.grid());
  const auto b1 = oracle::bands(row[0], m.grid());
  REQUIRE(b2.size() == 1);
  REQUIRE(b1.size() == 1);
  CHECK(oracle::same_edge(m, 0, b2[0].first, std::log(1.1) / 2.0, 1e-10));
  CHECK(oracle::same_edge(m, 0, b2[0].second, 2.0 * std::log(1.15 / 1.1), 1e-10));
  CHECK(oracle::same_edge(m, 0, b1[0].first, 2.0 * std::log(1.15 / 1.1), 1e-10));
  CHECK(oracle::same_edge(m, 0, b1[0].second, 2.0 * std::log(10.0 / 1.15), 1e-10));
  // tie cells are a sliver next to the crossing
  CHECK(std::abs(b1[0].second - 2.0 * std::log(10.0 / 1.15)) < 2.0 * 5.0 / kDefaultGridCells);
}

TEST_CASE("insurer risks of the example", "[bestresponse]") {
  const auto m1 = oracle::example_market(1);
  const auto s1 = construct_spne(m1);
  CHECK_THAT(insurer_risk(m1, s1.prices, s1.responses.rows[0], 0), WithinAbs(1.100861, 5e-7));
  CHECK_THAT(premium(m1, s1.prices.nu[0][0], s1.responses.rows[0][0]), WithinAbs(1.044949, 5e-7));
  const auto m2 = oracle::example_market(2);
  const auto s2 = construct_spne(m2);
  CHECK_THAT(insurer_risk(m2, s2.prices, s2.responses.rows[0], 0), WithinAbs(0.545767, 5e-7));
  const auto zero = MarginalIndemnityMatrix::zeros(3, 2, m2.grid());
  CHECK(insurer_risk(m2, s2.prices, zero.rows[1], 1) == m2.initial_risk(1));
}

TEST_CASE("best responses beat random admissible rows", "[bestresponse][property]") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const auto m = oracle::random_market(rng, {4, 3, 300, false});
    // random monotone prices, not only equilibrium ones
    const auto p = uniform_prices(m, [&](std::size_t i, std::size_t) { return oracle::random_curve(rng, m.grid(), 1.2 * m.alpha(i)[0]); });
    for (std::size_t i = 0; i < m.insurers(); ++i) {
      const auto row = best_response(m, p, i);
      const double best = insurer_risk(m, p, row, i);
      for (int d = 0; d < 200; ++d) {
        const auto alt = oracle::random_row(rng, m.reinsurers(), m.grid().cells());
        CHECK(best <= insurer_risk(m, p, alt, i) + 1e-7);
      }
    }
  }
}

TEST_CASE("support and regime totals of best responses", "[bestresponse][property]") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_market(rng, {3, 3, 400, trial % 2 == 1});
    const auto p = uniform_prices(m, [&](std::size_t i, std::size_t) { return oracle::random_curve(rng, m.grid(), 1.2 * m.alpha(i)[0]); });
    for (std::size_t i = 0; i < m.insurers(); ++i) {
      const auto row = best_response(m, p, i);
      const auto cls = classify_cells(m, p, i);
      for (std::size_t k = 0; k < m.grid().cells(); ++k) {
        double total = 0.0;
        for (std::size_t j = 0; j < m.reinsurers(); ++j) {
          total += row[j][k];
          if (row[j][k] > 0.0)
            CHECK(std::find(cls.minimizers[k].begin(), cls.minimizers[k].end(), j) != cls.minimizers[k].end());
        }
        if (cls.regime[k] == Regime::buy) CHECK(total == 1.0);
        if (cls.regime[k] == Regime::retain) CHECK(total == 0.0);
      }
    }
  }
}

TEST_CASE("ceded risk is additive over comonotone layers", "[bestresponse][oracle]") {
  // rho_i(sum_j I_ij(X)) computed from the distribution of the ceded loss
  // against integral alpha_i * sum_j gamma_ij
  const auto m = oracle::example_market(2, 4000);
  const auto s = construct_spne(m);
  const Grid& g = m.grid();
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> total(g.cells(), 0.0);
    for (const auto& gj : s.responses.rows[i])
      for (std::size_t k = 0; k < g.cells(); ++k) total[k] += gj[k];
    const auto I = indemnity_at_nodes(total, g);
    const double via_gamma = weighted_integral(m.alpha(i), total, g);
    // P(I(X) > y) = P(X > I^{-1}(y)) with I^{-1}(y) the smallest x with I(x) > y
    auto inverse = [&](double y) {
      std::size_t k = 0;
      while (k < g.cells() && I[k + 1] <= y) ++k;
      const double slope = (I[k + 1] - I[k]) / g.width(k);
      return g.node(k) + (y - I[k]) / slope;
    };
    const double level = oracle::kLevels[i];
    auto tail = [&](double y) { return std::min(std::exp(-3.0 * inverse(y)) / level, 1.0); };
    std::vector<double> breaks;
    for (std::size_t k = 1; k < g.cells(); ++k)
      if (total[k] != total[k - 1]) breaks.push_back(I[k]);
    breaks.push_back(I[g.locate(-std::log(level) / 3.0)]);  // where alpha leaves 1
    const double direct = oracle::integrate(tail, 0.0, I.back(), breaks, 1e-11);
    CHECK_THAT(direct, WithinAbs(via_gamma, 1e-7));
  }
}
