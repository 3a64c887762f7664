#ifndef REINSURE_BESTRESPONSE_HPP
#define REINSURE_BESTRESPONSE_HPP

// Insurer best responses to quoted pricing capacities.
//
// For fixed prices the insurer problem separates cell by cell: on a cell the
// insurer compares its own tail weight alpha_i with the lowest quote mu_i and
// buys full cover (BUY), nothing (RETAIN) or anything in between (INDIFFERENT)
// from the reinsurers quoting mu_i. The tie-breaking rule picks the recipient.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "reinsure/curves.hpp"
#include "reinsure/market.hpp"

namespace reinsure {

enum class Regime : unsigned char { buy, indifferent, retain };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::buy: return "BUY";
    case Regime::indifferent: return "INDIFFERENT";
    case Regime::retain: return "RETAIN";
  }
  return "?";
}

enum class TieRule {
  generous,     ///< cover goes to the cheapest true preference among tied quoters
  first_index,  ///< lowest-index minimal quoter, full cover on INDIFFERENT cells
  retain        ///< no cover on INDIFFERENT cells
};

inline constexpr std::size_t kRetain = 0;

/// Cellwise decision of one insurer.
struct CellDecision {
  Regime regime;
  std::size_t option;  ///< 0 = retain, j + 1 = reinsurer j
  double lowest_price;
};

/// The per-cell rule. `prices` holds the m quotes, `tau` the m + 1 true
/// preferences (tau[0] = alpha).
inline CellDecision decide_cell(std::span<const double> prices, std::span<const double> tau,
                                double eps, TieRule rule) {
  const double alpha = tau[0];
  double mu = prices[0];
  for (double p : prices) mu = std::min(mu, p);

  Regime regime;
  if (nearly_equal(alpha, mu, eps)) regime = Regime::indifferent;
  else if (alpha > mu) regime = Regime::buy;
  else return {Regime::retain, kRetain, mu};

  auto quotes_min = [&](std::size_t j) { return nearly_equal(prices[j], mu, eps); };

  if (rule != TieRule::generous) {
    if (regime == Regime::indifferent && rule == TieRule::retain) return {regime, kRetain, mu};
    for (std::size_t j = 0; j < prices.size(); ++j)
      if (quotes_min(j)) return {regime, option_of(j), mu};
    return {regime, kRetain, mu};
  }

  // Candidates: minimal quoters, plus retention when alpha ties the quote.
  bool have = regime == Regime::indifferent;
  double best_tau = alpha;
  for (std::size_t j = 0; j < prices.size(); ++j) {
    if (!quotes_min(j)) continue;
    if (!have || tau[option_of(j)] < best_tau) best_tau = tau[option_of(j)];
    have = true;
  }
  for (std::size_t j = 0; j < prices.size(); ++j) {
    if (quotes_min(j) && nearly_equal(tau[option_of(j)], best_tau, eps)) return {regime, option_of(j), mu};
  }
  return {regime, kRetain, mu};
}

struct CellClassification {
  std::size_t insurer = 0;
  std::vector<double> lowest_price;                   ///< mu_i per cell
  std::vector<std::vector<std::size_t>> minimizers;   ///< M_i(z), 0-based reinsurers
  std::vector<Regime> regime;
  std::vector<std::vector<std::size_t>> cheapest_true;  ///< argmin_k tau_{i,k}, options 0..m
};

namespace detail {

inline void check_prices(const MarketSpec& market, const PricingMatrix& prices, std::size_t i) {
  if (i >= market.insurers()) throw StructuralError("insurer index out of range");
  if (prices.nu.size() != market.insurers() || prices.nu[i].size() != market.reinsurers())
    throw StructuralError("pricing matrix does not match the market");
  for (const auto& c : prices.nu[i]) require_on_grid(c, market.grid());
}

/// Gathers the m quotes and m + 1 true preferences of insurer i on one cell.
struct CellView {
  std::vector<double> prices;
  std::vector<double> tau;

  explicit CellView(const MarketSpec& market)
      : prices(market.reinsurers()), tau(market.reinsurers() + 1) {}

  void load(const MarketSpec& market, const PricingMatrix& p, std::size_t i, std::size_t k) {
    for (std::size_t j = 0; j < prices.size(); ++j) prices[j] = p.nu[i][j][k];
    for (std::size_t o = 0; o < tau.size(); ++o) tau[o] = market.preference(i, o)[k];
  }
};

}  // namespace detail

inline CellClassification classify_cells(const MarketSpec& market, const PricingMatrix& prices,
                                         std::size_t i) {
  detail::check_prices(market, prices, i);
  const Grid& grid = market.grid();
  const double eps = grid.eps_eq();
  const std::size_t cells = grid.cells();
  CellClassification out;
  out.insurer = i;
  out.lowest_price.resize(cells);
  out.minimizers.resize(cells);
  out.regime.resize(cells);
  out.cheapest_true.resize(cells);
  detail::CellView view(market);
  for (std::size_t k = 0; k < cells; ++k) {
    view.load(market, prices, i, k);
    const auto d = decide_cell(view.prices, view.tau, eps, TieRule::generous);
    out.lowest_price[k] = d.lowest_price;
    out.regime[k] = d.regime;
    for (std::size_t j = 0; j < view.prices.size(); ++j)
      if (nearly_equal(view.prices[j], d.lowest_price, eps)) out.minimizers[k].push_back(j);
    const double tmin = *std::min_element(view.tau.begin(), view.tau.end());
    for (std::size_t o = 0; o < view.tau.size(); ++o)
      if (nearly_equal(view.tau[o], tmin, eps)) out.cheapest_true[k].push_back(o);
  }
  return out;
}

/// Generous recipient per cell (0 = retention) with the mass H_i placed on
/// the cell: 1 on BUY cells, 1 on INDIFFERENT cells won by a reinsurer, 0
/// otherwise.
struct GenerousSelection {
  std::vector<std::size_t> recipient;
  std::vector<double> mass;
};

inline GenerousSelection generous_distribution(const MarketSpec& market, const PricingMatrix& prices,
                                               const CellClassification& cls) {
  const std::size_t i = cls.insurer;
  detail::check_prices(market, prices, i);
  const Grid& grid = market.grid();
  GenerousSelection out;
  out.recipient.resize(grid.cells());
  out.mass.resize(grid.cells());
  detail::CellView view(market);
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    view.load(market, prices, i, k);
    const auto d = decide_cell(view.prices, view.tau, grid.eps_eq(), TieRule::generous);
    out.recipient[k] = d.option;
    out.mass[k] = d.option == kRetain ? 0.0 : 1.0;
  }
  return out;
}

/// Optimal marginal indemnifications of insurer i against `prices`.
inline MarginalRow best_response(const MarketSpec& market, const PricingMatrix& prices, std::size_t i,
                                 TieRule rule = TieRule::generous) {
  detail::check_prices(market, prices, i);
  const Grid& grid = market.grid();
  MarginalRow row(market.reinsurers(), std::vector<double>(grid.cells(), 0.0));
  detail::CellView view(market);
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    view.load(market, prices, i, k);
    const auto d = decide_cell(view.prices, view.tau, grid.eps_eq(), rule);
    if (d.option != kRetain) row[d.option - 1][k] = 1.0;
  }
  return row;
}

/// rho_i(X_i) - integral alpha_i sum_j gamma_ij + sum_j integral nu_ij gamma_ij.
inline double insurer_risk(const MarketSpec& market, const PricingMatrix& prices, const MarginalRow& row,
                           std::size_t i) {
  detail::check_prices(market, prices, i);
  if (row.size() != market.reinsurers()) throw StructuralError("gamma row has the wrong number of reinsurers");
  const Grid& grid = market.grid();
  const auto& alpha = market.alpha(i);
  double risk = market.initial_risk(i);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j].size() != grid.cells()) throw StructuralError("gamma row does not match the grid");
    const auto& nu = prices.nu[i][j];
    for (std::size_t k = 0; k < grid.cells(); ++k) risk += (nu[k] - alpha[k]) * row[j][k] * grid.width(k);
  }
  return risk;
}

/// Premium integral nu_ij gamma_ij.
inline double premium(const MarketSpec& market, const SurvivalCurve& nu, std::span<const double> gamma) {
  return weighted_integral(nu, gamma, market.grid());
}

}  // namespace reinsure

#endif  // REINSURE_BESTRESPONSE_HPP
