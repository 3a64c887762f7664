#ifndef REINSURE_PARETO_HPP
#define REINSURE_PARETO_HPP

// Individual rationality and Pareto optimality of allocations.
//
// Under either supported regime every reinsurer evaluates its book additively,
// so the aggregate post-transfer risk separates into one cellwise problem per
// insurer: put all marginal cover on the cheapest true preference. An
// allocation is PO exactly when its cover lives on those cheapest options and
// its premia keep everyone individually rational.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reinsure/curves.hpp"
#include "reinsure/errors.hpp"
#include "reinsure/market.hpp"

namespace reinsure {

inline constexpr double kDefaultPayoffTolerance = 1e-7;

inline void require_supported_regime(const MarketSpec& market) {
  if (!is_supported(market.dependence())) {
    throw UnsupportedRegime(
        "reinsurer risk is only evaluated for risk-neutral reinsurers or comonotone losses");
  }
}

namespace detail {

inline void check_allocation(const MarketSpec& market, const Allocation& allocation) {
  const auto& g = allocation.indemnities;
  if (g.insurers() != market.insurers() || g.reinsurers() != market.reinsurers())
    throw StructuralError("indemnity matrix does not match the market");
  if (allocation.premia.size() != market.insurers())
    throw StructuralError("premium matrix does not match the market");
  for (const auto& row : allocation.premia) {
    if (row.size() != market.reinsurers()) throw StructuralError("premium matrix does not match the market");
    for (double p : row)
      if (!std::isfinite(p)) throw ValidationError("premia", "premia must be finite");
  }
  validate(g, market.grid(), market.grid().eps_eq());
}

/// integral tau_{i,option} gamma over the grid.
inline double covered(const MarketSpec& market, std::size_t i, std::size_t option,
                      std::span<const double> gamma) {
  return weighted_integral(market.preference(i, option), gamma, market.grid());
}

}  // namespace detail

struct IrMargins {
  std::vector<double> insurer;    ///< rho_i(X_i) minus post-transfer risk
  std::vector<double> reinsurer;  ///< minus post-transfer risk

  bool holds(double eps = kDefaultPayoffTolerance) const {
    auto ok = [eps](double v) { return v >= -eps; };
    return std::all_of(insurer.begin(), insurer.end(), ok) &&
           std::all_of(reinsurer.begin(), reinsurer.end(), ok);
  }
};

inline IrMargins check_ir(const MarketSpec& market, const Allocation& allocation) {
  require_supported_regime(market);
  detail::check_allocation(market, allocation);
  const auto& rows = allocation.indemnities.rows;
  IrMargins out;
  out.insurer.assign(market.insurers(), 0.0);
  out.reinsurer.assign(market.reinsurers(), 0.0);
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    for (std::size_t j = 0; j < market.reinsurers(); ++j) {
      const double ceded = detail::covered(market, i, 0, rows[i][j]);
      out.insurer[i] += ceded - allocation.premia[i][j];
      const double cost = detail::covered(market, i, option_of(j), rows[i][j]);
      out.reinsurer[j] += allocation.premia[i][j] - cost;
    }
  }
  return out;
}

/// Sum of initial risks plus sum_{i,j} integral (tau_{i,j} - alpha_i) gamma_ij.
inline double aggregate_risk(const MarketSpec& market, const MarginalIndemnityMatrix& gamma) {
  require_supported_regime(market);
  if (gamma.insurers() != market.insurers() || gamma.reinsurers() != market.reinsurers())
    throw StructuralError("indemnity matrix does not match the market");
  const Grid& grid = market.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    total += market.initial_risk(i);
    const auto& alpha = market.alpha(i);
    for (std::size_t j = 0; j < market.reinsurers(); ++j) {
      const auto& tau = market.preference(i, option_of(j));
      const auto& g = gamma.rows[i][j];
      if (g.size() != grid.cells()) throw StructuralError("gamma does not match the grid");
      for (std::size_t k = 0; k < grid.cells(); ++k) total += (tau[k] - alpha[k]) * g[k] * grid.width(k);
    }
  }
  return total;
}

/// Cellwise argmin of the true preferences; ties go to the lowest option
/// index (retention first).
inline MarginalIndemnityMatrix po_oracle(const MarketSpec& market) {
  require_supported_regime(market);
  const Grid& grid = market.grid();
  const double eps = grid.eps_eq();
  auto out = MarginalIndemnityMatrix::zeros(market.insurers(), market.reinsurers(), grid);
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    for (std::size_t k = 0; k < grid.cells(); ++k) {
      std::size_t best = 0;
      double best_tau = market.preference(i, 0)[k];
      for (std::size_t o = 1; o <= market.reinsurers(); ++o) {
        const double t = market.preference(i, o)[k];
        if (t < best_tau && !nearly_equal(t, best_tau, eps)) {
          best = o;
          best_tau = t;
        }
      }
      if (best != 0) out.rows[i][best - 1][k] = 1.0;
    }
  }
  return out;
}

struct SupportViolation {
  std::size_t insurer;
  std::size_t cell;
  double mass_outside;
};

struct PoCertificate {
  /// L_i(z): options 0..m attaining the lowest true preference, per insurer and cell.
  std::vector<std::vector<std::vector<std::size_t>>> cheapest;
  bool support_ok = true;
  std::vector<SupportViolation> violations;  ///< first few offending cells
  IrMargins ir;
  double aggregate_risk = 0.0;
  bool pareto_optimal = false;
};

inline PoCertificate check_po(const MarketSpec& market, const Allocation& allocation,
                              double eps_num = kDefaultPayoffTolerance) {
  require_supported_regime(market);
  detail::check_allocation(market, allocation);
  const Grid& grid = market.grid();
  const double eps = grid.eps_eq();
  const auto& gamma = allocation.indemnities;
  constexpr std::size_t kMaxReported = 16;

  PoCertificate cert;
  cert.cheapest.resize(market.insurers());
  std::vector<double> tau(market.reinsurers() + 1);
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    cert.cheapest[i].resize(grid.cells());
    for (std::size_t k = 0; k < grid.cells(); ++k) {
      for (std::size_t o = 0; o < tau.size(); ++o) tau[o] = market.preference(i, o)[k];
      const double tmin = *std::min_element(tau.begin(), tau.end());
      auto& set = cert.cheapest[i][k];
      for (std::size_t o = 0; o < tau.size(); ++o)
        if (nearly_equal(tau[o], tmin, eps)) set.push_back(o);
      auto in_set = [&](std::size_t o) { return std::find(set.begin(), set.end(), o) != set.end(); };
      double outside = in_set(0) ? 0.0 : std::max(gamma.retained(i, k), 0.0);
      for (std::size_t j = 0; j < market.reinsurers(); ++j)
        if (!in_set(option_of(j))) outside += gamma.rows[i][j][k];
      if (outside > eps) {
        cert.support_ok = false;
        if (cert.violations.size() < kMaxReported) cert.violations.push_back({i, k, outside});
      }
    }
  }
  cert.ir = check_ir(market, allocation);
  cert.aggregate_risk = aggregate_risk(market, gamma);
  cert.pareto_optimal = cert.support_ok && cert.ir.holds(eps_num);
  return cert;
}

/// Minimum-norm premia with row sums a and column sums b:
/// pi_ij = a_i / m + b_j / n - S / (n m).
inline std::vector<std::vector<double>> premium_feasibility(std::span<const double> a, std::span<const double> b,
                                                           double eps_num = kDefaultPayoffTolerance) {
  if (a.empty() || b.empty()) throw StructuralError("premium targets must be nonempty");
  double sa = 0.0;
  double sb = 0.0;
  for (double v : a) sa += v;
  for (double v : b) sb += v;
  const double gap = sa - sb;
  if (std::abs(gap) > eps_num * std::max(1.0, std::abs(sa))) {
    throw InfeasibleError(gap, "insurer and reinsurer premium targets differ by " + std::to_string(gap));
  }
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double total = 0.5 * (sa + sb);
  std::vector<std::vector<double>> pi(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) pi[i][j] = a[i] / m + b[j] / n - total / (n * m);
  return pi;
}

}  // namespace reinsure

#endif  // REINSURE_PARETO_HPP
