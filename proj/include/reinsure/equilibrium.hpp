#ifndef REINSURE_EQUILIBRIUM_HPP
#define REINSURE_EQUILIBRIUM_HPP

// Subgame perfect equilibria of the pricing game.
//
// Reinsurers move first by quoting pricing capacities, insurers then respond
// with generous best responses. Every reinsurer quoting the second-lowest true
// preference is a member of the beth pricing set, so the canonical strategy
// needs no search. The deviation sweep is a numerical check of that claim on a
// concrete market, not a proof.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "reinsure/bestresponse.hpp"
#include "reinsure/curves.hpp"
#include "reinsure/errors.hpp"
#include "reinsure/market.hpp"
#include "reinsure/pareto.hpp"

namespace reinsure {

/// Bits of one construction_log entry; a set bit means the clause holds.
enum BethClause : std::uint8_t {
  clause_lowest_is_second = 1,   ///< min_j nu_ij = tau_bar_i
  clause_two_quoters = 2,        ///< at least two of M_i plus tied retention quote the minimum
  clause_cheapest_quotes = 4,    ///< some cheapest-true-preference reinsurer quotes the minimum
  clause_all = 7
};

struct SpneStrategy {
  PricingMatrix prices;              ///< nu*_ij
  MarginalIndemnityMatrix responses; ///< gamma*_ij
  Dependence regime = Dependence::risk_neutral_reinsurers;
  std::vector<std::vector<std::uint8_t>> construction_log;  ///< [i][cell] BethClause bits

  /// Cells of insurer i (all insurers if i is npos) where a clause in `mask` fails.
  std::size_t violations(std::uint8_t mask = clause_all, std::size_t i = static_cast<std::size_t>(-1)) const {
    std::size_t count = 0;
    for (std::size_t r = 0; r < construction_log.size(); ++r) {
      if (i != static_cast<std::size_t>(-1) && r != i) continue;
      for (auto bits : construction_log[r])
        if ((bits & mask) != mask) ++count;
    }
    return count;
  }
};

/// Clause bits of a pricing matrix on every cell.
inline std::vector<std::vector<std::uint8_t>> beth_log(const MarketSpec& market, const PricingMatrix& prices) {
  validate(prices, market);
  const Grid& grid = market.grid();
  const double eps = grid.eps_eq();
  const std::size_t m = market.reinsurers();
  std::vector<std::vector<std::uint8_t>> log(market.insurers(), std::vector<std::uint8_t>(grid.cells(), 0));
  detail::CellView view(market);
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    const auto& bar = market.second_lowest(i);
    for (std::size_t k = 0; k < grid.cells(); ++k) {
      view.load(market, prices, i, k);
      const double mu = *std::min_element(view.prices.begin(), view.prices.end());
      const double tmin = *std::min_element(view.tau.begin(), view.tau.end());
      std::uint8_t bits = 0;
      if (nearly_equal(mu, bar[k], eps)) bits |= clause_lowest_is_second;
      std::size_t quoters = nearly_equal(view.tau[0], mu, eps) ? 1 : 0;
      bool cheapest_exists = false;
      bool cheapest_quotes = false;
      for (std::size_t j = 0; j < m; ++j) {
        const bool at_min = nearly_equal(view.prices[j], mu, eps);
        if (at_min) ++quoters;
        if (nearly_equal(view.tau[option_of(j)], tmin, eps)) {
          cheapest_exists = true;
          cheapest_quotes = cheapest_quotes || at_min;
        }
      }
      if (quoters >= 2) bits |= clause_two_quoters;
      if (!cheapest_exists || cheapest_quotes) bits |= clause_cheapest_quotes;
      log[i][k] = bits;
    }
  }
  return log;
}

/// Generous responses and the clause log for an arbitrary pricing matrix.
inline SpneStrategy assemble_strategy(const MarketSpec& market, PricingMatrix prices) {
  validate(prices, market);
  SpneStrategy s;
  s.regime = market.dependence();
  s.responses.rows.reserve(market.insurers());
  for (std::size_t i = 0; i < market.insurers(); ++i) s.responses.rows.push_back(best_response(market, prices, i));
  s.construction_log = beth_log(market, prices);
  s.prices = std::move(prices);
  return s;
}

/// Every reinsurer quotes tau_bar_i to every insurer i.
inline PricingMatrix canonical_prices(const MarketSpec& market) {
  PricingMatrix p;
  p.nu.resize(market.insurers());
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    for (std::size_t j = 0; j < market.reinsurers(); ++j) {
      SurvivalCurve c = market.second_lowest(i);
      c.set_label("nu_" + std::to_string(i + 1) + "," + std::to_string(j + 1));
      p.nu[i].push_back(std::move(c));
    }
  }
  return p;
}

inline SpneStrategy construct_spne(const MarketSpec& market) {
  require_supported_regime(market);
  SpneStrategy s = assemble_strategy(market, canonical_prices(market));
  const Grid& grid = market.grid();
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    std::string cells;
    double length = 0.0;
    for (std::size_t k = 0; k < grid.cells(); ++k) {
      if (s.construction_log[i][k] & clause_cheapest_quotes) continue;
      length += grid.width(k);
      if (cells.size() < 200) cells += (cells.empty() ? "" : ",") + std::to_string(k);
    }
    if (length > 0.0) {
      throw NumericalError("insurer " + std::to_string(i + 1) +
                           ": no cheapest reinsurer quotes the lowest price on cells " + cells);
    }
  }
  return s;
}

/// Sum_i integral (tau_{i,j} - nu_ij) gamma_ij.
inline double reinsurer_risk(const MarketSpec& market, const PricingMatrix& prices,
                             const MarginalIndemnityMatrix& gamma, std::size_t j) {
  require_supported_regime(market);
  if (j >= market.reinsurers()) throw StructuralError("reinsurer index out of range");
  if (gamma.insurers() != market.insurers() || gamma.reinsurers() != market.reinsurers())
    throw StructuralError("indemnity matrix does not match the market");
  const Grid& grid = market.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    const auto& tau = market.preference(i, option_of(j));
    const auto& nu = prices.nu.at(i).at(j);
    require_on_grid(nu, grid);
    const auto& g = gamma.rows[i][j];
    for (std::size_t k = 0; k < grid.cells(); ++k) total += (tau[k] - nu[k]) * g[k] * grid.width(k);
  }
  return total;
}

inline double reinsurer_risk(const MarketSpec& market, const SpneStrategy& strategy, std::size_t j) {
  return reinsurer_risk(market, strategy.prices, strategy.responses, j);
}

/// Sum_i integral min(tau_{i,j} - tau_bar_i, 0): what reinsurer j earns under
/// the canonical strategy.
inline double reinsurer_profit_target(const MarketSpec& market, std::size_t j) {
  const Grid& grid = market.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    const auto& tau = market.preference(i, option_of(j));
    const auto& bar = market.second_lowest(i);
    for (std::size_t k = 0; k < grid.cells(); ++k) total += std::min(tau[k] - bar[k], 0.0) * grid.width(k);
  }
  return total;
}

inline double equilibrium_identity_check(const MarketSpec& market, const SpneStrategy& strategy, std::size_t j) {
  return std::abs(reinsurer_risk(market, strategy, j) - reinsurer_profit_target(market, j));
}

// ---------------------------------------------------------------------------
// Deviation sweep
// ---------------------------------------------------------------------------

enum DeviationFamily : unsigned {
  family_bump = 1,
  family_scale = 2,
  family_swap = 4,
  family_undercut = 8,
  family_all = 15
};

inline const char* family_name(DeviationFamily f) {
  switch (f) {
    case family_bump: return "bump";
    case family_scale: return "scale";
    case family_swap: return "swap";
    case family_undercut: return "undercut";
    default: return "mixed";
  }
}

struct DeviationOptions {
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  unsigned families = family_all;
  double eps_num = kDefaultPayoffTolerance;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct DeviationVerdict {
  std::size_t reinsurer = 0;
  std::size_t samples = 0;
  double equilibrium_risk = 0.0;
  double best_deviation_risk = 0.0;
  double worst_improvement = 0.0;  ///< equilibrium risk minus the lowest deviated risk
  std::size_t worst_sample = 0;
  std::string worst_family;
  bool passed = true;
};

/// Risk of reinsurer j when it quotes `deviation[i]` to insurer i and everyone
/// else keeps the strategy's prices. Insurers respond generously.
inline double evaluate_deviation(const MarketSpec& market, const SpneStrategy& strategy, std::size_t j,
                                 std::span<const SurvivalCurve> deviation) {
  require_supported_regime(market);
  if (j >= market.reinsurers()) throw StructuralError("reinsurer index out of range");
  if (deviation.size() != market.insurers()) throw StructuralError("need one deviated curve per insurer");
  const Grid& grid = market.grid();
  detail::CellView view(market);
  double total = 0.0;
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    require_on_grid(deviation[i], grid);
    const auto& tau = market.preference(i, option_of(j));
    for (std::size_t k = 0; k < grid.cells(); ++k) {
      view.load(market, strategy.prices, i, k);
      view.prices[j] = deviation[i][k];
      const auto d = decide_cell(view.prices, view.tau, grid.eps_eq(), TieRule::generous);
      if (d.option == option_of(j)) total += (tau[k] - deviation[i][k]) * grid.width(k);
    }
  }
  return total;
}

namespace detail {

inline void project_down(std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::min(v[k], v[k - 1]);
}

inline void project_up(std::vector<double>& v) {
  for (std::size_t k = v.size() - 1; k-- > 0;) v[k] = std::max(v[k], v[k + 1]);
}

inline void clamp_nonnegative(std::vector<double>& v) {
  for (double& x : v) x = std::max(x, 0.0);
}

}  // namespace detail

struct SampledDeviation {
  DeviationFamily family;
  std::vector<SurvivalCurve> curves;  ///< one per insurer
};

/// The deviation with index `sample` of the sweep for reinsurer j. Each sample
/// draws from its own generator, so the sweep does not depend on threading.
inline SampledDeviation sample_deviation(const MarketSpec& market, const SpneStrategy& strategy, std::size_t j,
                                         const DeviationOptions& options, std::size_t sample) {
  std::vector<DeviationFamily> enabled;
  for (auto f : {family_bump, family_scale, family_swap, family_undercut})
    if (options.families & f) enabled.push_back(f);
  if (enabled.empty()) throw ValidationError("families", "no deviation family enabled");

  std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                    static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(sample),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(sample) >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) {
    return std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(n)), n - 1);
  };
  auto log_uniform = [&](double lo_exp, double hi_exp) { return std::pow(10.0, lo_exp + (hi_exp - lo_exp) * unit(rng)); };

  const Grid& grid = market.grid();
  const std::size_t cells = grid.cells();
  const std::size_t n = market.insurers();
  SampledDeviation out{enabled[pick(enabled.size())], {}};

  const std::size_t forced = pick(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& base = strategy.prices.nu[i][j].values();
    std::vector<double> v(base.begin(), base.end());
    if (i != forced && unit(rng) < 0.25) {
      out.curves.emplace_back(std::move(v));
      continue;
    }
    // Bands are mostly short: the extremal deviations are local.
    auto band = [&] {
      const std::size_t a = pick(cells);
      const double u = unit(rng);
      const std::size_t len = std::max<std::size_t>(1, static_cast<std::size_t>(u * u * u * 0.3 * cells));
      return std::pair{a, std::min(cells, a + len)};
    };
    switch (out.family) {
      case family_bump: {
        auto [a, b] = band();
        const bool up = unit(rng) < 0.5;
        const double delta = log_uniform(-6.0, -0.3);
        const bool additive = unit(rng) < 0.5;
        const double level = base[a];
        for (std::size_t k = a; k < b; ++k) {
          const double step = additive ? delta * level : delta * base[k];
          v[k] = up ? base[k] + step : base[k] - step;
        }
        detail::clamp_nonnegative(v);
        if (up) detail::project_up(v);
        else detail::project_down(v);
        break;
      }
      case family_scale: {
        const double mag = log_uniform(-6.0, -0.3);
        const double s = unit(rng) < 0.5 ? 1.0 + mag : 1.0 / (1.0 + mag);
        for (double& x : v) x *= s;
        break;
      }
      case family_swap: {
        // A rival's quote or any true preference, possibly merged with the current quote.
        std::vector<const SurvivalCurve*> pool;
        for (std::size_t o = 0; o <= market.reinsurers(); ++o) pool.push_back(&market.preference(i, o));
        for (std::size_t r = 0; r < market.reinsurers(); ++r)
          if (r != j) pool.push_back(&strategy.prices.nu[i][r]);
        const auto& other = *pool[pick(pool.size())];
        const double mode = unit(rng);
        for (std::size_t k = 0; k < v.size(); ++k) {
          if (mode < 0.4) v[k] = other[k];
          else if (mode < 0.7) v[k] = std::min(base[k], other[k]);
          else v[k] = std::max(base[k], other[k]);
        }
        break;
      }
      case family_undercut: {
        const double delta = log_uniform(-6.0, -1.0);
        const bool local = unit(rng) < 0.7;
        const bool floor_at_cost = unit(rng) < 0.3;
        const auto& cost = market.preference(i, option_of(j));
        auto [a, b] = local ? band() : std::pair<std::size_t, std::size_t>{0, cells + 1};
        for (std::size_t k = a; k < std::min(b, v.size()); ++k) {
          v[k] = base[k] - delta;
          if (floor_at_cost) v[k] = std::max(v[k], std::min(cost[k], base[k]));
        }
        detail::clamp_nonnegative(v);
        detail::project_down(v);
        break;
      }
      default: break;
    }
    out.curves.emplace_back(std::move(v));
  }
  return out;
}

/// Sweeps `options.samples` seeded deviations of reinsurer j. Insurers whose
/// quote is unchanged on a cell keep their equilibrium decision there, so only
/// changed cells are re-decided.
inline DeviationVerdict verify_no_deviation(const MarketSpec& market, const SpneStrategy& strategy, std::size_t j,
                                            const DeviationOptions& options = {}) {
  require_supported_regime(market);
  if (j >= market.reinsurers()) throw StructuralError("reinsurer index out of range");
  validate(strategy.prices, market);
  const Grid& grid = market.grid();
  const std::size_t n = market.insurers();
  const std::size_t cells = grid.cells();

  // Equilibrium contribution of each cell to reinsurer j's risk.
  std::vector<std::vector<double>> base(n, std::vector<double>(cells, 0.0));
  {
    detail::CellView view(market);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tau = market.preference(i, option_of(j));
      const auto& nu = strategy.prices.nu[i][j];
      for (std::size_t k = 0; k < cells; ++k) {
        view.load(market, strategy.prices, i, k);
        const auto d = decide_cell(view.prices, view.tau, grid.eps_eq(), TieRule::generous);
        if (d.option == option_of(j)) base[i][k] = (tau[k] - nu[k]) * grid.width(k);
      }
    }
  }
  double eq_risk = 0.0;
  for (const auto& row : base)
    for (double c : row) eq_risk += c;

  struct Outcome {
    double risk;
    DeviationFamily family;
  };
  std::vector<Outcome> outcomes(options.samples);

  auto run = [&](std::size_t begin, std::size_t end) {
    detail::CellView view(market);
    for (std::size_t s = begin; s < end; ++s) {
      const auto dev = sample_deviation(market, strategy, j, options, s);
      double risk = eq_risk;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& nu = strategy.prices.nu[i][j];
        const auto& tau = market.preference(i, option_of(j));
        const auto& alt = dev.curves[i];
        for (std::size_t k = 0; k < cells; ++k) {
          if (alt[k] == nu[k]) continue;
          view.load(market, strategy.prices, i, k);
          view.prices[j] = alt[k];
          const auto d = decide_cell(view.prices, view.tau, grid.eps_eq(), TieRule::generous);
          const double c = d.option == option_of(j) ? (tau[k] - alt[k]) * grid.width(k) : 0.0;
          risk += c - base[i][k];
        }
      }
      outcomes[s] = {risk, dev.family};
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, options.samples / 64)));
  if (threads <= 1) {
    run(0, options.samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (options.samples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(options.samples, t * chunk);
      const std::size_t e = std::min(options.samples, b + chunk);
      pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }

  DeviationVerdict v;
  v.reinsurer = j;
  v.samples = options.samples;
  v.equilibrium_risk = eq_risk;
  v.best_deviation_risk = eq_risk;
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    const double improvement = eq_risk - outcomes[s].risk;
    if (s == 0 || improvement > v.worst_improvement) {
      v.worst_improvement = improvement;
      v.best_deviation_risk = outcomes[s].risk;
      v.worst_sample = s;
      v.worst_family = family_name(outcomes[s].family);
    }
  }
  v.passed = v.worst_improvement <= options.eps_num;
  return v;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct InsurerOutcome {
  std::string name;
  double initial_risk = 0.0;
  std::vector<double> premium;  ///< per reinsurer
  double premium_total = 0.0;
  double post_transfer_risk = 0.0;
  double welfare_gain = 0.0;
};

struct ReinsurerOutcome {
  std::string name;
  double post_transfer_risk = 0.0;
  double welfare_gain = 0.0;
};

struct EquilibriumReport {
  Dependence regime = Dependence::risk_neutral_reinsurers;
  std::vector<InsurerOutcome> insurers;
  std::vector<ReinsurerOutcome> reinsurers;
  bool individually_rational = false;
  bool pareto_optimal = false;
  std::optional<bool> deviation_check_passed;
  double aggregate_risk = 0.0;
};

/// Allocation induced by a strategy: premia are integral nu*_ij gamma*_ij.
inline Allocation induced_allocation(const MarketSpec& market, const SpneStrategy& strategy) {
  Allocation a{strategy.responses, {}};
  a.premia.assign(market.insurers(), std::vector<double>(market.reinsurers(), 0.0));
  for (std::size_t i = 0; i < market.insurers(); ++i)
    for (std::size_t j = 0; j < market.reinsurers(); ++j)
      a.premia[i][j] = premium(market, strategy.prices.nu[i][j], strategy.responses.rows[i][j]);
  return a;
}

inline EquilibriumReport build_report(const MarketSpec& market, const SpneStrategy& strategy,
                                      double eps_num = kDefaultPayoffTolerance) {
  require_supported_regime(market);
  EquilibriumReport r;
  r.regime = market.dependence();
  const Allocation alloc = induced_allocation(market, strategy);
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    InsurerOutcome o;
    o.name = market.insurer(i).name;
    o.initial_risk = market.initial_risk(i);
    o.premium = alloc.premia[i];
    for (double p : o.premium) o.premium_total += p;
    o.post_transfer_risk = insurer_risk(market, strategy.prices, strategy.responses.rows[i], i);
    o.welfare_gain = o.initial_risk - o.post_transfer_risk;
    r.insurers.push_back(std::move(o));
  }
  for (std::size_t j = 0; j < market.reinsurers(); ++j) {
    ReinsurerOutcome o;
    o.name = market.reinsurer(j).name;
    o.post_transfer_risk = reinsurer_risk(market, strategy, j);
    o.welfare_gain = -o.post_transfer_risk;
    r.reinsurers.push_back(std::move(o));
  }
  const PoCertificate cert = check_po(market, alloc, eps_num);
  r.individually_rational = cert.ir.holds(eps_num);
  r.pareto_optimal = cert.pareto_optimal;
  r.aggregate_risk = cert.aggregate_risk;
  return r;
}

struct StackelbergSolution {
  SpneStrategy strategy;
  EquilibriumReport report;
};

/// The leader quotes tau_bar_i = max(alpha_i, tau_{i,1}); insurers stay
/// indifferent and the leader keeps the whole surplus. With a single quoter
/// the two-quoter clause fails wherever the insurer strictly prefers to
/// retain; those cells see no trade and the log records the failure.
inline StackelbergSolution solve_stackelberg(const MarketSpec& market) {
  if (market.reinsurers() != 1)
    throw ValidationError("reinsurer", "the Stackelberg model needs exactly one reinsurer");
  StackelbergSolution s{construct_spne(market), {}};
  s.report = build_report(market, s.strategy);
  return s;
}

}  // namespace reinsure

#endif  // REINSURE_EQUILIBRIUM_HPP
