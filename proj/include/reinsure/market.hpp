#ifndef REINSURE_MARKET_HPP
#define REINSURE_MARKET_HPP

// Market data model: n insurers facing bounded losses, m reinsurers quoting
// Choquet premium principles, admissible indemnity structures expressed through
// their marginal indemnifications, and premia.
//
// Option indices follow the usual convention: option 0 is retention by the
// insurer, option j + 1 is reinsurer j (reinsurers are 0-based in containers).

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reinsure/curves.hpp"
#include "reinsure/errors.hpp"

namespace reinsure {

enum class Dependence { risk_neutral_reinsurers, comonotone_losses, general };

inline const char* to_string(Dependence d) {
  switch (d) {
    case Dependence::risk_neutral_reinsurers: return "risk-neutral-reinsurers";
    case Dependence::comonotone_losses: return "comonotone-losses";
    case Dependence::general: return "general";
  }
  return "general";
}

inline bool is_supported(Dependence d) { return d != Dependence::general; }

inline constexpr std::size_t option_of(std::size_t reinsurer) { return reinsurer + 1; }

struct InsurerSpec {
  std::string name;
  LossModel loss;           ///< X_i
  Distortion preference;    ///< alpha_i = T_i o P
};

struct ReinsurerSpec {
  std::string name;
  /// Beliefs about each insurer's loss: empty = the insurer's own loss model,
  /// one entry = shared across insurers, n entries = one per insurer.
  std::vector<LossModel> beliefs;
  /// Risk attitude applied on top of the beliefs; identity for a risk-neutral
  /// reinsurer whose tau_j is a probability measure.
  Distortion attitude = Distortion::identity();
  double loading = 0.0;     ///< theta_j
  bool risk_neutral = true;
};

struct MarketOptions {
  double upper_bound = 0.0;                  ///< M
  std::size_t grid_cells = kDefaultGridCells;
  Dependence dependence = Dependence::risk_neutral_reinsurers;
  double eps_eq = kDefaultEqualityTolerance;
  double eps_ref = kDefaultRefinementTolerance;
};

/// Immutable, validated market with its crossing-refined grid and the true
/// preference curves tau_{i,0} = alpha_i, tau_{i,j} = (1 + theta_j) tau_j(X_i > .)
/// sampled on that grid.
class MarketSpec {
 public:
  MarketSpec(std::vector<InsurerSpec> insurers, std::vector<ReinsurerSpec> reinsurers,
             MarketOptions options)
      : insurers_(std::move(insurers)), reinsurers_(std::move(reinsurers)),
        options_(options), grid_(Grid::uniform(1.0, 1)) {
    validate();
    build_models();
    Grid base = Grid::uniform(options_.upper_bound, options_.grid_cells, options_.eps_eq,
                              options_.eps_ref);
    std::vector<double> points;
    for (const auto& row : models_) {
      auto found = crossing_points(row, base);
      points.insert(points.end(), found.begin(), found.end());
    }
    grid_ = base.with_nodes(points);
    sample_curves();
  }

  std::size_t insurers() const noexcept { return insurers_.size(); }
  std::size_t reinsurers() const noexcept { return reinsurers_.size(); }
  const InsurerSpec& insurer(std::size_t i) const { return insurers_.at(i); }
  const ReinsurerSpec& reinsurer(std::size_t j) const { return reinsurers_.at(j); }
  const MarketOptions& options() const noexcept { return options_; }
  Dependence dependence() const noexcept { return options_.dependence; }
  const Grid& grid() const noexcept { return grid_; }
  double upper_bound() const noexcept { return options_.upper_bound; }

  /// Analytic model of tau_{i,k} (k = 0 is alpha_i).
  const TailCurve& model(std::size_t i, std::size_t option) const { return models_.at(i).at(option); }

  /// tau_{i,k} on the refined grid (k = 0 is alpha_i).
  const SurvivalCurve& preference(std::size_t i, std::size_t option) const {
    return curves_.at(i).at(option);
  }
  const SurvivalCurve& alpha(std::size_t i) const { return preference(i, 0); }
  const SurvivalCurve& second_lowest(std::size_t i) const { return second_lowest_.at(i); }

  /// rho_i(X_i) = integral of alpha_i.
  double initial_risk(std::size_t i) const { return initial_risk_.at(i); }

  /// Insurers whose second-lowest true preference is not monotone.
  std::vector<std::size_t> nonmonotone_second_lowest() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < insurers(); ++i)
      if (!second_lowest_[i].is_nonincreasing(grid_.eps_eq())) out.push_back(i);
    return out;
  }

 private:
  void validate() const {
    if (insurers_.empty()) throw ValidationError("insurer", "market needs at least one insurer");
    if (reinsurers_.empty()) throw ValidationError("reinsurer", "market needs at least one reinsurer");
    const double M = options_.upper_bound;
    if (!std::isfinite(M) || M <= 0.0) throw ValidationError("market.M", "must be finite and > 0");
    if (options_.grid_cells == 0) throw ValidationError("market.grid_cells", "must be >= 1");
    for (std::size_t i = 0; i < insurers_.size(); ++i) {
      if (insurers_[i].loss.support_end() > M * (1.0 + 1e-12))
        throw ValidationError("insurer[" + std::to_string(i) + "].dist",
                              "loss exceeds the market bound M");
    }
    for (std::size_t j = 0; j < reinsurers_.size(); ++j) {
      const auto& r = reinsurers_[j];
      const std::string path = "reinsurer[" + std::to_string(j) + "]";
      if (!(r.loading > 0.0) || !std::isfinite(r.loading))
        throw ValidationError(path + ".loading", "theta must be > 0");
      const std::size_t nb = r.beliefs.size();
      if (nb != 0 && nb != 1 && nb != insurers_.size())
        throw ValidationError(path + ".belief", "need 0, 1 or n belief curves");
      if (r.risk_neutral && !r.attitude.is_identity())
        throw ValidationError(path + ".risk", "a risk-neutral reinsurer must use the identity distortion");
      if (options_.dependence == Dependence::risk_neutral_reinsurers && !r.risk_neutral)
        throw ValidationError(path + ".risk_neutral",
                              "dependence 'risk-neutral-reinsurers' requires risk_neutral = true");
      for (std::size_t b = 0; b < nb; ++b) {
        if (r.beliefs[b].support_end() > M * (1.0 + 1e-12))
          throw ValidationError(path + ".belief", "belief support exceeds the market bound M");
      }
    }
  }

  const LossModel& belief(std::size_t j, std::size_t i) const {
    const auto& r = reinsurers_[j];
    if (r.beliefs.empty()) return insurers_[i].loss;
    return r.beliefs.size() == 1 ? r.beliefs.front() : r.beliefs[i];
  }

  void build_models() {
    models_.clear();
    for (std::size_t i = 0; i < insurers_.size(); ++i) {
      std::vector<TailCurve> row;
      row.emplace_back(insurers_[i].loss, insurers_[i].preference, 1.0,
                       "alpha_" + std::to_string(i + 1));
      for (std::size_t j = 0; j < reinsurers_.size(); ++j) {
        row.emplace_back(belief(j, i), reinsurers_[j].attitude, 1.0 + reinsurers_[j].loading,
                         "tau_" + std::to_string(i + 1) + "," + std::to_string(j + 1));
      }
      models_.push_back(std::move(row));
    }
  }

  void sample_curves();

  std::vector<InsurerSpec> insurers_;
  std::vector<ReinsurerSpec> reinsurers_;
  MarketOptions options_;
  Grid grid_;
  std::vector<std::vector<TailCurve>> models_;
  std::vector<std::vector<SurvivalCurve>> curves_;
  std::vector<SurvivalCurve> second_lowest_;
  std::vector<double> initial_risk_;
};

/// [tau_{i,0}, (1 + theta_1) tau_1, ..., (1 + theta_m) tau_m] from already
/// sampled curves.
inline std::vector<SurvivalCurve> assemble_true_preferences(const SurvivalCurve& alpha,
                                                            std::span<const SurvivalCurve> beliefs,
                                                            std::span<const double> loadings) {
  if (beliefs.size() != loadings.size())
    throw StructuralError("beliefs and loadings differ in length");
  std::vector<SurvivalCurve> out;
  out.reserve(beliefs.size() + 1);
  out.push_back(alpha);
  for (std::size_t j = 0; j < beliefs.size(); ++j) out.push_back(scale(beliefs[j], 1.0 + loadings[j]));
  return out;
}

inline void MarketSpec::sample_curves() {
  curves_.clear();
  second_lowest_.clear();
  initial_risk_.clear();
  for (std::size_t i = 0; i < insurers_.size(); ++i) {
    std::vector<SurvivalCurve> row;
    for (const auto& m : models_[i]) {
      row.push_back(m.sample(grid_));
      if (!row.back().is_nonincreasing(grid_.eps_eq()))
        throw NumericalError("sampled curve '" + m.label() + "' is not nonincreasing");
    }
    second_lowest_.push_back(kth_lowest(row, 1, grid_));
    second_lowest_.back().set_label("tau_bar_" + std::to_string(i + 1));
    initial_risk_.push_back(choquet_integral(row.front(), grid_));
    curves_.push_back(std::move(row));
  }
}

inline std::vector<SurvivalCurve> true_preferences(const MarketSpec& market, std::size_t i) {
  std::vector<SurvivalCurve> out;
  for (std::size_t k = 0; k <= market.reinsurers(); ++k) out.push_back(market.preference(i, k));
  return out;
}

/// Pointwise second-lowest of the true preferences of insurer i.
inline const SurvivalCurve& second_lowest_preference(const MarketSpec& market, std::size_t i) {
  return market.second_lowest(i);
}

// ---------------------------------------------------------------------------
// Indemnities and allocations
// ---------------------------------------------------------------------------

/// gamma_ij for one insurer: outer index reinsurer j, inner index grid cell.
using MarginalRow = std::vector<std::vector<double>>;

struct MarginalIndemnityMatrix {
  std::vector<MarginalRow> rows;  ///< rows[i][j][cell]

  static MarginalIndemnityMatrix zeros(std::size_t n, std::size_t m, const Grid& grid) {
    return {std::vector<MarginalRow>(n, MarginalRow(m, std::vector<double>(grid.cells(), 0.0)))};
  }

  std::size_t insurers() const noexcept { return rows.size(); }
  std::size_t reinsurers() const noexcept { return rows.empty() ? 0 : rows.front().size(); }

  /// gamma_{i0} = 1 - sum_j gamma_ij on one cell.
  double retained(std::size_t i, std::size_t cell) const {
    double s = 0.0;
    for (const auto& g : rows[i]) s += g[cell];
    return 1.0 - s;
  }
};

/// Throws unless 0 <= gamma <= 1 and sum_j gamma <= 1 on every cell (within eps).
inline void validate_row(const MarginalRow& row, const Grid& grid, double eps, const std::string& path) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j].size() != grid.cells())
      throw StructuralError(path + "[" + std::to_string(j) + "] has the wrong number of cells");
  }
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double g = row[j][k];
      if (!(g >= -eps && g <= 1.0 + eps))
        throw ValidationError(path + "[" + std::to_string(j) + "]", "marginal indemnity outside [0,1] at cell " +
                                                                        std::to_string(k));
      total += g;
    }
    if (total > 1.0 + eps)
      throw ValidationError(path, "marginal indemnities sum above 1 at cell " + std::to_string(k));
  }
}

inline void validate(const MarginalIndemnityMatrix& gamma, const Grid& grid, double eps) {
  for (std::size_t i = 0; i < gamma.rows.size(); ++i)
    validate_row(gamma.rows[i], grid, eps, "gamma[" + std::to_string(i) + "]");
}

/// I(x) = integral_0^x gamma(z) dz for a cellwise-constant gamma.
inline double indemnity_from_marginal(std::span<const double> gamma, const Grid& grid, double x) {
  if (gamma.size() != grid.cells()) throw StructuralError("gamma does not match the grid");
  if (!(x >= 0.0 && x <= grid.upper_bound()))
    throw ValidationError("x", "loss value outside [0, M]");
  double total = 0.0;
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    const double a = grid.node(k);
    if (a >= x) break;
    const double b = std::min(grid.node(k + 1), x);
    total += gamma[k] * (b - a);
  }
  return total;
}

/// I at every grid node.
inline std::vector<double> indemnity_at_nodes(std::span<const double> gamma, const Grid& grid) {
  if (gamma.size() != grid.cells()) throw StructuralError("gamma does not match the grid");
  std::vector<double> out(grid.cells() + 1, 0.0);
  for (std::size_t k = 0; k < grid.cells(); ++k) out[k + 1] = out[k] + gamma[k] * grid.width(k);
  return out;
}

struct PricingMatrix {
  std::vector<std::vector<SurvivalCurve>> nu;  ///< nu[i][j]

  std::size_t insurers() const noexcept { return nu.size(); }
  std::size_t reinsurers() const noexcept { return nu.empty() ? 0 : nu.front().size(); }
};

inline void validate(const PricingMatrix& prices, const MarketSpec& market) {
  if (prices.nu.size() != market.insurers())
    throw StructuralError("pricing matrix has the wrong number of insurers");
  for (std::size_t i = 0; i < prices.nu.size(); ++i) {
    if (prices.nu[i].size() != market.reinsurers())
      throw StructuralError("pricing matrix has the wrong number of reinsurers");
    for (std::size_t j = 0; j < prices.nu[i].size(); ++j) {
      require_on_grid(prices.nu[i][j], market.grid());
      if (!prices.nu[i][j].is_nonincreasing(market.grid().eps_eq()))
        throw ValidationError("nu[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                              "pricing capacity must be nonincreasing");
    }
  }
}

struct Allocation {
  MarginalIndemnityMatrix indemnities;
  std::vector<std::vector<double>> premia;  ///< premia[i][j]
};

// ---------------------------------------------------------------------------
// Incremental purchases
// ---------------------------------------------------------------------------

using IndemnityFunction = std::function<double(double)>;

/// Piecewise-linear function through (x_k, y_k); linear interpolation inside,
/// clamped outside.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size() || x_.empty()) throw StructuralError("knot arrays differ in length");
  }

  double operator()(double v) const {
    if (v <= x_.front()) return y_.front();
    if (v >= x_.back()) return y_.back();
    auto it = std::upper_bound(x_.begin(), x_.end(), v);
    std::size_t k = static_cast<std::size_t>(it - x_.begin());
    const double w = (v - x_[k - 1]) / (x_[k] - x_[k - 1]);
    return y_[k - 1] + w * (y_[k] - y_[k - 1]);
  }

  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> y() const noexcept { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Checks f(0) = 0 and node-to-node slopes in [0, 1 + eps] on the grid.
inline bool is_admissible_on_grid(const IndemnityFunction& f, const Grid& grid, double eps) {
  if (std::abs(f(0.0)) > eps) return false;
  double prev = f(0.0);
  for (std::size_t k = 1; k <= grid.cells(); ++k) {
    const double cur = f(grid.node(k));
    const double slope = (cur - prev) / grid.width(k - 1);
    if (slope < -eps || slope > 1.0 + eps) return false;
    prev = cur;
  }
  return true;
}

/// Contracts bought one after another on the retained risk, rewritten as
/// functions of the original loss: I~_j(x) = I_j(R_{j-1}(x)) with R_0 = x and
/// R_j = R_{j-1} - I_j(R_{j-1}). The result is exact at the grid nodes and
/// linear in between.
inline std::vector<PiecewiseLinear> flatten_incremental(std::span<const IndemnityFunction> contracts,
                                                        const Grid& grid) {
  const double eps = grid.eps_eq();
  for (std::size_t j = 0; j < contracts.size(); ++j) {
    if (!is_admissible_on_grid(contracts[j], grid, eps))
      throw ValidationError("contracts[" + std::to_string(j) + "]",
                            "must fix 0, be nondecreasing and 1-Lipschitz");
  }
  std::vector<double> x(grid.nodes().begin(), grid.nodes().end());
  std::vector<double> retained = x;
  std::vector<PiecewiseLinear> out;
  out.reserve(contracts.size());
  for (const auto& contract : contracts) {
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      y[k] = contract(retained[k]);
      retained[k] -= y[k];
    }
    out.emplace_back(x, std::move(y));
  }
  return out;
}

}  // namespace reinsure

#endif  // REINSURE_MARKET_HPP
