#ifndef REINSURE_CURVES_HPP
#define REINSURE_CURVES_HPP

// Survival-curve algebra on a cell grid over [0, M].
//
// Every capacity in the model is only ever evaluated along the tail events
// {X > z} of a bounded loss, so it is carried around as a nonincreasing
// function of z. On a grid z_0 = 0 < ... < z_K = M a curve stores one value per
// cell (the value on [z_k, z_{k+1})) plus the value at M. With that
// representation the Choquet integral of a nonnegative bounded loss is a
// finite sum, and "for almost every z" statements are decided cell by cell.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "reinsure/errors.hpp"

namespace reinsure {

inline constexpr double kDefaultEqualityTolerance = 1e-9;
inline constexpr double kDefaultRefinementTolerance = 1e-12;
inline constexpr std::size_t kDefaultGridCells = 20000;

/// Relative-or-absolute tie test used for every curve-value comparison.
inline bool nearly_equal(double a, double b, double eps) {
  return std::abs(a - b) <= eps * std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

class Grid {
 public:
  Grid(std::vector<double> nodes, double eps_eq = kDefaultEqualityTolerance,
       double eps_ref = kDefaultRefinementTolerance)
      : nodes_(std::move(nodes)), eps_eq_(eps_eq), eps_ref_(eps_ref) {
    if (nodes_.size() < 2) throw ValidationError("grid.nodes", "need at least one cell");
    if (nodes_.front() != 0.0) throw ValidationError("grid.nodes", "first node must be 0");
    if (!std::isfinite(nodes_.back()) || nodes_.back() <= 0.0)
      throw ValidationError("grid.upper_bound", "M must be finite and > 0");
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      if (!(nodes_[k] > nodes_[k - 1]))
        throw ValidationError("grid.nodes", "nodes must be strictly increasing");
    }
    if (!(eps_eq_ > 0.0)) throw ValidationError("grid.eps_eq", "must be > 0");
    if (!(eps_ref_ > 0.0)) throw ValidationError("grid.eps_ref", "must be > 0");
  }

  static Grid uniform(double upper_bound, std::size_t cells,
                      double eps_eq = kDefaultEqualityTolerance,
                      double eps_ref = kDefaultRefinementTolerance) {
    if (!std::isfinite(upper_bound) || upper_bound <= 0.0)
      throw ValidationError("grid.upper_bound", "M must be finite and > 0");
    if (cells == 0) throw ValidationError("grid.cells", "must be >= 1");
    std::vector<double> nodes(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k)
      nodes[k] = upper_bound * static_cast<double>(k) / static_cast<double>(cells);
    nodes.back() = upper_bound;
    return Grid(std::move(nodes), eps_eq, eps_ref);
  }

  double upper_bound() const noexcept { return nodes_.back(); }
  std::size_t cells() const noexcept { return nodes_.size() - 1; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  double node(std::size_t k) const { return nodes_[k]; }
  double width(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
  double eps_eq() const noexcept { return eps_eq_; }
  double eps_ref() const noexcept { return eps_ref_; }

  /// Smallest distance at which an inserted point is kept as a separate node.
  double min_gap() const noexcept { return 2.0 * eps_ref_ * std::max(1.0, upper_bound()); }

  /// Index of the cell [z_k, z_{k+1}) containing z; z = M maps to the last cell.
  std::size_t locate(double z) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), z);
    std::size_t k = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return std::min(k, cells() - 1);
  }

  /// Grid with the given points merged in. Points outside (0, M) or closer
  /// than min_gap() to an existing node are dropped.
  Grid with_nodes(std::span<const double> extra) const {
    std::vector<double> pts(extra.begin(), extra.end());
    std::sort(pts.begin(), pts.end());
    std::vector<double> merged;
    merged.reserve(nodes_.size() + pts.size());
    const double gap = min_gap();
    std::size_t p = 0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      while (p < pts.size() && pts[p] < nodes_[k]) {
        double z = pts[p++];
        if (z <= 0.0 || z >= upper_bound()) continue;
        if (z - merged.back() <= gap || nodes_[k] - z <= gap) continue;
        merged.push_back(z);
      }
      merged.push_back(nodes_[k]);
    }
    return Grid(std::move(merged), eps_eq_, eps_ref_);
  }

  bool operator==(const Grid& other) const = default;

 private:
  std::vector<double> nodes_;
  double eps_eq_;
  double eps_ref_;
};

// ---------------------------------------------------------------------------
// SurvivalCurve
// ---------------------------------------------------------------------------

/// Cell values of a capacity along tail events. values()[k] for k < K is the
/// value on [z_k, z_{k+1}); values()[K] is the value at M.
class SurvivalCurve {
 public:
  SurvivalCurve() = default;
  explicit SurvivalCurve(std::vector<double> values, std::string label = {})
      : values_(std::move(values)), label_(std::move(label)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError(label_, "curve values must be finite");
      if (v < 0.0) throw ValidationError(label_, "curve values must be >= 0");
    }
  }

  static SurvivalCurve constant(const Grid& grid, double value, std::string label = {}) {
    return SurvivalCurve(std::vector<double>(grid.cells() + 1, value), std::move(label));
  }

  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::string& label() const noexcept { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  bool matches(const Grid& grid) const noexcept { return values_.size() == grid.cells() + 1; }

  bool is_nonincreasing(double eps) const {
    for (std::size_t k = 1; k < values_.size(); ++k) {
      if (values_[k] > values_[k - 1] && !nearly_equal(values_[k], values_[k - 1], eps))
        return false;
    }
    return true;
  }

 private:
  std::vector<double> values_;
  std::string label_;
};

inline void require_on_grid(const SurvivalCurve& curve, const Grid& grid) {
  if (!curve.matches(grid)) {
    throw StructuralError("curve '" + curve.label() + "' has " + std::to_string(curve.size()) +
                          " values, grid needs " + std::to_string(grid.cells() + 1));
  }
}

/// Choquet integral of a nonnegative bounded loss: sum of cell value times
/// cell width. Exact for cellwise-constant curves.
inline double choquet_integral(const SurvivalCurve& curve, const Grid& grid) {
  require_on_grid(curve, grid);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.cells(); ++k) total += curve[k] * grid.width(k);
  return total;
}

/// Integral of curve * weight, where `weight` has one entry per cell.
inline double weighted_integral(const SurvivalCurve& curve, std::span<const double> weight,
                                const Grid& grid) {
  require_on_grid(curve, grid);
  if (weight.size() != grid.cells())
    throw StructuralError("weight has " + std::to_string(weight.size()) + " cells, grid has " +
                          std::to_string(grid.cells()));
  double total = 0.0;
  for (std::size_t k = 0; k < grid.cells(); ++k) total += curve[k] * weight[k] * grid.width(k);
  return total;
}

inline SurvivalCurve scale(const SurvivalCurve& curve, double factor) {
  if (!(factor >= 0.0) || !std::isfinite(factor))
    throw ValidationError("scale", "factor must be finite and >= 0");
  std::vector<double> out(curve.values().begin(), curve.values().end());
  for (double& v : out) v *= factor;
  return SurvivalCurve(std::move(out), curve.label());
}

/// Pointwise k-th order statistic (k = 0 lowest, k = 1 second-lowest).
inline SurvivalCurve kth_lowest(std::span<const SurvivalCurve> curves, std::size_t k,
                                const Grid& grid) {
  if (curves.empty()) throw ValidationError("kth_lowest.curves", "list is empty");
  if (k >= curves.size())
    throw ValidationError("kth_lowest.k", "index " + std::to_string(k) + " out of range for " +
                                              std::to_string(curves.size()) + " curves");
  for (const auto& c : curves) require_on_grid(c, grid);
  std::vector<double> column(curves.size());
  std::vector<double> out(grid.cells() + 1);
  for (std::size_t cell = 0; cell < out.size(); ++cell) {
    for (std::size_t c = 0; c < curves.size(); ++c) column[c] = curves[c][cell];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(k), column.end());
    out[cell] = column[k];
  }
  return SurvivalCurve(std::move(out), k == 0 ? "lowest" : "order-" + std::to_string(k));
}

// ---------------------------------------------------------------------------
// Distortions
// ---------------------------------------------------------------------------

/// Nondecreasing T: [0,1] -> [0,1] with T(0) = 0 and T(1) = 1, piecewise affine
/// (with a jump for value-at-risk).
class Distortion {
 public:
  enum class Kind { identity, expected_shortfall, value_at_risk, table };

  static Distortion identity() { return Distortion(Kind::identity, 1.0, {}, {}); }

  /// T(t) = min{t / level, 1}.
  static Distortion expected_shortfall(double level) {
    check_level(level, "level");
    return Distortion(Kind::expected_shortfall, level, {}, {});
  }

  /// T(t) = 1{t > level}. Not concave.
  static Distortion value_at_risk(double level) {
    check_level(level, "level");
    return Distortion(Kind::value_at_risk, level, {}, {});
  }

  /// Concave piecewise-linear T through (t_k, T_k), t from 0 to 1.
  static Distortion table(std::vector<double> t, std::vector<double> values) {
    if (t.size() != values.size() || t.size() < 2)
      throw ValidationError("value", "need matching t/value arrays with at least two points");
    if (t.front() != 0.0 || t.back() != 1.0) throw ValidationError("t", "must run from 0 to 1");
    if (values.front() != 0.0 || values.back() != 1.0)
      throw ValidationError("value", "must run from 0 to 1");
    double previous_slope = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (!(t[k] > t[k - 1])) throw ValidationError("t", "must be strictly increasing");
      if (values[k] < values[k - 1]) throw ValidationError("value", "must be nondecreasing");
      double slope = (values[k] - values[k - 1]) / (t[k] - t[k - 1]);
      if (slope > previous_slope + 1e-12) throw ValidationError("value", "must be concave");
      previous_slope = slope;
    }
    return Distortion(Kind::table, 1.0, std::move(t), std::move(values));
  }

  Kind kind() const noexcept { return kind_; }
  double level() const noexcept { return level_; }
  bool is_identity() const noexcept { return kind_ == Kind::identity; }
  bool is_concave() const noexcept { return kind_ != Kind::value_at_risk; }

  double operator()(double t) const {
    auto [c0, c1] = affine_at(t);
    return c0 + c1 * t;
  }

  /// Probabilities in (0, 1) where T is not affine.
  std::vector<double> breakpoints() const {
    switch (kind_) {
      case Kind::expected_shortfall:
      case Kind::value_at_risk:
        return {level_};
      case Kind::table:
        return std::vector<double>(t_.begin() + 1, t_.end() - 1);
      case Kind::identity:
        break;
    }
    return {};
  }

  /// Coefficients (c0, c1) with T(s) = c0 + c1 s on the affine piece containing t.
  std::pair<double, double> affine_at(double t) const {
    switch (kind_) {
      case Kind::identity:
        return {0.0, 1.0};
      case Kind::expected_shortfall:
        return t < level_ ? std::pair{0.0, 1.0 / level_} : std::pair{1.0, 0.0};
      case Kind::value_at_risk:
        return t > level_ ? std::pair{1.0, 0.0} : std::pair{0.0, 0.0};
      case Kind::table: {
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        std::size_t k = it == t_.begin() ? 1 : static_cast<std::size_t>(it - t_.begin());
        k = std::clamp<std::size_t>(k, 1, t_.size() - 1);
        double slope = (values_[k] - values_[k - 1]) / (t_[k] - t_[k - 1]);
        return {values_[k - 1] - slope * t_[k - 1], slope};
      }
    }
    return {0.0, 1.0};
  }

  const std::vector<double>& table_t() const noexcept { return t_; }
  const std::vector<double>& table_values() const noexcept { return values_; }

 private:
  Distortion(Kind kind, double level, std::vector<double> t, std::vector<double> values)
      : kind_(kind), level_(level), t_(std::move(t)), values_(std::move(values)) {}

  static void check_level(double level, const char* field) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError(field, "level must lie in (0,1)");
  }

  Kind kind_;
  double level_;
  std::vector<double> t_;
  std::vector<double> values_;
};

/// Pointwise T applied to raw curve values.
inline SurvivalCurve distort(const SurvivalCurve& base, const Distortion& d) {
  std::vector<double> out(base.values().begin(), base.values().end());
  for (double& v : out) v = d(v);
  return SurvivalCurve(std::move(out), base.label());
}

// ---------------------------------------------------------------------------
// Loss models
// ---------------------------------------------------------------------------

/// X = min(Y, cap) with Y ~ Exp(rate): P(X > z) = e^{-rate z} on [0, cap), 0 after.
struct CensoredExponential {
  double rate;
  double cap;
};

/// Survival function linear between knots; X <= z.back() almost surely, so
/// the survival drops to 0 at the last knot (an atom there when s.back() > 0).
struct TabulatedSurvival {
  std::vector<double> z;
  std::vector<double> s;
};

class LossModel {
 public:
  using Form = std::variant<CensoredExponential, TabulatedSurvival>;

  explicit LossModel(CensoredExponential f) : form_(f) {
    if (!(f.rate > 0.0) || !std::isfinite(f.rate)) throw ValidationError("rate", "must be > 0");
    if (!(f.cap > 0.0) || !std::isfinite(f.cap)) throw ValidationError("cap", "must be > 0");
  }

  explicit LossModel(TabulatedSurvival f) : form_(std::move(f)) {
    const auto& t = std::get<TabulatedSurvival>(form_);
    if (t.z.size() != t.s.size() || t.z.size() < 2)
      throw ValidationError("s", "need matching z/s arrays with at least two knots");
    if (t.z.front() != 0.0) throw ValidationError("z", "first knot must be 0");
    for (std::size_t k = 0; k < t.z.size(); ++k) {
      if (!(t.s[k] >= 0.0 && t.s[k] <= 1.0))
        throw ValidationError("s", "values must lie in [0,1]");
      if (k > 0 && !(t.z[k] > t.z[k - 1]))
        throw ValidationError("z", "knots must be strictly increasing");
      if (k > 0 && t.s[k] > t.s[k - 1])
        throw ValidationError("s", "values must be nonincreasing");
    }
  }

  static LossModel censored_exponential(double rate, double cap) {
    return LossModel(CensoredExponential{rate, cap});
  }

  const Form& form() const noexcept { return form_; }

  /// Essential supremum of the loss.
  double support_end() const {
    if (auto* e = std::get_if<CensoredExponential>(&form_)) return e->cap;
    return std::get<TabulatedSurvival>(form_).z.back();
  }

  /// P(X > z), right-continuous.
  double survival(double z) const {
    if (z < 0.0) return 1.0;
    if (auto* e = std::get_if<CensoredExponential>(&form_)) return z < e->cap ? std::exp(-e->rate * z) : 0.0;
    const auto& t = std::get<TabulatedSurvival>(form_);
    if (z >= t.z.back()) return 0.0;
    return interpolate(t, z);
  }

  /// lim_{y -> z-} P(X > y).
  double survival_left(double z) const {
    if (z <= 0.0) return 1.0;
    if (auto* e = std::get_if<CensoredExponential>(&form_))
      return z <= e->cap ? std::exp(-e->rate * z) : 0.0;
    const auto& t = std::get<TabulatedSurvival>(form_);
    if (z > t.z.back()) return 0.0;
    return interpolate(t, z);
  }

  /// Points in (0, inf) where the survival has a kink or jump.
  std::vector<double> knots() const {
    if (auto* e = std::get_if<CensoredExponential>(&form_)) return {e->cap};
    const auto& t = std::get<TabulatedSurvival>(form_);
    return std::vector<double>(t.z.begin() + 1, t.z.end());
  }

  /// Exact integral of the survival over [a, b].
  double integral(double a, double b) const {
    if (b <= a) return 0.0;
    if (auto* e = std::get_if<CensoredExponential>(&form_)) {
      double hi = std::min(b, e->cap);
      if (hi <= a) return 0.0;
      // e^{-ra} (1 - e^{-r(hi-a)}) / r, written to avoid cancellation on thin cells
      return std::exp(-e->rate * a) * -std::expm1(-e->rate * (hi - a)) / e->rate;
    }
    const auto& t = std::get<TabulatedSurvival>(form_);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < t.z.size(); ++k) {
      double lo = std::max(a, t.z[k]);
      double hi = std::min(b, t.z[k + 1]);
      if (hi <= lo) continue;
      total += 0.5 * (interpolate(t, lo) + interpolate(t, hi)) * (hi - lo);
    }
    return total;
  }

  /// z in [a, b] with survival(z) = level, given that the survival is
  /// continuous and nonincreasing on [a, b] with no knot strictly inside.
  double inverse_on_piece(double level, double a, double b) const {
    if (auto* e = std::get_if<CensoredExponential>(&form_))
      return std::clamp(-std::log(level) / e->rate, a, b);
    double hi = survival(a);
    double lo = survival_left(b);
    if (hi <= lo) return a;
    return std::clamp(a + (hi - level) / (hi - lo) * (b - a), a, b);
  }

  SurvivalCurve base_survival(const Grid& grid) const;

 private:
  static double interpolate(const TabulatedSurvival& t, double z) {
    auto it = std::upper_bound(t.z.begin(), t.z.end(), z);
    std::size_t k = static_cast<std::size_t>(it - t.z.begin());
    if (k >= t.z.size()) return t.s.back();
    double w = (z - t.z[k - 1]) / (t.z[k] - t.z[k - 1]);
    return t.s[k - 1] + w * (t.s[k] - t.s[k - 1]);
  }

  Form form_;
};

// ---------------------------------------------------------------------------
// Analytic tail curves c * T(P(X > z))
// ---------------------------------------------------------------------------

enum class Sampling {
  cell_average,  ///< exact mean over each cell (default)
  left_node      ///< value at the left end of each cell
};

class TailCurve {
 public:
  TailCurve(LossModel loss, Distortion distortion, double factor = 1.0, std::string label = {})
      : loss_(std::move(loss)), distortion_(std::move(distortion)), factor_(factor),
        label_(std::move(label)) {
    if (!(factor_ >= 0.0) || !std::isfinite(factor_))
      throw ValidationError(label_, "scale factor must be finite and >= 0");
  }

  const LossModel& loss() const noexcept { return loss_; }
  const Distortion& distortion() const noexcept { return distortion_; }
  double factor() const noexcept { return factor_; }
  const std::string& label() const noexcept { return label_; }

  TailCurve scaled(double c, std::string label) const {
    return TailCurve(loss_, distortion_, factor_ * c, std::move(label));
  }

  double operator()(double z) const { return factor_ * distortion_(loss_.survival(z)); }
  double left_limit(double z) const { return factor_ * distortion_(loss_.survival_left(z)); }

  /// Exact integral over [a, b]: split at survival knots and at the preimages
  /// of the distortion breakpoints, then integrate the affine pieces.
  double integral(double a, double b) const {
    if (b <= a) return 0.0;
    std::vector<double> cuts{a};
    for (double k : loss_.knots())
      if (k > a && k < b) cuts.push_back(k);
    cuts.push_back(b);
    const auto breaks = distortion_.breakpoints();
    double total = 0.0;
    std::vector<double> pieces;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double lo_z = cuts[p];
      const double hi_z = cuts[p + 1];
      const double s_hi = loss_.survival(lo_z);
      const double s_lo = loss_.survival_left(hi_z);
      pieces.assign({lo_z, hi_z});
      for (double t : breaks) {
        if (t > s_lo && t < s_hi) pieces.push_back(loss_.inverse_on_piece(t, lo_z, hi_z));
      }
      std::sort(pieces.begin(), pieces.end());
      for (std::size_t q = 0; q + 1 < pieces.size(); ++q) {
        const double u = pieces[q];
        const double v = pieces[q + 1];
        if (v <= u) continue;
        auto [c0, c1] = distortion_.affine_at(loss_.survival(0.5 * (u + v)));
        total += c0 * (v - u);
        if (c1 != 0.0) total += c1 * loss_.integral(u, v);
      }
    }
    return factor_ * total;
  }

  SurvivalCurve sample(const Grid& grid, Sampling rule = Sampling::cell_average) const {
    const std::size_t cells = grid.cells();
    std::vector<double> out(cells + 1);
    for (std::size_t k = 0; k < cells; ++k) {
      const double a = grid.node(k);
      const double b = grid.node(k + 1);
      out[k] = rule == Sampling::cell_average ? integral(a, b) / (b - a) : (*this)(a);
      out[k] = std::max(out[k], 0.0);
    }
    out[cells] = (*this)(grid.upper_bound());
    return SurvivalCurve(std::move(out), label_);
  }

 private:
  LossModel loss_;
  Distortion distortion_;
  double factor_;
  std::string label_;
};

inline SurvivalCurve LossModel::base_survival(const Grid& grid) const {
  return TailCurve(*this, Distortion::identity(), 1.0, "survival").sample(grid);
}

/// T(P(X > z)) on the grid, integrated exactly over each cell.
inline SurvivalCurve distort(const LossModel& loss, const Distortion& d, const Grid& grid,
                             Sampling rule = Sampling::cell_average) {
  return TailCurve(loss, d).sample(grid, rule);
}

// ---------------------------------------------------------------------------
// Crossing refinement
// ---------------------------------------------------------------------------

inline constexpr int kMaxBisectionSteps = 200;

namespace detail {

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

inline double bisect_crossing(const TailCurve& f, const TailCurve& g, double lo, double hi,
                              int lo_sign, double tolerance) {
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    if (hi - lo <= tolerance) return 0.5 * (lo + hi);
    const double mid = 0.5 * (lo + hi);
    const double d = f(mid) - g(mid);
    if (!std::isfinite(d)) break;
    const int s = sign_of(d);
    if (s == 0) return mid;
    if (s == lo_sign) lo = mid; else hi = mid;
  }
  throw NumericalError("crossing bisection did not converge for '" + f.label() + "' vs '" +
                       g.label() + "' in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace detail

/// Points where some pair of curves changes strict order, each located by
/// bisection to within eps_ref * max(1, M).
inline std::vector<double> crossing_points(std::span<const TailCurve> curves, const Grid& grid) {
  const double tolerance = grid.eps_ref() * std::max(1.0, grid.upper_bound());
  std::vector<double> found;
  const std::size_t cells = grid.cells();
  std::vector<std::vector<double>> at_node(curves.size(), std::vector<double>(cells + 1));
  std::vector<std::vector<double>> before_node(curves.size(), std::vector<double>(cells + 1));
  std::vector<std::vector<double>> at_mid(curves.size(), std::vector<double>(cells));
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (std::size_t k = 0; k <= cells; ++k) {
      at_node[c][k] = curves[c](grid.node(k));
      before_node[c][k] = k == 0 ? at_node[c][0] : curves[c].left_limit(grid.node(k));
    }
    for (std::size_t k = 0; k < cells; ++k)
      at_mid[c][k] = curves[c](0.5 * (grid.node(k) + grid.node(k + 1)));
  }
  for (std::size_t a = 0; a < curves.size(); ++a) {
    for (std::size_t b = a + 1; b < curves.size(); ++b) {
      for (std::size_t k = 0; k < cells; ++k) {
        const double z0 = grid.node(k);
        const double z1 = grid.node(k + 1);
        const double zm = 0.5 * (z0 + z1);
        const double d0 = at_node[a][k] - at_node[b][k];
        const double dm = at_mid[a][k] - at_mid[b][k];
        const double d1 = before_node[a][k + 1] - before_node[b][k + 1];
        if (!std::isfinite(d0) || !std::isfinite(dm) || !std::isfinite(d1))
          throw NumericalError("non-finite curve value for '" + curves[a].label() + "' vs '" +
                               curves[b].label() + "'");
        const int s0 = detail::sign_of(d0);
        const int sm = detail::sign_of(dm);
        const int s1 = detail::sign_of(d1);
        if (s0 != 0 && sm != 0 && s0 != sm)
          found.push_back(detail::bisect_crossing(curves[a], curves[b], z0, zm, s0, tolerance));
        if (sm != 0 && s1 != 0 && sm != s1)
          found.push_back(detail::bisect_crossing(curves[a], curves[b], zm, z1, sm, tolerance));
      }
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

/// Grid augmented with every pairwise crossing, so that the strict ordering of
/// the curves is constant on each cell.
inline Grid refine_crossings(std::span<const TailCurve> curves, const Grid& grid) {
  const auto points = crossing_points(curves, grid);
  return grid.with_nodes(points);
}

}  // namespace reinsure

#endif  // REINSURE_CURVES_HPP
