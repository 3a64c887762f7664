#ifndef REINSURE_SCENARIO_HPP
#define REINSURE_SCENARIO_HPP

// TOML scenario files.
//
//   [market]
//   M = 5.0
//   grid_cells = 20000                       # optional
//   dependence = "risk-neutral-reinsurers"   # or "comonotone-losses", "general"
//
//   [[insurer]]
//   name = "Insurer 1"
//   dist = { kind = "censored-exp", rate = 3.0, cap = 5.0 }
//   risk = { kind = "es", level = 0.10 }
//
//   [[reinsurer]]
//   name = "Reinsurer 1"
//   belief = { kind = "censored-exp", rate = 2.5, cap = 5.0 }
//   loading = 0.15
//   risk_neutral = true
//
// Loss descriptors: censored-exp {rate, cap} or table {z = [...], s = [...]}.
// Beliefs additionally accept kind = "objective" (the insurer's own model),
// and `beliefs = [...]` gives one descriptor per insurer. Distortions: es,
// var, identity, or table {t = [...], value = [...]}. A reinsurer with
// risk_neutral = false may set `risk` to its attitude distortion.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "reinsure/curves.hpp"
#include "reinsure/errors.hpp"
#include "reinsure/market.hpp"

namespace reinsure {

namespace scenario_detail {

template <class F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    const std::string inner = e.field();
    if (inner.rfind(path, 0) == 0) throw;
    std::string msg = e.what();
    if (!inner.empty() && msg.rfind(inner + ": ", 0) == 0) msg = msg.substr(inner.size() + 2);
    throw ValidationError(inner.empty() ? path : path + "." + inner, msg);
  }
}

inline double number(const toml::table& t, std::string_view key, const std::string& path) {
  const auto* node = t.get(key);
  if (!node) throw ValidationError(path + "." + std::string(key), "missing");
  if (auto v = node->value<double>()) return *v;
  throw ValidationError(path + "." + std::string(key), "must be a number");
}

inline std::optional<double> optional_number(const toml::table& t, std::string_view key, const std::string& path) {
  if (!t.contains(key)) return std::nullopt;
  return number(t, key, path);
}

inline std::string text(const toml::table& t, std::string_view key, const std::string& path) {
  const auto* node = t.get(key);
  if (!node) throw ValidationError(path + "." + std::string(key), "missing");
  if (auto v = node->value<std::string>()) return *v;
  throw ValidationError(path + "." + std::string(key), "must be a string");
}

inline std::vector<double> numbers(const toml::table& t, std::string_view key, const std::string& path) {
  const std::string where = path + "." + std::string(key);
  const auto* arr = t.get_as<toml::array>(key);
  if (!arr) throw ValidationError(where, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < arr->size(); ++k) {
    auto v = (*arr)[k].value<double>();
    if (!v) throw ValidationError(where + "[" + std::to_string(k) + "]", "must be a number");
    out.push_back(*v);
  }
  return out;
}

inline const toml::table& subtable(const toml::table& t, std::string_view key, const std::string& path) {
  const auto* sub = t.get_as<toml::table>(key);
  if (!sub) throw ValidationError((path.empty() ? "" : path + ".") + std::string(key), "missing or not a table");
  return *sub;
}

inline LossModel loss_model(const toml::table& d, const std::string& path) {
  const std::string kind = text(d, "kind", path);
  return with_path(path, [&] {
    if (kind == "censored-exp") return LossModel::censored_exponential(number(d, "rate", path), number(d, "cap", path));
    if (kind == "table") return LossModel(TabulatedSurvival{numbers(d, "z", path), numbers(d, "s", path)});
    throw ValidationError("kind", "unknown loss kind '" + kind + "'");
  });
}

inline Distortion distortion(const toml::table& d, const std::string& path) {
  const std::string kind = text(d, "kind", path);
  return with_path(path, [&] {
    if (kind == "es") return Distortion::expected_shortfall(number(d, "level", path));
    if (kind == "var") return Distortion::value_at_risk(number(d, "level", path));
    if (kind == "identity") return Distortion::identity();
    if (kind == "table") return Distortion::table(numbers(d, "t", path), numbers(d, "value", path));
    throw ValidationError("kind", "unknown risk kind '" + kind + "'");
  });
}

/// Empty optional for kind = "objective".
inline std::optional<LossModel> belief(const toml::table& d, const std::string& path) {
  if (text(d, "kind", path) == "objective") return std::nullopt;
  return loss_model(d, path);
}

inline Dependence dependence(const std::string& s, const std::string& path) {
  if (s == "risk-neutral-reinsurers") return Dependence::risk_neutral_reinsurers;
  if (s == "comonotone-losses") return Dependence::comonotone_losses;
  if (s == "general") return Dependence::general;
  throw ValidationError(path, "unknown dependence '" + s + "'");
}

inline const toml::array& table_array(const toml::table& root, std::string_view key) {
  const auto* arr = root.get_as<toml::array>(key);
  if (!arr || arr->empty()) throw ValidationError(std::string(key), "at least one [[" + std::string(key) + "]] entry required");
  return *arr;
}

}  // namespace scenario_detail

/// Builds a market from a parsed scenario. `grid_cells` overrides the file.
inline MarketSpec market_from_toml(const toml::table& root, std::optional<std::size_t> grid_cells = std::nullopt) {
  using namespace scenario_detail;
  const auto& mk = subtable(root, "market", "");
  MarketOptions opt;
  opt.upper_bound = number(mk, "M", "market");
  if (auto cells = optional_number(mk, "grid_cells", "market")) {
    if (!(*cells >= 1.0) || *cells != std::floor(*cells))
      throw ValidationError("market.grid_cells", "must be a positive integer");
    opt.grid_cells = static_cast<std::size_t>(*cells);
  }
  if (grid_cells) opt.grid_cells = *grid_cells;
  if (mk.contains("dependence")) opt.dependence = dependence(text(mk, "dependence", "market"), "market.dependence");
  if (auto e = optional_number(mk, "eps_eq", "market")) opt.eps_eq = *e;
  if (auto e = optional_number(mk, "eps_ref", "market")) opt.eps_ref = *e;

  std::vector<InsurerSpec> insurers;
  const auto& ins = table_array(root, "insurer");
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const std::string path = "insurer[" + std::to_string(i) + "]";
    const auto* t = ins[i].as_table();
    if (!t) throw ValidationError(path, "must be a table");
    InsurerSpec s{t->contains("name") ? text(*t, "name", path) : "Insurer " + std::to_string(i + 1),
                  loss_model(subtable(*t, "dist", path), path + ".dist"),
                  distortion(subtable(*t, "risk", path), path + ".risk")};
    insurers.push_back(std::move(s));
  }

  std::vector<ReinsurerSpec> reinsurers;
  const auto& re = table_array(root, "reinsurer");
  for (std::size_t j = 0; j < re.size(); ++j) {
    const std::string path = "reinsurer[" + std::to_string(j) + "]";
    const auto* t = re[j].as_table();
    if (!t) throw ValidationError(path, "must be a table");
    ReinsurerSpec s;
    s.name = t->contains("name") ? text(*t, "name", path) : "Reinsurer " + std::to_string(j + 1);
    if (t->contains("belief") && t->contains("beliefs"))
      throw ValidationError(path, "give either belief or beliefs, not both");
    if (t->contains("belief")) {
      if (auto b = belief(subtable(*t, "belief", path), path + ".belief")) s.beliefs.push_back(*b);
    } else if (const auto* arr = t->get_as<toml::array>("beliefs")) {
      for (std::size_t k = 0; k < arr->size(); ++k) {
        const std::string bp = path + ".beliefs[" + std::to_string(k) + "]";
        const auto* bt = (*arr)[k].as_table();
        if (!bt) throw ValidationError(bp, "must be a table");
        auto b = belief(*bt, bp);
        s.beliefs.push_back(b ? *b : insurers.at(std::min(k, insurers.size() - 1)).loss);
      }
    } else if (t->contains("beliefs")) {
      throw ValidationError(path + ".beliefs", "must be an array of tables");
    }
    s.loading = number(*t, "loading", path);
    if (t->contains("risk_neutral")) {
      const auto* rn = t->get_as<bool>("risk_neutral");
      if (!rn) throw ValidationError(path + ".risk_neutral", "must be a boolean");
      s.risk_neutral = rn->get();
    }
    if (t->contains("risk")) s.attitude = distortion(subtable(*t, "risk", path), path + ".risk");
    reinsurers.push_back(std::move(s));
  }
  return MarketSpec(std::move(insurers), std::move(reinsurers), opt);
}

inline MarketSpec market_from_string(std::string_view text, std::optional<std::size_t> grid_cells = std::nullopt) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ValidationError("", std::string("parse error: ") + std::string(e.description()));
  }
  return market_from_toml(root, grid_cells);
}

inline MarketSpec load_market(const std::filesystem::path& path, std::optional<std::size_t> grid_cells = std::nullopt) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ValidationError(path.string() + ":" + std::to_string(where.line) + ":" + std::to_string(where.column),
                          std::string(e.description()));
  }
  return market_from_toml(root, grid_cells);
}

}  // namespace reinsure

#endif  // REINSURE_SCENARIO_HPP
