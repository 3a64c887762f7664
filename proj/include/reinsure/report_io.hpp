#ifndef REINSURE_REPORT_IO_HPP
#define REINSURE_REPORT_IO_HPP

// Serialization of solved markets: JSON reports and strategies, the text
// tables, and CSV plot data. Everything written here is a pure function of
// its inputs so repeated runs produce identical bytes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reinsure/equilibrium.hpp"
#include "reinsure/errors.hpp"
#include "reinsure/market.hpp"
#include "reinsure/pareto.hpp"

namespace reinsure {

using json = nlohmann::json;

inline std::string fixed6(double v) {
  if (std::abs(v) < 5e-7) v = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json to_json(const EquilibriumReport& r) {
  json out;
  out["regime"] = to_string(r.regime);
  out["insurers"] = json::array();
  for (const auto& o : r.insurers) {
    out["insurers"].push_back({{"name", o.name},
                               {"initial_risk", o.initial_risk},
                               {"premium_paid", o.premium},
                               {"premium_total", o.premium_total},
                               {"post_transfer_risk", o.post_transfer_risk},
                               {"welfare_gain", o.welfare_gain}});
  }
  out["reinsurers"] = json::array();
  for (const auto& o : r.reinsurers) {
    out["reinsurers"].push_back({{"name", o.name},
                                 {"initial_risk", 0.0},
                                 {"post_transfer_risk", o.post_transfer_risk},
                                 {"welfare_gain", o.welfare_gain}});
  }
  out["flags"] = {{"individually_rational", r.individually_rational},
                  {"pareto_optimal", r.pareto_optimal},
                  {"deviation_check_passed",
                   r.deviation_check_passed ? json(*r.deviation_check_passed) : json(nullptr)}};
  out["aggregate_risk"] = r.aggregate_risk;
  return out;
}

/// Full report.json: the report plus market facts a reader of the CSVs needs.
inline json report_document(const MarketSpec& market, const EquilibriumReport& r, const std::string& command) {
  json doc = to_json(r);
  doc["command"] = command;
  doc["grid"] = {{"M", market.upper_bound()},
                 {"cells", market.grid().cells()},
                 {"requested_cells", market.options().grid_cells}};
  json flagged = json::array();
  for (std::size_t i : market.nonmonotone_second_lowest()) flagged.push_back(market.insurer(i).name);
  doc["nonmonotone_tau_bar"] = flagged;
  return doc;
}

/// Table with one row per agent, in the layout of the usual results tables.
inline std::string format_table(const EquilibriumReport& r) {
  std::size_t width = 10;
  for (const auto& o : r.insurers) width = std::max(width, o.name.size());
  for (const auto& o : r.reinsurers) width = std::max(width, o.name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto cell = [](const std::string& s) {
    std::string out(std::max<std::size_t>(14, s.size()) - s.size(), ' ');
    return out + s;
  };
  std::ostringstream ss;
  ss << pad("", width) << cell("Initial Risk") << cell("Premium Paid") << cell("Post-Transfer") << cell("Welfare Gain")
     << "\n";
  for (const auto& o : r.insurers) {
    ss << pad(o.name, width) << cell(fixed6(o.initial_risk)) << cell(fixed6(o.premium_total))
       << cell(fixed6(o.post_transfer_risk)) << cell(fixed6(o.welfare_gain)) << "\n";
  }
  for (const auto& o : r.reinsurers) {
    ss << pad(o.name, width) << cell(fixed6(0.0)) << cell("--") << cell(fixed6(o.post_transfer_risk))
       << cell(fixed6(o.welfare_gain)) << "\n";
  }
  if (r.insurers.size() > 0 && r.reinsurers.size() > 1) {
    ss << "\nPremium paid by insurer to each reinsurer\n" << pad("", width);
    for (const auto& o : r.reinsurers) ss << cell(o.name);
    ss << "\n";
    for (const auto& o : r.insurers) {
      ss << pad(o.name, width);
      for (double p : o.premium) ss << cell(fixed6(p));
      ss << "\n";
    }
  }
  ss << "\nregime: " << to_string(r.regime) << "\n";
  ss << "individually rational: " << (r.individually_rational ? "yes" : "no") << "\n";
  ss << "Pareto optimal: " << (r.pareto_optimal ? "yes" : "no") << "\n";
  if (r.deviation_check_passed) ss << "deviation check: " << (*r.deviation_check_passed ? "PASS" : "FAIL") << "\n";
  return ss.str();
}

/// Side-by-side comparison of two solved markets with the same insurers.
inline json comparison_json(const EquilibriumReport& a, const EquilibriumReport& b) {
  if (a.insurers.size() != b.insurers.size()) throw StructuralError("compared scenarios have different insurers");
  json out;
  out["insurers"] = json::array();
  for (std::size_t i = 0; i < a.insurers.size(); ++i) {
    const auto& x = a.insurers[i];
    const auto& y = b.insurers[i];
    out["insurers"].push_back({{"name", y.name},
                               {"post_transfer_risk", {x.post_transfer_risk, y.post_transfer_risk}},
                               {"welfare_gain", {x.welfare_gain, y.welfare_gain}},
                               {"welfare_gain_delta", y.welfare_gain - x.welfare_gain},
                               {"post_transfer_risk_delta", y.post_transfer_risk - x.post_transfer_risk}});
  }
  auto reins = [](const EquilibriumReport& r) {
    json arr = json::array();
    for (const auto& o : r.reinsurers)
      arr.push_back({{"name", o.name}, {"post_transfer_risk", o.post_transfer_risk}, {"welfare_gain", o.welfare_gain}});
    return arr;
  };
  out["reinsurers"] = {reins(a), reins(b)};
  return out;
}

inline std::string format_comparison(const EquilibriumReport& a, const EquilibriumReport& b,
                                     const std::string& label_a, const std::string& label_b) {
  if (a.insurers.size() != b.insurers.size()) throw StructuralError("compared scenarios have different insurers");
  std::ostringstream ss;
  auto col = [](const std::string& s) { return std::string(std::max<std::size_t>(16, s.size() + 2) - s.size(), ' ') + s; };
  ss << std::string(32, ' ') << col(label_a) << col(label_b) << col("Delta") << "\n";
  for (std::size_t i = 0; i < a.insurers.size(); ++i) {
    const auto& x = a.insurers[i];
    const auto& y = b.insurers[i];
    auto row = [&](const std::string& what, double u, double v) {
      std::string head = y.name + " " + what;
      head.resize(std::max<std::size_t>(32, head.size()), ' ');
      ss << head << col(fixed6(u)) << col(fixed6(v)) << col(fixed6(v - u)) << "\n";
    };
    row("initial risk", x.initial_risk, y.initial_risk);
    row("post-transfer risk", x.post_transfer_risk, y.post_transfer_risk);
    row("welfare gain", x.welfare_gain, y.welfare_gain);
  }
  const std::size_t m = std::max(a.reinsurers.size(), b.reinsurers.size());
  for (std::size_t j = 0; j < m; ++j) {
    auto val = [&](const EquilibriumReport& r, bool risk) {
      if (j >= r.reinsurers.size()) return std::string("--");
      return fixed6(risk ? r.reinsurers[j].post_transfer_risk : r.reinsurers[j].welfare_gain);
    };
    const std::string name = j < b.reinsurers.size() ? b.reinsurers[j].name : a.reinsurers[j].name;
    for (bool risk : {true, false}) {
      std::string head = name + (risk ? " post-transfer risk" : " welfare gain");
      head.resize(std::max<std::size_t>(32, head.size()), ' ');
      ss << head << col(val(a, risk)) << col(val(b, risk)) << "\n";
    }
  }
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV plot data
// ---------------------------------------------------------------------------

/// z, alpha_i, tau_i1..tau_im, tau_bar_i at every grid node; row k holds the
/// cell value on [z_k, z_{k+1}) and the last row the value at M.
inline std::string curves_csv(const MarketSpec& market, std::size_t i) {
  std::ostringstream ss;
  const std::string id = std::to_string(i + 1);
  ss << "z,alpha_" << id;
  for (std::size_t j = 0; j < market.reinsurers(); ++j) ss << ",tau_" << id << std::to_string(j + 1);
  ss << ",tau_bar_" << id << "\n";
  const Grid& grid = market.grid();
  for (std::size_t k = 0; k <= grid.cells(); ++k) {
    ss << csv_number(grid.node(k));
    for (std::size_t o = 0; o <= market.reinsurers(); ++o) ss << ',' << csv_number(market.preference(i, o)[k]);
    ss << ',' << csv_number(market.second_lowest(i)[k]) << "\n";
  }
  return ss.str();
}

/// x, I_i1(x)..I_im(x), total at every grid node.
inline std::string indemnity_csv(const MarketSpec& market, const SpneStrategy& strategy, std::size_t i) {
  std::ostringstream ss;
  const std::string id = std::to_string(i + 1);
  ss << "x";
  for (std::size_t j = 0; j < market.reinsurers(); ++j) ss << ",I_" << id << std::to_string(j + 1);
  ss << ",total\n";
  const Grid& grid = market.grid();
  std::vector<std::vector<double>> cols;
  for (const auto& g : strategy.responses.rows.at(i)) cols.push_back(indemnity_at_nodes(g, grid));
  for (std::size_t k = 0; k <= grid.cells(); ++k) {
    ss << csv_number(grid.node(k));
    double total = 0.0;
    for (const auto& c : cols) {
      ss << ',' << csv_number(c[k]);
      total += c[k];
    }
    ss << ',' << csv_number(total) << "\n";
  }
  return ss.str();
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// Prices, responses and premia on the market's grid.
inline json strategy_to_json(const MarketSpec& market, const SpneStrategy& s, const Allocation& allocation) {
  json out;
  out["regime"] = to_string(s.regime);
  out["grid"] = {{"M", market.upper_bound()}, {"cells", market.grid().cells()}};
  json prices = json::array();
  json responses = json::array();
  for (std::size_t i = 0; i < market.insurers(); ++i) {
    json pr = json::array();
    json rr = json::array();
    for (std::size_t j = 0; j < market.reinsurers(); ++j) {
      const auto v = s.prices.nu[i][j].values();
      pr.push_back(std::vector<double>(v.begin(), v.end()));
      rr.push_back(s.responses.rows[i][j]);
    }
    prices.push_back(std::move(pr));
    responses.push_back(std::move(rr));
  }
  out["prices"] = std::move(prices);
  out["responses"] = std::move(responses);
  out["premia"] = allocation.premia;
  return out;
}

struct LoadedStrategy {
  SpneStrategy strategy;
  Allocation allocation;
};

inline LoadedStrategy strategy_from_json(const MarketSpec& market, const json& doc) {
  const Grid& grid = market.grid();
  try {
    if (doc.at("grid").at("cells").get<std::size_t>() != grid.cells())
      throw ValidationError("strategy.grid.cells", "does not match the refined scenario grid; use the same --grid-cells");
    if (doc.at("grid").at("M").get<double>() != market.upper_bound())
      throw ValidationError("strategy.grid.M", "does not match the scenario");
    PricingMatrix prices;
    MarginalIndemnityMatrix gamma;
    const auto& p = doc.at("prices");
    const auto& r = doc.at("responses");
    if (p.size() != market.insurers() || r.size() != market.insurers())
      throw ValidationError("strategy.prices", "wrong number of insurers");
    for (std::size_t i = 0; i < market.insurers(); ++i) {
      if (p[i].size() != market.reinsurers() || r[i].size() != market.reinsurers())
        throw ValidationError("strategy.prices[" + std::to_string(i) + "]", "wrong number of reinsurers");
      prices.nu.emplace_back();
      gamma.rows.emplace_back();
      for (std::size_t j = 0; j < market.reinsurers(); ++j) {
        prices.nu[i].emplace_back(p[i][j].get<std::vector<double>>());
        gamma.rows[i].push_back(r[i][j].get<std::vector<double>>());
      }
    }
    validate(prices, market);
    validate(gamma, grid, grid.eps_eq());
    LoadedStrategy out;
    out.strategy = assemble_strategy(market, std::move(prices));
    out.strategy.responses = std::move(gamma);
    out.allocation = doc.contains("premia")
                         ? Allocation{out.strategy.responses, doc.at("premia").get<std::vector<std::vector<double>>>()}
                         : induced_allocation(market, out.strategy);
    return out;
  } catch (const json::exception& e) {
    throw ValidationError("strategy", e.what());
  }
}

/// Two-space indented JSON with a trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace reinsure

#endif  // REINSURE_REPORT_IO_HPP
