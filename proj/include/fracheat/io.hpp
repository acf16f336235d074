// JSON and CSV formats, atomic file output and the quadrature hash.
// Needs the vendored json.hpp on the include path.
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "fracheat/core.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- numbers

// Scientific, 17 significant digits, independent of the C locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

// ---------------------------------------------------------------- files

// Writes to a temporary sibling and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_double(r[i]);
      out += '\n';
    }
    return out;
  }
};

// Parses numeric CSV; a first line that does not parse as numbers is the header.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    for (;;) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    std::vector<double> vals;
    try {
      for (const auto& c : cells) vals.push_back(parse_double(c));
    } catch (const ConfigError&) {
      if (!first) throw ConfigError("csv: non-numeric data line '" + line + "'");
      t.header = cells;
      first = false;
      continue;
    }
    first = false;
    if (!t.rows.empty() && vals.size() != t.rows.front().size())
      throw ConfigError("csv: ragged row '" + line + "'");
    t.rows.push_back(std::move(vals));
  }
  return t;
}

// Rows of x..., t.
inline std::vector<SpaceTimePoint> points_from_csv(const std::string& text, int n) {
  const auto t = parse_csv(text);
  std::vector<SpaceTimePoint> pts;
  for (const auto& r : t.rows) {
    if (static_cast<int>(r.size()) != n + 1)
      throw ConfigError("points: expected " + std::to_string(n + 1) + " columns (x..., t)");
    pts.push_back(SpaceTimePoint{{r.begin(), r.end() - 1}, r.back()});
  }
  return pts;
}

// ---------------------------------------------------------------- JSON conversions

inline json point_to_json(const SpaceTimePoint& p) {
  json a = json::array();
  for (double v : p.x) a.push_back(v);
  a.push_back(p.t);
  return a;
}

inline SpaceTimePoint point_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() < 2) throw ConfigError(std::string(what) + ": expected [x..., t]");
  SpaceTimePoint p;
  for (std::size_t i = 0; i + 1 < j.size(); ++i) p.x.push_back(j[i].get<double>());
  p.t = j.back().get<double>();
  return p;
}

// {"k": int, "base": [x..., t], "coeffs": [{"sigma": [..], "a": real}]}
inline json polynomial_to_json(const ParabolicPolynomial& P) {
  json c = json::array();
  for (std::size_t i = 0; i < P.indices().size(); ++i)
    c.push_back({{"sigma", P.indices()[i].sigma}, {"a", P.coeffs()[i]}});
  return {{"k", P.degree_bound()}, {"base", point_to_json(P.base())}, {"coeffs", c}};
}

inline ParabolicPolynomial polynomial_from_json(const json& j) {
  try {
    const int k = j.at("k").get<int>();
    const auto base = point_from_json(j.at("base"), "polynomial.base");
    ParabolicPolynomial P(k, base);
    if (j.contains("coeffs")) {
      for (const auto& c : j.at("coeffs")) {
        auto sigma = c.at("sigma").get<std::vector<int>>();
        if (static_cast<int>(sigma.size()) != P.n() + 1)
          throw ConfigError("polynomial: sigma must have n + 1 entries");
        P.set(MultiIndex{sigma}, c.at("a").get<double>());
      }
    }
    return P;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("polynomial: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("polynomial: ") + e.what());
  }
}

inline json params_to_json(const FracParams& p) { return {{"n", p.n()}, {"s", p.s()}}; }

inline FracParams params_from_json(const json& j) {
  try {
    return FracParams(j.at("n").get<int>(), j.at("s").get<double>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
}

inline json quad_to_json(const QuadratureSpec& q) {
  json j = {{"tau_min", q.tau_min},           {"tau_max", q.tau_max},
            {"graded_nodes", q.graded_nodes}, {"hermite_order", q.hermite_order},
            {"panel_order", q.panel_order},   {"angular_nodes", q.angular_nodes},
            {"rho_max", q.rho_max}};
  j["tail_mode"] = q.tail_mode ? json(to_string(*q.tail_mode)) : json(nullptr);
  return j;
}

inline QuadratureSpec quad_from_json(const json& j) {
  QuadratureSpec q;
  static const char* known[] = {"tau_min", "tau_max", "graded_nodes", "hermite_order",
                                "panel_order", "angular_nodes", "rho_max", "tail_mode"};
  for (const auto& [key, v] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("quad: unknown field '" + key + "'");
  }
  try {
    q.tau_min = j.value("tau_min", q.tau_min);
    q.tau_max = j.value("tau_max", q.tau_max);
    q.graded_nodes = j.value("graded_nodes", q.graded_nodes);
    q.hermite_order = j.value("hermite_order", q.hermite_order);
    q.panel_order = j.value("panel_order", q.panel_order);
    q.angular_nodes = j.value("angular_nodes", q.angular_nodes);
    q.rho_max = j.value("rho_max", q.rho_max);
    if (j.contains("tail_mode") && !j["tail_mode"].is_null()) {
      const auto m = j["tail_mode"].get<std::string>();
      if (m == "analytic_compact") q.tail_mode = TailMode::analytic_compact;
      else if (m == "analytic_symbol") q.tail_mode = TailMode::analytic_symbol;
      else if (m == "bound_only") q.tail_mode = TailMode::bound_only;
      else throw ConfigError("quad.tail_mode: unknown mode '" + m + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("quad: ") + e.what());
  }
  try {
    q.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return q;
}

// 64-bit FNV-1a of a string.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string quad_hash(const QuadratureSpec& q) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(quad_to_json(q).dump())));
  return buf;
}

}  // namespace fracheat
