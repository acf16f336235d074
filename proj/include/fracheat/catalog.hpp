// Named test fields and their JSON constructors.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fracheat/fields.hpp"
#include "fracheat/io.hpp"

namespace fracheat {

// A constructor description: {"constructor": name, ...parameters}.
//   constant       {"n", "c"}
//   exp_symbol     {"lambda", "k": [..]}
//   gaussian_bump  {"center": [x..., t], "widths": [w_x, w_t]}
//   power_cusp     {"beta", "direction": "space"|"time", "center", "widths"}
//   polynomial     {"polynomial": {...}} or {"file": path}
struct FieldCatalogEntry {
  std::string id;
  json spec;
};

namespace detail {

inline std::vector<double> widths_of(const json& j) {
  const auto w = j.value("widths", std::vector<double>{1.0, 1.0});
  if (w.size() != 2) throw ConfigError("field.widths: expected [w_x, w_t]");
  return w;
}

inline std::vector<double> center_of(const json& j) {
  const auto c = j.value("center", std::vector<double>{0.0, 0.0});
  if (c.size() < 2) throw ConfigError("field.center: expected [x..., t]");
  return c;
}

}  // namespace detail

inline ScalarField field_from_json(const json& j, const std::filesystem::path& dir = {}) {
  if (!j.is_object() || !j.contains("constructor"))
    throw ConfigError("field: expected an object with a 'constructor'");
  const auto name = j["constructor"].get<std::string>();
  try {
    if (name == "constant") return constant_field(j.value("n", 1), j.at("c").get<double>());
    if (name == "exp_symbol")
      return exp_symbol_field(j.at("lambda").get<double>(), j.value("k", std::vector<double>{0.0}));
    if (name == "gaussian_bump") {
      const auto w = detail::widths_of(j);
      return gaussian_bump(detail::center_of(j), w[0], w[1]);
    }
    if (name == "power_cusp") {
      const auto w = detail::widths_of(j);
      const auto d = j.value("direction", std::string("space"));
      if (d != "space" && d != "time") throw ConfigError("field.direction: expected space or time");
      return power_cusp(j.at("beta").get<double>(), d == "space" ? CuspDirection::space : CuspDirection::time,
                        detail::center_of(j), w[0], w[1]);
    }
    if (name == "polynomial") {
      if (j.contains("polynomial")) return polynomial_field(polynomial_from_json(j["polynomial"]));
      const std::filesystem::path f = j.at("file").get<std::string>();
      return polynomial_field(polynomial_from_json(read_json_file(f.is_absolute() ? f : dir / f)));
    }
  } catch (const json::exception& e) {
    throw ConfigError("field '" + name + "': " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError("field '" + name + "': " + e.what());
  }
  throw ConfigError("field: unknown constructor '" + name + "'");
}

// Built-in identifiers; every one is nonnegative except the cosine symbols.
inline const std::map<std::string, json>& builtin_catalog() {
  static const std::map<std::string, json> cat = {
      {"constant", {{"constructor", "constant"}, {"n", 1}, {"c", 1.0}}},
      {"exp_symbol_1_0", {{"constructor", "exp_symbol"}, {"lambda", 1.0}, {"k", {0.0}}}},
      {"exp_symbol_0.5_1", {{"constructor", "exp_symbol"}, {"lambda", 0.5}, {"k", {1.0}}}},
      {"exp_symbol_1_1", {{"constructor", "exp_symbol"}, {"lambda", 1.0}, {"k", {1.0}}}},
      {"exp_symbol_2_0", {{"constructor", "exp_symbol"}, {"lambda", 2.0}, {"k", {0.0}}}},
      {"cos_x", {{"constructor", "exp_symbol"}, {"lambda", 0.0}, {"k", {1.0}}}},
      {"bump", {{"constructor", "gaussian_bump"}, {"center", {0.0, 0.0}}, {"widths", {1.0, 1.0}}}},
      {"wide_bump", {{"constructor", "gaussian_bump"}, {"center", {0.0, 0.0}}, {"widths", {2.0, 4.0}}}},
      {"offset_bump", {{"constructor", "gaussian_bump"}, {"center", {0.1, -0.2}}, {"widths", {1.0, 1.0}}}},
      {"cusp_0.25",
       {{"constructor", "power_cusp"}, {"beta", 0.25}, {"direction", "space"}, {"center", {0.0, 0.0}}, {"widths", {2.0, 4.0}}}},
      {"cusp_0.4",
       {{"constructor", "power_cusp"}, {"beta", 0.4}, {"direction", "space"}, {"center", {0.0, 0.0}}, {"widths", {1.0, 1.0}}}},
      {"cusp_0.5",
       {{"constructor", "power_cusp"}, {"beta", 0.5}, {"direction", "space"}, {"center", {0.0, 0.0}}, {"widths", {1.0, 1.0}}}},
      {"cusp_1.5",
       {{"constructor", "power_cusp"}, {"beta", 1.5}, {"direction", "space"}, {"center", {0.0, 0.0}}, {"widths", {1.0, 1.0}}}},
      {"time_cusp_0.5",
       {{"constructor", "power_cusp"}, {"beta", 0.5}, {"direction", "time"}, {"center", {0.0, 0.0}}, {"widths", {1.0, 1.0}}}},
  };
  return cat;
}

inline FieldCatalogEntry catalog_entry(const std::string& id) {
  const auto& cat = builtin_catalog();
  const auto it = cat.find(id);
  if (it == cat.end()) throw ConfigError("field: unknown catalog id '" + id + "'");
  return {id, it->second};
}

// A catalog id, or a path to a JSON file holding a constructor description.
inline FieldCatalogEntry resolve_field_ref(const std::string& ref) {
  if (builtin_catalog().count(ref)) return catalog_entry(ref);
  const std::filesystem::path p(ref);
  if (!std::filesystem::exists(p)) throw ConfigError("field: '" + ref + "' is neither a catalog id nor a file");
  auto spec = read_json_file(p);
  if (spec.is_object() && spec.contains("constructor") && spec["constructor"] == "polynomial" &&
      spec.contains("file")) {
    const std::filesystem::path f = spec["file"].get<std::string>();
    if (f.is_relative()) spec["file"] = (p.parent_path() / f).string();
  }
  return {p.filename().string(), spec};
}

}  // namespace fracheat
