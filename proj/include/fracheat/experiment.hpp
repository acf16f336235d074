// Experiment configs, the batch runners behind the CLI, and the run manifest.
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "fracheat/catalog.hpp"
#include "fracheat/io.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/operator.hpp"
#include "fracheat/regularity.hpp"
#include "fracheat/synthesis.hpp"

namespace fracheat {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConfigSchema = "fracheat.experiment/1";
inline constexpr const char* kManifestSchema = "fracheat.manifest/1";

// ---------------------------------------------------------------- exponent recovery

struct RecoveryOptions {
  QuadratureSpec quad;
  int grid = 16;
  double fit_divisor = 16.0;  // P is fitted at r_min / fit_divisor
  int fit_shells = 3;
  int fit_grid = 8;
  int threads = 1;
};

struct RecoveryResult {
  RegularityReport report;
  NuProfile profile;
  ExponentFit fit;
  ParabolicPolynomial P;
  int degree = 0;
  bool spatial_offsets = false;
};

// u = synthesize(f); P = fit of u at degree k + floor(alpha + 2s); nu profile of u - P;
// exponent with the log-factor model. The integer case with k + alpha + 2s odd is
// measured on spatial offsets, where the x-ln weight lives.
inline RecoveryResult exponent_recovery_runner(const ScalarField& f, const FracParams& p,
                                               const std::vector<double>& radii, int k, double alpha,
                                               const RecoveryOptions& opt = {}) {
  check_radii(radii, "exponent_recovery");
  if (radii.size() < 8) throw DomainError("exponent_recovery: need at least 8 radii");
  RecoveryResult res;
  const SpaceTimePoint base{std::vector<double>(p.n(), 0.0), 0.0};
  const double frac = alpha + 2.0 * p.s();
  const bool integer_case = std::abs(frac - std::round(frac)) < 1e-12;
  const long total = std::lround(k + frac);
  res.degree = k + static_cast<int>(std::floor(frac + 1e-12));
  res.spatial_offsets = integer_case && std::abs(k + frac - total) < 1e-12 && (total % 2 == 1);
  const auto u = solution_evaluator(f, p, opt.quad);
  FitOptions fo;
  fo.grid = opt.fit_grid;
  fo.shells = opt.fit_shells;
  fo.threads = opt.threads;
  res.P = fit_polynomial(u, base, res.degree, radii.back() / opt.fit_divisor, NormMode::L1_average, fo);
  NuOptions no;
  no.grid = opt.grid;
  no.threads = opt.threads;
  no.spatial_offsets = res.spatial_offsets;
  res.profile = nu_profile(u, base, res.P, radii, NormMode::L1_average, no);
  res.fit = estimate_exponent(res.profile, true);
  auto& rep = res.report;
  rep.fitted_exponent = res.fit.exponent;
  rep.log_correction = res.fit.log_correction;
  rep.jet = res.P;
  rep.diagnostics["rss_power"] = res.fit.rss_power;
  rep.diagnostics["rss_log"] = res.fit.rss_log;
  rep.diagnostics["exponent_power"] = res.fit.exponent_power;
  rep.diagnostics["exponent_log"] = res.fit.exponent_log;
  rep.diagnostics["expected_exponent"] = k + frac;
  rep.note = res.fit.note;
  const int ku = std::max(0, static_cast<int>(std::floor(res.fit.exponent)));
  if (res.fit.log_correction)
    rep.label = {res.spatial_offsets ? RegularityClass::x_log : RegularityClass::log, ku, 0.0};
  else
    rep.label = {RegularityClass::holder, ku, res.fit.exponent - ku};
  return res;
}

// ---------------------------------------------------------------- JSON views

inline json report_to_json(const RegularityReport& r) {
  json j;
  j["class_label"] = r.label.str();
  j["fitted_exponent"] = r.fitted_exponent;
  j["log_correction"] = r.log_correction;
  j["dyadic_sums"] = r.dyadic_sums;
  j["jet"] = r.jet ? polynomial_to_json(*r.jet) : json(nullptr);
  j["diagnostics"] = r.diagnostics;
  j["note"] = r.note;
  return j;
}

inline CsvTable profile_csv(const NuProfile& p) {
  CsvTable t{{"r", "nu", "err_est"}, {}};
  for (const auto& row : p.rows) t.rows.push_back({row.r, row.nu, row.err_est});
  return t;
}

inline json jet_to_json(const JetSequence& js) {
  json j;
  j["eta"] = js.eta;
  j["gamma"] = js.gamma;
  j["integer_case"] = js.integer_case;
  j["degree"] = js.degree;
  j["polys"] = json::array();
  for (const auto& P : js.polys) j["polys"].push_back(polynomial_to_json(P));
  j["err_est"] = js.err_est;
  j["differences"] = js.differences;
  j["convergence_rates"] = js.rates;
  j["cauchy"] = js.cauchy;
  j["limits"] = js.limits ? polynomial_to_json(*js.limits) : json(nullptr);
  return j;
}

inline json bound_to_json(const BoundReport& b) {
  json wp = b.worst_point.x;
  wp.push_back(b.worst_point.t);
  return {{"lemma", b.lemma},
          {"params", b.params},
          {"empirical_C", b.empirical_C},
          {"coarse_C", b.coarse_C},
          {"relative_change", b.relative_change},
          {"refinement_stable", b.refinement_stable},
          {"worst_point", wp},
          {"samples", b.samples}};
}

// ---------------------------------------------------------------- configs

enum class ExperimentKind { apply, synthesize, decompose, nu_profile, classify, jet, verify_kernel, exponent_recovery };

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> v = {
      {"apply", ExperimentKind::apply},
      {"synthesize", ExperimentKind::synthesize},
      {"decompose", ExperimentKind::decompose},
      {"nu_profile", ExperimentKind::nu_profile},
      {"classify", ExperimentKind::classify},
      {"jet", ExperimentKind::jet},
      {"verify_kernel", ExperimentKind::verify_kernel},
      {"exponent_recovery", ExperimentKind::exponent_recovery}};
  return v;
}

inline std::string to_string(ExperimentKind k) {
  for (const auto& [n, v] : experiment_names())
    if (v == k) return n;
  return "?";
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::apply;
  FracParams params{1, 0.5};
  std::optional<FieldCatalogEntry> field;
  QuadratureSpec quad;
  std::vector<SpaceTimePoint> points;
  std::vector<double> radii;
  std::string radii_text;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> out;
  int threads = 1;
  json options = json::object();  // experiment-specific keys, validated
  json raw;
};

// "dyadic:N" (from 1/2), "dyadic:N@r0", a JSON list, or {"r0", "count", "ratio"}.
inline std::vector<double> parse_radii(const json& j) {
  std::vector<double> r;
  try {
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s.rfind("dyadic:", 0) != 0) throw ConfigError("radii: expected 'dyadic:N[@r0]'");
      const auto body = s.substr(7);
      const auto at = body.find('@');
      const int count = static_cast<int>(parse_double(body.substr(0, at)));
      const double r0 = at == std::string::npos ? 0.5 : parse_double(body.substr(at + 1));
      r = geometric_radii(r0, count, 0.5);
    } else if (j.is_array()) {
      r = j.get<std::vector<double>>();
    } else if (j.is_object()) {
      r = geometric_radii(j.at("r0").get<double>(), j.at("count").get<int>(), j.value("ratio", 0.5));
    } else {
      throw ConfigError("radii: unsupported form");
    }
    check_radii(r, "radii");
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("radii: ") + e.what());
  }
  return r;
}

namespace detail {

inline json load_or_inline(const json& v, const std::filesystem::path& dir) {
  if (v.is_string()) {
    const std::filesystem::path p = v.get<std::string>();
    return read_json_file(p.is_absolute() ? p : dir / p);
  }
  return v;
}

struct OptionSpec {
  const char* key;
  json fallback;
};

inline const std::vector<OptionSpec>& option_specs(ExperimentKind k) {
  static const std::vector<OptionSpec> apply = {{"operator", "fully_fractional"}};
  static const std::vector<OptionSpec> none = {};
  static const std::vector<OptionSpec> decompose = {
      {"P", "fit"}, {"r", 0.25}, {"probe", "s-decay"}, {"k", 0}, {"alpha", 0.5}, {"grid", 16}};
  static const std::vector<OptionSpec> profile = {{"P", "zero"},       {"k", 0},
                                                  {"base", nullptr},   {"norm_mode", "L1_average"},
                                                  {"grid", 16},        {"spatial_offsets", false},
                                                  {"solution", false}};
  static const std::vector<OptionSpec> classify = {{"P", "fit"},        {"k", 0},
                                                   {"alpha", 0.5},      {"r", 0.5},
                                                   {"base", nullptr},   {"norm_mode", "L1_average"},
                                                   {"grid", 16},        {"spatial_offsets", false},
                                                   {"solution", false}};
  static const std::vector<OptionSpec> jet = {{"P", "zero"}, {"k", 0}, {"alpha", 0.25}, {"eta", 0.5}, {"depth", 8}};
  static const std::vector<OptionSpec> verify = {{"lemma", "global"}, {"samples", 10000}, {"a", 0.0},
                                                 {"b", 1.0},          {"A", 0.25},        {"r", 1.0},
                                                 {"m", 1.0},          {"l", 1.0},         {"order", 0}};
  static const std::vector<OptionSpec> recovery = {{"k", 0}, {"alpha", 0.25}, {"grid", 16}, {"fit_divisor", 16.0}};
  switch (k) {
    case ExperimentKind::apply: return apply;
    case ExperimentKind::synthesize: return none;
    case ExperimentKind::decompose: return decompose;
    case ExperimentKind::nu_profile: return profile;
    case ExperimentKind::classify: return classify;
    case ExperimentKind::jet: return jet;
    case ExperimentKind::verify_kernel: return verify;
    case ExperimentKind::exponent_recovery: return recovery;
  }
  return none;
}

}  // namespace detail

// Validates a config object; relative paths resolve against dir. Throws ConfigError.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& dir = ".") {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;
  c.raw = j;
  if (j.value("schema", std::string()) != kConfigSchema)
    throw ConfigError(std::string("config.schema: expected '") + kConfigSchema + "'");
  static const char* common[] = {"schema", "experiment", "params", "field",    "field_file", "quad",
                                 "points", "points_file", "radii", "seed",    "out_dir",    "out",
                                 "threads", "options"};
  const auto ename = j.value("experiment", std::string());
  bool found = false;
  for (const auto& [n, v] : experiment_names())
    if (n == ename) {
      c.experiment = v;
      found = true;
    }
  if (!found) throw ConfigError("config.experiment: unknown experiment '" + ename + "'");
  const auto& specs = detail::option_specs(c.experiment);
  for (const auto& [key, v] : j.items()) {
    bool ok = false;
    for (const char* k : common) ok = ok || key == k;
    for (const auto& s : specs) ok = ok || key == s.key;
    if (!ok) throw ConfigError("config: unknown field '" + key + "' for experiment " + ename);
  }
  for (const auto& s : specs) c.options[s.key] = j.contains(s.key) ? j[s.key] : s.fallback;

  if (j.contains("params")) c.params = params_from_json(detail::load_or_inline(j["params"], dir));
  if (j.contains("quad")) c.quad = quad_from_json(detail::load_or_inline(j["quad"], dir));
  if (j.contains("field") && j.contains("field_file"))
    throw ConfigError("config: give either field or field_file");
  if (j.contains("field")) {
    const auto& f = j["field"];
    if (f.is_string()) {
      const std::filesystem::path ref = f.get<std::string>();
      const bool as_path = !builtin_catalog().count(ref.string()) && ref.is_relative();
      c.field = resolve_field_ref(as_path ? (dir / ref).string() : ref.string());
    }
    else c.field = FieldCatalogEntry{"inline", f};
  } else if (j.contains("field_file")) {
    const std::filesystem::path p = j["field_file"].get<std::string>();
    c.field = resolve_field_ref((p.is_absolute() ? p : dir / p).string());
  }
  if (c.field) {
    const auto f = field_from_json(c.field->spec, dir);
    if (f.dim != c.params.n())
      throw ConfigError("field: dimension " + std::to_string(f.dim) + " does not match params.n");
  } else if (c.experiment != ExperimentKind::verify_kernel) {
    throw ConfigError("config.field: required for experiment " + ename);
  }
  if (j.contains("points") && j.contains("points_file"))
    throw ConfigError("config: give either points or points_file");
  if (j.contains("points")) {
    for (const auto& p : j["points"]) {
      auto pt = point_from_json(p, "config.points");
      if (pt.dim() != c.params.n()) throw ConfigError("config.points: dimension does not match params.n");
      c.points.push_back(std::move(pt));
    }
  } else if (j.contains("points_file")) {
    const std::filesystem::path p = j["points_file"].get<std::string>();
    c.points = points_from_csv(read_file(p.is_absolute() ? p : dir / p), c.params.n());
  }
  if ((c.experiment == ExperimentKind::apply || c.experiment == ExperimentKind::synthesize) && c.points.empty())
    throw ConfigError("config.points: required for experiment " + ename);
  const char* default_radii = c.experiment == ExperimentKind::exponent_recovery ? "dyadic:8@0.125"
                              : c.experiment == ExperimentKind::decompose     ? "dyadic:6"
                                                                              : "dyadic:8";
  c.radii_text = j.contains("radii") ? j["radii"].dump() : default_radii;
  c.radii = parse_radii(j.contains("radii") ? j["radii"] : json(default_radii));
  try {
    c.seed = j.value("seed", std::uint64_t{1});
    c.threads = j.value("threads", default_threads());
    if (c.threads < 1) throw ConfigError("config.threads: must be >= 1");
    // output paths resolve against the config's directory, like every input path
    if (j.contains("out_dir")) c.out_dir = dir / j["out_dir"].get<std::string>();
    if (j.contains("out")) c.out = dir / j["out"].get<std::string>();
    const auto& o = c.options;
    auto positive_int = [&](const char* key) {
      if (o.contains(key) && !(o[key].get<int>() >= 1)) throw ConfigError(std::string("config.") + key + ": must be >= 1");
    };
    positive_int("grid");
    positive_int("depth");
    positive_int("samples");
    if (o.contains("k") && o["k"].get<int>() < 0) throw ConfigError("config.k: must be >= 0");
    if (o.contains("alpha")) {
      const double a = o["alpha"].get<double>();
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("config.alpha: must lie in [0,1]");
    }
    if (o.contains("norm_mode")) {
      const auto m = o["norm_mode"].get<std::string>();
      if (m != "L1_average" && m != "sup") throw ConfigError("config.norm_mode: expected L1_average or sup");
    }
    if (o.contains("P") && o["P"].is_string()) {
      const auto s = o["P"].get<std::string>();
      if (s != "fit" && s != "zero") c.options["P"] = detail::load_or_inline(o["P"], dir);
    }
    if (c.options.contains("P") && c.options["P"].is_object()) {
      const auto P = polynomial_from_json(c.options["P"]);
      if (P.n() != c.params.n()) throw ConfigError("config.P: dimension does not match params.n");
    }
    if (c.experiment == ExperimentKind::apply) {
      const auto op = o["operator"].get<std::string>();
      if (op != "fully_fractional" && op != "laplacian" && op != "marchaud")
        throw ConfigError("config.operator: expected fully_fractional, laplacian or marchaud");
    }
    if (c.experiment == ExperimentKind::decompose) {
      const auto pr = o["probe"].get<std::string>();
      if (pr != "s-decay" && pr != "identities") throw ConfigError("config.probe: expected s-decay or identities");
      const double r = o["r"].get<double>();
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("config.r: must lie in (0,1]");
      if (pr == "identities" && c.points.empty()) throw ConfigError("config.points: required for the identities probe");
    }
    if (c.experiment == ExperimentKind::verify_kernel) {
      const auto l = o["lemma"].get<std::string>();
      if (l != "global" && l != "local" && l != "translation" && l != "translation_derivative")
        throw ConfigError("config.lemma: expected global, local, translation or translation_derivative");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

// ---------------------------------------------------------------- running

struct RunResult {
  int status = 0;  // 0 ok, 3 partial
  std::vector<std::filesystem::path> artifacts;
  json manifest;
};

namespace detail {

inline ParabolicPolynomial option_poly(const ExperimentConfig& c, const SpaceTimePoint& base, int k,
                                       const PointEvaluator& f, double fit_radius) {
  const auto& v = c.options["P"];
  if (v.is_object()) return polynomial_from_json(v);
  if (v == "zero") return ParabolicPolynomial(k, base);
  FitOptions fo;
  fo.threads = c.threads;
  return fit_polynomial(f, base, k, fit_radius, NormMode::L1_average, fo);
}

inline SpaceTimePoint option_base(const ExperimentConfig& c) {
  const auto& b = c.options.contains("base") ? c.options["base"] : json(nullptr);
  if (b.is_null()) return SpaceTimePoint{std::vector<double>(c.params.n(), 0.0), 0.0};
  auto p = point_from_json(b, "config.base");
  require_dim(p.dim(), c.params.n(), "config.base");
  return p;
}

inline std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

}  // namespace detail

inline json versions_json() {
  return {{"fracheat", kVersion},
          {"compiler", detail::compiler_id()},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                        std::to_string(BOOST_VERSION % 100)}};
}

// Runs one experiment; artifacts go to out_dir (the main one to cfg.out when set), then
// manifest.json. Failures after validation still write a manifest with status "failed".
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  json& m = res.manifest;
  m["schema"] = kManifestSchema;
  m["experiment"] = to_string(cfg.experiment);
  m["config"] = cfg.raw;
  m["params"] = params_to_json(cfg.params);
  m["field"] = cfg.field ? json{{"id", cfg.field->id}, {"spec", cfg.field->spec}} : json(nullptr);
  m["quad"] = quad_to_json(cfg.quad);
  m["quad_hash"] = quad_hash(cfg.quad);
  m["seed"] = cfg.seed;
  m["threads"] = cfg.threads;
  m["radii"] = cfg.radii;
  m["versions"] = versions_json();
  json failures = json::array();
  auto main_path = [&](const char* name) { return cfg.out ? *cfg.out : cfg.out_dir / name; };
  auto emit = [&](const fs::path& p, const std::string& content) {
    write_atomic(p, content);
    res.artifacts.push_back(p);
  };
  const auto& o = cfg.options;
  const auto& p = cfg.params;
  const auto& q = cfg.quad;
  std::optional<ScalarField> f;
  if (cfg.field) f = field_from_json(cfg.field->spec);

  try {
    switch (cfg.experiment) {
      case ExperimentKind::apply:
      case ExperimentKind::synthesize: {
        const bool syn = cfg.experiment == ExperimentKind::synthesize;
        const auto op = syn ? std::string() : o["operator"].get<std::string>();
        std::vector<Estimate> vals(cfg.points.size());
        std::vector<std::string> errs(cfg.points.size());
        parallel_for(cfg.points.size(), cfg.threads, [&](std::size_t i) {
          try {
            const auto& pt = cfg.points[i];
            if (syn) {
              const auto e = synthesize_solution(*f, pt, p, q);
              vals[i] = {e.value, e.err_est};
            } else if (op == "laplacian") {
              vals[i] = apply_fractional_laplacian(*f, pt.x, p, q);
            } else if (op == "marchaud") {
              vals[i] = apply_marchaud(*f, pt.t, p.s(), q);
            } else {
              vals[i] = apply_fully_fractional(*f, pt, p, q);
            }
          } catch (const std::exception& e) {
            errs[i] = e.what();
          }
        });
        CsvTable t;
        for (int i = 0; i < p.n(); ++i) t.header.push_back(p.n() == 1 ? "x" : "x" + std::to_string(i + 1));
        t.header.insert(t.header.end(), {"t", "value", "err_est"});
        for (std::size_t i = 0; i < cfg.points.size(); ++i) {
          if (!errs[i].empty()) {
            failures.push_back({{"index", i}, {"error", errs[i]}});
            continue;
          }
          std::vector<double> row = cfg.points[i].x;
          row.insert(row.end(), {cfg.points[i].t, vals[i].value, vals[i].err_est});
          t.rows.push_back(std::move(row));
        }
        emit(main_path("values.csv"), t.str());
        break;
      }
      case ExperimentKind::decompose: {
        const auto base = SpaceTimePoint{std::vector<double>(p.n(), 0.0), 0.0};
        const int k = o["k"].get<int>();
        const auto P = detail::option_poly(cfg, base, k, evaluator(*f), cfg.radii.back() / 16.0);
        m["P"] = polynomial_to_json(P);
        if (o["probe"] == "s-decay") {
          DecayProbeOptions dopt;
          dopt.grid = o["grid"].get<int>();
          dopt.threads = cfg.threads;
          const auto rows = s_decay_probe(*f, P, k, o["alpha"].get<double>(), cfg.radii, p, q, dopt);
          CsvTable t{{"r", "avg_abs_S", "err_est"}, {}};
          for (const auto& r : rows) t.rows.push_back({r.r, r.avg_abs_S, r.err_est});
          m["decay_slope"] = decay_slope(rows);
          emit(main_path("decay.csv"), t.str());
        } else {
          const DecompositionBundle b(*f, P, o["r"].get<double>(), p, q);
          const Component comps[] = {Component::u,   Component::v_r, Component::w_r, Component::w_1,
                                     Component::S_r, Component::T_r, Component::u_P};
          std::vector<std::array<KernelIntegral, 7>> vals(cfg.points.size());
          parallel_for(cfg.points.size() * 7, cfg.threads, [&](std::size_t job) {
            vals[job / 7][job % 7] = b.eval(comps[job % 7], cfg.points[job / 7]);
          });
          CsvTable t;
          for (int i = 0; i < p.n(); ++i) t.header.push_back(p.n() == 1 ? "x" : "x" + std::to_string(i + 1));
          t.header.insert(t.header.end(), {"t", "u", "v_r", "w_r", "w_1", "S_r", "T_r", "u_P",
                                           "residual_u", "residual_w1", "err_est"});
          for (std::size_t i = 0; i < cfg.points.size(); ++i) {
            const auto& v = vals[i];
            std::vector<double> row = cfg.points[i].x;
            row.push_back(cfg.points[i].t);
            double err = 0.0;
            for (const auto& e : v) {
              row.push_back(e.value);
              err += e.err_est;
            }
            row.push_back(v[0].value - v[1].value - v[2].value);
            row.push_back(v[3].value - v[4].value - v[5].value - v[6].value);
            row.push_back(err);
            t.rows.push_back(std::move(row));
          }
          emit(main_path("identities.csv"), t.str());
        }
        break;
      }
      case ExperimentKind::nu_profile:
      case ExperimentKind::classify: {
        const auto base = detail::option_base(cfg);
        const int k = o["k"].get<int>();
        const auto ev = o["solution"].get<bool>() ? solution_evaluator(*f, p, q) : evaluator(*f);
        const auto mode = o["norm_mode"] == "sup" ? NormMode::sup : NormMode::L1_average;
        NuOptions no;
        no.grid = o["grid"].get<int>();
        no.threads = cfg.threads;
        no.spatial_offsets = o["spatial_offsets"].get<bool>();
        const double fit_r = cfg.radii.back() / 16.0;
        const auto P = detail::option_poly(cfg, base, k, ev, fit_r);
        const auto prof = nu_profile(ev, base, P, cfg.radii, mode, no);
        m["P"] = polynomial_to_json(P);
        if (cfg.experiment == ExperimentKind::nu_profile) {
          emit(main_path("nu_profile.csv"), profile_csv(prof).str());
          break;
        }
        const double alpha = o["alpha"].get<double>();
        const double r = o["r"].get<double>();
        auto rep = classify_pointwise(prof, k, alpha, r);
        rep.jet = P;
        if (o["P"] == "fit") {
          // sensitivity to the fitted polynomial: refit at half the radius
          FitOptions fo;
          fo.threads = cfg.threads;
          const auto P2 = fit_polynomial(ev, base, k, 0.5 * fit_r, NormMode::L1_average, fo);
          const auto rep2 = classify_pointwise(nu_profile(ev, base, P2, cfg.radii, mode, no), k, alpha, r);
          rep.diagnostics["label_sensitive"] = rep2.label.kind != rep.label.kind ? 1.0 : 0.0;
        }
        emit(cfg.out_dir / "nu_profile.csv", profile_csv(prof).str());
        emit(main_path("report.json"), report_to_json(rep).dump(2) + "\n");
        break;
      }
      case ExperimentKind::jet: {
        const int k = o["k"].get<int>();
        const auto base = SpaceTimePoint{std::vector<double>(p.n(), 0.0), 0.0};
        const auto P = detail::option_poly(cfg, base, k, evaluator(*f), cfg.radii.back() / 16.0);
        JetOptions jo;
        jo.threads = cfg.threads;
        const auto js = extract_jet(*f, P, k, o["alpha"].get<double>(), p, o["eta"].get<double>(),
                                    o["depth"].get<int>(), q, jo);
        emit(main_path("jet.json"), jet_to_json(js).dump(2) + "\n");
        break;
      }
      case ExperimentKind::verify_kernel: {
        SamplePlan plan;
        plan.samples = o["samples"].get<std::size_t>();
        plan.seed = cfg.seed;
        const auto lemma = o["lemma"].get<std::string>();
        const double a = o["a"].get<double>(), b = o["b"].get<double>(), A = o["A"].get<double>(),
                     r = o["r"].get<double>();
        BoundReport rep;
        if (lemma == "global") rep = verify_global_bound(a, b, A, r, plan, p.n());
        else if (lemma == "local") rep = verify_local_bound(a, b, A, r, plan, p.n());
        else if (lemma == "translation")
          rep = verify_translation_bound(p, r, o["m"].get<double>(), o["l"].get<double>(), plan);
        else rep = verify_translation_derivative_bound(p, r, o["order"].get<int>(), plan);
        emit(main_path("report.json"), bound_to_json(rep).dump(2) + "\n");
        break;
      }
      case ExperimentKind::exponent_recovery: {
        RecoveryOptions ro;
        ro.quad = q;
        ro.grid = o["grid"].get<int>();
        ro.fit_divisor = o["fit_divisor"].get<double>();
        ro.threads = cfg.threads;
        const auto rr = exponent_recovery_runner(*f, p, cfg.radii, o["k"].get<int>(), o["alpha"].get<double>(), ro);
        m["spatial_offsets"] = rr.spatial_offsets;
        emit(cfg.out_dir / "nu_profile.csv", profile_csv(rr.profile).str());
        emit(main_path("report.json"), report_to_json(rr.report).dump(2) + "\n");
        break;
      }
    }
    m["status"] = failures.empty() ? "ok" : "partial";
    res.status = failures.empty() ? 0 : 3;
  } catch (const std::exception& e) {
    m["status"] = "failed";
    m["error"] = e.what();
    res.status = 1;
  }
  m["failures"] = failures;
  json arts = json::array();
  for (const auto& a : res.artifacts) arts.push_back(a.string());
  m["artifacts"] = arts;
  m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto mp = cfg.out_dir / "manifest.json";
  write_atomic(mp, m.dump(2) + "\n");
  return res;
}

}  // namespace fracheat
