#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fracheat/experiment.hpp"

using namespace fracheat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("fracheat_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

json base_config(const char* experiment) {
  return {{"schema", kConfigSchema}, {"experiment", experiment}, {"params", {{"n", 1}, {"s", 0.5}}}};
}

}  // namespace

TEST(Numbers, FormatRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), ex(rng));
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "5.0000000000000000e-01");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_THROW(parse_double("1.0x"), ConfigError);
  EXPECT_DOUBLE_EQ(parse_double(" +2.5 "), 2.5);
}

TEST(Csv, WriteThenParse) {
  CsvTable t{{"x", "t", "value"}, {{0.1, -1.0, 3.0}, {0.2, -2.0, 1e-300}}};
  const auto back = parse_csv(t.str());
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.str(), t.str());
}

TEST(Csv, HeaderlessAndRagged) {
  EXPECT_TRUE(parse_csv("1,2\n3,4\n").header.empty());
  EXPECT_EQ(parse_csv("1,2\n3,4\n").rows.size(), 2u);
  EXPECT_THROW(parse_csv("a,b\n1,2\n3\n"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1,2\nc,d\n"), ConfigError);
  const auto pts = points_from_csv("x,t\n0.5,-1\n\n1,2\n", 1);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1].t, 2.0);
  EXPECT_THROW(points_from_csv("1,2,3\n", 1), ConfigError);
}

TEST(Files, AtomicWriteReplaces) {
  const auto d = scratch("atomic");
  const auto p = d / "sub" / "a.txt";
  write_atomic(p, "one");
  write_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(d / "sub")) ++entries;
  EXPECT_EQ(entries, 1);
  fs::remove_all(d);
}

TEST(Json, PolynomialRoundTrip) {
  ParabolicPolynomial P(3, SpaceTimePoint{{0.25, -0.5}, 1.0});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (const auto& m : P.indices()) P.set(m, g(rng));
  const auto Q = polynomial_from_json(json::parse(polynomial_to_json(P).dump()));
  EXPECT_EQ(Q.degree_bound(), 3);
  EXPECT_EQ(Q.coeffs(), P.coeffs());
  EXPECT_EQ(Q.base().x, P.base().x);
  const double x[2] = {0.3, 0.7};
  EXPECT_EQ(Q(std::span<const double>(x, 2), -0.2), P(std::span<const double>(x, 2), -0.2));
  EXPECT_THROW(polynomial_from_json({{"k", 1}}), ConfigError);
  EXPECT_THROW(polynomial_from_json({{"k", 1}, {"base", {0, 0}}, {"coeffs", {{{"sigma", {1}}, {"a", 1}}}}}),
               ConfigError);
}

TEST(Json, ParamsAndQuad) {
  const auto p = params_from_json(params_to_json(FracParams(2, 0.3)));
  EXPECT_EQ(p.n(), 2);
  EXPECT_EQ(p.s(), 0.3);
  EXPECT_THROW(params_from_json({{"n", 1}, {"s", 1.5}}), ConfigError);
  QuadratureSpec q;
  q.graded_nodes = 9;
  q.tail_mode = TailMode::bound_only;
  const auto q2 = quad_from_json(quad_to_json(q));
  EXPECT_EQ(q2.graded_nodes, 9);
  EXPECT_EQ(q2.tail_mode, q.tail_mode);
  EXPECT_EQ(quad_hash(q2), quad_hash(q));
  EXPECT_NE(quad_hash(q), quad_hash(QuadratureSpec{}));
  EXPECT_EQ(quad_hash(q).size(), 16u);
  EXPECT_THROW(quad_from_json({{"graded", 4}}), ConfigError);
  EXPECT_THROW(quad_from_json({{"graded_nodes", 2}}), ConfigError);
  EXPECT_THROW(quad_from_json({{"tail_mode", "magic"}}), ConfigError);
}

TEST(Catalog, EveryEntryBuilds) {
  for (const auto& [id, spec] : builtin_catalog()) {
    const auto f = field_from_json(spec);
    const double x[1] = {0.3};
    EXPECT_TRUE(std::isfinite(f(std::span<const double>(x, 1), -0.4))) << id;
  }
  EXPECT_THROW(catalog_entry("nope"), ConfigError);
  EXPECT_THROW(resolve_field_ref("/no/such/file.json"), ConfigError);
  EXPECT_THROW(field_from_json({{"constructor", "power_cusp"}}), ConfigError);
  EXPECT_THROW(field_from_json({{"constructor", "spline"}}), ConfigError);
}

TEST(Catalog, PolynomialFromFile) {
  const auto d = scratch("polyfile");
  ParabolicPolynomial P(1, SpaceTimePoint{{0.0}, 0.0});
  P.set(MultiIndex{{1, 0}}, 2.0);
  write_atomic(d / "p.json", polynomial_to_json(P).dump());
  write_atomic(d / "f.json", json{{"constructor", "polynomial"}, {"file", "p.json"}}.dump());
  const auto e = resolve_field_ref((d / "f.json").string());
  const auto f = field_from_json(e.spec);
  const double x[1] = {0.75};
  EXPECT_DOUBLE_EQ(f(std::span<const double>(x, 1), 0.0), 1.5);
  fs::remove_all(d);
}

TEST(Config, RadiiForms) {
  const auto a = parse_radii("dyadic:4");
  EXPECT_EQ(a, (std::vector<double>{0.5, 0.25, 0.125, 0.0625}));
  EXPECT_EQ(parse_radii("dyadic:3@0.125").back(), 0.03125);
  EXPECT_EQ(parse_radii(json::array({0.5, 0.3})).size(), 2u);
  EXPECT_EQ(parse_radii({{"r0", 0.5}, {"count", 3}, {"ratio", 0.25}}).back(), 0.03125);
  EXPECT_THROW(parse_radii("geometric:4"), ConfigError);
  EXPECT_THROW(parse_radii(json::array({0.25, 0.5})), ConfigError);
}

TEST(Config, Validation) {
  auto c = base_config("apply");
  c["field"] = "exp_symbol_1_0";
  c["points"] = {{0.0, 0.0}};
  EXPECT_NO_THROW(parse_config(c));
  auto bad = c;
  bad["schema"] = "other/1";
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["experiment"] = "integrate";
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["colour"] = 1;
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad.erase("points");
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["points"] = {{0.0, 0.0, 0.0}};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["field"] = "nope";
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["operator"] = "riesz";
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["params"] = {{"n", 1}, {"s", 0.0}};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = c;
  bad["threads"] = 0;
  EXPECT_THROW(parse_config(bad), ConfigError);
  auto cl = base_config("classify");
  cl["field"] = "cusp_0.5";
  cl["alpha"] = 1.5;
  EXPECT_THROW(parse_config(cl), ConfigError);
  cl["alpha"] = 0.5;
  cl["norm_mode"] = "L2";
  EXPECT_THROW(parse_config(cl), ConfigError);
  auto v = base_config("verify_kernel");
  v["lemma"] = "bogus";
  EXPECT_THROW(parse_config(v), ConfigError);
  v["lemma"] = "global";
  EXPECT_NO_THROW(parse_config(v));
}

TEST(Run, ApplyExpSymbolIsEigenfunction) {
  const auto d = scratch("apply");
  auto c = base_config("apply");
  c["field"] = "exp_symbol_1_0";
  c["points"] = {{0.0, 0.0}, {0.3, -0.5}, {-1.0, 0.25}, {2.0, 1.0}, {0.7, -2.0}};
  c["out_dir"] = d.string();
  const auto res = run_experiment(parse_config(c));
  ASSERT_EQ(res.status, 0) << res.manifest.dump();
  const auto t = parse_csv(read_file(d / "values.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "t", "value", "err_est"}));
  ASSERT_EQ(t.rows.size(), 5u);
  for (const auto& r : t.rows) {
    const double ratio = r[2] / std::exp(r[1]);
    EXPECT_GE(ratio, 0.999);
    EXPECT_LE(ratio, 1.001);
  }
  const auto m = read_json_file(d / "manifest.json");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["quad_hash"], quad_hash(QuadratureSpec{}));
  EXPECT_EQ(m["field"]["id"], "exp_symbol_1_0");
  EXPECT_TRUE(m.contains("wall_time_s"));
  EXPECT_EQ(m["versions"]["fracheat"], kVersion);
  fs::remove_all(d);
}

TEST(Run, CsvIsDeterministicAcrossThreads) {
  const auto d = scratch("det");
  auto c = base_config("apply");
  c["field"] = "bump";
  c["points"] = {{0.0, 0.0}, {0.3, -0.5}, {-1.0, 0.25}};
  c["out_dir"] = d.string();
  c["threads"] = 1;
  c["out"] = (d / "a.csv").string();
  run_experiment(parse_config(c));
  c["threads"] = 3;
  c["out"] = (d / "b.csv").string();
  run_experiment(parse_config(c));
  EXPECT_EQ(read_file(d / "a.csv"), read_file(d / "b.csv"));
  fs::remove_all(d);
}

TEST(Run, ClassifyCuspWithZeroPolynomial) {
  const auto d = scratch("classify");
  auto c = base_config("classify");
  c["field"] = "cusp_0.5";
  c["k"] = 0;
  c["alpha"] = 0.5;
  c["P"] = "zero";
  c["radii"] = "dyadic:10";
  c["out_dir"] = d.string();
  const auto res = run_experiment(parse_config(c));
  ASSERT_EQ(res.status, 0) << res.manifest.dump();
  const auto rep = read_json_file(d / "report.json");
  EXPECT_EQ(rep["class_label"], "holder(0, 0.5)");
  EXPECT_NEAR(rep["fitted_exponent"].get<double>(), 0.5, 0.05);
  const auto prof = parse_csv(read_file(d / "nu_profile.csv"));
  EXPECT_EQ(prof.header, (std::vector<std::string>{"r", "nu", "err_est"}));
  EXPECT_EQ(prof.rows.size(), 10u);
  fs::remove_all(d);
}

TEST(Run, VerifyKernelReport) {
  const auto d = scratch("verify");
  auto c = base_config("verify_kernel");
  c["lemma"] = "global";
  c["samples"] = 2000;
  c["a"] = 0.5;
  c["b"] = 1.0;
  c["out_dir"] = d.string();
  const auto res = run_experiment(parse_config(c));
  ASSERT_EQ(res.status, 0) << res.manifest.dump();
  const auto rep = read_json_file(d / "report.json");
  for (const char* key : {"lemma", "params", "empirical_C", "refinement_stable", "worst_point"})
    EXPECT_TRUE(rep.contains(key)) << key;
  EXPECT_GT(rep["empirical_C"].get<double>(), 0.0);
  fs::remove_all(d);
}

TEST(Run, JetOnPolynomialData) {
  const auto d = scratch("jet");
  ParabolicPolynomial P(2, SpaceTimePoint{{0.0}, 0.0});
  P.set(MultiIndex{{2, 0}}, 1.0);
  auto c = base_config("jet");
  c["field"] = {{"constructor", "polynomial"}, {"polynomial", polynomial_to_json(P)}};
  c["k"] = 0;
  c["alpha"] = 0.25;
  c["depth"] = 3;
  c["out_dir"] = d.string();
  const auto res = run_experiment(parse_config(c));
  ASSERT_EQ(res.status, 0) << res.manifest.dump();
  const auto j = read_json_file(d / "jet.json");
  EXPECT_EQ(j["polys"].size(), 3u);
  EXPECT_TRUE(j.contains("convergence_rates"));
  fs::remove_all(d);
}

TEST(Run, MalformedConfigWritesNothing) {
  const auto d = scratch("malformed");
  write_atomic(d / "cfg.json", R"({"schema": "fracheat.experiment/1", "experiment": "apply",
    "field": "bump", "points": [[0.0, 0.0]], "out_dir": ")" + d.string() + R"(", "quad": {"graded_nodes": 1}})");
  EXPECT_THROW(load_config(d / "cfg.json"), ConfigError);
  EXPECT_FALSE(fs::exists(d / "values.csv"));
  EXPECT_FALSE(fs::exists(d / "manifest.json"));
  write_atomic(d / "broken.json", "{\"schema\": ");
  EXPECT_THROW(load_config(d / "broken.json"), ConfigError);
  fs::remove_all(d);
}

TEST(Run, RuntimeFailureLeavesFailureManifest) {
  const auto d = scratch("fail");
  auto c = base_config("jet");
  c["field"] = "cusp_0.5";
  c["k"] = 4;
  c["alpha"] = 0.9;
  c["out_dir"] = d.string();
  const auto res = run_experiment(parse_config(c));
  EXPECT_EQ(res.status, 1);
  const auto m = read_json_file(d / "manifest.json");
  EXPECT_EQ(m["status"], "failed");
  EXPECT_FALSE(m["error"].get<std::string>().empty());
  EXPECT_FALSE(fs::exists(d / "jet.json"));
  fs::remove_all(d);
}

TEST(Config, PathsResolveAgainstConfigDirectory) {
  const auto d = scratch("paths");
  write_atomic(d / "pts.csv", "x,t\n0.5,0\n");
  write_atomic(d / "cfg.json", R"({"schema": "fracheat.experiment/1", "experiment": "synthesize",
    "field": "bump", "points_file": "pts.csv", "out_dir": "results", "quad": {"graded_nodes": 6}})");
  const auto c = load_config(d / "cfg.json");
  EXPECT_EQ(c.out_dir, d / "results");
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_EQ(c.points[0].x[0], 0.5);
  EXPECT_EQ(c.quad.graded_nodes, 6);
  fs::remove_all(d);
}
