// fracheat command line: one subcommand per experiment, plus `run` for config files.
// Exit codes: 0 ok, 1 run failed, 2 bad arguments or config, 3 partial output.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fracheat/experiment.hpp"

using namespace fracheat;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string params_file, quad_file, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct Common {
  std::string field, points, out, P, radii;
  std::optional<double> s;
  std::optional<int> n;
};

// Fills the config keys shared by every subcommand.
json base_json(const char* experiment, const Globals& g, const Common& c) {
  json j = {{"schema", kConfigSchema}, {"experiment", experiment}};
  json params = {{"n", 1}, {"s", 0.5}};
  if (!g.params_file.empty()) params = read_json_file(g.params_file);
  if (c.n) params["n"] = *c.n;
  if (c.s) params["s"] = *c.s;
  j["params"] = params;
  if (!g.quad_file.empty()) j["quad"] = read_json_file(g.quad_file);
  if (g.seed) j["seed"] = *g.seed;
  if (g.threads) j["threads"] = *g.threads;
  if (!g.out_dir.empty()) j["out_dir"] = g.out_dir;
  if (!c.field.empty()) j["field"] = c.field;
  if (!c.points.empty()) j["points_file"] = fs::absolute(c.points).string();
  if (!c.out.empty()) j["out"] = fs::absolute(c.out).string();
  if (!c.radii.empty()) {
    j["radii"] = c.radii.find(',') == std::string::npos ? json(c.radii) : json::parse("[" + c.radii + "]");
  }
  if (!c.P.empty()) j["P"] = c.P == "fit" || c.P == "zero" ? json(c.P) : json(fs::absolute(c.P).string());
  return j;
}

int execute(const json& cfg_json, const fs::path& dir, const Globals& g) {
  ExperimentConfig cfg;
  try {
    json j = cfg_json;
    if (g.threads) j["threads"] = *g.threads;
    if (g.seed) j["seed"] = *g.seed;
    if (!g.out_dir.empty()) j["out_dir"] = fs::absolute(g.out_dir).string();
    cfg = parse_config(j, dir);
  } catch (const ConfigError& e) {
    std::cerr << "fracheat: " << e.what() << "\n";
    return 2;
  }
  const auto res = run_experiment(cfg);
  for (const auto& a : res.artifacts) std::cout << a.string() << "\n";
  std::cout << (cfg.out_dir / "manifest.json").string() << "\n";
  if (res.status != 0) {
    std::cerr << "fracheat: " << res.manifest.value("status", std::string()) << ": "
              << res.manifest.value("error", res.manifest["failures"].dump()) << "\n";
  }
  return res.status;
}

template <class T>
void opt_if(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully fractional heat operator: apply, synthesize, decompose and classify regularity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Globals g;
  app.add_option("--params", g.params_file, "JSON file {n, s}");
  app.add_option("--quad", g.quad_file, "JSON quadrature spec");
  app.add_option("--seed", g.seed, "sampling seed");
  app.add_option("--out-dir", g.out_dir, "directory for outputs and manifest.json");
  app.add_option("--threads", g.threads, "worker threads (default FRACHEAT_THREADS or 1)")->check(CLI::PositiveNumber);

  std::optional<json> job;
  fs::path job_dir = ".";

  auto add_common = [](CLI::App* sc, Common& c, bool points) {
    sc->fallthrough();
    sc->add_option("--field,--f", c.field, "catalog id or JSON constructor file");
    if (points) sc->add_option("--points", c.points, "CSV of x..., t");
    sc->add_option("--out", c.out, "main output file");
    sc->add_option("--s", c.s, "fractional order in (0,1)");
    sc->add_option("--n", c.n, "space dimension (1 or 2)");
  };

  // apply
  Common ac;
  std::string op = "fully_fractional";
  auto* apply = app.add_subcommand("apply", "apply the operator to a catalog field at points");
  add_common(apply, ac, true);
  apply->add_option("--operator", op, "fully_fractional, laplacian or marchaud");
  apply->callback([&] {
    job = base_json("apply", g, ac);
    (*job)["operator"] = op;
  });

  // synthesize
  Common sc;
  auto* syn = app.add_subcommand("synthesize", "u = kernel * f at points");
  add_common(syn, sc, true);
  syn->callback([&] { job = base_json("synthesize", g, sc); });

  // decompose
  Common dc;
  std::optional<double> dr, dalpha;
  std::optional<int> dk, dgrid;
  std::string probe;
  auto* dec = app.add_subcommand("decompose", "near/far splitting probes");
  add_common(dec, dc, true);
  dec->add_option("--P", dc.P, "polynomial JSON file, 'fit' or 'zero'");
  dec->add_option("--r", dr, "splitting radius");
  dec->add_option("--probe", probe, "s-decay or identities")->check(CLI::IsMember({"s-decay", "identities"}));
  dec->add_option("--radii", dc.radii, "dyadic:N[@r0] or a comma list");
  dec->add_option("--k", dk);
  dec->add_option("--alpha", dalpha);
  dec->add_option("--grid", dgrid);
  dec->callback([&] {
    job = base_json("decompose", g, dc);
    opt_if(*job, "r", dr);
    opt_if(*job, "alpha", dalpha);
    opt_if(*job, "k", dk);
    opt_if(*job, "grid", dgrid);
    if (!probe.empty()) (*job)["probe"] = probe;
  });

  // nu-profile and classify share most flags
  struct ProfileFlags {
    Common c;
    std::optional<int> k, grid;
    std::optional<double> alpha, r;
    std::string norm_mode;
    bool spatial = false, solution = false;
  };
  auto add_profile = [&](CLI::App* a, ProfileFlags& pf, bool classify) {
    add_common(a, pf.c, false);
    a->add_option("--P", pf.c.P, "polynomial JSON file, 'fit' or 'zero'");
    a->add_option("--radii", pf.c.radii, "dyadic:N[@r0] or a comma list");
    a->add_option("--k", pf.k);
    a->add_option("--grid", pf.grid);
    a->add_option("--norm-mode", pf.norm_mode)->check(CLI::IsMember({"L1_average", "sup"}));
    a->add_flag("--spatial-offsets", pf.spatial, "sample at the base time only");
    a->add_flag("--solution", pf.solution, "profile u = synthesize(f) instead of f");
    if (classify) {
      a->add_option("--alpha", pf.alpha);
      a->add_option("--r", pf.r, "dyadic ratio in [1/4, 1/2]");
    }
  };
  auto profile_json = [&](const char* name, const ProfileFlags& pf) {
    json j = base_json(name, g, pf.c);
    opt_if(j, "k", pf.k);
    opt_if(j, "grid", pf.grid);
    opt_if(j, "alpha", pf.alpha);
    opt_if(j, "r", pf.r);
    if (!pf.norm_mode.empty()) j["norm_mode"] = pf.norm_mode;
    if (pf.spatial) j["spatial_offsets"] = true;
    if (pf.solution) j["solution"] = true;
    return j;
  };
  ProfileFlags npf, cpf;
  auto* nu = app.add_subcommand("nu-profile", "oscillation profile r -> nu(r)");
  add_profile(nu, npf, false);
  nu->callback([&] { job = profile_json("nu_profile", npf); });
  auto* cls = app.add_subcommand("classify", "pointwise regularity class from dyadic sums");
  add_profile(cls, cpf, true);
  cls->callback([&] { job = profile_json("classify", cpf); });

  // jet
  Common jc;
  std::optional<int> jk, depth;
  std::optional<double> jalpha, eta;
  auto* jet = app.add_subcommand("jet", "iterated jets of the solution at the origin");
  add_common(jet, jc, false);
  jet->add_option("--P", jc.P, "jet of f: polynomial JSON file or 'zero'");
  jet->add_option("--k", jk);
  jet->add_option("--alpha", jalpha);
  jet->add_option("--eta", eta);
  jet->add_option("--depth", depth);
  jet->callback([&] {
    job = base_json("jet", g, jc);
    opt_if(*job, "k", jk);
    opt_if(*job, "alpha", jalpha);
    opt_if(*job, "eta", eta);
    opt_if(*job, "depth", depth);
  });

  // verify-kernel
  Common vc;
  std::string lemma = "global";
  std::optional<std::size_t> samples;
  std::optional<double> va, vb, vA, vr, vm, vl;
  std::optional<int> order;
  auto* ver = app.add_subcommand("verify-kernel", "empirical constants for the kernel bounds");
  ver->fallthrough();
  ver->add_option("--lemma", lemma)
      ->check(CLI::IsMember({"global", "local", "translation", "translation_derivative"}));
  ver->add_option("--samples", samples);
  ver->add_option("--a", va);
  ver->add_option("--b", vb);
  ver->add_option("--A", vA);
  ver->add_option("--r", vr);
  ver->add_option("--m", vm);
  ver->add_option("--l", vl);
  ver->add_option("--order", order, "derivative order for translation_derivative");
  ver->add_option("--out", vc.out);
  ver->add_option("--s", vc.s);
  ver->add_option("--n", vc.n);
  ver->callback([&] {
    job = base_json("verify_kernel", g, vc);
    (*job)["lemma"] = lemma;
    opt_if(*job, "samples", samples);
    opt_if(*job, "a", va);
    opt_if(*job, "b", vb);
    opt_if(*job, "A", vA);
    opt_if(*job, "r", vr);
    opt_if(*job, "m", vm);
    opt_if(*job, "l", vl);
    opt_if(*job, "order", order);
  });

  // exponent-recovery
  Common ec;
  std::optional<int> ek, egrid;
  std::optional<double> ealpha, fit_div;
  auto* rec = app.add_subcommand("exponent-recovery", "fitted Holder exponent of the solution at the origin");
  add_common(rec, ec, false);
  rec->add_option("--radii", ec.radii, "dyadic:N[@r0] or a comma list");
  rec->add_option("--k", ek);
  rec->add_option("--alpha", ealpha);
  rec->add_option("--grid", egrid);
  rec->add_option("--fit-divisor", fit_div, "polynomial fit radius is r_min / this");
  rec->callback([&] {
    job = base_json("exponent_recovery", g, ec);
    opt_if(*job, "k", ek);
    opt_if(*job, "alpha", ealpha);
    opt_if(*job, "grid", egrid);
    opt_if(*job, "fit_divisor", fit_div);
  });

  // run
  std::string config_file;
  auto* run = app.add_subcommand("run", "run a JSON experiment config");
  run->fallthrough();
  run->add_option("config", config_file, "experiment config")->required()->check(CLI::ExistingFile);
  run->callback([&] {
    const fs::path p(config_file);
    job = read_json_file(p);
    job_dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "fracheat: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "fracheat: " << e.what() << "\n";
    return 2;
  }
  if (!job) return 2;
  return execute(*job, job_dir, g);
}
