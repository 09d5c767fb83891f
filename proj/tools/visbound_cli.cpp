#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "visbound/generators.hpp"
#include "visbound/mask_io.hpp"
#include "visbound/pipeline.hpp"

using nlohmann::json;
using namespace visb;

namespace {

// Command-line overrides; unset fields keep the config-file value.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> domain, path, out;
  std::optional<double> h, extent, radius, inner_radius, puncture_radius;
  std::optional<int> teeth, koch_level;
  std::optional<double> t, p, q_poincare, q_trace, q_hat, c, eta;
  std::optional<int> depth;
  bool strict = false;
  std::optional<std::vector<double>> z0;
  std::optional<int> ass1_points, ass1_scales;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> functions;
  bool no_cones = false;

  void attach(CLI::App* app, bool domain_only) {
    app->set_help_flag("--help", "print help");
    app->add_option("--domain", domain, "generator name");
    app->add_option("--h", h, "cell size");
    app->add_option("--extent", extent, "canvas half-width");
    app->add_option("--radius", radius, "disk radius");
    app->add_option("--inner-radius", inner_radius, "annulus inner radius");
    app->add_option("--teeth", teeth, "comb teeth N");
    app->add_option("--puncture-radius", puncture_radius, "punctured disk hole radius");
    app->add_option("--koch-level", koch_level, "snowflake level");
    app->add_option("--mask", path, "mask file for mask_file");
    if (domain_only) return;
    app->add_option("--config", config, "TOML or JSON config file");
    app->add_option("--t", t, "codimension of the boundary assumption");
    app->add_option("--p", p, "codimension of the conclusion and Sobolev exponent");
    app->add_option("--q-poincare", q_poincare, "Poincare exponent, t < q < p");
    app->add_option("--q-trace", q_trace, "trace exponent, above q-hat");
    app->add_option("--q-hat", q_hat, "intermediate exponent, p < q-hat < q-trace");
    app->add_option("--c", c, "John constant of the trace stage");
    app->add_option("--eta", eta, "scale ratio between generations");
    app->add_option("--depth", depth, "number of generations");
    app->add_flag("--strict", strict, "require eta < 1/168 and a resolved last generation");
    app->add_option("--z0", z0, "centre coordinates x y (default: deepest point)")->expected(2);
    app->add_option("--ass1-points", ass1_points, "boundary windows for the assumption sample");
    app->add_option("--ass1-scales", ass1_scales, "dyadic scales per window");
    app->add_option("--seed", seed, "sampling seed");
    app->add_option("--functions", functions, "trace test functions");
    app->add_flag("--no-cones", no_cones, "skip cone certificates");
    app->add_option("--out", out, "output directory");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = config ? load_config(*config) : PipelineConfig{};
    auto& d = cfg.domain;
    if (domain) d.name = *domain;
    if (h) d.h = *h;
    if (extent) d.extent = *extent;
    if (radius) d.radius = *radius;
    if (inner_radius) d.inner_radius = *inner_radius;
    if (teeth) d.teeth = *teeth;
    if (puncture_radius) d.puncture_radius = *puncture_radius;
    if (koch_level) d.koch_level = *koch_level;
    if (path) d.path = *path;
    if (t) cfg.t = *t;
    if (p) cfg.p = *p;
    if (q_poincare) cfg.q_poincare = *q_poincare;
    if (q_trace) cfg.q_trace = *q_trace;
    if (q_hat) cfg.q_hat = *q_hat;
    if (c) cfg.c = *c;
    if (eta) cfg.eta = *eta;
    if (depth) cfg.depth = *depth;
    if (strict) cfg.strict = true;
    if (z0) {
      cfg.z0_auto = false;
      cfg.z0 = {(*z0)[0], (*z0)[1]};
    }
    if (ass1_points) cfg.ass1_points = *ass1_points;
    if (ass1_scales) cfg.ass1_scales = *ass1_scales;
    if (seed) cfg.seed = *seed;
    if (functions) cfg.trace_functions = *functions;
    if (no_cones) cfg.cone_certificates = false;
    if (out) cfg.output_dir = *out;
    return cfg;
  }
};

int report_config_error(const ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& i : e.issues()) std::cerr << "  " << i.code << ": " << i.message << '\n';
  return 2;
}

void print_summary(const RunReport& r) {
  for (const auto& s : r.stages) {
    std::cout << s.name << ": " << to_string(s.status);
    if (!s.error_code.empty()) std::cout << " (" << s.error_code << ")";
    std::cout << '\n';
  }
  const json k = r.to_json()["constants"];
  std::cout << "c0 = " << k["c0"].dump() << ", c1 = " << k["c1"].dump() << ", M = " << k["M"].dump()
            << "  [" << k["label"].get<std::string>() << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visible-boundary content and trace verification"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // keeps -h free; --h is the cell size

  Overrides gen_o, run_o, ver_o;
  std::string gen_out, gen_format = "text";
  auto* gen = app.add_subcommand("generate", "rasterize a domain into an interior mask");
  gen_o.attach(gen, true);
  gen->add_option("-o,--output", gen_out, "mask file to write")->required();
  gen->add_option("--format", gen_format, "text or pgm")->check(CLI::IsMember({"text", "pgm"}));

  auto* run = app.add_subcommand("run", "run the full pipeline and write the report");
  run_o.attach(run, false);

  std::string lemma;
  auto* ver = app.add_subcommand("verify", "run one lemma's property suite");
  ver->add_option("lemma", lemma, "lemma id")->required()->check(CLI::IsMember(lemma_ids()));
  ver_o.attach(ver, false);

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "summarize a written report");
  rep->set_help_flag("--help", "print help");
  rep->add_option("dir", report_dir, "output directory of a run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto d = generate_domain(gen_o.resolve().domain);
      std::ofstream f(gen_out, std::ios::binary);
      if (!f) throw Error("io-error", "cannot write " + gen_out);
      if (gen_format == "pgm") write_pgm(f, d.interior);
      else write_text_mask(f, d.interior);
      std::cout << "wrote " << gen_out << " (" << d.interior.rows << "x" << d.interior.cols << ", "
                << d.interior.count() << " interior cells)\n";
      return 0;
    }
    if (*run) {
      const auto cfg = run_o.resolve();
      const auto r = run_pipeline(cfg);
      const auto dir = resolve_output_dir(cfg);
      emit(r, dir);
      print_summary(r);
      std::cout << "report written to " << dir << '\n';
      return r.all_ok() ? 0 : 1;
    }
    if (*ver) {
      const auto r = verify_lemma(lemma, ver_o.resolve());
      std::cout << json{{"id", r.id}, {"passed", r.passed}, {"details", r.details}}.dump(2) << '\n';
      return r.passed ? 0 : 1;
    }
    if (*rep) {
      std::ifstream f(report_dir + "/report.json");
      if (!f) throw Error("io-error", "no report.json in " + report_dir);
      const json j = json::parse(f);
      for (const auto& s : j["stages"]) {
        std::cout << s["name"].get<std::string>() << ": " << s["status"].get<std::string>();
        if (!s["error"].is_null()) std::cout << " (" << s["error"]["code"].get<std::string>() << ")";
        std::cout << '\n';
      }
      const auto& k = j["constants"];
      std::cout << "c0 = " << k["c0"].dump() << ", c1 = " << k["c1"].dump()
                << ", M = " << k["M"].dump() << "  [" << k["label"].get<std::string>() << "]\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    return report_config_error(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
