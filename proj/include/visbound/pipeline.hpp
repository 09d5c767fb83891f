#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "visbound/error.hpp"
#include "visbound/generators.hpp"

namespace visb {

struct PipelineConfig {
  DomainSpec domain;

  // Exponents. Boundary stages need t < q_poincare < p; the trace stage needs
  // p < q_hat < q_trace.
  double t = 1.0;
  double p = 1.5;
  double q_poincare = 1.25;
  double q_trace = 3.0;
  double q_hat = 2.0;
  double c = 2.0;                 // John constant of the trace stage

  double eta = 0.125;
  int depth = 2;
  bool strict = false;

  bool z0_auto = true;            // deepest interior vertex, ties by id
  std::array<double, 2> z0{0.0, 0.0};

  // Sampling grids.
  int ass1_points = 12;           // boundary windows, evenly strided over the boundary
  int ass1_scales = 4;            // rho = ass1_rho_max * 2^-j, kept while rho >= 4h
  double ass1_rho_max = 0.5;
  int frostman_samples = 32;      // random boundary centres for the growth bound
  std::uint64_t seed = 1;
  std::vector<double> trace_radii;  // empty: halving from d_omega(z0) to 2h
  std::vector<std::string> trace_functions{"constant", "coordinate", "d_omega_sqrt", "d_omega",
                                           "potential"};
  bool cone_certificates = true;  // certify C[gamma] for every generation curve

  std::string output_dir = "visbound_out";
};

/// Names accepted in trace_functions.
const std::vector<std::string>& trace_function_names();

struct ConfigIssue {
  std::string code;
  std::string message;
};

/// Every violated constraint, in a fixed order; empty when the config is valid.
std::vector<ConfigIssue> validate_config(const PipelineConfig& cfg);

/// Error carrying the full issue list; code() is the first issue's code.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Throws ConfigError("invalid-config") for unknown keys or mistyped values.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
/// TOML when the extension is .toml, JSON otherwise.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_toml_config(const std::string& text);

/// Output directory with the VISBOUND_OUT_DIR override applied.
std::string resolve_output_dir(const PipelineConfig& cfg);

enum class StageStatus { ok, failed, skipped };
std::string to_string(StageStatus s);

struct StageRecord {
  std::string name;
  StageStatus status = StageStatus::skipped;
  std::string error_code;
  std::string error_message;
  double seconds = 0.0;           // wall clock, kept out of the canonical report
  nlohmann::json data;            // null when the stage did not complete
};

struct RunReport {
  nlohmann::json config;
  nlohmann::json versions;
  std::vector<StageRecord> stages;
  nlohmann::json plot;            // point clouds for P_k, curves, potentials

  std::optional<double> c0;       // empirical lower constant of the boundary assumption
  std::optional<double> c1;       // empirical lower constant of the visible-boundary conclusion
  std::optional<std::size_t> M;   // chain bound

  const StageRecord* stage(const std::string& name) const;
  bool all_ok() const;
  /// Canonical form: sorted keys, no wall-clock fields.
  nlohmann::json to_json() const;
  nlohmann::json timing_json() const;
};

/// Stage order: space, domain, ass1, generations, frostman, john, conc, trace.
/// A failing stage records its error; stages depending on it are skipped.
/// Throws ConfigError before any compute when validation fails.
RunReport run_pipeline(const PipelineConfig& cfg);

struct EmitFormats {
  bool json = true;
  bool csv = true;
  bool plot = true;
};

/// Writes report.json (canonical), timing.json, CSV tables and plot.json into
/// `dir`; returns the written paths.
std::vector<std::string> emit(const RunReport& report, const std::string& dir,
                              const EmitFormats& formats = {});

/// Identifiers accepted by verify_lemma.
const std::vector<std::string>& lemma_ids();

struct LemmaReport {
  std::string id;
  bool passed = false;
  nlohmann::json details;
};

/// Runs one lemma's property suite on the configured domain. Throws
/// "unknown-lemma".
LemmaReport verify_lemma(const std::string& id, const PipelineConfig& cfg);

}  // namespace visb
