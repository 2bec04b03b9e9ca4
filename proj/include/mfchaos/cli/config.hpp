#pragma once

// Experiment files. One YAML document holds the model and every section a
// command may need:
//
//   schema: 1
//   model: {type: mean_field | delay | kinetic, ...}
//   init: {mean: [...], cov: [[...]]}
//   scan: {...}        scan-n, scan-t, couple
//   simulate: {...}
//   lln: {...}
//   oracle: {...}
//   validation: {...}  spot-check options
//
// Unknown keys anywhere are errors. The document is converted to JSON first
// so that the manifest can embed it verbatim and hash it.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfchaos/experiments/scan.hpp"
#include "mfchaos/models/validators.hpp"
#include "mfchaos/oracle/gaussian_oracle.hpp"

namespace mfchaos {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what);
  std::string where;  // dotted key path, or the file name
};

struct SimulateConfig {
  std::size_t N = 100;
  double T = 1.0;
  double dt = 1e-2;
  std::vector<double> record_times;
  std::uint64_t seed = 1;
};

struct LlnConfig {
  std::string example = "bernoulli";
  std::vector<std::size_t> N;
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
};

struct OracleConfig {
  std::vector<std::size_t> N;
  std::vector<std::size_t> k{1};
  double t = 1.0;
  double dt_ode = 1e-3;
};

struct ExperimentConfig {
  nlohmann::json document;  // the whole file
  nlohmann::json model;     // the model section, checked but not yet built
  Vector init_mean;
  Matrix init_cov;
  std::optional<ScanConfig> scan;
  std::optional<SimulateConfig> simulate;
  std::optional<LlnConfig> lln;
  std::optional<OracleConfig> oracle;
  SpotCheckOptions validation;

  std::string model_type() const;
  // Builds the model for step size dt (delay horizons are whole steps).
  ModelBundle bundle(double dt) const;
  // The linear-Gaussian coefficients when the model is a linear mean-field
  // model with constant noise.
  std::optional<LinearModelSpec> linear_spec() const;
  // FNV-1a of the canonical JSON of the model and init sections, as 16 hex digits.
  std::string model_hash() const;
};

// YAML text to JSON. Unquoted scalars become numbers, booleans or null when
// they parse as such.
nlohmann::json yaml_to_json(const std::string& text);

ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace mfchaos
