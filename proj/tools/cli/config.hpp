#pragma once

// Run configuration for the esqpt front-end. Configs are JSON or TOML; both
// are normalized to a JSON document before any block is read.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esqpt/dynamics.hpp"
#include "esqpt/model.hpp"
#include "esqpt/open_system.hpp"

namespace esqpt::cli {

using nlohmann::json;

/// Malformed, inconsistent or incomplete configuration (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& subcommands();

/// Parses a `.toml` file as TOML and anything else as JSON. A run manifest is
/// accepted too; its embedded effective config is returned.
json load_document(const std::filesystem::path& path);
json parse_document(const std::string& text, bool toml);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<double> tolerance_scale;
};

struct RunConfig {
  std::string subcommand;
  json document;  // effective config, overrides merged in

  std::optional<ModelParams> model;
  std::optional<TrapParams> trap;
  std::optional<int> fock_cutoff;
  std::optional<RampProtocol> protocol;
  std::optional<double> ramp_seconds;  // t_f when given in seconds
  int samples = 401;
  std::optional<DissipatorSpec> noise;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  double tolerance_scale = 1.0;
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;

  /// Subcommand block, or an empty object.
  const json& block(const std::string& name) const;

  const ModelParams& require_model() const;
  double require_energy_scale() const;
  const RampProtocol& require_protocol() const;
  std::uint64_t require_seed() const;
  /// Configured cutoff, else the default for (Δ, λ).
  HilbertSpace space() const;
  PropagationOptions propagation() const;
};

/// Reads every block and checks the subcommand's requirements. Throws
/// ConfigError (or ParameterError from a type invariant) before any
/// computation happens.
RunConfig resolve(const std::string& subcommand, json document, const Overrides& overrides = {});

/// Report-only check: all problems found, never throws on content.
json validation_report(const json& document, const std::string& subcommand = "");

// Block readers shared with the subcommands.
double get_number(const json& block, const std::string& key, std::optional<double> fallback = std::nullopt);
int get_int(const json& block, const std::string& key, std::optional<int> fallback = std::nullopt);
bool get_bool(const json& block, const std::string& key, bool fallback);
/// Angular frequency in rad/s from a plain-Hz entry; the block must carry
/// units = "2pi_hz".
double get_angular(const json& block, const std::string& key, const std::string& block_name);
/// Array, or {start, stop, points} / {start, stop, step}. An optional
/// "unit": "pi" multiplies every value by π.
std::vector<double> get_grid(const json& block, const std::string& key);

}  // namespace esqpt::cli
