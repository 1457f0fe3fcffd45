#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hiermirt/chain.hpp"
#include "hiermirt/io.hpp"

namespace hiermirt {

/// Prior settings before the level-1 trait count is known.
struct PriorSettings {
  std::optional<Vector> ab_mean;
  double ab_cov_scale = 4.0;
  std::optional<Vector> ag_mean;
  double ag_cov_scale = 4.0;
  double c_alpha = 1.0;
  double c_beta = 4.0;

  Priors resolve(int level1_traits) const;
};

struct RunConfig {
  std::string command;
  std::filesystem::path data;
  std::filesystem::path items;
  std::filesystem::path hierarchy;
  std::filesystem::path truth;  ///< optional truth bundle
  std::filesystem::path fit;    ///< fit output directory read by summarize
  std::filesystem::path out;   ///< empty: simulation/, fit/ or <fit>/summary
  std::optional<int> preset;
  std::optional<int> subjects;  ///< overrides the preset's J
  std::uint64_t seed = 1;
  int chains = 1;
  bool fix_items = false;  ///< hold item parameters at the truth (or item-file) values
  bool quick = false;      ///< validate with reduced Monte Carlo sizes
  SamplerConfig sampler;
  PriorSettings priors;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> burnin;
  std::optional<int> thin;
  std::optional<int> preset;
  std::optional<int> chains;
  std::optional<std::filesystem::path> out;
};

/// Parses the JSON schema; relative paths resolve against base_dir. Throws
/// InputError naming the key path on unknown keys, type mismatches and
/// missing required fields for the command.
RunConfig parse_config(const io::Json& file, const std::string& command, const ConfigOverrides& overrides,
                       const std::filesystem::path& base_dir = {});

/// Reads the file (if any) and applies parse_config.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::string& command,
                      const ConfigOverrides& overrides);

/// Output directory after applying the per-command default.
std::filesystem::path output_dir(const RunConfig& config);

/// Same schema as the input, with defaults filled in.
io::Json config_to_json(const RunConfig& config);

}  // namespace hiermirt
