#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "hiermirt/config.hpp"

namespace hiermirt {

enum ExitCode : int { kExitOk = 0, kExitValidationFailed = 1, kExitInputError = 2 };

/// Writes data.csv, items.json, hierarchy.json, truth.json and fit_config.json into config.out.
int cmd_simulate(const RunConfig& config, std::ostream& log);

/// Runs config.chains chains; each writes trace_<group>.csv, posterior trait
/// means and SDs, a copy of the hierarchy and manifest.json. With several
/// chains the outputs go to chain_<c>/ with seed + c.
int cmd_fit(const RunConfig& config, std::ostream& log);

/// Reads a fit directory and writes lambda_summary.csv, parameter_summary.csv
/// and, when a truth bundle is available, rmse.csv and recovery_level<k>.csv.
int cmd_summarize(const RunConfig& config, std::ostream& log);

/// Oracle suite, plus input-file validation when data/items/hierarchy are given.
int cmd_validate(const RunConfig& config, std::ostream& log);

/// Loads the configuration and dispatches; maps errors onto exit codes.
int run_command(const std::string& command, const std::optional<std::filesystem::path>& config_file,
                const ConfigOverrides& overrides, std::ostream& log);

}  // namespace hiermirt
