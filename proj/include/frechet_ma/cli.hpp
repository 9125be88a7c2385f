#pragma once

// Subcommands behind the frechet-ma executable. Each returns a process exit
// code: 0 success, 1 input or validation error, 2 computation error.

#include "frechet_ma/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace frechet_ma::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kComputeError = 2 };

class ConfigError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// Resolved contents of a JSON configuration file. Candidate subsets are
/// 1-based in the file and 0-based here.
struct RunConfig {
	ExperimentConfig experiment;
	/// Candidates given explicitly in the file; otherwise defaults apply
	/// (the six-model simulation set, or nested prefixes for `fit`).
	bool candidates_given = false;
	std::optional<std::string> out_dir;
};

/// Validates against the schema; unknown keys and bad values raise
/// ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes every resolved field, so the result is itself a valid config.
nlohmann::json to_json(const RunConfig& cfg);

struct Overrides {
	std::optional<std::size_t> grid_m;
	std::optional<std::size_t> k_folds;
	std::optional<std::uint64_t> seed;
	std::optional<std::size_t> threads;
};

struct SimulateArgs {
	std::filesystem::path config;
	std::filesystem::path out_dir; ///< empty: use out_dir from the config
	Overrides overrides;
};

struct FitArgs {
	std::optional<std::filesystem::path> config;
	std::filesystem::path predictors_csv;
	std::filesystem::path responses_csv;
	std::filesystem::path out_dir; ///< empty: use out_dir from the config
	bool from_samples = false;
	std::optional<std::size_t> split_n_train;
	std::uint64_t split_seed = 0;
	Overrides overrides;
};

struct PredictArgs {
	std::filesystem::path model_json;
	std::filesystem::path query_csv;
	std::filesystem::path out_csv;
	std::optional<std::filesystem::path> truth_csv;
	std::optional<std::filesystem::path> spe_csv; ///< default: <out stem>_spe.csv
	std::string method = "CV";
};

/// Writes risk_table.csv, weights_table.csv and run_meta.json.
int cmd_simulate(const SimulateArgs& args, std::ostream& log);

/// Writes weights.csv, fitted.csv and model.json (plus test_spe.csv with --split).
int cmd_fit(const FitArgs& args, std::ostream& log);

/// Writes one averaged prediction grid per query row.
int cmd_predict(const PredictArgs& args, std::ostream& log);

/// Loads the responses file format (header of grid levels or labels, rows of
/// non-decreasing quantiles). Throws io::InputError naming the bad row.
std::vector<QuantileGrid> read_response_grids(const std::filesystem::path& path,
                                              std::optional<std::size_t> expected_m = std::nullopt);

} // namespace frechet_ma::cli
