#include "frechet_ma/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
	using namespace frechet_ma::cli;

	CLI::App app{"Model averaging for global Frechet regression with distributional responses"};
	app.require_subcommand(1);

	Overrides overrides;
	auto add_overrides = [&overrides](CLI::App* cmd) {
		cmd->add_option("--grid-m", overrides.grid_m, "Quantile grid size M");
		cmd->add_option("--k-folds", overrides.k_folds, "Number of cross-validation folds");
		cmd->add_option("--seed", overrides.seed, "Master random seed");
		cmd->add_option("--threads", overrides.threads, "Worker threads");
	};

	SimulateArgs sim;
	auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo comparison");
	simulate->add_option("--config", sim.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
	simulate->add_option("--out", sim.out_dir, "Output directory (default: out_dir from the config)");
	add_overrides(simulate);

	FitArgs fit;
	std::optional<std::string> fit_config;
	auto* fit_cmd = app.add_subcommand("fit", "Fit candidates and averaging weights on CSV data");
	fit_cmd->add_option("--config", fit_config, "JSON configuration file");
	fit_cmd->add_option("--predictors", fit.predictors_csv, "Predictor CSV (header + n rows)")->required();
	fit_cmd->add_option("--responses", fit.responses_csv, "Response quantile-grid CSV")->required();
	fit_cmd->add_option("--out", fit.out_dir, "Output directory (default: out_dir from the config)");
	fit_cmd->add_flag("--from-samples", fit.from_samples, "Responses are ragged rows of raw samples");
	fit_cmd->add_option("--split", fit.split_n_train, "Train on a random subset of this size, score the rest");
	fit_cmd->add_option("--split-seed", fit.split_seed, "Seed for --split");
	add_overrides(fit_cmd);

	PredictArgs pred;
	std::optional<std::string> truth;
	std::optional<std::string> spe_out;
	auto* predict = app.add_subcommand("predict", "Predict quantile grids from a fitted model");
	predict->add_option("--model", pred.model_json, "model.json written by fit")->required();
	predict->add_option("--query", pred.query_csv, "Query predictor CSV")->required();
	predict->add_option("--out", pred.out_csv, "Output CSV")->required();
	predict->add_option("--truth", truth, "Observed response grids for squared prediction errors");
	predict->add_option("--spe-out", spe_out, "Where to write squared prediction errors");
	predict->add_option("--method", pred.method, "Weights to use: CV, sAIC, sBIC, EW, AIC or BIC");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		// Help requests exit 0; every other parse failure is an input error.
		const int code = app.exit(e);
		return code == 0 ? kOk : kInputError;
	}

	if (simulate->parsed()) {
		sim.overrides = overrides;
		return cmd_simulate(sim, std::cerr);
	}
	if (fit_cmd->parsed()) {
		if (fit_config) {
			fit.config = *fit_config;
		}
		fit.overrides = overrides;
		return cmd_fit(fit, std::cerr);
	}
	if (truth) {
		pred.truth_csv = *truth;
	}
	if (spe_out) {
		pred.spe_csv = *spe_out;
	}
	return cmd_predict(pred, std::cerr);
}
