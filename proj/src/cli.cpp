#include "frechet_ma/cli.hpp"

#include "frechet_ma/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace frechet_ma::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFormat = "frechet-ma-model";
constexpr int kModelVersion = 1;

// ---------------------------------------------------------------------------
// Config schema

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
	for (const auto& [key, value] : j.items()) {
		if (!allowed.contains(key)) {
			throw ConfigError(where + (where.empty() ? "" : ".") + key + ": unknown key");
		}
	}
}

std::size_t get_count(const json& v, const std::string& field, std::size_t min) {
	if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
		throw ConfigError(field + ": expected a non-negative integer");
	}
	const auto value = v.get<std::uint64_t>();
	if (value < min) {
		throw ConfigError(field + ": must be at least " + std::to_string(min));
	}
	return static_cast<std::size_t>(value);
}

double get_real(const json& v, const std::string& field) {
	if (!v.is_number()) {
		throw ConfigError(field + ": expected a number");
	}
	const double value = v.get<double>();
	if (!std::isfinite(value)) {
		throw ConfigError(field + ": must be finite");
	}
	return value;
}

std::vector<Method> parse_methods(const json& v) {
	if (!v.is_array() || v.empty()) {
		throw ConfigError("methods: expected a non-empty array of method names");
	}
	std::vector<Method> out;
	for (const auto& item : v) {
		if (!item.is_string()) {
			throw ConfigError("methods: entries must be strings");
		}
		try {
			const Method m = parse_method(item.get<std::string>());
			if (std::find(out.begin(), out.end(), m) != out.end()) {
				throw ConfigError("methods: '" + item.get<std::string>() + "' listed twice");
			}
			out.push_back(m);
		} catch (const ConfigError&) {
			throw;
		} catch (const std::invalid_argument& e) {
			throw ConfigError(std::string("methods: ") + e.what());
		}
	}
	return out;
}

std::vector<CandidateModel> parse_candidates(const json& v) {
	if (!v.is_array() || v.empty()) {
		throw ConfigError("candidates: expected a non-empty array of 1-based index arrays");
	}
	std::vector<CandidateModel> out;
	for (std::size_t s = 0; s < v.size(); ++s) {
		const std::string field = "candidates[" + std::to_string(s) + "]";
		if (!v[s].is_array() || v[s].empty()) {
			throw ConfigError(field + ": expected a non-empty array of 1-based predictor indices");
		}
		std::vector<std::size_t> idx;
		for (const auto& e : v[s]) {
			idx.push_back(get_count(e, field, 1) - 1);
		}
		std::sort(idx.begin(), idx.end());
		if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
			throw ConfigError(field + ": repeated predictor index");
		}
		out.emplace_back(std::move(idx));
	}
	return out;
}

json candidates_json(const CandidateSet& set) {
	json out = json::array();
	for (const auto& m : set.models()) {
		json idx = json::array();
		for (std::size_t j : m.indices()) {
			idx.push_back(j + 1);
		}
		out.push_back(idx);
	}
	return out;
}

std::vector<std::size_t> indices_from_json(const json& v, const std::string& field) {
	std::vector<std::size_t> idx;
	for (const auto& e : v) {
		idx.push_back(get_count(e, field, 1) - 1);
	}
	return idx;
}

CandidateSet nested_candidates(std::size_t p) {
	std::vector<CandidateModel> models;
	for (std::size_t k = 1; k <= p; ++k) {
		std::vector<std::size_t> idx(k);
		std::iota(idx.begin(), idx.end(), std::size_t{0});
		models.emplace_back(std::move(idx));
	}
	return CandidateSet(std::move(models));
}

void apply(const Overrides& o, ExperimentConfig& cfg) {
	if (o.grid_m) {
		cfg.grid_m = *o.grid_m;
	}
	if (o.k_folds) {
		cfg.k_folds = *o.k_folds;
	}
	if (o.seed) {
		cfg.dgp.seed = *o.seed;
	}
	if (o.threads) {
		cfg.threads = *o.threads;
	}
}

fs::path resolve_out_dir(const fs::path& flag, const RunConfig& cfg) {
	if (!flag.empty()) {
		return flag;
	}
	if (cfg.out_dir) {
		return *cfg.out_dir;
	}
	throw ConfigError("out_dir: no --out flag and no out_dir in the config");
}

// ---------------------------------------------------------------------------
// Output helpers

std::string grid_header(const ProbGrid& grid, const std::string& first) {
	std::string out = first;
	for (double t : grid.t_values()) {
		out += "," + io::format_double(t);
	}
	return out + "\n";
}

void append_grid_row(std::string& out, const std::string& id, const QuantileGrid& q) {
	out += id;
	for (double v : q.values()) {
		out += "," + io::format_double(v);
	}
	out += "\n";
}

json vector_json(const Eigen::VectorXd& v) {
	return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
	json rows = json::array();
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		rows.push_back(vector_json(m.row(r).transpose()));
	}
	return rows;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
	if (!j.is_array()) {
		throw io::InputError(field + ": expected an array");
	}
	Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
	for (std::size_t k = 0; k < j.size(); ++k) {
		if (!j[k].is_number()) {
			throw io::InputError(field + ": expected numbers");
		}
		v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
	}
	return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field, Eigen::Index cols) {
	if (!j.is_array()) {
		throw io::InputError(field + ": expected an array of rows");
	}
	Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
	for (std::size_t r = 0; r < j.size(); ++r) {
		const auto row = vector_from_json(j[r], field);
		if (row.size() != cols) {
			throw io::InputError(field + ": row " + std::to_string(r) + " has the wrong length");
		}
		m.row(static_cast<Eigen::Index>(r)) = row.transpose();
	}
	return m;
}

Eigen::MatrixXd to_matrix(const io::CsvTable& t) {
	Eigen::MatrixXd x(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
	for (std::size_t i = 0; i < t.rows.size(); ++i) {
		for (std::size_t j = 0; j < t.header.size(); ++j) {
			x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
		}
	}
	return x;
}

Eigen::VectorXd one_hot(std::size_t size, std::size_t at) {
	return Eigen::VectorXd::Unit(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(at));
}

/// A frozen fit as stored in model.json.
struct FrozenModel {
	std::size_t p = 0;
	GridPtr grid;
	std::vector<CandidateFit> fits;
	std::vector<std::string> labels;
	std::map<std::string, Eigen::VectorXd> weights;
};

FrozenModel load_model(const fs::path& path) {
	std::ifstream in(path);
	if (!in) {
		throw io::InputError(path.string() + ": cannot open file");
	}
	json j;
	try {
		j = json::parse(in);
	} catch (const json::exception& e) {
		throw io::InputError(path.string() + ": " + e.what());
	}
	try {
		if (j.at("format") != kModelFormat || j.at("version") != kModelVersion) {
			throw io::InputError(path.string() + ": not a version " + std::to_string(kModelVersion) + " model file");
		}
		FrozenModel model;
		model.p = j.at("p").get<std::size_t>();
		model.grid = make_grid(j.at("grid_m").get<std::size_t>());
		const auto m = static_cast<Eigen::Index>(model.grid->size());
		for (const auto& c : j.at("candidates")) {
			const std::string label = c.at("label").get<std::string>();
			CandidateModel cm(indices_from_json(c.at("indices"), "candidates.indices"));
			cm.check_dimension(model.p);
			const auto ps = static_cast<Eigen::Index>(cm.size());
			DesignStats stats;
			stats.mean = vector_from_json(c.at("mean_x"), label + ".mean_x");
			stats.cov_factor = matrix_from_json(c.at("cov_factor"), label + ".cov_factor", ps);
			stats.jitter_applied = c.at("jitter").get<double>();
			stats.n_used = c.at("n_used").get<std::size_t>();
			auto mean_response = vector_from_json(c.at("mean_response"), label + ".mean_response");
			auto cross = matrix_from_json(c.at("cross_moment"), label + ".cross_moment", m);
			model.fits.emplace_back(std::move(cm), std::move(stats), std::move(mean_response), std::move(cross),
			                        model.grid);
			model.labels.push_back(label);
		}
		for (const auto& [name, w] : j.at("weights").items()) {
			model.weights[name] = vector_from_json(w, "weights." + name);
			if (static_cast<std::size_t>(model.weights[name].size()) != model.fits.size()) {
				throw io::InputError(path.string() + ": weights." + name + " has the wrong length");
			}
		}
		return model;
	} catch (const json::exception& e) {
		throw io::InputError(path.string() + ": " + e.what());
	} catch (const io::InputError&) {
		throw;
	} catch (const std::invalid_argument& e) {
		throw io::InputError(path.string() + ": " + e.what());
	}
}

std::vector<QuantileGrid> grids_from_samples(const fs::path& path, std::size_t grid_m) {
	const auto table = io::read_ragged_csv(path);
	const auto grid = make_grid(grid_m);
	std::vector<QuantileGrid> out;
	for (std::size_t i = 0; i < table.rows.size(); ++i) {
		if (table.rows[i].empty()) {
			throw io::InputError(path.string() + ":" + std::to_string(table.line_numbers[i]) + ": response row " +
			                     std::to_string(i + 1) + " has no samples");
		}
		out.push_back(empirical_quantile(table.rows[i], grid));
	}
	return out;
}

} // namespace

// ---------------------------------------------------------------------------

RunConfig parse_run_config(const json& j) {
	if (!j.is_object()) {
		throw ConfigError("config: top level must be a JSON object");
	}
	reject_unknown(j,
	               {"grid_m", "k_folds", "seed", "threads", "shuffle_folds", "methods", "candidates",
	                "candidate_labels", "simulation", "out_dir"},
	               "");
	RunConfig cfg;
	auto& e = cfg.experiment;
	if (j.contains("grid_m")) {
		e.grid_m = get_count(j["grid_m"], "grid_m", 1);
	}
	if (j.contains("k_folds")) {
		e.k_folds = get_count(j["k_folds"], "k_folds", 2);
	}
	if (j.contains("seed")) {
		if (!j["seed"].is_number_unsigned()) {
			throw ConfigError("seed: expected a non-negative integer");
		}
		e.dgp.seed = j["seed"].get<std::uint64_t>();
	}
	if (j.contains("threads")) {
		e.threads = get_count(j["threads"], "threads", 1);
	}
	if (j.contains("shuffle_folds")) {
		if (!j["shuffle_folds"].is_boolean()) {
			throw ConfigError("shuffle_folds: expected true or false");
		}
		e.shuffle_folds = j["shuffle_folds"].get<bool>();
	}
	if (j.contains("methods")) {
		e.methods = parse_methods(j["methods"]);
	}
	if (j.contains("out_dir")) {
		if (!j["out_dir"].is_string()) {
			throw ConfigError("out_dir: expected a string");
		}
		cfg.out_dir = j["out_dir"].get<std::string>();
	}
	if (j.contains("simulation")) {
		const json& s = j["simulation"];
		if (!s.is_object()) {
			throw ConfigError("simulation: expected an object");
		}
		reject_unknown(s, {"p", "rho", "mu0", "sigma0", "beta", "gamma", "v1", "v2", "n_values", "replications"},
		               "simulation");
		auto& d = e.dgp;
		if (s.contains("p")) {
			d.p = get_count(s["p"], "simulation.p", 1);
		}
		for (auto [key, target] : {std::pair{"rho", &d.rho}, std::pair{"mu0", &d.mu0}, std::pair{"sigma0", &d.sigma0},
		                           std::pair{"beta", &d.beta}, std::pair{"gamma", &d.gamma}, std::pair{"v1", &d.v1},
		                           std::pair{"v2", &d.v2}}) {
			if (s.contains(key)) {
				*target = get_real(s[key], std::string("simulation.") + key);
			}
		}
		if (s.contains("n_values")) {
			if (!s["n_values"].is_array() || s["n_values"].empty()) {
				throw ConfigError("simulation.n_values: expected a non-empty array of sample sizes");
			}
			e.n_values.clear();
			for (const auto& n : s["n_values"]) {
				e.n_values.push_back(get_count(n, "simulation.n_values", 2));
			}
		}
		if (s.contains("replications")) {
			e.replications = get_count(s["replications"], "simulation.replications", 1);
		}
		try {
			validate(d);
		} catch (const std::invalid_argument& err) {
			throw ConfigError(std::string("simulation.") + err.what());
		}
	}

	std::vector<std::string> labels;
	if (j.contains("candidate_labels")) {
		const json& l = j["candidate_labels"];
		if (!l.is_array()) {
			throw ConfigError("candidate_labels: expected an array of strings");
		}
		for (const auto& item : l) {
			if (!item.is_string()) {
				throw ConfigError("candidate_labels: entries must be strings");
			}
			labels.push_back(item.get<std::string>());
		}
	}
	try {
		if (j.contains("candidates")) {
			e.candidates = CandidateSet(parse_candidates(j["candidates"]), labels);
			cfg.candidates_given = true;
		} else {
			if (!labels.empty()) {
				throw ConfigError("candidate_labels: given without candidates");
			}
			e.candidates = default_candidates(std::max<std::size_t>(e.dgp.p, 8));
		}
	} catch (const ConfigError&) {
		throw;
	} catch (const std::invalid_argument& err) {
		throw ConfigError(std::string("candidates: ") + err.what());
	}
	return cfg;
}

RunConfig load_run_config(const fs::path& path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError(path.string() + ": cannot open config file");
	}
	json j;
	try {
		j = json::parse(in);
	} catch (const json::exception& e) {
		throw ConfigError(path.string() + ": invalid JSON: " + e.what());
	}
	return parse_run_config(j);
}

json to_json(const RunConfig& cfg) {
	const auto& e = cfg.experiment;
	json methods = json::array();
	for (Method m : e.methods) {
		methods.push_back(std::string(to_string(m)));
	}
	json j = {
	    {"grid_m", e.grid_m},
	    {"k_folds", e.k_folds},
	    {"seed", e.dgp.seed},
	    {"threads", e.threads},
	    {"shuffle_folds", e.shuffle_folds},
	    {"methods", methods},
	    {"candidates", candidates_json(e.candidates)},
	    {"candidate_labels", e.candidates.labels()},
	    {"simulation",
	     {{"p", e.dgp.p},
	      {"rho", e.dgp.rho},
	      {"mu0", e.dgp.mu0},
	      {"sigma0", e.dgp.sigma0},
	      {"beta", e.dgp.beta},
	      {"gamma", e.dgp.gamma},
	      {"v1", e.dgp.v1},
	      {"v2", e.dgp.v2},
	      {"n_values", e.n_values},
	      {"replications", e.replications}}},
	};
	if (cfg.out_dir) {
		j["out_dir"] = *cfg.out_dir;
	}
	return j;
}

std::vector<QuantileGrid> read_response_grids(const fs::path& path, std::optional<std::size_t> expected_m) {
	const auto table = io::read_numeric_csv(path);
	const std::size_t m = table.header.size();
	if (expected_m && *expected_m != m) {
		throw io::InputError(path.string() + ": expected " + std::to_string(*expected_m) + " grid columns, found " +
		                     std::to_string(m));
	}
	const auto grid = make_grid(m);
	std::vector<double> levels(m);
	bool numeric_header = true;
	for (std::size_t c = 0; c < m && numeric_header; ++c) {
		numeric_header = io::parse_double(table.header[c], levels[c]);
	}
	if (numeric_header) {
		for (std::size_t c = 0; c < m; ++c) {
			if (std::abs(levels[c] - grid->t_values()[c]) > 1e-9) {
				throw io::InputError(path.string() + ": header level " + table.header[c] + " in column " +
				                     std::to_string(c + 1) + " is not the midpoint grid level " +
				                     io::format_double(grid->t_values()[c]));
			}
		}
	}
	std::vector<QuantileGrid> out;
	out.reserve(table.rows.size());
	for (std::size_t i = 0; i < table.rows.size(); ++i) {
		const auto& row = table.rows[i];
		for (std::size_t c = 1; c < row.size(); ++c) {
			if (row[c] < row[c - 1]) {
				throw io::InputError(path.string() + ":" + std::to_string(table.line_numbers[i]) + ": response row " +
				                     std::to_string(i + 1) + " decreases at column " + std::to_string(c + 1));
			}
		}
		out.emplace_back(grid, row);
	}
	if (out.empty()) {
		throw io::InputError(path.string() + ": no response rows");
	}
	return out;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
	RunConfig cfg;
	fs::path out_dir;
	try {
		cfg = load_run_config(args.config);
		apply(args.overrides, cfg.experiment);
		try {
			validate(cfg.experiment);
		} catch (const std::invalid_argument& e) {
			throw ConfigError(e.what());
		}
		out_dir = resolve_out_dir(args.out_dir, cfg);
		fs::create_directories(out_dir);
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kInputError;
	}

	ExperimentReport report;
	try {
		report = run_experiment(cfg.experiment);
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kComputeError;
	}

	for (const auto& f : report.failures) {
		log << "warning: n=" << f.n << " replication " << f.rep << " failed: " << f.message << "\n";
	}

	std::string risk = "n,method,mean_risk,sd_risk,failures\n";
	for (const auto& r : report.risks) {
		risk += std::to_string(r.n) + "," + std::string(to_string(r.method)) + "," + io::format_double(r.mean_risk) +
		        "," + io::format_double(r.sd_risk) + "," + std::to_string(r.failures) + "\n";
	}
	std::string weights = "n,mean_correct_weight_sum\n";
	for (const auto& w : report.weights) {
		weights += std::to_string(w.n) + "," + io::format_double(w.mean_correct_weight_sum) + "\n";
	}
	try {
		io::write_atomic(out_dir / "risk_table.csv", risk);
		io::write_atomic(out_dir / "weights_table.csv", weights);
		io::write_atomic(out_dir / "run_meta.json", to_json(cfg).dump(2) + "\n");
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kInputError;
	}

	for (const auto& w : report.weights) {
		if (w.count == 0) {
			log << "error: every replication failed at n=" << w.n << "\n";
			return kComputeError;
		}
	}
	return kOk;
}

int cmd_fit(const FitArgs& args, std::ostream& log) {
	RunConfig cfg;
	Eigen::MatrixXd x;
	std::vector<QuantileGrid> y;
	std::vector<std::size_t> train_rows;
	std::vector<std::size_t> test_rows;
	fs::path out_dir;
	try {
		if (args.config) {
			cfg = load_run_config(*args.config);
		}
		apply(args.overrides, cfg.experiment);
		const auto table = io::read_numeric_csv(args.predictors_csv);
		x = to_matrix(table);
		if (x.rows() == 0 || x.cols() == 0) {
			throw io::InputError(args.predictors_csv.string() + ": no predictor data");
		}
		y = args.from_samples ? grids_from_samples(args.responses_csv, cfg.experiment.grid_m)
		                      : read_response_grids(args.responses_csv,
		                                            args.overrides.grid_m ? args.overrides.grid_m : std::nullopt);
		if (static_cast<std::size_t>(x.rows()) != y.size()) {
			throw io::InputError("predictors have " + std::to_string(x.rows()) + " rows but responses have " +
			                     std::to_string(y.size()));
		}
		const auto p = static_cast<std::size_t>(x.cols());
		if (!cfg.candidates_given) {
			cfg.experiment.candidates = nested_candidates(p);
		}
		for (std::size_t s = 0; s < cfg.experiment.candidates.size(); ++s) {
			try {
				cfg.experiment.candidates.model(s).check_dimension(p);
			} catch (const std::invalid_argument& e) {
				throw ConfigError("candidates[" + std::to_string(s) + "]: " + e.what());
			}
		}

		std::vector<std::size_t> order(y.size());
		std::iota(order.begin(), order.end(), std::size_t{0});
		if (args.split_n_train) {
			if (*args.split_n_train < 2 || *args.split_n_train >= y.size()) {
				throw ConfigError("--split: n_train must lie in [2, n - 1] with n = " + std::to_string(y.size()));
			}
			std::mt19937_64 rng(args.split_seed);
			std::shuffle(order.begin(), order.end(), rng);
			train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(*args.split_n_train));
			test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(*args.split_n_train), order.end());
			std::sort(train_rows.begin(), train_rows.end());
			std::sort(test_rows.begin(), test_rows.end());
		} else {
			train_rows = order;
		}
		out_dir = resolve_out_dir(args.out_dir, cfg);
		fs::create_directories(out_dir);
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kInputError;
	}

	const Dataset all(x, y);
	const Dataset train = all.subset(train_rows);
	const auto& candidates = cfg.experiment.candidates;
	std::size_t k = cfg.experiment.k_folds;
	if (k > train.n()) {
		log << "note: k_folds=" << k << " exceeds the " << train.n() << " training rows; using leave-one-out\n";
		k = train.n();
	}

	try {
		const auto fits = fit_candidates(train, candidates);
		const auto criteria = information_criteria(train, fits);
		const auto folds =
		    make_folds(train.n(), k, cfg.experiment.shuffle_folds ? std::optional(cfg.experiment.dgp.seed) : std::nullopt);
		const auto q = build_cv_quadratic(train, candidates, folds);
		const auto cv = solve_simplex_qp(q);
		if (!cv.converged) {
			log << "warning: weight solver stopped with KKT residual " << cv.kkt_residual << "\n";
		}
		const auto saic = ic_weights(criteria, SmoothedWeights::sAIC);
		const auto sbic = ic_weights(criteria, SmoothedWeights::sBIC);
		const auto ew = ic_weights(criteria, SmoothedWeights::EW);
		const std::size_t aic_pick = ic_select(criteria, Selection::AIC);
		const std::size_t bic_pick = ic_select(criteria, Selection::BIC);

		for (std::size_t s = 0; s < fits.size(); ++s) {
			if (fits[s].stats().jitter_applied > 0.0) {
				log << "note: candidate '" << candidates.label(s) << "' covariance jittered by "
				    << fits[s].stats().jitter_applied << "\n";
			}
			if (criteria[s].clamped) {
				log << "note: candidate '" << candidates.label(s) << "' residual clamped at " << kSigma2Floor << "\n";
			}
		}

		std::string weights_csv = "label,cv_weight,saic_weight,sbic_weight,aic,bic,sigma2_hat\n";
		for (std::size_t s = 0; s < fits.size(); ++s) {
			const auto e = static_cast<Eigen::Index>(s);
			weights_csv += candidates.label(s) + "," + io::format_double(cv.weights(e)) + "," +
			               io::format_double(saic.weights(e)) + "," + io::format_double(sbic.weights(e)) + "," +
			               io::format_double(criteria[s].aic) + "," + io::format_double(criteria[s].bic) + "," +
			               io::format_double(criteria[s].sigma2_hat) + "\n";
		}

		const auto& grid = *train.grid_ptr();
		std::string fitted = grid_header(grid, "row_id");
		for (std::size_t i = 0; i < train.n(); ++i) {
			const Eigen::VectorXd xi = train.predictors().row(static_cast<Eigen::Index>(i)).transpose();
			append_grid_row(fitted, std::to_string(train_rows[i] + 1), averaged_predict(fits, cv.weights, xi));
		}

		json cand = json::array();
		for (std::size_t s = 0; s < fits.size(); ++s) {
			const auto& f = fits[s];
			json idx = json::array();
			for (std::size_t j : f.model().indices()) {
				idx.push_back(j + 1);
			}
			cand.push_back({{"label", candidates.label(s)},
			                {"indices", idx},
			                {"n_used", f.stats().n_used},
			                {"jitter", f.stats().jitter_applied},
			                {"mean_x", vector_json(f.stats().mean)},
			                {"cov_factor", matrix_json(f.stats().cov_factor)},
			                {"mean_response", vector_json(f.mean_response())},
			                {"cross_moment", matrix_json(f.cross_moment())}});
		}
		json crit = json::array();
		for (const auto& c : criteria) {
			crit.push_back({{"sigma2_hat", c.sigma2_hat}, {"aic", c.aic}, {"bic", c.bic}, {"clamped", c.clamped}});
		}
		const json model = {
		    {"format", kModelFormat},
		    {"version", kModelVersion},
		    {"p", train.p()},
		    {"grid_m", grid.size()},
		    {"n_train", train.n()},
		    {"candidates", cand},
		    {"weights",
		     {{"CV", vector_json(cv.weights)},
		      {"sAIC", vector_json(saic.weights)},
		      {"sBIC", vector_json(sbic.weights)},
		      {"EW", vector_json(ew.weights)},
		      {"AIC", vector_json(one_hot(fits.size(), aic_pick))},
		      {"BIC", vector_json(one_hot(fits.size(), bic_pick))}}},
		    {"criteria", crit},
		    {"ic_parameter_count", "number of predictors in the candidate"},
		    {"cv",
		     {{"k_folds", k},
		      {"objective", cv.objective},
		      {"iterations", cv.iterations},
		      {"kkt_residual", cv.kkt_residual},
		      {"converged", cv.converged}}},
		};

		io::write_atomic(out_dir / "weights.csv", weights_csv);
		io::write_atomic(out_dir / "fitted.csv", fitted);
		io::write_atomic(out_dir / "model.json", model.dump(2) + "\n");

		if (!test_rows.empty()) {
			const std::vector<std::pair<std::string, Eigen::VectorXd>> methods = {
			    {"CV", cv.weights},
			    {"sAIC", saic.weights},
			    {"sBIC", sbic.weights},
			    {"EW", ew.weights},
			    {"AIC", one_hot(fits.size(), aic_pick)},
			    {"BIC", one_hot(fits.size(), bic_pick)}};
			std::string spe = "row_id";
			for (const auto& [name, w] : methods) {
				spe += "," + name;
			}
			spe += "\n";
			for (std::size_t i : test_rows) {
				const Eigen::VectorXd xi = all.predictors().row(static_cast<Eigen::Index>(i)).transpose();
				spe += std::to_string(i + 1);
				for (const auto& [name, w] : methods) {
					spe += "," + io::format_double(wasserstein_sq(averaged_predict(fits, w, xi), all.response(i)));
				}
				spe += "\n";
			}
			io::write_atomic(out_dir / "test_spe.csv", spe);
		}
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kComputeError;
	}
	return kOk;
}

int cmd_predict(const PredictArgs& args, std::ostream& log) {
	FrozenModel model;
	Eigen::MatrixXd query;
	std::vector<QuantileGrid> truth;
	try {
		model = load_model(args.model_json);
		if (!model.weights.contains(args.method)) {
			throw ConfigError("--method: model has no weights named '" + args.method + "'");
		}
		const auto table = io::read_numeric_csv(args.query_csv);
		if (table.header.size() != model.p) {
			throw io::InputError(args.query_csv.string() + ": query has " + std::to_string(table.header.size()) +
			                     " columns, model expects p=" + std::to_string(model.p));
		}
		query = to_matrix(table);
		if (args.truth_csv) {
			truth = read_response_grids(*args.truth_csv, model.grid->size());
			if (truth.size() != static_cast<std::size_t>(query.rows())) {
				throw io::InputError(args.truth_csv->string() + ": " + std::to_string(truth.size()) +
				                     " truth rows for " + std::to_string(query.rows()) + " query rows");
			}
		}
		if (args.out_csv.has_parent_path()) {
			fs::create_directories(args.out_csv.parent_path());
		}
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kInputError;
	}

	try {
		const auto& w = model.weights.at(args.method);
		std::string out = grid_header(*model.grid, "row_id");
		std::string spe = "row_id,spe\n";
		for (Eigen::Index i = 0; i < query.rows(); ++i) {
			const auto pred = averaged_predict(model.fits, w, query.row(i).transpose());
			const std::string id = std::to_string(i + 1);
			append_grid_row(out, id, pred);
			if (!truth.empty()) {
				const auto& t = truth[static_cast<std::size_t>(i)];
				spe += id + "," + io::format_double(wasserstein_sq(pred, QuantileGrid(model.grid, {t.values().begin(), t.values().end()}))) + "\n";
			}
		}
		io::write_atomic(args.out_csv, out);
		if (!truth.empty()) {
			fs::path spe_path = args.spe_csv.value_or(args.out_csv.parent_path() /
			                                          (args.out_csv.stem().string() + "_spe.csv"));
			io::write_atomic(spe_path, spe);
		}
	} catch (const std::exception& e) {
		log << "error: " << e.what() << "\n";
		return kComputeError;
	}
	return kOk;
}

} // namespace frechet_ma::cli
