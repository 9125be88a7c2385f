#include "frechet_ma/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace frechet_ma {

void validate(const DgpConfig& cfg) {
	auto fail = [](const std::string& field, const std::string& why) {
		throw std::invalid_argument(field + ": " + why);
	};
	if (cfg.p < 8) {
		fail("p", "must be at least 8 so that X_1, X_4 and X_8 exist");
	}
	if (!(cfg.rho > -1.0 && cfg.rho < 1.0)) {
		fail("rho", "must lie strictly between -1 and 1");
	}
	for (auto [name, v] : {std::pair{"mu0", cfg.mu0}, std::pair{"sigma0", cfg.sigma0}, std::pair{"beta", cfg.beta},
	                       std::pair{"gamma", cfg.gamma}, std::pair{"v1", cfg.v1}, std::pair{"v2", cfg.v2}}) {
		if (!std::isfinite(v)) {
			fail(name, "must be finite");
		}
	}
	if (cfg.v1 < 0.0) {
		fail("v1", "must be non-negative");
	}
	if (cfg.v2 < 0.0) {
		fail("v2", "must be non-negative");
	}
	// Predictors live in (-1, 1), so this keeps the conditional scale positive.
	if (cfg.sigma0 - std::abs(cfg.gamma) <= 0.0) {
		fail("sigma0", "must exceed |gamma| so the conditional scale stays positive");
	}
}

Rng stream_rng(std::uint64_t seed, std::uint64_t n, std::uint64_t rep) {
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
	                  static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
	return Rng(seq);
}

Eigen::MatrixXd gen_predictors(const DgpConfig& cfg, std::size_t n, Rng& rng) {
	const auto p = static_cast<Eigen::Index>(cfg.p);
	Eigen::MatrixXd corr(p, p);
	for (Eigen::Index j = 0; j < p; ++j) {
		for (Eigen::Index k = 0; k < p; ++k) {
			corr(j, k) = std::pow(cfg.rho, static_cast<double>(std::abs(j - k)));
		}
	}
	const Eigen::LLT<Eigen::MatrixXd> llt(corr);
	if (llt.info() != Eigen::Success) {
		throw std::invalid_argument("gen_predictors: correlation matrix is not positive definite");
	}
	const Eigen::MatrixXd lower = llt.matrixL();

	std::normal_distribution<double> normal(0.0, 1.0);
	Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
	Eigen::VectorXd e(p);
	for (Eigen::Index i = 0; i < x.rows(); ++i) {
		for (Eigen::Index j = 0; j < p; ++j) {
			e(j) = normal(rng);
		}
		const Eigen::VectorXd z = lower * e;
		for (Eigen::Index j = 0; j < p; ++j) {
			x(i, j) = 2.0 * normal_cdf(z(j)) - 1.0;
		}
	}
	return x;
}

TrueRegression::TrueRegression(DgpConfig cfg) : cfg_(cfg) {}

QuantileGrid TrueRegression::operator()(const Eigen::VectorXd& x, const GridPtr& grid) const {
	const double location = cfg_.mu0 + cfg_.beta * (x(3) + x(7));
	const double scale = cfg_.sigma0 + cfg_.gamma * x(0);
	return gaussian_quantile(location, scale, grid);
}

QuantileGrid gen_response(const DgpConfig& cfg, const Eigen::VectorXd& x, Rng& rng, const GridPtr& grid) {
	const double location = cfg.mu0 + cfg.beta * (x(3) + x(7));
	const double scale_mean = cfg.sigma0 + cfg.gamma * x(0);
	if (!(scale_mean > 0.0)) {
		throw std::invalid_argument("gen_response: non-positive Gamma mean sigma0 + gamma * x_1 = " +
		                            std::to_string(scale_mean));
	}
	double mu = location;
	if (cfg.v1 > 0.0) {
		std::normal_distribution<double> normal(location, std::sqrt(cfg.v1));
		mu = normal(rng);
	}
	double sigma = scale_mean;
	if (cfg.v2 > 0.0) {
		std::gamma_distribution<double> gamma(scale_mean * scale_mean / cfg.v2, cfg.v2 / scale_mean);
		sigma = gamma(rng);
	}
	return gaussian_quantile(mu, sigma, grid);
}

std::string_view to_string(Method m) {
	switch (m) {
	case Method::CV: return "CV";
	case Method::sAIC: return "sAIC";
	case Method::sBIC: return "sBIC";
	case Method::EW: return "EW";
	case Method::AIC: return "AIC";
	case Method::BIC: return "BIC";
	case Method::Full: return "Full";
	case Method::Oracle: return "Oracle";
	}
	return "?";
}

Method parse_method(std::string_view name) {
	for (Method m : all_methods()) {
		if (to_string(m) == name) {
			return m;
		}
	}
	throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
	return {Method::CV, Method::sAIC, Method::sBIC, Method::EW, Method::AIC, Method::BIC, Method::Full, Method::Oracle};
}

CandidateSet default_candidates(std::size_t p) {
	std::vector<std::size_t> full(p);
	std::iota(full.begin(), full.end(), std::size_t{0});
	return CandidateSet({CandidateModel({0}), CandidateModel({3, 7}), CandidateModel({0, 3}), CandidateModel({0, 3, 7}),
	                     CandidateModel({0, 3, 4, 7}), CandidateModel(full)});
}

void validate(const ExperimentConfig& cfg) {
	validate(cfg.dgp);
	if (cfg.n_values.empty()) {
		throw std::invalid_argument("n_values: at least one sample size required");
	}
	if (cfg.replications < 1) {
		throw std::invalid_argument("replications: must be at least 1");
	}
	if (cfg.grid_m < 1) {
		throw std::invalid_argument("grid_m: must be at least 1");
	}
	if (cfg.k_folds < 2) {
		throw std::invalid_argument("k_folds: must be at least 2");
	}
	if (cfg.methods.empty()) {
		throw std::invalid_argument("methods: at least one method required");
	}
	for (const auto& m : cfg.candidates.models()) {
		m.check_dimension(cfg.dgp.p);
	}
	for (std::size_t n : cfg.n_values) {
		if (n < cfg.k_folds) {
			throw std::invalid_argument("n_values: n=" + std::to_string(n) + " is smaller than k_folds");
		}
	}
}

std::vector<std::size_t> correct_candidates(const CandidateSet& candidates) {
	const auto support = DgpConfig::true_support();
	std::vector<std::size_t> out;
	for (std::size_t s = 0; s < candidates.size(); ++s) {
		const auto& idx = candidates.model(s).indices();
		if (std::includes(idx.begin(), idx.end(), support.begin(), support.end())) {
			out.push_back(s);
		}
	}
	return out;
}

ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t n, std::size_t rep) {
	auto rng = stream_rng(cfg.dgp.seed, n, rep);
	const auto grid = make_grid(cfg.grid_m);

	const Eigen::MatrixXd x = gen_predictors(cfg.dgp, n, rng);
	std::vector<QuantileGrid> y;
	y.reserve(n);
	for (Eigen::Index i = 0; i < x.rows(); ++i) {
		y.push_back(gen_response(cfg.dgp, x.row(i).transpose(), rng, grid));
	}
	const Eigen::VectorXd x0 = gen_predictors(cfg.dgp, 1, rng).row(0).transpose();
	const std::uint64_t fold_seed = rng();
	const Dataset data(x, std::move(y));
	const QuantileGrid truth = TrueRegression(cfg.dgp)(x0, grid);

	const auto uses = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
	const bool need_ic = uses(Method::sAIC) || uses(Method::sBIC) || uses(Method::AIC) || uses(Method::BIC);
	const bool need_fits = need_ic || uses(Method::CV) || uses(Method::EW);

	ReplicationResult result;
	std::vector<CandidateFit> fits;
	std::vector<InformationCriterion> criteria;
	if (need_fits) {
		fits = fit_candidates(data, cfg.candidates);
		for (const auto& f : fits) {
			result.jittered_fits += f.stats().jitter_applied > 0.0 ? 1 : 0;
		}
	}
	if (need_ic) {
		criteria = information_criteria(data, fits);
	}
	if (uses(Method::CV)) {
		const auto folds = make_folds(n, cfg.k_folds, cfg.shuffle_folds ? std::optional(fold_seed) : std::nullopt);
		const auto q = build_cv_quadratic(data, cfg.candidates, folds);
		const auto w = solve_simplex_qp(q);
		result.cv_weights = w.weights;
		result.cv_converged = w.converged;
		for (std::size_t s : correct_candidates(cfg.candidates)) {
			result.correct_weight_sum += w.weights(static_cast<Eigen::Index>(s));
		}
	}

	const auto single = [&](const CandidateModel& model) {
		return CandidateFit::build(data, model).predict_full(x0);
	};
	const auto select = [&](Selection kind) {
		const std::size_t s = ic_select(criteria, kind);
		return fits[s].predict_full(x0);
	};

	result.risks.reserve(cfg.methods.size());
	for (Method m : cfg.methods) {
		QuantileGrid pred = [&]() {
			switch (m) {
			case Method::CV: return averaged_predict(fits, result.cv_weights, x0);
			case Method::sAIC: return averaged_predict(fits, ic_weights(criteria, SmoothedWeights::sAIC).weights, x0);
			case Method::sBIC: return averaged_predict(fits, ic_weights(criteria, SmoothedWeights::sBIC).weights, x0);
			case Method::EW: {
				const auto s_count = static_cast<Eigen::Index>(fits.size());
				return averaged_predict(fits, Eigen::VectorXd::Constant(s_count, 1.0 / static_cast<double>(s_count)), x0);
			}
			case Method::AIC: return select(Selection::AIC);
			case Method::BIC: return select(Selection::BIC);
			case Method::Full: {
				std::vector<std::size_t> all(cfg.dgp.p);
				std::iota(all.begin(), all.end(), std::size_t{0});
				return single(CandidateModel(all));
			}
			case Method::Oracle: return single(CandidateModel(DgpConfig::true_support()));
			}
			throw std::logic_error("unhandled method");
		}();
		result.risks.push_back(wasserstein_sq(pred, truth));
	}
	return result;
}

std::pair<double, double> mean_and_sd(std::span<const double> values) {
	const double nan = std::numeric_limits<double>::quiet_NaN();
	if (values.empty()) {
		return {nan, nan};
	}
	const auto count = static_cast<double>(values.size());
	const double mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
	if (values.size() < 2) {
		return {mean, nan};
	}
	double ss = 0.0;
	for (double v : values) {
		ss += (v - mean) * (v - mean);
	}
	return {mean, std::sqrt(ss / (count - 1.0))};
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
	validate(cfg);
	const std::size_t n_count = cfg.n_values.size();
	const std::size_t reps = cfg.replications;
	const std::size_t total = n_count * reps;

	ExperimentReport report;
	report.replications.assign(n_count, std::vector<ReplicationResult>(reps));
	report.succeeded.assign(n_count, std::vector<char>(reps, 0));
	std::vector<std::string> errors(total);

	std::atomic<std::size_t> next{0};
	auto worker = [&]() {
		for (std::size_t task = next++; task < total; task = next++) {
			const std::size_t ni = task / reps;
			const std::size_t r = task % reps;
			try {
				report.replications[ni][r] = run_replication(cfg, cfg.n_values[ni], r);
				report.succeeded[ni][r] = 1;
			} catch (const std::exception& e) {
				errors[task] = e.what();
			}
		}
	};
	const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(total, 1));
	if (threads == 1) {
		worker();
	} else {
		std::vector<std::jthread> pool;
		pool.reserve(threads);
		for (std::size_t t = 0; t < threads; ++t) {
			pool.emplace_back(worker);
		}
	}

	const bool has_cv = std::find(cfg.methods.begin(), cfg.methods.end(), Method::CV) != cfg.methods.end();
	for (std::size_t ni = 0; ni < n_count; ++ni) {
		const std::size_t n = cfg.n_values[ni];
		std::size_t failures = 0;
		for (std::size_t r = 0; r < reps; ++r) {
			if (!report.succeeded[ni][r]) {
				++failures;
				report.failures.push_back({n, r, errors[ni * reps + r]});
			}
		}
		for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
			std::vector<double> risks;
			for (std::size_t r = 0; r < reps; ++r) {
				if (report.succeeded[ni][r]) {
					risks.push_back(report.replications[ni][r].risks[mi]);
				}
			}
			const auto [mean, sd] = mean_and_sd(risks);
			report.risks.push_back({n, cfg.methods[mi], mean, sd, risks.size(), failures});
		}
		if (has_cv) {
			std::vector<double> sums;
			for (std::size_t r = 0; r < reps; ++r) {
				if (report.succeeded[ni][r]) {
					sums.push_back(report.replications[ni][r].correct_weight_sum);
				}
			}
			report.weights.push_back({n, mean_and_sd(sums).first, sums.size()});
		}
	}
	return report;
}

} // namespace frechet_ma
