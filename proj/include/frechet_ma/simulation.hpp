#pragma once

// Monte Carlo harness: correlated-uniform predictors, Gaussian-family
// distributional responses with random location and scale, and a
// multi-method risk comparison across sample sizes.

#include "frechet_ma/averaging.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace frechet_ma {

/// Data-generating process. Columns are 0-based: the location depends on
/// columns 3 and 7 (X_4, X_8) and the scale on column 0 (X_1).
struct DgpConfig {
	std::size_t p = 10;
	double rho = 0.5;
	double mu0 = 0.0;
	double sigma0 = 3.0;
	double beta = 0.75;
	double gamma = 1.0;
	double v1 = 1.0; ///< variance of the location noise; 0 gives the noiseless limit
	double v2 = 0.5; ///< variance of the scale noise; 0 gives the noiseless limit
	std::uint64_t seed = 20240901;

	/// Columns entering the true regression function.
	static std::vector<std::size_t> true_support() { return {0, 3, 7}; }
};

/// Throws std::invalid_argument naming the offending field.
void validate(const DgpConfig& cfg);

using Rng = std::mt19937_64;

/// Independent deterministic stream for replication `rep` at sample size `n`.
Rng stream_rng(std::uint64_t seed, std::uint64_t n, std::uint64_t rep);

/// n x p matrix with X_j = 2 Phi(Z_j) - 1, Z ~ N(0, R), R_jk = rho^|j-k|.
Eigen::MatrixXd gen_predictors(const DgpConfig& cfg, std::size_t n, Rng& rng);

/// m(x) = mu0 + beta (x_4 + x_8) + (sigma0 + gamma x_1) Phi^{-1}(.).
class TrueRegression {
public:
	explicit TrueRegression(DgpConfig cfg);
	QuantileGrid operator()(const Eigen::VectorXd& x, const GridPtr& grid) const;

private:
	DgpConfig cfg_;
};

/// Y = mu + sigma Phi^{-1} with mu ~ N(mu0 + beta(x_4 + x_8), v1) and
/// sigma ~ Gamma(shape = m^2 / v2, scale = v2 / m), m = sigma0 + gamma x_1.
QuantileGrid gen_response(const DgpConfig& cfg, const Eigen::VectorXd& x, Rng& rng, const GridPtr& grid);

enum class Method { CV, sAIC, sBIC, EW, AIC, BIC, Full, Oracle };

std::string_view to_string(Method m);
/// Throws std::invalid_argument on an unknown name.
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

/// Six candidates over 0-based columns: {0}, {3,7}, {0,3}, {0,3,7},
/// {0,3,4,7} and all p columns.
CandidateSet default_candidates(std::size_t p = 10);

struct ExperimentConfig {
	DgpConfig dgp;
	std::vector<std::size_t> n_values{100, 200, 300};
	std::size_t replications = 100;
	CandidateSet candidates = default_candidates();
	std::size_t k_folds = 10;
	std::size_t grid_m = 100;
	std::vector<Method> methods = all_methods();
	bool shuffle_folds = false;
	std::size_t threads = 1;
};

void validate(const ExperimentConfig& cfg);

/// Indices of candidates that contain every true-support column.
std::vector<std::size_t> correct_candidates(const CandidateSet& candidates);

struct ReplicationResult {
	std::vector<double> risks;    ///< aligned with ExperimentConfig::methods
	Eigen::VectorXd cv_weights;   ///< empty if CV is not among the methods
	double correct_weight_sum = 0.0;
	bool cv_converged = true;
	std::size_t jittered_fits = 0;
};

/// One replication: fresh training sample of size n and a fresh query point.
ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t n, std::size_t rep);

struct RiskSummary {
	std::size_t n = 0;
	Method method = Method::CV;
	double mean_risk = 0.0;
	double sd_risk = 0.0; ///< across-replication SD, divisor T - 1 (NaN when T = 1)
	std::size_t count = 0;
	std::size_t failures = 0;
};

struct WeightSummary {
	std::size_t n = 0;
	double mean_correct_weight_sum = 0.0;
	std::size_t count = 0;
};

struct ReplicationFailure {
	std::size_t n = 0;
	std::size_t rep = 0;
	std::string message;
};

struct ExperimentReport {
	std::vector<RiskSummary> risks;     ///< ordered by n, then by method
	std::vector<WeightSummary> weights; ///< one per n when CV is enabled
	std::vector<ReplicationFailure> failures;
	std::vector<std::vector<ReplicationResult>> replications; ///< [n index][rep]; failed reps left empty
	std::vector<std::vector<char>> succeeded;
};

/// Runs every (n, replication) pair, in parallel when cfg.threads > 1. The
/// report depends only on the configuration, not on the thread count.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Mean and SD (divisor size - 1) of a sample.
std::pair<double, double> mean_and_sd(std::span<const double> values);

} // namespace frechet_ma
