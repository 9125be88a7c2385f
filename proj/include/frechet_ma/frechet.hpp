#pragma once

// Global Frechet regression of quantile-grid responses on Euclidean
// predictors, for a single candidate subset of predictor columns.

#include "frechet_ma/quantile.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace frechet_ma {

/// Raised when a fit cannot be computed (too few rows, singular design).
class FitError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// n observations of (predictor row, quantile-grid response).
class Dataset {
public:
	Dataset(Eigen::MatrixXd predictors, std::vector<QuantileGrid> responses);

	std::size_t n() const noexcept { return static_cast<std::size_t>(predictors_.rows()); }
	std::size_t p() const noexcept { return static_cast<std::size_t>(predictors_.cols()); }
	const Eigen::MatrixXd& predictors() const noexcept { return predictors_; }
	const std::vector<QuantileGrid>& responses() const noexcept { return responses_; }
	const QuantileGrid& response(std::size_t i) const { return responses_.at(i); }
	/// Responses stacked as an n x M matrix.
	const Eigen::MatrixXd& response_matrix() const noexcept { return response_matrix_; }
	const GridPtr& grid_ptr() const noexcept { return responses_.front().grid_ptr(); }

	/// Rows in the given order.
	Dataset subset(std::span<const std::size_t> rows) const;

private:
	Eigen::MatrixXd predictors_;
	std::vector<QuantileGrid> responses_;
	Eigen::MatrixXd response_matrix_;
};

/// Strictly increasing 0-based predictor columns used by one candidate.
class CandidateModel {
public:
	explicit CandidateModel(std::vector<std::size_t> indices);

	const std::vector<std::size_t>& indices() const noexcept { return indices_; }
	std::size_t size() const noexcept { return indices_.size(); }

	/// Throws std::invalid_argument if any index is >= p.
	void check_dimension(std::size_t p) const;

	/// Selects this candidate's coordinates from a full predictor row.
	Eigen::VectorXd restrict(const Eigen::Ref<const Eigen::VectorXd>& x_full) const;
	Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& predictors) const;

	bool operator==(const CandidateModel&) const = default;

private:
	std::vector<std::size_t> indices_;
};

/// Sample mean and Cholesky factor of the sample covariance (divisor n_used)
/// of one candidate's predictors.
struct DesignStats {
	Eigen::VectorXd mean;
	Eigen::MatrixXd cov_factor; ///< lower triangular L with L L^T = covariance (+ jitter)
	double jitter_applied = 0.0;
	std::size_t n_used = 0;

	/// Sigma^{-1} v via the stored factor.
	Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
	Eigen::MatrixXd covariance() const { return cov_factor * cov_factor.transpose(); }
};

/// Moments over rows not in `excluded`. A failed Cholesky factorization is
/// retried with diagonal jitter 1e-10 * trace / p_s, escalating by 10x up to
/// 1e-4 * trace / p_s; beyond that a FitError is thrown.
DesignStats design_stats(const Dataset& data, const CandidateModel& model,
                         std::span<const std::size_t> excluded = {});

/// Global Frechet weights s_i = 1 + (x - mean)^T Sigma^{-1} (X_i - mean) for
/// every row of `rows` (already restricted to the candidate's columns).
Eigen::VectorXd s_weights(const DesignStats& stats, const Eigen::MatrixXd& rows, const Eigen::VectorXd& x);

/// A fitted candidate: enough state to evaluate the fit at any x without
/// revisiting the data. The s-weighted response average at x is
///   mean_response + cross_moment^T Sigma^{-1} (x - mean),
/// where cross_moment = (1/n_used) sum_i (X_i - mean) Y_i^T.
class CandidateFit {
public:
	CandidateFit(CandidateModel model, DesignStats stats, Eigen::VectorXd mean_response, Eigen::MatrixXd cross_moment,
	             GridPtr grid);

	/// Fits on all rows of `data` except `excluded`.
	static CandidateFit build(const Dataset& data, const CandidateModel& model,
	                          std::span<const std::size_t> excluded = {});

	const CandidateModel& model() const noexcept { return model_; }
	const DesignStats& stats() const noexcept { return stats_; }
	const Eigen::VectorXd& mean_response() const noexcept { return mean_response_; }
	const Eigen::MatrixXd& cross_moment() const noexcept { return cross_moment_; }
	const GridPtr& grid_ptr() const noexcept { return grid_; }

	/// Pointwise s-weighted response average at x (candidate coordinates),
	/// before monotone projection.
	RawQuantileGrid weighted_average(const Eigen::VectorXd& x) const;

	/// Fitted quantile function at x (candidate coordinates).
	QuantileGrid predict(const Eigen::VectorXd& x) const;

	/// Fitted quantile function at a full-dimensional predictor row.
	QuantileGrid predict_full(const Eigen::Ref<const Eigen::VectorXd>& x_full) const;

private:
	CandidateModel model_;
	DesignStats stats_;
	Eigen::VectorXd mean_response_;
	Eigen::MatrixXd cross_moment_;
	GridPtr grid_;
};

/// Minimizer over monotone grids of sum_i s_i d_W^2(Y_i, .) using the rows
/// not in `excluded`; x is given in candidate coordinates.
QuantileGrid fit_at(const Dataset& data, const CandidateModel& model, const Eigen::VectorXd& x,
                    std::span<const std::size_t> excluded = {});

using Folds = std::vector<std::vector<std::size_t>>;

/// Splits rows 0..n-1 into k contiguous groups; the first n mod k groups get
/// one extra row. With a seed, rows are shuffled before splitting.
Folds make_folds(std::size_t n, std::size_t k, std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Throws std::invalid_argument unless `folds` partitions 0..n-1.
void check_partition(const Folds& folds, std::size_t n);

/// For every row i, the fit at X_i computed without the fold containing i.
std::vector<QuantileGrid> leave_group_out_fits(const Dataset& data, const CandidateModel& model, const Folds& folds);

} // namespace frechet_ma
