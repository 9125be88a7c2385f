#include "frechet_ma/frechet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace frechet_ma {

namespace {

std::string describe(const CandidateModel& model) {
	std::string out = "{";
	for (std::size_t j = 0; j < model.size(); ++j) {
		out += (j ? "," : "") + std::to_string(model.indices()[j]);
	}
	return out + "}";
}

/// Rows of `data` not listed in `excluded`, ascending.
std::vector<std::size_t> kept_rows(std::size_t n, std::span<const std::size_t> excluded) {
	std::vector<char> drop(n, 0);
	for (std::size_t i : excluded) {
		if (i >= n) {
			throw std::invalid_argument("excluded row " + std::to_string(i) + " out of range for n=" + std::to_string(n));
		}
		drop[i] = 1;
	}
	std::vector<std::size_t> rows;
	rows.reserve(n);
	for (std::size_t i = 0; i < n; ++i) {
		if (!drop[i]) {
			rows.push_back(i);
		}
	}
	return rows;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& src, std::span<const std::size_t> rows, const std::vector<std::size_t>& cols) {
	Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
	for (std::size_t r = 0; r < rows.size(); ++r) {
		for (std::size_t c = 0; c < cols.size(); ++c) {
			out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
			    src(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
		}
	}
	return out;
}

constexpr double kPivotFloor = 1e-13;

DesignStats stats_from_rows(const Eigen::MatrixXd& x, const CandidateModel& model) {
	const auto n_used = static_cast<std::size_t>(x.rows());
	const auto ps = x.cols();
	if (n_used < static_cast<std::size_t>(ps) + 1) {
		throw FitError("candidate " + describe(model) + ": " + std::to_string(n_used) + " rows cannot support " +
		               std::to_string(ps) + " predictors");
	}
	DesignStats stats;
	stats.n_used = n_used;
	stats.mean = x.colwise().sum().transpose() / static_cast<double>(n_used);
	const Eigen::MatrixXd centered = x.rowwise() - stats.mean.transpose();
	const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n_used);

	const double scale = cov.trace() / static_cast<double>(ps);
	// A roundoff-sized positive pivot is as singular as a negative one.
	auto factor_ok = [scale](const Eigen::LLT<Eigen::MatrixXd>& f) {
		if (f.info() != Eigen::Success) {
			return false;
		}
		const double min_pivot = f.matrixLLT().diagonal().minCoeff();
		return min_pivot * min_pivot > kPivotFloor * scale;
	};
	Eigen::LLT<Eigen::MatrixXd> llt(cov);
	if (factor_ok(llt)) {
		stats.cov_factor = llt.matrixL();
		return stats;
	}
	if (scale > 0.0 && std::isfinite(scale)) {
		for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
			const double eps = rel * scale;
			Eigen::MatrixXd jittered = cov;
			jittered.diagonal().array() += eps;
			llt.compute(jittered);
			if (factor_ok(llt)) {
				stats.cov_factor = llt.matrixL();
				stats.jitter_applied = eps;
				return stats;
			}
		}
	}
	throw FitError("candidate " + describe(model) + ": predictor covariance is singular over " +
	               std::to_string(n_used) + " rows");
}

} // namespace

Dataset::Dataset(Eigen::MatrixXd predictors, std::vector<QuantileGrid> responses)
    : predictors_(std::move(predictors)), responses_(std::move(responses)) {
	if (responses_.empty()) {
		throw std::invalid_argument("Dataset: no observations");
	}
	if (static_cast<std::size_t>(predictors_.rows()) != responses_.size()) {
		throw std::invalid_argument("Dataset: " + std::to_string(predictors_.rows()) + " predictor rows but " +
		                            std::to_string(responses_.size()) + " responses");
	}
	if (!predictors_.allFinite()) {
		throw std::invalid_argument("Dataset: non-finite predictor value");
	}
	const auto& grid = responses_.front().grid();
	response_matrix_.resize(predictors_.rows(), static_cast<Eigen::Index>(grid.size()));
	for (std::size_t i = 0; i < responses_.size(); ++i) {
		if (!(responses_[i].grid() == grid)) {
			throw std::invalid_argument("Dataset: response " + std::to_string(i) + " is on a different grid");
		}
		const auto v = responses_[i].values();
		for (std::size_t m = 0; m < v.size(); ++m) {
			response_matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = v[m];
		}
	}
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
	if (rows.empty()) {
		throw std::invalid_argument("Dataset::subset: empty row set");
	}
	Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), predictors_.cols());
	std::vector<QuantileGrid> y;
	y.reserve(rows.size());
	for (std::size_t r = 0; r < rows.size(); ++r) {
		if (rows[r] >= n()) {
			throw std::invalid_argument("Dataset::subset: row " + std::to_string(rows[r]) + " out of range");
		}
		x.row(static_cast<Eigen::Index>(r)) = predictors_.row(static_cast<Eigen::Index>(rows[r]));
		y.push_back(responses_[rows[r]]);
	}
	return Dataset(std::move(x), std::move(y));
}

CandidateModel::CandidateModel(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
	if (indices_.empty()) {
		throw std::invalid_argument("CandidateModel: at least one predictor required");
	}
	for (std::size_t j = 1; j < indices_.size(); ++j) {
		if (indices_[j] <= indices_[j - 1]) {
			throw std::invalid_argument("CandidateModel: indices must be strictly increasing");
		}
	}
}

void CandidateModel::check_dimension(std::size_t p) const {
	if (indices_.back() >= p) {
		throw std::invalid_argument("CandidateModel " + describe(*this) + ": index out of range for p=" +
		                            std::to_string(p));
	}
}

Eigen::VectorXd CandidateModel::restrict(const Eigen::Ref<const Eigen::VectorXd>& x_full) const {
	check_dimension(static_cast<std::size_t>(x_full.size()));
	Eigen::VectorXd out(static_cast<Eigen::Index>(indices_.size()));
	for (std::size_t j = 0; j < indices_.size(); ++j) {
		out(static_cast<Eigen::Index>(j)) = x_full(static_cast<Eigen::Index>(indices_[j]));
	}
	return out;
}

Eigen::MatrixXd CandidateModel::restrict_rows(const Eigen::MatrixXd& predictors) const {
	check_dimension(static_cast<std::size_t>(predictors.cols()));
	std::vector<std::size_t> rows(static_cast<std::size_t>(predictors.rows()));
	std::iota(rows.begin(), rows.end(), std::size_t{0});
	return gather(predictors, rows, indices_);
}

Eigen::VectorXd DesignStats::solve(const Eigen::VectorXd& v) const {
	const auto lower = cov_factor.triangularView<Eigen::Lower>();
	Eigen::VectorXd y = lower.solve(v);
	return lower.transpose().solve(y);
}

DesignStats design_stats(const Dataset& data, const CandidateModel& model, std::span<const std::size_t> excluded) {
	model.check_dimension(data.p());
	const auto rows = kept_rows(data.n(), excluded);
	return stats_from_rows(gather(data.predictors(), rows, model.indices()), model);
}

Eigen::VectorXd s_weights(const DesignStats& stats, const Eigen::MatrixXd& rows, const Eigen::VectorXd& x) {
	if (x.size() != stats.mean.size() || rows.cols() != stats.mean.size()) {
		throw std::invalid_argument("s_weights: dimension mismatch");
	}
	const Eigen::VectorXd z = stats.solve(x - stats.mean);
	const Eigen::MatrixXd centered = rows.rowwise() - stats.mean.transpose();
	return (centered * z).array() + 1.0;
}

CandidateFit::CandidateFit(CandidateModel model, DesignStats stats, Eigen::VectorXd mean_response,
                           Eigen::MatrixXd cross_moment, GridPtr grid)
    : model_(std::move(model)), stats_(std::move(stats)), mean_response_(std::move(mean_response)),
      cross_moment_(std::move(cross_moment)), grid_(std::move(grid)) {
	const auto ps = static_cast<Eigen::Index>(model_.size());
	if (!grid_ || mean_response_.size() != static_cast<Eigen::Index>(grid_->size()) ||
	    stats_.mean.size() != ps || stats_.cov_factor.rows() != ps || stats_.cov_factor.cols() != ps ||
	    cross_moment_.rows() != ps || cross_moment_.cols() != mean_response_.size()) {
		throw std::invalid_argument("CandidateFit: inconsistent dimensions");
	}
}

CandidateFit CandidateFit::build(const Dataset& data, const CandidateModel& model,
                                 std::span<const std::size_t> excluded) {
	model.check_dimension(data.p());
	const auto rows = kept_rows(data.n(), excluded);
	const Eigen::MatrixXd x = gather(data.predictors(), rows, model.indices());
	DesignStats stats = stats_from_rows(x, model);

	Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), data.response_matrix().cols());
	for (std::size_t r = 0; r < rows.size(); ++r) {
		y.row(static_cast<Eigen::Index>(r)) = data.response_matrix().row(static_cast<Eigen::Index>(rows[r]));
	}
	const double inv_n = 1.0 / static_cast<double>(rows.size());
	Eigen::VectorXd mean_response = y.colwise().sum().transpose() * inv_n;
	const Eigen::MatrixXd centered = x.rowwise() - stats.mean.transpose();
	Eigen::MatrixXd cross = (centered.transpose() * y) * inv_n;
	return CandidateFit(model, std::move(stats), std::move(mean_response), std::move(cross), data.grid_ptr());
}

RawQuantileGrid CandidateFit::weighted_average(const Eigen::VectorXd& x) const {
	if (x.size() != stats_.mean.size()) {
		throw std::invalid_argument("CandidateFit: query has " + std::to_string(x.size()) + " coordinates, model " +
		                            describe(model_) + " expects " + std::to_string(stats_.mean.size()));
	}
	const Eigen::VectorXd z = stats_.solve(x - stats_.mean);
	const Eigen::VectorXd avg = mean_response_ + cross_moment_.transpose() * z;
	return RawQuantileGrid(grid_, std::vector<double>(avg.data(), avg.data() + avg.size()));
}

QuantileGrid CandidateFit::predict(const Eigen::VectorXd& x) const {
	return isotonic_project(weighted_average(x));
}

QuantileGrid CandidateFit::predict_full(const Eigen::Ref<const Eigen::VectorXd>& x_full) const {
	return predict(model_.restrict(x_full));
}

QuantileGrid fit_at(const Dataset& data, const CandidateModel& model, const Eigen::VectorXd& x,
                    std::span<const std::size_t> excluded) {
	return CandidateFit::build(data, model, excluded).predict(x);
}

Folds make_folds(std::size_t n, std::size_t k, std::optional<std::uint64_t> shuffle_seed) {
	if (k < 1 || k > n) {
		throw std::invalid_argument("make_folds: need 1 <= K <= n (K=" + std::to_string(k) + ", n=" +
		                            std::to_string(n) + ")");
	}
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), std::size_t{0});
	if (shuffle_seed) {
		std::mt19937_64 rng(*shuffle_seed);
		std::shuffle(order.begin(), order.end(), rng);
	}
	Folds folds(k);
	const std::size_t base = n / k;
	const std::size_t extra = n % k;
	std::size_t next = 0;
	for (std::size_t f = 0; f < k; ++f) {
		const std::size_t len = base + (f < extra ? 1 : 0);
		folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
		                order.begin() + static_cast<std::ptrdiff_t>(next + len));
		std::sort(folds[f].begin(), folds[f].end());
		next += len;
	}
	return folds;
}

void check_partition(const Folds& folds, std::size_t n) {
	std::vector<char> seen(n, 0);
	std::size_t count = 0;
	for (const auto& fold : folds) {
		for (std::size_t i : fold) {
			if (i >= n || seen[i]) {
				throw std::invalid_argument("folds: row " + std::to_string(i) + " is out of range or repeated");
			}
			seen[i] = 1;
			++count;
		}
	}
	if (count != n) {
		throw std::invalid_argument("folds: " + std::to_string(n - count) + " rows are not assigned to any fold");
	}
}

std::vector<QuantileGrid> leave_group_out_fits(const Dataset& data, const CandidateModel& model, const Folds& folds) {
	check_partition(folds, data.n());
	std::vector<std::optional<QuantileGrid>> slots(data.n());
	for (const auto& fold : folds) {
		if (fold.empty()) {
			continue;
		}
		const auto fit = CandidateFit::build(data, model, fold);
		for (std::size_t i : fold) {
			slots[i] = fit.predict_full(data.predictors().row(static_cast<Eigen::Index>(i)).transpose());
		}
	}
	std::vector<QuantileGrid> out;
	out.reserve(slots.size());
	for (auto& slot : slots) {
		out.push_back(std::move(*slot));
	}
	return out;
}

} // namespace frechet_ma
