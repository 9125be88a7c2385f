#include "frechet_ma/quantile.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace frechet_ma {

namespace {

void require_finite(std::span<const double> values, const char* what) {
	for (std::size_t m = 0; m < values.size(); ++m) {
		if (!std::isfinite(values[m])) {
			throw std::invalid_argument(std::string(what) + ": non-finite value at grid index " + std::to_string(m));
		}
	}
}

void require_same_grid(const ProbGrid& a, const ProbGrid& b, const char* what) {
	if (!(a == b)) {
		throw std::invalid_argument(std::string(what) + ": grids differ (" + std::to_string(a.size()) + " vs " +
		                            std::to_string(b.size()) + " points)");
	}
}

template <typename Part>
RawQuantileGrid combine_impl(std::span<const double> coeffs, std::span<const Part> parts) {
	if (coeffs.size() != parts.size()) {
		throw std::invalid_argument("combine: " + std::to_string(coeffs.size()) + " coefficients for " +
		                            std::to_string(parts.size()) + " grids");
	}
	if (parts.empty()) {
		throw std::invalid_argument("combine: no grids");
	}
	const auto& grid = parts.front().grid_ptr();
	std::vector<double> out(grid->size(), 0.0);
	for (std::size_t s = 0; s < parts.size(); ++s) {
		require_same_grid(*grid, parts[s].grid(), "combine");
		const auto values = parts[s].values();
		for (std::size_t m = 0; m < out.size(); ++m) {
			out[m] += coeffs[s] * values[m];
		}
	}
	return RawQuantileGrid(grid, std::move(out));
}

} // namespace

ProbGrid::ProbGrid(std::size_t m_points) {
	if (m_points == 0) {
		throw std::invalid_argument("ProbGrid: need at least one grid point");
	}
	t_.resize(m_points);
	const double denom = 2.0 * static_cast<double>(m_points);
	for (std::size_t m = 0; m < m_points; ++m) {
		t_[m] = (2.0 * static_cast<double>(m) + 1.0) / denom;
	}
}

double ProbGrid::integrate(std::span<const double> f) const {
	if (f.size() != t_.size()) {
		throw std::invalid_argument("ProbGrid::integrate: size mismatch");
	}
	double sum = 0.0;
	for (double v : f) {
		sum += v;
	}
	return sum / static_cast<double>(t_.size());
}

GridPtr make_grid(std::size_t m_points) {
	return std::make_shared<const ProbGrid>(m_points);
}

RawQuantileGrid::RawQuantileGrid(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
	if (!grid_) {
		throw std::invalid_argument("RawQuantileGrid: null grid");
	}
	if (values_.size() != grid_->size()) {
		throw std::invalid_argument("RawQuantileGrid: " + std::to_string(values_.size()) + " values for a " +
		                            std::to_string(grid_->size()) + "-point grid");
	}
	require_finite(values_, "RawQuantileGrid");
}

bool RawQuantileGrid::is_monotone() const noexcept {
	return std::is_sorted(values_.begin(), values_.end());
}

QuantileGrid::QuantileGrid(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
	if (!grid_) {
		throw std::invalid_argument("QuantileGrid: null grid");
	}
	if (values_.size() != grid_->size()) {
		throw std::invalid_argument("QuantileGrid: " + std::to_string(values_.size()) + " values for a " +
		                            std::to_string(grid_->size()) + "-point grid");
	}
	require_finite(values_, "QuantileGrid");
	for (std::size_t m = 1; m < values_.size(); ++m) {
		if (values_[m] < values_[m - 1]) {
			throw std::invalid_argument("QuantileGrid: values decrease at grid index " + std::to_string(m));
		}
	}
}

QuantileGrid QuantileGrid::from_raw(const RawQuantileGrid& raw) {
	return QuantileGrid(raw.grid_ptr(), std::vector<double>(raw.values().begin(), raw.values().end()));
}

double normal_cdf(double z) {
	return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double p) {
	if (!(p > 0.0 && p < 1.0)) {
		throw std::domain_error("normal_quantile: probability must lie in (0, 1)");
	}
	return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

QuantileGrid gaussian_quantile(double mu, double sigma, GridPtr grid) {
	if (!std::isfinite(mu) || !std::isfinite(sigma)) {
		throw std::invalid_argument("gaussian_quantile: mu and sigma must be finite");
	}
	if (sigma < 0.0) {
		throw std::invalid_argument("gaussian_quantile: sigma must be non-negative");
	}
	if (!grid) {
		throw std::invalid_argument("gaussian_quantile: null grid");
	}
	std::vector<double> values(grid->size());
	const auto t = grid->t_values();
	for (std::size_t m = 0; m < values.size(); ++m) {
		values[m] = sigma == 0.0 ? mu : mu + sigma * normal_quantile(t[m]);
	}
	return QuantileGrid(std::move(grid), std::move(values));
}

QuantileGrid empirical_quantile(std::span<const double> samples, GridPtr grid) {
	if (samples.empty()) {
		throw std::invalid_argument("empirical_quantile: empty sample");
	}
	if (!grid) {
		throw std::invalid_argument("empirical_quantile: null grid");
	}
	std::vector<double> sorted(samples.begin(), samples.end());
	require_finite(sorted, "empirical_quantile");
	std::sort(sorted.begin(), sorted.end());

	const auto n = static_cast<double>(sorted.size());
	const auto t = grid->t_values();
	std::vector<double> values(grid->size());
	for (std::size_t m = 0; m < values.size(); ++m) {
		// Fractional 0-based order-statistic position of level t.
		const double pos = t[m] * n - 0.5;
		if (pos <= 0.0) {
			values[m] = sorted.front();
		} else if (pos >= n - 1.0) {
			values[m] = sorted.back();
		} else {
			const auto lo = static_cast<std::size_t>(std::floor(pos));
			const double frac = pos - static_cast<double>(lo);
			values[m] = sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
		}
	}
	// Interpolation between sorted values cannot decrease, but rounding in
	// the affine blend can; ties are resolved by a running max.
	for (std::size_t m = 1; m < values.size(); ++m) {
		values[m] = std::max(values[m], values[m - 1]);
	}
	return QuantileGrid(std::move(grid), std::move(values));
}

double l2_inner(std::span<const double> a, std::span<const double> b) {
	if (a.size() != b.size() || a.empty()) {
		throw std::invalid_argument("l2_inner: size mismatch");
	}
	double sum = 0.0;
	for (std::size_t m = 0; m < a.size(); ++m) {
		sum += a[m] * b[m];
	}
	return sum / static_cast<double>(a.size());
}

double wasserstein_sq(const QuantileGrid& a, const QuantileGrid& b) {
	return wasserstein_sq(a.raw(), b.raw());
}

double wasserstein_sq(const RawQuantileGrid& a, const RawQuantileGrid& b) {
	require_same_grid(a.grid(), b.grid(), "wasserstein_sq");
	const auto x = a.values();
	const auto y = b.values();
	double sum = 0.0;
	for (std::size_t m = 0; m < x.size(); ++m) {
		const double d = x[m] - y[m];
		sum += d * d;
	}
	return sum / static_cast<double>(x.size());
}

QuantileGrid isotonic_project(const RawQuantileGrid& raw) {
	const auto y = raw.values();
	// Blocks of pooled points: running sum and size.
	std::vector<double> block_sum;
	std::vector<std::size_t> block_len;
	block_sum.reserve(y.size());
	block_len.reserve(y.size());
	for (double v : y) {
		block_sum.push_back(v);
		block_len.push_back(1);
		while (block_sum.size() > 1) {
			const std::size_t last = block_sum.size() - 1;
			const double mean_last = block_sum[last] / static_cast<double>(block_len[last]);
			const double mean_prev = block_sum[last - 1] / static_cast<double>(block_len[last - 1]);
			if (mean_prev <= mean_last) {
				break;
			}
			block_sum[last - 1] += block_sum[last];
			block_len[last - 1] += block_len[last];
			block_sum.pop_back();
			block_len.pop_back();
		}
	}

	std::vector<double> out;
	out.reserve(y.size());
	for (std::size_t b = 0; b < block_sum.size(); ++b) {
		const double mean = block_sum[b] / static_cast<double>(block_len[b]);
		out.insert(out.end(), block_len[b], mean);
	}
	// Block means are non-decreasing up to rounding of the division.
	for (std::size_t m = 1; m < out.size(); ++m) {
		out[m] = std::max(out[m], out[m - 1]);
	}
	return QuantileGrid(raw.grid_ptr(), std::move(out));
}

RawQuantileGrid combine(std::span<const double> coeffs, std::span<const QuantileGrid> parts) {
	return combine_impl(coeffs, parts);
}

RawQuantileGrid combine(std::span<const double> coeffs, std::span<const RawQuantileGrid> parts) {
	return combine_impl(coeffs, parts);
}

} // namespace frechet_ma
