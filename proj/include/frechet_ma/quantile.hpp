#pragma once

// Distributions on the real line stored as quantile functions sampled on a
// shared midpoint grid, together with the L2-Wasserstein geometry on them.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace frechet_ma {

/// Midpoint probability grid t_m = (2m - 1) / (2M), m = 1..M, each point
/// carrying quadrature weight 1/M.
class ProbGrid {
public:
	explicit ProbGrid(std::size_t m_points);

	std::size_t size() const noexcept { return t_.size(); }
	std::span<const double> t_values() const noexcept { return t_; }
	double quad_weight() const noexcept { return 1.0 / static_cast<double>(t_.size()); }

	/// Midpoint-rule integral of f over (0, 1).
	double integrate(std::span<const double> f) const;

	bool operator==(const ProbGrid& other) const noexcept { return size() == other.size(); }

private:
	std::vector<double> t_;
};

using GridPtr = std::shared_ptr<const ProbGrid>;

GridPtr make_grid(std::size_t m_points);

/// Quantile values on a grid with no ordering requirement. Holds the
/// intermediate weighted averages that still need isotonic projection.
class RawQuantileGrid {
public:
	RawQuantileGrid(GridPtr grid, std::vector<double> values);

	const ProbGrid& grid() const noexcept { return *grid_; }
	const GridPtr& grid_ptr() const noexcept { return grid_; }
	std::span<const double> values() const noexcept { return values_; }
	std::size_t size() const noexcept { return values_.size(); }
	double operator[](std::size_t m) const { return values_[m]; }

	bool is_monotone() const noexcept;

private:
	GridPtr grid_;
	std::vector<double> values_;
};

/// A quantile function on a grid: finite and non-decreasing.
class QuantileGrid {
public:
	/// Throws std::invalid_argument if the values are non-finite or decreasing.
	QuantileGrid(GridPtr grid, std::vector<double> values);

	/// Reinterprets a raw grid that is already monotone (e.g. a convex
	/// combination of quantile grids). Throws if it is not.
	static QuantileGrid from_raw(const RawQuantileGrid& raw);

	const ProbGrid& grid() const noexcept { return *grid_; }
	const GridPtr& grid_ptr() const noexcept { return grid_; }
	std::span<const double> values() const noexcept { return values_; }
	std::size_t size() const noexcept { return values_.size(); }
	double operator[](std::size_t m) const { return values_[m]; }

	RawQuantileGrid raw() const { return RawQuantileGrid(grid_, values_); }

private:
	GridPtr grid_;
	std::vector<double> values_;
};

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// mu + sigma * Phi^{-1}(t_m) on every grid point.
QuantileGrid gaussian_quantile(double mu, double sigma, GridPtr grid);

/// Quantiles of an empirical sample. The i-th order statistic (1-based) sits
/// at level (i - 0.5) / n; levels in between are linearly interpolated and
/// levels outside [0.5/n, 1 - 0.5/n] clamp to the extreme order statistics.
QuantileGrid empirical_quantile(std::span<const double> samples, GridPtr grid);

/// Midpoint-rule L2 inner product of two grids, (1/M) sum_m a_m b_m.
double l2_inner(std::span<const double> a, std::span<const double> b);

/// Squared 2-Wasserstein distance, (1/M) sum_m (a_m - b_m)^2.
double wasserstein_sq(const QuantileGrid& a, const QuantileGrid& b);
double wasserstein_sq(const RawQuantileGrid& a, const RawQuantileGrid& b);

/// L2 projection onto non-decreasing sequences (pool adjacent violators).
QuantileGrid isotonic_project(const RawQuantileGrid& raw);

/// Pointwise linear combination sum_s coeffs[s] * parts[s].
RawQuantileGrid combine(std::span<const double> coeffs, std::span<const QuantileGrid> parts);
RawQuantileGrid combine(std::span<const double> coeffs, std::span<const RawQuantileGrid> parts);

} // namespace frechet_ma
