#pragma once

// Independent reference computations for the tests. None of these call the
// code paths they are used to check.

#include "frechet_ma/averaging.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace frechet_ma::testing {

/// Phi^{-1}(p) by bisection on the erfc-based CDF.
inline double normal_quantile_bisection(double p) {
	double lo = -40.0;
	double hi = 40.0;
	for (int it = 0; it < 200; ++it) {
		const double mid = 0.5 * (lo + hi);
		if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
			lo = mid;
		} else {
			hi = mid;
		}
	}
	return 0.5 * (lo + hi);
}

/// Exact monotone least-squares fit by enumerating every split of the
/// sequence into consecutive blocks. The optimum is constant on blocks with
/// block means, so the best feasible split is the projection.
inline std::vector<double> isotonic_exhaustive(const std::vector<double>& y) {
	const std::size_t n = y.size();
	if (n == 0) {
		return {};
	}
	double best_sse = std::numeric_limits<double>::infinity();
	std::vector<double> best;
	for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
		std::vector<double> fit(n);
		std::size_t start = 0;
		bool feasible = true;
		double prev_mean = -std::numeric_limits<double>::infinity();
		for (std::size_t i = 0; i < n; ++i) {
			const bool cut = i == n - 1 || (mask >> i) & 1u;
			if (!cut) {
				continue;
			}
			double sum = 0.0;
			for (std::size_t k = start; k <= i; ++k) {
				sum += y[k];
			}
			const double mean = sum / static_cast<double>(i - start + 1);
			if (mean < prev_mean) {
				feasible = false;
				break;
			}
			std::fill(fit.begin() + static_cast<std::ptrdiff_t>(start), fit.begin() + static_cast<std::ptrdiff_t>(i + 1), mean);
			prev_mean = mean;
			start = i + 1;
		}
		if (!feasible) {
			continue;
		}
		double sse = 0.0;
		for (std::size_t i = 0; i < n; ++i) {
			sse += (fit[i] - y[i]) * (fit[i] - y[i]);
		}
		if (sse < best_sse) {
			best_sse = sse;
			best = fit;
		}
	}
	return best;
}

/// Minimum of w^T A w - 2 b^T w + c over the simplex points whose
/// coordinates are multiples of `step`. The last free coordinate is scanned
/// exactly: a convex 1-D quadratic is minimized over a grid at one of the two
/// grid points bracketing its continuous minimizer (or an endpoint).
inline double simplex_grid_search(const CvQuadratic& q, double step, Eigen::VectorXd* argmin = nullptr) {
	const auto s = q.b.size();
	const long ticks = std::lround(1.0 / step);
	double best = std::numeric_limits<double>::infinity();
	Eigen::VectorXd w = Eigen::VectorXd::Zero(s);

	// Last two coordinates share `remaining` ticks: w_{s-2} = k, w_{s-1} = remaining - k.
	auto scan_last_pair = [&](long remaining) {
		if (s == 1) {
			w(0) = static_cast<double>(remaining) * step;
			const double f = q.evaluate(w);
			if (f < best) {
				best = f;
				if (argmin) *argmin = w;
			}
			return;
		}
		auto eval_at = [&](long k) {
			w(s - 2) = static_cast<double>(k) * step;
			w(s - 1) = static_cast<double>(remaining - k) * step;
			const double f = q.evaluate(w);
			if (f < best) {
				best = f;
				if (argmin) *argmin = w;
			}
		};
		// f(k) is a convex quadratic in k; find its continuous minimizer.
		w(s - 2) = 0.0;
		w(s - 1) = static_cast<double>(remaining) * step;
		const double f0 = q.evaluate(w);
		w(s - 2) = static_cast<double>(remaining) * step;
		w(s - 1) = 0.0;
		const double f1 = q.evaluate(w);
		const double mid_k = static_cast<double>(remaining) / 2.0;
		w(s - 2) = mid_k * step;
		w(s - 1) = (static_cast<double>(remaining) - mid_k) * step;
		const double fm = q.evaluate(w);
		eval_at(0);
		eval_at(remaining);
		if (remaining == 0) {
			return;
		}
		// f(k) = f0 + alpha k + beta k^2 through (0, f0), (R/2, fm), (R, f1).
		const double r = static_cast<double>(remaining);
		const double beta = 2.0 * (f0 - 2.0 * fm + f1) / (r * r);
		if (beta > 0.0) {
			const double alpha = (4.0 * fm - 3.0 * f0 - f1) / r;
			const double k_star = std::clamp(-alpha / (2.0 * beta), 0.0, r);
			const long k_lo = static_cast<long>(std::floor(k_star));
			for (long k = std::max(0L, k_lo - 1); k <= std::min(remaining, k_lo + 2); ++k) {
				eval_at(k);
			}
		}
	};

	// Enumerate the first s - 2 coordinates.
	std::vector<long> head(static_cast<std::size_t>(std::max<Eigen::Index>(s - 2, 0)), 0);
	std::function<void(std::size_t, long)> rec = [&](std::size_t depth, long remaining) {
		if (depth == head.size()) {
			for (std::size_t d = 0; d < head.size(); ++d) {
				w(static_cast<Eigen::Index>(d)) = static_cast<double>(head[d]) * step;
			}
			scan_last_pair(remaining);
			return;
		}
		for (long k = 0; k <= remaining; ++k) {
			head[depth] = k;
			rec(depth + 1, remaining - k);
		}
	};
	rec(0, ticks);
	return best;
}

/// CV criterion evaluated directly as a sum of squared distances.
inline double cv_direct(const Dataset& data, const std::vector<std::vector<QuantileGrid>>& predictions,
                        const Eigen::VectorXd& w) {
	double total = 0.0;
	const std::vector<double> coeffs(w.data(), w.data() + w.size());
	for (std::size_t i = 0; i < data.n(); ++i) {
		std::vector<QuantileGrid> parts;
		for (const auto& per_model : predictions) {
			parts.push_back(per_model[i]);
		}
		const auto mix = combine(coeffs, parts);
		total += wasserstein_sq(data.response(i).raw(), mix);
	}
	return total;
}

/// Random monotone grid: sorted normal draws scaled and shifted.
inline QuantileGrid random_grid(std::mt19937_64& rng, const GridPtr& grid, double spread = 1.0) {
	std::normal_distribution<double> normal(0.0, 1.0);
	std::vector<double> v(grid->size());
	for (auto& x : v) {
		x = spread * normal(rng);
	}
	std::sort(v.begin(), v.end());
	const double shift = normal(rng);
	for (auto& x : v) {
		x += shift;
	}
	return QuantileGrid(grid, v);
}

/// Predictors with standard normal entries and unrelated random responses.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p, std::size_t m) {
	std::normal_distribution<double> normal(0.0, 1.0);
	const auto grid = make_grid(m);
	Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
	for (Eigen::Index i = 0; i < x.rows(); ++i) {
		for (Eigen::Index j = 0; j < x.cols(); ++j) {
			x(i, j) = normal(rng);
		}
	}
	std::vector<QuantileGrid> y;
	for (std::size_t i = 0; i < n; ++i) {
		y.push_back(random_grid(rng, grid));
	}
	return Dataset(std::move(x), std::move(y));
}

/// Random PSD quadratic: A = G^T G / S with G of the given rank.
inline CvQuadratic random_psd_quadratic(std::mt19937_64& rng, Eigen::Index s, Eigen::Index rank) {
	std::normal_distribution<double> normal(0.0, 1.0);
	Eigen::MatrixXd g(rank, s);
	for (Eigen::Index r = 0; r < rank; ++r) {
		for (Eigen::Index c = 0; c < s; ++c) {
			g(r, c) = normal(rng);
		}
	}
	CvQuadratic q;
	q.a = g.transpose() * g / static_cast<double>(s);
	q.b.resize(s);
	for (Eigen::Index c = 0; c < s; ++c) {
		q.b(c) = normal(rng);
	}
	q.c = 1.0 + q.b.squaredNorm();
	return q;
}

} // namespace frechet_ma::testing
