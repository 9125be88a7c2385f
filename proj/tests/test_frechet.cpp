#include "frechet_ma/frechet.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace frechet_ma;
using frechet_ma::testing::random_dataset;
using frechet_ma::testing::random_grid;

namespace {

std::vector<double> values_of(const QuantileGrid& q) {
	return {q.values().begin(), q.values().end()};
}

Dataset two_point_dataset(const QuantileGrid& q1, const QuantileGrid& q2) {
	Eigen::MatrixXd x(2, 1);
	x << 0.0, 2.0;
	return Dataset(x, {q1, q2});
}

/// Sum_i s_i d_W^2(Y_i, q) computed directly from the s-weights.
double weighted_objective(const Dataset& data, const Eigen::VectorXd& s, const std::vector<double>& q) {
	const QuantileGrid cand(data.grid_ptr(), q);
	double total = 0.0;
	for (std::size_t i = 0; i < data.n(); ++i) {
		total += s(static_cast<Eigen::Index>(i)) * wasserstein_sq(data.response(i), cand);
	}
	return total;
}

/// All non-decreasing sequences of length m over `lattice`.
void enumerate_monotone(const std::vector<double>& lattice, std::size_t m, std::vector<double>& cur, std::size_t from,
                        const std::function<void(const std::vector<double>&)>& visit) {
	if (cur.size() == m) {
		visit(cur);
		return;
	}
	for (std::size_t k = from; k < lattice.size(); ++k) {
		cur.push_back(lattice[k]);
		enumerate_monotone(lattice, m, cur, k, visit);
		cur.pop_back();
	}
}

} // namespace

TEST_CASE("Dataset and CandidateModel validation") {
	const auto grid = make_grid(3);
	const QuantileGrid q(grid, {0, 1, 2});
	CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Zero(2, 1), {q}), std::invalid_argument);
	CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Zero(1, 1), {QuantileGrid(make_grid(3), {0, 1, 2})}) .subset(std::vector<std::size_t>{3}),
	                std::invalid_argument);
	CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Zero(2, 1), {q, gaussian_quantile(0, 1, make_grid(4))}), std::invalid_argument);
	CHECK_THROWS_AS(CandidateModel({}), std::invalid_argument);
	CHECK_THROWS_AS(CandidateModel({2, 1}), std::invalid_argument);
	CHECK_THROWS_AS(CandidateModel({1, 1}), std::invalid_argument);
	CHECK_THROWS_AS(CandidateModel({0, 5}).check_dimension(5), std::invalid_argument);
	CHECK_NOTHROW(CandidateModel({0, 4}).check_dimension(5));
}

TEST_CASE("design_stats") {
	const auto grid = make_grid(4);
	const auto q1 = gaussian_quantile(0, 1, grid);
	const auto q2 = gaussian_quantile(1, 2, grid);

	SUBCASE("two points, divisor n") {
		const auto stats = design_stats(two_point_dataset(q1, q2), CandidateModel({0}));
		CHECK(stats.mean(0) == 1.0);
		CHECK(stats.covariance()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
		CHECK(stats.jitter_applied == 0.0);
		CHECK(stats.n_used == 2);
	}
	SUBCASE("identical rows cannot be factorized") {
		Eigen::MatrixXd x = Eigen::MatrixXd::Constant(4, 2, 0.5);
		const Dataset data(x, {q1, q2, q1, q2});
		CHECK_THROWS_AS(design_stats(data, CandidateModel({0, 1})), FitError);
	}
	SUBCASE("too few rows") {
		CHECK_THROWS_AS(design_stats(two_point_dataset(q1, q2), CandidateModel({0}), std::vector<std::size_t>{1}),
		                FitError);
	}
	SUBCASE("exclusion equals the complement dataset") {
		std::mt19937_64 rng(21);
		const auto data = random_dataset(rng, 15, 3, 5);
		const std::vector<std::size_t> excluded{2, 5, 11};
		const std::vector<std::size_t> kept{0, 1, 3, 4, 6, 7, 8, 9, 10, 12, 13, 14};
		const CandidateModel model({0, 2});
		const auto a = design_stats(data, model, excluded);
		const auto b = design_stats(data.subset(kept), model);
		CHECK(a.mean == b.mean);
		CHECK(a.cov_factor == b.cov_factor);
		CHECK(a.n_used == 12);
	}
	SUBCASE("collinear columns get jitter and a flag") {
		// Column 1 is an exact copy of column 0: rank-deficient covariance.
		std::mt19937_64 rng(4);
		std::normal_distribution<double> normal;
		Eigen::MatrixXd x(10, 2);
		std::vector<QuantileGrid> y;
		for (Eigen::Index i = 0; i < 10; ++i) {
			x(i, 0) = normal(rng);
			x(i, 1) = x(i, 0);
			y.push_back(random_grid(rng, grid));
		}
		const auto stats = design_stats(Dataset(x, y), CandidateModel({0, 1}));
		CHECK(stats.jitter_applied > 0.0);
		const double scale = stats.covariance().trace() / 2.0;
		CHECK(stats.jitter_applied <= 1e-4 * scale * 1.0001);
	}
}

TEST_CASE("jitter stays off for well-conditioned designs") {
	std::mt19937_64 rng(8);
	for (int k = 0; k < 200; ++k) {
		const auto data = random_dataset(rng, 30, 4, 3);
		const CandidateModel model({0, 1, 2, 3});
		const auto stats = design_stats(data, model);
		const Eigen::JacobiSVD<Eigen::MatrixXd> svd(stats.covariance());
		const double cond = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
		if (cond < 1e6) {
			REQUIRE(stats.jitter_applied == 0.0);
		}
	}
}

TEST_CASE("s_weights") {
	const auto grid = make_grid(4);
	const auto data = two_point_dataset(gaussian_quantile(0, 1, grid), gaussian_quantile(1, 2, grid));
	const auto stats = design_stats(data, CandidateModel({0}));
	const Eigen::MatrixXd rows = data.predictors();

	SUBCASE("at the mean every weight is one") {
		const auto s = s_weights(stats, rows, stats.mean);
		CHECK(s(0) == 1.0);
		CHECK(s(1) == 1.0);
	}
	SUBCASE("hand-computed 1-D case") {
		Eigen::VectorXd x(1);
		x << 2.0;
		const auto s = s_weights(stats, rows, x);
		CHECK(s(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
		CHECK(s(1) == doctest::Approx(2.0).epsilon(1e-15));
	}
	SUBCASE("dimension mismatch") {
		CHECK_THROWS_AS(s_weights(stats, rows, Eigen::VectorXd::Zero(2)), std::invalid_argument);
	}
}

TEST_CASE("s_weights sum to the number of fitting rows") {
	std::mt19937_64 rng(99);
	std::normal_distribution<double> normal(0.0, 2.0);
	std::uniform_int_distribution<std::size_t> pick_n(5, 40);
	for (int k = 0; k < 1000; ++k) {
		const std::size_t n = pick_n(rng);
		const std::size_t p = 1 + static_cast<std::size_t>(k % 3);
		const auto data = random_dataset(rng, n, p, 2);
		std::vector<std::size_t> idx(p);
		std::iota(idx.begin(), idx.end(), std::size_t{0});
		const CandidateModel model(idx);
		const auto stats = design_stats(data, model);
		Eigen::VectorXd x(static_cast<Eigen::Index>(p));
		for (auto& v : x) {
			v = normal(rng);
		}
		const auto s = s_weights(stats, model.restrict_rows(data.predictors()), x);
		REQUIRE(std::abs(s.sum() - static_cast<double>(n)) <= 1e-8 * static_cast<double>(n));
	}
}

TEST_CASE("fit_at examples") {
	const auto grid = make_grid(6);
	std::mt19937_64 rng(31);

	SUBCASE("at the predictor mean the fit is the mean response") {
		const auto data = random_dataset(rng, 12, 2, 6);
		const CandidateModel model({0, 1});
		const auto stats = design_stats(data, model);
		const auto fit = fit_at(data, model, stats.mean);
		const Eigen::VectorXd mean = data.response_matrix().colwise().mean().transpose();
		for (std::size_t m = 0; m < 6; ++m) {
			CHECK(fit[m] == doctest::Approx(mean(static_cast<Eigen::Index>(m))).epsilon(1e-12));
		}
	}
	SUBCASE("two points, query at the second") {
		const auto q1 = random_grid(rng, grid);
		const auto q2 = random_grid(rng, grid);
		Eigen::VectorXd x(1);
		x << 2.0;
		const auto fit = fit_at(two_point_dataset(q1, q2), CandidateModel({0}), x);
		for (std::size_t m = 0; m < 6; ++m) {
			CHECK(fit[m] == doctest::Approx(q2[m]).epsilon(1e-12));
		}
	}
	SUBCASE("translation equivariance") {
		const auto data = random_dataset(rng, 10, 2, 6);
		std::vector<QuantileGrid> shifted;
		for (const auto& y : data.responses()) {
			std::vector<double> v = values_of(y);
			for (auto& e : v) {
				e += 3.25;
			}
			shifted.emplace_back(y.grid_ptr(), v);
		}
		const Dataset moved(data.predictors(), shifted);
		Eigen::VectorXd x(2);
		x << 1.5, -2.0;
		const auto a = fit_at(data, CandidateModel({0, 1}), x);
		const auto b = fit_at(moved, CandidateModel({0, 1}), x);
		for (std::size_t m = 0; m < 6; ++m) {
			CHECK(b[m] == doctest::Approx(a[m] + 3.25).epsilon(1e-12));
		}
	}
	SUBCASE("query far from the data still gives a monotone grid") {
		const auto data = random_dataset(rng, 8, 1, 6);
		Eigen::VectorXd x(1);
		x << 50.0;
		const auto fit = fit_at(data, CandidateModel({0}), x);
		CHECK(std::is_sorted(fit.values().begin(), fit.values().end()));
	}
}

TEST_CASE("fit_at matches the direct s-weighted average") {
	std::mt19937_64 rng(17);
	std::normal_distribution<double> normal;
	for (int k = 0; k < 100; ++k) {
		const auto data = random_dataset(rng, 9, 2, 7);
		const CandidateModel model({0, 1});
		Eigen::VectorXd x(2);
		x << normal(rng), normal(rng);
		const auto stats = design_stats(data, model);
		const auto s = s_weights(stats, data.predictors(), x);
		const Eigen::VectorXd direct = (data.response_matrix().transpose() * s) / s.sum();
		const auto fit = CandidateFit::build(data, model);
		const auto avg = fit.weighted_average(x);
		for (std::size_t m = 0; m < 7; ++m) {
			REQUIRE(avg[m] == doctest::Approx(direct(static_cast<Eigen::Index>(m))).epsilon(1e-10).scale(1.0));
		}
	}
}

TEST_CASE("fit_at minimizes the weighted Wasserstein objective (lattice search)") {
	std::mt19937_64 rng(2024);
	std::uniform_int_distribution<std::size_t> pick_n(3, 6);
	std::uniform_int_distribution<std::size_t> pick_m(2, 5);
	std::normal_distribution<double> normal(0.0, 1.5);
	for (int k = 0; k < 40; ++k) {
		const std::size_t n = pick_n(rng);
		const std::size_t m = pick_m(rng);
		const auto data = random_dataset(rng, n, 1, m);
		const CandidateModel model({0});
		Eigen::VectorXd x(1);
		x << normal(rng);
		const auto stats = design_stats(data, model);
		const auto s = s_weights(stats, data.predictors(), x);
		const auto fit = fit_at(data, model, x);
		const double best_fit = weighted_objective(data, s, values_of(fit));

		// Lattice covering the fitted values and a margin around them.
		const double lo = std::min(fit.values().front(), data.response_matrix().minCoeff()) - 1.0;
		const double hi = std::max(fit.values().back(), data.response_matrix().maxCoeff()) + 1.0;
		std::vector<double> lattice;
		const std::size_t steps = m <= 3 ? 60 : (m == 4 ? 30 : 18);
		for (std::size_t j = 0; j <= steps; ++j) {
			lattice.push_back(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(steps));
		}
		double best_lattice = INFINITY;
		std::vector<double> cur;
		enumerate_monotone(lattice, m, cur, 0, [&](const std::vector<double>& q) {
			best_lattice = std::min(best_lattice, weighted_objective(data, s, q));
		});
		REQUIRE(best_fit <= best_lattice + 1e-9);
	}
}

TEST_CASE("make_folds") {
	SUBCASE("uneven split gives the first folds one extra row") {
		const auto folds = make_folds(23, 5);
		REQUIRE(folds.size() == 5);
		CHECK(folds[0].size() == 5);
		CHECK(folds[2].size() == 5);
		CHECK(folds[3].size() == 4);
		CHECK(folds[4].size() == 4);
		CHECK(folds[0].front() == 0);
		CHECK(folds[4].back() == 22);
		CHECK_NOTHROW(check_partition(folds, 23));
	}
	SUBCASE("shuffled folds are a seeded partition") {
		const auto a = make_folds(30, 4, 77);
		const auto b = make_folds(30, 4, 77);
		CHECK(a == b);
		CHECK_NOTHROW(check_partition(a, 30));
		CHECK(a != make_folds(30, 4));
	}
	CHECK_THROWS_AS(make_folds(3, 4), std::invalid_argument);
	CHECK_THROWS_AS(make_folds(3, 0), std::invalid_argument);
	CHECK_THROWS_AS(check_partition({{0, 1}, {1, 2}}, 3), std::invalid_argument);
	CHECK_THROWS_AS(check_partition({{0}, {2}}, 3), std::invalid_argument);
}

TEST_CASE("leave_group_out_fits") {
	std::mt19937_64 rng(55);
	SUBCASE("leave-one-out with constant responses returns that response") {
		const auto grid = make_grid(5);
		const auto q = random_grid(rng, grid);
		Eigen::MatrixXd x(3, 1);
		x << -1.0, 0.5, 2.0;
		const Dataset data(x, {q, q, q});
		const auto fits = leave_group_out_fits(data, CandidateModel({0}), make_folds(3, 3));
		for (const auto& f : fits) {
			for (std::size_t m = 0; m < 5; ++m) {
				CHECK(f[m] == doctest::Approx(q[m]).epsilon(1e-12));
			}
		}
	}
	SUBCASE("a row's own response never enters its prediction") {
		auto data = random_dataset(rng, 12, 2, 4);
		const auto folds = make_folds(12, 4);
		const CandidateModel model({0, 1});
		const auto before = leave_group_out_fits(data, model, folds);
		// Perturb every response in fold 1; only predictions outside fold 1 may change.
		std::vector<QuantileGrid> y = data.responses();
		for (std::size_t i : folds[1]) {
			std::vector<double> v = values_of(y[i]);
			for (auto& e : v) {
				e = e * 5.0 + 100.0;
			}
			y[i] = QuantileGrid(y[i].grid_ptr(), v);
		}
		const Dataset changed(data.predictors(), y);
		const auto after = leave_group_out_fits(changed, model, folds);
		for (std::size_t i : folds[1]) {
			CHECK(values_of(after[i]) == values_of(before[i]));
		}
		CHECK(values_of(after[0]) != values_of(before[0]));
	}
	SUBCASE("bit-identical to fitting on the explicitly subsetted data") {
		const auto data = random_dataset(rng, 20, 3, 6);
		const auto folds = make_folds(20, 5, 9);
		const CandidateModel model({0, 2});
		const auto joint = leave_group_out_fits(data, model, folds);
		for (const auto& fold : folds) {
			std::vector<std::size_t> rest;
			for (std::size_t i = 0; i < 20; ++i) {
				if (std::find(fold.begin(), fold.end(), i) == fold.end()) {
					rest.push_back(i);
				}
			}
			const auto sub = data.subset(rest);
			for (std::size_t i : fold) {
				const Eigen::VectorXd xi = model.restrict(data.predictors().row(static_cast<Eigen::Index>(i)).transpose());
				const auto single = fit_at(sub, model, xi);
				const auto excluded = fit_at(data, model, xi, fold);
				REQUIRE(values_of(single) == values_of(joint[i]));
				REQUIRE(values_of(excluded) == values_of(joint[i]));
			}
		}
	}
	SUBCASE("without exclusions each row gets the in-sample fit") {
		const auto data = random_dataset(rng, 10, 2, 4);
		const CandidateModel model({0, 1});
		const auto full = CandidateFit::build(data, model);
		for (std::size_t i = 0; i < data.n(); ++i) {
			const Eigen::VectorXd xi = data.predictors().row(static_cast<Eigen::Index>(i)).transpose();
			CHECK(values_of(fit_at(data, model, model.restrict(xi))) == values_of(full.predict_full(xi)));
		}
	}
	SUBCASE("folds that leave too few rows") {
		const auto data = random_dataset(rng, 4, 2, 3);
		CHECK_THROWS_AS(leave_group_out_fits(data, CandidateModel({0, 1}), make_folds(4, 2)), FitError);
	}
}
