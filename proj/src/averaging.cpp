#include "frechet_ma/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace frechet_ma {

namespace {

constexpr double kSupportThreshold = 1e-9;

void check_quadratic(const CvQuadratic& q) {
	const auto s = q.b.size();
	if (s == 0 || q.a.rows() != s || q.a.cols() != s) {
		throw std::invalid_argument("CvQuadratic: A must be S x S and b of length S >= 1");
	}
	if (!q.a.allFinite() || !q.b.allFinite() || !std::isfinite(q.c)) {
		throw std::invalid_argument("CvQuadratic: non-finite coefficients");
	}
}

Eigen::VectorXd gradient(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w) {
	return 2.0 * (a * w - b);
}

double kkt_residual_of(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w) {
	const Eigen::VectorXd g = gradient(a, b, w);
	const double mu = g.minCoeff();
	double worst = 0.0;
	for (Eigen::Index s = 0; s < w.size(); ++s) {
		if (w(s) > kSupportThreshold) {
			worst = std::max(worst, g(s) - mu);
		}
	}
	return worst;
}

/// Primal active-set refinement from a feasible simplex point. Returns
/// nothing if a subproblem turns out inconsistent.
std::optional<Eigen::VectorXd> active_set_refine(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                                 Eigen::VectorXd w) {
	const auto n = w.size();
	std::vector<char> free(static_cast<std::size_t>(n));
	for (Eigen::Index s = 0; s < n; ++s) {
		free[static_cast<std::size_t>(s)] = w(s) > kSupportThreshold;
		if (!free[static_cast<std::size_t>(s)]) {
			w(s) = 0.0;
		}
	}
	w /= w.sum();

	const double tol = 1e-12 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
	for (Eigen::Index iter = 0; iter < 50 * n + 50; ++iter) {
		std::vector<Eigen::Index> idx;
		for (Eigen::Index s = 0; s < n; ++s) {
			if (free[static_cast<std::size_t>(s)]) {
				idx.push_back(s);
			}
		}
		const auto f = static_cast<Eigen::Index>(idx.size());
		Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
		Eigen::VectorXd rhs(f + 1);
		for (Eigen::Index r = 0; r < f; ++r) {
			for (Eigen::Index c = 0; c < f; ++c) {
				kkt(r, c) = 2.0 * a(idx[r], idx[c]);
			}
			kkt(r, f) = -1.0;
			kkt(f, r) = 1.0;
			rhs(r) = 2.0 * b(idx[r]);
		}
		rhs(f) = 1.0;
		const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
		const Eigen::VectorXd sol = cod.solve(rhs);
		if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm() + kkt.norm())) {
			return std::nullopt;
		}

		Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
		for (Eigen::Index r = 0; r < f; ++r) {
			target(idx[r]) = sol(r);
		}
		// Step toward the subproblem minimizer until a weight hits zero.
		double alpha = 1.0;
		Eigen::Index blocking = -1;
		for (Eigen::Index s : idx) {
			const double d = target(s) - w(s);
			if (d < 0.0 && target(s) < 0.0) {
				const double ratio = w(s) / -d;
				if (ratio < alpha) {
					alpha = ratio;
					blocking = s;
				}
			}
		}
		w += alpha * (target - w);
		if (blocking >= 0) {
			w(blocking) = 0.0;
			free[static_cast<std::size_t>(blocking)] = 0;
			w = w.cwiseMax(0.0);
			w /= w.sum();
			continue;
		}

		// Bound multipliers g_s - mu for weights held at zero.
		const double mu = sol(f);
		const Eigen::VectorXd g = gradient(a, b, w);
		Eigen::Index entering = -1;
		double most_negative = -tol;
		for (Eigen::Index s = 0; s < n; ++s) {
			if (!free[static_cast<std::size_t>(s)] && g(s) - mu < most_negative) {
				most_negative = g(s) - mu;
				entering = s;
			}
		}
		if (entering < 0) {
			return w.cwiseMax(0.0) / w.cwiseMax(0.0).sum();
		}
		free[static_cast<std::size_t>(entering)] = 1;
	}
	return std::nullopt;
}

} // namespace

CandidateSet::CandidateSet(std::vector<CandidateModel> models, std::vector<std::string> labels)
    : models_(std::move(models)), labels_(std::move(labels)) {
	if (models_.empty()) {
		throw std::invalid_argument("CandidateSet: at least one candidate model required");
	}
	for (std::size_t s = 0; s < models_.size(); ++s) {
		for (std::size_t t = 0; t < s; ++t) {
			if (models_[s] == models_[t]) {
				throw std::invalid_argument("CandidateSet: candidates " + std::to_string(t) + " and " +
				                            std::to_string(s) + " are identical");
			}
		}
	}
	if (labels_.empty()) {
		for (const auto& m : models_) {
			labels_.push_back(default_label(m));
		}
	} else if (labels_.size() != models_.size()) {
		throw std::invalid_argument("CandidateSet: label count does not match model count");
	}
}

std::string CandidateSet::default_label(const CandidateModel& model) {
	std::string out;
	for (std::size_t j = 0; j < model.size(); ++j) {
		out += (j ? "+X" : "X") + std::to_string(model.indices()[j] + 1);
	}
	return out;
}

std::vector<std::vector<QuantileGrid>> cv_predictions(const Dataset& data, const CandidateSet& candidates,
                                                      const Folds& folds) {
	std::vector<std::vector<QuantileGrid>> out;
	out.reserve(candidates.size());
	for (std::size_t s = 0; s < candidates.size(); ++s) {
		try {
			out.push_back(leave_group_out_fits(data, candidates.model(s), folds));
		} catch (const FitError& e) {
			throw FitError("candidate '" + candidates.label(s) + "': " + e.what());
		}
	}
	return out;
}

CvQuadratic build_cv_quadratic(const Dataset& data, const std::vector<std::vector<QuantileGrid>>& predictions) {
	const auto s_count = static_cast<Eigen::Index>(predictions.size());
	const auto n = static_cast<Eigen::Index>(data.n());
	const auto m = data.response_matrix().cols();
	std::vector<Eigen::MatrixXd> stacked;
	stacked.reserve(predictions.size());
	for (const auto& per_row : predictions) {
		if (static_cast<Eigen::Index>(per_row.size()) != n) {
			throw std::invalid_argument("build_cv_quadratic: prediction count does not match n");
		}
		Eigen::MatrixXd p(n, m);
		for (Eigen::Index i = 0; i < n; ++i) {
			const auto v = per_row[static_cast<std::size_t>(i)].values();
			if (static_cast<Eigen::Index>(v.size()) != m) {
				throw std::invalid_argument("build_cv_quadratic: prediction grid does not match responses");
			}
			p.row(i) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), m);
		}
		stacked.push_back(std::move(p));
	}

	const double w = 1.0 / static_cast<double>(m);
	const Eigen::MatrixXd& y = data.response_matrix();
	CvQuadratic q;
	q.a.resize(s_count, s_count);
	q.b.resize(s_count);
	for (Eigen::Index s = 0; s < s_count; ++s) {
		for (Eigen::Index t = 0; t <= s; ++t) {
			const double v = stacked[s].cwiseProduct(stacked[t]).sum() * w;
			q.a(s, t) = v;
			q.a(t, s) = v;
		}
		q.b(s) = y.cwiseProduct(stacked[s]).sum() * w;
	}
	q.c = y.squaredNorm() * w;
	return q;
}

CvQuadratic build_cv_quadratic(const Dataset& data, const CandidateSet& candidates, const Folds& folds) {
	return build_cv_quadratic(data, cv_predictions(data, candidates, folds));
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
	const auto n = v.size();
	std::vector<double> u(v.data(), v.data() + n);
	std::sort(u.begin(), u.end(), std::greater<>());
	double cumsum = 0.0;
	double theta = 0.0;
	for (Eigen::Index k = 0; k < n; ++k) {
		cumsum += u[static_cast<std::size_t>(k)];
		const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
		if (u[static_cast<std::size_t>(k)] - candidate > 0.0) {
			theta = candidate;
		}
	}
	return (v.array() - theta).cwiseMax(0.0).matrix();
}

double simplex_kkt_residual(const CvQuadratic& q, const Eigen::VectorXd& w) {
	check_quadratic(q);
	const Eigen::MatrixXd a = 0.5 * (q.a + q.a.transpose());
	return kkt_residual_of(a, q.b, w);
}

WeightVector solve_simplex_qp(const CvQuadratic& q, const SimplexQpOptions& options) {
	check_quadratic(q);
	const auto s_count = q.b.size();
	const Eigen::MatrixXd a = 0.5 * (q.a + q.a.transpose());
	const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
	const double lambda_max = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
	if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(lambda_max, 1.0)) {
		throw std::invalid_argument("solve_simplex_qp: A is not positive semi-definite");
	}
	const CvQuadratic sym{a, q.b, q.c};

	WeightVector result;
	if (options.start) {
		if (options.start->size() != s_count) {
			throw std::invalid_argument("solve_simplex_qp: start has wrong length");
		}
		result.weights = project_to_simplex(*options.start);
	} else {
		result.weights = Eigen::VectorXd::Constant(s_count, 1.0 / static_cast<double>(s_count));
	}

	if (lambda_max > 0.0) {
		// The gradient 2(Aw - b) is Lipschitz with constant 2 lambda_max.
		const double lipschitz = 2.0 * lambda_max;
		const double tol = options.tolerance * lipschitz;
		Eigen::VectorXd& w = result.weights;
		double f = sym.evaluate(w);
		std::size_t stalled = 0;
		while (result.iterations < options.max_iterations) {
			++result.iterations;
			Eigen::VectorXd next = project_to_simplex(w - gradient(a, q.b, w) / lipschitz);
			const double f_next = sym.evaluate(next);
			stalled = (f - f_next < tol) ? stalled + 1 : 0;
			w = std::move(next);
			f = f_next;
			if (stalled >= options.patience) {
				break;
			}
		}
	} else {
		// A == 0: linear objective, minimized at the vertex with the largest b.
		Eigen::Index best = 0;
		q.b.maxCoeff(&best);
		result.weights = Eigen::VectorXd::Unit(s_count, best);
	}

	if (auto refined = active_set_refine(a, q.b, result.weights)) {
		const double f_pg = sym.evaluate(result.weights);
		const double f_ref = sym.evaluate(*refined);
		if (f_ref <= f_pg + 1e-14 * std::max(1.0, std::abs(f_pg))) {
			result.weights = *refined;
		}
	}

	Eigen::VectorXd& w = result.weights;
	w = w.cwiseMax(0.0);
	w /= w.sum();
	result.objective = sym.evaluate(w);
	result.kkt_residual = kkt_residual_of(a, q.b, w);
	result.converged = result.kkt_residual <= options.kkt_tolerance * std::max(1.0, lambda_max);
	return result;
}

std::vector<CandidateFit> fit_candidates(const Dataset& data, const CandidateSet& candidates) {
	std::vector<CandidateFit> fits;
	fits.reserve(candidates.size());
	for (std::size_t s = 0; s < candidates.size(); ++s) {
		try {
			fits.push_back(CandidateFit::build(data, candidates.model(s)));
		} catch (const FitError& e) {
			throw FitError("candidate '" + candidates.label(s) + "': " + e.what());
		}
	}
	return fits;
}

QuantileGrid averaged_predict(std::span<const CandidateFit> fits, const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& x) {
	if (fits.empty() || static_cast<std::size_t>(weights.size()) != fits.size()) {
		throw std::invalid_argument("averaged_predict: weight count does not match candidate count");
	}
	if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-9) {
		throw std::invalid_argument("averaged_predict: weights are not on the simplex");
	}
	std::vector<QuantileGrid> parts;
	parts.reserve(fits.size());
	for (const auto& fit : fits) {
		parts.push_back(fit.predict_full(x));
	}
	const auto raw = combine(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())),
	                         std::span<const QuantileGrid>(parts));
	// Non-negative combinations of non-decreasing grids stay non-decreasing.
	return QuantileGrid::from_raw(raw);
}

QuantileGrid averaged_predict(const Dataset& data, const CandidateSet& candidates, const WeightVector& weights,
                              const Eigen::VectorXd& x) {
	if (static_cast<std::size_t>(x.size()) != data.p()) {
		throw std::invalid_argument("averaged_predict: query has " + std::to_string(x.size()) +
		                            " coordinates, data has p=" + std::to_string(data.p()));
	}
	const auto fits = fit_candidates(data, candidates);
	return averaged_predict(fits, weights.weights, x);
}

std::vector<InformationCriterion> information_criteria(const Dataset& data, std::span<const CandidateFit> fits) {
	const auto n = static_cast<double>(data.n());
	std::vector<InformationCriterion> out;
	out.reserve(fits.size());
	for (const auto& fit : fits) {
		double sum = 0.0;
		for (std::size_t i = 0; i < data.n(); ++i) {
			const auto pred = fit.predict_full(data.predictors().row(static_cast<Eigen::Index>(i)).transpose());
			sum += wasserstein_sq(data.response(i), pred);
		}
		InformationCriterion ic;
		ic.sigma2_hat = sum / n;
		ic.clamped = ic.sigma2_hat < kSigma2Floor;
		const double log_sigma2 = std::log(std::max(ic.sigma2_hat, kSigma2Floor));
		const auto ps = static_cast<double>(fit.model().size());
		ic.aic = log_sigma2 + 2.0 * ps / n;
		ic.bic = log_sigma2 + ps * std::log(n) / n;
		out.push_back(ic);
	}
	return out;
}

std::vector<InformationCriterion> information_criteria(const Dataset& data, const CandidateSet& candidates) {
	const auto fits = fit_candidates(data, candidates);
	return information_criteria(data, fits);
}

WeightVector ic_weights(std::span<const InformationCriterion> criteria, SmoothedWeights kind) {
	if (criteria.empty()) {
		throw std::invalid_argument("ic_weights: no criteria");
	}
	const auto s_count = static_cast<Eigen::Index>(criteria.size());
	WeightVector out;
	out.objective = std::numeric_limits<double>::quiet_NaN();
	if (kind == SmoothedWeights::EW) {
		out.weights = Eigen::VectorXd::Constant(s_count, 1.0 / static_cast<double>(s_count));
		return out;
	}
	Eigen::VectorXd score(s_count);
	for (Eigen::Index s = 0; s < s_count; ++s) {
		const auto& ic = criteria[static_cast<std::size_t>(s)];
		score(s) = kind == SmoothedWeights::sAIC ? ic.aic : ic.bic;
		if (!std::isfinite(score(s))) {
			throw std::invalid_argument("ic_weights: non-finite criterion for candidate " + std::to_string(s));
		}
	}
	const double best = score.minCoeff();
	out.weights = (-(score.array() - best) / 2.0).exp().matrix();
	out.weights /= out.weights.sum();
	return out;
}

std::size_t ic_select(std::span<const InformationCriterion> criteria, Selection kind) {
	if (criteria.empty()) {
		throw std::invalid_argument("ic_select: no criteria");
	}
	std::size_t best = 0;
	for (std::size_t s = 1; s < criteria.size(); ++s) {
		const double v = kind == Selection::AIC ? criteria[s].aic : criteria[s].bic;
		const double b = kind == Selection::AIC ? criteria[best].aic : criteria[best].bic;
		if (v < b) {
			best = s;
		}
	}
	return best;
}

} // namespace frechet_ma
