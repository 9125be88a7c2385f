#pragma once

// Model averaging over candidate global Frechet regressions: K-fold
// cross-validation weights and information-criterion baselines.

#include "frechet_ma/frechet.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frechet_ma {

class CandidateSet {
public:
	/// Labels default to the 1-based column lists, e.g. "X1+X4+X8".
	explicit CandidateSet(std::vector<CandidateModel> models, std::vector<std::string> labels = {});

	std::size_t size() const noexcept { return models_.size(); }
	const std::vector<CandidateModel>& models() const noexcept { return models_; }
	const CandidateModel& model(std::size_t s) const { return models_.at(s); }
	const std::vector<std::string>& labels() const noexcept { return labels_; }
	const std::string& label(std::size_t s) const { return labels_.at(s); }

	static std::string default_label(const CandidateModel& model);

private:
	std::vector<CandidateModel> models_;
	std::vector<std::string> labels_;
};

/// CV_K(w) = w^T A w - 2 b^T w + c.
struct CvQuadratic {
	Eigen::MatrixXd a;
	Eigen::VectorXd b;
	double c = 0.0;

	double evaluate(const Eigen::VectorXd& w) const { return w.dot(a * w) - 2.0 * b.dot(w) + c; }
	std::size_t size() const noexcept { return static_cast<std::size_t>(b.size()); }
};

struct WeightVector {
	Eigen::VectorXd weights;
	double objective = 0.0;      ///< criterion value at `weights`; NaN when not applicable
	std::size_t iterations = 0;
	double kkt_residual = 0.0;
	bool converged = true;
};

/// Leave-group-out predictions, indexed [candidate][row].
std::vector<std::vector<QuantileGrid>> cv_predictions(const Dataset& data, const CandidateSet& candidates,
                                                      const Folds& folds);

/// Gram-form expansion of the K-fold cross-validation criterion.
CvQuadratic build_cv_quadratic(const Dataset& data, const CandidateSet& candidates, const Folds& folds);
CvQuadratic build_cv_quadratic(const Dataset& data, const std::vector<std::vector<QuantileGrid>>& predictions);

/// Euclidean projection onto {w >= 0, sum w = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct SimplexQpOptions {
	std::size_t max_iterations = 100000;
	/// Stop once the objective, normalized by the step-size constant, has
	/// decreased by less than this for `patience` consecutive iterations.
	double tolerance = 1e-12;
	std::size_t patience = 10;
	/// KKT residual (relative to max(1, ||A||_2)) required to report convergence.
	double kkt_tolerance = 1e-7;
	/// Starting point; uniform weights when unset.
	std::optional<Eigen::VectorXd> start;
};

/// Minimizes the quadratic over the probability simplex by projected
/// gradient with fixed step, then solves the KKT system on the support of
/// the iterate and keeps that point if it is feasible and no worse.
WeightVector solve_simplex_qp(const CvQuadratic& q, const SimplexQpOptions& options = {});

/// Largest absolute deviation from the simplex KKT conditions at w.
double simplex_kkt_residual(const CvQuadratic& q, const Eigen::VectorXd& w);

/// Full-sample fits for every candidate.
std::vector<CandidateFit> fit_candidates(const Dataset& data, const CandidateSet& candidates);

/// sum_s w_s m_s(x) over full-sample candidate fits; x is a full predictor row.
QuantileGrid averaged_predict(std::span<const CandidateFit> fits, const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& x);
QuantileGrid averaged_predict(const Dataset& data, const CandidateSet& candidates, const WeightVector& weights,
                              const Eigen::VectorXd& x);

struct InformationCriterion {
	double sigma2_hat = 0.0; ///< in-sample mean squared Wasserstein residual
	double aic = 0.0;
	double bic = 0.0;
	bool clamped = false;    ///< sigma2_hat was below the 1e-12 floor used inside log
};

inline constexpr double kSigma2Floor = 1e-12;

std::vector<InformationCriterion> information_criteria(const Dataset& data, const CandidateSet& candidates);
std::vector<InformationCriterion> information_criteria(const Dataset& data, std::span<const CandidateFit> fits);

enum class SmoothedWeights { sAIC, sBIC, EW };
enum class Selection { AIC, BIC };

/// Exponentially smoothed criterion weights, or equal weights for EW.
WeightVector ic_weights(std::span<const InformationCriterion> criteria, SmoothedWeights kind);

/// Index of the smallest criterion; ties go to the lowest index.
std::size_t ic_select(std::span<const InformationCriterion> criteria, Selection kind);

} // namespace frechet_ma
