#include "frechet_ma/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace frechet_ma;

namespace {

Eigen::VectorXd to_vector(const QuantileGrid& q) {
	return Eigen::Map<const Eigen::VectorXd>(q.values().data(), static_cast<Eigen::Index>(q.size()));
}

Eigen::MatrixXd to_matrix(const std::vector<QuantileGrid>& grids) {
	Eigen::MatrixXd out(static_cast<Eigen::Index>(grids.size()), static_cast<Eigen::Index>(grids.front().size()));
	for (std::size_t i = 0; i < grids.size(); ++i) {
		out.row(static_cast<Eigen::Index>(i)) = to_vector(grids[i]).transpose();
	}
	return out;
}

QuantileGrid to_grid(const Eigen::VectorXd& v) {
	return QuantileGrid(make_grid(static_cast<std::size_t>(v.size())), {v.data(), v.data() + v.size()});
}

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
	const auto grid = make_grid(static_cast<std::size_t>(y.cols()));
	std::vector<QuantileGrid> responses;
	responses.reserve(static_cast<std::size_t>(y.rows()));
	for (Eigen::Index i = 0; i < y.rows(); ++i) {
		const Eigen::VectorXd row = y.row(i).transpose();
		responses.emplace_back(grid, std::vector<double>(row.data(), row.data() + row.size()));
	}
	return Dataset(x, std::move(responses));
}

CandidateSet make_candidates(const std::vector<std::vector<std::size_t>>& subsets) {
	std::vector<CandidateModel> models;
	for (const auto& s : subsets) {
		models.emplace_back(s);
	}
	return CandidateSet(std::move(models));
}

py::dict criterion_dict(const InformationCriterion& ic) {
	py::dict d;
	d["sigma2_hat"] = ic.sigma2_hat;
	d["aic"] = ic.aic;
	d["bic"] = ic.bic;
	d["clamped"] = ic.clamped;
	return d;
}

} // namespace

PYBIND11_MODULE(_frechet_ma, m) {
	m.doc() = "Global Frechet regression model averaging on quantile grids";

	py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

	m.def("normal_quantile", &normal_quantile, py::arg("p"));
	m.def(
	    "gaussian_quantile",
	    [](double mu, double sigma, std::size_t grid_m) { return to_vector(gaussian_quantile(mu, sigma, make_grid(grid_m))); },
	    py::arg("mu"), py::arg("sigma"), py::arg("grid_m") = 100);
	m.def(
	    "empirical_quantile",
	    [](const std::vector<double>& samples, std::size_t grid_m) {
		    return to_vector(empirical_quantile(samples, make_grid(grid_m)));
	    },
	    py::arg("samples"), py::arg("grid_m") = 100);
	m.def(
	    "wasserstein_sq", [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return wasserstein_sq(to_grid(a), to_grid(b)); },
	    py::arg("a"), py::arg("b"));
	m.def(
	    "isotonic_project",
	    [](const Eigen::VectorXd& v) {
		    const auto grid = make_grid(static_cast<std::size_t>(v.size()));
		    return to_vector(isotonic_project(RawQuantileGrid(grid, {v.data(), v.data() + v.size()})));
	    },
	    py::arg("values"));

	m.def(
	    "make_folds",
	    [](std::size_t n, std::size_t k, std::optional<std::uint64_t> seed) { return make_folds(n, k, seed); },
	    py::arg("n"), py::arg("k"), py::arg("seed") = py::none());
	m.def(
	    "fit_at",
	    [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::vector<std::size_t> indices,
	       const Eigen::VectorXd& query, const std::vector<std::size_t>& excluded) {
		    return to_vector(fit_at(make_dataset(x, y), CandidateModel(std::move(indices)), query, excluded));
	    },
	    py::arg("x"), py::arg("y"), py::arg("indices"), py::arg("query"), py::arg("excluded") = std::vector<std::size_t>{},
	    "Fit at `query` (candidate coordinates) using rows not in `excluded`.");
	m.def(
	    "leave_group_out_fits",
	    [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::vector<std::size_t> indices, const Folds& folds) {
		    return to_matrix(leave_group_out_fits(make_dataset(x, y), CandidateModel(std::move(indices)), folds));
	    },
	    py::arg("x"), py::arg("y"), py::arg("indices"), py::arg("folds"));

	py::class_<CandidateFit>(m, "CandidateFit")
	    .def(py::init([](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::vector<std::size_t> indices) {
		         return CandidateFit::build(make_dataset(x, y), CandidateModel(std::move(indices)));
	         }),
	         py::arg("x"), py::arg("y"), py::arg("indices"))
	    .def("predict", [](const CandidateFit& f, const Eigen::VectorXd& x) { return to_vector(f.predict(x)); })
	    .def("predict_full", [](const CandidateFit& f, const Eigen::VectorXd& x) { return to_vector(f.predict_full(x)); })
	    .def_property_readonly("indices", [](const CandidateFit& f) { return f.model().indices(); })
	    .def_property_readonly("mean_x", [](const CandidateFit& f) { return f.stats().mean; })
	    .def_property_readonly("covariance", [](const CandidateFit& f) { return f.stats().covariance(); })
	    .def_property_readonly("jitter_applied", [](const CandidateFit& f) { return f.stats().jitter_applied; });

	py::class_<CvQuadratic>(m, "CvQuadratic")
	    .def(py::init([](Eigen::MatrixXd a, Eigen::VectorXd b, double c) { return CvQuadratic{std::move(a), std::move(b), c}; }),
	         py::arg("a"), py::arg("b"), py::arg("c"))
	    .def_readonly("a", &CvQuadratic::a)
	    .def_readonly("b", &CvQuadratic::b)
	    .def_readonly("c", &CvQuadratic::c)
	    .def("evaluate", &CvQuadratic::evaluate, py::arg("w"));

	py::class_<WeightVector>(m, "WeightVector")
	    .def_readonly("weights", &WeightVector::weights)
	    .def_readonly("objective", &WeightVector::objective)
	    .def_readonly("iterations", &WeightVector::iterations)
	    .def_readonly("kkt_residual", &WeightVector::kkt_residual)
	    .def_readonly("converged", &WeightVector::converged);

	m.def(
	    "build_cv_quadratic",
	    [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const std::vector<std::vector<std::size_t>>& candidates,
	       const Folds& folds) { return build_cv_quadratic(make_dataset(x, y), make_candidates(candidates), folds); },
	    py::arg("x"), py::arg("y"), py::arg("candidates"), py::arg("folds"));
	m.def(
	    "solve_simplex_qp", [](const CvQuadratic& q) { return solve_simplex_qp(q); }, py::arg("q"));
	m.def(
	    "information_criteria",
	    [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const std::vector<std::vector<std::size_t>>& candidates) {
		    py::list out;
		    for (const auto& ic : information_criteria(make_dataset(x, y), make_candidates(candidates))) {
			    out.append(criterion_dict(ic));
		    }
		    return out;
	    },
	    py::arg("x"), py::arg("y"), py::arg("candidates"));
	m.def(
	    "averaged_predict",
	    [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const std::vector<std::vector<std::size_t>>& candidates,
	       const Eigen::VectorXd& weights, const Eigen::VectorXd& query) {
		    const auto data = make_dataset(x, y);
		    const auto fits = fit_candidates(data, make_candidates(candidates));
		    return to_vector(averaged_predict(fits, weights, query));
	    },
	    py::arg("x"), py::arg("y"), py::arg("candidates"), py::arg("weights"), py::arg("query"));

	m.def(
	    "run_experiment",
	    [](std::vector<std::size_t> n_values, std::size_t replications, std::uint64_t seed, double rho,
	       std::size_t grid_m, std::size_t k_folds, std::size_t threads) {
		    ExperimentConfig cfg;
		    cfg.n_values = std::move(n_values);
		    cfg.replications = replications;
		    cfg.dgp.seed = seed;
		    cfg.dgp.rho = rho;
		    cfg.grid_m = grid_m;
		    cfg.k_folds = k_folds;
		    cfg.threads = threads;
		    ExperimentReport report;
		    {
			    py::gil_scoped_release release;
			    report = run_experiment(cfg);
		    }
		    py::list risks;
		    for (const auto& r : report.risks) {
			    py::dict d;
			    d["n"] = r.n;
			    d["method"] = std::string(to_string(r.method));
			    d["mean_risk"] = r.mean_risk;
			    d["sd_risk"] = r.sd_risk;
			    d["failures"] = r.failures;
			    risks.append(d);
		    }
		    py::list weights;
		    for (const auto& w : report.weights) {
			    py::dict d;
			    d["n"] = w.n;
			    d["mean_correct_weight_sum"] = w.mean_correct_weight_sum;
			    weights.append(d);
		    }
		    py::dict out;
		    out["risks"] = risks;
		    out["weights"] = weights;
		    return out;
	    },
	    py::arg("n_values") = std::vector<std::size_t>{100, 200, 300}, py::arg("replications") = 100,
	    py::arg("seed") = 20240901ULL, py::arg("rho") = 0.5, py::arg("grid_m") = 100, py::arg("k_folds") = 10,
	    py::arg("threads") = 1);
}
