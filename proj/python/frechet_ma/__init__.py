"""Model averaging for global Frechet regression with distributional responses."""

from ._frechet_ma import (
    CandidateFit,
    CvQuadratic,
    FitError,
    WeightVector,
    averaged_predict,
    build_cv_quadratic,
    empirical_quantile,
    fit_at,
    gaussian_quantile,
    information_criteria,
    isotonic_project,
    leave_group_out_fits,
    make_folds,
    normal_quantile,
    run_experiment,
    solve_simplex_qp,
    wasserstein_sq,
)

__all__ = [
    "CandidateFit",
    "CvQuadratic",
    "FitError",
    "WeightVector",
    "averaged_predict",
    "build_cv_quadratic",
    "empirical_quantile",
    "fit_at",
    "gaussian_quantile",
    "information_criteria",
    "isotonic_project",
    "leave_group_out_fits",
    "make_folds",
    "normal_quantile",
    "run_experiment",
    "solve_simplex_qp",
    "wasserstein_sq",
]
