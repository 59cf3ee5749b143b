"""Bayesian optimisation of counterfactual potentials over black-box models."""

from ._accel import HAS_NUMBA, backend
from .acquisition import (
    AcquisitionInputs,
    ei_cfx,
    ei_cfx_batch,
    ei_cfx_grad,
    ei_cfx_quadrature,
    ei_cfx_value_and_grad,
    ei_naive,
)
from .models import LinearModel, LogisticModel, StepEnsembleModel, load_dataset, load_model, load_schema
from .potential import INV_E, Branch, PotentialKind, PotentialSpec, ep_value, lambert_w, superlevel_roots
from .quadrature import QuadratureRule, RecurrenceCoeffs, gauss_hermite, gauss_legendre, golub_welsch
from .search import (
    InfeasibleError,
    LocalOptParams,
    SearchProblem,
    Trace,
    optimize_acquisition,
    projected_gradient_search,
    run_bayes_cfx,
    run_bayes_naive,
    run_multi_cfx,
    run_random,
)
from .surrogate import GpPosterior, KernelParams, SampleSet, fit, predict

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "backend",
    "AcquisitionInputs",
    "ei_cfx",
    "ei_cfx_batch",
    "ei_cfx_grad",
    "ei_cfx_quadrature",
    "ei_cfx_value_and_grad",
    "ei_naive",
    "LinearModel",
    "LogisticModel",
    "StepEnsembleModel",
    "load_dataset",
    "load_model",
    "load_schema",
    "INV_E",
    "Branch",
    "PotentialKind",
    "PotentialSpec",
    "ep_value",
    "lambert_w",
    "superlevel_roots",
    "QuadratureRule",
    "RecurrenceCoeffs",
    "gauss_hermite",
    "gauss_legendre",
    "golub_welsch",
    "InfeasibleError",
    "LocalOptParams",
    "SearchProblem",
    "Trace",
    "optimize_acquisition",
    "projected_gradient_search",
    "run_bayes_cfx",
    "run_bayes_naive",
    "run_multi_cfx",
    "run_random",
    "GpPosterior",
    "KernelParams",
    "SampleSet",
    "fit",
    "predict",
]
