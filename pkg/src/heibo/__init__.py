"""Bayesian optimization with hierarchical expected improvement over universal kriging."""
from .acquisition import AcqSpec, AcqState, ei_value, hei_value, sei_value, ucb_score
from .bench import FUNCTIONS, TestFunction, get_function, run_suite, stability_trace
from .design import Domain, maximin_lhd
from .driver import METHOD_NAMES, RunConfig, RunTrace, make_config, maximize_acquisition, run_bo
from .gp import Dataset, GPFit, HierPrior, fit, hierarchical_posterior, profile_loglik
from .hyper import HyperConfig, estimate_prior, log_marginal, mmap_estimate
from .kernel import KernelSpec
from .trend import TrendModel, select_order_bic

__version__ = "0.1.0"
