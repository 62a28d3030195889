"""Pared-genotype risk engine: peeling, the enumeration oracle, age
imputation, and future-risk curves."""

from famrisk.engine.enumeration import enumerate_posterior
from famrisk.engine.imputation import impute_ages
from famrisk.engine.likelihood import phenotype_likelihood
from famrisk.engine.peeling import peel_pedigree
from famrisk.engine.risk import cbc_risk_curves, future_risk_curves
from famrisk.engine.runner import RunResult, run_model
from famrisk.engine.settings import ResolvedSettings, RunSettings
from famrisk.engine.states import StateSpace, build_state_space, founder_prior

__all__ = [
    "ResolvedSettings",
    "RunResult",
    "RunSettings",
    "StateSpace",
    "build_state_space",
    "cbc_risk_curves",
    "enumerate_posterior",
    "founder_prior",
    "future_risk_curves",
    "impute_ages",
    "peel_pedigree",
    "phenotype_likelihood",
    "run_model",
]
