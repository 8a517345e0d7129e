"""Copula models with Realized-GARCH margins and score-driven dependence."""

from rgcopula._core import BACKEND
from rgcopula.distributions import EmpiricalDist, SkewTParams, skewt_cdf, skewt_pdf, skewt_quantile
from rgcopula.estimation import JointModel, ModelSpec, block_bootstrap_se, msml_fit, simulate_panel
from rgcopula.margins import RealGarchParams, rg_filter, rg_fit, rg_simulate
from rgcopula.market_data import ReturnPanel
from rgcopula.copulas import CopulaFit, GasParams, constant_fit, gas_filter, gas_fit

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EmpiricalDist",
    "SkewTParams",
    "skewt_cdf",
    "skewt_pdf",
    "skewt_quantile",
    "JointModel",
    "ModelSpec",
    "block_bootstrap_se",
    "msml_fit",
    "simulate_panel",
    "RealGarchParams",
    "rg_filter",
    "rg_fit",
    "rg_simulate",
    "ReturnPanel",
    "CopulaFit",
    "GasParams",
    "constant_fit",
    "gas_filter",
    "gas_fit",
]
