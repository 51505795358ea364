"""Achievable rates and block-Markov coding for classical-quantum relay channels."""

__version__ = "0.1.0"

from . import channels, coding_sim, optimizer, qops, relay_model, typicality  # noqa: F401
from .optimizer import OptimizerConfig, RateReport, optimize_rate  # noqa: F401
from .relay_model import InputDistribution, RelayChannel, build_code_state, pdf_rate  # noqa: F401
