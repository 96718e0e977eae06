"""Optimal liquidation with a Markovian price signal.

Submodules
----------
signals      OU signal, its moments and exact simulation
kernels      transient impact kernels and positive-definiteness checks
gss          closed-form strategy under exponential transient impact
oracle       discretised QP cross-check of the closed form
cj           instantaneous-impact value function and feedback rate
montecarlo   scenario runs, path bundles and value surfaces
estimation   imbalance statistics and synthetic trade streams
cli          command-line entry point
"""

from .cj import CjProblem
from .gss import GssProblem, solve_closed_form
from .kernels import ExpKernel, InstantKernel, PowerLawKernel
from .signals import OuSignal

__version__ = "0.1.0"

__all__ = [
    "CjProblem",
    "GssProblem",
    "solve_closed_form",
    "ExpKernel",
    "InstantKernel",
    "PowerLawKernel",
    "OuSignal",
    "__version__",
]
