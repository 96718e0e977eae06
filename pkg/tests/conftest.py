import math

import pytest
from hypothesis import HealthCheck, settings

from optexec.cj import CjProblem
from optexec.gss import GssProblem
from optexec.kernels import ExpKernel
from optexec.signals import OuSignal

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def transient_problem(iota=-0.5, rho=1.0, **kw) -> GssProblem:
    """gamma=0.9, kappa=0.1, T=10, x0=10."""
    return GssProblem(10.0, 10.0, OuSignal(0.9, 0.0, iota), ExpKernel(0.1, rho), **kw)


def instant_problem(**kw) -> CjProblem:
    """gamma=0.1, sigma=0.1, I0=0, T=10, kappa=0.5, phi=0.1, varrho=10, x0=10."""
    d = dict(kappa=0.5, phi=0.1, varrho=10.0, T=10.0, signal=OuSignal(0.1, 0.1, 0.0), x0=10.0)
    d.update(kw)
    return CjProblem(**d)


@pytest.fixture
def transient():
    return transient_problem


@pytest.fixture
def instant():
    return instant_problem


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


__all__ = ["transient_problem", "instant_problem", "rel", "math"]
