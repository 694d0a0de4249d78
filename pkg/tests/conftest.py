"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately take different routes than the package: ascending
power series for Bessel values, elliptic integrals plus recurrence for the
half-integer-degree Legendre functions behind the kernel coefficients, and
scipy's adaptive quadrature for reference integrals.
"""

import math

import numpy as np
import pytest
from scipy.special import ellipe, ellipk

from vortexoam.model import BesselBeam, default_transition
from vortexoam.spectra import Window

K_IN = 1.0
K_OUT = 1.25
TOL = 1e-6


@pytest.fixture(scope="session")
def beam_in():
    return BesselBeam(l=1, k_rho=K_IN)


@pytest.fixture(scope="session")
def transition_plus():
    return default_transition(+1)


@pytest.fixture(scope="session")
def transition_minus():
    return default_transition(-1)


@pytest.fixture(scope="session")
def window():
    return Window(-6, 8)


def bessel_series(n: int, x: float, terms: int = 120) -> float:
    """Independent ascending-series evaluation of J_n(x), n >= 0."""
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    for k in range(1, terms):
        term *= -(half * half) / (k * (n + k))
        total += term
    return total


def legendre_q_half(n: int, chi: float) -> float:
    """Q_{n-1/2}(chi) for integer n >= 0 via elliptic integrals and upward
    recurrence (independent of the package's kernel quadrature)."""
    m = min(2.0 / (1.0 + chi), 1.0 - 1e-15)
    kv, ev = ellipk(m), ellipe(m)
    q_m = math.sqrt(m) * kv
    q_p = chi * math.sqrt(m) * kv - math.sqrt(2.0 * (1.0 + chi)) * ev
    if n == 0:
        return q_m
    if n == 1:
        return q_p
    for j in range(1, n):
        nu = j - 0.5
        q_m, q_p = q_p, ((2.0 * nu + 1.0) * chi * q_p - nu * q_m) / (nu + 1.0)
    return q_p


def kernel_coeff_closed_form(lam: int, r: float, q: float) -> float:
    """K_lam(r, q) from the Legendre-Q closed form."""
    chi = (r * r + q * q) / (2.0 * r * q)
    return 2.0 / math.sqrt(r * q) * legendre_q_half(abs(lam), chi)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
