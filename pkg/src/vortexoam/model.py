"""Physical state definitions: Bessel probe beams, 2-d atomic bound states,
dipole transitions, and the displaced-atom geometry.

Atomic radial family
--------------------
The bound states are a hydrogen-like 2-d family built from associated
Laguerre polynomials,

    u_{n,|m|}(q) = N x^{|m|} L_n^{(2|m|+1)}(x) e^{-x/2},   x = 2 q / a,
    N = (2/a) sqrt(n! / (n + 2|m| + 1)!),

normalised so that  int_0^inf u^2 q dq = 1  (the azimuthal factor
e^{i m phi}/sqrt(2 pi) carries the angular normalisation).  States of equal
|m| and different n are orthogonal under the same weight, which keeps
same-|m| transition densities free of a monopole moment.  All lengths are in
units of the scale a; amplitudes carry natural units (the Coulomb prefactor
is set to 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import adaptive_integrate


@dataclass(frozen=True)
class BesselBeam:
    """Free-electron vortex state J_l(k_rho r) e^{i l Phi}."""

    l: int
    k_rho: float

    def __post_init__(self):
        if not self.k_rho > 0:
            raise ValueError(f"BesselBeam: k_rho must be > 0, got {self.k_rho!r}")


@dataclass(frozen=True)
class Displacement:
    """Atom position R0 >= 0 on the +x axis of the beam frame."""

    R0: float

    def __post_init__(self):
        if not self.R0 >= 0:
            raise ValueError(f"Displacement: R0 must be >= 0, got {self.R0!r}")


@dataclass(frozen=True)
class AtomicState:
    """2-d bound state with azimuthal quantum number m and radial index n.

    `sign` flips the radial profile globally (amplitude-linearity hook for
    tests; normalisation is unaffected).
    """

    m: int
    n: int = 0
    a: float = 1.0
    sign: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"AtomicState: n must be >= 0, got {self.n}")
        if not self.a > 0:
            raise ValueError(f"AtomicState: a must be > 0, got {self.a!r}")
        if self.sign not in (-1, 1):
            raise ValueError("AtomicState: sign must be +1 or -1")

    @property
    def norm_constant(self) -> float:
        ell = abs(self.m)
        return (2.0 / self.a) * math.sqrt(
            math.factorial(self.n) / math.factorial(self.n + 2 * ell + 1)
        )


def _laguerre(n: int, alpha: int, x: np.ndarray) -> np.ndarray:
    # associated Laguerre L_n^(alpha) by the standard three-term recurrence
    l_prev = np.ones_like(x)
    if n == 0:
        return l_prev
    l_cur = 1.0 + alpha - x
    for k in range(1, n):
        l_prev, l_cur = l_cur, ((2 * k + 1 + alpha - x) * l_cur - (k + alpha) * l_prev) / (k + 1)
    return l_cur


def radial_u(state: AtomicState, q) -> np.ndarray | float:
    """Radial profile u_{n,|m|}(q); accepts scalars or arrays, q >= 0."""
    qa = np.asarray(q, dtype=float)
    if np.any(qa < 0):
        raise ValueError("radial_u: q must be >= 0")
    ell = abs(state.m)
    x = 2.0 * qa / state.a
    val = (state.sign * state.norm_constant
           * x**ell * _laguerre(state.n, 2 * ell + 1, x) * np.exp(-0.5 * x))
    return float(val) if np.isscalar(q) else val


@dataclass(frozen=True)
class DipoleTransition:
    """Pair of bound states; alpha = m_initial - m_final is the chirality.

    |alpha| = 1 is the dipole case.  Other values are accepted for property
    tests and flagged via `is_dipole`.  Initial and final internal states
    must be orthogonal: automatic for m != m' through the azimuthal factors,
    checked numerically for m == m' (equal-|m| family members are orthogonal
    by construction).
    """

    initial: AtomicState
    final: AtomicState

    def __post_init__(self):
        if self.initial.a != self.final.a:
            raise ValueError("DipoleTransition: states must share the radial scale a")
        if self.initial.m == self.final.m:
            ov = overlap(self.initial, self.final)
            if abs(ov) > 1e-10:
                raise ValueError(
                    f"DipoleTransition: m = m' requires orthogonal radial states, "
                    f"overlap = {ov:.3e}"
                )

    @property
    def alpha(self) -> int:
        return self.initial.m - self.final.m

    @property
    def is_dipole(self) -> bool:
        return abs(self.alpha) == 1

    @property
    def a(self) -> float:
        return self.initial.a

    def q_support(self, tiny: float = 1e-16) -> float:
        """Radius beyond which the pair density (times q^3) is below `tiny`."""
        qmax = 10.0 * self.a
        while True:
            d = abs(radial_pair_density(self, qmax)) * qmax**3
            if d < tiny or qmax > 1e4 * self.a:
                return qmax
            qmax *= 1.5


def overlap(s1: AtomicState, s2: AtomicState) -> float:
    """int u1 u2 q dq over the common support."""
    qmax = 40.0 * max(s1.a, s2.a) * (1 + s1.n + s2.n)
    res = adaptive_integrate(
        lambda q: radial_u(s1, q) * radial_u(s2, q) * q, 0.0, qmax, 1e-12, abs_tol=1e-13
    )
    return res.value


def radial_pair_density(t: DipoleTransition, q) -> np.ndarray | float:
    """u(q) u'(q); both profiles are real by construction."""
    return radial_u(t.initial, q) * radial_u(t.final, q)


def pair_moment(t: DipoleTransition, mu: int) -> float:
    """int q^(mu+1) u u' dq; the multipole moments driving far-field decay."""
    qmax = t.q_support()
    res = adaptive_integrate(
        lambda q: q ** (mu + 1) * radial_pair_density(t, q), 0.0, qmax, 1e-12, abs_tol=1e-15
    )
    return res.value


def default_transition(alpha: int = 1, a: float = 1.0,
                       n_initial: int = 0, m_initial: int = 0,
                       n_final: int = 0) -> DipoleTransition:
    """s-like (n=0, m=0) to p-like (m' = m - alpha) transition by default."""
    return DipoleTransition(
        initial=AtomicState(m=m_initial, n=n_initial, a=a),
        final=AtomicState(m=m_initial - alpha, n=n_final, a=a),
    )
