"""Numerical substrate: Bessel functions J_n, Gauss rules, adaptive quadrature,
and the coefficients of the displaced-beam (cylindrical shift) expansion.

Bessel evaluation
-----------------
Three regimes, all self-contained (no external special-function library):

* small argument: the ascending power series, used only where its leading
  term dominates (x <= 2 sqrt(n+1)), so there is no cancellation;
* moderate argument: Miller's backward recurrence from a start order above
  the turning point, normalised with the sum rule J_0 + 2 J_2 + 2 J_4 + ... = 1;
* large argument (x >> n^2): the Hankel asymptotic expansion, truncated at
  its smallest term.

The backward recurrence also yields every order 0..n_max in one sweep, which
`bessel_j_orders` exposes for grid-cached evaluation in the quadrature engines.

Quadrature
----------
`gauss_rule` wraps Gauss-Legendre nodes on an arbitrary interval.
`adaptive_integrate` is a globally adaptive bisection scheme with an embedded
(G7, G15) error estimate, vectorised integrand calls, and split-point hints
for known singular abscissas (hints at an endpoint seed geometrically graded
panels so integrable log endpoints converge quickly).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss


class DomainError(ValueError):
    """Argument outside the supported domain (e.g. negative radius)."""


class IntegrationError(RuntimeError):
    """The integrand produced a non-finite value."""


# --------------------------------------------------------------------------
# Bessel J_n
# --------------------------------------------------------------------------

_UNDERFLOW_LOG = -650.0  # natural log; J below e^-650 is reported as exactly 0


def _log_jn_estimate(n: int, x: float) -> float:
    # leading-order log of (x/2)^n / n!  (valid for n >> x, where J_n ~ that)
    if x == 0.0:
        return -math.inf
    return n * math.log(x / 2.0) - math.lgamma(n + 1.0)


def _series_jn(n: int, x: float) -> float:
    # ascending series; callers guarantee x <= 2 sqrt(n+1) so terms decrease
    # essentially from the start and no cancellation occurs
    half = 0.5 * x
    term = math.exp(n * math.log(half) - math.lgamma(n + 1.0)) if n > 0 else 1.0
    total = term
    z = half * half
    for k in range(1, 200):
        term *= -z / (k * (n + k))
        total += term
        if abs(term) <= 1e-18 * abs(total):
            break
    return total


def _asymptotic_jn(n: int, x: float) -> float:
    # Hankel expansion J_n(x) = sqrt(2/(pi x)) [P cos(chi) - Q sin(chi)],
    # chi = x - (n/2 + 1/4) pi; truncated at the smallest term
    mu = 4.0 * n * n
    p, q = 1.0, 0.0
    term = 1.0
    sign = 1.0
    k = 0
    while True:
        # odd step -> Q series, even step -> P series
        t_q = term * (mu - (4 * k + 1) ** 2) / ((2 * k + 1) * 8.0 * x)
        q += sign * t_q
        t_p = t_q * (mu - (4 * k + 3) ** 2) / ((2 * k + 2) * 8.0 * x)
        p += -sign * t_p
        if abs(t_p) < 1e-17 and abs(t_q) < 1e-17:
            break
        term = t_p
        sign = -sign
        k += 1
        if k > 30:
            break
    chi = x - (0.5 * n + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _miller_jn(n: int, x: float) -> float:
    # backward recurrence with sum-rule normalisation
    m = _miller_start_order(n, x)
    jp, j = 0.0, 1e-300
    target = 0.0
    ssum = 0.0
    for k in range(m, 0, -1):
        jm = (2.0 * k / x) * j - jp
        jp, j = j, jm
        if k - 1 == n:
            target = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            ssum += 2.0 * j
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            target *= 1e-250
            ssum *= 1e-250
    ssum += j  # J_0 contribution
    return target / ssum


def _miller_start_order(n: int, x: float) -> int:
    # the start must sit deep enough past the turning point that the trial
    # solution's unwanted component decays below 1e-16; the Airy layer has
    # width O(x^(1/3)), hence the cubic-root margin
    return int(max(n, x) + 22 + 11.0 * x ** (1.0 / 3.0))


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind, integer order.

    Absolute accuracy ~1e-14 for x <= 1e3; orders up to 1e6 are accepted
    (deep in the turning-point shadow the exact underflow value 0.0 is
    returned).  Negative x raises DomainError; callers pass radii.
    """
    n = int(n)
    if not (x >= 0.0):
        if math.isnan(x):
            raise DomainError("bessel_j: argument is NaN")
        raise DomainError(f"bessel_j: negative argument x={x!r}")
    if abs(n) > 10**6:
        raise DomainError(f"bessel_j: order |n|={abs(n)} exceeds 1e6")
    if n < 0:
        val = bessel_j(-n, x)
        return -val if (-n) % 2 else val
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if n > x and _log_jn_estimate(n, x) < _UNDERFLOW_LOG:
        return 0.0
    if x <= 2.0 * math.sqrt(n + 1.0) and x <= 9.0:
        return _series_jn(n, x)
    if x >= max(30.0, 1.8 * n * n):
        return _asymptotic_jn(n, x)
    return _miller_jn(n, x)


def bessel_j_orders(n_max: int, x: np.ndarray) -> np.ndarray:
    """All orders 0..n_max at once over an array of non-negative arguments.

    Returns an array of shape (n_max + 1, len(x)).  Large arguments use the
    Hankel expansion for J_0, J_1 followed by forward recurrence (stable for
    n below ~0.87 x); the rest falls to a backward-recurrence sweep, with
    the ascending series at small arguments.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("bessel_j_orders expects a 1-d array")
    if np.any(x < 0) or np.any(~np.isfinite(x)):
        raise DomainError("bessel_j_orders: arguments must be finite and >= 0")
    out = np.zeros((n_max + 1, x.size))
    if x.size == 0:
        return out

    small = x <= min(1.0, 9.0 / max(1, n_max))
    forward = (~small) & (x >= 25.0) & (n_max <= 0.87 * x)
    mid = ~(small | forward)

    if np.any(small):
        out[:, small] = _series_block(n_max, x[small])
    if np.any(forward):
        out[:, forward] = _forward_block(n_max, x[forward])
    if np.any(mid):
        out[:, mid] = _miller_block(n_max, x[mid])
    return out


def _asymptotic_j01_block(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # vectorised Hankel expansion for orders 0 and 1 (callers ensure x >= 25)
    res = []
    for n in (0, 1):
        mu = 4.0 * n * n
        p = np.ones_like(x)
        q = np.zeros_like(x)
        term = np.ones_like(x)
        sign = 1.0
        for k in range(0, 14):
            t_q = term * (mu - (4 * k + 1) ** 2) / ((2 * k + 1) * 8.0 * x)
            q += sign * t_q
            t_p = t_q * (mu - (4 * k + 3) ** 2) / ((2 * k + 2) * 8.0 * x)
            p += -sign * t_p
            if np.all(np.abs(t_p) < 1e-17):
                break
            term = t_p
            sign = -sign
        chi = x - (0.5 * n + 0.25) * math.pi
        res.append(np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi)))
    return res[0], res[1]


def _forward_block(n_max: int, x: np.ndarray) -> np.ndarray:
    block = np.empty((n_max + 1, x.size))
    j0, j1 = _asymptotic_j01_block(x)
    block[0] = j0
    if n_max >= 1:
        block[1] = j1
    for n in range(1, n_max):
        block[n + 1] = (2.0 * n / x) * block[n] - block[n - 1]
    return block


def _series_block(n_max: int, xs: np.ndarray) -> np.ndarray:
    half = 0.5 * xs
    z = half * half
    block = np.empty((n_max + 1, xs.size))
    for n in range(n_max + 1):
        with np.errstate(divide="ignore"):
            logt = n * np.log(np.where(half > 0, half, 1.0)) - math.lgamma(n + 1.0)
        term = np.where(half > 0, np.exp(logt), 1.0 if n == 0 else 0.0)
        total = term.copy()
        for k in range(1, 60):
            term = term * (-z) / (k * (n + k))
            total += term
            if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(total), 1e-300)):
                break
        block[n] = total
    return block


def _miller_block(n_max: int, xm: np.ndarray) -> np.ndarray:
    block = np.empty((n_max + 1, xm.size))
    # bucket by required start order (quantised so sweeps stay few)
    starts = np.array([_miller_start_order(n_max, v) for v in xm])
    starts = 64 * np.ceil(starts / 64.0).astype(int)
    for m in np.unique(starts):
        sel = starts == m
        xv = xm[sel]
        jp = np.zeros(xv.size)
        j = np.full(xv.size, 1e-300)
        rows = np.zeros((n_max + 1, xv.size))
        ssum = np.zeros(xv.size)
        for k in range(int(m), 0, -1):
            jm = (2.0 * k / xv) * j - jp
            jp, j = j, jm
            if k - 1 <= n_max:
                rows[k - 1] = j
            if (k - 1) % 2 == 0 and k - 1 > 0:
                ssum += 2.0 * j
            big = np.abs(j) > 1e250
            if np.any(big):
                j[big] *= 1e-250
                jp[big] *= 1e-250
                rows[:, big] *= 1e-250
                ssum[big] *= 1e-250
        ssum += j
        block[:, sel] = rows / ssum
    return block


# --------------------------------------------------------------------------
# Gauss rules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on [a, b]; exact for polynomials of degree 2*order - 1."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def apply(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


def gauss_rule(order: int, a: float, b: float) -> QuadratureRule:
    if order < 1:
        raise ValueError(f"gauss_rule: order must be >= 1, got {order}")
    if not a < b:
        raise ValueError(f"gauss_rule: invalid interval [{a}, {b}]")
    xs, ws = leggauss(order)
    half = 0.5 * (b - a)
    nodes = half * (xs + 1.0) + a
    weights = half * ws
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def composite_gauss(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on each panel of a partition, concatenated."""
    edges = np.asarray(edges, dtype=float)
    xs, ws = leggauss(order)
    a = edges[:-1]
    b = edges[1:]
    half = 0.5 * (b - a)
    nodes = (half[:, None] * (xs[None, :] + 1.0) + a[:, None]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return nodes, weights


# --------------------------------------------------------------------------
# Adaptive quadrature
# --------------------------------------------------------------------------

_G7_X, _G7_W = leggauss(7)
_G15_X, _G15_W = leggauss(15)


@dataclass
class IntegralResult:
    value: float
    error: float
    converged: bool
    neval: int = 0

    def __iter__(self):
        # allows `value, err = adaptive_integrate(...)`
        yield self.value
        yield self.error


def _panel_estimates(f, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x7 = mid[:, None] + half[:, None] * _G7_X[None, :]
    x15 = mid[:, None] + half[:, None] * _G15_X[None, :]
    f7 = f(x7.ravel()).reshape(x7.shape)
    f15 = f(x15.ravel()).reshape(x15.shape)
    bad = ~np.isfinite(f15)
    if np.any(bad) or np.any(~np.isfinite(f7)):
        loc = x15.ravel()[np.flatnonzero(~np.isfinite(f15.ravel()))[:1]]
        where = float(loc[0]) if loc.size else float("nan")
        raise IntegrationError(f"integrand returned a non-finite value near x={where!r}")
    v7 = half * np.sum(_G7_W[None, :] * f7, axis=1)
    v15 = half * np.sum(_G15_W[None, :] * f15, axis=1)
    return v15, np.abs(v15 - v7), x7.size + x15.size


def _seed_edges(a: float, b: float, split_points) -> np.ndarray:
    pts = sorted({float(p) for p in split_points if a <= p <= b} | {a, b})
    edges = []
    span = b - a
    for lo, hi in zip(pts[:-1], pts[1:]):
        edges.append(lo)
        width = hi - lo
        # geometric grading toward a hinted edge tames integrable log/power
        # endpoint singularities before the adaptive loop takes over
        if lo in split_points or (lo == a and a in split_points):
            edges.extend(lo + width * 2.0 ** (-j) for j in range(45, 0, -1))
        if hi in split_points or (hi == b and b in split_points):
            edges.extend(hi - width * 2.0 ** (-j) for j in range(1, 46))
    edges.append(b)
    arr = np.unique(np.asarray(edges))
    # drop degenerate panels produced by grading from both ends
    keep = np.concatenate([[True], np.diff(arr) > 1e-300 * max(1.0, abs(span))])
    return arr[keep]


def adaptive_integrate(
    f,
    a: float,
    b: float,
    tol: float,
    *,
    abs_tol: float = 0.0,
    split_points: tuple = (),
    max_intervals: int = 4000,
) -> IntegralResult:
    """Globally adaptive integration of a vectorised integrand on [a, b].

    `tol` is relative; convergence additionally accepts errors below
    `abs_tol`.  `split_points` lists abscissas of known integrable
    singularities (interior or endpoint); initial panels are split and
    geometrically graded there.  If the interval budget runs out the best
    estimate is returned with converged=False.  A NaN/inf from the integrand
    raises IntegrationError with the offending location.
    """
    if not a < b:
        raise ValueError(f"adaptive_integrate: invalid interval [{a}, {b}]")
    if tol <= 0 and abs_tol <= 0:
        raise ValueError("adaptive_integrate: need tol > 0 or abs_tol > 0")
    split = tuple(float(p) for p in split_points)
    edges = _seed_edges(a, b, split)
    lo, hi = edges[:-1], edges[1:]
    vals, errs, neval = _panel_estimates(f, lo, hi)

    heap = [(-errs[i], lo[i], hi[i], vals[i], errs[i]) for i in range(lo.size)]
    heapq.heapify(heap)
    total = float(np.sum(vals))
    toterr = float(np.sum(errs))

    while len(heap) < max_intervals:
        if toterr <= max(tol * abs(total), abs_tol):
            break
        batch = []
        parked = []
        for _ in range(min(16, len(heap))):
            if not heap:
                break
            item = heapq.heappop(heap)
            # panels at the representable-width floor cannot be split further
            if item[2] - item[1] < 4e-16 * (abs(item[1]) + abs(item[2]) + 1.0):
                parked.append(item)
            else:
                batch.append(item)
        if not batch:
            for item in parked:
                heapq.heappush(heap, item)
            break
        worst = batch[0][4]
        if worst <= 1e-4 * max(tol * abs(total), abs_tol, 1e-300):
            for item in batch:
                heapq.heappush(heap, item)
            break
        alo = np.array([it[1] for it in batch] + [0.5 * (it[1] + it[2]) for it in batch])
        ahi = np.array([0.5 * (it[1] + it[2]) for it in batch] + [it[2] for it in batch])
        for it in batch:
            total -= it[3]
            toterr -= it[4]
        nv, ne, cnt = _panel_estimates(f, alo, ahi)
        neval += cnt
        total += float(np.sum(nv))
        toterr += float(np.sum(ne))
        for i in range(alo.size):
            heapq.heappush(heap, (-ne[i], alo[i], ahi[i], nv[i], ne[i]))

    converged = toterr <= max(tol * abs(total), abs_tol)
    return IntegralResult(value=total, error=toterr, converged=converged, neval=neval)


# --------------------------------------------------------------------------
# Displaced-beam (shift) expansion coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GrafCoefficients:
    """Shift coefficients J_p(k_rho R0) for the displaced-beam expansion.

    The map stores the raw Bessel values; the sign convention of the
    reconstruction sum lives in `beam_reconstruct` (see module notes).
    """

    center_order: int
    argument: float
    coefficients: dict = field(repr=False)
    truncation: int

    def coefficient(self, p: int) -> float:
        return self.coefficients.get(p, 0.0)


def graf_truncation(x: float) -> int:
    """Truncation heuristic: J_p(x) decays super-exponentially past p = x,
    with an Airy transition layer of width O(x^(1/3))."""
    if x <= 0.0:
        return 0
    return int(math.ceil(x + 8.0 + 4.0 * x ** (1.0 / 3.0)))


def graf_coefficients(l: int, k_rho_R0: float, tail_tol: float) -> GrafCoefficients:
    if tail_tol <= 0:
        raise ValueError("graf_coefficients: tail_tol must be > 0")
    if k_rho_R0 < 0:
        raise DomainError("graf_coefficients: k_rho_R0 must be >= 0")
    x = float(k_rho_R0)
    if x == 0.0:
        return GrafCoefficients(center_order=l, argument=0.0,
                                coefficients={0: 1.0}, truncation=0)
    p_cut = graf_truncation(x)
    while abs(bessel_j(p_cut, x)) >= tail_tol and p_cut < 10**6:
        p_cut += 4
    coeffs = {p: bessel_j(abs(p), x) * (-1.0 if (p < 0 and p % 2) else 1.0)
              for p in range(-p_cut, p_cut + 1)}
    return GrafCoefficients(center_order=l, argument=x,
                            coefficients=coeffs, truncation=p_cut)


def beam_reconstruct(l: int, k_rho: float, R0: float, r_prime: float,
                     phi_prime: float, P: int) -> complex:
    """Displaced Bessel beam J_l(k|r' + R0 x^|) e^{i l Phi} rebuilt from
    atom-centered waves.

    Convention (validated against direct geometric evaluation): with the
    displacement on the +x axis and both azimuths measured from that axis,

        J_l(k r) e^{i l Phi} = sum_p (-1)^p J_p(k R0) J_{l+p}(k r') e^{i (l+p) phi'}.
    """
    if r_prime < 0:
        raise DomainError("beam_reconstruct: r_prime must be >= 0")
    total = 0.0 + 0.0j
    x = k_rho * R0
    for p in range(-P, P + 1):
        c = bessel_j(p, x)
        if c == 0.0:
            continue
        sign = -1.0 if p % 2 else 1.0
        total += sign * c * bessel_j(l + p, k_rho * r_prime) * np.exp(1j * (l + p) * phi_prime)
    return complex(total)
