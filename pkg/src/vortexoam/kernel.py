"""Exact inverse-distance kernel between probe and atomic electron, its
azimuthal Fourier coefficients, and the selection delta of the angular
integrals.

The kernel is F(r', q, phi) = [r'^2 + q^2 - 2 r' q cos phi]^{-1/2}, evaluated
in the numerically stable form (r'-q)^2 + 4 r' q sin^2(phi/2) (the naive
expansion cancels catastrophically near the diagonal).  Its cosine
coefficients

    K_lam(r', q) = int_0^{2pi} cos(lam phi) F(r', q, phi) dphi

are real, even in lam, symmetric in (r', q), homogeneous of degree -1, and
diverge logarithmically on the diagonal r' = q (an integrable locus that the
radial integrators split across).  Production evaluation is quadrature over
phi with panels graded toward phi = 0; a closed form in terms of
half-integer-degree Legendre functions of the second kind exists and serves
as an independent test oracle only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .specfun import adaptive_integrate, composite_gauss

TWO_PI = 2.0 * math.pi

_DIAG_REL = 1e-14  # relative diagonal exclusion width


class SingularPointError(ValueError):
    """Kernel evaluated exactly at the probe-atom coincidence point."""


class DiagonalSingularityError(ValueError):
    """Azimuthal coefficient requested on the (logarithmically divergent)
    diagonal r' = q."""


def kernel_F(r_prime: float, q: float, phi: float) -> float:
    """Exact inverse distance between probe offset r' and atom electron q
    separated by azimuth phi.  Always >= 1/(r' + q)."""
    if r_prime < 0 or q < 0:
        raise ValueError("kernel_F: radii must be >= 0")
    d2 = (r_prime - q) ** 2 + 4.0 * r_prime * q * math.sin(0.5 * phi) ** 2
    if d2 <= (_DIAG_REL * max(r_prime, q)) ** 2:
        raise SingularPointError(
            f"kernel_F: coincidence point r'={r_prime!r}, q={q!r}, phi={phi!r}"
        )
    return 1.0 / math.sqrt(d2)


def azimuthal_selection(lam: int, alpha: int) -> float:
    """The phi_q integral of e^{i(lam + alpha) phi_q}: 2 pi when lam = -alpha,
    exactly 0 otherwise.  Analytic, never computed by quadrature."""
    return TWO_PI if lam == -alpha else 0.0


def kernel_fourier(lam: int, r_prime: float, q: float, tol: float) -> float:
    """Azimuthal cosine coefficient K_lam(r', q) by adaptive quadrature.

    The imaginary (sine) part vanishes by evenness of F in phi.  Off the
    diagonal only; on it the coefficient diverges logarithmically and a
    DiagonalSingularityError is raised.
    """
    if tol <= 0:
        raise ValueError("kernel_fourier: tol must be > 0")
    if r_prime < 0 or q < 0:
        raise ValueError("kernel_fourier: radii must be >= 0")
    lam = abs(int(lam))
    big, small = max(r_prime, q), min(r_prime, q)
    if big == 0.0:
        raise DiagonalSingularityError("kernel_fourier: r' = q = 0")
    if small == 0.0:
        return TWO_PI / big if lam == 0 else 0.0
    if abs(r_prime - q) < _DIAG_REL * big:
        raise DiagonalSingularityError(
            f"kernel_fourier: diagonal point r'={r_prime!r}, q={q!r}"
        )
    dr2 = (r_prime - q) ** 2
    rq4 = 4.0 * r_prime * q

    def integrand(phi):
        return np.cos(lam * phi) / np.sqrt(dr2 + rq4 * np.sin(0.5 * phi) ** 2)

    res = adaptive_integrate(integrand, 0.0, math.pi, tol, split_points=(0.0,))
    return 2.0 * res.value


def kernel_fourier_batch(lam: int, r_prime: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised K_lam over paired arrays (production fast path).

    Panels on phi in [0, pi] are graded dyadically toward phi = 0 with the
    depth chosen from the worst diagonal proximity in each bucket, so the
    near-logarithmic peak is always resolved.  Exact zeros are returned where
    one radius is 0 and lam != 0; pairs on the diagonal raise.
    """
    lam = abs(int(lam))
    r = np.asarray(r_prime, dtype=float)
    qq = np.asarray(q, dtype=float)
    if r.shape != qq.shape:
        raise ValueError("kernel_fourier_batch: shape mismatch")
    out = np.zeros(r.shape)
    big = np.maximum(r, qq)
    small = np.minimum(r, qq)
    zero = small == 0.0
    if np.any(zero):
        if lam == 0:
            out[zero] = TWO_PI / big[zero]
        # lam != 0 with a zero radius integrates to exactly 0
    live = ~zero
    if not np.any(live):
        return out
    eps = np.abs(r[live] - qq[live]) / big[live]
    if np.any(eps < _DIAG_REL):
        raise DiagonalSingularityError("kernel_fourier_batch: diagonal pair present")
    depth = np.clip(np.ceil(-np.log2(eps)).astype(int) + 4, 8, 64)
    rl, ql = r[live], qq[live]
    vals = np.empty(rl.shape)
    for d in np.unique(depth):
        sel = depth == d
        edges = math.pi * np.concatenate([[0.0], 2.0 ** -np.arange(d, -1, -1, dtype=float)])
        phi, w = composite_gauss(edges, 12)
        s2 = 4.0 * np.sin(0.5 * phi) ** 2
        cw = np.cos(lam * phi) * w
        dr2 = (rl[sel] - ql[sel]) ** 2
        rq = rl[sel] * ql[sel]
        f = 1.0 / np.sqrt(dr2[:, None] + rq[:, None] * s2[None, :])
        vals[sel] = 2.0 * (f @ cw)
    out[live] = vals
    return out


# --------------------------------------------------------------------------
# Precomputed coefficient table
# --------------------------------------------------------------------------

_TABLE_MAGIC = "vortexoam-kernel-table v1"


@dataclass
class KernelCoefficientTable:
    """K_lam sampled on a rectangular (r', q) grid, with the diagonal a
    declared singular locus.

    Lookup is bilinear off the diagonal; any query whose grid cell touches
    the line r' = q falls back to exact quadrature, so near-diagonal accuracy
    never depends on interpolation.
    """

    lam: int
    r_grid: np.ndarray
    q_grid: np.ndarray
    values: np.ndarray
    tol: float
    split_diagonal: bool = True
    version: str = __version__

    @classmethod
    def build(cls, lam: int, r_grid, q_grid, tol: float) -> "KernelCoefficientTable":
        r_grid = np.asarray(r_grid, dtype=float)
        q_grid = np.asarray(q_grid, dtype=float)
        for g, name in ((r_grid, "r_grid"), (q_grid, "q_grid")):
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or g[0] < 0:
                raise ValueError(f"KernelCoefficientTable: {name} must be strictly "
                                 "increasing and non-negative")
        rr, qq = np.meshgrid(r_grid, q_grid, indexing="ij")
        rr, qq = rr.ravel(), qq.ravel()
        diag = np.abs(rr - qq) < _DIAG_REL * np.maximum(rr, qq)
        vals = np.zeros(rr.size)
        vals[diag] = np.nan  # singular locus markers
        vals[~diag] = kernel_fourier_batch(lam, rr[~diag], qq[~diag])
        return cls(lam=abs(int(lam)), r_grid=r_grid, q_grid=q_grid,
                   values=vals.reshape(r_grid.size, q_grid.size), tol=tol)

    def _cell_touches_diagonal(self, i: int, j: int) -> bool:
        r_lo, r_hi = self.r_grid[i], self.r_grid[i + 1]
        q_lo, q_hi = self.q_grid[j], self.q_grid[j + 1]
        return not (q_hi < r_lo or q_lo > r_hi)

    def evaluate(self, r_prime, q) -> np.ndarray:
        """Bilinear interpolation; exact quadrature within one cell of the
        diagonal.  Queries must lie inside the grid rectangle."""
        r = np.atleast_1d(np.asarray(r_prime, dtype=float))
        qq = np.atleast_1d(np.asarray(q, dtype=float))
        if (np.any(r < self.r_grid[0]) or np.any(r > self.r_grid[-1])
                or np.any(qq < self.q_grid[0]) or np.any(qq > self.q_grid[-1])):
            raise ValueError("KernelCoefficientTable.evaluate: query outside grid")
        i = np.clip(np.searchsorted(self.r_grid, r, side="right") - 1, 0, self.r_grid.size - 2)
        j = np.clip(np.searchsorted(self.q_grid, qq, side="right") - 1, 0, self.q_grid.size - 2)
        out = np.empty(r.shape)
        exact = np.array([self._cell_touches_diagonal(ii, jj) for ii, jj in zip(i, j)])
        if np.any(exact):
            out[exact] = kernel_fourier_batch(self.lam, r[exact], qq[exact])
        interp = ~exact
        if np.any(interp):
            ii, jj = i[interp], j[interp]
            r0, r1 = self.r_grid[ii], self.r_grid[ii + 1]
            q0, q1 = self.q_grid[jj], self.q_grid[jj + 1]
            tr = (r[interp] - r0) / (r1 - r0)
            tq = (qq[interp] - q0) / (q1 - q0)
            v = self.values
            out[interp] = ((1 - tr) * (1 - tq) * v[ii, jj]
                           + tr * (1 - tq) * v[ii + 1, jj]
                           + (1 - tr) * tq * v[ii, jj + 1]
                           + tr * tq * v[ii + 1, jj + 1])
        return out

    # -- cache file ---------------------------------------------------------

    def _data_text(self) -> str:
        lines = []
        lines.append(" ".join(f"{v:.17e}" for v in self.r_grid))
        lines.append(" ".join(f"{v:.17e}" for v in self.q_grid))
        for row in self.values:
            lines.append(" ".join(f"{v:.17e}" for v in row))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        data = self._data_text()
        checksum = hashlib.sha256(data.encode()).hexdigest()
        header = (
            f"{_TABLE_MAGIC}\n"
            f"lambda = {self.lam}\n"
            f"tol = {self.tol:.17e}\n"
            f"code_version = {self.version}\n"
            f"nr = {self.r_grid.size}\n"
            f"nq = {self.q_grid.size}\n"
            f"checksum = sha256:{checksum}\n"
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header)
            fh.write(data)

    @classmethod
    def load(cls, path) -> "KernelCoefficientTable":
        with open(path, encoding="utf-8") as fh:
            magic = fh.readline().strip()
            if magic != _TABLE_MAGIC:
                raise ValueError(f"unrecognised kernel table header: {magic!r}")
            meta = {}
            for _ in range(6):
                key, _, val = fh.readline().partition("=")
                meta[key.strip()] = val.strip()
            data = fh.read()
        expect = meta["checksum"].removeprefix("sha256:")
        actual = hashlib.sha256(data.encode()).hexdigest()
        if actual != expect:
            raise ValueError("kernel table checksum mismatch (corrupt or edited file)")
        rows = data.strip("\n").split("\n")
        nr, nq = int(meta["nr"]), int(meta["nq"])
        r_grid = np.fromstring(rows[0], sep=" ")
        q_grid = np.fromstring(rows[1], sep=" ")
        values = np.array([np.fromstring(rw, sep=" ") for rw in rows[2:2 + nr]])
        if r_grid.size != nr or q_grid.size != nq or values.shape != (nr, nq):
            raise ValueError("kernel table data block inconsistent with header")
        return cls(lam=int(meta["lambda"]), r_grid=r_grid, q_grid=q_grid,
                   values=values, tol=float(meta["tol"]),
                   version=meta["code_version"])
