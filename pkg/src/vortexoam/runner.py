"""Orchestration shared by the service endpoints and the CLI: builds model
objects from a RunConfig, fans sweep points across a thread pool, and
assembles rows in deterministic order with full provenance.

Sweep points are independent work items; the radial-overlap engine is built
once up front and shared read-mostly, and aggregation always walks results in
input order, so outputs are byte-identical for any thread count.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__, kernel, matrix, specfun
from .config import RunConfig, config_hash
from .model import AtomicState, BesselBeam, DipoleTransition, Displacement, default_transition
from .spectra import (
    Window,
    cluster_average,
    oam_spectrum,
    onaxis_limit_study,
    spectral_spread,
)


@dataclass(frozen=True)
class RunResult:
    subcommand: str
    meta: dict
    columns: tuple
    rows: list
    summary: list
    all_converged: bool


def _meta(cfg: RunConfig, subcommand: str) -> dict:
    return {"config_hash": config_hash(cfg), "version": __version__,
            "subcommand": subcommand}


def build_transition(cfg: RunConfig, alpha: int | None = None) -> DipoleTransition:
    alpha = cfg.alpha if alpha is None else alpha
    return DipoleTransition(
        initial=AtomicState(m=cfg.m_initial, n=cfg.n_initial, a=cfg.a),
        final=AtomicState(m=cfg.m_initial - alpha, n=cfg.n_final, a=cfg.a),
    )


def build_pair(cfg: RunConfig) -> tuple[DipoleTransition, DipoleTransition]:
    mag = abs(cfg.alpha)
    return build_transition(cfg, mag), build_transition(cfg, -mag)


def _window(cfg: RunConfig) -> Window:
    return Window(cfg.l_min, cfg.l_max)


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _prebuild_engine(cfg: RunConfig, alphas) -> None:
    # one G build per |alpha| serves every sweep point and both chiralities
    for alpha in alphas:
        t = build_transition(cfg, alpha)
        matrix.get_engine(t, abs(alpha), cfg.k_rho, cfg.k_rho_out,
                          cfg.quad_tol, cfg.r_max)


SPECTRUM_COLUMNS = ("R0", "l_out", "weight", "abs_M", "phase", "converged",
                    "p_truncation", "terms_used", "quad_tol", "tail_estimate",
                    "r_max")


def run_spectrum(cfg: RunConfig, threads: int = 1) -> RunResult:
    cfg.validate()
    beam = BesselBeam(l=cfg.l, k_rho=cfg.k_rho)
    t = build_transition(cfg)
    win = _window(cfg)
    _prebuild_engine(cfg, [cfg.alpha])

    def point(R0: float):
        return oam_spectrum(beam, cfg.k_rho_out, t, Displacement(R0), win,
                            cfg.quad_tol, selection_sign=cfg.sign,
                            window_tail_tol=cfg.window_tail_tol, r_max=cfg.r_max)

    spectra = _map_ordered(point, list(cfg.R0), threads)
    rows, summary = [], []
    all_ok = True
    for s in spectra:
        for l_out in win.channels():
            amp = s.raw[l_out]
            rep = amp.convergence
            rows.append([s.R0, l_out, s.weights[l_out], abs(amp.value),
                         cmath.phase(amp.value), rep.converged, rep.p_truncation,
                         rep.terms_used, rep.quad_tol, rep.tail_estimate, rep.r_max])
        all_ok = all_ok and s.converged
        if not s.window_ok:
            summary.append(f"window-leakage R0={s.R0!r}: boundary weight "
                           f"{s.boundary_weight:.3e} exceeds {cfg.window_tail_tol:.3e}")
        summary.append(f"spread R0={s.R0!r}: {spectral_spread(s)!r}"
                       if s.converged else f"spread R0={s.R0!r}: unconverged")
    return RunResult("spectrum", _meta(cfg, "spectrum"), SPECTRUM_COLUMNS,
                     rows, summary, all_ok)


DICHROISM_COLUMNS = ("R_c", "D", "S_plus", "S_minus", "n_samples", "converged")


def run_dichroism(cfg: RunConfig, threads: int = 1) -> RunResult:
    cfg.validate()
    if not cfg.cluster_radii:
        raise ValueError("dichroism: geometry.cluster_radii must be non-empty")
    beam = BesselBeam(l=cfg.l, k_rho=cfg.k_rho)
    pair = build_pair(cfg)
    win = _window(cfg)
    for t in pair:
        allowed = cfg.l + cfg.sign * t.alpha
        if allowed not in win:
            raise ValueError(f"dichroism: window must contain allowed channel {allowed}")
    _prebuild_engine(cfg, [abs(cfg.alpha)])

    def point(R_c: float):
        return cluster_average(beam, cfg.k_rho_out, pair, R_c, cfg.n_samples,
                               win, cfg.quad_tol, selection_sign=cfg.sign)

    points = _map_ordered(point, list(cfg.cluster_radii), threads)
    rows = [[p.radius, p.D, p.s_plus, p.s_minus, p.n_samples, p.converged]
            for p in points]
    mags = [abs(p.D) for p in points]
    trend = all(a >= b - 1e-12 for a, b in zip(mags, mags[1:]))
    summary = [f"|D| non-increasing across radii: {trend}"]
    return RunResult("dichroism", _meta(cfg, "dichroism"), DICHROISM_COLUMNS,
                     rows, summary, all(p.converged for p in points))


LIMIT_COLUMNS = ("R0", "off_channel_weight", "allowed_weight", "converged")


def run_limit_study(cfg: RunConfig, threads: int = 1) -> RunResult:
    cfg.validate()
    beam = BesselBeam(l=cfg.l, k_rho=cfg.k_rho)
    t = build_transition(cfg)
    _prebuild_engine(cfg, [cfg.alpha])
    rows_out = onaxis_limit_study(beam, cfg.k_rho_out, t, cfg.R0, _window(cfg),
                                  cfg.quad_tol, selection_sign=cfg.sign,
                                  window_tail_tol=cfg.window_tail_tol)
    rows = [[r.R0, r.off_channel_weight, r.allowed_weight, r.converged]
            for r in rows_out]
    offs = [r.off_channel_weight for r in rows_out]
    mono = all(a > b for a, b in zip(offs, offs[1:]))
    summary = [f"off-channel weight strictly decreasing: {mono}"]
    nonzero = [(R0, w) for R0, w in zip([r.R0 for r in rows_out], offs) if w > 0 and R0 > 0]
    if len(nonzero) >= 2:
        (r1, w1), (r2, w2) = nonzero[-2], nonzero[-1]
        slope = math.log(w1 / w2) / math.log(r1 / r2)
        summary.append(f"log-log slope over last two nonzero points: {slope!r}")
    return RunResult("limit-study", _meta(cfg, "limit-study"), LIMIT_COLUMNS,
                     rows, summary, all(r.converged for r in rows_out))


# --------------------------------------------------------------------------
# Verification suites
# --------------------------------------------------------------------------

VERIFY_COLUMNS = ("check", "passed", "detail")


def _check_selection_identity() -> tuple[bool, str]:
    worst = None
    for lam in range(-5, 6):
        for alpha in range(-5, 6):
            got = kernel.azimuthal_selection(lam, alpha)
            want = 2.0 * math.pi if lam == -alpha else 0.0
            if got != want:
                worst = (lam, alpha, got, want)
    return (worst is None,
            "exact over |lam|,|alpha| <= 5" if worst is None
            else f"mismatch at lam={worst[0]} alpha={worst[1]}: {worst[2]!r} != {worst[3]!r}")


def _check_bessel_identities() -> tuple[bool, str]:
    worst = 0.0
    for n, x in ((1, 0.7), (3, 2.2), (7, 13.5), (12, 44.0), (2, 97.0)):
        res = abs(specfun.bessel_j(n - 1, x) + specfun.bessel_j(n + 1, x)
                  - (2.0 * n / x) * specfun.bessel_j(n, x))
        worst = max(worst, res)
        parity = abs(specfun.bessel_j(-n, x) - (-1.0) ** n * specfun.bessel_j(n, x))
        worst = max(worst, parity)
    return worst < 1e-10, f"max recurrence/parity residual {worst:.2e}"


def _check_quadrature() -> tuple[bool, str]:
    import numpy as np

    checks = [
        abs(specfun.adaptive_integrate(lambda x: x, 0, 1, 1e-12).value - 0.5),
        abs(specfun.adaptive_integrate(lambda x: -np.log(x), 0, 1, 1e-12,
                                       split_points=(0.0,)).value - 1.0),
        abs(specfun.adaptive_integrate(
            lambda x: np.vectorize(specfun.bessel_j)(0, x) * x, 0, 40, 1e-12).value
            - 40.0 * specfun.bessel_j(1, 40.0)),
        abs(specfun.gauss_rule(5, 0, 1).apply(lambda x: x**4) - 0.2),
        abs(specfun.gauss_rule(20, 0, math.pi).apply(np.sin) - 2.0),
    ]
    worst = max(checks)
    return worst < 1e-10, f"max quadrature residual {worst:.2e}"


def _check_graf(tail_tol: float) -> tuple[bool, str]:
    import numpy as np

    worst = 0.0
    for k_R0 in (0.5, 2.0, 5.0):
        P = specfun.graf_coefficients(1, k_R0, tail_tol).truncation
        for rp in np.linspace(0.1, 6.0, 10):
            for ph in np.linspace(0.0, 2.0 * math.pi, 10, endpoint=False):
                xx = rp * math.cos(ph) + k_R0
                yy = rp * math.sin(ph)
                direct = (specfun.bessel_j(1, math.hypot(xx, yy))
                          * cmath.exp(1j * math.atan2(yy, xx)))
                rec = specfun.beam_reconstruct(1, 1.0, k_R0, rp, ph, P)
                worst = max(worst, abs(direct - rec))
    return worst < 1e-10, f"max reconstruction error {worst:.2e}"


def _check_kernel_values() -> tuple[bool, str]:
    checks = [
        abs(kernel.kernel_F(2.0, 0.0, 1.234) - 0.5),
        abs(kernel.kernel_F(1.0, 1.0, math.pi) - 0.5),
        abs(kernel.kernel_F(3.0, 4.0, math.pi / 2) - 0.2),
        abs(kernel.kernel_fourier(0, 2.0, 0.0, 1e-12) - math.pi),
        abs(kernel.kernel_fourier(1, 2.0, 0.0, 1e-12)),
        abs(kernel.kernel_fourier(1, 1.3, 0.4, 1e-12)
            - kernel.kernel_fourier(1, 0.4, 1.3, 1e-12)),
        abs(kernel.kernel_fourier(2, 1.3, 0.4, 1e-12)
            - kernel.kernel_fourier(-2, 1.3, 0.4, 1e-12)),
    ]
    worst = max(checks)
    return worst < 1e-9, f"max kernel residual {worst:.2e}"


def _check_onaxis_collapse(cfg: RunConfig) -> tuple[bool, str]:
    beam = BesselBeam(l=cfg.l, k_rho=cfg.k_rho)
    t = build_transition(cfg)
    s = oam_spectrum(beam, cfg.k_rho_out, t, Displacement(0.0), _window(cfg),
                     cfg.quad_tol, selection_sign=cfg.sign,
                     window_tail_tol=cfg.window_tail_tol)
    allowed = cfg.l + cfg.sign * cfg.alpha
    off = 1.0 - s.weight(allowed)
    ok = off < 1e-12 and abs(s.weight(allowed) - 1.0) < 1e-12
    return ok, f"off-channel weight on axis {off:.2e}"


def _check_oracle_grid(cfg: RunConfig, threads: int = 1) -> tuple[bool, str]:
    beam = BesselBeam(l=cfg.l, k_rho=cfg.k_rho)
    t = build_transition(cfg)
    allowed = cfg.l + cfg.sign * cfg.alpha
    cases = [(R0, lp) for R0 in (0.0, 0.5, 2.0) for lp in (allowed, allowed - 1)]
    ref = abs(matrix.matrix_element_expansion(
        beam, BesselBeam(l=allowed, k_rho=cfg.k_rho_out), t, Displacement(0.0),
        cfg.quad_tol, selection_sign=cfg.sign).value)
    bound = 2.0 * (cfg.quad_tol + cfg.direct_tol) * ref

    def one(case):
        R0, lp = case
        bo = BesselBeam(l=lp, k_rho=cfg.k_rho_out)
        d = Displacement(R0)
        exp = matrix.matrix_element_expansion(beam, bo, t, d, cfg.quad_tol,
                                              selection_sign=cfg.sign,
                                              abs_floor=cfg.quad_tol * ref)
        direct = matrix.matrix_element_direct(beam, bo, t, d, cfg.direct_tol,
                                              abs_floor=cfg.direct_tol * ref)
        return abs(exp.value - direct.value)

    diffs = _map_ordered(one, cases, threads)
    worst = max(diffs)
    return worst <= bound, (f"max |expansion - direct| = {worst:.3e} over 6-case "
                            f"grid (bound {bound:.3e})")


def run_verify(cfg: RunConfig, level: str = "quick", threads: int = 1) -> RunResult:
    cfg.validate()
    if level not in ("quick", "full"):
        raise ValueError(f"verify level must be 'quick' or 'full', got {level!r}")
    checks = [
        ("selection-identity", _check_selection_identity()),
        ("bessel-identities", _check_bessel_identities()),
        ("quadrature-identities", _check_quadrature()),
        ("graf-reconstruction", _check_graf(cfg.tail_tol)),
        ("kernel-values", _check_kernel_values()),
        ("onaxis-collapse", _check_onaxis_collapse(cfg)),
    ]
    if level == "full":
        checks.append(("oracle-grid", _check_oracle_grid(cfg, threads)))
    rows = [[name, ok, detail] for name, (ok, detail) in checks]
    passed = all(ok for _, (ok, _) in checks)
    summary = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
               for name, (ok, detail) in checks]
    summary.append(f"verify {level}: {'all checks passed' if passed else 'FAILURES present'}")
    return RunResult("verify", _meta(cfg, "verify"), VERIFY_COLUMNS, rows,
                     summary, passed)
