"""Compute service wrapping the engine: spectrum, dichroism, limit-study and
verification runs over HTTP, with the same deterministic rows the CLI writes.

The process keeps the radial-overlap caches warm between requests, so
repeated sweeps over the same transition amortise the expensive kernel
quadratures.  The CLI is a thin client of these endpoints (in-process by
default, remote with --server).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import ConfigError, config_hash, parse_config, render_config
from ..matrix import UnconvergedError
from ..runner import RunResult, run_dichroism, run_limit_study, run_spectrum, run_verify
from .schemas import (
    ComputeRequest,
    ComputeResponse,
    ConfigTextRequest,
    HealthResponse,
    ParsedConfigResponse,
    VerifyRequest,
)

app = FastAPI(
    title="vortexoam",
    description="Outgoing-OAM spectra and dichroic-signal decay for electron "
                "vortex beams probing displaced atoms",
    version=__version__,
)


def _respond(result: RunResult, allow_unconverged: bool) -> ComputeResponse:
    if not result.all_converged and not allow_unconverged:
        raise HTTPException(
            status_code=409,
            detail="unconverged amplitudes present; retry with allow_unconverged=true "
                   "or looser tolerances",
        )
    return ComputeResponse(meta=result.meta, columns=list(result.columns),
                           rows=result.rows, summary=result.summary,
                           all_converged=result.all_converged)


def _run(req: ComputeRequest, fn) -> ComputeResponse:
    try:
        cfg = req.config.to_run_config()
        result = fn(cfg, req.threads)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except UnconvergedError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    return _respond(result, req.allow_unconverged)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/spectrum", response_model=ComputeResponse)
def spectrum(req: ComputeRequest) -> ComputeResponse:
    return _run(req, run_spectrum)


@app.post("/dichroism", response_model=ComputeResponse)
def dichroism(req: ComputeRequest) -> ComputeResponse:
    return _run(req, run_dichroism)


@app.post("/limit-study", response_model=ComputeResponse)
def limit_study(req: ComputeRequest) -> ComputeResponse:
    return _run(req, run_limit_study)


@app.post("/verify", response_model=ComputeResponse)
def verify(req: VerifyRequest) -> ComputeResponse:
    try:
        cfg = req.config.to_run_config()
        result = run_verify(cfg, req.level, req.threads)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    # verification failures are reported in-band, not as transport errors
    return ComputeResponse(meta=result.meta, columns=list(result.columns),
                           rows=result.rows, summary=result.summary,
                           all_converged=result.all_converged)


@app.post("/config/parse", response_model=ParsedConfigResponse)
def config_parse(req: ConfigTextRequest) -> ParsedConfigResponse:
    try:
        cfg = parse_config(req.text)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return ParsedConfigResponse(config_hash=config_hash(cfg),
                                canonical_text=render_config(cfg))
