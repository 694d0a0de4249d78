"""Request/response models for the compute service.

The request mirrors the sectioned run configuration one-to-one; defaults are
identical, so an empty body runs the default study.  Responses carry the same
columns and provenance the CLI writers emit.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import RunConfig


class BeamSpec(BaseModel):
    l: int = 1
    k_rho: float = Field(default=1.0, gt=0)
    k_rho_out: float = Field(default=1.25, gt=0)


class TransitionSpec(BaseModel):
    a: float = Field(default=1.0, gt=0)
    n_initial: int = Field(default=0, ge=0)
    m_initial: int = 0
    n_final: int = Field(default=0, ge=0)
    alpha: int = 1


class GeometrySpec(BaseModel):
    R0: list[float] = [2.0, 1.0, 0.5, 0.25, 0.0]
    cluster_radii: list[float] = [0.0, 1.0, 2.0, 4.0]
    n_samples: int = Field(default=16, ge=1)


class WindowSpec(BaseModel):
    l_min: int = -6
    l_max: int = 8
    window_tail_tol: float = Field(default=5e-3, gt=0)


class TolerancesSpec(BaseModel):
    quad_tol: float = Field(default=1e-6, gt=0)
    direct_tol: float = Field(default=1e-4, gt=0)
    tail_tol: float = Field(default=1e-12, gt=0)


class TruncationSpec(BaseModel):
    P: int | None = None
    r_max: float | None = None


class RunSpec(BaseModel):
    selection_sign: str = "plus"


class ConfigModel(BaseModel):
    beam: BeamSpec = BeamSpec()
    transition: TransitionSpec = TransitionSpec()
    geometry: GeometrySpec = GeometrySpec()
    window: WindowSpec = WindowSpec()
    tolerances: TolerancesSpec = TolerancesSpec()
    truncation: TruncationSpec = TruncationSpec()
    run: RunSpec = RunSpec()

    def to_run_config(self) -> RunConfig:
        return RunConfig(
            l=self.beam.l, k_rho=self.beam.k_rho, k_rho_out=self.beam.k_rho_out,
            a=self.transition.a, n_initial=self.transition.n_initial,
            m_initial=self.transition.m_initial, n_final=self.transition.n_final,
            alpha=self.transition.alpha,
            R0=tuple(self.geometry.R0),
            cluster_radii=tuple(self.geometry.cluster_radii),
            n_samples=self.geometry.n_samples,
            l_min=self.window.l_min, l_max=self.window.l_max,
            window_tail_tol=self.window.window_tail_tol,
            quad_tol=self.tolerances.quad_tol,
            direct_tol=self.tolerances.direct_tol,
            tail_tol=self.tolerances.tail_tol,
            P=self.truncation.P, r_max=self.truncation.r_max,
            selection_sign=self.run.selection_sign,
        )


class ComputeRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    threads: int = Field(default=1, ge=1, le=64)
    allow_unconverged: bool = False


class VerifyRequest(BaseModel):
    config: ConfigModel = ConfigModel()
    level: str = "quick"
    threads: int = Field(default=1, ge=1, le=64)


class ConfigTextRequest(BaseModel):
    text: str


class ResultMeta(BaseModel):
    config_hash: str
    version: str
    subcommand: str


class ComputeResponse(BaseModel):
    meta: ResultMeta
    columns: list[str]
    rows: list[list[float | int | bool | str]]
    summary: list[str]
    all_converged: bool


class HealthResponse(BaseModel):
    status: str
    version: str


class ParsedConfigResponse(BaseModel):
    config_hash: str
    canonical_text: str
