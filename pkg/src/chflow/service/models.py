"""Pydantic request/response schemas of the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class LedgerPayload(BaseModel):
    columns: list[str]
    rows: list[list[float]]


class SimulateRequest(BaseModel):
    config: str = Field(description="flat key=value run configuration text")
    include_ledger: bool = False
    workdir: Optional[str] = Field(
        default=None, description="base directory for relative output paths")


class SimulateSummary(BaseModel):
    steps: int
    t_end: float
    mass_initial: float
    mass_drift_max: float
    energy_initial: float
    energy_final: float
    max_energy_rise: float
    balance_defect: float
    separation_final: float
    grad_mu_final: float
    seed: int
    outputs: list[str]


class SimulateResponse(BaseModel):
    summary: SimulateSummary
    ledger: Optional[LedgerPayload] = None


class SteadyRequest(BaseModel):
    config: str
    tol_residual: float = 1e-9
    tol_gradmu: float = 1e-8
    max_time: float = 500.0
    method: Literal["long_time_integration", "damped_newton"] = "long_time_integration"
    save_state: Optional[str] = Field(
        default=None, description="write the stationary field here (snapshot format)")
    workdir: Optional[str] = None


class SteadyResponse(BaseModel):
    converged: bool
    residual: float
    grad_mu_norm: float
    t_reached: float
    energy: float
    mean: float
    outputs: list[str]


class UniquenessRequest(BaseModel):
    config: str
    eps: float = 1e-4
    perturbation_seed: int = 77
    perturbation_band_limit: int = 4
    T: Optional[float] = Field(default=None, description="override run.T")


class UniquenessResponse(BaseModel):
    d0: float
    d_final: float
    ratio: float
    c_emp: float
    c_emp_symmetric: float
    sandwich_slack: float
    times: list[float]
    d: list[float]
    d_symmetric: list[float]
    hm1: list[float]


class LabRequest(BaseModel):
    suite: Literal["gronwall", "uniform", "blowup", "gn", "elliptic", "all"] = "all"
    seed: int = 0
    samples: int = 50


class LabResponse(BaseModel):
    suite: str
    seed: int
    samples: int
    report: dict


class CheckRequest(BaseModel):
    only: Optional[list[int]] = None
    out_dir: Optional[str] = None


class CheckCriterion(BaseModel):
    cid: int
    name: str
    passed: bool
    details: str


class CheckResponse(BaseModel):
    results: list[CheckCriterion]
    all_passed: bool
    table: str


class HealthResponse(BaseModel):
    status: str
    version: str
