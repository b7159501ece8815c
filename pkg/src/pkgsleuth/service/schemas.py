"""Request/response models for the detection service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CommandRequest(BaseModel):
    config_path: str
    overrides: dict = Field(default_factory=dict)


class CommandResponse(BaseModel):
    ok: bool
    command: str
    summary: dict
    exit_code: int = 0


class AttackRequest(CommandRequest):
    variant: str = ""  # "" for the base models, "-at20" etc. for hardened ones


class AdvTrainRequest(CommandRequest):
    k_percent: float | None = None


class TuneRequest(CommandRequest):
    variant: str = ""


class ReportRequest(CommandRequest):
    variant: str = ""


class ScanRequest(BaseModel):
    config_path: str
    package_paths: list[str]
    variant: str = ""
    overrides: dict = Field(default_factory=dict)


class Verdict(BaseModel):
    target_fpr: float
    threshold: float
    verdict: str


class ScanResult(BaseModel):
    package: str
    score: float
    verdicts: list[Verdict]
    top_groups: list[str]
    elapsed_ms: float
    malicious_at_strictest: bool


class ScanResponse(BaseModel):
    ok: bool
    results: list[ScanResult]
    mean_elapsed_ms: float
    malicious: int
    exit_code: int


class HealthResponse(BaseModel):
    status: str
    version: str
