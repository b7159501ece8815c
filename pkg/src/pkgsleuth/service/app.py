"""FastAPI service wrapping the detection pipeline.

One endpoint per pipeline command; the CLI is a thin client of this app (in
process by default, over HTTP against a deployed instance with ``--server``).
Error mapping keeps the CLI exit-code contract: configuration problems are
422, data problems 409, everything else 500.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import ConfigError, DataError, PkgsleuthError
from ..pipeline import (
    RunConfig,
    Scanner,
    cmd_adv_train,
    cmd_attack,
    cmd_extract,
    cmd_ingest,
    cmd_report,
    cmd_train,
    cmd_tune,
)
from .schemas import (
    AdvTrainRequest,
    AttackRequest,
    CommandRequest,
    CommandResponse,
    HealthResponse,
    ReportRequest,
    ScanRequest,
    ScanResponse,
    TuneRequest,
)

logger = logging.getLogger(__name__)


def _load(request) -> RunConfig:
    try:
        return RunConfig.load(request.config_path, request.overrides or {})
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _run(command: str, fn) -> CommandResponse:
    try:
        summary = fn()
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except DataError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except PkgsleuthError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return CommandResponse(ok=True, command=command, summary=summary)


def create_app() -> FastAPI:
    app = FastAPI(title="pkgsleuth", version=__version__)
    scanners: dict[tuple, Scanner] = {}

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/ingest", response_model=CommandResponse)
    def ingest(request: CommandRequest):
        config = _load(request)
        return _run("ingest", lambda: cmd_ingest(config))

    @app.post("/v1/extract", response_model=CommandResponse)
    def extract(request: CommandRequest):
        config = _load(request)
        return _run("extract", lambda: cmd_extract(config))

    @app.post("/v1/train", response_model=CommandResponse)
    def train(request: CommandRequest):
        config = _load(request)
        scanners.clear()
        return _run("train", lambda: cmd_train(config))

    @app.post("/v1/attack", response_model=CommandResponse)
    def attack(request: AttackRequest):
        config = _load(request)
        return _run("attack", lambda: cmd_attack(config, request.variant))

    @app.post("/v1/adv-train", response_model=CommandResponse)
    def adv_train(request: AdvTrainRequest):
        config = _load(request)
        scanners.clear()
        return _run("adv-train", lambda: cmd_adv_train(config, request.k_percent))

    @app.post("/v1/tune", response_model=CommandResponse)
    def tune(request: TuneRequest):
        config = _load(request)
        scanners.clear()
        return _run("tune", lambda: cmd_tune(config, request.variant))

    @app.post("/v1/report", response_model=CommandResponse)
    def report(request: ReportRequest):
        config = _load(request)
        return _run("report", lambda: cmd_report(config, request.variant))

    @app.post("/v1/scan", response_model=ScanResponse)
    def scan(request: ScanRequest):
        config = _load(request)
        key = (request.config_path, request.variant, tuple(sorted(request.overrides.items())))
        try:
            scanner = scanners.get(key)
            if scanner is None:
                scanner = Scanner(config, request.variant)
                scanners[key] = scanner
            results = [scanner.scan(p) for p in request.package_paths]
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except PkgsleuthError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        malicious = sum(1 for r in results if r["malicious_at_strictest"])
        mean_ms = sum(r["elapsed_ms"] for r in results) / len(results) if results else 0.0
        return ScanResponse(
            ok=True,
            results=results,
            mean_elapsed_ms=mean_ms,
            malicious=malicious,
            exit_code=1 if malicious else 0,
        )

    return app


app = create_app()
