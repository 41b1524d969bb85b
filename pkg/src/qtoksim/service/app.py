"""FastAPI application exposing the simulator."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..harness.config import ScenarioConfig
from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="qtoksim", version=__version__,
                  description="Quantum-token authentication simulator")

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/scenario", response_model=schemas.ScenarioResponse)
    def scenario(cfg: ScenarioConfig):
        return handlers.handle_scenario(cfg)

    @app.post("/dephasing-curve", response_model=schemas.DephasingCurveResponse)
    def dephasing_curve(req: schemas.DephasingCurveRequest):
        return handlers.handle_dephasing_curve(req)

    @app.post("/uupuf/estimate", response_model=schemas.UupufEstimateResponse)
    def uupuf_estimate(req: schemas.UupufEstimateRequest):
        return handlers.handle_uupuf_estimate(req)

    @app.post("/qrpuf/enroll", response_model=schemas.QrpufEnrollResponse)
    def qrpuf_enroll(req: schemas.QrpufEnrollRequest):
        return handlers.handle_qrpuf_enroll(req)

    @app.post("/qrpuf/verify", response_model=schemas.QrpufVerifyResponse)
    def qrpuf_verify(req: schemas.QrpufVerifyRequest):
        try:
            return handlers.handle_qrpuf_verify(req)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/hmp4/run", response_model=schemas.ScenarioResponse)
    def hmp4_run(req: schemas.Hmp4RunRequest):
        return handlers.handle_hmp4_run(req)

    return app


app = create_app()
