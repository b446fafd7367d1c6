"""FastAPI application exposing the simulator operations."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ValidationError
from . import handlers
from . import schemas as sm


def create_app() -> FastAPI:
    app = FastAPI(
        title="semm service",
        description="Stark echo modulation memory simulator",
        version=__version__,
    )

    @app.exception_handler(ValidationError)
    async def _validation_error(request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(OverflowError)
    async def _overflow_error(request, exc: OverflowError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=sm.SimulateResponse)
    def simulate(req: sm.SimulateRequest):
        return handlers.handle_simulate(req)

    @app.post("/sweep", response_model=sm.SweepResponse)
    def sweep(req: sm.SweepRequest):
        return handlers.handle_sweep(req)

    @app.post("/suppression", response_model=sm.SuppressionResponse)
    def suppress(req: sm.SuppressionRequest):
        return handlers.handle_suppression(req)

    @app.post("/tomography", response_model=sm.TomographyResponse)
    def tomography(req: sm.TomographyRequest):
        return handlers.handle_tomography(req)

    @app.post("/cancel-solve", response_model=sm.CancelSolveResponse)
    def cancel_solve(req: sm.CancelSolveRequest):
        return handlers.handle_cancel_solve(req)

    @app.post("/noise", response_model=sm.NoiseResponse)
    def noise(req: sm.NoiseRequest):
        return handlers.handle_noise(req)

    @app.post("/table", response_model=sm.TableResponse)
    def table(req: sm.TableRequest):
        return handlers.handle_table(req)

    @app.post("/validate", response_model=sm.ValidateResponse)
    def validate(req: sm.ValidateRequest):
        return handlers.handle_validate(req)

    return app
