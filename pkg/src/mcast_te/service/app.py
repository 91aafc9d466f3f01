"""FastAPI application wrapping the solver for long-running deployments
(e.g. a controller-side service handling solve and membership updates)."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..exceptions import (
    BudgetExceededError,
    InfeasibleInstanceError,
    JoinRejectedError,
    McastTeError,
)
from ..generators import BUILTIN_TOPOLOGIES
from . import handlers, models


def create_app() -> FastAPI:
    app = FastAPI(title="mcast-te", version=__version__)

    @app.exception_handler(McastTeError)
    async def _domain_error(request: Request, exc: McastTeError):
        if isinstance(exc, (InfeasibleInstanceError, JoinRejectedError)):
            status = 409
        elif isinstance(exc, BudgetExceededError):
            status = 413
        else:
            status = 400
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/healthz", response_model=models.HealthResponse)
    def healthz():
        return models.HealthResponse(status="ok", version=__version__)

    @app.get("/topologies", response_model=models.TopologiesResponse)
    def topologies():
        return models.TopologiesResponse(topologies=sorted(BUILTIN_TOPOLOGIES))

    @app.post("/solve", response_model=models.SolveResponse)
    def solve(req: models.SolveRequest):
        return handlers.solve_handler(req)

    @app.post("/verify", response_model=models.VerifyResponse)
    def verify(req: models.VerifyRequest):
        return handlers.verify_handler(req)

    @app.post("/membership", response_model=models.MembershipResponse)
    def membership(req: models.MembershipRequest):
        return handlers.membership_handler(req)

    @app.post("/instances/random", response_model=models.InstanceModel)
    def instances_random(req: models.RandomInstanceRequest):
        return handlers.random_instance_handler(req)

    @app.post("/instances/calibrate", response_model=models.InstanceModel)
    def instances_calibrate(req: models.CalibrateRequest):
        return handlers.calibrate_handler(req)

    @app.post("/instances/gadget", response_model=models.InstanceModel)
    def instances_gadget(req: models.GadgetRequest):
        return handlers.gadget_handler(req)

    @app.post("/instances/showcase", response_model=models.InstanceModel)
    def instances_showcase():
        return handlers.showcase_handler()

    @app.post("/export-ip", response_model=models.ExportIpResponse)
    def export_ip(req: models.ExportIpRequest):
        return handlers.export_ip_handler(req)

    return app


app = create_app()
