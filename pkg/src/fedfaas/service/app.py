"""REST API over the service core.

JSON bodies; Envelope payloads travel base64.  Auth is a static bearer
token checked against exactly one scope per route.  Errors come back as
``{"error": {"code", "message"}}`` with a matching HTTP status.
"""
from __future__ import annotations

import base64
import threading
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from fedfaas.protocol.codecs import CorruptPayload, Envelope
from fedfaas.protocol.records import TaskState
from fedfaas.service.auth import (
    SCOPE_ENDPOINT_REGISTER,
    SCOPE_REGISTER_FUNCTION,
    SCOPE_RUN,
    AuthToken,
)
from fedfaas.service.core import ServiceCore
from fedfaas.service.errors import MalformedBody, ServiceError


class RegisterFunctionRequest(BaseModel):
    name: str
    body_b64: str
    container_type: Optional[str] = None
    authorized_users: list[str] = Field(default_factory=list)
    allow_reexecution: bool = True


class RegisterFunctionResponse(BaseModel):
    function_id: str


class RegisterEndpointRequest(BaseModel):
    name: str
    endpoint_id: Optional[str] = None
    container_types: list[str] = Field(default_factory=list)


class RegisterEndpointResponse(BaseModel):
    endpoint_id: str
    forwarder_host: str
    forwarder_port: int
    connection_secret: str


class SubmitRequest(BaseModel):
    function_id: str
    endpoint_id: str
    input_b64: str


class SubmitResponse(BaseModel):
    task_id: str


class BatchRequest(BaseModel):
    tasks: list[SubmitRequest]


class TaskStatusResponse(BaseModel):
    task_id: str
    state: str
    attempts: int
    error: Optional[str] = None


class LatencyModel(BaseModel):
    t_s_ns: int = 0
    t_f_ns: int = 0
    t_e_ns: int = 0
    t_w_ns: int = 0
    staging_ns: int = 0


class TaskResultResponse(BaseModel):
    task_id: str
    status: str  # pending | success | failed
    result_b64: Optional[str] = None
    error: Optional[str] = None
    latency: Optional[LatencyModel] = None


class BatchStatusRequest(BaseModel):
    task_ids: list[str]
    include_results: bool = True


class EndpointStatusResponse(BaseModel):
    endpoint_id: str
    name: str
    status: str
    last_heartbeat_ns: int


def _decode_envelope(b64: str) -> Envelope:
    try:
        return Envelope.from_bytes(base64.b64decode(b64, validate=True))
    except (ValueError, CorruptPayload) as exc:
        raise MalformedBody(f"envelope does not decode: {exc}") from exc


def create_app(core: ServiceCore) -> FastAPI:
    app = FastAPI(title="fedfaas control service", version="0.1.0")
    app.state.core = core

    @app.middleware("http")
    async def stamp_arrival(request: Request, call_next):
        request.state.arrival_ns = core.clock.now_ns()
        return await call_next(request)

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def scoped(scope: str):
        def dependency(authorization: Optional[str] = Header(default=None)) -> AuthToken:
            bearer = None
            if authorization and authorization.lower().startswith("bearer "):
                bearer = authorization[7:].strip()
            return core.auth.authenticate(bearer, scope)

        return Depends(dependency)

    @app.post("/functions", response_model=RegisterFunctionResponse)
    def register_function(
        req: RegisterFunctionRequest, auth: AuthToken = scoped(SCOPE_REGISTER_FUNCTION)
    ):
        function_id = core.register_function(
            auth,
            name=req.name,
            body=_decode_envelope(req.body_b64),
            container_type=req.container_type,
            authorized_users=set(req.authorized_users),
            allow_reexecution=req.allow_reexecution,
        )
        return RegisterFunctionResponse(function_id=function_id)

    @app.post("/endpoints", response_model=RegisterEndpointResponse)
    def register_endpoint(
        req: RegisterEndpointRequest, auth: AuthToken = scoped(SCOPE_ENDPOINT_REGISTER)
    ):
        endpoint_id, (host, port), secret = core.register_endpoint(
            auth, req.name, req.endpoint_id, req.container_types
        )
        return RegisterEndpointResponse(
            endpoint_id=endpoint_id,
            forwarder_host=host,
            forwarder_port=port,
            connection_secret=secret,
        )

    @app.post("/tasks", response_model=SubmitResponse)
    def submit(req: SubmitRequest, request: Request, auth: AuthToken = scoped(SCOPE_RUN)):
        task_id = core.submit(
            auth,
            req.function_id,
            req.endpoint_id,
            _decode_envelope(req.input_b64),
            arrival_ns=request.state.arrival_ns,
        )
        return SubmitResponse(task_id=task_id)

    @app.post("/batch")
    def submit_batch(req: BatchRequest, request: Request, auth: AuthToken = scoped(SCOPE_RUN)):
        items = []
        results = []
        for item in req.tasks:
            try:
                env = _decode_envelope(item.input_b64)
            except MalformedBody as exc:
                results.append((None, {"error": {"code": exc.code, "message": exc.message}}))
                continue
            results.append((len(items), None))
            items.append((item.function_id, item.endpoint_id, env))
        submitted = core.submit_batch(auth, items, arrival_ns=request.state.arrival_ns)
        out = [submitted[idx] if idx is not None else err for idx, err in results]
        return {"results": out}

    def _result_payload(auth: AuthToken, task_id: str) -> TaskResultResponse:
        stored = core.get_result(auth, task_id)
        task = core.get_status(auth, task_id)
        if stored is None:
            return TaskResultResponse(task_id=task_id, status="pending")
        latency = None
        if task.latency is not None:
            latency = LatencyModel(
                t_s_ns=task.latency.t_s,
                t_f_ns=task.latency.t_f,
                t_e_ns=task.latency.t_e,
                t_w_ns=task.latency.t_w,
                staging_ns=core.staging_ns(task_id),
            )
        if stored.success:
            assert stored.envelope is not None
            return TaskResultResponse(
                task_id=task_id,
                status="success",
                result_b64=base64.b64encode(stored.envelope.to_bytes()).decode(),
                latency=latency,
            )
        return TaskResultResponse(
            task_id=task_id, status="failed", error=stored.error, latency=latency
        )

    @app.get("/tasks/{task_id}/status", response_model=TaskStatusResponse)
    def get_status(task_id: str, auth: AuthToken = scoped(SCOPE_RUN)):
        task = core.get_status(auth, task_id)
        return TaskStatusResponse(
            task_id=task_id,
            state=task.state.value,
            attempts=task.attempts,
            error=task.error,
        )

    @app.get("/tasks/{task_id}/result", response_model=TaskResultResponse)
    def get_result(task_id: str, auth: AuthToken = scoped(SCOPE_RUN)):
        return _result_payload(auth, task_id)

    @app.post("/batch_status")
    def batch_status(req: BatchStatusRequest, auth: AuthToken = scoped(SCOPE_RUN)):
        out = []
        for task_id in req.task_ids:
            try:
                if req.include_results:
                    out.append(_result_payload(auth, task_id).model_dump())
                else:
                    task = core.get_status(auth, task_id)
                    out.append({"task_id": task_id, "state": task.state.value})
            except ServiceError as exc:
                out.append(
                    {"task_id": task_id, "error": {"code": exc.code, "message": exc.message}}
                )
        return {"results": out}

    @app.get("/endpoints")
    def list_endpoints(auth: AuthToken = scoped(SCOPE_RUN)):
        return {
            "endpoints": [
                EndpointStatusResponse(
                    endpoint_id=r.endpoint_id,
                    name=r.name,
                    status=r.status.value,
                    last_heartbeat_ns=r.last_heartbeat,
                ).model_dump()
                for r in core.list_endpoints()
            ]
        }

    @app.get("/endpoints/{endpoint_id}/status", response_model=EndpointStatusResponse)
    def endpoint_status(endpoint_id: str, auth: AuthToken = scoped(SCOPE_ENDPOINT_REGISTER)):
        record = core.endpoint_status(endpoint_id)
        return EndpointStatusResponse(
            endpoint_id=endpoint_id,
            name=record.name,
            status=record.status.value,
            last_heartbeat_ns=record.last_heartbeat,
        )

    return app


def serve(core: ServiceCore, host: str, port: int, in_thread: bool = False):
    """Run uvicorn over the app; returns the server when threaded."""
    import uvicorn

    config = uvicorn.Config(
        create_app(core), host=host, port=port, log_level="warning", access_log=False
    )
    server = uvicorn.Server(config)
    if not in_thread:
        server.run()
        return server
    thread = threading.Thread(target=server.run, daemon=True, name="uvicorn")
    thread.start()
    return server
