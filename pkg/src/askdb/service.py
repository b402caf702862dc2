"""HTTP facade over the query pipeline.

Design points:

- Bearer tokens resolve to a principal (user id plus roles). Role policy is
  per dataset; the admin role may query everything and is the only role
  allowed to onboard.
- Authorization failures never leak catalog metadata: a caller without
  access to a dataset gets the same 403 whether or not the dataset exists.
  Only admins can learn that a dataset id is unknown (404).
- Error bodies are one-object JSON with a stable "error" discriminator.
- Every request is logged as a single JSON line.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .gateway import (
    Backend,
    HttpChatBackend,
    SimulatedBackend,
    SimulatedModelConfig,
)
from .pipeline import (
    DatasetBundle,
    DuplicateDatasetError,
    OnboardingError,
    PipelineConfig,
    QueryPipeline,
)
from .prompting import PromptTemplate, SchemaDescriptor, Strategy

logger = logging.getLogger("askdb.service")

ADMIN_ROLE = "admin"


class ApiError(Exception):
    """An error with a fixed HTTP status and JSON body."""

    def __init__(self, status_code: int, payload: dict):
        super().__init__(payload.get("error", "error"))
        self.status_code = status_code
        self.payload = payload


@dataclass(frozen=True)
class Principal:
    user_id: str
    roles: frozenset[str]

    @property
    def is_admin(self) -> bool:
        return ADMIN_ROLE in self.roles


@dataclass
class ServiceConfig:
    """Runtime configuration, normally loaded from a JSON file."""

    host: str = "127.0.0.1"
    port: int = 8080
    tokens: dict[str, Principal] = field(default_factory=dict)
    policy: dict[str, frozenset[str]] = field(default_factory=dict)
    backend: dict[str, Any] = field(default_factory=lambda: {"kind": "sim"})
    default_strategy: Strategy = Strategy.CFS
    default_k: int = 4
    default_n: int = 1
    row_limit: int = 10_000
    timeout_ms: int = 5_000
    cors_origins: tuple[str, ...] = ("*",)
    dataset_dirs: tuple[str, ...] = ()


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    listen = raw.get("listen", {})
    tokens = {
        token: Principal(user_id=spec["user_id"], roles=frozenset(spec.get("roles", ())))
        for token, spec in raw.get("tokens", {}).items()
    }
    policy = {
        dataset_id: frozenset(roles)
        for dataset_id, roles in raw.get("policy", {}).items()
    }
    defaults = raw.get("defaults", {})
    return ServiceConfig(
        host=listen.get("host", "127.0.0.1"),
        port=int(listen.get("port", 8080)),
        tokens=tokens,
        policy=policy,
        backend=raw.get("backend", {"kind": "sim"}),
        default_strategy=Strategy(defaults.get("strategy", "CFS").upper()),
        default_k=int(defaults.get("k", 4)),
        default_n=int(defaults.get("n", 1)),
        row_limit=int(raw.get("row_limit", 10_000)),
        timeout_ms=int(raw.get("timeout_ms", 5_000)),
        cors_origins=tuple(raw.get("cors_origins", ("*",))),
        dataset_dirs=tuple(raw.get("datasets", ())),
    )


def build_backend(spec: dict[str, Any]) -> Backend:
    kind = spec.get("kind", "sim")
    if kind == "sim":
        config = SimulatedModelConfig(
            competence=float(spec.get("competence", 1.0)),
            zs_hit_rate=float(spec.get("zs_hit_rate", 0.0)),
            seed=int(spec.get("seed", 0)),
        )
        return SimulatedBackend(
            config,
            knowledge=spec.get("knowledge"),
            fault_trigger=spec.get("fault_trigger"),
            model_id=spec.get("model_id", "sim"),
        )
    if kind == "http":
        return HttpChatBackend(
            endpoint=spec["endpoint"],
            model=spec["model"],
            api_key_env=spec.get("api_key_env", "ASKDB_API_KEY"),
            timeout_s=float(spec.get("timeout_s", 30.0)),
        )
    raise ValueError(f"unknown backend kind: {kind!r}")


# -- request bodies ------------------------------------------------------------


class QueryBody(BaseModel):
    dataset_id: str
    question: str
    strategy: str | None = None
    k: int | None = None
    n: int | None = None


class ExampleBody(BaseModel):
    question: str
    sql: str
    tags: list[str] = []


class OnboardBody(BaseModel):
    # "schema" shadows a BaseModel attribute, so it rides in under an alias.
    dataset_id: str
    schema_def: dict | None = Field(default=None, alias="schema")
    template: dict
    examples: list[ExampleBody]
    db_file: str
    allowed_roles: list[str] | None = None

    model_config = {"populate_by_name": True}


# -- app factory ---------------------------------------------------------------


def create_app(
    config: ServiceConfig, pipeline: QueryPipeline | None = None
) -> FastAPI:
    if pipeline is None:
        pipeline = QueryPipeline(
            backend=build_backend(config.backend),
            config=PipelineConfig(
                default_strategy=config.default_strategy,
                default_k=config.default_k,
                default_n=config.default_n,
                row_limit=config.row_limit,
                timeout_ms=config.timeout_ms,
            ),
        )

    app = FastAPI(title="askdb", docs_url=None, redoc_url=None)
    app.state.pipeline = pipeline
    app.state.policy = dict(config.policy)
    policy_lock = threading.Lock()

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status_code, content=exc.payload)

    @app.exception_handler(RequestValidationError)
    async def _body_validation_error(
        _request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        # Keep the one-object error shape for malformed bodies too.
        detail = [
            {"loc": [str(part) for part in err.get("loc", ())], "msg": err.get("msg", "")}
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=422, content={"error": "invalid_request", "detail": detail}
        )

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        started = time.monotonic()
        response = await call_next(request)
        logger.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "duration_ms": round((time.monotonic() - started) * 1000.0, 2),
                },
                sort_keys=True,
            )
        )
        return response

    def authenticate(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token.strip():
            raise ApiError(401, {"error": "unauthorized"})
        principal = config.tokens.get(token.strip())
        if principal is None:
            raise ApiError(401, {"error": "unauthorized"})
        return principal

    def authorize_query(principal: Principal, dataset_id: str) -> None:
        # Non-admins get an identical 403 for "exists but not yours" and
        # "does not exist", so probing for dataset ids yields nothing.
        if principal.is_admin:
            if not pipeline.has_dataset(dataset_id):
                raise ApiError(404, {"error": "unknown_dataset"})
            return
        with policy_lock:
            allowed = app.state.policy.get(dataset_id, frozenset())
        if not pipeline.has_dataset(dataset_id) or not (principal.roles & allowed):
            raise ApiError(403, {"error": "access_denied"})

    @app.get("/v1/health")
    def health() -> dict:
        snapshot = pipeline.health()
        return {"status": "ok", **snapshot}

    @app.post("/v1/datasets")
    def onboard_dataset(body: OnboardBody, request: Request) -> dict:
        principal = authenticate(request)
        if not principal.is_admin:
            raise ApiError(403, {"error": "access_denied"})
        if body.schema_def is None:
            raise ApiError(422, {"error": "invalid_request", "detail": "schema missing"})
        db_path = Path(body.db_file)
        if not db_path.exists():
            raise ApiError(
                422,
                {
                    "error": "onboarding_failed",
                    "diagnostics": [{"error": f"db_file not found: {body.db_file}"}],
                },
            )
        try:
            schema = SchemaDescriptor.from_dict(
                {"dataset_id": body.dataset_id, "tables": body.schema_def["tables"]}
            )
            template = PromptTemplate(
                dataset_id=body.dataset_id,
                system_instructions=body.template["system_instructions"],
                demonstration_header=body.template.get(
                    "demonstration_header", "Examples:"
                ),
                question_prefix=body.template.get("question_prefix", "Question:"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(
                422, {"error": "invalid_request", "detail": str(exc)}
            ) from exc
        bundle = DatasetBundle(
            dataset_id=body.dataset_id,
            schema=schema,
            template=template,
            examples=tuple(
                (ex.question, ex.sql, tuple(ex.tags)) for ex in body.examples
            ),
            db_path=db_path,
        )
        try:
            added = pipeline.onboard(bundle)
        except DuplicateDatasetError:
            raise ApiError(409, {"error": "duplicate_dataset"}) from None
        except OnboardingError as exc:
            raise ApiError(
                422,
                {"error": "onboarding_failed", "diagnostics": exc.diagnostics},
            ) from None
        if body.allowed_roles is not None:
            with policy_lock:
                app.state.policy[body.dataset_id] = frozenset(body.allowed_roles)
        return {"dataset_id": body.dataset_id, "entries_added": added}

    @app.post("/v1/query")
    def run_query(body: QueryBody, request: Request) -> dict:
        principal = authenticate(request)
        authorize_query(principal, body.dataset_id)
        strategy = None
        if body.strategy is not None:
            try:
                strategy = Strategy(body.strategy.upper())
            except ValueError:
                raise ApiError(
                    422,
                    {"error": "invalid_request", "detail": f"unknown strategy {body.strategy!r}"},
                ) from None
        if body.k is not None and body.k < 0:
            raise ApiError(422, {"error": "invalid_request", "detail": "k must be >= 0"})
        if body.n is not None and body.n < 1:
            raise ApiError(422, {"error": "invalid_request", "detail": "n must be >= 1"})

        result = pipeline.answer(
            dataset_id=body.dataset_id,
            question_text=body.question,
            strategy=strategy,
            k=body.k,
            n=body.n,
        )
        if result.error_kind == "generation":
            raise ApiError(502, {"error": "generation_failed", "detail": result.error})
        if result.error_kind == "sanitizer":
            verdict = result.verdict
            raise ApiError(
                422,
                {
                    "error": "sanitization_rejected",
                    "sql": result.sql,
                    "verdict": {
                        "allowed": False,
                        "violations": [
                            {"rule": v.rule, "detail": v.detail, "offset": v.offset}
                            for v in (verdict.violations if verdict else ())
                        ],
                    },
                    "warnings": list(result.warnings),
                },
            )
        if result.error_kind == "timeout":
            raise ApiError(504, {"error": "execution_timeout", "sql": result.sql})
        if result.error_kind == "execution":
            raise ApiError(
                400, {"error": "execution_failed", "sql": result.sql, "detail": result.error}
            )
        table = result.table
        assert table is not None
        return {
            "dataset_id": body.dataset_id,
            "sql": result.sql,
            "table": {
                "columns": list(table.columns),
                "rows": [list(row) for row in table.rows],
                "row_count": table.row_count,
                "truncated": table.truncated,
            },
            "demonstrations_used": list(result.demonstration_ids),
            "timings_ms": dict(result.timings),
            "warnings": list(result.warnings),
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Onboard configured datasets and block serving HTTP."""
    import uvicorn

    from .corpus import load_dataset_dir

    app = create_app(config)
    pipeline: QueryPipeline = app.state.pipeline
    for directory in config.dataset_dirs:
        bundle = load_dataset_dir(directory)
        pipeline.onboard(bundle)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


__all__ = [
    "ADMIN_ROLE",
    "ApiError",
    "Principal",
    "ServiceConfig",
    "build_backend",
    "create_app",
    "load_service_config",
    "serve",
]
