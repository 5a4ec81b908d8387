"""HTTP JSON API over the query layer.

Every data endpoint resolves the current snapshot once, answers from it, and
wraps the query payload as ``{"snapshot_version": N, "data": ...}`` so a
client can prove which version served it; the ingest accounting summary rides
along in response headers. Errors always come back as a single
``{"error": {"status", "code", "message"}}`` object.

Enum-valued query parameters are case-insensitive and validated exhaustively;
an unknown *value for a filter* (say, a course id that matches nothing) is
not an error, just an empty result.
"""

from __future__ import annotations

import hmac

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from dropscope import __version__
from dropscope.config import ServiceConfig
from dropscope.ingest import IngestError, SnapshotStore
from dropscope.metrics import FailureKind
from dropscope.model import NOT_INFORMED, Situation, Snapshot
from dropscope.queries import (
    CATEGORY_GROUPS,
    CrMode,
    FilterSet,
    RankOrder,
    RateOrder,
    attendance_bands,
    category_breakdown,
    course_situation_ranking,
    cr_bands,
    discipline_failure_ranking,
    failure_histogram,
    situation_counts,
    tda_histogram,
)

API_PREFIX = "/api/v1"

_STATUS_CODES = {
    400: "invalid_argument",
    401: "unauthorized",
    404: "not_found",
    405: "method_not_allowed",
    422: "unprocessable",
    500: "internal",
}


class ApiFail(Exception):
    """Carries one error payload to the exception handler."""

    def __init__(self, status: int, message: str, code: str | None = None) -> None:
        self.status = status
        self.code = code or _STATUS_CODES.get(status, "error")
        self.message = message
        super().__init__(message)


def _error_response(status: int, message: str, code: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={
            "error": {
                "status": status,
                "code": code or _STATUS_CODES.get(status, "error"),
                "message": message,
            }
        },
    )


def _headers(snapshot: Snapshot) -> dict[str, str]:
    return {
        "X-Snapshot-Version": str(snapshot.version),
        "X-Ingest-Summary": snapshot.ingest_report.summary(),
    }


def _respond(snapshot: Snapshot, data, note: str | None = None) -> JSONResponse:
    body: dict = {"snapshot_version": snapshot.version, "data": data}
    if note is not None:
        body["note"] = note
    return JSONResponse(content=body, headers=_headers(snapshot))


def _enum_param(raw: str | None, name: str, tokens: dict[str, object], default=None):
    if raw is None:
        if default is not None:
            return default
        raise ApiFail(400, f"missing required parameter {name!r}")
    value = tokens.get(raw.strip().lower())
    if value is None:
        allowed = ", ".join(sorted(tokens))
        raise ApiFail(400, f"unknown {name} {raw!r}; expected one of: {allowed}")
    return value


def _int_param(raw: str | None, name: str, default: int) -> int:
    if raw is None:
        return default
    try:
        return int(raw, 10)
    except ValueError:
        raise ApiFail(400, f"{name} must be an integer, got {raw!r}") from None


_SITUATIONS = {s.value: s for s in (Situation.GRADUATED, Situation.IN_PROGRESS, Situation.DROPOUT)}
_RANK_ORDERS = {order.value: order for order in RankOrder}
_RATE_ORDERS = {order.value: order for order in RateOrder}
_CR_MODES = {mode.value: mode for mode in CrMode}
_FAILURE_KINDS = {kind.value: kind for kind in FailureKind}


def _filters_from_query(request: Request) -> FilterSet:
    params = request.query_params
    raw_entry_year = params.get("entry_year") or None
    entry_year = None
    if raw_entry_year is not None:
        try:
            entry_year = int(raw_entry_year, 10)
        except ValueError:
            raise ApiFail(400, f"entry_year must be an integer, got {raw_entry_year!r}") from None
    return FilterSet(
        course_id=params.get("course") or None,
        entry_year=entry_year,
        income_band=params.get("income_band") or None,
        birth_city=params.get("birth_city") or None,
        quota_type=params.get("quota_type") or None,
        high_school_type=params.get("high_school_type") or None,
    )


def create_app(store: SnapshotStore, config: ServiceConfig) -> FastAPI:
    """Build the application around an already-loaded snapshot store."""
    app = FastAPI(title="dropscope", version=__version__, docs_url=None, redoc_url=None)

    if config.cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["GET", "POST"],
            allow_headers=["Authorization", "Content-Type"],
        )

    @app.exception_handler(ApiFail)
    async def _handle_api_fail(_request: Request, exc: ApiFail) -> JSONResponse:
        return _error_response(exc.status, exc.message, exc.code)

    @app.exception_handler(StarletteHTTPException)
    async def _handle_http(_request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return _error_response(exc.status_code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _handle_validation(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_response(400, str(exc.errors()))

    @app.exception_handler(Exception)
    async def _handle_crash(_request: Request, exc: Exception) -> JSONResponse:
        return _error_response(500, f"internal error: {exc}")

    @app.get(f"{API_PREFIX}/health")
    def health() -> JSONResponse:
        snapshot = store.current
        return JSONResponse(
            content={"status": "ok", "snapshot_version": snapshot.version},
            headers=_headers(snapshot),
        )

    @app.get(f"{API_PREFIX}/meta")
    def meta() -> JSONResponse:
        snapshot = store.current
        def values_of(attribute: str) -> list[str]:
            return sorted({profile.attribute(attribute) for profile in snapshot.students})

        data = {
            "courses": snapshot.course_ids(),
            "entry_years": sorted(
                {p.entry_year for p in snapshot.students if p.entry_year is not None}
            ),
            "filter_values": {
                "income_band": values_of("income_band"),
                "birth_city": values_of("birth_city"),
                "quota_type": values_of("quota_type"),
                "high_school_type": values_of("high_school_type"),
            },
            "category_groups": {
                group: list(indexes) for group, indexes in CATEGORY_GROUPS.items()
            },
            "situations": [s.value for s in _SITUATIONS.values()],
            "not_informed_label": NOT_INFORMED,
            "ingest": {
                "rows_read": snapshot.ingest_report.rows_read,
                "rows_kept": snapshot.ingest_report.rows_kept,
                "rows_deduplicated": snapshot.ingest_report.rows_deduplicated,
                "rows_rejected": snapshot.ingest_report.rows_rejected,
                "students_built": snapshot.ingest_report.students_built,
                "cohorts_kept": snapshot.ingest_report.cohorts_kept,
            },
        }
        return _respond(snapshot, data)

    @app.get(f"{API_PREFIX}/overview/situations")
    def overview_situations(request: Request) -> JSONResponse:
        snapshot = store.current
        filters = _filters_from_query(request)
        distribution = situation_counts(snapshot, filters)
        note = None
        if distribution.total == 0 and not filters.is_empty():
            note = "no matching category"
        return _respond(snapshot, distribution.payload(), note)

    @app.get(f"{API_PREFIX}/overview/course-ranking")
    def overview_course_ranking(request: Request) -> JSONResponse:
        snapshot = store.current
        params = request.query_params
        situation = _enum_param(params.get("situation"), "situation", _SITUATIONS)
        order = _enum_param(params.get("order"), "order", _RANK_ORDERS, RankOrder.TOP)
        limit = _int_param(params.get("limit"), "limit", 15)
        if limit < 1:
            raise ApiFail(400, "limit must be at least 1")
        ranking = course_situation_ranking(snapshot, situation, order, limit)
        return _respond(snapshot, ranking.payload())

    @app.get(f"{API_PREFIX}/tda/histogram")
    def tda_histogram_endpoint() -> JSONResponse:
        snapshot = store.current
        return _respond(snapshot, tda_histogram(snapshot).payload())

    @app.get(f"{API_PREFIX}/dropouts/attendance-bands")
    def dropout_attendance_bands(request: Request) -> JSONResponse:
        snapshot = store.current
        course = request.query_params.get("course") or None
        return _respond(snapshot, attendance_bands(snapshot, course).payload())

    @app.get(f"{API_PREFIX}/dropouts/cr-bands")
    def dropout_cr_bands(request: Request) -> JSONResponse:
        snapshot = store.current
        params = request.query_params
        course = params.get("course") or None
        mode = _enum_param(params.get("mode"), "mode", _CR_MODES, CrMode.ABSOLUTE)
        return _respond(snapshot, cr_bands(snapshot, course, mode).payload())

    @app.get(f"{API_PREFIX}/dropouts/failure-histogram")
    def dropout_failure_histogram(request: Request) -> JSONResponse:
        snapshot = store.current
        params = request.query_params
        course = params.get("course") or None
        kind = _enum_param(params.get("kind"), "kind", _FAILURE_KINDS, FailureKind.ALL)
        return _respond(snapshot, failure_histogram(snapshot, course, kind).payload())

    @app.get(f"{API_PREFIX}/dropouts/categories")
    def dropout_categories(request: Request) -> JSONResponse:
        snapshot = store.current
        params = request.query_params
        group = _enum_param(
            params.get("group"), "group", {name: name for name in CATEGORY_GROUPS}
        )
        index_raw = params.get("index")
        if index_raw is None:
            raise ApiFail(400, "missing required parameter 'index'")
        index = index_raw.strip().lower()
        if index not in CATEGORY_GROUPS[group]:
            allowed = ", ".join(CATEGORY_GROUPS[group])
            raise ApiFail(
                400, f"index {index_raw!r} is not part of group {group!r}; expected one of: {allowed}"
            )
        course = params.get("course") or None
        return _respond(snapshot, category_breakdown(snapshot, group, index, course).payload())

    @app.get(f"{API_PREFIX}/disciplines/ranking")
    def disciplines_ranking(request: Request) -> JSONResponse:
        snapshot = store.current
        params = request.query_params
        course = params.get("course") or None
        order = _enum_param(params.get("order"), "order", _RATE_ORDERS, RateOrder.HIGHEST)
        limit = _int_param(params.get("limit"), "limit", 10)
        try:
            ranking = discipline_failure_ranking(snapshot, course, order, limit)
        except ValueError as exc:
            raise ApiFail(400, str(exc)) from None
        return _respond(snapshot, ranking.payload())

    @app.post(f"{API_PREFIX}/admin/reload")
    def admin_reload(request: Request) -> JSONResponse:
        authorization = request.headers.get("Authorization", "")
        scheme, _, token = authorization.partition(" ")
        if scheme.lower() != "bearer" or not hmac.compare_digest(
            token.strip(), config.admin_token
        ):
            raise ApiFail(401, "missing or invalid bearer token")
        try:
            snapshot = store.reload()
        except IngestError as exc:
            raise ApiFail(422, f"reload rejected, previous snapshot kept: {exc}") from None
        return JSONResponse(
            content={"snapshot_version": snapshot.version}, headers=_headers(snapshot)
        )

    return app


def build_app(config: ServiceConfig) -> FastAPI:
    """Load the snapshot from configured paths and wire up the app.

    Raises IngestError if the initial load fails; the caller decides whether
    that kills the process (the CLI does).
    """
    store = SnapshotStore(config.activity_path, config.cohort_path, config.mapping_path)
    return create_app(store, config)
