"""HTTP surface over the adaptation service.

Thin by design: every route parses JSON, delegates to AdaptationService and
maps domain errors onto status codes (400 validation, 404 unknown ids, 409
illegal transitions). State lives in the service, never in the app object.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import (
    AdaptForgeError,
    IllegalTransitionError,
    UnknownComponentError,
    UnknownJobError,
    UnknownTemplateError,
    UnmappedPictogramError,
    ValidationError,
)
from .model import DomainInput, UserProfile
from .service import AdaptationJob, AdaptationService

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR = (
    (UnknownJobError, 404),
    (UnknownComponentError, 404),
    (UnknownTemplateError, 404),
    (UnmappedPictogramError, 404),
    (IllegalTransitionError, 409),
    (ValidationError, 400),
)


def _error_status(exc: AdaptForgeError) -> int:
    for klass, code in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return code
    return 500


def _job_payload(job: AdaptationJob) -> dict:
    served = job.servable_schema()
    payload = {
        "jobId": job.job_id,
        "status": job.status.value,
        "schema": served.to_dict() if served else None,
        "humanApproved": job.human_approved,
        "error": job.error,
        "attempts": len(job.reports),
        "gateReports": [r.to_dict() for r in job.reports],
        "latestGateReport": job.reports[-1].to_dict() if job.reports else None,
    }
    if job.candidate is not None:
        payload["candidate"] = job.candidate.to_dict()
    return payload


def create_app(service: AdaptationService) -> FastAPI:
    app = FastAPI(title="adapt-forge", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.exception_handler(AdaptForgeError)
    async def _domain_error(request: Request, exc: AdaptForgeError):
        return JSONResponse(
            status_code=_error_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.middleware("http")
    async def _require_token(request: Request, call_next):
        # static-token guard; /health stays open for liveness probes
        token = service.config.api_token
        if token and request.url.path != "/health":
            header = request.headers.get("authorization", "")
            if header != f"Bearer {token}":
                return JSONResponse(
                    status_code=401,
                    content={
                        "error": "Unauthorized",
                        "detail": "missing or bad token",
                    },
                )
        return await call_next(request)

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "backend": service.backend.descriptor.backend_id,
            "rules": len(service.rule_set.rules),
        }

    @app.post("/adaptations", status_code=202)
    async def submit(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        profile = UserProfile.from_dict(body.get("profile") or {})
        input = DomainInput.from_dict(body.get("input") or {})
        job_id = service.submit(profile, input)
        return {"jobId": job_id, "status": "Pending"}

    @app.get("/adaptations/{job_id}")
    async def get_job(job_id: str):
        return _job_payload(service.get_job(job_id))

    @app.get("/adaptations/{job_id}/trace")
    async def get_trace(job_id: str):
        records = service.trace_for_job(job_id)
        return {"jobId": job_id, "records": [r.to_dict() for r in records]}

    @app.get("/adaptations/{job_id}/explanation")
    async def get_explanation(job_id: str):
        return {"jobId": job_id, "activeRules": service.activation_explanation(job_id)}

    @app.get("/review-queue")
    async def review_queue():
        return {"jobs": [_job_payload(j) for j in service.review_queue()]}

    @app.post("/adaptations/{job_id}/review")
    async def review(job_id: str, request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        action = body.get("action")
        if not isinstance(action, str):
            raise ValidationError("review action is required")
        job = service.apply_review(
            job_id,
            action,
            reviewer=str(body.get("reviewer") or "reviewer"),
            edited_text=body.get("editedText"),
            rationale=str(body.get("rationale") or ""),
        )
        return _job_payload(job)

    @app.post("/feedback", status_code=201)
    async def feedback(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        rating = body.get("comprehensionRating")
        if not isinstance(rating, int) or isinstance(rating, bool):
            raise ValidationError("comprehensionRating must be an integer")
        events = body.get("navigationEvents") or []
        if not isinstance(events, list):
            raise ValidationError("navigationEvents must be a list")
        feedback_id = service.record_feedback(
            job_id=str(body.get("jobId") or ""),
            component_id=str(body.get("componentId") or ""),
            comprehension_rating=rating,
            navigation_events=events,
            comment=str(body.get("comment") or ""),
        )
        return {"feedbackId": feedback_id}

    @app.get("/compliance-report")
    async def compliance_report(format: str = "full"):
        if format not in ("full", "summary"):
            raise ValidationError("format must be 'full' or 'summary'")
        return service.compliance_report(format=format)

    @app.get("/pictograms")
    async def pictogram_manifest():
        return {"pictograms": service.pictograms.manifest()}

    @app.get("/pictograms/{pictogram_id}")
    async def pictogram_asset(pictogram_id: str):
        data = service.pictograms.asset_bytes(pictogram_id)
        return Response(content=data, media_type="image/svg+xml")

    return app
