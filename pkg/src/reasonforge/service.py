"""HTTP review service for the annotation workflow.

Read-mostly JSON API over the dataset store: browse trajectories, fetch
full detail, submit verdicts, read stats, and serve content-addressed
images. Verdicts delegate to the store's consensus rule; the service never
triggers pipeline runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import trajectory as tj
from .store import DatasetStore, Decision, VerificationStatus
from .trajectory import Mode, SegmentKind


class VerdictBody(BaseModel):
    decision: Literal["accept", "reject"]
    notes: str = ""


def load_tokens(path: str | Path) -> dict[str, str]:
    """Token -> annotator_id map from a static JSON file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise ValueError("tokens file must map token strings to annotator ids")
    return data


def create_app(
    store: DatasetStore,
    tokens: dict[str, str],
    images_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
    allow_overwrite: bool = False,
) -> FastAPI:
    app = FastAPI(title="reasonforge review service")
    image_root = Path(images_dir) if images_dir else None

    def annotator(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            token = header[7:].strip()
            if token in tokens:
                return tokens[token]
        raise HTTPException(status_code=401, detail="invalid or missing token")

    def image_url(ref: tj.ImageRef) -> str:
        return f"/images/{ref.content_hash}"

    def summary(traj: tj.Trajectory) -> dict[str, Any]:
        thumbnails = [
            image_url(seg.payload)
            for seg in traj.segments
            if seg.kind == SegmentKind.GENERATION
        ]
        return {
            "id": traj.id,
            "mode": traj.mode.value,
            "instruction": traj.instruction,
            "category": traj.category,
            "thumbnails": thumbnails,
            "status": store.status_of(traj.id).value,
        }

    @app.get("/api/trajectories")
    def list_trajectories(
        status: str | None = None,
        mode: str | None = None,
        cursor: int | None = None,
        limit: int = 20,
        _annotator: str = Depends(annotator),
    ) -> dict[str, Any]:
        try:
            mode_filter = Mode(mode) if mode else None
            status_filter = VerificationStatus(status) if status else None
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        items, next_cursor = store.list(
            mode=mode_filter, status=status_filter, cursor=cursor, limit=limit
        )
        return {
            "items": [summary(traj) for traj in items],
            "next_cursor": next_cursor,
        }

    @app.get("/api/trajectories/{trajectory_id}")
    def get_trajectory(
        trajectory_id: str, _annotator: str = Depends(annotator)
    ) -> dict[str, Any]:
        try:
            traj = store.get(trajectory_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown trajectory") from None
        record = tj.to_record(traj)
        record["verification"] = store.verification(trajectory_id).to_json()
        record["image_urls"] = {
            seg.payload.content_hash: image_url(seg.payload)
            for seg in traj.segments
            if seg.kind == SegmentKind.GENERATION
        }
        for ref in traj.references:
            record["image_urls"][ref.content_hash] = image_url(ref)
        return record

    @app.post("/api/trajectories/{trajectory_id}/verdict")
    def post_verdict(
        trajectory_id: str,
        body: VerdictBody,
        annotator_id: str = Depends(annotator),
    ) -> dict[str, Any]:
        try:
            current = store.status_of(trajectory_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown trajectory") from None
        if current == VerificationStatus.REJECTED and not allow_overwrite:
            raise HTTPException(status_code=409, detail="trajectory already rejected")
        record = store.record_verdict(
            trajectory_id, annotator_id, Decision(body.decision), body.notes
        )
        return record.to_json()

    @app.get("/api/stats")
    def get_stats(_annotator: str = Depends(annotator)) -> dict[str, Any]:
        payload = store.stats().to_json()
        payload["overwrite_enabled"] = allow_overwrite
        return payload

    @app.get("/images/{content_hash}")
    def get_image(content_hash: str) -> FileResponse:
        if image_root is None:
            raise HTTPException(status_code=404, detail="no image directory configured")
        matches = sorted(image_root.glob(content_hash + "*"))
        if not matches:
            raise HTTPException(status_code=404, detail="unknown image")
        return FileResponse(
            matches[0],
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
