"""Local HTTP service around one labeled checkpoint.

Exposes the interactive segmentation loop: browse views, render the scene or
a label subset, pick labels inside a clicked region, register an extraction,
and render the extracted object from bundle views or an explicit pose.

    GET  /health                            version + scene stats
    GET  /views                             camera ids, intrinsics, poses
    GET  /render?view=ID[&labels=csv]       PNG (subset render when labels given)
    GET  /labelmap?view=ID                  16-bit PNG of the rendered label map
    POST /pick {view, polygon|pixels}       labels inside the region, largest first
    POST /extract {labels}                  register an extraction session
    GET  /render_extracted?object_id&view   PNG of the extracted Gaussians
    POST /render_extracted {object_id, rotation, translation, ...}
                                            same, at an explicit pose

Coordinates on the wire are image coordinates: polygon vertices and pixels
are [x, y] pairs (x = column). Errors are JSON {code, message}: unknown
view/label/object -> 404, malformed input -> 400. All image endpoints are
pure functions of (checkpoint, query); the only state is the extraction
session table, and replaying requests reproduces identical bytes.
"""

from __future__ import annotations

import io
from typing import Dict, List, Optional, Tuple

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from PIL import Image, ImageDraw
from pydantic import BaseModel, Field

from . import __version__
from .datasets import SceneBundle, _save_image_u8, _save_labels_u16, \
    adopt_bundle_background, load_bundle, load_checkpoint
from .lifting import extract, pick_labels
from .metrics import predicted_label_map
from .rasterize import render
from .scene import Camera, GaussianScene, LabelMap


class PickRequest(BaseModel):
    view: str
    polygon: Optional[List[Tuple[float, float]]] = None
    pixels: Optional[List[Tuple[int, int]]] = None


class ExtractRequest(BaseModel):
    labels: List[int] = Field(min_length=1)


class PoseRenderRequest(BaseModel):
    object_id: str
    rotation: List[float] = Field(min_length=9, max_length=9)
    translation: List[float] = Field(min_length=3, max_length=3)
    width: Optional[int] = None
    height: Optional[int] = None
    fx: Optional[float] = None
    fy: Optional[float] = None
    cx: Optional[float] = None
    cy: Optional[float] = None


def _abort(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code,
                                                    "message": message})


def _png(writer, array) -> Response:
    buf = io.BytesIO()
    writer(buf, array)
    return Response(content=buf.getvalue(), media_type="image/png")


def create_app(scene: GaussianScene, bundle: SceneBundle) -> FastAPI:
    app = FastAPI(title="labelsplat segmentation service", version=__version__)
    views = {v.camera.id: v for v in bundle.views}
    splits = {v.camera.id: s for v, s in zip(bundle.views, bundle.splits)}
    present = {int(k) for k in np.unique(scene.labels)}
    extractions: Dict[str, Tuple[int, ...]] = {}
    # rendered label maps are pure functions of the immutable checkpoint;
    # cached so /labelmap and /pick do not re-render per request
    labelmap_cache: Dict[str, np.ndarray] = {}

    @app.exception_handler(HTTPException)
    async def http_error(request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else \
            {"code": "error", "message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()))
        return JSONResponse(status_code=400, content={
            "code": "bad_request",
            "message": f"{where}: {first.get('msg', 'invalid body')}"})

    def _view(view_id: str):
        if view_id not in views:
            _abort(404, "unknown_view",
                   f"view {view_id!r} not in bundle "
                   f"(views: {sorted(views)})")
        return views[view_id]

    def _labels_arg(csv: str) -> List[int]:
        try:
            labels = sorted({int(p) for p in csv.split(",") if p.strip()})
        except ValueError:
            _abort(400, "bad_request", f"labels must be a comma-separated "
                                       f"id list, got {csv!r}")
        if not labels:
            _abort(400, "bad_request", "empty label list")
        return labels

    def _require_present(labels: List[int]):
        unknown = [k for k in labels if k not in present]
        if unknown:
            _abort(404, "unknown_label",
                   f"labels {unknown} not in the checkpoint "
                   f"(present: {sorted(present)})")

    def _rendered_ids(view_id: str) -> np.ndarray:
        if view_id not in labelmap_cache:
            labelmap_cache[view_id] = predicted_label_map(
                scene, views[view_id].camera)
        return labelmap_cache[view_id]

    @app.get("/health")
    def health():
        uniq, counts = np.unique(scene.labels, return_counts=True)
        return {"version": __version__, "gaussians": len(scene),
                "views": len(views),
                "labels": {str(int(k)): int(c)
                           for k, c in zip(uniq, counts)},
                "extractions": len(extractions)}

    @app.get("/views")
    def list_views():
        out = []
        for v in bundle.views:
            c = v.camera
            out.append({"id": c.id, "width": c.width, "height": c.height,
                        "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
                        "rotation": [float(x) for x in c.rotation.reshape(-1)],
                        "translation": [float(x) for x in c.translation],
                        "split": splits[c.id]})
        return {"views": out}

    @app.get("/render")
    def render_view(view: str, labels: Optional[str] = None):
        record = _view(view)
        target = scene
        if labels is not None:
            ids = _labels_arg(labels)
            _require_present(ids)
            target = extract(scene, ids)
        return _png(_save_image_u8, render(target, record.camera).color)

    @app.get("/labelmap")
    def labelmap(view: str):
        _view(view)
        return _png(_save_labels_u16, _rendered_ids(view))

    @app.post("/pick")
    def pick(req: PickRequest):
        record = _view(req.view)
        if req.polygon is None and req.pixels is None:
            _abort(400, "bad_request", "provide a polygon or a pixel list")
        h, w = record.camera.height, record.camera.width
        mask = None
        if req.polygon is not None:
            if len(req.polygon) < 3:
                _abort(400, "bad_request", "polygon needs at least 3 vertices")
            img = Image.new("L", (w, h), 0)
            ImageDraw.Draw(img).polygon(
                [(float(x), float(y)) for x, y in req.polygon], fill=255)
            mask = np.asarray(img) > 0
        pixels = None
        if req.pixels is not None:
            pixels = [(y, x) for x, y in req.pixels]
        counts = pick_labels(LabelMap(_rendered_ids(req.view)),
                             mask=mask, pixels=pixels)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return {"labels": [{"id": k, "pixel_count": c} for k, c in ordered]}

    @app.post("/extract")
    def extract_session(req: ExtractRequest):
        labels = tuple(sorted(set(req.labels)))
        _require_present(list(labels))
        object_id = "obj-" + "-".join(str(k) for k in labels)
        extractions[object_id] = labels
        picked = np.isin(scene.labels, labels)
        # centroid anchors client-side orbit poses around the object
        return {"object_id": object_id, "labels": list(labels),
                "gaussians": int(picked.sum()),
                "centroid": [float(c) for c in scene.means[picked].mean(axis=0)]}

    def _extraction(object_id: str) -> GaussianScene:
        if object_id not in extractions:
            _abort(404, "unknown_object",
                   f"no extraction session {object_id!r}; POST /extract first")
        return extract(scene, extractions[object_id])

    @app.get("/render_extracted")
    def render_extracted(object_id: str, view: str):
        record = _view(view)
        sub = _extraction(object_id)
        return _png(_save_image_u8, render(sub, record.camera).color)

    @app.post("/render_extracted")
    def render_extracted_pose(req: PoseRenderRequest):
        sub = _extraction(req.object_id)
        base = bundle.views[0].camera
        try:
            camera = Camera(
                id="pose",
                width=req.width or base.width,
                height=req.height or base.height,
                fx=req.fx or base.fx, fy=req.fy or base.fy,
                cx=base.cx if req.cx is None else req.cx,
                cy=base.cy if req.cy is None else req.cy,
                rotation=np.asarray(req.rotation,
                                    dtype=np.float64).reshape(3, 3),
                translation=np.asarray(req.translation, dtype=np.float64))
        except ValueError as exc:
            _abort(400, "bad_request", str(exc))
        return _png(_save_image_u8, render(sub, camera).color)

    return app


def run_service(checkpoint_path, bundle_path, host: str = "127.0.0.1",
                port: int = 7878) -> None:
    """Load a checkpoint + bundle and serve until interrupted."""
    import uvicorn

    bundle = load_bundle(bundle_path)
    scene = adopt_bundle_background(load_checkpoint(checkpoint_path), bundle)
    app = create_app(scene, bundle)
    uvicorn.run(app, host=host, port=port)
