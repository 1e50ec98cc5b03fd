"""HTTP inference service.

POST /edit   {image_b64_png, target_text, mask_b64_png?}
             -> {edited_b64_png, estimated_mask_b64_png, timing_ms}
POST /mask   {image_b64_png} -> {soft_mask_b64_png}
GET  /healthz -> model/version info (503 until weights are loaded)
GET  /ui     static front-end assets when built

Weights are loaded once and shared read-only across requests.
"""

from __future__ import annotations

import base64
import io
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from . import imutil
from .errors import GlyphOverflow
from .pipeline import EditPipeline, EditRequest

import os

UI_DIR = Path(os.environ.get(
    "FAST_UI_DIR", Path(__file__).resolve().parents[2] / "frontend" / "dist"))


class EditPayload(BaseModel):
    image_b64_png: str
    target_text: str
    mask_b64_png: str | None = None


class MaskPayload(BaseModel):
    image_b64_png: str


def _decode_image(b64: str, mode: str = "RGB") -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert(mode))
    except Exception:
        raise HTTPException(status_code=400, detail="malformed image payload")
    return imutil.from_uint8(arr)


def _encode_png(arr_uint8: np.ndarray, mode: str) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr_uint8, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def create_app(ckpt_dir=None, binarize_mask: bool = False) -> FastAPI:
    app = FastAPI(title="scene-text-edit")
    state = {"pipeline": None, "error": None}

    def load():
        if state["pipeline"] is None and state["error"] is None:
            try:
                state["pipeline"] = EditPipeline(ckpt_dir, binarize_mask=binarize_mask)
            except Exception as e:
                state["error"] = str(e)

    if ckpt_dir is not None:
        load()

    def pipeline() -> EditPipeline:
        if state["pipeline"] is None:
            raise HTTPException(status_code=503,
                                detail=state["error"] or "model weights not loaded")
        return state["pipeline"]

    @app.get("/healthz")
    def healthz():
        if state["pipeline"] is None:
            return JSONResponse(status_code=503, content={
                "status": "loading", "error": state["error"]})
        return {"status": "ok", "checkpoint": state["pipeline"].hash,
                "version": "0.1.0"}

    @app.post("/edit")
    def edit(payload: EditPayload):
        pipe = pipeline()
        t0 = time.monotonic()
        image = _decode_image(payload.image_b64_png)
        mask = None
        if payload.mask_b64_png:
            mask = _decode_image(payload.mask_b64_png, mode="L")
        if not payload.target_text:
            raise HTTPException(status_code=400, detail="target_text must be nonempty")
        try:
            result = pipe.edit(EditRequest(image=image, target_text=payload.target_text,
                                           source_mask=mask))
        except GlyphOverflow as e:
            raise HTTPException(status_code=422, detail=str(e))
        edited_png = _encode_png(imutil.to_uint8(result.edited), "RGB")
        mask_png = _encode_png(
            np.where(result.source_mask[0] > 0, 255, 0).astype(np.uint8), "L")
        return {"edited_b64_png": edited_png,
                "estimated_mask_b64_png": mask_png,
                "timing_ms": round((time.monotonic() - t0) * 1000.0, 2)}

    @app.post("/mask")
    def mask(payload: MaskPayload):
        pipe = pipeline()
        image = _decode_image(payload.image_b64_png)
        soft = pipe.estimate_soft_mask(image)
        soft_png = _encode_png(np.round(soft * 255.0).astype(np.uint8), "L")
        return {"soft_mask_b64_png": soft_png}

    if UI_DIR.is_dir():
        app.mount("/ui", StaticFiles(directory=str(UI_DIR), html=True), name="ui")

    return app


def serve(ckpt_dir, address: str = "127.0.0.1:8000", binarize_mask: bool = False):
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    host, _, port = address.partition(":")
    app = create_app(ckpt_dir, binarize_mask=binarize_mask)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
