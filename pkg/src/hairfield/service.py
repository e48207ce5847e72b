"""Local HTTP service exposing the morphable hair model for interactive
coefficient exploration.

Endpoints:
    GET  /api/health      liveness
    GET  /api/meta        model dimensions, singular values, slider range
    GET  /api/samples     ids of bundled fields available for fusion
    POST /api/synthesize  coefficients -> JSON mesh {positions, faces, colors}

Requests are stateless; the model, head, scalp, template, and bundled sample
fields are loaded once and shared read-only. Validation failures return 400
with field-level messages; an extraction that produces no faces returns 422.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .extract import DEFAULT_VOXEL_SIZE
from .field import flip as flip_field, fuse as fuse_fields, load_field
from .mesh import load_mesh, obj_text
from .model import HairCoefficients, load_model, synthesize
from .pipeline import build_rayset, field_to_mesh
from .scalp import load_scalp_spec, load_template

__all__ = ["create_app"]

SLIDER_STDDEVS = 3.0


def _bad_request(errors):
    return JSONResponse(status_code=400, content={"errors": errors})


def _floats(value, name, length, errors):
    try:
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError):
        errors[name] = "must be an array of numbers"
        return None
    if length is not None and len(arr) != length:
        errors[name] = f"expected {length} entries, got {len(arr)}"
        return None
    if not np.isfinite(arr).all():
        errors[name] = "entries must be finite"
        return None
    return arr


def create_app(model_path, head_path, scalp_path, template_path,
               samples_dir=None, static_dir=None):
    model = load_model(model_path)
    head = load_mesh(head_path)
    scalp = load_scalp_spec(scalp_path)
    template = load_template(template_path)
    rays = build_rayset(head, scalp, template)
    if model.template_hash != rays.template_hash:
        raise ValueError("model was built with a different ray template")
    if model.scalp_hash != rays.scalp_hash:
        raise ValueError("model was built with a different scalp spec")

    samples = {}
    if samples_dir is not None:
        for path in sorted(Path(samples_dir).glob("*.srmh")):
            f = load_field(path)
            if f.template_hash == rays.template_hash and f.scalp_hash == rays.scalp_hash:
                samples[path.stem] = f

    app = FastAPI(title="hairfield service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/meta")
    def meta():
        return {
            "n_s": model.n_s,
            "n_r": model.n_r,
            "k": model.k,
            "k_a": model.k_a,
            "sv_shape": model.sv_shape.tolist(),
            "sv_alb": model.sv_alb.tolist(),
            "slider_range": SLIDER_STDDEVS,
        }

    @app.get("/api/samples")
    def sample_ids():
        return {"samples": sorted(samples)}

    @app.post("/api/synthesize")
    def synthesize_mesh(body: dict):
        errors = {}
        beta_shape = _floats(body.get("beta_shape", [0.0] * model.k), "beta_shape", model.k, errors)
        beta_alb = _floats(body.get("beta_alb", [0.0] * model.k_a), "beta_alb", model.k_a, errors)
        beta_s = body.get("beta_s", 1.0)
        if not isinstance(beta_s, (int, float)) or not beta_s > 0:
            errors["beta_s"] = "must be a positive number"
        do_flip = body.get("flip", False)
        if not isinstance(do_flip, bool):
            errors["flip"] = "must be a boolean"
        voxel = body.get("voxel", DEFAULT_VOXEL_SIZE)
        if not isinstance(voxel, (int, float)) or not 0.0 < voxel <= 1.0:
            errors["voxel"] = "must lie in (0, 1]"
        smooth_iters = body.get("smooth", 0)
        if not isinstance(smooth_iters, int) or smooth_iters < 0:
            errors["smooth"] = "must be a non-negative integer"
        sh = None
        if body.get("sh") is not None:
            flat = _floats(body["sh"], "sh", 27, errors)
            if flat is not None:
                sh = flat.reshape(9, 3)
        fmt = body.get("format", "json")
        if fmt not in ("json", "obj"):
            errors["format"] = "must be 'json' or 'obj'"
        fuse_spec = body.get("fuse")
        fuse_fields_list = []
        fuse_weights = []
        if fuse_spec is not None:
            ids = fuse_spec.get("sample_ids", []) if isinstance(fuse_spec, dict) else None
            if ids is None:
                errors["fuse"] = "must be an object with sample_ids and weights"
            else:
                w = _floats(fuse_spec.get("weights", []), "fuse.weights", len(ids), errors)
                missing = [i for i in ids if i not in samples]
                if missing:
                    errors["fuse.sample_ids"] = f"unknown sample ids: {missing}"
                elif w is not None:
                    fuse_fields_list = [samples[i] for i in ids]
                    fuse_weights = list(w)
        if errors:
            return _bad_request(errors)

        coeffs = HairCoefficients(beta_shape, beta_alb, beta_s=float(beta_s))
        field, albedo_vec = synthesize(model, coeffs)
        if fuse_fields_list:
            # the synthesized style keeps weight 1; sample weights add on top
            field = fuse_fields([field] + fuse_fields_list, [1.0] + fuse_weights,
                                mask_aware=True)
            albedo_vec = None
        if do_flip:
            field = flip_field(field, scalp)
            albedo_vec = None
        try:
            mesh = field_to_mesh(field, rays, voxel_size=float(voxel),
                                 smooth_iterations=smooth_iters, sh_coeffs=sh,
                                 albedo_vector=albedo_vec)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"errors": {"mesh": str(exc)}})
        if mesh.n_faces == 0:
            return JSONResponse(status_code=422,
                                content={"errors": {"mesh": "extraction yielded no faces"}})
        if fmt == "obj":
            return PlainTextResponse(
                obj_text(mesh), media_type="text/plain",
                headers={"Content-Disposition": 'attachment; filename="hair.obj"'})
        colors = mesh.colors if mesh.colors is not None else np.ones_like(mesh.vertices)
        return {
            "positions": [float(x) for x in mesh.vertices.ravel()],
            "faces": [int(i) for i in mesh.faces.ravel()],
            "colors": [float(c) for c in colors.ravel()],
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")

    return app
