"""Command-line front door for the hair-field pipeline.

Every command validates its inputs (including template/scalp/field/model hash
compatibility) before doing work and exits nonzero with a single-line
machine-parseable error of the form `error: <Kind>: <message>`.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import fixtures as fx
from .extract import DEFAULT_VOXEL_SIZE
from .field import (
    ExclusionMap,
    analyze as analyze_field,
    apply_exclusion,
    flip as flip_field,
    fuse as fuse_fields,
    load_field,
    perturb as perturb_field,
    save_field,
    scale_thickness,
)
from .mesh import load_mesh, write_mesh
from .metrics import evaluate, mesh_to_points
from .model import HairCoefficients, build_model, load_model, save_model, synthesize
from .pipeline import build_rayset, field_to_mesh
from .scalp import load_scalp_spec, load_template, make_template, write_scalp_spec, write_template

__all__ = ["main"]


def fail(kind, message):
    click.echo(f"error: {kind}: {' '.join(str(message).split())}", err=True)
    sys.exit(1)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SystemExit:
            raise
        except Exception as exc:  # noqa: BLE001 - single-line error contract
            fail(type(exc).__name__, exc)

    return wrapper


def _parse_color(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3 or not all(0.0 <= p <= 1.0 for p in parts):
        raise ValueError(f"skin color must be three comma-separated values in [0, 1], got {text!r}")
    return tuple(parts)


def _load_inputs(head_path, scalp_path, template_path):
    head = load_mesh(head_path)
    scalp = load_scalp_spec(scalp_path)
    template = load_template(template_path)
    return head, scalp, build_rayset(head, scalp, template)


def _check_field_rays(field, rays, what="field"):
    if field.template_hash != rays.template_hash:
        raise ValueError(f"{what} was captured with a different ray template")
    if field.scalp_hash != rays.scalp_hash:
        raise ValueError(f"{what} was captured with a different scalp spec")


def _load_coeffs(path, model, beta_s=1.0):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    shape = np.asarray(doc.get("beta_shape", []), dtype=np.float64)
    alb = np.asarray(doc.get("beta_alb", []), dtype=np.float64)
    if len(shape) != model.k:
        raise ValueError(f"{path}: expected {model.k} beta_shape entries, got {len(shape)}")
    if len(alb) != model.k_a:
        raise ValueError(f"{path}: expected {model.k_a} beta_alb entries, got {len(alb)}")
    sh = np.asarray(doc["beta_sh"], dtype=np.float64) if "beta_sh" in doc else np.zeros((9, 3))
    return HairCoefficients(shape, alb, beta_s=doc.get("beta_s", beta_s), beta_sh=sh)


@click.group()
def main():
    """Semantic-consistent ray-distance hair fields."""


# --------------------------------------------------------------------------- template


@main.group()
def template():
    """Ray template generation."""


@template.command("gen")
@click.option("--rays", type=int, required=True, help="Number of directions (>= 3).")
@click.option("--max-polar", type=float, default=90.0, show_default=True,
              help="Polar extent of the hemisphere cap in degrees.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def template_gen(rays, max_polar, out):
    """Write a deterministic hemisphere ray template."""
    write_template(out, make_template(rays, max_polar))
    click.echo(f"wrote {out} ({rays} rays, max polar {max_polar} deg)")


# --------------------------------------------------------------------------- scalp


@main.group()
def scalp():
    """Scalp spec utilities."""


@scalp.command("validate")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@guarded
def scalp_validate(spec):
    """Check a scalp spec file: pairing involution, side balance, versioning."""
    s = load_scalp_spec(spec)
    click.echo(f"{spec}: valid ({s.n_s} vertices, topology {s.topology})")


# --------------------------------------------------------------------------- fixtures


@main.group()
def fixtures():
    """Deterministic synthetic fixtures."""


@fixtures.command("gen")
@click.option("--kind", type=click.Choice(fx.KINDS), default="shell-cap-hair", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--head-subdiv", type=int, default=4, show_default=True)
@click.option("--hair-subdiv", type=int, default=4, show_default=True)
@click.option("--r-in", type=float, default=1.2, show_default=True)
@click.option("--r-out", type=float, default=1.5, show_default=True)
@click.option("--extent", type=float, default=60.0, show_default=True)
@click.option("--scalp-cap", type=float, default=25.0, show_default=True)
@click.option("--scalp-pairs", type=int, default=None, help="Subsample to exactly this many mirror pairs.")
@click.option("--seed", type=int, default=0, show_default=True)
@guarded
def fixtures_gen(kind, out, head_subdiv, hair_subdiv, r_in, r_out, extent, scalp_cap,
                 scalp_pairs, seed):
    """Write head.obj, hair.obj and scalp.json for a fixture recipe."""
    recipe = fx.FixtureRecipe(
        kind=kind, head_subdivisions=head_subdiv, hair_subdivisions=hair_subdiv,
        r_in=r_in, r_out=r_out, extent_deg=extent, scalp_cap_deg=scalp_cap,
        scalp_pairs=scalp_pairs, seed=seed,
    )
    bundle = fx.generate(recipe)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(out / "head.obj", bundle.head)
    write_mesh(out / "hair.obj", bundle.hair)
    write_scalp_spec(out / "scalp.json", bundle.scalp)
    click.echo(f"wrote {out}/head.obj, hair.obj, scalp.json ({kind}, "
               f"{bundle.scalp.n_s} scalp vertices, {bundle.hair.n_faces} hair faces)")


# --------------------------------------------------------------------------- analyze


@main.command("analyze")
@click.option("--head", "head_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--hair", "hair_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scalp", "scalp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--template", "template_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--skin-color", default="0.6,0.45,0.35", show_default=True,
              help="Mean skin color r,g,b used for rays that miss.")
@guarded
def analyze_cmd(head_path, hair_path, scalp_path, template_path, out, skin_color):
    """Capture the ray-distance field of a hair mesh."""
    _, _, rays = _load_inputs(head_path, scalp_path, template_path)
    hair = load_mesh(hair_path)
    field = analyze_field(hair, rays, skin_mean_color=_parse_color(skin_color))
    save_field(out, field)
    hit = int(field.support().sum())
    click.echo(f"wrote {out} ({field.n_s}x{field.n_r} field, {hit} hair entries)")


# --------------------------------------------------------------------------- model


@main.group()
def model():
    """Morphable model fitting and synthesis."""


@model.command("build")
@click.option("--fields", "fields_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of .srmh files (all must share template/scalp).")
@click.option("--modes", type=int, required=True)
@click.option("--albedo-modes", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def model_build(fields_dir, modes, albedo_modes, out):
    """Fit a PCA morphable model to a directory of captured fields."""
    paths = sorted(Path(fields_dir).glob("*.srmh"))
    if len(paths) < 2:
        raise ValueError(f"{fields_dir}: need at least 2 .srmh files, found {len(paths)}")
    fields = [load_field(p) for p in paths]
    m = build_model(fields, modes, albedo_modes)
    save_model(out, m)
    click.echo(f"wrote {out} ({len(fields)} samples, K={m.k}, K_a={m.k_a})")


@model.command("synth")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coeffs", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSON file with beta_shape, beta_alb (and optional beta_s, beta_sh).")
@click.option("--beta-s", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def model_synth(model_path, coeffs, beta_s, out):
    """Synthesize a field from model coefficients."""
    m = load_model(model_path)
    c = _load_coeffs(coeffs, m, beta_s=beta_s)
    field, _ = synthesize(m, c)
    save_field(out, field)
    click.echo(f"wrote {out} (beta_s={c.beta_s})")


# --------------------------------------------------------------------------- field ops


@main.group("field")
def field_group():
    """Editing operations on captured fields."""


@field_group.command("fuse")
@click.option("--field", "field_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True)
@click.option("--weights", required=True, help="Comma-separated weights, one per field.")
@click.option("--mask-aware", is_flag=True, help="Renormalize weights over supporting fields per entry.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def field_fuse(field_paths, weights, mask_aware, out):
    """Weighted combination of fields."""
    fields = [load_field(p) for p in field_paths]
    w = [float(x) for x in weights.split(",")]
    save_field(out, fuse_fields(fields, w, mask_aware=mask_aware))
    click.echo(f"wrote {out} ({len(fields)} fields fused)")


@field_group.command("flip")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scalp", "scalp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def field_flip(field_path, scalp_path, out):
    """Mirror a hairstyle across the sagittal plane."""
    save_field(out, flip_field(load_field(field_path), load_scalp_spec(scalp_path)))
    click.echo(f"wrote {out}")


@field_group.command("thicken")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--beta-s", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def field_thicken(field_path, beta_s, out):
    """Scale all distances by a positive thickness factor."""
    save_field(out, scale_thickness(load_field(field_path), beta_s))
    click.echo(f"wrote {out} (beta_s={beta_s})")


@field_group.command("exclude")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="npz file with ex_min / ex_max arrays.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def field_exclude(field_path, map_path, out):
    """Zero out entries flagged by an exclusion map."""
    with np.load(map_path) as data:
        emap = ExclusionMap(data["ex_min"], data["ex_max"])
    save_field(out, apply_exclusion(load_field(field_path), emap))
    click.echo(f"wrote {out}")


@field_group.command("perturb")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--count", type=int, required=True)
@click.option("--magnitude", type=float, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--map-out", type=click.Path(dir_okay=False), required=True,
              help="Where to write the ground-truth exclusion map (npz).")
@guarded
def field_perturb(field_path, count, magnitude, seed, out, map_out):
    """Inject noise at random positions; write the noisy field and its GT map."""
    noisy, emap = perturb_field(load_field(field_path), count, magnitude, rng_seed=seed)
    save_field(out, noisy)
    np.savez(map_out, ex_min=emap.ex_min, ex_max=emap.ex_max)
    click.echo(f"wrote {out} and {map_out} ({count} perturbed slots)")


# --------------------------------------------------------------------------- extract


@main.command("extract")
@click.option("--field", "field_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--head", "head_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scalp", "scalp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--template", "template_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--voxel", type=float, default=DEFAULT_VOXEL_SIZE, show_default=True)
@click.option("--smooth", "smooth_iters", type=int, default=0, show_default=True)
@click.option("--sh-coeffs", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with a 9x3 beta_sh array; bakes lighting into vertex colors.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def extract_cmd(field_path, head_path, scalp_path, template_path, voxel, smooth_iters,
                sh_coeffs, out):
    """Reconstruct a hair mesh from a field."""
    _, _, rays = _load_inputs(head_path, scalp_path, template_path)
    field = load_field(field_path)
    _check_field_rays(field, rays)
    sh = None
    if sh_coeffs is not None:
        with open(sh_coeffs, "r", encoding="utf-8") as fh:
            sh = np.asarray(json.load(fh)["beta_sh"], dtype=np.float64).reshape(9, 3)
    mesh = field_to_mesh(field, rays, voxel_size=voxel, smooth_iterations=smooth_iters,
                         sh_coeffs=sh)
    write_mesh(out, mesh)
    click.echo(f"wrote {out} ({mesh.n_vertices} vertices, {mesh.n_faces} faces)")


# --------------------------------------------------------------------------- eval


@main.command("eval")
@click.option("--pred", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gt", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=float, default=None,
              help="Recall threshold (default 1% of the GT bbox diagonal).")
@click.option("--samples", type=int, default=0, show_default=True,
              help="Extra area-weighted surface samples per mesh.")
@click.option("--report", type=click.Path(dir_okay=False), default=None,
              help="Write the report JSON here as well as printing it.")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@guarded
def eval_cmd(pred, gt, threshold, samples, report, as_json):
    """Chamfer / NRMSE / Recall between predicted and ground-truth meshes."""
    pred_pts = mesh_to_points(load_mesh(pred), surface_samples=samples)
    gt_pts = mesh_to_points(load_mesh(gt), surface_samples=samples)
    rep = evaluate(pred_pts, gt_pts, threshold=threshold)
    text = rep.to_json()
    if report:
        with open(report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if as_json:
        click.echo(text)
    else:
        click.echo(f"chamfer={rep.chamfer:.6g} nrmse={rep.nrmse:.6g} "
                   f"recall={rep.recall:.6g} threshold={rep.threshold:.6g}")


# --------------------------------------------------------------------------- serve


@main.command("serve")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--head", "head_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scalp", "scalp_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--template", "template_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--samples", "samples_dir", type=click.Path(file_okay=False), default=None,
              help="Directory of .srmh fields offered for fusion.")
@click.option("--static", "static_dir", type=click.Path(file_okay=False), default=None,
              help="Directory with the built viewer bundle to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8691, show_default=True)
@guarded
def serve_cmd(model_path, head_path, scalp_path, template_path, samples_dir, static_dir,
              host, port):
    """Run the interactive synthesis HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(model_path, head_path, scalp_path, template_path,
                     samples_dir=samples_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
