"""Semantic-consistent ray-distance hair fields.

Capture hair meshes as ordered min/max ray-distance + albedo fields over a
scalp, fit a PCA morphable model over many captures, synthesize and edit new
hairstyles from coefficients, and extract triangle meshes back out.
"""

from .mesh import TriMesh, MeshError, load_mesh, write_mesh, vertex_normals, bbox_diagonal
from .raycast import AccelIndex, Ray, HAVE_COMPILED, build_accel, cast_all_hits
from .scalp import (
    ScalpSpec,
    RayTemplate,
    LocalFrame,
    RaySet,
    make_template,
    build_frames,
    place_rays,
    load_scalp_spec,
    write_scalp_spec,
    load_template,
    write_template,
)
from .field import (
    RayDistanceField,
    ExclusionMap,
    FieldError,
    DEFAULT_SKIN_COLOR,
    analyze,
    reconstruct_vertices,
    fuse,
    flip,
    scale_thickness,
    apply_exclusion,
    perturb,
    binarize_exclusion,
    save_field,
    load_field,
)
from .model import (
    MorphableHairModel,
    HairCoefficients,
    ModelError,
    build_model,
    synthesize,
    project,
    save_model,
    load_model,
)
from .extract import (
    VoxelGrid,
    ExtractError,
    voxelize,
    voxel_surface,
    extract_faces,
    extract_mesh,
    extract_batch,
    smooth,
)
from .shading import sh_basis, sh_basis_batch, shade
from .metrics import EvalReport, chamfer, nrmse, recall, evaluate, mesh_to_points, point_mesh_distance
from .pipeline import build_rayset, field_to_mesh

__version__ = "0.1.0"
