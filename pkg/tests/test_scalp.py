"""Ray template, scalp spec, local frames, and ray placement."""

import math

import numpy as np
import pytest

from hairfield.fixtures import icosphere, make_scalp_spec
from hairfield.scalp import (
    RayTemplate,
    ScalpSpec,
    build_frames,
    load_scalp_spec,
    load_template,
    make_template,
    place_rays,
    write_scalp_spec,
    write_template,
)
from hairfield.pipeline import build_rayset


class TestTemplate:
    def test_canonical_triad_first(self):
        t = make_template(25, 60.0)
        assert np.array_equal(t.directions[:3], np.eye(3))

    def test_unit_and_hemisphere(self):
        t = make_template(100, 90.0)
        assert np.abs(np.linalg.norm(t.directions, axis=1) - 1.0).max() <= 1e-9
        assert t.directions[:, 2].min() >= -1e-12

    def test_cap_constraint(self):
        t = make_template(50, 45.0)
        # all non-triad directions stay within the polar cap
        z_lo = math.cos(math.radians(45.0))
        assert t.directions[3:, 2].min() >= z_lo - 1e-12

    def test_pairwise_separation_one_degree(self):
        t = make_template(200, 90.0)
        d = t.directions
        dots = d @ d.T
        np.fill_diagonal(dots, -1.0)
        assert dots.max() <= math.cos(math.radians(1.0)) + 1e-12

    def test_deterministic(self):
        a = make_template(25, 60.0)
        b = make_template(25, 60.0)
        assert np.array_equal(a.directions, b.directions)
        assert a.content_hash() == b.content_hash()

    def test_exact_count(self):
        for n in (3, 4, 25, 137):
            assert make_template(n, 75.0).n_r == n

    def test_validation(self):
        with pytest.raises(ValueError):
            make_template(2)
        with pytest.raises(ValueError):
            make_template(10, 0.0)
        with pytest.raises(ValueError):
            make_template(10, 91.0)
        with pytest.raises(ValueError):
            RayTemplate(np.eye(3)[[1, 0, 2]])  # triad out of order
        with pytest.raises(ValueError):
            RayTemplate(np.vstack([np.eye(3), [0, 0, -1.0]]))  # lower hemisphere

    def test_json_round_trip(self, tmp_path):
        t = make_template(25, 60.0)
        path = tmp_path / "template.json"
        write_template(path, t)
        back = load_template(path)
        assert np.array_equal(back.directions, t.directions)
        assert back.content_hash() == t.content_hash()


class TestScalpSpec:
    def _spec(self):
        return ScalpSpec([10, 20, 30, 40], [2, 3, 0, 1],
                         ["left", "left", "right", "right"])

    def test_valid(self):
        s = self._spec()
        assert s.n_s == 4
        assert np.array_equal(s.delta(), [1, 1, -1, -1])

    def test_involution_required(self):
        with pytest.raises(ValueError, match="involution"):
            ScalpSpec([1, 2, 3, 4], [1, 2, 3, 0], ["left", "left", "right", "right"])

    def test_no_fixed_points(self):
        with pytest.raises(ValueError, match="fixed point"):
            ScalpSpec([1, 2], [0, 1], ["left", "right"])

    def test_pairs_cross_sides(self):
        with pytest.raises(ValueError):
            ScalpSpec([1, 2, 3, 4], [1, 0, 3, 2], ["left", "left", "right", "right"])

    def test_even_count(self):
        with pytest.raises(ValueError):
            ScalpSpec([1], [0], ["left"])

    def test_hash_changes_with_content(self):
        a = self._spec()
        b = ScalpSpec([10, 20, 30, 41], [2, 3, 0, 1], ["left", "left", "right", "right"])
        assert a.content_hash() != b.content_hash()

    def test_json_round_trip(self, tmp_path):
        s = self._spec()
        path = tmp_path / "scalp.json"
        write_scalp_spec(path, s)
        back = load_scalp_spec(path)
        assert back.content_hash() == s.content_hash()

    def test_mirrored_from_icosphere(self):
        head = icosphere(3)
        s = make_scalp_spec(head, 30.0)
        v = head.vertices[s.vertex_ids]
        partner = head.vertices[s.vertex_ids[s.pair_of]]
        # partners are exact sagittal reflections (bitwise, by construction)
        assert np.array_equal(partner, v * np.array([-1.0, 1.0, 1.0]))


class TestFrames:
    @pytest.fixture()
    def head_spec(self):
        head = icosphere(3)
        return head, make_scalp_spec(head, 30.0)

    def test_orthonormal(self, head_spec):
        head, spec = head_spec
        for fr in build_frames(head, spec):
            m = np.column_stack([fr.x, fr.y, fr.z])
            assert np.allclose(m.T @ m, np.eye(3), atol=1e-12)

    def test_handedness_by_side(self, head_spec):
        head, spec = head_spec
        frames = build_frames(head, spec)
        for fr, side in zip(frames, spec.side):
            assert fr.handedness == (1.0 if side == "left" else -1.0)

    def test_paired_frames_are_reflections(self, head_spec):
        head, spec = head_spec
        frames = build_frames(head, spec)
        refl = np.diag([-1.0, 1.0, 1.0])
        for i, j in enumerate(spec.pair_of):
            fi, fj = frames[i], frames[int(j)]
            # all three axes reflect; the handedness flip is the reflection's
            # negative determinant, not an extra sign on x
            assert np.allclose(fj.x, refl @ fi.x, atol=1e-12)
            assert np.allclose(fj.y, refl @ fi.y, atol=1e-12)
            assert np.allclose(fj.z, refl @ fi.z, atol=1e-12)

    def test_degenerate_frame_rejected(self):
        # a pair whose separation vector is parallel to the shared normal
        head_v = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 2.0], [1, 0, 0], [0, 1, 0]])
        from hairfield.mesh import TriMesh

        head = TriMesh(head_v, [[0, 2, 3], [1, 2, 3]],
                       normals=[[0, 0, 1], [0, 0, 1], [1, 0, 0], [0, 1, 0]])
        spec = ScalpSpec([0, 1], [1, 0], ["left", "right"])
        with pytest.raises(ValueError, match="degenerate"):
            build_frames(head, spec)


class TestPlacement:
    def test_ray_shapes_and_origins(self):
        head = icosphere(3)
        spec = make_scalp_spec(head, 30.0)
        t = make_template(25, 60.0)
        rays = build_rayset(head, spec, t)
        assert rays.origins.shape == (spec.n_s, 3)
        assert rays.directions.shape == (spec.n_s, t.n_r, 3)
        assert np.array_equal(rays.origins, head.vertices[spec.vertex_ids])
        assert np.abs(np.linalg.norm(rays.directions, axis=2) - 1.0).max() < 1e-9

    def test_mirror_equivariance(self):
        """Ray n at vertex i is the exact sagittal mirror of ray n at pair(i)."""
        head = icosphere(4)
        spec = make_scalp_spec(head, 30.0)
        t = make_template(25, 60.0)
        rays = build_rayset(head, spec, t)
        mirrored = rays.directions[spec.pair_of] * np.array([-1.0, 1.0, 1.0])
        assert np.abs(rays.directions - mirrored).max() < 1e-9

    def test_third_template_direction_is_normal(self):
        # template entry 3 is (0,0,1) in the local frame, i.e. the normal
        head = icosphere(3)
        spec = make_scalp_spec(head, 30.0)
        t = make_template(25, 60.0)
        rays = build_rayset(head, spec, t)
        from hairfield.mesh import vertex_normals

        normals = vertex_normals(head)[spec.vertex_ids]
        assert np.abs(rays.directions[:, 2] - normals).max() < 1e-12
