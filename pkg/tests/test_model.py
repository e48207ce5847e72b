"""Morphable model fitting, synthesis, projection, and SRMM file I/O."""

import numpy as np
import pytest

import hairfield as hf
from hairfield.model import ModelError, _pca


class TestPcaClosedForm:
    def test_two_samples(self, training_fields):
        """With two samples PCA has one mode with a fully closed form:
        mean = (f1 + f2) / 2, direction = (f1 - f2) / |f1 - f2|,
        singular value = |f1 - f2| / sqrt(2), scale = singular value
        (n - 1 = 1), so the scaled basis column is direction * sv."""
        f1, f2 = training_fields[:2]
        model = hf.build_model([f1, f2], modes=1, albedo_modes=0)
        v1, v2 = f1.distance_vector(), f2.distance_vector()
        diff = v1 - v2
        sv = np.linalg.norm(diff) / np.sqrt(2.0)
        direction = diff / np.linalg.norm(diff)
        expected = direction * sv
        got = model.shape_basis[:, 0]
        if np.dot(got, expected) < 0:  # sign convention may flip the mode
            expected = -expected
        assert np.allclose(model.mean_d, 0.5 * (v1 + v2), atol=1e-5)
        assert model.sv_shape[0] == pytest.approx(sv, abs=1e-5)
        assert np.abs(got - expected).max() < 1e-5

    def test_projection_of_training_samples(self, training_fields):
        """Two samples sit at +-(1/sqrt(2)) standard deviations: each lies
        |f1 - f2| / 2 from the mean while the mode std is |f1 - f2| / sqrt(2)."""
        f1, f2 = training_fields[:2]
        model = hf.build_model([f1, f2], modes=1, albedo_modes=0)
        c1 = hf.project(model, f1)
        c2 = hf.project(model, f2)
        assert abs(abs(c1[0]) - 1.0 / np.sqrt(2.0)) < 1e-5
        assert np.allclose(c1, -c2, atol=1e-5)


@pytest.fixture(scope="module")
def full_model(training_fields):
    return hf.build_model(training_fields, modes=19, albedo_modes=10)


@pytest.fixture(scope="module")
def model5(training_fields):
    return hf.build_model(training_fields, modes=5, albedo_modes=3)


class TestRoundTrip:
    def test_project_synthesize_round_trip(self, training_fields, full_model):
        """Full-rank model reproduces every training field within 1e-4."""
        for f in training_fields:
            beta = hf.project(full_model, f)
            rebuilt, _ = hf.synthesize(
                full_model,
                hf.HairCoefficients(beta, np.zeros(full_model.k_a)),
            )
            v0 = f.distance_vector()
            err = np.linalg.norm(rebuilt.distance_vector() - v0) / np.linalg.norm(v0)
            assert err < 1e-4

    def test_reconstruction_error_non_increasing_in_k(self, training_fields):
        f = training_fields[0]
        v0 = f.distance_vector()
        errors = []
        for k in range(1, 20):
            model = hf.build_model(training_fields, modes=k, albedo_modes=0)
            beta = hf.project(model, f)
            rebuilt, _ = hf.synthesize(model, hf.HairCoefficients(beta, []))
            errors.append(np.linalg.norm(rebuilt.distance_vector() - v0))
        assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))

    def test_zero_coefficients_give_mean(self, training_fields):
        model = hf.build_model(training_fields, modes=5, albedo_modes=3)
        field, albedo = hf.synthesize(
            model, hf.HairCoefficients(np.zeros(5), np.zeros(3)))
        assert np.abs(field.distance_vector() - model.mean_d).max() < 1e-6
        assert np.abs(albedo - np.clip(model.mean_a, 0, 1)).max() < 1e-12


class TestSynthesize:
    def test_thickness_factors_out(self, model5):
        beta = np.array([1.0, -0.5, 0.25, 0.0, 2.0])
        c1 = hf.HairCoefficients(beta, np.zeros(3), beta_s=1.0)
        c2 = hf.HairCoefficients(beta, np.zeros(3), beta_s=2.0)
        f1, _ = hf.synthesize(model5, c1)
        f2, _ = hf.synthesize(model5, c2)
        scaled = hf.scale_thickness(f1, 2.0)
        assert np.array_equal(f2.d_min, scaled.d_min)
        assert np.array_equal(f2.d_max, scaled.d_max)

    def test_invariants_hold_for_extreme_coefficients(self, model5):
        # large negative coefficients drive distances negative pre-clamp
        c = hf.HairCoefficients(np.full(5, -50.0), np.zeros(3))
        f, _ = hf.synthesize(model5, c)
        assert (f.d_min >= 0).all()
        assert (f.d_min <= f.d_max).all()
        assert ((f.d_min == 0) == (f.d_max == 0)).all()

    def test_wrong_coefficient_count(self, model5):
        with pytest.raises(ModelError):
            hf.synthesize(model5, hf.HairCoefficients(np.zeros(4), np.zeros(3)))

    def test_deterministic(self, model5):
        c = hf.HairCoefficients(np.ones(5), np.zeros(3))
        a, _ = hf.synthesize(model5, c)
        b, _ = hf.synthesize(model5, c)
        assert np.array_equal(a.d_min, b.d_min)


class TestValidation:
    def test_needs_two_fields(self, training_fields):
        with pytest.raises(ModelError):
            hf.build_model(training_fields[:1], 1, 0)

    def test_modes_bounded_by_samples(self, training_fields):
        with pytest.raises(ModelError):
            hf.build_model(training_fields[:3], modes=3, albedo_modes=0)

    def test_rank_zero_rejected(self, training_fields):
        f = training_fields[0]
        with pytest.raises(ModelError, match="rank"):
            hf.build_model([f, f, f], modes=2, albedo_modes=0)

    def test_meta_mismatch(self, training_fields):
        f = training_fields[0]
        alien = hf.RayDistanceField(f.d_min, f.d_max, f.albedo, b"x" * 32, f.scalp_hash)
        with pytest.raises(ModelError):
            hf.build_model([training_fields[0], alien], 1, 0)

    def test_project_wrong_field(self, training_fields):
        model = hf.build_model(training_fields, modes=2, albedo_modes=0)
        f = training_fields[0]
        alien = hf.RayDistanceField(f.d_min, f.d_max, f.albedo, b"x" * 32, f.scalp_hash)
        with pytest.raises(ModelError):
            hf.project(model, alien)

    def test_beta_s_positive(self):
        with pytest.raises(ModelError):
            hf.HairCoefficients([], [], beta_s=0.0)

    def test_pca_sign_deterministic(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(8, 30))
        _, _, b1 = _pca(x, 4, "t")
        _, _, b2 = _pca(x.copy(), 4, "t")
        assert np.array_equal(b1, b2)
        # largest-magnitude entry of each unit direction is positive
        for k in range(4):
            col = b1[:, k]
            assert col[np.argmax(np.abs(col))] > 0


class TestIO:
    def test_round_trip(self, tmp_path, training_fields):
        model = hf.build_model(training_fields, modes=6, albedo_modes=4)
        path = tmp_path / "m.srmm"
        hf.save_model(path, model)
        back = hf.load_model(path)
        assert (back.n_s, back.n_r, back.k, back.k_a) == (model.n_s, model.n_r, 6, 4)
        assert np.array_equal(back.mean_d, model.mean_d)
        assert np.array_equal(back.shape_basis, model.shape_basis)
        assert np.array_equal(back.mean_a, model.mean_a)
        assert np.array_equal(back.albedo_basis, model.albedo_basis)
        assert back.template_hash == model.template_hash
        assert back.scalp_hash == model.scalp_hash

    def test_truncated(self, tmp_path, training_fields):
        model = hf.build_model(training_fields[:3], modes=2, albedo_modes=0)
        path = tmp_path / "m.srmm"
        hf.save_model(path, model)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ModelError, match="truncated"):
            hf.load_model(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.srmm"
        path.write_bytes(b"\0" * 200)
        with pytest.raises(ModelError):
            hf.load_model(path)
