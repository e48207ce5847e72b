"""HTTP service: metadata, synthesis pipeline, validation contract."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

import hairfield as hf
from hairfield import fixtures as fx
from hairfield.service import create_app


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    """App over a small fixture model plus two bundled sample fields."""
    root = tmp_path_factory.mktemp("svc")
    bundle = fx.generate(fx.FixtureRecipe(kind="sphere-head", head_subdivisions=3,
                                          hair_subdivisions=3))
    template = hf.make_template(25, 60.0)
    hf.write_mesh(root / "head.obj", bundle.head)
    hf.write_scalp_spec(root / "scalp.json", bundle.scalp)
    hf.write_template(root / "template.json", template)

    rays = hf.build_rayset(bundle.head, bundle.scalp, template)
    base = hf.analyze(bundle.hair, rays)
    fields = [hf.perturb(base, 100, 0.15, rng_seed=s)[0] for s in range(6)]
    model = hf.build_model(fields, modes=3, albedo_modes=0)
    hf.save_model(root / "model.srmm", model)

    samples = root / "samples"
    samples.mkdir()
    hf.save_field(samples / "plain.srmh", base)
    hf.save_field(samples / "thick.srmh", hf.scale_thickness(base, 1.5))

    app = create_app(root / "model.srmm", root / "head.obj", root / "scalp.json",
                     root / "template.json", samples_dir=samples)
    return TestClient(app)


class TestMeta:
    def test_health(self, service):
        assert service.get("/api/health").json() == {"status": "ok"}

    def test_meta_shape(self, service):
        doc = service.get("/api/meta").json()
        assert doc["k"] == 3 and doc["k_a"] == 0
        assert doc["n_r"] == 25
        assert len(doc["sv_shape"]) == 3
        assert doc["slider_range"] == 3.0

    def test_samples_listed(self, service):
        assert service.get("/api/samples").json()["samples"] == ["plain", "thick"]


def synth(service, **body):
    body.setdefault("beta_shape", [0.0, 0.0, 0.0])
    body.setdefault("beta_alb", [])
    return service.post("/api/synthesize", json=body)


class TestSynthesize:
    def test_zero_coefficients_deterministic_mean(self, service):
        a = synth(service)
        b = synth(service)
        assert a.status_code == 200
        assert a.content == b.content
        doc = a.json()
        assert len(doc["positions"]) % 3 == 0
        assert len(doc["colors"]) == len(doc["positions"])
        assert len(doc["faces"]) % 3 == 0
        assert max(doc["faces"]) < len(doc["positions"]) // 3

    def test_thickness_grows_bbox(self, service):
        def diag(doc):
            p = np.asarray(doc["positions"]).reshape(-1, 3)
            return float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))

        d1 = diag(synth(service, beta_s=1.0).json())
        d2 = diag(synth(service, beta_s=2.0).json())
        assert d2 > d1

    def test_flip_parity(self, service):
        plain = synth(service, flip=False)
        flipped = synth(service, flip=True)
        assert plain.status_code == flipped.status_code == 200
        # the sphere fixture is bilaterally symmetric: same geometry either way
        p = np.asarray(plain.json()["positions"]).reshape(-1, 3)
        f = np.asarray(flipped.json()["positions"]).reshape(-1, 3)
        assert p.shape == f.shape

    def test_fuse_with_samples(self, service):
        r = synth(service, fuse={"sample_ids": ["plain"], "weights": [0.5]})
        assert r.status_code == 200

    def test_obj_download(self, service):
        r = synth(service, format="obj")
        assert r.status_code == 200
        assert r.headers["content-disposition"].startswith("attachment")
        lines = r.text.splitlines()
        assert lines[0].startswith("v ")
        assert any(line.startswith("f ") for line in lines)

    def test_median_latency_at_default_voxel(self, service):
        import time

        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            assert synth(service).status_code == 200
            times.append(time.perf_counter() - t0)
        median = sorted(times)[len(times) // 2]
        assert median <= 0.5, f"median synthesis latency {median:.3f} s"

    def test_sh_shading_accepted(self, service):
        coeffs = np.zeros((9, 3))
        coeffs[0] = 2.0
        r = synth(service, sh=coeffs.tolist())
        assert r.status_code == 200
        assert max(r.json()["colors"]) <= 1.0


class TestValidation:
    def test_wrong_shape_length(self, service):
        r = synth(service, beta_shape=[0.0])
        assert r.status_code == 400
        assert "beta_shape" in r.json()["errors"]

    def test_bad_beta_s(self, service):
        r = synth(service, beta_s=-1.0)
        assert r.status_code == 400
        assert "beta_s" in r.json()["errors"]

    def test_unknown_fuse_sample(self, service):
        r = synth(service, fuse={"sample_ids": ["nope"], "weights": [1.0]})
        assert r.status_code == 400
        assert "fuse.sample_ids" in r.json()["errors"]

    def test_bad_voxel(self, service):
        r = synth(service, voxel=0.0)
        assert r.status_code == 400

    def test_non_finite_rejected(self, service):
        # JSON cannot carry NaN literals; numeric strings coerce, then the
        # finiteness check rejects
        r = synth(service, beta_shape=["nan", 0.0, 0.0])
        assert r.status_code == 400

    def test_multiple_errors_reported_together(self, service):
        r = synth(service, beta_shape=[0.0], beta_s=0.0)
        assert r.status_code == 400
        errors = r.json()["errors"]
        assert {"beta_shape", "beta_s"} <= set(errors)


class TestStaticBundle:
    def test_viewer_bundle_served_at_root(self, service, tmp_path):
        import pathlib

        dist = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not (dist / "index.html").exists():
            pytest.skip("viewer bundle not built")
        bundle = fx.generate(fx.FixtureRecipe(kind="sphere-head", head_subdivisions=2,
                                              hair_subdivisions=2))
        template = hf.make_template(10, 60.0)
        hf.write_mesh(tmp_path / "head.obj", bundle.head)
        hf.write_scalp_spec(tmp_path / "scalp.json", bundle.scalp)
        hf.write_template(tmp_path / "template.json", template)
        rays = hf.build_rayset(bundle.head, bundle.scalp, template)
        base = hf.analyze(bundle.hair, rays)
        model = hf.build_model(
            [hf.perturb(base, 20, 0.1, rng_seed=s)[0] for s in range(3)],
            modes=1, albedo_modes=0)
        hf.save_model(tmp_path / "model.srmm", model)
        app = create_app(tmp_path / "model.srmm", tmp_path / "head.obj",
                         tmp_path / "scalp.json", tmp_path / "template.json",
                         static_dir=dist)
        client = TestClient(app)
        r = client.get("/")
        assert r.status_code == 200
        assert "<html" in r.text.lower()
        assert client.get("/api/health").json() == {"status": "ok"}


class TestHashGuard:
    def test_mismatched_template_rejected(self, tmp_path):
        bundle = fx.generate(fx.FixtureRecipe(kind="sphere-head", head_subdivisions=2,
                                              hair_subdivisions=2))
        t1 = hf.make_template(10, 60.0)
        t2 = hf.make_template(12, 60.0)
        hf.write_mesh(tmp_path / "head.obj", bundle.head)
        hf.write_scalp_spec(tmp_path / "scalp.json", bundle.scalp)
        hf.write_template(tmp_path / "template.json", t2)
        rays = hf.build_rayset(bundle.head, bundle.scalp, t1)
        base = hf.analyze(bundle.hair, rays)
        model = hf.build_model(
            [hf.perturb(base, 20, 0.1, rng_seed=s)[0] for s in range(3)],
            modes=1, albedo_modes=0)
        hf.save_model(tmp_path / "model.srmm", model)
        with pytest.raises(ValueError, match="template"):
            create_app(tmp_path / "model.srmm", tmp_path / "head.obj",
                       tmp_path / "scalp.json", tmp_path / "template.json")
