"""Command-line interface: each command, error contract, determinism, and the
full pipeline composition."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

import hairfield as hf
from hairfield.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def run_fail(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code != 0
    return result


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Fixture directory plus template, built once for the module."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    result = runner.invoke(main, [
        "fixtures", "gen", "--kind", "shell-cap-hair", "--out", str(root / "fix"),
        "--head-subdiv", "3", "--hair-subdiv", "3",
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, [
        "template", "gen", "--rays", "25", "--max-polar", "60", "--out",
        str(root / "template.json"),
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return root


def common_args(root):
    return [
        "--head", str(root / "fix" / "head.obj"),
        "--scalp", str(root / "fix" / "scalp.json"),
        "--template", str(root / "template.json"),
    ]


@pytest.fixture(scope="module")
def captured(workspace):
    runner = CliRunner()
    out = workspace / "base.srmh"
    result = runner.invoke(main, [
        "analyze", "--hair", str(workspace / "fix" / "hair.obj"),
        "--out", str(out), *common_args(workspace),
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return out


class TestBasics:
    def test_template_gen_deterministic(self, runner, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_ok(runner, ["template", "gen", "--rays", "10", "--out", str(a)])
        run_ok(runner, ["template", "gen", "--rays", "10", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_template_gen_invalid(self, runner, tmp_path):
        r = run_fail(runner, ["template", "gen", "--rays", "2", "--out",
                              str(tmp_path / "x.json")])
        assert r.output.startswith("error:")
        assert "\n" not in r.output.strip()

    def test_scalp_validate(self, runner, workspace):
        r = run_ok(runner, ["scalp", "validate", str(workspace / "fix" / "scalp.json")])
        assert "valid" in r.output

    def test_scalp_validate_rejects_broken(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        doc = {"version": 1, "topology": "t", "n_s": 2, "entries": [
            {"vertex_id": 1, "pair_id": 1, "side": "left"},
            {"vertex_id": 2, "pair_id": 2, "side": "right"},
        ]}
        path.write_text(json.dumps(doc))
        r = run_fail(runner, ["scalp", "validate", str(path)])
        assert r.output.startswith("error:")

    def test_fixtures_gen_writes_files(self, workspace):
        for name in ("head.obj", "hair.obj", "scalp.json"):
            assert (workspace / "fix" / name).exists()


class TestFieldCommands:
    def test_analyze_output_loads(self, captured):
        f = hf.load_field(captured)
        assert f.n_r == 25

    def test_flip_twice_byte_identical(self, runner, workspace, captured):
        once = workspace / "flip1.srmh"
        twice = workspace / "flip2.srmh"
        scalp = str(workspace / "fix" / "scalp.json")
        run_ok(runner, ["field", "flip", "--field", str(captured), "--scalp", scalp,
                        "--out", str(once)])
        run_ok(runner, ["field", "flip", "--field", str(once), "--scalp", scalp,
                        "--out", str(twice)])
        assert twice.read_bytes() == captured.read_bytes()

    def test_thicken(self, runner, workspace, captured):
        out = workspace / "thick.srmh"
        run_ok(runner, ["field", "thicken", "--field", str(captured),
                        "--beta-s", "2.0", "--out", str(out)])
        assert np.allclose(hf.load_field(out).d_max,
                           hf.load_field(captured).d_max * 2.0)

    def test_fuse_identity(self, runner, workspace, captured):
        out = workspace / "fused.srmh"
        run_ok(runner, ["field", "fuse", "--field", str(captured),
                        "--field", str(captured), "--weights", "1,0",
                        "--out", str(out)])
        assert out.read_bytes() == captured.read_bytes()

    def test_perturb_then_exclude(self, runner, workspace, captured):
        noisy = workspace / "noisy.srmh"
        emap = workspace / "map.npz"
        clean = workspace / "clean.srmh"
        run_ok(runner, ["field", "perturb", "--field", str(captured),
                        "--count", "20", "--magnitude", "0.3", "--seed", "1",
                        "--out", str(noisy), "--map-out", str(emap)])
        run_ok(runner, ["field", "exclude", "--field", str(noisy),
                        "--map", str(emap), "--out", str(clean)])
        f0 = hf.load_field(captured)
        fc = hf.load_field(clean)
        with np.load(emap) as data:
            kill = (data["ex_min"] == 1) | (data["ex_max"] == 1)
        assert np.array_equal(fc.d_max[~kill], f0.d_max[~kill])
        assert (fc.d_max[kill] == 0).all()

    def test_hash_mismatch_fails_cleanly(self, runner, workspace, captured, tmp_path):
        # a field flipped with a scalp spec from a different head must fail
        other = tmp_path / "other"
        run_ok(runner, ["fixtures", "gen", "--out", str(other),
                        "--head-subdiv", "2", "--hair-subdiv", "2",
                        "--scalp-cap", "40"])
        r = run_fail(runner, ["field", "flip", "--field", str(captured),
                              "--scalp", str(other / "scalp.json"),
                              "--out", str(tmp_path / "x.srmh")])
        assert r.output.startswith("error:")


@pytest.fixture(scope="module")
def field_dir(workspace, captured):
    d = workspace / "fields"
    d.mkdir(exist_ok=True)
    runner = CliRunner()
    for seed in range(6):
        result = runner.invoke(main, [
            "field", "perturb", "--field", str(captured), "--count", "40",
            "--magnitude", "0.2", "--seed", str(seed),
            "--out", str(d / f"s{seed}.srmh"),
            "--map-out", str(workspace / "tmp_map.npz")],
            catch_exceptions=False)
        assert result.exit_code == 0, result.output
    return d


class TestModelCommands:
    def test_build_synth_extract_eval(self, runner, workspace, field_dir):
        model = workspace / "m.srmm"
        run_ok(runner, ["model", "build", "--fields", str(field_dir),
                        "--modes", "3", "--albedo-modes", "0", "--out", str(model)])
        coeffs = workspace / "coeffs.json"
        coeffs.write_text(json.dumps({"beta_shape": [0, 0, 0], "beta_alb": []}))
        synth = workspace / "synth.srmh"
        run_ok(runner, ["model", "synth", "--model", str(model),
                        "--coeffs", str(coeffs), "--out", str(synth)])
        mesh = workspace / "synth.obj"
        run_ok(runner, ["extract", "--field", str(synth), "--voxel", "0.0625",
                        "--out", str(mesh), *common_args(workspace)])
        report = workspace / "report.json"
        r = run_ok(runner, ["eval", "--pred", str(mesh),
                            "--gt", str(workspace / "fix" / "hair.obj"),
                            "--report", str(report), "--json"])
        doc = json.loads(r.output)
        assert set(doc) >= {"chamfer", "nrmse", "recall", "threshold"}
        assert json.loads(report.read_text()) == doc

    def test_synth_deterministic_bytes(self, runner, workspace, field_dir):
        model = workspace / "m2.srmm"
        # perturbed copies share identical albedo, so only shape modes exist
        run_ok(runner, ["model", "build", "--fields", str(field_dir),
                        "--modes", "2", "--albedo-modes", "0", "--out", str(model)])
        coeffs = workspace / "c2.json"
        coeffs.write_text(json.dumps({"beta_shape": [0.5, -0.5], "beta_alb": []}))
        a, b = workspace / "sa.srmh", workspace / "sb.srmh"
        run_ok(runner, ["model", "synth", "--model", str(model), "--coeffs",
                        str(coeffs), "--out", str(a)])
        run_ok(runner, ["model", "synth", "--model", str(model), "--coeffs",
                        str(coeffs), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_coeff_count_mismatch(self, runner, workspace, field_dir):
        model = workspace / "m3.srmm"
        run_ok(runner, ["model", "build", "--fields", str(field_dir),
                        "--modes", "2", "--albedo-modes", "0", "--out", str(model)])
        coeffs = workspace / "c3.json"
        coeffs.write_text(json.dumps({"beta_shape": [1.0], "beta_alb": []}))
        r = run_fail(runner, ["model", "synth", "--model", str(model),
                              "--coeffs", str(coeffs),
                              "--out", str(workspace / "never.srmh")])
        assert r.output.startswith("error:")


class TestExtract:
    def test_with_smoothing_and_shading(self, runner, workspace, captured):
        sh = workspace / "sh.json"
        coeffs = np.zeros((9, 3))
        coeffs[0] = 2.0
        sh.write_text(json.dumps({"beta_sh": coeffs.tolist()}))
        out = workspace / "shaded.obj"
        run_ok(runner, ["extract", "--field", str(captured), "--voxel", "0.0625",
                        "--smooth", "2", "--sh-coeffs", str(sh),
                        "--out", str(out), *common_args(workspace)])
        mesh = hf.load_mesh(out)
        assert mesh.n_faces > 0
        assert mesh.colors is not None
