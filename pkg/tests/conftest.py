"""Shared test fixtures: small deterministic geometry bundles."""

import numpy as np
import pytest

import hairfield as hf
from hairfield import fixtures as fx


@pytest.fixture(scope="session")
def small_bundle():
    """Shell-cap bundle at low subdivision: fast, partial ray coverage."""
    return fx.generate(fx.FixtureRecipe(head_subdivisions=3, hair_subdivisions=3))


@pytest.fixture(scope="session")
def full_bundle():
    """Full-shell bundle: every ray hits, so fields have no zero entries."""
    return fx.generate(fx.FixtureRecipe(kind="sphere-head", head_subdivisions=3,
                                        hair_subdivisions=3))


@pytest.fixture(scope="session")
def template25():
    return hf.make_template(25, 60.0)


@pytest.fixture(scope="session")
def small_rays(small_bundle, template25):
    return hf.build_rayset(small_bundle.head, small_bundle.scalp, template25)


@pytest.fixture(scope="session")
def small_field(small_bundle, small_rays):
    return hf.analyze(small_bundle.hair, small_rays)


@pytest.fixture(scope="session")
def full_rays(full_bundle, template25):
    return hf.build_rayset(full_bundle.head, full_bundle.scalp, template25)


@pytest.fixture(scope="session")
def full_field(full_bundle, full_rays):
    return hf.analyze(full_bundle.hair, full_rays)


@pytest.fixture(scope="session")
def training_fields(full_field):
    """20 strictly-positive-support fields spanning a generic subspace in
    both distance and albedo space."""
    fields = []
    for seed in range(20):
        f, _ = hf.perturb(full_field, count=200, magnitude=0.15, rng_seed=seed)
        rng = np.random.default_rng(1000 + seed)
        albedo = np.clip(f.albedo + rng.normal(0.0, 0.05, f.albedo.shape), 0.0, 1.0)
        fields.append(hf.RayDistanceField(f.d_min, f.d_max, albedo,
                                          f.template_hash, f.scalp_hash))
    assert all(f.support().all() for f in fields)
    return fields
