"""Smoke tests for the python bindings: array-level round trips."""

import numpy as np
import pytest

import qdmr


def synthetic_dataset(seed=0, nvol=6, shape=(6, 8, 8), b=700.0):
    rng = np.random.default_rng(seed)
    nz, ny, nx = shape
    z, y, x = np.meshgrid(
        np.linspace(-1, 1, nz), np.linspace(-1, 1, ny), np.linspace(-1, 1, nx),
        indexing="ij",
    )
    base = 1800.0 * np.exp(-1.5 * (x**2 + 1.3 * y**2 + z**2)) + 50.0

    bvals = np.zeros(nvol)
    bvecs = np.zeros((nvol, 3))
    volumes = np.zeros((nvol, nz, ny, nx), dtype=np.uint16)
    volumes[0] = np.round(base).astype(np.uint16)
    for i in range(1, nvol):
        g = rng.normal(size=3)
        g /= np.linalg.norm(g)
        bvals[i] = b
        bvecs[i] = g
        attenuation = np.exp(-b * 1e-3 * (0.4 + 0.6 * (0.5 + x * g[0]) ** 2))
        volumes[i] = np.round(base * attenuation).astype(np.uint16)
    return volumes, bvals, bvecs


def test_round_trip_lossless():
    volumes, bvals, bvecs = synthetic_dataset()
    blob = qdmr.compress(volumes, bvals, bvecs, threads=1)
    out_volumes, out_bvals, out_bvecs = qdmr.decompress(blob)
    assert out_volumes.dtype == np.uint16
    np.testing.assert_array_equal(out_volumes, volumes)
    np.testing.assert_allclose(out_bvals, bvals)
    np.testing.assert_allclose(out_bvecs, bvecs)


def test_stats_accounting():
    volumes, bvals, bvecs = synthetic_dataset(seed=3)
    blob = qdmr.compress(volumes, bvals, bvecs, threads=1)
    report = qdmr.stats(blob)
    assert report["file_size"] == len(blob)
    total = report["overhead_bytes"] + sum(r["bytes"] for r in report["records"])
    assert total == len(blob)
    assert len(report["records"]) == len(volumes)


def test_spatial_only_is_larger_on_smooth_data():
    volumes, bvals, bvecs = synthetic_dataset(seed=5, nvol=8)
    hybrid = qdmr.compress(volumes, bvals, bvecs, threads=1)
    spatial = qdmr.compress(volumes, bvals, bvecs, threads=1, spatial_only=True)
    assert len(hybrid) <= len(spatial)


def test_order_volumes_permutation():
    rng = np.random.default_rng(7)
    dirs = rng.normal(size=(12, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    perm = qdmr.order_volumes(dirs, strategy="furthest", start=0)
    assert sorted(perm) == list(range(12))
    assert perm[0] == 0


def test_errors_raise():
    volumes, bvals, bvecs = synthetic_dataset(seed=9)
    with pytest.raises(qdmr.QdmrError):
        qdmr.compress(volumes, bvals[:-1], bvecs, threads=1)
    with pytest.raises(qdmr.QdmrError):
        qdmr.decompress(b"definitely not a container")
