"""Shared fixtures and independent oracles used across the test modules."""

import numpy as np
import pytest
import scipy.linalg

from krdoa import ArrayGeometry, SourceSet

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def three_sources():
    """Three well-separated reference sources used throughout the suite."""
    return SourceSet.from_pairs([(155.0, 20.0), (21.0, 150.0), (76.0, 80.0)])


@pytest.fixture(scope="session")
def ura_10x10():
    return ArrayGeometry.ura(10, 10)


def steering_oracle(geom, azimuth_deg, elevation_deg):
    """Brute-force joint steering vector, element by element.

    Independent of the library's Kronecker construction: walks the sensors in
    (x index, z index) order and applies the phase of each position directly.
    """
    mu_h = TWO_PI * np.cos(np.deg2rad(azimuth_deg))
    mu_v = TWO_PI * np.cos(np.deg2rad(elevation_deg))
    out = np.empty(geom.m * geom.n, dtype=complex)
    for mi, x in enumerate(geom.x_positions):
        for ni, z in enumerate(geom.z_positions):
            out[mi * geom.n + ni] = np.exp(-1j * (mu_h * x + mu_v * z))
    return out


def covariance_oracle(data):
    """O((MN)^2 L) elementwise sample covariance."""
    rows, cols = data.shape
    r = np.zeros((rows, rows), dtype=complex)
    for a in range(rows):
        for b in range(rows):
            acc = 0.0 + 0.0j
            for t in range(cols):
                acc += data[a, t] * np.conj(data[b, t])
            r[a, b] = acc / cols
    return r


def principal_angles(u, v):
    """Principal angles (radians) between the column spans of u and v.

    Uses the combined cosine/sine formulation so tiny angles are not lost to
    arccos rounding: cosines from the SVD of Uo^H Vo, sines from the SVD of
    the residual Vo - Uo (Uo^H Vo), paired by arctan2.
    """
    uo = scipy.linalg.orth(np.asarray(u, complex))
    vo = scipy.linalg.orth(np.asarray(v, complex))
    cross = uo.conj().T @ vo
    cosines = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)
    residual = vo - uo @ cross
    sines = np.clip(np.linalg.svd(residual, compute_uv=False), 0.0, 1.0)
    return np.arctan2(sines[::-1], cosines)


def random_full_rank_cov(rng, p, scale=1.0):
    """Random Hermitian positive definite p x p matrix."""
    g = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return scale * (g @ g.conj().T + 0.1 * np.eye(p))
