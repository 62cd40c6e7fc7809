"""Snapshot synthesis and covariance formation.

The observation model is y[n] = A x[n] + w[n] with unit-power sources and
circular complex Gaussian noise of per-element variance 10**(-snr_db / 10).
All randomness comes from one seeded generator so a snapshot matrix is a pure
function of (geometry, sources, L, snr_db, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import ArrayGeometry, SourceSet, steering_matrix

# Relative tolerance for the Hermitian check on covariance construction.
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class SnapshotMatrix:
    """L array snapshots stacked as columns of an (M*N) x L complex matrix."""

    data: np.ndarray
    m: int
    n: int
    seed: int | None = None

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 2 or d.shape[1] < 1:
            raise DomainError("snapshot data must be a 2-D matrix with at least one column")
        if d.shape[0] != self.m * self.n:
            raise DomainError(
                f"snapshot rows ({d.shape[0]}) must equal m*n ({self.m * self.n})"
            )
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def snapshots(self) -> int:
        """Number of snapshots L."""
        return self.data.shape[1]


@dataclass(frozen=True)
class Covariance:
    """An (M*N) x (M*N) Hermitian covariance with array-shape metadata.

    ``noise_variance`` is only meaningful for exactly constructed covariances;
    sample covariances leave it None. ``source_count_hint`` records P when the
    builder knows it; estimators still take the source count explicitly.
    """

    matrix: np.ndarray
    m: int
    n: int
    source_count_hint: int | None = None
    noise_variance: float | None = None

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        mn = self.m * self.n
        if r.shape != (mn, mn):
            raise DomainError(f"covariance must be {mn} x {mn}, got {r.shape}")
        if not np.isfinite(r).all():
            raise DomainError("covariance entries must be finite")
        scale = np.linalg.norm(r)
        if scale > 0 and np.linalg.norm(r - r.conj().T) > HERMITIAN_RTOL * scale:
            raise DomainError("covariance must be Hermitian")
        r.flags.writeable = False
        object.__setattr__(self, "matrix", r)

    @property
    def mn(self) -> int:
        return self.m * self.n


def synthesize(geom: ArrayGeometry, sources: SourceSet, snapshots: int,
               snr_db: float, seed: int) -> SnapshotMatrix:
    """Draw L noisy snapshots from the separable array model.

    Sources are i.i.d. unit-power circular complex Gaussian; noise is circular
    complex Gaussian with variance 10**(-snr_db/10) per element. ``snr_db``
    may be ``math.inf`` for a noiseless draw. The same seed always reproduces
    the same matrix bit for bit (sources drawn first, then noise).
    """
    if snapshots < 1:
        raise DomainError("need at least one snapshot")
    a, _, _ = steering_matrix(geom, sources)
    rng = np.random.default_rng(seed)
    p = sources.p
    x = (rng.standard_normal((p, snapshots)) + 1j * rng.standard_normal((p, snapshots)))
    x *= np.sqrt(0.5)
    noise_var = 10.0 ** (-snr_db / 10.0)
    w = (rng.standard_normal((geom.mn, snapshots))
         + 1j * rng.standard_normal((geom.mn, snapshots)))
    w *= np.sqrt(0.5 * noise_var)
    return SnapshotMatrix(a @ x + w, geom.m, geom.n, seed=seed)


def sample_covariance(snap: SnapshotMatrix,
                      source_count_hint: int | None = None) -> Covariance:
    """Sample covariance (1/L) Y Y^H of a snapshot matrix."""
    y = snap.data
    r = y @ y.conj().T / snap.snapshots
    r = 0.5 * (r + r.conj().T)
    return Covariance(r, snap.m, snap.n, source_count_hint=source_count_hint)


def exact_covariance(geom: ArrayGeometry, sources: SourceSet,
                     source_cov: np.ndarray | None = None,
                     noise_variance: float = 0.0) -> Covariance:
    """Exact covariance A R_xx A^H + noise_variance * I.

    ``source_cov`` defaults to the identity (uncorrelated unit-power sources)
    and must be Hermitian and full rank for the signal subspace to span the
    steering columns.
    """
    if noise_variance < 0:
        raise DomainError("noise_variance must be non-negative")
    a, _, _ = steering_matrix(geom, sources)
    p = sources.p
    if source_cov is None:
        rxx = np.eye(p, dtype=complex)
    else:
        rxx = np.asarray(source_cov, dtype=complex)
        if rxx.shape != (p, p):
            raise DomainError(f"source covariance must be {p} x {p}, got {rxx.shape}")
        if np.linalg.norm(rxx - rxx.conj().T) > HERMITIAN_RTOL * max(np.linalg.norm(rxx), 1e-300):
            raise DomainError("source covariance must be Hermitian")
        ev = np.linalg.eigvalsh(rxx)
        if ev[0] <= 1e-12 * max(ev[-1], 0.0):
            raise DomainError("source covariance must be full rank")
    r = a @ rxx @ a.conj().T + noise_variance * np.eye(geom.mn)
    r = 0.5 * (r + r.conj().T)
    return Covariance(r, geom.m, geom.n, source_count_hint=p,
                      noise_variance=float(noise_variance))


def save_snapshots(snap: SnapshotMatrix, path) -> None:
    """Write snapshots as a one-line JSON header plus raw binary samples.

    The header records the dimensions and seed; the payload is the matrix in
    row-major order as little-endian float64 pairs (real, imag), which is the
    wire layout of little-endian complex128.
    """
    header = {
        "rows": snap.data.shape[0],
        "cols": snap.data.shape[1],
        "m": snap.m,
        "n": snap.n,
        "seed": snap.seed,
        "layout": "row-major complex128, little-endian interleaved (re, im) float64",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(snap.data).astype("<c16").tobytes())


def load_snapshots(path) -> SnapshotMatrix:
    """Read a snapshot file written by :func:`save_snapshots`."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
        rows, cols = header["rows"], header["cols"]
        m, n = header["m"], header["n"]
    except (ValueError, KeyError) as exc:
        raise DomainError(f"bad snapshot header: {exc}") from exc
    data = np.frombuffer(payload, dtype="<c16")
    if data.size != rows * cols:
        raise DomainError(
            f"snapshot payload holds {data.size} samples, header promises {rows * cols}"
        )
    return SnapshotMatrix(data.reshape(rows, cols).astype(complex), m, n,
                          seed=header.get("seed"))
