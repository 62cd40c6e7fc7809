"""Joint signal subspace extraction and its separable decoupling.

Every column of the joint signal subspace basis is the vectorization of a
rank-structured N x M matrix: unvec(q_p) = A_v diag(g_p) A_h^T for some
nonzero gain vector g_p. Stacking the columns of these unvec'd matrices side
by side therefore spans the column space of the vertical factor A_v alone,
and stacking their rows spans that of the horizontal factor A_h. The stacks
reduce the joint 2-D estimation problem to two independent 1-D problems; the
gains themselves are never computed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapabilityError, DomainError, SubspaceSeparationWarning
from .synth import Covariance

# Eigenvalue gap (relative to the largest eigenvalue) below which the
# signal/noise split is reported as unreliable.
SEPARATION_RTOL = 1e-12


@dataclass(frozen=True)
class JointSubspace:
    """Dominant eigenvectors of an array covariance plus shape metadata.

    ``basis`` is (M*N) x P with orthonormal columns ordered by decreasing
    eigenvalue; ``eigenvalues`` are the matching P largest eigenvalues.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        ev = np.asarray(self.eigenvalues, dtype=float)
        if b.ndim != 2 or b.shape[0] != self.m * self.n:
            raise DomainError("basis must have M*N rows")
        if ev.shape != (b.shape[1],):
            raise DomainError("need one eigenvalue per basis column")
        if np.any(np.diff(ev) > 0):
            raise DomainError("eigenvalues must be sorted in decreasing order")
        b.flags.writeable = False
        ev.flags.writeable = False
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def p(self) -> int:
        """Number of retained (signal) dimensions."""
        return self.basis.shape[1]


@dataclass(frozen=True)
class DecoupledSubspaces:
    """Per-axis signal subspaces recovered from a joint basis.

    ``azimuth_basis`` (M x P) spans the horizontal steering factor's column
    space, ``elevation_basis`` (N x P) the vertical one. The singular values
    of the generating stacks are kept for diagnostics.
    """

    azimuth_basis: np.ndarray
    elevation_basis: np.ndarray
    azimuth_singular_values: np.ndarray
    elevation_singular_values: np.ndarray


def signal_subspace(cov: Covariance, num_sources: int) -> JointSubspace:
    """Extract the P-dimensional dominant eigenspace of a covariance.

    Warns with :class:`SubspaceSeparationWarning` when the P-th and (P+1)-th
    eigenvalues coincide to within ``SEPARATION_RTOL`` of the largest, since
    the subspace split is then arbitrary.
    """
    mn = cov.mn
    if num_sources < 1:
        raise DomainError("num_sources must be at least 1")
    if num_sources >= mn:
        raise DomainError(
            f"num_sources must be below the array size M*N = {mn}, got {num_sources}"
        )
    # Only the top P+1 eigenpairs are needed: P for the basis, one more to
    # judge the signal/noise separation. Covariance validated finiteness at
    # construction, so the solver's own scan is skipped.
    lo = mn - num_sources - 1
    vals, vecs = scipy.linalg.eigh(cov.matrix, subset_by_index=(lo, mn - 1),
                                   check_finite=False)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    scale = max(vals[0], np.finfo(float).tiny)
    if (vals[num_sources - 1] - vals[num_sources]) <= SEPARATION_RTOL * scale:
        warnings.warn(
            "signal and noise eigenvalues are not separated; the subspace "
            "split is unreliable",
            SubspaceSeparationWarning,
            stacklevel=2,
        )
    return JointSubspace(vecs[:, :num_sources],
                         np.maximum(vals[:num_sources], 0.0), cov.m, cov.n)


def unvec_column(q: np.ndarray, n: int, m: int) -> np.ndarray:
    """Reshape a length M*N vector into its N x M matrix form.

    Inverse of column-major vectorization: out[i, j] = q[j*n + i], so a
    Kronecker-product column a_h kron a_v unfolds to the rank-one matrix
    a_v a_h^T.
    """
    q = np.asarray(q)
    if q.shape != (m * n,):
        raise DomainError(f"expected a vector of length {m * n}, got shape {q.shape}")
    return q.reshape(m, n).T


def _basis_cube(js: JointSubspace) -> np.ndarray:
    # (M, N, P) view: cube[m, n, p] = basis[m*N + n, p] = unvec(q_p)[n, m]
    return js.basis.reshape(js.m, js.n, js.p)


def build_elevation_stack(js: JointSubspace) -> np.ndarray:
    """N x (M*P) stack whose column space equals that of the vertical factor.

    Block r (r = 0..M-1) collects column r of every unvec'd basis column:
    block_r[:, p] = unvec(q_p)[:, r].
    """
    cube = _basis_cube(js)
    return cube.transpose(1, 0, 2).reshape(js.n, js.m * js.p)


def build_azimuth_stack(js: JointSubspace) -> np.ndarray:
    """M x (N*P) stack whose column space equals that of the horizontal factor.

    Block r (r = 0..N-1) collects row r of every unvec'd basis column:
    block_r[:, p] = unvec(q_p)[r, :]^T.
    """
    cube = _basis_cube(js)
    return cube.reshape(js.m, js.n * js.p)


def decouple(js: JointSubspace) -> DecoupledSubspaces:
    """Split a joint signal subspace into independent per-axis subspaces.

    Requires P <= min(M, N) - 1; beyond that the per-axis stacks lose the
    noise dimensions the 1-D estimators need, which is the detectability
    limit of the decoupled approach.
    """
    limit = min(js.m, js.n) - 1
    if js.p > limit:
        raise CapabilityError(
            f"decoupled estimation can resolve at most min(M, N) - 1 = {limit} "
            f"sources on a {js.m} x {js.n} array; got {js.p}. Reduce the source "
            "count or use the joint 2-D search."
        )
    c = build_elevation_stack(js)
    b = build_azimuth_stack(js)
    ub, sb, _ = np.linalg.svd(b, full_matrices=False)
    uc, sc, _ = np.linalg.svd(c, full_matrices=False)
    return DecoupledSubspaces(
        azimuth_basis=ub[:, : js.p],
        elevation_basis=uc[:, : js.p],
        azimuth_singular_values=sb,
        elevation_singular_values=sc,
    )
