"""One-dimensional frequency estimators operating on a signal-subspace basis.

All estimators share the same input: an orthonormal K x P basis of the signal
subspace of one sensor axis, plus that axis's positions (grid searches) or its
uniform spacing (rooting methods). The pseudospectrum used throughout is the
noise-subspace projection power a^H (I - U U^H) a, which dips to zero at the
true angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CapabilityError, DomainError, EstimationError
from .geometry import TWO_PI, _mu_unchecked, angle_to_mu

# Scan domain in degrees; together with the 1 deg default coarse step this
# yields 181 grid points per axis.
SCAN_MIN_DEG = 0.0
SCAN_MAX_DEG = 180.0

DEFAULT_COARSE_STEP_DEG = 1.0
DEFAULT_FINE_STEP_DEG = 0.05
DEFAULT_FINE_HALFWIDTH_DEG = 1.0

# Angle tolerance of the bounded scalar refinement, degrees.
OPT_XATOL_DEG = 1e-4

# Frequencies may overshoot the visible region [-2*pi, 2*pi] by at most this
# much before readout fails instead of clamping.
MU_CLAMP_SLACK = 1e-6

# Condition-number ceiling for the shift-invariance least-squares block.
ESPRIT_COND_LIMIT = 1e12

# Roots closer than this (in the conjugate-reciprocal sense) are images of
# the same polynomial root pair and collapse to one candidate.
ROOT_DEDUPE_TOL = 1e-6

# End coefficients below this fraction of the largest one carry no roots,
# only companion-matrix conditioning damage, and are trimmed before rooting.
COEFF_TRIM_RTOL = 1e-12


@dataclass(frozen=True)
class Spectrum1D:
    """Pseudospectrum samples over an angle grid (degrees)."""

    angles_deg: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.angles_deg, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise DomainError("grid and values must be equal-length 1-D arrays")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise DomainError("angle grid must be strictly increasing")
        g.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "angles_deg", g)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FrequencyEstimates:
    """P estimated spatial frequencies with their angle-domain equivalents.

    ``coarse_evaluations`` records how many grid points the coarse stage
    evaluated, when a grid stage was involved.
    """

    mu: np.ndarray
    angles_deg: np.ndarray
    coarse_evaluations: int | None = None


def _check_basis(basis, strict_noise_dim=True):
    b = np.asarray(basis, dtype=complex)
    if b.ndim != 2:
        raise DomainError("basis must be a K x P matrix")
    k, p = b.shape
    if p < 1:
        raise DomainError("basis must have at least one column")
    if strict_noise_dim and p >= k:
        raise DomainError(
            f"basis leaves no noise subspace (P = {p} columns on a K = {k} axis)"
        )
    return b, k, p


def uniform_spacing(positions) -> float:
    """Common adjacent spacing of an axis, for the rooting-based estimators.

    Raises :class:`CapabilityError` on a non-uniform axis, pointing at the
    grid-search backends which have no uniformity requirement.
    """
    p = np.asarray(positions, dtype=float)
    if p.size < 2:
        raise DomainError("need at least two positions to define a spacing")
    d = np.diff(p)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise CapabilityError(
            "this estimator requires uniformly spaced sensors; the axis "
            "spacing varies. Use the spectral search backends (music, "
            "music-opt) for non-uniform axes."
        )
    return float(d[0])


def _table_values(bh, table):
    # projection residual against precomputed steering columns; bh is the
    # conjugate-transposed basis
    proj = bh @ table
    return np.maximum(bh.shape[1] - (proj.real ** 2 + proj.imag ** 2).sum(0), 0.0)


def _music_values(bh, pos, mu):
    # unvalidated spectrum kernel shared by the search loops
    return _table_values(bh, np.exp(-1j * pos[:, None] * mu[None, :]))


def music_spectrum_1d(basis, positions, angles_deg) -> Spectrum1D:
    """Noise-projection pseudospectrum over an angle grid.

    values[i] = a(mu_i)^H (I - U U^H) a(mu_i), clamped at zero against
    rounding. Minima mark candidate arrival angles.
    """
    b, k, _ = _check_basis(basis)
    pos = np.asarray(positions, dtype=float)
    if pos.size != k:
        raise DomainError(f"basis has {k} rows but {pos.size} positions were given")
    grid = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    return Spectrum1D(grid, _music_values(b.conj().T, pos, angle_to_mu(grid)))


def _minima_angles(angles, values, count):
    if values.size < 3:
        raise DomainError("need at least three grid points to find local minima")
    interior = (values[1:-1] < values[:-2]) & (values[1:-1] < values[2:])
    idx = np.flatnonzero(interior) + 1
    if idx.size < count:
        raise EstimationError(
            f"spectrum has {idx.size} local minima, fewer than the {count} requested"
        )
    order = np.argsort(values[idx], kind="stable")[:count]
    return np.sort(angles[idx[order]])


def find_minima(spectrum: Spectrum1D, count: int) -> np.ndarray:
    """Angles of the ``count`` smallest strict local minima of a spectrum.

    A point qualifies only when strictly smaller than both neighbours.
    Raises :class:`EstimationError` when the spectrum has fewer qualifying
    minima than requested.
    """
    if count < 1:
        raise DomainError("count must be at least 1")
    return _minima_angles(spectrum.angles_deg, spectrum.values, count)


# grid/frequency pairs are identical across calls at the same step, and the
# search loops rebuild them thousands of times per sweep; cache them read-only
_SCAN_CACHE: dict = {}


def _scan_grid(step_deg):
    key = float(step_deg)
    hit = _SCAN_CACHE.get(key)
    if hit is None:
        n = int(round((SCAN_MAX_DEG - SCAN_MIN_DEG) / key)) + 1
        grid = np.linspace(SCAN_MIN_DEG, SCAN_MAX_DEG, n)
        mu = _mu_unchecked(grid)
        grid.flags.writeable = False
        mu.flags.writeable = False
        hit = _SCAN_CACHE[key] = (grid, mu)
    return hit


def _fine_grid(center, halfwidth, step):
    lo = max(SCAN_MIN_DEG, center - halfwidth)
    hi = min(SCAN_MAX_DEG, center + halfwidth)
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


_OFFSET_CACHE: dict = {}


def _fine_offsets(halfwidth, step):
    key = (float(halfwidth), float(step))
    off = _OFFSET_CACHE.get(key)
    if off is None:
        n = int(round(2.0 * halfwidth / step)) + 1
        off = np.linspace(-halfwidth, halfwidth, n)
        off.flags.writeable = False
        _OFFSET_CACHE[key] = off
    return off


# coarse steering tables are pure functions of (axis positions, step) and get
# rebuilt for every estimate in a sweep otherwise; a few cached entries cover
# the axes in play
_TABLE_CACHE: dict = {}


def _coarse_table(pos, coarse_step):
    key = (pos.tobytes(), float(coarse_step))
    table = _TABLE_CACHE.get(key)
    if table is None:
        _, mu = _scan_grid(coarse_step)
        table = np.exp(-1j * pos[:, None] * mu[None, :])
        table.flags.writeable = False
        if len(_TABLE_CACHE) >= 8:
            _TABLE_CACHE.pop(next(iter(_TABLE_CACHE)))
        _TABLE_CACHE[key] = table
    return table


def _coarse_minima(bh, pos, count, coarse_step):
    grid, _ = _scan_grid(coarse_step)
    values = _table_values(bh, _coarse_table(pos, coarse_step))
    return _minima_angles(grid, values, count), grid.size


def coarse_fine_search(basis, positions, count,
                       coarse_step=DEFAULT_COARSE_STEP_DEG,
                       fine_step=DEFAULT_FINE_STEP_DEG,
                       fine_halfwidth=DEFAULT_FINE_HALFWIDTH_DEG) -> FrequencyEstimates:
    """Two-stage spectral search: full coarse scan, then local fine scans.

    The coarse stage scans [0, 180] degrees at ``coarse_step``; each coarse
    minimum is then re-scanned on a +-``fine_halfwidth`` window at
    ``fine_step`` and replaced by that window's lowest point.
    """
    b, k, _ = _check_basis(basis)
    pos = np.asarray(positions, dtype=float)
    if pos.size != k:
        raise DomainError(f"basis has {k} rows but {pos.size} positions were given")
    bh = b.conj().T
    coarse, n_coarse = _coarse_minima(bh, pos, count, coarse_step)
    offsets = _fine_offsets(fine_halfwidth, fine_step)
    if (coarse[0] - fine_halfwidth >= SCAN_MIN_DEG
            and coarse[-1] + fine_halfwidth <= SCAN_MAX_DEG):
        # no window touches the scan edge: evaluate all of them in one batch
        grids = coarse[:, None] + offsets[None, :]
        values = _music_values(bh, pos, _mu_unchecked(grids.ravel()))
        values = values.reshape(count, offsets.size)
        refined = grids[np.arange(count), values.argmin(axis=1)]
    else:
        refined = np.empty(count)
        for i, center in enumerate(coarse):
            grid = _fine_grid(center, fine_halfwidth, fine_step)
            values = _music_values(bh, pos, _mu_unchecked(grid))
            refined[i] = grid[int(np.argmin(values))]
    refined = np.sort(refined)
    return FrequencyEstimates(_mu_unchecked(refined), refined,
                              coarse_evaluations=n_coarse)


def _refine_opt(bh, pos, bracket):
    k = pos.size

    def objective(angle):
        t = bh @ np.exp(-1j * pos * _mu_unchecked(angle))
        return k - float(np.vdot(t, t).real)

    res = minimize_scalar(objective, bounds=bracket, method="bounded",
                          options={"xatol": OPT_XATOL_DEG})
    return float(res.x)


def refine_opt(basis, positions, bracket) -> float:
    """Refine one angle by bounded scalar minimization of the pseudospectrum.

    Golden-section search with parabolic acceleration over the bracket,
    terminating at an angle tolerance of ``OPT_XATOL_DEG``. A bracket that
    excludes the minimum simply returns (essentially) the nearer endpoint.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise DomainError(f"bracket must satisfy lo < hi, got ({lo}, {hi})")
    if not (SCAN_MIN_DEG <= lo and hi <= SCAN_MAX_DEG):
        raise DomainError(f"bracket must lie inside the scan domain, got ({lo}, {hi})")
    b, _, _ = _check_basis(basis)
    pos = np.asarray(positions, dtype=float)
    return _refine_opt(b.conj().T, pos, (lo, hi))


def coarse_opt_search(basis, positions, count,
                      coarse_step=DEFAULT_COARSE_STEP_DEG,
                      halfwidth=DEFAULT_FINE_HALFWIDTH_DEG) -> FrequencyEstimates:
    """Two-stage search with a continuous refinement stage.

    Same coarse scan as :func:`coarse_fine_search`, but each coarse minimum is
    refined by :func:`refine_opt` on the surrounding bracket instead of a
    fine grid.
    """
    b, k, _ = _check_basis(basis)
    pos = np.asarray(positions, dtype=float)
    if pos.size != k:
        raise DomainError(f"basis has {k} rows but {pos.size} positions were given")
    bh = b.conj().T
    coarse, n_coarse = _coarse_minima(bh, pos, count, coarse_step)
    refined = np.sort([
        _refine_opt(bh, pos, (max(SCAN_MIN_DEG, c - halfwidth),
                              min(SCAN_MAX_DEG, c + halfwidth)))
        for c in coarse
    ])
    return FrequencyEstimates(_mu_unchecked(refined), refined,
                              coarse_evaluations=n_coarse)


def _mu_from_phase(phase, spacing):
    # phase = -arg(root); frequency readout mu = phase / spacing
    mu = phase / spacing
    if abs(mu) > TWO_PI + MU_CLAMP_SLACK:
        raise EstimationError(
            f"estimated spatial frequency {mu:.6f} lies outside the visible "
            f"region [-2*pi, 2*pi]"
        )
    return float(np.clip(mu, -TWO_PI, TWO_PI))


def _angles_from_mu(mu):
    return np.rad2deg(np.arccos(np.clip(np.asarray(mu) / TWO_PI, -1.0, 1.0)))


def _same_root_pair(z, y):
    # Same root, or its conjugate-reciprocal image (which has the same phase).
    return (abs(z * np.conj(y) - 1.0) < ROOT_DEDUPE_TOL
            or abs(z - y) < ROOT_DEDUPE_TOL)


def root_music_1d(basis, spacing, count) -> FrequencyEstimates:
    """Search-free spectral estimation by rooting the noise-projection polynomial.

    The pseudospectrum restricted to the unit circle z = exp(-1j*mu*spacing)
    is a Laurent polynomial whose coefficient at lag k is the k-th diagonal
    sum of the noise projector; its roots touching the circle mark the source
    frequencies. Uniform axes only (the polynomial identity needs a pure
    Vandermonde steering structure).

    Selects the ``count`` roots nearest the unit circle from inside,
    breaking exact distance ties toward larger magnitude and skipping
    conjugate-reciprocal images of already-selected roots.
    """
    b, k, p = _check_basis(basis)
    if count != p:
        raise DomainError(f"basis has {p} columns but {count} estimates were requested")
    if spacing <= 0:
        raise DomainError("spacing must be positive")
    if k < 2:
        raise DomainError("rooting needs at least two sensors on the axis")
    proj = np.eye(k, dtype=complex) - b @ b.conj().T
    coeffs = np.array([np.trace(proj, offset=off) for off in range(k - 1, -k, -1)])
    scale = float(np.abs(coeffs).max())
    if scale == 0.0:
        raise EstimationError("noise-projection polynomial is identically zero")
    # Mirror-symmetric source sets can zero out whole end diagonals of the
    # projector; np.roots would then normalize by rounding junk and splinter
    # the on-circle double roots. Trim the numerically-zero ends first (they
    # hold no information, just roots pushed to 0 and infinity).
    live = np.flatnonzero(np.abs(coeffs) > COEFF_TRIM_RTOL * scale)
    coeffs = coeffs[live[0]:live[-1] + 1]
    roots = np.roots(coeffs)
    if roots.size == 0:
        raise EstimationError("noise-projection polynomial has no roots")
    dist = np.abs(np.abs(roots) - 1.0)
    order = np.lexsort((-np.abs(roots), dist))
    chosen = []
    for z in roots[order]:
        if any(_same_root_pair(z, y) for y in chosen):
            continue
        chosen.append(z)
        if len(chosen) == count:
            break
    if len(chosen) < count:
        raise EstimationError(
            f"only {len(chosen)} distinct roots available, {count} requested"
        )
    # Read each phase through the root's conjugate-reciprocal cluster. Exact
    # partner pairs share one argument, so this changes nothing in the
    # generic case; when rounding splits an on-circle double root into two
    # images, the circular mean cancels the first-order split.
    phases = []
    for z in chosen:
        mask = (np.abs(roots * np.conj(z) - 1.0) < ROOT_DEDUPE_TOL) \
            | (np.abs(roots - z) < ROOT_DEDUPE_TOL)
        cluster = roots[mask]
        phases.append(np.angle(np.sum(cluster / np.abs(cluster))))
    mu = np.array([_mu_from_phase(-ph, spacing) for ph in phases])
    angles = _angles_from_mu(mu)
    order = np.argsort(angles, kind="stable")
    return FrequencyEstimates(mu[order], angles[order])


def esprit_1d(basis, spacing, count) -> FrequencyEstimates:
    """Search-free estimation from the basis's shift invariance.

    Solves U[:-1] Psi ~= U[1:] in least squares; the eigenvalue phases of Psi
    carry the per-sensor propagation phase -mu*spacing. Uniform axes only.
    """
    b, k, p = _check_basis(basis, strict_noise_dim=False)
    if count != p:
        raise DomainError(f"basis has {p} columns but {count} estimates were requested")
    if p > k - 1:
        raise DomainError(
            f"shift invariance needs P <= K - 1 (got P = {p} on a K = {k} axis)"
        )
    if spacing <= 0:
        raise DomainError("spacing must be positive")
    upper = b[:-1, :]
    lower = b[1:, :]
    if np.linalg.cond(upper) > ESPRIT_COND_LIMIT:
        raise EstimationError(
            "shift-invariance block is rank deficient; the axis subspace does "
            "not determine a rotation"
        )
    psi, *_ = np.linalg.lstsq(upper, lower, rcond=None)
    lam = np.linalg.eigvals(psi)
    mu = np.array([_mu_from_phase(-np.angle(v), spacing) for v in lam])
    angles = _angles_from_mu(mu)
    order = np.argsort(angles, kind="stable")
    return FrequencyEstimates(mu[order], angles[order])
