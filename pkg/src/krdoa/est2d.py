"""Joint azimuth-elevation estimation: decoupled pipelines, pairing, and the
full 2-D spectral baseline.

The decoupled path runs a 1-D estimator per axis on the decoupled subspaces
and then matches azimuths to elevations with the joint noise projector: the
steering vector of a correctly matched pair lies in the signal subspace, so
its projection residual is near zero, and the optimal assignment over the
P x P candidate grid recovers the pairing. The 2-D baseline searches the full
angle-angle grid instead and needs no pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CapabilityError, DomainError, EstimationError
from .est1d import (
    DEFAULT_COARSE_STEP_DEG,
    DEFAULT_FINE_HALFWIDTH_DEG,
    DEFAULT_FINE_STEP_DEG,
    FrequencyEstimates,
    _coarse_table,
    _fine_grid,
    _scan_grid,
    coarse_fine_search,
    coarse_opt_search,
    esprit_1d,
    root_music_1d,
    uniform_spacing,
)
from .geometry import ArrayGeometry, _mu_unchecked, angle_to_mu
from .subspace import JointSubspace, decouple, signal_subspace
from .synth import Covariance


class DecoupledBackend(str, Enum):
    """1-D estimator used on each decoupled axis."""

    ROOT_MUSIC = "rmusic"
    ESPRIT = "esprit"
    MUSIC = "music"
    MUSIC_OPT = "music-opt"


@dataclass(frozen=True)
class EstimateSet:
    """Paired (azimuth, elevation) estimates in degrees.

    ``pairs`` is P x 2 with azimuth in column 0; ``pairing_costs`` holds the
    joint noise-projection residual of each returned pair (lower is better).
    ``diagnostics`` carries method bookkeeping such as coarse-grid evaluation
    counts.
    """

    pairs: np.ndarray
    pairing_costs: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=float)
        c = np.asarray(self.pairing_costs, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise DomainError("pairs must be a P x 2 array")
        if c.shape != (p.shape[0],):
            raise DomainError("need one pairing cost per pair")
        p.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "pairs", p)
        object.__setattr__(self, "pairing_costs", c)

    @property
    def p(self) -> int:
        return self.pairs.shape[0]

    @property
    def azimuth_deg(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def elevation_deg(self) -> np.ndarray:
        return self.pairs[:, 1]


def _cost_values(js, mn, a_h, a_v):
    # unvalidated pairing kernel; a_h and a_v are the per-axis steering
    # matrices of the candidate angle lists
    cube = js.basis.conj().reshape(js.m, js.n, js.p)
    # half[i, n, p] = sum_m conj(Q[m*N+n, p]) a_h[m, i]
    half = (a_h.T @ cube.reshape(js.m, js.n * js.p)).reshape(-1, js.n, js.p)
    proj = half.transpose(0, 2, 1) @ a_v
    costs = mn - (proj.real ** 2 + proj.imag ** 2).sum(1)
    return np.maximum(costs, 0.0)


def pairing_cost_matrix(js: JointSubspace, geom: ArrayGeometry,
                        azimuth_deg, elevation_deg) -> np.ndarray:
    """Joint noise-projection residual for every azimuth/elevation combination.

    Entry (i, j) is a^H (I - Q Q^H) a for the joint steering vector built
    from azimuth i and elevation j, clamped at zero. Correct pairs give
    near-zero entries.
    """
    az = np.atleast_1d(np.asarray(azimuth_deg, dtype=float))
    el = np.atleast_1d(np.asarray(elevation_deg, dtype=float))
    if az.size != el.size:
        raise DomainError("need equally many azimuth and elevation candidates")
    if az.size < 1:
        raise DomainError("need at least one candidate pair")
    if geom.m != js.m or geom.n != js.n:
        raise DomainError("geometry and subspace disagree on the array shape")
    a_h = np.exp(-1j * np.outer(geom.x_positions, angle_to_mu(az)))
    a_v = np.exp(-1j * np.outer(geom.z_positions, angle_to_mu(el)))
    return _cost_values(js, geom.mn, a_h, a_v)


def _assign_pairs(az, el, costs):
    rows, cols = linear_sum_assignment(costs)
    return np.column_stack([az[rows], el[cols]]), costs[rows, cols]


def _pair(js, geom, az, el):
    # pipeline-internal pairing; angles come from the axis estimators and are
    # already inside the scan domain
    a_h = np.exp(-1j * np.outer(geom.x_positions, _mu_unchecked(az)))
    a_v = np.exp(-1j * np.outer(geom.z_positions, _mu_unchecked(el)))
    return _assign_pairs(az, el, _cost_values(js, geom.mn, a_h, a_v))


def pair_angles(js: JointSubspace, geom: ArrayGeometry,
                azimuth_deg, elevation_deg) -> EstimateSet:
    """Match per-axis angle estimates into 2-D pairs.

    Solves the optimal assignment over the P x P cost matrix of
    :func:`pairing_cost_matrix`. The output keeps the order of
    ``azimuth_deg``; permuting the inputs permutes the pairs but never
    changes them as a set.
    """
    az = np.atleast_1d(np.asarray(azimuth_deg, dtype=float))
    el = np.atleast_1d(np.asarray(elevation_deg, dtype=float))
    costs = pairing_cost_matrix(js, geom, az, el)
    pairs, paired = _assign_pairs(az, el, costs)
    return EstimateSet(pairs, paired, method="paired")


def _stage(name, fn, *args, **kwargs):
    # Re-raise capability/estimation failures with the pipeline stage named,
    # preserving the exception type for callers that dispatch on it.
    try:
        return fn(*args, **kwargs)
    except (CapabilityError, EstimationError) as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _axis_estimates(basis, positions, count, backend,
                    coarse_step, fine_step, fine_halfwidth) -> FrequencyEstimates:
    if backend is DecoupledBackend.ROOT_MUSIC:
        return root_music_1d(basis, uniform_spacing(positions), count)
    if backend is DecoupledBackend.ESPRIT:
        return esprit_1d(basis, uniform_spacing(positions), count)
    if backend is DecoupledBackend.MUSIC:
        return coarse_fine_search(basis, positions, count, coarse_step,
                                  fine_step, fine_halfwidth)
    if backend is DecoupledBackend.MUSIC_OPT:
        return coarse_opt_search(basis, positions, count, coarse_step,
                                 fine_halfwidth)
    raise DomainError(f"unknown backend {backend!r}")


def estimate_decoupled(cov: Covariance, geom: ArrayGeometry, num_sources: int,
                       backend: DecoupledBackend | str,
                       coarse_step=DEFAULT_COARSE_STEP_DEG,
                       fine_step=DEFAULT_FINE_STEP_DEG,
                       fine_halfwidth=DEFAULT_FINE_HALFWIDTH_DEG) -> EstimateSet:
    """Full decoupled pipeline: subspace, per-axis 1-D estimation, pairing.

    ``backend`` picks the 1-D estimator; the rooting backends require both
    axes to be uniformly spaced. Capability and estimation errors name the
    stage that failed.
    """
    backend = DecoupledBackend(backend)
    if geom.m != cov.m or geom.n != cov.n:
        raise DomainError("geometry and covariance disagree on the array shape")
    js = _stage("signal subspace", signal_subspace, cov, num_sources)
    dec = _stage("subspace decoupling", decouple, js)
    az = _stage("azimuth estimation", _axis_estimates, dec.azimuth_basis,
                geom.x_positions, num_sources, backend,
                coarse_step, fine_step, fine_halfwidth)
    el = _stage("elevation estimation", _axis_estimates, dec.elevation_basis,
                geom.z_positions, num_sources, backend,
                coarse_step, fine_step, fine_halfwidth)
    pairs, paired = _stage("angle pairing", _pair, js, geom,
                           az.angles_deg, el.angles_deg)
    diagnostics = {"backend": backend.value}
    if az.coarse_evaluations is not None:
        diagnostics["coarse_evaluations"] = (az.coarse_evaluations
                                             + el.coarse_evaluations)
    return EstimateSet(pairs, paired, method=f"de-{backend.value}",
                       diagnostics=diagnostics)


def _spectrum_rows(qs_h, a_h_cols, a_v_grid, mn):
    """Joint pseudospectrum one azimuth row at a time.

    Each row builds the full M*N steering block for one azimuth candidate
    against every elevation candidate and projects it; rows are independent
    (data-parallel over the azimuth grid).
    """
    n_az = a_h_cols.shape[1]
    n_el = a_v_grid.shape[1]
    out = np.empty((n_az, n_el))
    for i in range(n_az):
        block = (a_h_cols[:, i][:, None, None] * a_v_grid[None, :, :])
        proj = qs_h @ block.reshape(mn, n_el)
        out[i] = mn - np.einsum("pj,pj->j", proj, proj.conj()).real
    return np.maximum(out, 0.0)


def _local_minima_2d(values):
    # Strict minima over the 8-neighbourhood; +inf padding lets boundary
    # points qualify against their existing neighbours only.
    v = np.pad(values, 1, constant_values=np.inf)
    center = v[1:-1, 1:-1]
    mask = np.ones(center.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= center < v[1 + di: v.shape[0] - 1 + di,
                               1 + dj: v.shape[1] - 1 + dj]
    return np.argwhere(mask)


def estimate_2d_music(cov: Covariance, geom: ArrayGeometry, num_sources: int,
                      coarse_step=DEFAULT_COARSE_STEP_DEG,
                      fine_step=DEFAULT_FINE_STEP_DEG,
                      fine_halfwidth=DEFAULT_FINE_HALFWIDTH_DEG) -> EstimateSet:
    """Joint 2-D spectral search baseline.

    Scans the full azimuth x elevation coarse grid, keeps the ``num_sources``
    lowest strict local minima of the joint pseudospectrum, and refines each
    on a local fine grid. Estimates come out inherently paired; the price is
    a coarse grid quadratically larger than the decoupled scans.
    """
    if geom.m != cov.m or geom.n != cov.n:
        raise DomainError("geometry and covariance disagree on the array shape")
    js = _stage("signal subspace", signal_subspace, cov, num_sources)
    qs_h = js.basis.conj().T
    az_grid, _ = _scan_grid(coarse_step)
    el_grid, _ = _scan_grid(coarse_step)
    a_h = _coarse_table(geom.x_positions, coarse_step)
    a_v = _coarse_table(geom.z_positions, coarse_step)
    coarse = _spectrum_rows(qs_h, a_h, a_v, geom.mn)
    minima = _local_minima_2d(coarse)
    if minima.shape[0] < num_sources:
        raise EstimationError(
            f"joint search: spectrum has {minima.shape[0]} local minima, fewer "
            f"than the {num_sources} requested"
        )
    order = np.argsort(coarse[minima[:, 0], minima[:, 1]], kind="stable")
    picked = minima[order[:num_sources]]
    pairs = np.empty((num_sources, 2))
    costs = np.empty(num_sources)
    for s, (i, j) in enumerate(picked):
        az_fine = _fine_grid(az_grid[i], fine_halfwidth, fine_step)
        el_fine = _fine_grid(el_grid[j], fine_halfwidth, fine_step)
        ah_fine = np.exp(-1j * np.outer(geom.x_positions, angle_to_mu(az_fine)))
        av_fine = np.exp(-1j * np.outer(geom.z_positions, angle_to_mu(el_fine)))
        local = _spectrum_rows(qs_h, ah_fine, av_fine, geom.mn)
        fi, fj = np.unravel_index(int(np.argmin(local)), local.shape)
        pairs[s] = (az_fine[fi], el_fine[fj])
        costs[s] = local[fi, fj]
    order = np.argsort(pairs[:, 0], kind="stable")
    return EstimateSet(pairs[order], costs[order], method="2d-music",
                       diagnostics={"coarse_evaluations": az_grid.size * el_grid.size})
