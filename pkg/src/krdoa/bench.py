"""Monte-Carlo ensembles: RMSE sweeps, timing sweeps, CSV emission.

Run i of every sweep cell draws its snapshots with seed base_seed + i, and
every method in a cell sees the same snapshots, so method curves are paired
comparisons over common random numbers. Results are reduced in run-index
order, which makes the output independent of how runs are distributed over
workers. Timing sweeps always execute in-process and serially; concurrent
workers sharing cores would corrupt the wall-clock quantiles.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from time import perf_counter

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CapabilityError, DomainError, EstimationError
from .est2d import DecoupledBackend, EstimateSet, estimate_2d_music, estimate_decoupled
from .geometry import ArrayGeometry, ArrayKind, SourceSet
from .synth import sample_covariance, synthesize

SWEEP_AXES = ("snr", "snapshots", "size")

# CLI-facing estimator names with one-line descriptions for `list-methods`.
METHODS = {
    "de-rmusic": "decoupled root polynomial per axis (uniform axes only)",
    "de-esprit": "decoupled shift-invariance per axis (uniform axes only)",
    "de-music": "decoupled spectral search per axis, coarse 1 deg + fine 0.05 deg",
    "de-music-opt": "decoupled spectral search with bounded-optimizer refinement",
    "2d-music": "joint 2-D spectral search baseline, coarse 1 deg + fine 0.05 deg",
}


def dispatch_estimator(method: str, cov, geom, num_sources) -> EstimateSet:
    """Run one named estimator on a covariance."""
    if method == "2d-music":
        return estimate_2d_music(cov, geom, num_sources)
    if method.startswith("de-"):
        return estimate_decoupled(cov, geom, num_sources,
                                  DecoupledBackend(method[3:]))
    raise DomainError(f"unknown method {method!r}; known: {sorted(METHODS)}")


def rmse(truth: SourceSet, est: EstimateSet) -> float:
    """Root-mean-square angular error of one run, in degrees.

    Estimates are matched to the ground truth by optimal assignment on
    squared angular distance first, then
    sqrt((1/P) * sum_p [(d_azimuth_p)^2 + (d_elevation_p)^2]).
    """
    if est.p != truth.p:
        raise DomainError(
            f"estimate has {est.p} pairs but the truth has {truth.p} sources"
        )
    daz = truth.azimuth_deg[:, None] - est.azimuth_deg[None, :]
    dele = truth.elevation_deg[:, None] - est.elevation_deg[None, :]
    sq = daz ** 2 + dele ** 2
    rows, cols = linear_sum_assignment(sq)
    return float(np.sqrt(sq[rows, cols].sum() / truth.p))


@dataclass(frozen=True)
class GeometrySpec:
    """Recipe for building an array geometry, resizable for size sweeps."""

    kind: ArrayKind
    m: int
    n: int
    spacing: float = 0.5
    seed: int | None = None
    spacing_range: tuple = (0.3, 0.5)

    def build(self) -> ArrayGeometry:
        kind = ArrayKind(self.kind)
        if kind in (ArrayKind.URA, ArrayKind.UPGA):
            return ArrayGeometry.ura(self.m, self.n, self.spacing, kind=kind)
        if self.seed is None:
            raise DomainError(f"{kind.value} geometry needs a seed")
        return ArrayGeometry.nura(self.m, self.n, self.seed,
                                  tuple(self.spacing_range), kind=kind)

    def resized(self, m: int, n: int) -> "GeometrySpec":
        return GeometrySpec(self.kind, m, n, self.spacing, self.seed,
                            self.spacing_range)


@dataclass(frozen=True)
class SourceSpec:
    """Either an explicit source list or a seeded random-source policy.

    The random policy draws ``count`` sources (the string "min_dim_minus_1"
    tracks the decoupled detectability limit across a size sweep) uniformly
    inside [margin, 180 - margin] degrees, re-drawing until all pairwise
    angle gaps on both axes reach ``min_separation``.
    """

    pairs: tuple | None = None
    count: int | str | None = None
    seed: int | None = None
    margin_deg: float = 10.0
    min_separation_deg: float = 5.0

    def __post_init__(self):
        if (self.pairs is None) == (self.count is None):
            raise DomainError("give either explicit source pairs or a random count")
        if self.count is not None and self.seed is None:
            raise DomainError("a random source policy needs a seed")

    @classmethod
    def explicit(cls, pairs) -> "SourceSpec":
        return cls(pairs=tuple((float(a), float(e)) for a, e in pairs))

    def build(self, geom: ArrayGeometry) -> SourceSet:
        if self.pairs is not None:
            return SourceSet.from_pairs(self.pairs)
        count = self.count
        if count == "min_dim_minus_1":
            count = min(geom.m, geom.n) - 1
        if not isinstance(count, int) or count < 1:
            raise DomainError(f"bad random source count {self.count!r}")
        rng = np.random.default_rng(self.seed)
        lo, hi = self.margin_deg, 180.0 - self.margin_deg
        for _ in range(1000):
            az = np.sort(rng.uniform(lo, hi, size=count))
            el = np.sort(rng.uniform(lo, hi, size=count))
            gaps_ok = (count == 1
                       or (np.diff(az).min() >= self.min_separation_deg
                           and np.diff(el).min() >= self.min_separation_deg))
            if gaps_ok:
                perm = rng.permutation(count)
                return SourceSet(az, el[perm])
        raise EstimationError(
            f"could not draw {count} sources {self.min_separation_deg} deg apart"
        )


@dataclass(frozen=True)
class EnsembleConfig:
    """One sweep: geometry, sources, methods, axis, values, run count, seed."""

    geometry: GeometrySpec
    sources: SourceSpec
    methods: tuple
    sweep_axis: str
    sweep_values: tuple
    runs: int
    base_seed: int
    snr_db: float | None = None
    snapshots: int | None = None
    num_sources: int | None = None

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise DomainError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.methods:
            raise DomainError("need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise DomainError(f"unknown method {m!r}; known: {sorted(METHODS)}")
        if not self.sweep_values:
            raise DomainError("need at least one sweep value")
        if self.runs < 1:
            raise DomainError("need at least one run")
        if self.sweep_axis != "snr" and self.snr_db is None:
            raise DomainError("this sweep needs a fixed snr_db")
        if self.sweep_axis != "snapshots" and self.snapshots is None:
            raise DomainError("this sweep needs a fixed snapshot count")


@dataclass(frozen=True)
class SweepCell:
    """Aggregated results of one (sweep value, method) cell."""

    sweep_value: float
    method: str
    mean_rmse_deg: float
    std_rmse_deg: float
    runs: int
    failures: int
    median_s: float | None = None
    p10_s: float | None = None
    p90_s: float | None = None
    note: str | None = None


@dataclass(frozen=True)
class EnsembleResult:
    """All cells of one sweep, in (sweep value, method) order."""

    sweep_axis: str
    cells: tuple

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sweep_axis", "sweep_value", "method", "mean_rmse_deg",
                         "std_rmse_deg", "runs", "failures", "median_s",
                         "p10_s", "p90_s"])
        for c in self.cells:
            writer.writerow([
                self.sweep_axis, _fmt(c.sweep_value), c.method,
                _fmt(c.mean_rmse_deg), _fmt(c.std_rmse_deg),
                c.runs, c.failures,
                _fmt(c.median_s), _fmt(c.p10_s), _fmt(c.p90_s),
            ])
        return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _cell_params(config: EnsembleConfig, value):
    """Geometry, sources, snr, snapshots for one sweep value."""
    if config.sweep_axis == "size":
        m = int(value)
        spec = config.geometry.resized(m, m)
        geom = spec.build()
        snr_db = config.snr_db
        snapshots = config.snapshots
    else:
        geom = config.geometry.build()
        snr_db = float(value) if config.sweep_axis == "snr" else config.snr_db
        snapshots = int(value) if config.sweep_axis == "snapshots" else config.snapshots
    sources = config.sources.build(geom)
    return geom, sources, snr_db, snapshots


def _run_once(geom, sources, num_sources, methods, snr_db, snapshots, seed):
    """One Monte-Carlo run: synthesize once, estimate with every method.

    Returns {method: (rmse or None, duration_s, error message or None)}.
    """
    snap = synthesize(geom, sources, snapshots, snr_db, seed)
    cov = sample_covariance(snap, source_count_hint=sources.p)
    out = {}
    for name in methods:
        start = perf_counter()
        try:
            est = dispatch_estimator(name, cov, geom, num_sources)
        except (CapabilityError, EstimationError) as exc:
            out[name] = (None, perf_counter() - start, str(exc))
        else:
            out[name] = (rmse(sources, est), perf_counter() - start, None)
    return out


def _worker(args):
    payload, seed = args
    geom, sources, num_sources, methods, snr_db, snapshots = payload
    return _run_once(geom, sources, num_sources, methods, snr_db, snapshots, seed)


def _cell_runs(config, geom, sources, snr_db, snapshots, executor):
    num_sources = config.num_sources or sources.p
    payload = (geom, sources, num_sources, tuple(config.methods), snr_db, snapshots)
    seeds = [config.base_seed + i for i in range(config.runs)]
    if executor is None:
        return [_worker((payload, s)) for s in seeds]
    chunk = max(1, config.runs // 32)
    # map preserves submission order, so the reduction below stays in
    # run-index order no matter how many workers there are
    return list(executor.map(_worker, [(payload, s) for s in seeds],
                             chunksize=chunk))


def _aggregate(config, value, method, per_run, with_timing=False):
    errors = [r[method][2] for r in per_run]
    scores = np.array([r[method][0] for r in per_run if r[method][2] is None])
    failures = config.runs - scores.size
    if scores.size:
        mean = float(np.mean(scores))
        std = float(np.std(scores))
    else:
        mean = math.nan
        std = math.nan
    note = next((e for e in errors if e is not None), None)
    timing = {}
    if with_timing:
        durations = np.array([r[method][1] for r in per_run])
        timing = {
            "median_s": float(np.median(durations)),
            "p10_s": float(np.percentile(durations, 10)),
            "p90_s": float(np.percentile(durations, 90)),
        }
    return SweepCell(sweep_value=float(value), method=method,
                     mean_rmse_deg=mean, std_rmse_deg=std, runs=config.runs,
                     failures=failures, note=note, **timing)


def run_ensemble(config: EnsembleConfig, workers: int = 1) -> EnsembleResult:
    """Monte-Carlo RMSE sweep over the configured axis.

    ``workers`` > 1 distributes runs over a process pool; the output is
    identical for every worker count.
    """
    executor = None
    cells = []
    try:
        if workers > 1:
            executor = ProcessPoolExecutor(max_workers=workers,
                                           mp_context=get_context("spawn"))
        for value in config.sweep_values:
            geom, sources, snr_db, snapshots = _cell_params(config, value)
            per_run = _cell_runs(config, geom, sources, snr_db, snapshots, executor)
            for method in config.methods:
                cells.append(_aggregate(config, value, method, per_run))
    finally:
        if executor is not None:
            executor.shutdown()
    return EnsembleResult(config.sweep_axis, tuple(cells))


def run_timing(config: EnsembleConfig, warmup: int = 2) -> EnsembleResult:
    """Wall-clock sweep; reports per-call duration quantiles alongside RMSE.

    Each recorded duration covers one full estimate call (subspace through
    pairing) on freshly synthesized data. Methods are timed one at a time in
    their own pass over the runs, so a slow method never pollutes a fast
    one's cache between calls; run i still uses the same data for every
    method. ``warmup`` unrecorded calls per method absorb one-time costs.
    Always serial.
    """
    cells = []
    for value in config.sweep_values:
        geom, sources, snr_db, snapshots = _cell_params(config, value)
        num_sources = config.num_sources or sources.p
        per_run = [dict() for _ in range(config.runs)]
        for method in config.methods:
            for _ in range(warmup):
                _run_once(geom, sources, num_sources, (method,),
                          snr_db, snapshots, config.base_seed)
            for i in range(config.runs):
                rec = _run_once(geom, sources, num_sources, (method,),
                                snr_db, snapshots, config.base_seed + i)
                per_run[i][method] = rec[method]
        for method in config.methods:
            cells.append(_aggregate(config, value, method, per_run,
                                    with_timing=True))
    return EnsembleResult(config.sweep_axis, tuple(cells))


def write_outputs(result: EnsembleResult, csv_path, base_seed: int,
                  config_sha256: str | None = None) -> None:
    """Write the sweep CSV and its JSON metadata sidecar.

    The sidecar lands next to the CSV as ``<stem>.meta.json`` and records the
    config hash, base seed, and package version.
    """
    from . import __version__

    with open(csv_path, "w", newline="") as fh:
        fh.write(result.to_csv_text())
    meta = {
        "base_seed": base_seed,
        "config_sha256": config_sha256,
        "rows": len(result.cells),
        "version": __version__,
    }
    sidecar = _sidecar_path(csv_path)
    with open(sidecar, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sidecar_path(csv_path):
    import os

    stem, _ = os.path.splitext(os.fspath(csv_path))
    return stem + ".meta.json"
