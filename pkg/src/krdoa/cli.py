"""Command-line interface: config-driven sweeps and one-shot estimation.

``run`` executes a JSON sweep config and writes the CSV, its metadata
sidecar, and (unless suppressed) a rendered figure next to it. ``single``
synthesizes one scenario and prints the paired estimates as JSON.
``list-methods`` enumerates the estimator names accepted everywhere.

Exit codes: 0 on success, 1 when nothing could be estimated, 2 for usage or
config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources

from .bench import (
    METHODS,
    EnsembleConfig,
    GeometrySpec,
    SourceSpec,
    dispatch_estimator,
    run_ensemble,
    run_timing,
    write_outputs,
)
from .errors import DomainError, KrdoaError
from .geometry import ArrayGeometry, ArrayKind, SourceSet
from .synth import sample_covariance, synthesize

WORKERS_ENV = "KRDOA_WORKERS"


class ConfigError(DomainError):
    """The run config is malformed."""


@dataclass(frozen=True)
class RunConfig:
    """A parsed sweep config plus the raw document it came from."""

    ensemble: EnsembleConfig
    output: str
    raw: dict

    @property
    def sha256(self) -> str:
        """Hash of the canonical (key-sorted) JSON serialization."""
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _require_keys(d, allowed, required, where):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")


def _parse_geometry(d) -> GeometrySpec:
    if not isinstance(d, dict):
        raise ConfigError("geometry must be an object")
    _require_keys(d, ("kind", "m", "n", "spacing", "seed", "spacing_range"),
                  ("kind", "m", "n"), "geometry")
    try:
        kind = ArrayKind(d["kind"])
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    return GeometrySpec(
        kind=kind,
        m=int(d["m"]),
        n=int(d["n"]),
        spacing=float(d.get("spacing", 0.5)),
        seed=d.get("seed"),
        spacing_range=tuple(d.get("spacing_range", (0.3, 0.5))),
    )


def _parse_sources(d) -> SourceSpec:
    if isinstance(d, list):
        try:
            return SourceSpec.explicit(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sources: {exc}") from exc
    if isinstance(d, dict):
        _require_keys(d, ("count", "seed", "margin_deg", "min_separation_deg"),
                      ("count", "seed"), "sources")
        return SourceSpec(
            count=d["count"], seed=int(d["seed"]),
            margin_deg=float(d.get("margin_deg", 10.0)),
            min_separation_deg=float(d.get("min_separation_deg", 5.0)),
        )
    raise ConfigError("sources must be a list of [azimuth, elevation] pairs "
                      "or a random-source policy object")


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document; unknown fields are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        doc,
        ("geometry", "sources", "methods", "sweep", "runs", "base_seed",
         "snr_db", "snapshots", "num_sources", "output"),
        ("geometry", "sources", "methods", "sweep", "runs", "base_seed",
         "output"),
        "config",
    )
    sweep = doc["sweep"]
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must be an object")
    _require_keys(sweep, ("axis", "values"), ("axis", "values"), "sweep")
    try:
        ensemble = EnsembleConfig(
            geometry=_parse_geometry(doc["geometry"]),
            sources=_parse_sources(doc["sources"]),
            methods=tuple(doc["methods"]),
            sweep_axis=str(sweep["axis"]),
            sweep_values=tuple(sweep["values"]),
            runs=int(doc["runs"]),
            base_seed=int(doc["base_seed"]),
            snr_db=None if doc.get("snr_db") is None else float(doc["snr_db"]),
            snapshots=None if doc.get("snapshots") is None else int(doc["snapshots"]),
            num_sources=None if doc.get("num_sources") is None else int(doc["num_sources"]),
        )
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    output = doc["output"]
    if not isinstance(output, str) or not output:
        raise ConfigError("output must be a non-empty path string")
    return RunConfig(ensemble=ensemble, output=output, raw=doc)


def load_config(path: str) -> RunConfig:
    """Load a config from a file path or a bundled config name."""
    candidate = path
    if not os.path.exists(candidate):
        bundled = resources.files("krdoa").joinpath("configs", path)
        if bundled.is_file():
            return parse_config(json.loads(bundled.read_text()))
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(candidate) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)


def bundled_config_names() -> list:
    base = resources.files("krdoa").joinpath("configs")
    return sorted(p.name for p in base.iterdir() if p.name.endswith(".json"))


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return os.cpu_count() or 1


def cmd_run(args) -> int:
    config = load_config(args.config)
    workers = args.workers if args.workers else _default_workers()
    if config.ensemble.sweep_axis == "size":
        result = run_timing(config.ensemble)
    else:
        result = run_ensemble(config.ensemble, workers=workers)
    write_outputs(result, config.output, config.ensemble.base_seed,
                  config_sha256=config.sha256)
    print(f"wrote {config.output}")
    failed = [c for c in result.cells if c.failures == c.runs]
    for cell in failed:
        print(f"cell ({result.sweep_axis}={cell.sweep_value:g}, {cell.method}) "
              f"failed all runs: {cell.note}", file=sys.stderr)
    if not args.no_plot:
        from .plotting import render_figure

        title = os.path.splitext(os.path.basename(config.output))[0]
        fig_path = render_figure(result, config.output, title=title)
        print(f"wrote {fig_path}")
    if len(failed) == len(result.cells):
        print("error: every sweep cell failed", file=sys.stderr)
        return 1
    return 0


def _parse_source_flag(values) -> SourceSet:
    pairs = []
    for item in values:
        parts = item.split(",")
        if len(parts) != 2:
            raise ConfigError(f"--source wants 'azimuth,elevation', got {item!r}")
        pairs.append((float(parts[0]), float(parts[1])))
    return SourceSet.from_pairs(pairs)


def cmd_single(args) -> int:
    if args.kind in (ArrayKind.URA.value, ArrayKind.UPGA.value):
        geom = ArrayGeometry.ura(args.m, args.n, args.spacing,
                                 kind=ArrayKind(args.kind))
    else:
        if args.geometry_seed is None:
            raise ConfigError(f"--kind {args.kind} needs --geometry-seed")
        geom = ArrayGeometry.nura(args.m, args.n, args.geometry_seed,
                                  kind=ArrayKind(args.kind))
    sources = _parse_source_flag(args.source)
    snap = synthesize(geom, sources, args.snapshots, args.snr, args.seed)
    cov = sample_covariance(snap, source_count_hint=sources.p)
    num_sources = args.num_sources or sources.p
    est = dispatch_estimator(args.method, cov, geom, num_sources)
    print(json.dumps({
        "method": est.method,
        "pairs_deg": [[round(a, 6), round(e, 6)] for a, e in est.pairs],
        "pairing_costs": [float(f"{c:.6g}") for c in est.pairing_costs],
        "diagnostics": est.diagnostics,
    }, indent=2))
    return 0


def cmd_list_methods(_args) -> int:
    width = max(len(name) for name in METHODS)
    for name, describe in METHODS.items():
        print(f"{name:<{width}}  {describe}")
    print(f"\nbundled configs: {', '.join(bundled_config_names())}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krdoa",
        description="Azimuth-elevation estimation on separable planar arrays",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a JSON sweep config")
    p_run.add_argument("config", help="config path or bundled config name")
    p_run.add_argument("--workers", type=int, default=0,
                       help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    p_run.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering, write only CSV + sidecar")
    p_run.set_defaults(fn=cmd_run)

    p_single = sub.add_parser("single", help="estimate one synthesized scenario")
    p_single.add_argument("--kind", default="ura",
                          choices=[k.value for k in ArrayKind])
    p_single.add_argument("--m", type=int, default=10, help="sensors along x")
    p_single.add_argument("--n", type=int, default=10, help="sensors along z")
    p_single.add_argument("--spacing", type=float, default=0.5,
                          help="uniform spacing, wavelengths")
    p_single.add_argument("--geometry-seed", type=int, default=None,
                          help="spacing seed for the non-uniform kinds")
    p_single.add_argument("--source", action="append", required=True,
                          metavar="AZ,EL", help="source pair in degrees, repeatable")
    p_single.add_argument("--snr", type=float, default=10.0, help="SNR in dB")
    p_single.add_argument("--snapshots", type=int, default=100)
    p_single.add_argument("--method", default="de-rmusic", choices=sorted(METHODS))
    p_single.add_argument("--seed", type=int, default=0)
    p_single.add_argument("--num-sources", type=int, default=None,
                          help="override the model order (default: source count)")
    p_single.set_defaults(fn=cmd_single)

    p_list = sub.add_parser("list-methods", help="list estimator names")
    p_list.set_defaults(fn=cmd_list_methods)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KrdoaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
