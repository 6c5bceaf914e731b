"""Command-line interface: sample, solve, consistency, converge, report.

Each command reads one TOML config (``--config``), writes its artifacts into
an output directory (``--out`` overriding ``[output] dir``), and records a
``manifest.json`` listing every data artifact with a sha256 digest.
``report`` re-reads a finished run directory, verifies the digests, and
emits a human-readable ``report.txt`` plus an ``index.svg``; both are
derived views, excluded from the manifest, and byte-stable across reruns.

Exit codes: 0 success, 2 configuration error (bad TOML, unknown keys,
malformed expressions, invalid schedule), 3 runtime error (degenerate
problem, unwritable output, digest mismatch, too few ladder levels
succeeded).

Worker count resolves ``--workers`` first, then the ``TOWCLOUD_WORKERS``
environment variable, then 1.  ``--seed`` overrides the config's cloud seed
and, for ladder commands, replaces the experiment seed list with that single
seed.  ``--deterministic`` suppresses the timestamp comment in SVG output
and the timestamp field of fresh manifests, making reruns byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass

from . import __version__
from .calculus import ExpressionError, parse_expression
from .config import ConfigError, load_config
from .geometry import Density, load_cloud_csv, sample_cloud, save_cloud_csv
from .operator import GameParams
from .solver import AssemblyError, assemble, export_solution_csv, solve
from . import experiments
from . import svgchart

__all__ = ["main"]

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_RUNTIME = 3

_MANIFEST = "manifest.json"
_REPORT_FILES = ("report.txt", "index.svg")


class _RuntimeFailure(RuntimeError):
    """Command-level runtime error; message goes to stderr, exit code 3."""


@dataclass
class _Context:
    cfg: object
    out_dir: str
    workers: int
    deterministic: bool
    seed: int = None  # --seed override, if given


# ---------------------------------------------------------------------------
# Config -> model objects
# ---------------------------------------------------------------------------

def _require(value, what):
    if value is None:
        raise ConfigError("%s is required for this command" % what)
    return value


def _parse_field(text, dim, what):
    try:
        return parse_expression(text, dim)
    except ExpressionError as exc:
        raise ConfigError("%s: %s" % (what, exc)) from exc


def _density(ctx, domain):
    fields = ctx.cfg.fields
    expr = _require(fields.density, "fields.density")
    field = _parse_field(expr, domain.dim, "fields.density")
    lo, hi = fields.density_lo, fields.density_hi
    if lo is None:
        lo, hi = _estimate_bounds(field, domain)
    try:
        return Density(field, domain, lo, hi)
    except ValueError as exc:
        raise ConfigError("fields.density: %s" % exc) from exc


def _estimate_bounds(field, domain):
    """Probe-grid bounds with headroom, for configs that omit them."""
    import numpy as np

    blo, bhi = domain.bounding_box()
    axes = [np.linspace(blo[k], bhi[k], 65) for k in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    pts = pts[domain.contains(pts)]
    if pts.shape[0] == 0:
        raise ConfigError("could not probe the domain to bound the density; "
                          "set fields.density_lo / fields.density_hi")
    vals = field.value(pts)
    vmin, vmax = float(np.min(vals)), float(np.max(vals))
    if vmin <= 0.0:
        raise ConfigError("fields.density is nonpositive on the domain "
                          "(probe min %.6g); densities must be strictly "
                          "positive" % vmin)
    return 0.9 * vmin, 1.1 * vmax


def _game_params(ctx, domain, eps):
    p = _require(ctx.cfg.model.p, "model.p")
    return GameParams(dim=domain.dim, p=p, eps=eps)


def _cloud(ctx, domain, density):
    cloud_cfg = ctx.cfg.cloud
    if cloud_cfg.file is not None:
        path = cloud_cfg.file
        if not os.path.isabs(path) and ctx.cfg.output.dir is not None:
            cand = os.path.join(ctx.cfg.output.dir, path)
            if os.path.exists(cand):
                path = cand
        try:
            return load_cloud_csv(path, domain, density=density)
        except OSError as exc:
            raise _RuntimeFailure("cannot read cloud file: %s" % exc)
    n = _require(cloud_cfg.n, "cloud.n (or cloud.file)")
    seed = ctx.seed if ctx.seed is not None else cloud_cfg.seed
    seed = _require(seed, "cloud.seed (or --seed)")
    return sample_cloud(domain, density, n, seed)


def _ladder_seeds(ctx):
    if ctx.seed is not None:
        return [ctx.seed]
    seeds = _require(ctx.cfg.experiment.seeds, "experiment.seeds")
    return list(seeds)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(ctx, command, names):
    """Record ``names`` with digests, merging into a same-config manifest.

    Successive commands against one run directory extend the artifact list
    (sample, then solve, ...); a config change starts the manifest over.
    """
    cfg_hash = ctx.cfg.hash()
    path = os.path.join(ctx.out_dir, _MANIFEST)
    artifacts = {}
    created = None
    if os.path.exists(path):
        try:
            with open(path) as fh:
                old = json.load(fh)
        except (json.JSONDecodeError, OSError):
            old = None
        if old is not None and old.get("config_hash") == cfg_hash:
            artifacts = {a["name"]: a for a in old.get("artifacts", [])}
            created = old.get("created")
    for name in names:
        full = os.path.join(ctx.out_dir, name)
        artifacts[name] = {
            "name": name,
            "sha256": _sha256(full),
            "bytes": os.path.getsize(full),
        }
    if created is None and not ctx.deterministic:
        created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    manifest = {
        "tool": "towcloud",
        "version": __version__,
        "command": command,
        "config_hash": cfg_hash,
        "created": created,
        "artifacts": [artifacts[k] for k in sorted(artifacts)],
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(ctx):
    try:
        os.makedirs(ctx.out_dir, exist_ok=True)
        probe = os.path.join(ctx.out_dir, ".write-probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise _RuntimeFailure("output directory not writable: %s" % exc)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sample(ctx):
    """Sample a cloud and write ``cloud.csv`` plus the manifest."""
    domain = ctx.cfg.domain.make()
    density = _density(ctx, domain)
    n = _require(ctx.cfg.cloud.n, "cloud.n")
    seed = ctx.seed if ctx.seed is not None else ctx.cfg.cloud.seed
    seed = _require(seed, "cloud.seed (or --seed)")
    _prepare_out(ctx)
    cloud = sample_cloud(domain, density, n, seed)
    save_cloud_csv(cloud, os.path.join(ctx.out_dir, "cloud.csv"))
    _write_manifest(ctx, "sample", ["cloud.csv"])
    return _EXIT_OK


def cmd_solve(ctx):
    """Assemble and solve one Dirichlet problem; write solution + report."""
    cfg = ctx.cfg
    domain = cfg.domain.make()
    density = _density(ctx, domain)
    eps = _require(cfg.model.eps, "model.eps")
    params = _game_params(ctx, domain, eps)
    g = _parse_field(_require(cfg.fields.boundary_g, "fields.boundary_g"),
                     domain.dim, "fields.boundary_g")
    f = _parse_field(cfg.fields.rhs_f if cfg.fields.rhs_f is not None
                     else "0", domain.dim, "fields.rhs_f")
    _prepare_out(ctx)
    cloud = _cloud(ctx, domain, density)
    try:
        problem = assemble(cloud, params, f, g)
    except AssemblyError as exc:
        raise _RuntimeFailure("assembly failed: %s" % exc)
    tol = cfg.solver.tol if cfg.solver.tol is not None else 1e-9
    max_iter = (cfg.solver.max_iter if cfg.solver.max_iter is not None
                else 1_000_000)
    try:
        u, report = solve(problem, tol=tol, max_iter=max_iter)
    except RuntimeError as exc:
        raise _RuntimeFailure("solve failed: %s" % exc)
    export_solution_csv(problem, u,
                        os.path.join(ctx.out_dir, "solution.csv"))
    with open(os.path.join(ctx.out_dir, "solve_report.json"), "w") as fh:
        fh.write(report.to_json() + "\n")
    _write_manifest(ctx, "solve", ["solution.csv", "solve_report.json"])
    if not report.converged:
        print("warning: solver did not converge "
              "(residual %.3g after %d sweeps)"
              % (report.final_residual, report.iterations), file=sys.stderr)
    return _EXIT_OK


def _run_ladder(ctx, command):
    cfg = ctx.cfg
    domain = cfg.domain.make()
    density = _density(ctx, domain)
    schedule = cfg.schedule.make(domain.dim)
    params = _game_params(ctx, domain, schedule.eps[0])
    seeds = _ladder_seeds(ctx)
    exp = cfg.experiment
    scale = exp.target_scale if exp.target_scale is not None else 1.0
    u_star = _parse_field(
        _require(cfg.fields.manufactured_u, "fields.manufactured_u"),
        domain.dim, "fields.manufactured_u")
    _prepare_out(ctx)

    if command == "consistency":
        probes = exp.probes if exp.probes is not None else 200
        report = experiments.consistency_experiment(
            domain, density, u_star, params, schedule, seeds,
            probes=probes, target_scale=scale, workers=ctx.workers)
    else:
        probe_grid = exp.probe_grid if exp.probe_grid is not None else 2048
        tol = cfg.solver.tol if cfg.solver.tol is not None else 1e-6
        max_iter = (cfg.solver.max_iter if cfg.solver.max_iter is not None
                    else 1_000_000)
        report = experiments.convergence_experiment(
            domain, density, u_star, params, schedule, seeds,
            probe_grid=probe_grid, target_scale=scale, solve_tol=tol,
            max_iter=max_iter, workers=ctx.workers)
    report.config_hash = ctx.cfg.hash()

    base = command
    rows_name = base + "_rows.csv"
    agg_name = base + "_agg.csv"
    svg_name = base + ".svg"
    report.write_rows_csv(os.path.join(ctx.out_dir, rows_name))
    report.write_aggregate_csv(os.path.join(ctx.out_dir, agg_name))
    svg = svgchart.ladder_chart(report, title=command,
                                deterministic=ctx.deterministic)
    svgchart.write_svg(os.path.join(ctx.out_dir, svg_name), svg)
    _write_manifest(ctx, command, [rows_name, agg_name, svg_name])

    for flag in report.flags:
        print("flag: %s" % flag, file=sys.stderr)
    succeeded = len({row[0] for row in report.rows})
    if succeeded < 2:
        raise _RuntimeFailure(
            "only %d ladder level(s) produced data (need >= 2); "
            "see flags above" % succeeded)
    return _EXIT_OK


def cmd_consistency(ctx):
    """Run the operator-consistency ladder; write CSVs and a chart."""
    return _run_ladder(ctx, "consistency")


def cmd_converge(ctx):
    """Run the manufactured-solution convergence ladder."""
    return _run_ladder(ctx, "converge")


def cmd_report(ctx):
    """Verify a run directory's digests and write report.txt + index.svg."""
    manifest_path = os.path.join(ctx.out_dir, _MANIFEST)
    if not os.path.exists(manifest_path):
        raise _RuntimeFailure("no %s in %s" % (_MANIFEST, ctx.out_dir))
    with open(manifest_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise _RuntimeFailure("manifest is not valid JSON: %s" % exc)

    entries = []
    for art in manifest.get("artifacts", []):
        name = art["name"]
        path = os.path.join(ctx.out_dir, name)
        if not os.path.exists(path):
            raise _RuntimeFailure("artifact missing: %s" % name)
        digest = _sha256(path)
        if digest != art["sha256"]:
            raise _RuntimeFailure(
                "digest mismatch for %s (tampered run): manifest %s..., "
                "file %s..." % (name, art["sha256"][:12], digest[:12]))
        entries.append((name, "sha256 %s  %d bytes"
                        % (digest[:12], art["bytes"])))

    lines = ["run report",
             "==========",
             "tool:        %s %s" % (manifest.get("tool", "?"),
                                     manifest.get("version", "?")),
             "command:     %s" % manifest.get("command", "?"),
             "config hash: %s" % manifest.get("config_hash", "?"),
             "created:     %s" % (manifest.get("created") or "-"),
             "",
             "artifacts (digests verified):"]
    for name, note in entries:
        lines.append("  %-24s %s" % (name, note))
    lines.extend(_summarize_csvs(ctx.out_dir, manifest))

    with open(os.path.join(ctx.out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    svg = svgchart.index_chart(
        entries, title="run index (%s)"
        % manifest.get("config_hash", "?")[:12], deterministic=True)
    svgchart.write_svg(os.path.join(ctx.out_dir, "index.svg"), svg)
    return _EXIT_OK


def _summarize_csvs(out_dir, manifest):
    """Pull flags and per-metric median trends out of aggregate CSVs."""
    lines = []
    for art in manifest.get("artifacts", []):
        name = art["name"]
        if not name.endswith("_agg.csv"):
            continue
        flags = []
        series = {}  # metric -> list of (eps, median); file is level-sorted
        with open(os.path.join(out_dir, name)) as fh:
            for raw in fh:
                raw = raw.strip()
                if raw.startswith("# flag="):
                    flags.append(raw[len("# flag="):])
                    continue
                if raw.startswith("#") or raw.startswith("level,") or not raw:
                    continue
                parts = raw.split(",")
                eps, metric, med = float(parts[2]), parts[3], float(parts[4])
                series.setdefault(metric, []).append((eps, med))
        lines.extend(["", "%s:" % name])
        for metric in sorted(series):
            pts = series[metric]
            lines.append("  %-18s median %.6g @ eps=%.6g  ->  %.6g @ "
                         "eps=%.6g" % (metric, pts[0][1], pts[0][0],
                                       pts[-1][1], pts[-1][0]))
        for flag in flags:
            lines.append("  flag: %s" % flag)
    return lines


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "sample": cmd_sample,
    "solve": cmd_solve,
    "consistency": cmd_consistency,
    "converge": cmd_converge,
    "report": cmd_report,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="towcloud",
        description="Tug-of-war operators on sampled point clouds: "
                    "sampling, Dirichlet solves, and error-ladder "
                    "experiments.")
    parser.add_argument("command", choices=sorted(_COMMANDS),
                        help="what to run")
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--seed", type=int,
                        help="override the cloud seed / experiment seeds")
    parser.add_argument("--out", help="output directory (overrides "
                                      "[output] dir)")
    parser.add_argument("--workers", type=int,
                        help="worker threads (default: TOWCLOUD_WORKERS "
                             "or 1)")
    parser.add_argument("--deterministic", action="store_true",
                        help="suppress timestamps for byte-identical reruns")
    return parser


def _resolve_workers(args):
    if args.workers is not None:
        workers = args.workers
    else:
        env = os.environ.get("TOWCLOUD_WORKERS")
        if env is None:
            return 1
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError("TOWCLOUD_WORKERS must be an integer, got %r"
                              % env)
    if workers < 1:
        raise ConfigError("worker count must be >= 1, got %d" % workers)
    return workers


def main(argv=None):
    """CLI entry point; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in u64")
        workers = _resolve_workers(args)
        if args.command == "report":
            from .config import RunConfig
            cfg = (load_config(args.config) if args.config is not None
                   else RunConfig())
        else:
            if args.config is None:
                raise ConfigError("--config is required for %r"
                                  % args.command)
            cfg = load_config(args.config)
        out_dir = args.out if args.out is not None else cfg.output.dir
        if out_dir is None:
            raise ConfigError("no output directory: set [output] dir or "
                              "pass --out")
        ctx = _Context(cfg=cfg, out_dir=out_dir, workers=workers,
                       deterministic=args.deterministic, seed=args.seed)
        return _COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return _EXIT_CONFIG
    except _RuntimeFailure as exc:
        print("error: %s" % exc, file=sys.stderr)
        return _EXIT_RUNTIME
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return _EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
