"""Command-line surface and experiment harness.

Subcommands: ``simulate``, ``discover``, ``evaluate``, ``grid``,
``reproduce``. Exit codes: 0 ok, 2 input error, 3 non-convergence, 4 partial
grid failure, 5 undefined metric. ``DECS_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as decs_io
from .exceptions import (
    DecsError,
    InvalidInputError,
    SolverDivergedError,
    UndefinedMetricError,
)
from .linalg import trim_transform
from .metrics import auc_sweep, evaluate_weights, reproducibility_curve, shd_skeleton
from .model import Dag, is_acyclic, skeleton_of
from .rng import RNG_ALGORITHM, substream
from .simulate import (
    ErdosRenyi,
    SemSpec,
    SparseDag,
    gen_environments,
    remove_roots,
    sample_from_truth,
    sample_sem,
    write_instance,
)
from .solver import (
    ScoreConfig,
    cross_validate_lambda,
    default_lambda_grid,
    solve_decs,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_PARTIAL_FAILURE = 4
EXIT_UNDEFINED_METRIC = 5

GRID_AXES = ("p", "q", "sigma", "noise_family", "b_edges")

log = logging.getLogger("decs")


def _configure_logging():
    level = os.environ.get("DECS_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate


def _parse_roots(raw: str, names, dim: int) -> list[int]:
    roots = []
    index = {name: k for k, name in enumerate(names)} if names else {}
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        if token in index:
            roots.append(index[token])
        elif token.isdigit():
            k = int(token) - 1
            if not (0 <= k < dim):
                raise InvalidInputError(f"root id {token} out of range (1..{dim})")
            roots.append(k)
        else:
            raise InvalidInputError(f"unknown root node {token!r}")
    return roots


def cmd_simulate(args) -> int:
    spec_data = decs_io.read_json(args.spec)
    spec = SemSpec.from_dict(spec_data)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = _out_dir(args.out)
    if args.from_network:
        records = decs_io.read_edge_records(args.from_network)
        names = decs_io.edge_name_universe(records)
        adjacency = decs_io.resolve_edges(records, names=names)
        order = is_acyclic(adjacency, 0.0)
        if order is None:
            raise InvalidInputError(f"network {args.from_network} contains a cycle")
        truth = Dag(adjacency=adjacency, order=order)
        spec = replace(spec, p=truth.dim)
        instance = sample_from_truth(truth, spec, names=names)
        removal_record = None
        if args.remove_roots:
            roots = _parse_roots(args.remove_roots, instance.data.names, truth.dim)
            removal = remove_roots(instance.truth, instance.data, roots)
            removal_record = {
                "removed": sorted(roots),
                "kept": list(removal.kept),
            }
            instance = replace_instance_after_removal(instance, removal)
        payload = write_instance(out, instance, spec)
        if removal_record is not None:
            payload["root_removal"] = removal_record
            decs_io.write_json(out / "spec.json", payload)
    else:
        instance = sample_sem(spec)
        write_instance(out, instance, spec)
    log.info("wrote instance bundle to %s", out)
    return EXIT_OK


def replace_instance_after_removal(instance, removal):
    """Bundle view of a root-removed instance: reduced data/graph, B rows kept."""
    from .simulate import GeneratedInstance

    kept = list(removal.kept)
    return GeneratedInstance(
        truth=removal.dag,
        b=instance.b[kept, :],
        data=removal.data,
        latent=instance.latent,
        noise=instance.noise[:, kept],
        h_scale=instance.h_scale,
    )


# ---------------------------------------------------------------------------
# discover


def _solver_config(args) -> ScoreConfig:
    return ScoreConfig(
        lambda_=args.lambda_,
        use_trim=not args.no_trim,
        edge_threshold=args.threshold,
    )


def cmd_discover(args) -> int:
    dataset = decs_io.read_dataset_csv(args.data)
    if dataset.cols < 2:
        raise InvalidInputError("discovery needs at least 2 columns")
    cfg = _solver_config(args)
    out = _out_dir(args.out)
    cv_section = None
    if args.cv:
        design = trim_transform(dataset.values)[0] if cfg.use_trim else dataset.values
        grid = default_lambda_grid(design)
        lam, losses = cross_validate_lambda(dataset.values, grid, args.cv, cfg)
        cfg = replace(cfg, lambda_=lam)
        cv_section = {
            "folds": args.cv,
            "grid": grid,
            "mean_losses": losses,
            "selected": lam,
        }
    report = solve_decs(dataset.values, cfg)
    payload = report.to_dict()
    payload["config"] = cfg.to_dict()
    payload["names"] = list(dataset.names) if dataset.names else None
    payload["input_sha256"] = decs_io.sha256_file(args.data)
    payload["version"] = __version__
    if cv_section:
        payload["cross_validation"] = cv_section
    decs_io.write_json(out / "report.json", payload)
    decs_io.write_edges_tsv(out / "edges.tsv", report.w_hat, names=dataset.names)
    log.info(
        "discover: %d edges, lambda=%.6g, converged=%s",
        report.w_hat.edge_count(),
        report.lambda_used,
        report.converged,
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# evaluate


def _load_estimate(path):
    """(weights, ranking weights, names) from edges.tsv or report.json."""
    path = Path(path)
    if path.suffix == ".json":
        data = decs_io.read_json(path)
        try:
            weights = np.asarray(data["w_hat"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"report {path} has no usable w_hat: {exc}") from exc
        ranking = np.asarray(data["w_full"], dtype=float) if data.get("w_full") else weights
        names = tuple(data["names"]) if data.get("names") else None
        return weights, ranking, names
    records = decs_io.read_edge_records(path)
    return records, None, decs_io.edge_name_universe(records)


def cmd_evaluate(args) -> int:
    est_raw, ranking, est_names = _load_estimate(args.estimate)
    truth_records = decs_io.read_edge_records(args.truth)
    truth_names = decs_io.edge_name_universe(truth_records)

    if isinstance(est_raw, np.ndarray):
        names = est_names
        dim = est_raw.shape[0]
        est = est_raw
    else:
        # two edge lists: resolve both against the union of their universes
        names = None
        if est_names or truth_names:
            merged: dict[str, None] = {}
            for name in (est_names or ()) + (truth_names or ()):
                merged.setdefault(name)
            names = tuple(merged)
            dim = len(names)
        else:
            numeric = [
                int(e)
                for s, t, _ in est_raw + truth_records
                for e in (s, t)
                if e.isdigit()
            ]
            dim = max(numeric) if numeric else 0
            if dim == 0:
                raise InvalidInputError("cannot infer graph dimension from the inputs")
        est = decs_io.resolve_edges(est_raw, dim=dim, names=names).weights
    truth = decs_io.resolve_edges(truth_records, dim=dim, names=names).weights

    result = evaluate_weights(
        est,
        truth,
        threshold=args.threshold,
        min_shd_threshold=args.min_shd_threshold,
        ranking_w=ranking,
    )
    _, curve = auc_sweep(est if ranking is None else ranking, skeleton_of(truth, 0.0))
    out = _out_dir(args.out)
    payload = result.to_dict()
    payload["estimate_sha256"] = decs_io.sha256_file(args.estimate)
    payload["truth_sha256"] = decs_io.sha256_file(args.truth)
    payload["version"] = __version__
    decs_io.write_json(out / "metrics.json", payload)
    with open(out / "auc_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fdr", "tpr"])
        for threshold, fdr, tpr in curve:
            writer.writerow(
                [decs_io.format_float(threshold), decs_io.format_float(fdr), decs_io.format_float(tpr)]
            )
    return EXIT_OK


# ---------------------------------------------------------------------------
# grid


def _apply_axis(base: SemSpec, axis: str, value) -> SemSpec:
    if axis == "p":
        spec = replace(base, p=int(value))
        # the synthetic protocol scales the expected edge count with p
        if isinstance(base.graph_model, ErdosRenyi):
            spec = replace(spec, graph_model=ErdosRenyi(expected_edges=float(value)))
        return spec
    if axis == "q":
        return replace(base, q=int(value))
    if axis == "sigma":
        return replace(base, sigma=float(value))
    if axis == "noise_family":
        return replace(base, noise_family=str(value))
    if axis == "b_edges":
        return replace(base, b_model=SparseDag(edge_count=int(value)))
    raise InvalidInputError(f"axis must be one of {GRID_AXES}, got {axis!r}")


def _parse_grid(data: dict):
    try:
        axis = data["axis"]
        values = list(data["values"])
        trials = int(data.get("trials", 1))
        base = SemSpec.from_dict(data.get("base", {}))
        solver = ScoreConfig.from_dict(data.get("solver", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed grid spec: {exc}") from exc
    if axis not in GRID_AXES:
        raise InvalidInputError(f"axis must be one of {GRID_AXES}, got {axis!r}")
    if not values:
        raise InvalidInputError("grid values must be non-empty")
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    return axis, values, trials, base, solver


def _grid_task(grid_data: dict, value_index: int, trial: int) -> dict:
    """One (axis value, trial): sample once, solve in both modes, score."""
    axis, values, _, base, solver = _parse_grid(grid_data)
    value = values[value_index]
    seed = substream(base.seed, value_index, trial)
    spec = replace(_apply_axis(base, axis, value), seed=seed)
    record = {"value": value, "trial": trial, "seed": seed}
    instance = sample_sem(spec)
    truth_skeleton = skeleton_of(instance.truth.adjacency, 0.0)
    for mode, use_trim in (("trim", True), ("notrim", False)):
        start = time.perf_counter()
        try:
            report = solve_decs(instance.data.values, replace(solver, use_trim=use_trim))
            est_skeleton = skeleton_of(report.w_hat, 0.0)
            auc, _ = auc_sweep(report.w_full, truth_skeleton)
            record[mode] = {
                "shd": shd_skeleton(est_skeleton, truth_skeleton),
                "auc": auc,
                "converged": report.converged,
                "wall_time": time.perf_counter() - start,
            }
        except DecsError as exc:
            record[mode] = {"error": f"{type(exc).__name__}: {exc}"}
    return record


def _aggregate_rows(axis, values, records):
    rows = []
    for vi, value in enumerate(values):
        row = {"axis": axis, "value": value}
        cells = [r for r in records if r["value"] == value and "error" not in r]
        row["trials"] = len(cells)
        for mode in ("trim", "notrim"):
            good = [c[mode] for c in cells if "error" not in c.get(mode, {"error": 1})]
            for metric in ("shd", "auc"):
                series = [g[metric] for g in good]
                mean = float(np.mean(series)) if series else float("nan")
                sd = float(np.std(series, ddof=1)) if len(series) > 1 else 0.0
                row[f"{metric}_{mode}_mean"] = mean
                row[f"{metric}_{mode}_sd"] = sd
        rows.append(row)
    return rows


def _write_aggregate(path, rows) -> None:
    fields = [
        "axis",
        "value",
        "trials",
        "shd_trim_mean",
        "shd_trim_sd",
        "auc_trim_mean",
        "auc_trim_sd",
        "shd_notrim_mean",
        "shd_notrim_sd",
        "auc_notrim_mean",
        "auc_notrim_sd",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            out_row = []
            for f in fields:
                v = row[f]
                if isinstance(v, float):
                    out_row.append(decs_io.format_float(v))
                else:
                    out_row.append(str(v))
            writer.writerow(out_row)


def cmd_grid(args) -> int:
    if args.from_manifest:
        manifest = decs_io.read_json(args.from_manifest)
        try:
            grid_data = manifest["grid"]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"manifest has no grid section: {exc}") from exc
    else:
        if not args.grid:
            raise InvalidInputError("either a grid file or --from-manifest is required")
        grid_data = decs_io.read_json(args.grid)
    axis, values, trials, base, _solver = _parse_grid(grid_data)
    out = _out_dir(args.out)

    tasks = [(vi, t) for vi in range(len(values)) for t in range(trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {key: pool.submit(_grid_task, grid_data, *key) for key in tasks}
            results = {key: fut.result() for key, fut in futures.items()}
    else:
        results = {key: _grid_task(grid_data, *key) for key in tasks}
    records = [results[key] for key in tasks]

    rows = _aggregate_rows(axis, values, records)
    _write_aggregate(out / "aggregate.csv", rows)
    failures = [
        r
        for r in records
        if "error" in r or any("error" in r.get(m, {}) for m in ("trim", "notrim"))
    ]
    manifest = {
        "grid": grid_data,
        "grid_sha256": decs_io.sha256_json(grid_data),
        "seed": base.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "version": __version__,
        "records": records,
        "failures": len(failures),
        "aggregate_sha256": decs_io.sha256_file(out / "aggregate.csv"),
    }
    decs_io.write_json(out / "manifest.json", manifest)
    if failures:
        log.warning("grid finished with %d failed trial cells", len(failures))
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce


def cmd_reproduce(args) -> int:
    data = decs_io.read_json(args.spec)
    try:
        base = SemSpec.from_dict(data.get("base", {}))
        count = int(data["environments"])
        sigma_lo, sigma_hi = (float(v) for v in data.get("sigma_range", (0.25, 2.0)))
        solver = ScoreConfig.from_dict(data.get("solver", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed environments spec: {exc}") from exc
    if count < 2:
        raise InvalidInputError("environments must be >= 2")
    out = _out_dir(args.out)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, 2)) as pool:
            trim_fut = pool.submit(_reproduce_mode, data, True)
            notrim_fut = pool.submit(_reproduce_mode, data, False)
            curves = {"trim": trim_fut.result(), "notrim": notrim_fut.result()}
    else:
        curves = {
            "trim": _reproduce_mode(data, True),
            "notrim": _reproduce_mode(data, False),
        }

    for mode in ("trim", "notrim"):
        if curves[mode] is None:
            decs_io.write_json(
                out / "summary.json",
                {"error": f"all {mode} estimates are empty; reproducibility undefined"},
            )
            raise UndefinedMetricError(f"every {mode} estimate is empty")
        with open(out / f"reproducibility_{mode}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["environments", "proportion"])
            for k, prop in enumerate(curves[mode], start=1):
                writer.writerow([k, decs_io.format_float(prop)])
    summary = {
        "environments": count,
        "sigma_range": [sigma_lo, sigma_hi],
        "proportion_all_trim": curves["trim"][-1],
        "proportion_all_notrim": curves["notrim"][-1],
        "trim_advantage": curves["trim"][-1] - curves["notrim"][-1],
        "spec_sha256": decs_io.sha256_json(data),
        "version": __version__,
    }
    decs_io.write_json(out / "summary.json", summary)
    return EXIT_OK


def _curve_or_none(skeletons):
    try:
        return reproducibility_curve(skeletons)
    except UndefinedMetricError:
        return None


def _reproduce_mode(data: dict, use_trim: bool):
    base = SemSpec.from_dict(data.get("base", {}))
    count = int(data["environments"])
    sigma_lo, sigma_hi = (float(v) for v in data.get("sigma_range", (0.25, 2.0)))
    solver = ScoreConfig.from_dict(data.get("solver", {}))
    instances = gen_environments(base, count, sigma_lo, sigma_hi)
    skeletons = []
    for instance in instances:
        report = solve_decs(instance.data.values, replace(solver, use_trim=use_trim))
        skeletons.append(skeleton_of(report.w_hat, 0.0))
    return _curve_or_none(skeletons)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decs",
        description="Sparse DAG recovery under dense latent confounding.",
    )
    parser.add_argument("--version", action="version", version=f"decs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="sample a confounded SEM instance bundle")
    p_sim.add_argument("spec", help="SEM spec JSON")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_sim.add_argument(
        "--from-network", default=None, help="sample from this edge-list TSV instead of a random graph"
    )
    p_sim.add_argument(
        "--remove-roots",
        default=None,
        help="comma-separated root nodes (names or 1-based ids) to delete after sampling",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_disc = sub.add_parser("discover", help="estimate a weighted DAG from a dataset CSV")
    p_disc.add_argument("data", help="dataset CSV")
    p_disc.add_argument("--out", required=True)
    p_disc.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p_disc.add_argument("--cv", type=int, default=None, help="cross-validate lambda with this many folds")
    p_disc.add_argument("--no-trim", action="store_true", help="unadjusted baseline mode")
    p_disc.add_argument("--threshold", type=float, default=0.3, help="edge pruning threshold")
    p_disc.set_defaults(func=cmd_discover)

    p_eval = sub.add_parser("evaluate", help="score an estimate against a truth edge list")
    p_eval.add_argument("estimate", help="edges.tsv or report.json")
    p_eval.add_argument("truth", help="truth edge-list TSV")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--threshold", type=float, default=0.0)
    p_eval.add_argument(
        "--min-shd-threshold",
        action="store_true",
        help="report TPR/FDR at the SHD-minimizing threshold",
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_grid = sub.add_parser("grid", help="run a trim-vs-no-trim experiment grid")
    p_grid.add_argument("grid", nargs="?", default=None, help="grid spec JSON")
    p_grid.add_argument("--from-manifest", default=None, help="rerun the grid recorded in a manifest")
    p_grid.add_argument("--out", required=True)
    p_grid.add_argument("--jobs", type=int, default=1)
    p_grid.set_defaults(func=cmd_grid)

    p_rep = sub.add_parser("reproduce", help="cross-environment reproducibility experiment")
    p_rep.add_argument("spec", help="environments spec JSON")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--jobs", type=int, default=1)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED_METRIC
    except SolverDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except DecsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
