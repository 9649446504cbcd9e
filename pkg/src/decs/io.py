"""File formats: dataset CSV, edge-list TSV, and JSON report serialization.

Floats are written with ``repr`` (the shortest string that parses back to the
same double), so every file round-trips bit-exactly and reruns of seeded
commands are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError
from .model import Dataset, WeightedAdjacency, as_weight_matrix

EDGE_HEADER = ("source", "target", "weight")


def format_float(x) -> str:
    return repr(float(x))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_json(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


# ---------------------------------------------------------------------------
# dataset CSV: one row per observation, optional header of variable names


def write_dataset_csv(path, dataset: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if dataset.names is not None:
            writer.writerow(dataset.names)
        for row in dataset.values:
            writer.writerow([format_float(v) for v in row])


def read_dataset_csv(path) -> Dataset:
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise InvalidInputError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise InvalidInputError(f"dataset {path} is empty")
    names = None
    first = rows[0]
    if not _all_numeric(first):
        names = tuple(cell.strip() for cell in first)
        rows = rows[1:]
        if not rows:
            raise InvalidInputError(f"dataset {path} has a header but no rows")
    width = len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InvalidInputError(
                f"dataset {path} is ragged: row {i + 1} has {len(row)} cells, expected {width}"
            )
        try:
            values[i] = [float(cell) for cell in row]
        except ValueError as exc:
            raise InvalidInputError(f"dataset {path} row {i + 1}: {exc}") from exc
    return Dataset(values=values, names=names)


def _all_numeric(cells) -> bool:
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            return False
    return True


# ---------------------------------------------------------------------------
# edge list TSV: source <TAB> target <TAB> weight, 1-based ids or names


def write_edges_tsv(path, w, names: tuple[str, ...] | None = None, threshold: float = 0.0) -> None:
    """Write edges with |weight| strictly above the threshold, row-major order."""
    weights = as_weight_matrix(w)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(EDGE_HEADER)
        for i, j in zip(*np.nonzero(np.abs(weights) > threshold)):
            src = names[i] if names is not None else str(int(i) + 1)
            dst = names[j] if names is not None else str(int(j) + 1)
            writer.writerow([src, dst, format_float(weights[i, j])])


def read_edge_records(path) -> list[tuple[str, str, float]]:
    """Raw (source, target, weight) records; endpoint resolution is separate
    because the node universe may be the union over several files."""
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh, delimiter="\t") if row]
    except OSError as exc:
        raise InvalidInputError(f"cannot read edge list {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0][:3]] != list(EDGE_HEADER):
        raise InvalidInputError(
            f"edge list {path} must start with the header 'source\\ttarget\\tweight'"
        )
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise InvalidInputError(f"edge list {path} line {lineno}: expected 3 fields")
        try:
            weight = float(row[2])
        except ValueError as exc:
            raise InvalidInputError(f"edge list {path} line {lineno}: {exc}") from exc
        records.append((row[0].strip(), row[1].strip(), weight))
    return records


def resolve_edges(
    records,
    dim: int | None = None,
    names: tuple[str, ...] | None = None,
) -> WeightedAdjacency:
    """Build a weight matrix from edge records.

    Named endpoints are resolved against ``names``; purely numeric endpoints
    are treated as 1-based indices. Without an explicit ``dim`` the dimension
    is the largest index seen (or ``len(names)``).
    """
    index: dict[str, int] = {}
    if names is not None:
        index = {name: k for k, name in enumerate(names)}
        dim = len(names) if dim is None else dim

    def resolve(endpoint: str) -> int:
        if endpoint in index:
            return index[endpoint]
        if endpoint.isdigit():
            k = int(endpoint) - 1
            if k < 0:
                raise InvalidInputError(f"endpoint ids are 1-based, got {endpoint}")
            return k
        raise InvalidInputError(f"unknown endpoint {endpoint!r} (no matching name)")

    resolved = [(resolve(s), resolve(t), w) for s, t, w in records]
    if dim is None:
        dim = 1 + max((max(i, j) for i, j, _ in resolved), default=-1)
        if dim <= 0:
            raise InvalidInputError("cannot infer dimension from an empty edge list")
    weights = np.zeros((dim, dim))
    for i, j, w in resolved:
        if i >= dim or j >= dim:
            raise InvalidInputError(f"edge ({i + 1},{j + 1}) out of range for dim {dim}")
        if i == j:
            raise InvalidInputError(f"self-loop on node {i + 1} is not allowed")
        weights[i, j] = w
    return WeightedAdjacency(weights=weights)


def read_edges_tsv(path, dim: int | None = None, names=None) -> WeightedAdjacency:
    return resolve_edges(read_edge_records(path), dim=dim, names=names)


def edge_name_universe(records) -> tuple[str, ...] | None:
    """Named endpoints in order of first appearance, or None if all numeric."""
    if all(s.isdigit() and t.isdigit() for s, t, _ in records):
        return None
    seen: dict[str, None] = {}
    for s, t, _ in records:
        seen.setdefault(s)
        seen.setdefault(t)
    return tuple(seen)


# ---------------------------------------------------------------------------
# JSON helpers


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot parse JSON {path}: {exc}") from exc
