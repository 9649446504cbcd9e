"""Generative harness: random DAGs, weight assignment, confounded linear SEM
sampling, multi-environment families, root-removal confounding, and the
analytic confounding-bias matrix used as a property-test target.

The sampled model is ``X = X W + H B^T + E`` with W the (p, p) causal weights,
H the (n, q) latent confounders loading on the observables through B (p, q),
and E independent noise scaled so every column has standard deviation sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import io as decs_io
from .exceptions import InvalidInputError, SingularCovarianceError
from .model import Dag, Dataset, WeightedAdjacency, is_acyclic
from .rng import RNG_ALGORITHM, generator
from .validation import check_matrix

NOISE_FAMILIES = ("gaussian", "exponential", "gumbel")

_EULER_GAMMA = 0.5772156649015329
_GUMBEL_SD = math.pi / math.sqrt(6.0)


# ---------------------------------------------------------------------------
# specification types


@dataclass(frozen=True)
class ErdosRenyi:
    """Uniform random order, each order-respecting pair kept independently."""

    expected_edges: float = 20.0


@dataclass(frozen=True)
class ScaleFree:
    """Sequential preferential attachment; each new node attaches to
    ``attachment`` existing nodes, edges directed old -> new."""

    attachment: int = 1


@dataclass(frozen=True)
class DenseGaussian:
    """Every entry of B drawn i.i.d. N(0, scale^2)."""

    scale: float = 1.0


@dataclass(frozen=True)
class SparseDag:
    """B supported on a random sparse pattern with ``edge_count`` nonzero
    entries in total, spread evenly over the q columns."""

    edge_count: int = 20


@dataclass(frozen=True)
class SemSpec:
    """Full generative description of one confounded-SEM instance."""

    p: int = 20
    q: int = 10
    n: int = 100
    graph_model: ErdosRenyi | ScaleFree = field(default_factory=ErdosRenyi)
    weight_range: tuple[float, float] = (0.5, 2.0)
    b_model: DenseGaussian | SparseDag = field(default_factory=DenseGaussian)
    noise_family: str = "gaussian"
    sigma: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.q < 0 or self.n < 1:
            raise InvalidInputError("need p >= 1, q >= 0, n >= 1")
        lo, hi = self.weight_range
        if not (0 < lo <= hi):
            raise InvalidInputError("weight_range must satisfy 0 < lo <= hi")
        if self.sigma <= 0:
            raise InvalidInputError("sigma must be > 0")
        if self.noise_family not in NOISE_FAMILIES:
            raise InvalidInputError(
                f"noise_family must be one of {NOISE_FAMILIES}, got {self.noise_family!r}"
            )

    def to_dict(self) -> dict:
        if isinstance(self.graph_model, ErdosRenyi):
            graph = {"type": "er", "expected_edges": self.graph_model.expected_edges}
        else:
            graph = {"type": "sf", "attachment": self.graph_model.attachment}
        if isinstance(self.b_model, DenseGaussian):
            b_model = {"type": "dense_gaussian", "scale": self.b_model.scale}
        else:
            b_model = {"type": "sparse_dag", "edge_count": self.b_model.edge_count}
        return {
            "p": self.p,
            "q": self.q,
            "n": self.n,
            "graph_model": graph,
            "weight_range": list(self.weight_range),
            "b_model": b_model,
            "noise_family": self.noise_family,
            "sigma": self.sigma,
            "seed": self.seed,
            "rng_algorithm": RNG_ALGORITHM,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SemSpec":
        data = dict(data)
        data.pop("rng_algorithm", None)
        try:
            graph_raw = data.get("graph_model", {"type": "er", "expected_edges": 20.0})
            if graph_raw.get("type") == "sf":
                graph = ScaleFree(attachment=int(graph_raw["attachment"]))
            elif graph_raw.get("type") == "er":
                graph = ErdosRenyi(expected_edges=float(graph_raw["expected_edges"]))
            else:
                raise InvalidInputError(
                    f"graph_model.type must be 'er' or 'sf', got {graph_raw.get('type')!r}"
                )
            b_raw = data.get("b_model", {"type": "dense_gaussian", "scale": 1.0})
            if b_raw.get("type") == "sparse_dag":
                b_model = SparseDag(edge_count=int(b_raw["edge_count"]))
            elif b_raw.get("type") == "dense_gaussian":
                b_model = DenseGaussian(scale=float(b_raw["scale"]))
            else:
                raise InvalidInputError(
                    f"b_model.type must be 'dense_gaussian' or 'sparse_dag', got {b_raw.get('type')!r}"
                )
            kwargs = {
                "graph_model": graph,
                "b_model": b_model,
            }
            for key in ("p", "q", "n", "seed"):
                if key in data:
                    kwargs[key] = int(data[key])
            if "weight_range" in data:
                lo, hi = data["weight_range"]
                kwargs["weight_range"] = (float(lo), float(hi))
            if "noise_family" in data:
                kwargs["noise_family"] = str(data["noise_family"])
            if "sigma" in data:
                kwargs["sigma"] = float(data["sigma"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed SEM spec: {exc}") from exc
        return cls(**kwargs)


@dataclass(frozen=True)
class GeneratedInstance:
    """One sampled SEM realization plus everything needed to audit it."""

    truth: Dag
    b: np.ndarray
    data: Dataset
    latent: np.ndarray
    noise: np.ndarray
    h_scale: float = 1.0

    def residual(self) -> np.ndarray:
        """X - X W - H B^T minus the recorded noise; ~0 by construction."""
        x = self.data.values
        recon = x @ self.truth.adjacency.weights
        if self.b.size:
            recon = recon + self.latent @ self.b.T
        return x - recon - self.noise


class RootRemoval(NamedTuple):
    """Result of deleting root nodes: the induced graph, the reduced data,
    and the kept original indices (position k holds the old id of new node k)."""

    dag: Dag
    data: Dataset
    kept: tuple[int, ...]


# ---------------------------------------------------------------------------
# graph generation


def gen_er_dag(p: int, expected_edges: float, rng: np.random.Generator) -> Dag:
    """Erdos-Renyi DAG: uniform random topological order, then each of the
    p(p-1)/2 order-respecting pairs becomes an edge with probability
    2 e / (p^2 - p), clamped to [0, 1]."""
    if p < 2:
        raise InvalidInputError("gen_er_dag needs p >= 2")
    if expected_edges < 0:
        raise InvalidInputError("expected_edges must be >= 0")
    prob = min(1.0, 2.0 * expected_edges / (p * p - p))
    order = tuple(int(i) for i in rng.permutation(p))
    weights = np.zeros((p, p))
    coins = rng.random(p * (p - 1) // 2)
    k = 0
    for a in range(p):
        for b in range(a + 1, p):
            if coins[k] < prob:
                weights[order[a], order[b]] = 1.0
            k += 1
    return Dag(adjacency=WeightedAdjacency(weights=weights), order=order)


def gen_sf_dag(p: int, attachment: int, rng: np.random.Generator) -> Dag:
    """Preferential-attachment DAG: nodes arrive in index order; node k picks
    min(attachment, k) distinct targets among nodes 0..k-1 with probability
    proportional to degree + 1, and receives edges old -> new."""
    if p < 2:
        raise InvalidInputError("gen_sf_dag needs p >= 2")
    if attachment < 1:
        raise InvalidInputError("attachment must be >= 1")
    weights = np.zeros((p, p))
    degree = np.zeros(p)
    for new in range(1, p):
        m = min(attachment, new)
        probs = degree[:new] + 1.0
        probs = probs / probs.sum()
        targets = rng.choice(new, size=m, replace=False, p=probs)
        for old in np.sort(targets):
            weights[int(old), new] = 1.0
            degree[int(old)] += 1
            degree[new] += 1
    return Dag(adjacency=WeightedAdjacency(weights=weights), order=tuple(range(p)))


def assign_weights(dag: Dag, lo: float, hi: float, rng: np.random.Generator) -> WeightedAdjacency:
    """Give each edge magnitude ~ Uniform[lo, hi] and an independent fair sign."""
    if not (0 < lo <= hi):
        raise InvalidInputError("need 0 < lo <= hi")
    mask = dag.adjacency.support(0.0)
    count = int(mask.sum())
    weights = np.zeros_like(dag.adjacency.weights)
    magnitudes = rng.uniform(lo, hi, size=count)
    signs = rng.integers(0, 2, size=count) * 2 - 1
    weights[mask] = magnitudes * signs
    return WeightedAdjacency(weights=weights)


# ---------------------------------------------------------------------------
# sampling


def _standardized_noise(rng: np.random.Generator, family: str, shape) -> np.ndarray:
    """Draws with mean 0 and standard deviation 1 from the named family.

    Exponential and Gumbel draws are centered by their analytic means and
    divided by their analytic standard deviations so a common scale factor
    means the same thing across families.
    """
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "exponential":
        return rng.standard_exponential(shape) - 1.0
    if family == "gumbel":
        return (rng.gumbel(0.0, 1.0, shape) - _EULER_GAMMA) / _GUMBEL_SD
    raise InvalidInputError(f"unknown noise family {family!r}")


def _draw_b(spec: SemSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.q == 0:
        return np.zeros((spec.p, 0))
    if isinstance(spec.b_model, DenseGaussian):
        return spec.b_model.scale * rng.standard_normal((spec.p, spec.q))
    b = np.zeros((spec.p, spec.q))
    per_column = _split_count(spec.b_model.edge_count, spec.q)
    for col, count in enumerate(per_column):
        count = min(count, spec.p)
        rows = rng.choice(spec.p, size=count, replace=False)
        b[rows, col] = rng.standard_normal(count)
    return b


def _split_count(total: int, parts: int) -> list[int]:
    base, extra = divmod(int(total), parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


def _forward_sample(
    truth: Dag,
    b: np.ndarray,
    spec: SemSpec,
    rng: np.random.Generator,
    h_scale: float,
) -> GeneratedInstance:
    n, p, q = spec.n, spec.p, spec.q
    latent = h_scale * _standardized_noise(rng, spec.noise_family, (n, q))
    noise = spec.sigma * _standardized_noise(rng, spec.noise_family, (n, p))
    confound = latent @ b.T if q else np.zeros((n, p))
    weights = truth.adjacency.weights
    x = np.zeros((n, p))
    for j in truth.order:
        parents = np.nonzero(weights[:, j])[0]
        col = confound[:, j] + noise[:, j]
        if parents.size:
            col = col + x[:, parents] @ weights[parents, j]
        x[:, j] = col
    names = tuple(f"x{k + 1}" for k in range(p))
    return GeneratedInstance(
        truth=truth,
        b=b,
        data=Dataset(values=x, names=names),
        latent=latent,
        noise=noise,
        h_scale=h_scale,
    )


def _draw_structure(spec: SemSpec, rng: np.random.Generator) -> tuple[Dag, np.ndarray]:
    if isinstance(spec.graph_model, ErdosRenyi):
        skeleton = gen_er_dag(spec.p, spec.graph_model.expected_edges, rng)
    else:
        skeleton = gen_sf_dag(spec.p, spec.graph_model.attachment, rng)
    lo, hi = spec.weight_range
    weighted = assign_weights(skeleton, lo, hi, rng)
    truth = Dag(adjacency=weighted, order=skeleton.order)
    return truth, _draw_b(spec, rng)


def sample_sem(spec: SemSpec) -> GeneratedInstance:
    """Draw graph, weights, B, latents and noise, then propagate the SEM in
    topological order. Identical specs (including seed) give bit-identical
    instances."""
    rng = generator(spec.seed)
    truth, b = _draw_structure(spec, rng)
    return _forward_sample(truth, b, spec, rng, h_scale=1.0)


def sample_from_truth(
    truth: Dag,
    spec: SemSpec,
    names: tuple[str, ...] | None = None,
) -> GeneratedInstance:
    """Sample data for a user-supplied weighted DAG (semi-synthetic mode).

    Only B, the latents and the noise are drawn; spec.p must match the
    network dimension.
    """
    if truth.dim != spec.p:
        raise InvalidInputError(
            f"network has {truth.dim} nodes but the spec says p={spec.p}"
        )
    rng = generator(spec.seed)
    b = _draw_b(spec, rng)
    instance = _forward_sample(truth, b, spec, rng, h_scale=1.0)
    if names is not None:
        instance = GeneratedInstance(
            truth=instance.truth,
            b=instance.b,
            data=Dataset(values=instance.data.values, names=names),
            latent=instance.latent,
            noise=instance.noise,
            h_scale=instance.h_scale,
        )
    return instance


def gen_environments(
    base: SemSpec,
    count: int,
    sigma_lo: float = 0.25,
    sigma_hi: float = 2.0,
    rng: np.random.Generator | None = None,
    scales=None,
) -> list[GeneratedInstance]:
    """Sample ``count`` environments sharing one (W, B) draw.

    Each environment multiplies the latent draws by its own scale, drawn
    uniformly from [sigma_lo, sigma_hi] (or taken from ``scales`` when given);
    the noise distribution is identical across environments.
    """
    if count < 2:
        raise InvalidInputError("gen_environments needs count >= 2")
    if not (0 < sigma_lo <= sigma_hi):
        raise InvalidInputError("need 0 < sigma_lo <= sigma_hi")
    if rng is None:
        rng = generator(base.seed)
    truth, b = _draw_structure(base, rng)
    if scales is None:
        scales = rng.uniform(sigma_lo, sigma_hi, size=count)
    elif len(scales) != count:
        raise InvalidInputError(f"got {len(scales)} scales for {count} environments")
    return [
        _forward_sample(truth, b, base, rng, h_scale=float(scale)) for scale in scales
    ]


# ---------------------------------------------------------------------------
# population confounding bias


def confounding_bias(w, b, sigma_e: float) -> WeightedAdjacency:
    """The population bias matrix C added to W when confounding is ignored.

    Column j is ``Cov(X)^{-1} Cov(X, H) b_j`` (b_j the j-th row of B) with the
    diagonal zeroed, which under this package's edge convention collapses to
    ``(I - W) (B B^T + sigma_e^2 I)^{-1} B B^T``.
    """
    if isinstance(w, Dag):
        w = w.adjacency
    weights = w.weights if isinstance(w, WeightedAdjacency) else check_matrix(w, "w")
    b = check_matrix(b, "b")
    p = weights.shape[0]
    if b.shape[0] != p:
        raise InvalidInputError(f"B has {b.shape[0]} rows for {p} variables")
    if b.shape[1] < 1:
        raise InvalidInputError("confounding_bias needs q >= 1")
    if is_acyclic(weights, 0.0) is None:
        raise InvalidInputError("support of W must be acyclic")
    marginal = b @ b.T + sigma_e**2 * np.eye(p)
    try:
        projected = np.linalg.solve(marginal, b)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "Cov(X) is singular (sigma_e = 0 with rank-deficient B)"
        ) from exc
    c = (np.eye(p) - weights) @ projected @ b.T
    np.fill_diagonal(c, 0.0)
    return WeightedAdjacency(weights=c)


def population_covariance(w, b, sigma_e: float) -> np.ndarray:
    """Cov(X) = (I - W)^{-T} (B B^T + sigma_e^2 I) (I - W)^{-1}."""
    if isinstance(w, Dag):
        w = w.adjacency
    weights = w.weights if isinstance(w, WeightedAdjacency) else check_matrix(w, "w")
    b = check_matrix(b, "b")
    p = weights.shape[0]
    inner = b @ b.T + sigma_e**2 * np.eye(p)
    l = np.eye(p) - weights
    half = np.linalg.solve(l.T, inner)
    return np.linalg.solve(l.T, half.T).T


# ---------------------------------------------------------------------------
# root removal (semi-synthetic confounding)


def remove_roots(truth: Dag, data: Dataset, roots) -> RootRemoval:
    """Delete the listed root nodes from the graph and the dataset.

    Every listed node must have in-degree 0; deleting them induces latent
    confounding among their former children. Remaining nodes are re-indexed
    densely and the kept original ids are returned.
    """
    p = truth.dim
    roots = [int(r) for r in roots]
    support = truth.adjacency.support(0.0)
    indegree = support.sum(axis=0)
    seen = set()
    for r in roots:
        if not (0 <= r < p):
            raise InvalidInputError(f"node {r} out of range for dim {p}")
        if r in seen:
            raise InvalidInputError(f"node {r} listed twice")
        if indegree[r] != 0:
            raise InvalidInputError(f"node {r} is not a root (in-degree {int(indegree[r])})")
        seen.add(r)
    kept = tuple(i for i in range(p) if i not in seen)
    sub = truth.adjacency.weights[np.ix_(kept, kept)]
    old_to_new = {old: new for new, old in enumerate(kept)}
    order = tuple(old_to_new[i] for i in truth.order if i in old_to_new)
    dag = Dag(adjacency=WeightedAdjacency(weights=sub), order=order)
    names = tuple(data.names[i] for i in kept) if data.names is not None else None
    reduced = Dataset(values=data.values[:, kept], names=names)
    return RootRemoval(dag=dag, data=reduced, kept=kept)


# ---------------------------------------------------------------------------
# bundle I/O


def write_instance(directory, instance: GeneratedInstance, spec: SemSpec) -> dict:
    """Write data.csv, truth.tsv, b.csv and spec.json into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    decs_io.write_dataset_csv(directory / "data.csv", instance.data)
    decs_io.write_edges_tsv(
        directory / "truth.tsv", instance.truth.adjacency, names=instance.data.names
    )
    with open(directory / "b.csv", "w", newline="") as fh:
        for row in instance.b:
            fh.write(",".join(decs_io.format_float(v) for v in row) + "\n")
    payload = spec.to_dict()
    payload["spec_sha256"] = decs_io.sha256_json(spec.to_dict())
    decs_io.write_json(directory / "spec.json", payload)
    return payload

