"""Graph-recovery metrics: skeleton SHD, TPR/FDR, threshold-sweep AUC,
weighted-adjacency loss, and cross-environment reproducibility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, UndefinedMetricError
from .model import Skeleton, as_weight_matrix, skeleton_of
from .validation import check_same_dim


@dataclass(frozen=True)
class EvalResult:
    shd: int
    tpr: float
    fdr: float
    auc: float
    threshold_used: float
    l2_loss: float | None = None

    def to_dict(self) -> dict:
        return {
            "shd": self.shd,
            "tpr": self.tpr,
            "fdr": self.fdr,
            "auc": self.auc,
            "threshold_used": self.threshold_used,
            "l2_loss": self.l2_loss,
        }


def shd_skeleton(est: Skeleton, truth: Skeleton) -> int:
    """Symmetric-difference size; on skeletons reversals are vacuous, so this
    counts exactly the additions plus deletions."""
    check_same_dim(est.dim, truth.dim)
    return len(est.edges ^ truth.edges)


def tpr_fdr(est: Skeleton, truth: Skeleton) -> tuple[float, float]:
    """True-positive rate and false-discovery rate of an estimated skeleton.

    An empty estimate has FDR 0 (no discoveries, no false ones); an empty
    truth with a non-empty estimate leaves TPR undefined.
    """
    check_same_dim(est.dim, truth.dim)
    if not truth.edges:
        if est.edges:
            raise UndefinedMetricError("TPR undefined: truth is empty but estimate is not")
        return 1.0, 0.0
    hits = len(est.edges & truth.edges)
    tpr = hits / len(truth.edges)
    fdr = (len(est.edges) - hits) / len(est.edges) if est.edges else 0.0
    return tpr, fdr


def pair_scores(w) -> dict[tuple[int, int], float]:
    """Per unordered pair, the larger of the two directed magnitudes."""
    weights = as_weight_matrix(w)
    mag = np.abs(weights)
    mag = np.maximum(mag, mag.T)
    p = mag.shape[0]
    return {(i, j): float(mag[i, j]) for i in range(p) for j in range(i + 1, p)}


def auc_sweep(w_hat, truth: Skeleton):
    """Area under TPR-vs-FDR while the skeleton threshold sweeps the weights.

    Thresholds are the distinct nonzero pair scores plus +inf; the skeleton at
    threshold t keeps pairs scoring >= t. The curve is sorted by FDR, anchored
    at (0, 0) and extended to (1, max tpr); the trapezoidal area is clipped to
    [0, 1]. Returns ``(auc, points)`` with one (threshold, fdr, tpr) triple
    per threshold.
    """
    weights = as_weight_matrix(w_hat)
    check_same_dim(weights.shape[0], truth.dim)
    if not truth.edges:
        raise UndefinedMetricError("AUC undefined for an empty truth skeleton")
    scores = pair_scores(weights)
    thresholds = sorted({s for s in scores.values() if s > 0.0}, reverse=True)
    thresholds.append(np.inf)
    points = []
    for t in thresholds:
        est = Skeleton(
            dim=truth.dim,
            edges=frozenset(pair for pair, s in scores.items() if s >= t),
        )
        tpr, fdr = tpr_fdr(est, truth)
        points.append((float(t), fdr, tpr))
    max_tpr = max(tpr for _, _, tpr in points)
    curve = sorted((fdr, tpr) for _, fdr, tpr in points)
    curve = [(0.0, 0.0)] + curve + [(1.0, max_tpr)]
    xs = np.array([c[0] for c in curve])
    ys = np.array([c[1] for c in curve])
    auc = float(np.clip(np.trapezoid(ys, xs), 0.0, 1.0))
    return auc, points


def l2_loss(w_hat, truth_w) -> float:
    """Squared Frobenius norm of the weight error, divided by p."""
    est = as_weight_matrix(w_hat)
    truth = as_weight_matrix(truth_w)
    check_same_dim(est.shape[0], truth.shape[0])
    diff = est - truth
    return float(np.sum(diff * diff) / est.shape[0])


def reproducibility_curve(skeletons) -> list[float]:
    """Proportion of the edge union appearing in at least k of the skeletons,
    for k = 1..m; weakly decreasing, starting at 1."""
    skeletons = list(skeletons)
    if len(skeletons) < 2:
        raise InvalidInputError("need at least 2 skeletons")
    dim = skeletons[0].dim
    for sk in skeletons[1:]:
        check_same_dim(sk.dim, dim)
    counts: dict[tuple[int, int], int] = {}
    for sk in skeletons:
        for edge in sk.edges:
            counts[edge] = counts.get(edge, 0) + 1
    if not counts:
        raise UndefinedMetricError("reproducibility undefined: every skeleton is empty")
    union = len(counts)
    m = len(skeletons)
    return [sum(1 for c in counts.values() if c >= k) / union for k in range(1, m + 1)]


def evaluate_weights(
    w_hat,
    truth_w,
    threshold: float,
    min_shd_threshold: bool = False,
    ranking_w=None,
) -> EvalResult:
    """Bundle SHD / TPR / FDR / AUC / adjacency loss for one estimate.

    ``ranking_w``, when given, supplies the continuous weights used for the
    threshold sweeps (AUC and min-SHD selection) while ``w_hat`` remains the
    decision matrix for the fixed-threshold metrics. With
    ``min_shd_threshold`` the fixed threshold is replaced by the sweep value
    minimizing skeleton SHD (ties resolved toward the larger, sparser
    threshold), mirroring reporting at a threshold chosen for minimum SHD.
    """
    est_w = as_weight_matrix(w_hat)
    ranking = est_w if ranking_w is None else as_weight_matrix(ranking_w)
    truth_mat = as_weight_matrix(truth_w)
    check_same_dim(est_w.shape[0], truth_mat.shape[0])
    check_same_dim(ranking.shape[0], truth_mat.shape[0])
    truth_skeleton = skeleton_of(truth_mat, 0.0)
    auc, _ = auc_sweep(ranking, truth_skeleton)
    used = float(threshold)
    decision = est_w
    if min_shd_threshold:
        # every achievable skeleton under the strict-> convention appears at
        # threshold 0 or at one of the distinct pair scores
        decision = ranking
        candidates = [0.0] + sorted({s for s in pair_scores(ranking).values() if s > 0.0})
        best_shd, used = None, 0.0
        for t in candidates:
            shd_t = shd_skeleton(skeleton_of(ranking, t), truth_skeleton)
            if best_shd is None or shd_t <= best_shd:
                best_shd, used = shd_t, t
    est_skeleton = skeleton_of(decision, used)
    shd = shd_skeleton(est_skeleton, truth_skeleton)
    tpr, fdr = tpr_fdr(est_skeleton, truth_skeleton)
    return EvalResult(
        shd=shd,
        tpr=tpr,
        fdr=fdr,
        auc=auc,
        threshold_used=used,
        l2_loss=l2_loss(est_w, truth_mat),
    )
