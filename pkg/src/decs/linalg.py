"""Spectral primitives: thin SVD, singular-value trimming, and the smooth
acyclicity function with its gradient.

The trim transform caps every singular value of a data matrix at the (lower)
median singular value, shrinking the directions inflated by dense latent
confounding while leaving the singular vectors untouched. The acyclicity
function ``h(W) = tr(exp(W * W)) - p`` is zero exactly when the support of W
is a DAG and is the smooth surrogate the solver drives to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError
from .validation import check_matrix, check_square

# Singular values below RANK_RTOL * d_max are treated as zero (double-precision
# SVD noise floor).
RANK_RTOL = 1e-10

# Taylor order for the scaled series; at scaled 1-norm <= 0.5 the truncation
# error is ~1e-23, far below the acyclicity tolerances used downstream.
_TAYLOR_ORDER = 18
_SCALE_TARGET = 0.5

# Round tiny negative traces (h is analytically >= 0 for nonnegative W * W).
_NEGATIVE_CLAMP = -1e-9


@dataclass(frozen=True)
class SpectralTransform:
    """The SVD-derived trimming map fitted on a data matrix.

    Attributes
    ----------
    basis : (n, r) ndarray
        Left singular vectors of the fitted matrix (orthonormal columns).
    row_basis : (p, r) ndarray
        Right singular vectors; spans the row space, used to apply the
        transform to rows the map was not fitted on.
    singular_values : (r,) ndarray
        Retained singular values, descending, all above the rank tolerance.
    cap : float
        The lower-median singular value; every singular value is bounded by
        it after the transform.
    """

    basis: np.ndarray
    row_basis: np.ndarray
    singular_values: np.ndarray
    cap: float
    scale_factors: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.minimum(self.singular_values, self.cap) / self.singular_values
        object.__setattr__(self, "scale_factors", factors)

    @property
    def rank(self) -> int:
        return int(self.singular_values.size)

    def apply_rows(self, x) -> np.ndarray:
        """Adjust rows not seen at fit time.

        Each row is decomposed against the fitted row basis; the component
        along the i-th right singular vector is multiplied by the fitted
        scale factor, the remainder orthogonal to the fitted row space is
        kept as is. On the fitted matrix itself this reproduces the trim
        exactly (up to floating-point noise).
        """
        x = check_matrix(x, "x")
        coords = x @ self.row_basis
        return x + (coords * (self.scale_factors - 1.0)) @ self.row_basis.T


def thin_svd(x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated SVD: X = U diag(d) V^T with numerically-zero values dropped.

    Returns (U, d, V) with U (n, r), d descending (r,), V (p, r); singular
    values below ``RANK_RTOL * d_max`` are discarded along with their vectors.
    """
    x = check_matrix(x, "x")
    u, d, vt = np.linalg.svd(x, full_matrices=False)
    if d.size == 0 or d[0] <= 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(d > RANK_RTOL * d[0]))
    return u[:, :r], d[:r], vt[:r].T


def trim_transform(x) -> tuple[np.ndarray, SpectralTransform]:
    """Cap the singular values of ``x`` at their lower median.

    Returns the adjusted matrix ``F x`` (same shape as ``x``) together with
    the fitted :class:`SpectralTransform`. The lower median (the smaller of
    the two middle values for even rank) is used: a smaller cap shrinks
    confounded directions more and the choice is deterministic.
    """
    u, d, v = thin_svd(x)
    if d.size == 0:
        raise DegenerateInputError("cannot trim an all-zero matrix")
    cap = float(d[d.size // 2])
    x_tilde = (u * np.minimum(d, cap)) @ v.T
    transform = SpectralTransform(basis=u, row_basis=v, singular_values=d, cap=cap)
    return x_tilde, transform


_FACTORIALS = [math.factorial(k) for k in range(_TAYLOR_ORDER + 1)]


def _expm_nonneg(a: np.ndarray) -> np.ndarray:
    """exp(A) for entrywise-nonnegative A via scaling-and-squaring.

    A fixed-order truncated Taylor series is exact enough here because the
    series of a nonnegative matrix has no cancellation; this avoids a Padé
    rational solve. The series is evaluated Paterson-Stockmeyer style
    (blocks of degree 5) to keep the matmul count low.
    """
    p = a.shape[0]
    norm = float(np.linalg.norm(a, 1)) if p else 0.0
    squarings = 0 if norm <= _SCALE_TARGET else int(math.ceil(math.log2(norm / _SCALE_TARGET)))
    b = a / (2.0**squarings)

    # powers b^0..b^4, then Horner over degree-5 blocks: 7 matmuls for order 18
    eye = np.eye(p)
    powers = [eye, b]
    for _ in range(3):
        powers.append(powers[-1] @ b)
    b5 = powers[4] @ b
    result = None
    for block_start in range(_TAYLOR_ORDER - (_TAYLOR_ORDER % 5), -1, -5):
        block = sum(
            powers[k] / _FACTORIALS[block_start + k]
            for k in range(min(5, _TAYLOR_ORDER + 1 - block_start))
        )
        result = block if result is None else block + result @ b5

    with np.errstate(over="ignore"):
        for _ in range(squarings):
            result = result @ result
            if not np.isfinite(result).all():
                break
    return result


def _acyclicity_exp(w: np.ndarray) -> np.ndarray:
    e = _expm_nonneg(w * w)
    if not np.isfinite(e).all():
        norm = float(np.linalg.norm(w * w, 1))
        raise OverflowError(
            f"matrix exponential overflowed; 1-norm of W*W is {norm:.6g}"
        )
    return e


def acyclicity_value(w) -> float:
    """tr(exp(W * W)) - p; zero (within tolerance) iff supp(W) is acyclic."""
    w = check_square(w, "w")
    h = float(np.trace(_acyclicity_exp(w))) - w.shape[0]
    if _NEGATIVE_CLAMP <= h < 0.0:
        h = 0.0
    return h


def acyclicity_gradient(w) -> np.ndarray:
    """Gradient of :func:`acyclicity_value`: exp(W * W)^T * 2W (entrywise)."""
    w = check_square(w, "w")
    return _acyclicity_exp(w).T * (2.0 * w)
