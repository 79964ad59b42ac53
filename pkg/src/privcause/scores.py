"""Dependence scores between a candidate cause and a residual vector.

Two rank statistics (Spearman, Kendall), a kernel dependence statistic
computed from centered Gram matrices, and two log-spread scores (IQR,
variance) used by the Gaussian-noise variant.  Every score maps two
equal-length real vectors to a single nonnegative-or-real value wrapped
in a :class:`ScoreValue`.

Ties in the rank statistics are broken by original index (stable sort),
so all scores are deterministic functions of their inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "DegenerateDataError",
    "UnsupportedScoreError",
    "ScoreKind",
    "RANK_KINDS",
    "ScoreValue",
    "KernelSpec",
    "rank_vector",
    "spearman_rho",
    "kendall_tau",
    "hsic",
    "median_heuristic_bandwidth",
    "log_iqr",
    "iqr_score",
    "variance_score",
]


class DegenerateDataError(ValueError):
    """The data carries no usable spread for the requested statistic."""


class UnsupportedScoreError(ValueError):
    """The requested operation is not defined for this score kind."""


class ScoreKind(Enum):
    SPEARMAN_RHO = "spearman"
    KENDALL_TAU = "kendall"
    HSIC = "hsic"
    IQR = "iqr"
    VARIANCE = "variance"


RANK_KINDS = (ScoreKind.SPEARMAN_RHO, ScoreKind.KENDALL_TAU)


@dataclass(frozen=True)
class ScoreValue:
    kind: ScoreKind
    value: float


@dataclass(frozen=True)
class KernelSpec:
    """A bounded shift-invariant kernel, k(u, v) = exp(-(u-v)^2 / (2 h^2)).

    Values lie in (0, 1].  ``lipschitz`` is the conservative constant 1/h,
    an upper bound on |dk/du| that downstream sensitivity bounds rely on.
    """

    bandwidth: float
    family: str = "squared-exponential"

    def __post_init__(self) -> None:
        if self.family != "squared-exponential":
            raise ValueError(f"unknown kernel family: {self.family!r}")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("kernel bandwidth must be positive and finite")

    def matrix(self, u, v) -> np.ndarray:
        u = _as_vector(u, "u")
        v = _as_vector(v, "v")
        d = u[:, None] - v[None, :]
        return np.exp(-(d * d) / (2.0 * self.bandwidth**2))

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.bandwidth


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _paired(a, b, min_len: int = 2) -> tuple[np.ndarray, np.ndarray]:
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.size != vb.size:
        raise ValueError(f"length mismatch: {va.size} vs {vb.size}")
    if va.size < min_len:
        raise ValueError(f"need at least {min_len} samples, got {va.size}")
    return va, vb


def rank_vector(values) -> np.ndarray:
    """Ranks 1..m with ties broken by original index (stable)."""
    arr = _as_vector(values, "values")
    if arr.size == 0:
        raise ValueError("cannot rank an empty vector")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.int64)
    ranks[order] = np.arange(1, arr.size + 1)
    return ranks


def spearman_rho(a, b) -> ScoreValue:
    """Absolute Spearman rank correlation.

    With rank difference d_i, the score is |1 - 6 sum d_i^2 / (m (m^2-1))|,
    in [0, 1].  Monotone transforms of either argument leave it unchanged.
    """
    va, vb = _paired(a, b)
    m = va.size
    d = rank_vector(va).astype(float) - rank_vector(vb).astype(float)
    rho = 1.0 - 6.0 * float(d @ d) / (m * (m * m - 1.0))
    return ScoreValue(ScoreKind.SPEARMAN_RHO, abs(rho))


def _count_inversions(seq: np.ndarray) -> int:
    # mergesort-style: cross-half inversions counted against the sorted halves
    n = seq.size
    if n <= 1:
        return 0
    mid = n // 2
    left = np.array(seq[:mid])
    right = np.array(seq[mid:])
    inv = _count_inversions(left) + _count_inversions(right)
    left.sort()
    right.sort()
    inv += int(np.sum(left.size - np.searchsorted(left, right, side="right")))
    return inv


def kendall_tau(a, b) -> ScoreValue:
    """Absolute Kendall rank correlation |C - D| / (m (m-1) / 2).

    C and D count concordant/discordant index pairs after stable rank
    conversion, so every pair is one or the other.  Runs in O(m log m)
    by counting inversions of the second rank vector ordered by the first.
    """
    va, vb = _paired(a, b)
    m = va.size
    ra = rank_vector(va)
    rb = rank_vector(vb)
    seq = rb[np.argsort(ra)]
    discordant = _count_inversions(seq)
    total = m * (m - 1) // 2
    concordant = total - discordant
    return ScoreValue(ScoreKind.KENDALL_TAU, abs(concordant - discordant) / total)


def _double_center(mat: np.ndarray) -> np.ndarray:
    row = mat.mean(axis=1, keepdims=True)
    col = mat.mean(axis=0, keepdims=True)
    return mat - row - col + mat.mean()


def hsic(a, b, kernel_a: KernelSpec, kernel_b: KernelSpec) -> ScoreValue:
    """Kernel dependence score trace(K H L H)/(m-1)^2 with H = I - 11^T/m.

    Computed through the double-centered Gram matrix of the second argument
    (trace(K H L H) = sum(K * HLH) for symmetric K, L), so the centering
    matrix is never materialized.  Nonnegative up to floating-point noise;
    tiny negatives are clamped to zero.
    """
    va, vb = _paired(a, b)
    m = va.size
    gram_a = kernel_a.matrix(va, va)
    gram_b_centered = _double_center(kernel_b.matrix(vb, vb))
    raw = float(np.sum(gram_a * gram_b_centered)) / (m - 1) ** 2
    if raw < -1e-12:
        raise ValueError(f"kernel dependence came out negative ({raw}); non-PSD kernel?")
    return ScoreValue(ScoreKind.HSIC, max(raw, 0.0))


def median_heuristic_bandwidth(values) -> float:
    """Median absolute pairwise difference over distinct index pairs.

    Data-dependent; only for use where the inputs are not privacy-sensitive.
    """
    arr = _as_vector(values, "values")
    if arr.size < 2:
        raise ValueError("need at least 2 samples for the median heuristic")
    iu, ju = np.triu_indices(arr.size, k=1)
    med = float(np.median(np.abs(arr[iu] - arr[ju])))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise gap is zero; no usable bandwidth")
    return med


def log_iqr(values) -> float:
    """Natural log of the interquartile range (linear-interpolation quantiles)."""
    arr = _as_vector(values, "values")
    if arr.size < 4:
        raise ValueError(f"need at least 4 samples for an IQR, got {arr.size}")
    q25, q75 = np.quantile(arr, (0.25, 0.75))
    spread = float(q75 - q25)
    if spread <= 0.0:
        raise DegenerateDataError("interquartile range is zero")
    return math.log(spread)


def iqr_score(a, b) -> ScoreValue:
    """Sum of log interquartile ranges, log IQR(a) + log IQR(b)."""
    va, vb = _paired(a, b, min_len=4)
    return ScoreValue(ScoreKind.IQR, log_iqr(va) + log_iqr(vb))


def variance_score(a, b) -> ScoreValue:
    """Sum of log population variances.  No private release path exists
    for this score; it is a non-private baseline only."""
    va, vb = _paired(a, b)
    var_a = float(np.var(va))
    var_b = float(np.var(vb))
    if var_a <= 0.0 or var_b <= 0.0:
        raise DegenerateDataError("variance score undefined for constant input")
    return ScoreValue(ScoreKind.VARIANCE, math.log(var_a) + math.log(var_b))
