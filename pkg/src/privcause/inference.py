"""Bivariate causal direction inference with additive noise models.

The non-private path fits both candidate directions by kernel ridge
regression on the training half, measures dependence between cause and
residual on the test half, and picks the direction with the *smaller*
dependence score.  The private paths release the two scores through a
differentially private mechanism first and compare the released values.

Two privacy targets exist and are accounted separately: ``test`` treats
the training half as public and protects the held-out pairs; ``train``
protects the training pairs through the stability of the fitted
regressors.  Running both sequentially and summing budgets protects the
whole dataset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data_io import SplitData
from .privacy import (
    PrivacyParams,
    ReleaseOutcome,
    SensitivityBound,
    advanced_composition_budget,
    laplace_mechanism,
    private_log_iqr,
    private_log_iqr_train,
    propose_test_release_stable,
    rank_train_stability_distance,
    test_sensitivity,
    train_sensitivity_hsic,
)
from .regression import fit_krr, residuals
from .scores import (
    KernelSpec,
    RANK_KINDS,
    ScoreKind,
    UnsupportedScoreError,
    hsic,
    iqr_score,
    kendall_tau,
    log_iqr,
    median_heuristic_bandwidth,
    spearman_rho,
    variance_score,
)

__all__ = [
    "Decision",
    "InferenceReport",
    "PrivateInferenceReport",
    "TestResiduals",
    "anm_infer",
    "anm_infer_detailed",
    "private_test_infer",
    "private_train_infer",
    "utility_two_score",
    "utility_four_score",
    "iqr_release_failure_bound",
]


class Decision(Enum):
    X_CAUSES_Y = "x->y"
    Y_CAUSES_X = "y->x"
    TIE = "tie"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class InferenceReport:
    """Non-private outcome: the two dependence scores and the verdict."""

    score_kind: ScoreKind
    s_xy: float
    s_yx: float
    margin: float
    decision: Decision


@dataclass(frozen=True)
class TestResiduals:
    """Held-out vectors the scores were computed from."""

    x_test: np.ndarray
    y_test: np.ndarray
    residuals_y: np.ndarray
    residuals_x: np.ndarray


@dataclass(frozen=True)
class PrivateInferenceReport:
    """Outcome of a private release.

    ``outcome_xy``/``outcome_yx`` carry the released score for each
    direction (for the IQR paths, the released *sum* for that direction);
    Bottom on either side forces an Abstain decision.  ``noise_scale`` is
    the scale of the Laplace noise applied to released values (0 when the
    release is exact, as in the rank stability path).
    """

    score_kind: ScoreKind
    outcome_xy: ReleaseOutcome
    outcome_yx: ReleaseOutcome
    decision: Decision
    noise_scale: float
    predicted_utility: float | None
    epsilon_spent: float
    delta_spent: float


def _decide(s_xy: float, s_yx: float) -> Decision:
    if s_xy < s_yx:
        return Decision.X_CAUSES_Y
    if s_xy > s_yx:
        return Decision.Y_CAUSES_X
    return Decision.TIE


def _score_kernels(cause, resid, bandwidths) -> tuple[KernelSpec, KernelSpec]:
    """Resolve the HSIC kernel pair for one direction.

    "median" picks each bandwidth by the median heuristic (data-dependent,
    so only valid where the scored vectors are public); a float is used on
    both sides; a (cause, residual) tuple sets them separately.
    """
    if bandwidths == "median":
        return (
            KernelSpec(median_heuristic_bandwidth(cause)),
            KernelSpec(median_heuristic_bandwidth(resid)),
        )
    if isinstance(bandwidths, (int, float)):
        return KernelSpec(float(bandwidths)), KernelSpec(float(bandwidths))
    try:
        h_cause, h_resid = bandwidths
    except (TypeError, ValueError):
        raise ValueError(
            f"bandwidths must be 'median', a number, or a (cause, residual) pair; got {bandwidths!r}"
        ) from None
    return KernelSpec(float(h_cause)), KernelSpec(float(h_resid))


def _residual_bandwidth(bandwidths) -> float:
    if bandwidths == "median":
        raise ValueError(
            "median-heuristic bandwidths depend on the fitted residuals and leak "
            "training data; pass a fixed bandwidth for private release"
        )
    if isinstance(bandwidths, (int, float)):
        return float(bandwidths)
    return float(bandwidths[1])


def _dependence(kind: ScoreKind, cause, resid, bandwidths) -> float:
    if kind is ScoreKind.SPEARMAN_RHO:
        return spearman_rho(cause, resid).value
    if kind is ScoreKind.KENDALL_TAU:
        return kendall_tau(cause, resid).value
    if kind is ScoreKind.HSIC:
        k_cause, k_resid = _score_kernels(cause, resid, bandwidths)
        return hsic(cause, resid, k_cause, k_resid).value
    if kind is ScoreKind.IQR:
        return iqr_score(cause, resid).value
    if kind is ScoreKind.VARIANCE:
        return variance_score(cause, resid).value
    raise UnsupportedScoreError(f"unknown score kind: {kind!r}")


def anm_infer_detailed(
    split: SplitData,
    score_kind: ScoreKind,
    kernel: KernelSpec,
    lam: float,
    *,
    hsic_bandwidths="median",
) -> tuple[InferenceReport, TestResiduals]:
    """Run the inference and also hand back the held-out vectors.

    Fits f: x -> y and g: y -> x on the training half, forms the test
    residuals r_Y = y' - f(x') and r_X = x' - g(y'), and scores the pairs
    (x', r_Y) and (y', r_X).  Smaller score wins; exact equality is a Tie.
    """
    forward = fit_krr(split.train.x, split.train.y, kernel, lam)
    backward = fit_krr(split.train.y, split.train.x, kernel, lam)
    r_y = residuals(forward, split.test.x, split.test.y)
    r_x = residuals(backward, split.test.y, split.test.x)
    s_xy = _dependence(score_kind, split.test.x, r_y, hsic_bandwidths)
    s_yx = _dependence(score_kind, split.test.y, r_x, hsic_bandwidths)
    report = InferenceReport(
        score_kind=score_kind,
        s_xy=s_xy,
        s_yx=s_yx,
        margin=abs(s_yx - s_xy),
        decision=_decide(s_xy, s_yx),
    )
    vectors = TestResiduals(
        x_test=split.test.x, y_test=split.test.y, residuals_y=r_y, residuals_x=r_x
    )
    return report, vectors


def anm_infer(
    split: SplitData,
    score_kind: ScoreKind,
    kernel: KernelSpec,
    lam: float,
    *,
    hsic_bandwidths="median",
) -> InferenceReport:
    report, _ = anm_infer_detailed(split, score_kind, kernel, lam, hsic_bandwidths=hsic_bandwidths)
    return report


def private_test_infer(
    report: InferenceReport,
    m: int,
    params: PrivacyParams,
    rng: np.random.Generator,
    *,
    vectors: TestResiduals | None = None,
    hsic_variant: str = "improved",
    sensitivity: SensitivityBound | None = None,
    delta_prime: float = 1e-6,
) -> PrivateInferenceReport:
    """Release the direction decision privately w.r.t. the held-out pairs.

    Rank and kernel dependence scores take the Laplace route: one draw per
    direction (x->y first, then y->x) at scale test_sensitivity/epsilon,
    costing (2 epsilon, 0) in total.  The sensitivity bound assumes any
    kernel bandwidths were chosen independently of the data.

    The IQR score has unbounded sensitivity, so each of the four log-IQR
    summands (x', r_Y, y', r_X, released in that order, requiring
    ``vectors``) goes through its own stability-gated release.  A changed
    test pair touches at most three of the four statistics, so the inner
    budget comes from 3-fold advanced composition:
    per-release epsilon = advanced_composition_budget(epsilon, delta_prime)
    and each release spends a third of it per Laplace draw.  Any Bottom
    means Abstain.  Total budget (2 epsilon, 2(3 delta + delta_prime)).

    Exact score equality after noising (possible only in the zero-
    sensitivity limit) is reported as Tie rather than an arbitrary pick.
    """
    kind = report.score_kind
    if kind in RANK_KINDS or kind is ScoreKind.HSIC:
        bound = sensitivity if sensitivity is not None else test_sensitivity(kind, m, hsic_variant)
        noisy_xy = laplace_mechanism(report.s_xy, bound, params.epsilon, rng)
        noisy_yx = laplace_mechanism(report.s_yx, bound, params.epsilon, rng)
        scale = bound.value / params.epsilon
        if scale > 0.0:
            predicted = utility_two_score(report.margin, scale)
        else:
            predicted = 1.0 if report.margin > 0.0 else 0.5
        return PrivateInferenceReport(
            score_kind=kind,
            outcome_xy=ReleaseOutcome.release(noisy_xy),
            outcome_yx=ReleaseOutcome.release(noisy_yx),
            decision=_decide(noisy_xy, noisy_yx),
            noise_scale=scale,
            predicted_utility=predicted,
            epsilon_spent=2.0 * params.epsilon,
            delta_spent=0.0,
        )
    if kind is ScoreKind.IQR:
        if vectors is None:
            raise ValueError("the private IQR path needs the raw test vectors")
        per_release = advanced_composition_budget(params.epsilon, delta_prime, k=3)
        inner = PrivacyParams(
            epsilon=per_release / 3.0, delta=params.delta, seed=params.seed
        )
        parts = [
            private_log_iqr(v, inner, rng)
            for v in (vectors.x_test, vectors.residuals_y, vectors.y_test, vectors.residuals_x)
        ]
        outcome_xy = _sum_outcomes(parts[0], parts[1])
        outcome_yx = _sum_outcomes(parts[2], parts[3])
        sigma = 1.0 / inner.epsilon
        return PrivateInferenceReport(
            score_kind=kind,
            outcome_xy=outcome_xy,
            outcome_yx=outcome_yx,
            decision=_decide_outcomes(outcome_xy, outcome_yx),
            noise_scale=sigma,
            predicted_utility=utility_four_score(report.margin, sigma),
            epsilon_spent=2.0 * params.epsilon,
            delta_spent=2.0 * (3.0 * params.delta + delta_prime),
        )
    raise UnsupportedScoreError(f"{kind.value} has no private release path")


def _sum_outcomes(a: ReleaseOutcome, b: ReleaseOutcome) -> ReleaseOutcome:
    if a.released and b.released:
        return ReleaseOutcome.release(a.value + b.value)
    return ReleaseOutcome.bottom()


def _decide_outcomes(outcome_xy: ReleaseOutcome, outcome_yx: ReleaseOutcome) -> Decision:
    if not (outcome_xy.released and outcome_yx.released):
        return Decision.ABSTAIN
    return _decide(outcome_xy.value, outcome_yx.value)


def private_train_infer(
    split: SplitData,
    score_kind: ScoreKind,
    kernel: KernelSpec,
    lam: float,
    params: PrivacyParams,
    rng: np.random.Generator,
    *,
    hsic_bandwidths: float | tuple[float, float] = 0.5,
) -> PrivateInferenceReport:
    """Release the direction decision privately w.r.t. the training pairs.

    The held-out pairs are public here; what must stay hidden is how the
    fitted regressors (and through them the residuals) depend on any one
    training pair.  One swapped training pair moves every prediction by at
    most 8/(n lam^{3/2}), which gives three mechanisms:

    - rank scores: the score only changes if two residuals swap order, so
      the exact score is released through a stability test on the minimum
      residual gap (x->y first, then y->x); (2 epsilon, 2 delta) total and
      no value noise.
    - kernel dependence: Laplace noise at the training sensitivity, scaled
      by the residual-side kernel's Lipschitz constant; (2 epsilon, 0).
    - IQR: the test-variable summands ln IQR(x'), ln IQR(y') are public
      and exact; the residual summands go through the stability-gated
      release (r_Y first, then r_X), for (6 epsilon, 2 delta) total.

    Median-heuristic bandwidths are rejected: they read the residuals.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    n, m = len(split.train), len(split.test)
    report, vectors = anm_infer_detailed(
        split, score_kind, kernel, lam, hsic_bandwidths=hsic_bandwidths
    )
    if score_kind in RANK_KINDS:
        d_xy = rank_train_stability_distance(vectors.residuals_y, n, lam)
        d_yx = rank_train_stability_distance(vectors.residuals_x, n, lam)
        outcome_xy = propose_test_release_stable(report.s_xy, d_xy, params, rng)
        outcome_yx = propose_test_release_stable(report.s_yx, d_yx, params, rng)
        return PrivateInferenceReport(
            score_kind=score_kind,
            outcome_xy=outcome_xy,
            outcome_yx=outcome_yx,
            decision=_decide_outcomes(outcome_xy, outcome_yx),
            noise_scale=0.0,
            predicted_utility=None,
            epsilon_spent=2.0 * params.epsilon,
            delta_spent=2.0 * params.delta,
        )
    if score_kind is ScoreKind.HSIC:
        lipschitz = 1.0 / _residual_bandwidth(hsic_bandwidths)
        bound = train_sensitivity_hsic(m, n, lam, lipschitz)
        noisy_xy = laplace_mechanism(report.s_xy, bound, params.epsilon, rng)
        noisy_yx = laplace_mechanism(report.s_yx, bound, params.epsilon, rng)
        scale = bound.value / params.epsilon
        return PrivateInferenceReport(
            score_kind=score_kind,
            outcome_xy=ReleaseOutcome.release(noisy_xy),
            outcome_yx=ReleaseOutcome.release(noisy_yx),
            decision=_decide(noisy_xy, noisy_yx),
            noise_scale=scale,
            predicted_utility=utility_two_score(report.margin, scale),
            epsilon_spent=2.0 * params.epsilon,
            delta_spent=0.0,
        )
    if score_kind is ScoreKind.IQR:
        q_x = log_iqr(vectors.x_test)
        q_y = log_iqr(vectors.y_test)
        p_ry = private_log_iqr_train(vectors.residuals_y, n, lam, params, rng)
        p_rx = private_log_iqr_train(vectors.residuals_x, n, lam, params, rng)
        outcome_xy = _shift_outcome(p_ry, q_x)
        outcome_yx = _shift_outcome(p_rx, q_y)
        sigma = 1.0 / params.epsilon
        return PrivateInferenceReport(
            score_kind=score_kind,
            outcome_xy=outcome_xy,
            outcome_yx=outcome_yx,
            decision=_decide_outcomes(outcome_xy, outcome_yx),
            noise_scale=sigma,
            predicted_utility=utility_two_score(report.margin, sigma),
            epsilon_spent=6.0 * params.epsilon,
            delta_spent=2.0 * params.delta,
        )
    raise UnsupportedScoreError(f"{score_kind.value} has no private release path")


def _shift_outcome(outcome: ReleaseOutcome, offset: float) -> ReleaseOutcome:
    if outcome.released:
        return ReleaseOutcome.release(outcome.value + offset)
    return ReleaseOutcome.bottom()


def utility_two_score(gamma: float, sigma: float) -> float:
    """Probability the noisy two-score comparison preserves the verdict.

    With independent Laplace(sigma) noise on each score and a margin of
    gamma between them:

        P = 1 - ((gamma + 2 sigma) / (4 sigma)) * exp(-gamma / sigma)

    Lives in [1/2, 1) without clamping: 1/2 at gamma = 0, increasing in
    gamma, decreasing in sigma.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    return 1.0 - ((gamma + 2.0 * sigma) / (4.0 * sigma)) * math.exp(-gamma / sigma)


def utility_four_score(gamma: float, sigma: float) -> float:
    """Two-score utility's four-draw analogue, for the summed IQR releases.

    Each side of the comparison carries two independent Laplace(sigma)
    draws; the correct-ordering probability with margin gamma is

        P = 1 - exp(-gamma/sigma) (48 s^3 + 33 s^2 g + 9 s g^2 + g^3) / (96 s^3)

    writing s, g for sigma, gamma.  Also in [1/2, 1) with no clamping.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    s, g = sigma, gamma
    poly = 48.0 * s**3 + 33.0 * s**2 * g + 9.0 * s * g**2 + g**3
    return 1.0 - math.exp(-g / s) * poly / (96.0 * s**3)


def iqr_release_failure_bound(delta: float) -> float:
    """Upper bound on the chance a stability-gated IQR release fires when
    the attack counts are small (both at most e): 3 delta / 2."""
    if not 0.0 < delta < 2.0 / 3.0:
        raise ValueError(f"delta must lie in (0, 2/3), got {delta}")
    return 1.5 * delta
