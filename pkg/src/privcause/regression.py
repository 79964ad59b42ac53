"""Kernel ridge regression in dual form.

The fit minimizes  (lam/2) ||w||^2 + (1/n) sum_i (w . phi(x_i) - y_i)^2
over functions in the kernel's feature space.  Setting the gradient to
zero and writing w = sum_i alpha_i phi(x_i) gives the linear system

    (K + (n lam / 2) I) alpha = y

which is solved by Cholesky factorization.  Note the ridge term is
n*lam/2, not n*lam: the factor 2 from the squared loss cancels half of
it.  The test suite checks the dual solution against direct numerical
minimization of the primal objective.

Inputs must lie in [-1, 1]; out-of-range data is rejected rather than
clipped, because the perturbation bound below is only valid on that box.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .scores import KernelSpec, _as_vector

__all__ = [
    "FittedRegressor",
    "fit_krr",
    "predict",
    "residuals",
    "residual_perturbation_bound",
]

_DUAL_TOL = 1e-8
_JITTER = 1e-10


@dataclass(frozen=True)
class FittedRegressor:
    dual_coefficients: np.ndarray
    train_inputs: np.ndarray
    kernel: KernelSpec
    lam: float


def _check_box(arr: np.ndarray, name: str) -> None:
    if arr.size and float(np.max(np.abs(arr))) > 1.0 + 1e-12:
        raise ValueError(f"{name} must lie in [-1, 1]; rescale the data first")


def fit_krr(x_train, y_train, kernel: KernelSpec, lam: float) -> FittedRegressor:
    """Fit the dual-form kernel ridge regressor.

    Parameters
    ----------
    x_train, y_train : array-like, shape (n,)
        Training pairs, each coordinate in [-1, 1], n >= 1.
    kernel : KernelSpec
    lam : float
        Regularization weight in (0, 1].
    """
    x = _as_vector(x_train, "x_train")
    y = _as_vector(y_train, "y_train")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 1:
        raise ValueError("need at least one training pair")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    _check_box(x, "x_train")
    _check_box(y, "y_train")

    n = x.size
    gram = kernel.matrix(x, x)
    system = gram + (n * lam / 2.0) * np.eye(n)
    try:
        alpha = cho_solve(cho_factor(system, lower=True), y)
    except LinAlgError:
        alpha = cho_solve(cho_factor(system + _JITTER * np.eye(n), lower=True), y)
    gap = float(np.max(np.abs(system @ alpha - y)))
    if gap > _DUAL_TOL:
        raise ArithmeticError(f"dual solve residual {gap:.3e} exceeds {_DUAL_TOL}")
    return FittedRegressor(alpha, x, kernel, lam)


def predict(model: FittedRegressor, x) -> np.ndarray:
    """Evaluate sum_i alpha_i k(x_train_i, x_j) at each query point."""
    xq = _as_vector(x, "x")
    if xq.size == 0:
        return np.zeros(0)
    preds = model.kernel.matrix(xq, model.train_inputs) @ model.dual_coefficients
    bound = float(np.sum(np.abs(model.dual_coefficients))) + 1e-9
    if float(np.max(np.abs(preds))) > bound:
        raise AssertionError("prediction exceeded the sum-|alpha| envelope")
    return preds


def residuals(model: FittedRegressor, x_test, y_test) -> np.ndarray:
    """Held-out residuals y_test - prediction(x_test)."""
    xq = _as_vector(x_test, "x_test")
    yq = _as_vector(y_test, "y_test")
    if xq.size != yq.size:
        raise ValueError(f"length mismatch: {xq.size} vs {yq.size}")
    if xq.size < 1:
        raise ValueError("need at least one test pair")
    return yq - predict(model, xq)


def residual_perturbation_bound(n: int, lam: float) -> float:
    """Worst-case change of any held-out residual when one training pair
    is replaced by another in-range pair: 8 / (n lam^{3/2}).

    Valid for bounded kernels (k <= 1) on data in [-1, 1] with lam <= 1.
    Decreasing in both arguments.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    return 8.0 / (n * lam**1.5)
