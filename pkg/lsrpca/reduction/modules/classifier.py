"""
Multinomial Logistic Regression
===============================

The downstream classifier of the comparison harness: softmax regression with
an L2 penalty on the weights (not the intercepts), trained by L-BFGS-B from
an all-zero start.

Objective::

    f(W, b) = (1/N) Σ_i -log softmax(x_i W + b)[y_i] + reg/(2N) ‖W‖²_F

Non-convergence within ``max_iter`` is reported on the model
(``converged = False``) and logged; it is not an error.
"""

import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.special import softmax

from .exceptions import LabelError
from .exceptions import PreconditionError
from .exceptions import ShapeError

logger = logging.getLogger(__name__)

DEFAULT_REG = 1.0
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-6


@dataclass(eq=False)
class LogRegModel:
    weights: np.ndarray
    intercept: np.ndarray
    converged: bool
    n_iter: int
    objective_history: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return int(self.intercept.shape[0])

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weights.shape[0]:
            raise ShapeError("Features do not match the classifier", x.shape, self.weights.shape)
        return x @ self.weights + self.intercept

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.decision_function(x), axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_function(x), axis=1)


class LogisticObjective:
    """Penalized multinomial negative log-likelihood over a flat parameter vector."""

    def __init__(self, x: np.ndarray, labels: np.ndarray, n_classes: int, reg: float):
        self.x = np.asarray(x, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.n_classes = n_classes
        self.reg = reg
        self.n, self.k = self.x.shape
        self.onehot = np.zeros((self.n, n_classes))
        self.onehot[np.arange(self.n), self.labels] = 1.0

    @property
    def size(self) -> int:
        return (self.k + 1) * self.n_classes

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        weights = theta[: self.k * self.n_classes].reshape(self.k, self.n_classes)
        return weights, theta[self.k * self.n_classes:]

    def value_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        weights, intercept = self.unpack(theta)
        scores = self.x @ weights + intercept
        log_norm = logsumexp(scores, axis=1)
        nll = float(np.sum(log_norm - scores[np.arange(self.n), self.labels]))
        value = (nll + 0.5 * self.reg * float(np.sum(weights * weights))) / self.n
        residual = np.exp(scores - log_norm[:, None]) - self.onehot
        grad_w = (self.x.T @ residual + self.reg * weights) / self.n
        grad_b = residual.sum(axis=0) / self.n
        return value, np.concatenate([grad_w.ravel(), grad_b])

    def value(self, theta: np.ndarray) -> float:
        return self.value_and_grad(theta)[0]


def validate_labels(labels: np.ndarray, rows: int, n_classes: int | None = None) -> int:
    """
    Check labels against their feature rows and return the class count.

    Raises:
        LabelError: On a length mismatch, an out-of-range label or a class
            without any row
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != rows:
        raise LabelError(f"Expected {rows} labels, got shape {labels.shape}")
    if rows == 0:
        raise LabelError("No labeled rows")
    if labels.min() < 0:
        raise LabelError("Labels must be non-negative class ids")
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    if labels.max() >= n_classes:
        raise LabelError(f"Label {int(labels.max())} is out of range for {n_classes} classes")
    missing = np.setdiff1d(np.arange(n_classes), labels)
    if missing.size:
        raise LabelError(f"Classes without any row: {missing.tolist()}")
    if n_classes < 2:
        raise LabelError("At least two classes are required")
    return n_classes


def train_logreg(
    x: np.ndarray,
    labels: np.ndarray,
    *,
    n_classes: int | None = None,
    reg: float = DEFAULT_REG,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> LogRegModel:
    """
    Fit a multinomial logistic regression.

    Args:
        x: Dense N x K training features
        labels: Class id per row
        n_classes: Class count; defaults to max(labels) + 1
        reg: L2 penalty weight, > 0
        max_iter: L-BFGS-B iteration cap
        tol: Projected-gradient tolerance

    Raises:
        PreconditionError: If ``reg`` is not positive
        LabelError: If a class has no row or labels do not match ``x``
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("Training features must be a matrix", x.shape)
    if reg <= 0:
        raise PreconditionError(f"Regularization must be positive, got {reg}")
    n_classes = validate_labels(labels, x.shape[0], n_classes)
    objective = LogisticObjective(x, labels, n_classes, reg)
    theta0 = np.zeros(objective.size)
    history = [objective.value(theta0)]

    def record(theta: np.ndarray) -> None:
        history.append(objective.value(theta))

    result = minimize(
        objective.value_and_grad,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": max_iter, "gtol": tol},
    )
    if not result.success:
        logger.warning(f"Logistic regression stopped without converging after {result.nit} iterations: {result.message}")
    weights, intercept = objective.unpack(result.x)
    return LogRegModel(
        weights=weights.copy(),
        intercept=intercept.copy(),
        converged=bool(result.success),
        n_iter=int(result.nit),
        objective_history=history,
    )
