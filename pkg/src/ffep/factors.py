"""Boltzmann factors over mini-batches, and the fixed Gaussian prior factor.

A mini-batch factor is f(theta) = exp(-beta * sum of per-example losses over
the batch).  Only log-values and derivatives are exposed here; exponentiation
happens inside the approximation schemes with max-shift stabilization, since
f itself underflows to zero at moderate beta * cost.

Derivatives chain through the margin a_k = y_k * theta.x_k:

    grad_i     = -beta * sum_k d1(a_k) * y_k * x_{k,i}
    hessdiag_i = -beta * sum_k d2(a_k) * x_{k,i}^2

which is all a fully factorized scheme ever needs (off-diagonal curvature is
never formed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import DiagGaussian, eval_log
from .losses import LossKind, loss_derivatives, loss_value

__all__ = [
    "MiniBatchFactor",
    "PriorFactor",
    "BoundFactor",
    "GaussianFactor",
    "log_factor",
    "log_factor_grad_hessdiag",
    "prior_as_message",
    "bind",
]


@dataclass(frozen=True)
class MiniBatchFactor:
    """A subset of examples plus loss and inverse temperature beta."""

    batch: np.ndarray  # example indices
    loss: LossKind
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "batch", np.asarray(self.batch, dtype=int).reshape(-1))
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class PriorFactor:
    """Fixed Gaussian prior on the classifier parameters."""

    mean: np.ndarray | None = None  # None means all-zero
    variance: float = 25.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("prior variance must be positive")
        if self.mean is not None:
            object.__setattr__(
                self, "mean", np.asarray(self.mean, dtype=float).reshape(-1)
            )


def prior_as_message(prior: PriorFactor, d: int) -> DiagGaussian:
    """The prior as a proper unit-mass message of dimension d."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    mean = np.zeros(d) if prior.mean is None else prior.mean
    if mean.size != d:
        raise ValueError(f"prior mean has length {mean.size}, expected {d}")
    return DiagGaussian.from_mean_var(mean, prior.variance)


class BoundFactor:
    """A mini-batch factor bound to its dataset, ready for scheme evaluation.

    Exposes the black-box surface the schemes consume: ``log_value`` at one
    point, ``log_value_many`` at a stack of points, and
    ``log_grad_hessdiag`` for the Laplace-style schemes.
    """

    def __init__(self, factor: MiniBatchFactor, dataset):
        self.factor = factor
        self.X = dataset.features[factor.batch]
        self.y = dataset.labels[factor.batch]
        self.loss = factor.loss
        self.beta = factor.beta

    def log_value(self, theta) -> float:
        if self.X.shape[0] == 0:
            return 0.0
        a = self.y * (self.X @ theta)
        return -self.beta * float(np.sum(loss_value(self.loss, a)))

    def log_value_many(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if self.X.shape[0] == 0:
            return np.zeros(thetas.shape[0])
        a = self.y[None, :] * (thetas @ self.X.T)
        return -self.beta * np.sum(loss_value(self.loss, a), axis=1)

    def log_grad_hessdiag(self, theta):
        if self.X.shape[0] == 0:
            z = np.zeros_like(np.asarray(theta, dtype=float))
            return z, z.copy()
        a = self.y * (self.X @ theta)
        d1, d2 = loss_derivatives(self.loss, a)
        grad = -self.beta * (self.X.T @ (d1 * self.y))
        hessdiag = -self.beta * ((self.X * self.X).T @ d2)
        return grad, hessdiag


class GaussianFactor:
    """A diagonal Gaussian used directly as a factor (synthetic/conjugate runs)."""

    def __init__(self, g: DiagGaussian):
        self.g = g

    def log_value(self, theta) -> float:
        return eval_log(self.g, theta)

    def log_value_many(self, thetas) -> np.ndarray:
        return eval_log(self.g, np.atleast_2d(thetas))

    def log_grad_hessdiag(self, theta):
        theta = np.asarray(theta, dtype=float)
        grad = self.g.linear + 2.0 * self.g.neg_half_precision * theta
        return grad, 2.0 * self.g.neg_half_precision.copy()


def bind(factor: MiniBatchFactor, dataset) -> BoundFactor:
    return BoundFactor(factor, dataset)


def log_factor(factor: MiniBatchFactor, dataset, theta) -> float:
    """-beta * (summed batch loss) at theta; never exponentiated here."""
    return bind(factor, dataset).log_value(np.asarray(theta, dtype=float))


def log_factor_grad_hessdiag(factor: MiniBatchFactor, dataset, theta):
    """Gradient and Hessian diagonal of the log-factor at theta."""
    return bind(factor, dataset).log_grad_hessdiag(np.asarray(theta, dtype=float))
