"""Gaussian corruption process for continuous geometry attributes.

Forward process over timesteps t = 1..T:

    q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I)
    q(x_t | x_0)     = N(sqrt(abar_t) x_0, (1 - abar_t) I)

with alpha_t = 1 - beta_t and abar_t the running product of alpha. The
posterior q(x_{t-1} | x_t, x_0) is Gaussian with

    mean = sqrt(abar_{t-1}) beta_t / (1 - abar_t) * x_0
         + sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t) * x_t
    var  = (1 - abar_{t-1}) / (1 - abar_t) * beta_t

All tables are float64. Timesteps are 1-based; abar_0 = 1 by convention,
which makes the t = 1 posterior variance exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidSchedule, StepOutOfRange


@dataclass(frozen=True)
class ContinuousSchedule:
    """Precomputed float64 tables for the Gaussian process, indexed by t - 1."""

    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.shape[0] < 1:
            raise InvalidSchedule(f"beta must be a non-empty vector, got shape {beta.shape}")
        if not ((beta > 0) & (beta < 1)).all():
            raise InvalidSchedule("every beta_t must lie strictly in (0, 1)")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", 1.0 - beta)
        object.__setattr__(self, "alpha_bar", np.cumprod(1.0 - beta))

    @property
    def n_steps(self) -> int:
        return self.beta.shape[0]

    def _check_t(self, t: int) -> int:
        if not 1 <= t <= self.n_steps:
            raise StepOutOfRange(f"t = {t} outside 1..{self.n_steps}")
        return int(t)

    def abar(self, t: int) -> float:
        """Cumulative signal retention abar_t, with abar_0 = 1."""
        if t == 0:
            return 1.0
        return float(self.alpha_bar[self._check_t(t) - 1])


def make_linear_beta(n_steps: int = 1000, beta_start: float = 1e-4,
                     beta_end: float = 0.02) -> ContinuousSchedule:
    """Linear beta ramp; defaults match the standard image-diffusion setting."""
    if n_steps < 1:
        raise InvalidSchedule("need at least one step")
    return ContinuousSchedule(beta=np.linspace(beta_start, beta_end, n_steps, dtype=np.float64))


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, sched: ContinuousSchedule) -> np.ndarray:
    """Draw x_t from q(x_t | x_0) using the provided standard-normal eps."""
    t = sched._check_t(t)
    abar = sched.alpha_bar[t - 1]
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def q_posterior(x0: np.ndarray, xt: np.ndarray, t: int,
                sched: ContinuousSchedule) -> tuple[np.ndarray, float]:
    """Posterior q(x_{t-1} | x_t, x_0): (mean array, scalar variance)."""
    t = sched._check_t(t)
    beta = sched.beta[t - 1]
    alpha = sched.alpha[t - 1]
    abar_t = sched.alpha_bar[t - 1]
    abar_prev = sched.abar(t - 1)
    x0 = np.asarray(x0, dtype=np.float64)
    xt = np.asarray(xt, dtype=np.float64)
    coef0 = np.sqrt(abar_prev) * beta / (1.0 - abar_t)
    coeft = np.sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar_t)
    var = (1.0 - abar_prev) / (1.0 - abar_t) * beta
    return coef0 * x0 + coeft * xt, float(var)


def predict_x0_from_eps(xt: np.ndarray, eps_hat: np.ndarray, t: int,
                        sched: ContinuousSchedule) -> np.ndarray:
    """Invert the marginal: x_0 = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)."""
    t = sched._check_t(t)
    abar = sched.alpha_bar[t - 1]
    xt = np.asarray(xt, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    return (xt - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)


VarianceChoice = Literal["posterior", "beta"]


def reverse_variance(t: int, sched: ContinuousSchedule,
                     variance: VarianceChoice = "posterior") -> float:
    """Fixed reverse-step variance: the posterior value or plain beta_t."""
    t = sched._check_t(t)
    if variance == "beta":
        return float(sched.beta[t - 1])
    if variance == "posterior":
        abar_t = sched.alpha_bar[t - 1]
        abar_prev = sched.abar(t - 1)
        return float((1.0 - abar_prev) / (1.0 - abar_t) * sched.beta[t - 1])
    raise StepOutOfRange(f"unknown variance choice {variance!r}")


def reverse_step(xt: np.ndarray, eps_hat: np.ndarray, t: int, sched: ContinuousSchedule,
                 noise: np.ndarray, variance: VarianceChoice = "posterior") -> np.ndarray:
    """One reverse transition x_t -> x_{t-1}.

    mean = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t), plus
    sigma * noise except at t = 1, where the step is deterministic.
    """
    t = sched._check_t(t)
    beta = sched.beta[t - 1]
    alpha = sched.alpha[t - 1]
    abar_t = sched.alpha_bar[t - 1]
    xt = np.asarray(xt, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    mean = (xt - beta / np.sqrt(1.0 - abar_t) * eps_hat) / np.sqrt(alpha)
    if t == 1:
        return mean
    sigma = np.sqrt(reverse_variance(t, sched, variance))
    return mean + sigma * np.asarray(noise, dtype=np.float64)


def loss_simple(eps: np.ndarray, eps_hat: np.ndarray) -> float:
    """Squared L2 distance between true and predicted noise, summed over entries."""
    diff = np.asarray(eps, dtype=np.float64) - np.asarray(eps_hat, dtype=np.float64)
    return float(np.sum(diff * diff))
