"""Absorbing-state categorical corruption for semantic labels.

States 0..K-1 are the vocabulary labels; state K is an absorbing [MASK]. The
per-step transition matrix is column-stochastic with [Q_t]_{mn} =
q(z_t = m | z_{t-1} = n):

    non-mask column n: alpha_t + beta_t on the diagonal, beta_t on other
        non-mask rows, gamma_t on the mask row
    mask column: unit vector on mask (absorbing)

so alpha_t + K beta_t + gamma_t = 1. Cumulative products Qbar_t = Q_t ... Q_1
give the closed-form marginals q(z_t | z_0) = Qbar_t[:, z_0].

The schedule is parameterized by linear ramps on the cumulative keep mass
(prod of alpha) and cumulative mask mass (1 - prod of (1 - gamma)); per-step
values come from consecutive ratios, which is the unique derivation under
which the stored ramps equal the products of the per-step factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidSchedule, StepOutOfRange, UnreachableState


@dataclass(frozen=True)
class DiscreteSchedule:
    """Precomputed transition tables; all arrays are float64, indexed by t - 1."""

    n_classes: int            # K: real labels, including "empty"
    alpha: np.ndarray         # (T,) per-step keep mass
    beta: np.ndarray          # (T,) per-step uniform-replace mass (per class)
    gamma: np.ndarray         # (T,) per-step mask mass
    keep_bar: np.ndarray      # (T,) cumulative keep mass
    mask_bar: np.ndarray      # (T,) cumulative mask mass
    Q: np.ndarray             # (T, S, S) per-step transitions
    Q_bar: np.ndarray         # (T, S, S) cumulative transitions

    @property
    def n_steps(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_states(self) -> int:
        """K + 1: labels plus the absorbing mask state."""
        return self.n_classes + 1

    @property
    def mask_index(self) -> int:
        return self.n_classes

    def _check_t(self, t: int, low: int = 1) -> int:
        if not low <= t <= self.n_steps:
            raise StepOutOfRange(f"t = {t} outside {low}..{self.n_steps}")
        return int(t)


def transition_matrix(alpha: float, beta: float, gamma: float, n_classes: int) -> np.ndarray:
    """Single-step column-stochastic matrix for given per-step masses."""
    k = n_classes
    q = np.full((k + 1, k + 1), beta, dtype=np.float64)
    np.fill_diagonal(q, alpha + beta)
    q[k, :] = gamma
    q[:, k] = 0.0
    q[k, k] = 1.0
    return q


def make_mask_replace_schedule(
    n_steps: int,
    n_classes: int,
    keep_start: float = 1.0 - 1e-5,
    keep_end: float = 9e-6,
    mask_start: float = 9e-6,
    mask_end: float = 0.99999,
) -> DiscreteSchedule:
    """Build the absorbing-state schedule from cumulative-mass ramps.

    The cumulative keep mass decays linearly keep_start -> keep_end and the
    cumulative mask mass grows linearly mask_start -> mask_end over t = 1..T.
    Default endpoints keep the residual uniform-replace mass strictly
    positive at every step, which every divide in the reverse direction
    relies on.

    Raises:
        InvalidSchedule: ramps outside (0, 1), non-monotone, or a derived
            per-step mass is negative.
    """
    if n_steps < 1:
        raise InvalidSchedule("need at least one step")
    if n_classes < 1:
        raise InvalidSchedule("need at least one real label")
    if n_steps == 1:
        keep_bar = np.array([keep_end], dtype=np.float64)
        mask_bar = np.array([mask_end], dtype=np.float64)
    else:
        keep_bar = np.linspace(keep_start, keep_end, n_steps, dtype=np.float64)
        mask_bar = np.linspace(mask_start, mask_end, n_steps, dtype=np.float64)
    if not ((keep_bar > 0) & (keep_bar < 1)).all() or not ((mask_bar > 0) & (mask_bar < 1)).all():
        raise InvalidSchedule("cumulative masses must lie strictly in (0, 1)")
    if (np.diff(keep_bar) > 0).any() or (np.diff(mask_bar) < 0).any():
        raise InvalidSchedule("keep mass must be non-increasing and mask mass non-decreasing")
    if ((keep_bar + mask_bar) > 1.0).any():
        raise InvalidSchedule("cumulative keep + mask mass exceeds 1")

    keep_full = np.concatenate([[1.0], keep_bar])
    unmasked_full = np.concatenate([[1.0], 1.0 - mask_bar])
    alpha = keep_full[1:] / keep_full[:-1]
    gamma = 1.0 - unmasked_full[1:] / unmasked_full[:-1]
    beta = (1.0 - alpha - gamma) / n_classes
    if (beta < 0).any():
        worst = int(np.argmin(beta)) + 1
        raise InvalidSchedule(
            f"per-step replace mass is negative at t = {worst} ({beta.min():.3e}); "
            "cumulative ramps are infeasible"
        )

    s = n_classes + 1
    Q = np.empty((n_steps, s, s), dtype=np.float64)
    Q_bar = np.empty((n_steps, s, s), dtype=np.float64)
    for i in range(n_steps):
        Q[i] = transition_matrix(alpha[i], beta[i], gamma[i], n_classes)
        Q_bar[i] = Q[i] @ Q_bar[i - 1] if i > 0 else Q[i]

    colsum = Q.sum(axis=1)
    if not np.allclose(colsum, 1.0, atol=1e-12):
        raise InvalidSchedule("transition columns do not sum to 1")
    return DiscreteSchedule(
        n_classes=n_classes, alpha=alpha, beta=beta, gamma=gamma,
        keep_bar=keep_bar, mask_bar=mask_bar, Q=Q, Q_bar=Q_bar,
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def inverse_cdf_sample(probs: np.ndarray, u: np.ndarray | float) -> np.ndarray | int:
    """Categorical draw by inverting the CDF: smallest i with u <= cdf_i.

    Exact boundary hits resolve to the lower index. Vectorized over leading
    dimensions of ``probs`` (shape (..., S)) with matching ``u``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    scalar = probs.ndim == 1
    cdf = np.cumsum(probs, axis=-1)
    u_arr = np.asarray(u, dtype=np.float64)
    hit = u_arr[..., None] <= cdf
    hit[..., -1] = True  # guard against cumsum rounding below 1
    idx = hit.argmax(axis=-1)
    return int(idx) if scalar else idx


def q_sample_discrete(z0, t: int, u, sched: DiscreteSchedule):
    """Draw z_t from the marginal q(z_t | z_0) = Qbar_t[:, z_0].

    Vectorized: z0 int array and u same-shape uniforms give an int array.
    """
    t = sched._check_t(t)
    z0 = np.asarray(z0)
    _check_states(z0, sched.n_states)
    cols = sched.Q_bar[t - 1][:, z0]          # (S, ...) column per input
    probs = np.moveaxis(cols, 0, -1)          # (..., S)
    return inverse_cdf_sample(probs, u)


def q_step_discrete(z_prev, t: int, u, sched: DiscreteSchedule):
    """Draw z_t from one forward step q(z_t | z_{t-1}) = Q_t[:, z_{t-1}]."""
    t = sched._check_t(t)
    z_prev = np.asarray(z_prev)
    _check_states(z_prev, sched.n_states)
    cols = sched.Q[t - 1][:, z_prev]
    probs = np.moveaxis(cols, 0, -1)
    return inverse_cdf_sample(probs, u)


def q_posterior_discrete(zt: int, z0: int, t: int, sched: DiscreteSchedule) -> np.ndarray:
    """Exact posterior q(z_{t-1} | z_t, z_0) as a length-S probability vector.

    Requires t >= 2 (at t = 1 the "posterior" is the data itself).

    Raises:
        UnreachableState: q(z_t | z_0) = 0, so conditioning is undefined.
    """
    t = sched._check_t(t, low=2)
    _check_states(np.asarray([zt, z0]), sched.n_states)
    num = sched.Q[t - 1][zt, :] * sched.Q_bar[t - 2][:, z0]
    den = sched.Q_bar[t - 1][zt, z0]
    if den <= 0.0:
        raise UnreachableState(f"q(z_{t} = {zt} | z_0 = {z0}) = 0 under this schedule")
    return num / den


def reverse_discrete(zt: int, logits: np.ndarray, t: int, sched: DiscreteSchedule) -> np.ndarray:
    """Reverse transition p(z_{t-1} | z_t) via marginalizing a predicted z_0.

    p(z_{t-1} | z_t) is proportional to
    sum_{z0 < K} q(z_{t-1} | z_t, z0) softmax(logits)[z0], renormalized.
    Candidate z0 values the schedule makes unreachable from z_t contribute
    nothing; if every candidate is unreachable the state itself is invalid.
    """
    t = sched._check_t(t, low=2)
    _check_states(np.asarray(zt), sched.n_states)
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (sched.n_classes,):
        raise InvalidInput(f"logits must have shape ({sched.n_classes},), got {logits.shape}")
    probs0 = softmax(logits)
    den = sched.Q_bar[t - 1][zt, : sched.n_classes]
    reachable = den > 0.0
    if not reachable.any():
        raise UnreachableState(f"z_t = {zt} is unreachable from every label at t = {t}")
    w = np.where(reachable, probs0 / np.where(reachable, den, 1.0), 0.0)
    v = sched.Q_bar[t - 2][:, : sched.n_classes] @ w
    p = sched.Q[t - 1][zt, :] * v
    total = p.sum()
    if total <= 0.0:
        raise UnreachableState(f"no reverse transition mass at t = {t} from z_t = {zt}")
    return p / total


def loss_vb_discrete(z0: int, zt: int, logits: np.ndarray, t: int,
                     sched: DiscreteSchedule) -> float:
    """Variational term for one slot at one timestep.

    For t >= 2 this is KL(q(z_{t-1} | z_t, z_0) || p(z_{t-1} | z_t)); at
    t = 1 it is the negative log-likelihood of the true label under the
    predicted z_0 distribution.
    """
    t = sched._check_t(t)
    if not 0 <= z0 < sched.n_classes:
        raise InvalidInput(f"true label {z0} must be a real class (< {sched.n_classes})")
    if t == 1:
        return loss_aux_discrete(z0, logits)
    q = q_posterior_discrete(zt, z0, t, sched)
    p = reverse_discrete(zt, logits, t, sched)
    support = q > 0.0
    with np.errstate(divide="ignore"):
        terms = np.where(support, q * (np.log(np.where(support, q, 1.0)) -
                                       np.log(np.where(support, p, 1.0))), 0.0)
    return float(terms.sum())


def loss_aux_discrete(z0: int, logits: np.ndarray) -> float:
    """Cross-entropy of the true label under the predicted z_0 distribution."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= z0 < logits.shape[-1]:
        raise InvalidInput(f"label {z0} out of range for {logits.shape[-1]} classes")
    return float(-log_softmax(logits)[z0])


def _check_states(z: np.ndarray, n_states: int) -> None:
    if z.size and (int(z.min()) < 0 or int(z.max()) >= n_states):
        raise InvalidInput(f"state indices must lie in [0, {n_states})")
