"""Joint corruption, posterior, and loss for label + geometry diffusion.

Labels and geometry are corrupted independently given the previous state, so
the joint posterior factorizes into the categorical posterior and the
Gaussian posterior, and the variational objective splits into a sum:

    total = L_gauss + L_cat_vb + lambda_aux * L_cat_ce

Reference implementations here are float64 numpy and operate on one scene;
TorchProcess provides the batched differentiable versions used by training,
which are cross-checked against the reference ops in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import categorical as cat
from . import gaussian as gau
from .errors import InvalidInput, TrainingDiverged

DEFAULT_LAMBDA_AUX = 0.05


@dataclass(frozen=True)
class MixedProcess:
    """Paired schedules over a shared timestep range, plus the auxiliary weight."""

    continuous: gau.ContinuousSchedule
    discrete: cat.DiscreteSchedule
    lambda_aux: float = DEFAULT_LAMBDA_AUX

    def __post_init__(self):
        if self.continuous.n_steps != self.discrete.n_steps:
            raise InvalidInput(
                f"schedule lengths differ: continuous {self.continuous.n_steps} "
                f"vs discrete {self.discrete.n_steps}"
            )
        if self.lambda_aux < 0:
            raise InvalidInput("lambda_aux must be non-negative")

    @property
    def n_steps(self) -> int:
        return self.continuous.n_steps


def make_default_process(n_steps: int, n_classes: int,
                         lambda_aux: float = DEFAULT_LAMBDA_AUX) -> MixedProcess:
    return MixedProcess(
        continuous=gau.make_linear_beta(n_steps),
        discrete=cat.make_mask_replace_schedule(n_steps, n_classes),
        lambda_aux=lambda_aux,
    )


@dataclass
class LatentScene:
    """Corrupted scene state at one timestep."""

    z: np.ndarray          # (N,) int64 label states, mask included
    x: np.ndarray          # (N, 8) float64 geometry latents
    t: int


@dataclass
class MixedLossReport:
    """Scalar loss parts; ``total`` is always recombined from the parts."""

    l_ddpm: float
    l_d3pm_vb: float
    l_d3pm_aux: float
    lambda_aux: float
    total: float

    @staticmethod
    def from_parts(l_ddpm: float, l_d3pm_vb: float, l_d3pm_aux: float,
                   lambda_aux: float) -> "MixedLossReport":
        return MixedLossReport(
            l_ddpm=l_ddpm,
            l_d3pm_vb=l_d3pm_vb,
            l_d3pm_aux=l_d3pm_aux,
            lambda_aux=lambda_aux,
            total=l_ddpm + l_d3pm_vb + lambda_aux * l_d3pm_aux,
        )


def corrupt_scene(z0: np.ndarray, x0: np.ndarray, t: int, rng: np.random.Generator,
                  process: MixedProcess) -> tuple[LatentScene, np.ndarray]:
    """Draw (z_t, x_t) from the forward marginals at timestep t.

    Label and geometry corruption consume disjoint draws from ``rng``:
    one uniform per slot for the labels, then one standard-normal (N, 8)
    block for the geometry. Returns the latents and the eps draw.
    """
    z0 = np.asarray(z0, dtype=np.int64)
    x0 = np.asarray(x0, dtype=np.float64)
    if z0.ndim != 1 or x0.shape != (z0.shape[0], 8):
        raise InvalidInput(f"bad scene shapes z0={z0.shape} x0={x0.shape}")
    u = rng.random(z0.shape[0])
    eps = rng.standard_normal(x0.shape)
    zt = np.asarray(cat.q_sample_discrete(z0, t, u, process.discrete), dtype=np.int64)
    xt = gau.q_sample(x0, t, eps, process.continuous)
    return LatentScene(z=zt, x=xt, t=int(t)), eps


def mixed_posterior(z0: np.ndarray, x0: np.ndarray, latent: LatentScene,
                    process: MixedProcess) -> tuple[np.ndarray, np.ndarray, float]:
    """Factorized posterior at latent.t: per-slot categorical (N, S), Gaussian
    mean (N, 8), and the shared scalar Gaussian variance."""
    n = latent.z.shape[0]
    cat_post = np.stack([
        cat.q_posterior_discrete(int(latent.z[i]), int(z0[i]), latent.t, process.discrete)
        for i in range(n)
    ])
    mean, var = gau.q_posterior(x0, latent.x, latent.t, process.continuous)
    return cat_post, mean, var


def mixed_loss(z0: np.ndarray, x0: np.ndarray, latent: LatentScene, eps: np.ndarray,
               logits: np.ndarray, eps_hat: np.ndarray,
               process: MixedProcess) -> MixedLossReport:
    """Reference single-scene loss: parts summed over slots."""
    n = z0.shape[0]
    l_ddpm = gau.loss_simple(eps, eps_hat)
    l_vb = 0.0
    l_aux = 0.0
    for i in range(n):
        l_vb += cat.loss_vb_discrete(int(z0[i]), int(latent.z[i]), logits[i],
                                     latent.t, process.discrete)
        l_aux += cat.loss_aux_discrete(int(z0[i]), logits[i])
    return MixedLossReport.from_parts(l_ddpm, l_vb, l_aux, process.lambda_aux)


def gaussian_kl(mu_p: float, sigma_p: float, mu_q: float, sigma_q: float) -> float:
    """Closed-form KL(N(mu_p, sigma_p^2) || N(mu_q, sigma_q^2))."""
    return float(np.log(sigma_q / sigma_p)
                 + (sigma_p ** 2 + (mu_p - mu_q) ** 2) / (2.0 * sigma_q ** 2) - 0.5)


def categorical_kl(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(np.sum(np.where(mask, p * (np.log(np.where(mask, p, 1.0))
                                            - np.log(np.where(mask, q, 1.0))), 0.0)))


def kl_factorization_check(p_cat: np.ndarray, mu_p: float, sigma_p: float,
                           q_cat: np.ndarray, mu_q: float, sigma_q: float,
                           n_points: int = 10_000) -> tuple[float, float]:
    """KL between two label-x-geometry product distributions, two ways.

    Returns (joint, factored): the joint KL evaluated by brute-force
    midpoint quadrature over the product space, and the sum of the
    categorical KL and the closed-form Gaussian KL. Independence of the two
    components makes these equal; the quadrature never uses that fact.
    """
    p_cat = np.asarray(p_cat, dtype=np.float64)
    q_cat = np.asarray(q_cat, dtype=np.float64)
    if p_cat.shape != q_cat.shape or p_cat.ndim != 1:
        raise InvalidInput("categorical parts must be equal-length vectors")
    lo = min(mu_p - 14.0 * sigma_p, mu_q - 14.0 * sigma_q)
    hi = max(mu_p + 14.0 * sigma_p, mu_q + 14.0 * sigma_q)
    x = np.linspace(lo, hi, n_points + 1)
    mid = 0.5 * (x[1:] + x[:-1])
    dx = x[1] - x[0]

    # Log densities are formed analytically: in far tails the q density
    # underflows to zero, but its log stays finite, keeping p * log(p/q)
    # well defined wherever p has mass.
    log_dens_p = -0.5 * ((mid - mu_p) / sigma_p) ** 2 - np.log(sigma_p * np.sqrt(2.0 * np.pi))
    log_dens_q = -0.5 * ((mid - mu_q) / sigma_q) ** 2 - np.log(sigma_q * np.sqrt(2.0 * np.pi))
    dens_p = np.exp(log_dens_p)
    joint = 0.0
    for z in range(p_cat.shape[0]):
        if p_cat[z] == 0.0:
            continue
        with np.errstate(divide="ignore"):
            log_ratio = (np.log(p_cat[z]) + log_dens_p) - (np.log(q_cat[z]) + log_dens_q)
        joint += float(np.sum(p_cat[z] * dens_p * log_ratio)) * dx
    factored = categorical_kl(p_cat, q_cat) + gaussian_kl(mu_p, sigma_p, mu_q, sigma_q)
    return joint, factored


# ---------------------------------------------------------------------------
# Batched differentiable path
# ---------------------------------------------------------------------------


class TorchProcess:
    """Float64 torch copies of the schedule tables for batched training."""

    def __init__(self, process: MixedProcess):
        self.process = process
        self.lambda_aux = process.lambda_aux
        self.n_steps = process.n_steps
        self.n_classes = process.discrete.n_classes
        self.n_states = process.discrete.n_states
        d, c = process.discrete, process.continuous
        self.Q = torch.from_numpy(d.Q.copy())
        self.Q_bar = torch.from_numpy(d.Q_bar.copy())
        self.alpha_bar = torch.from_numpy(c.alpha_bar.copy())

    def corrupt_batch(self, z0: torch.Tensor, x0: torch.Tensor, t: torch.Tensor,
                      gen: torch.Generator) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Batched forward marginals; one uniform per slot, then one eps block."""
        b, n = z0.shape
        u = torch.rand(b, n, generator=gen, dtype=torch.float64)
        eps = torch.randn(b, n, 8, generator=gen, dtype=torch.float64)
        # q(z_t | z_0): columns of Qbar_t indexed by z0.
        probs = self.Q_bar[t - 1].transpose(1, 2)[
            torch.arange(b)[:, None], z0]                    # (B, N, S)
        cdf = probs.cumsum(dim=-1)
        zt = (u[..., None] > cdf).sum(dim=-1).clamp(max=self.n_states - 1)
        abar = self.alpha_bar[t - 1][:, None, None]
        xt = torch.sqrt(abar) * x0 + torch.sqrt(1.0 - abar) * eps
        return zt, xt, eps

    def loss_terms(self, z0: torch.Tensor, zt: torch.Tensor, eps: torch.Tensor,
                   logits: torch.Tensor, eps_hat: torch.Tensor,
                   t: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Per-scene loss parts, each summed over slots. Shapes (B,)."""
        b, n = z0.shape
        bi = torch.arange(b)[:, None]
        l_ddpm = ((eps - eps_hat) ** 2).sum(dim=(1, 2))

        log_probs0 = torch.log_softmax(logits, dim=-1)
        l_aux = -log_probs0.gather(-1, z0[..., None]).squeeze(-1).sum(dim=1)

        # KL branch, computed for all scenes with t clamped into validity and
        # then replaced by the t = 1 likelihood term where needed.
        t_kl = t.clamp(min=2)
        Qt = self.Q[t_kl - 1]                                  # (B, S, S)
        Qbar_t = self.Q_bar[t_kl - 1]
        Qbar_prev = self.Q_bar[t_kl - 2]
        qt_rows = Qt[bi, zt]                                   # (B, N, S)
        den = Qbar_t[bi, zt, : self.n_classes].clamp(min=1e-300)   # (B, N, K)
        w = torch.softmax(logits, dim=-1) / den
        v = torch.einsum("bsk,bnk->bns", Qbar_prev[:, :, : self.n_classes], w)
        p_unnorm = qt_rows * v
        p = p_unnorm / p_unnorm.sum(dim=-1, keepdim=True)

        q_num = qt_rows * Qbar_prev.transpose(1, 2)[bi, z0]    # (B, N, S)
        q_den = Qbar_t[bi, zt].gather(-1, z0[..., None])       # (B, N, 1)
        q = q_num / q_den.clamp(min=1e-300)
        support = q > 0
        safe_q = torch.where(support, q, torch.ones_like(q))
        safe_p = torch.where(support, p, torch.ones_like(p))
        kl = torch.where(support, q * (safe_q.log() - safe_p.log()),
                         torch.zeros_like(q)).sum(dim=-1)      # (B, N)

        nll = -log_probs0.gather(-1, z0[..., None]).squeeze(-1)
        l_vb = torch.where((t == 1)[:, None], nll, kl).sum(dim=1)
        return l_ddpm, l_vb, l_aux

    def loss_batch(self, z0, zt, eps, logits, eps_hat, t) -> tuple[torch.Tensor, MixedLossReport]:
        """Batch-mean loss tensor plus a float report built from the parts."""
        l_ddpm, l_vb, l_aux = self.loss_terms(z0, zt, eps, logits, eps_hat, t)
        a = l_ddpm.mean()
        b = l_vb.mean()
        c = l_aux.mean()
        total = a + b + self.lambda_aux * c
        report = MixedLossReport.from_parts(a.item(), b.item(), c.item(), self.lambda_aux)
        return total, report


def train_step(model: torch.nn.Module, optimizer: torch.optim.Optimizer,
               tproc: TorchProcess, z0: torch.Tensor, x0: torch.Tensor,
               boundary: torch.Tensor, gen: torch.Generator) -> MixedLossReport:
    """One optimization step on a batch of encoded scenes.

    Draws a timestep per scene, corrupts, predicts, and applies the combined
    objective. Raises TrainingDiverged if the loss is not finite.
    """
    b = z0.shape[0]
    t = torch.randint(1, tproc.n_steps + 1, (b,), generator=gen)
    zt, xt, eps = tproc.corrupt_batch(z0, x0, t, gen)
    logits, eps_hat = model(zt, xt, t, boundary)
    total, report = tproc.loss_batch(z0, zt, eps, logits, eps_hat, t)
    if not np.isfinite(report.total):
        raise TrainingDiverged(f"non-finite loss at step: {report}")
    optimizer.zero_grad(set_to_none=True)
    total.backward()
    optimizer.step()
    return report
