"""DDPM pieces: linear beta schedule, closed-form noising, epsilon-prediction
training and the reverse-step mean. Timesteps are 1-based throughout."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigurationError, NonFiniteError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def T(self):
        return int(self.betas.shape[0])

    def beta(self, t):
        return self.betas[np.asarray(t) - 1]

    def alpha(self, t):
        return self.alphas[np.asarray(t) - 1]

    def alpha_bar(self, t):
        return self.alpha_bars[np.asarray(t) - 1]

    def check_t(self, t):
        t_arr = np.asarray(t)
        if np.any(t_arr < 1) or np.any(t_arr > self.T):
            raise IndexError(f"timestep outside [1, {self.T}]: {t}")


def linear_schedule(T=1000, beta_start=1e-4, beta_end=0.02):
    if T < 2:
        raise ConfigurationError(f"need at least 2 timesteps, got T={T}")
    if not 0.0 < beta_start < beta_end < 1.0:
        raise ConfigurationError(f"need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}")
    t = np.arange(T, dtype=np.float64)
    betas = beta_start + t / (T - 1) * (beta_end - beta_start)
    betas[-1] = beta_end
    alphas = 1.0 - betas
    return DiffusionSchedule(betas, alphas, np.cumprod(alphas))


def forward_noise(x0, t, eps, sched):
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. ``t`` may be per-row."""
    sched.check_t(t)
    ab = sched.alpha_bar(t)
    x0 = np.asarray(x0, dtype=np.float64)
    if np.ndim(ab) == 1 and x0.ndim == 2:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * np.asarray(eps, dtype=np.float64)


def reverse_mean(model, x_t, t, sched, eps_hat=None):
    """mu = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_theta(x_t, t)) / sqrt(alpha_t)."""
    sched.check_t(t)
    if eps_hat is None:
        eps_hat, _ = nn.forward(model, x_t, t)
    a = sched.alpha(t)
    ab = sched.alpha_bar(t)
    return (np.asarray(x_t) - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)


@dataclass
class DenoiserConfig:
    hidden: tuple[int, ...] = (512, 512)
    emb_dim: int = 128
    epochs: int = 200
    lr: float = 5e-4
    weight_decay: float = 0.01
    batch_size: int = 256
    zero_output: bool = False


def denoising_loss(model, x_t, t, eps):
    """Mean over rows of ||eps - eps_theta(x_t, t)||^2 for given noised inputs."""
    return _loss_and_grad(model, None, t, eps, need_grad=False, x_t=x_t)[0]


def _loss_and_grad(model, x0, t, eps, sched=None, need_grad=True, x_t=None):
    if x_t is None:
        x_t = forward_noise(x0, t, eps, sched)
    pred, cache = nn.forward(model, x_t, t)
    diff = pred - eps
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    if not need_grad:
        return loss, None
    grads, _ = nn.backward(model, cache, 2.0 * diff / diff.shape[0])
    return loss, grads


def _eval_loss(model, X, sched, rng_seed):
    # fixed (t, eps) per row so validation loss is comparable across epochs
    rng = np.random.default_rng(rng_seed)
    t = rng.integers(1, sched.T + 1, size=X.shape[0])
    eps = rng.standard_normal(X.shape)
    x_t = forward_noise(X, t, eps, sched)
    pred, _ = nn.forward(model, x_t, t)
    return float(np.mean(np.sum((pred - eps) ** 2, axis=1)))


@dataclass
class TrainResult:
    model: nn.MlpModel
    history: list[dict]
    best_epoch: int


def train_denoiser(X, sched, config=None, seed=0, train_idx=None, val_idx=None, model=None):
    """Fit eps_theta on normalized designs ``X`` with AdamW.

    Runs the full epoch budget and returns the parameters from the epoch with
    the lowest validation loss (training loss if there is no validation split).
    """
    cfg = config or DenoiserConfig()
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    train_idx = np.arange(n) if train_idx is None else np.asarray(train_idx)
    val_idx = np.asarray([], dtype=int) if val_idx is None else np.asarray(val_idx)
    rng = np.random.default_rng(seed)
    if model is None:
        model = nn.init_mlp(d, cfg.hidden, d, rng, emb_dim=cfg.emb_dim, zero_output=cfg.zero_output)
    opt = nn.adamw_state(model.params, cfg.lr, weight_decay=cfg.weight_decay)
    history = []
    best = (np.inf, -1, None)
    val_seed = int(rng.integers(2**63))
    for epoch in range(cfg.epochs):
        perm = rng.permutation(train_idx)
        total, count = 0.0, 0
        for s in range(0, perm.size, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            x0 = X[idx]
            t = rng.integers(1, sched.T + 1, size=idx.size)
            eps = rng.standard_normal(x0.shape)
            loss, grads = _loss_and_grad(model, x0, t, eps, sched)
            if not np.isfinite(loss):
                raise NonFiniteError(f"denoiser loss became {loss} at epoch {epoch}")
            nn.adam_step(opt, model.params, grads)
            total += loss * idx.size
            count += idx.size
        train_loss = total / max(count, 1)
        val_loss = _eval_loss(model, X[val_idx], sched, val_seed) if val_idx.size else train_loss
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best[0]:
            best = (val_loss, epoch, {k: v.copy() for k, v in model.params.items()})
        log.debug("denoiser epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
    if best[2] is not None:
        model.params = best[2]
    return TrainResult(model, history, best[1])


def chain_rngs(seed, chain_ids):
    """One independent generator per chain, keyed by (seed, chain index)."""
    return [np.random.default_rng([int(seed), int(c)]) for c in chain_ids]


def unconditional_sample(model, sched, n, seed=0, clamp=True):
    """Plain ancestral sampling; equivalent to guided sampling with w = 0."""
    from .sampler import run_chains

    return run_chains(model, sched, n, seed, classifier=None, clamp=clamp).designs
