"""Preference-guided reverse diffusion.

Each chain starts from N(0, I) and, for t = T..1, moves to
``mu(x_t) + w * beta_t * grad_x score(x_t > r)`` plus N(0, beta_t I) noise
(no noise at t = 1), after which its comparison reference ``r`` becomes the
pre-step state ``x_t``. The first reference is the dataset's best design.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffusion import chain_rngs, reverse_mean
from .errors import NonFiniteError
from .preference import LOG_PROB, preference_score_grad

log = logging.getLogger(__name__)

ABORT_FRACTION = 0.01


@dataclass
class GuidanceConfig:
    w: float = 10.0
    mode: str = LOG_PROB
    n: int = 256
    seed: int = 0
    max_grad_norm: float | None = None
    chunk_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.w < 0:
            raise ValueError(f"guidance weight must be >= 0, got {self.w}")
        if self.n < 1:
            raise ValueError(f"need at least one chain, got n={self.n}")


@dataclass
class SampleResult:
    designs: np.ndarray  # (n_ok, d), normalized, clamped
    chain_ids: np.ndarray
    aborted: np.ndarray  # chain ids that went non-finite
    max_shift: float
    trajectory: list[tuple[int, np.ndarray]] = field(default_factory=list)


def select_reference(dataset):
    """Best design (normalized): front 0, max crowding distance, lowest index."""
    if dataset.N == 0:
        raise ValueError("empty dataset")
    fr = dataset.annotate()
    cand = np.flatnonzero(fr.front == 0)
    cd = fr.crowding[cand]
    best = cand[np.flatnonzero(cd == cd.max())[0]]
    return dataset.X[best].copy()


def _run_block(denoiser, sched, chain_ids, seed, classifier, w, mode, reference,
               max_grad_norm, record_every):
    rngs = chain_rngs(seed, chain_ids)
    n = len(chain_ids)
    d = denoiser.in_dim
    x = np.stack([g.standard_normal(d) for g in rngs])
    guided = classifier is not None
    if guided:
        r = np.broadcast_to(np.asarray(reference, dtype=np.float64), (n, d)).copy()
    dead = np.zeros(n, dtype=bool)
    max_shift = 0.0
    traj = []
    T = sched.T
    for t in range(T, 0, -1):
        beta = sched.betas[t - 1]
        mean = reverse_mean(denoiser, x, t, sched)
        if guided:
            s = preference_score_grad(classifier, x, r, t, mode=mode)
            if max_grad_norm is not None:
                norms = np.linalg.norm(s, axis=1, keepdims=True)
                s = s * np.minimum(1.0, max_grad_norm / np.maximum(norms, 1e-300))
            shift = w * beta * s
            with np.errstate(invalid="ignore"):
                sn = np.linalg.norm(shift, axis=1)
            if np.any(np.isfinite(sn)):
                max_shift = max(max_shift, float(np.nanmax(np.where(np.isfinite(sn), sn, np.nan))))
            mean = mean + shift
            r = x
        if t > 1:
            z = np.stack([g.standard_normal(d) for g in rngs])
            x_next = mean + np.sqrt(beta) * z
        else:
            x_next = mean
        bad = ~np.all(np.isfinite(x_next), axis=1)
        if np.any(bad & ~dead):
            log.warning("chains %s went non-finite at t=%d", np.asarray(chain_ids)[bad & ~dead].tolist(), t)
        dead |= bad
        x = x_next
        if record_every and (t - 1) % record_every == 0:
            traj.append((t - 1, np.clip(x, -1.0, 1.0)))
    return x, dead, max_shift, traj


def run_chains(denoiser, sched, n, seed, classifier=None, w=0.0, mode=LOG_PROB, reference=None,
               clamp=True, max_grad_norm=None, record_every=None, chain_ids=None,
               chunk_size=None, workers=1):
    """Run ``n`` chains (or the given ``chain_ids``); see module docstring.

    Chain ``c`` draws all of its noise from a generator seeded with
    ``(seed, c)``, so results do not depend on chunking or thread count.
    """
    ids = np.arange(n) if chain_ids is None else np.asarray(chain_ids)
    if classifier is not None and reference is None:
        raise ValueError("guided sampling needs a reference design")
    chunk = chunk_size or ids.size
    blocks = [ids[i:i + chunk] for i in range(0, ids.size, chunk)]

    def job(block):
        return _run_block(denoiser, sched, block, seed, classifier, w, mode, reference,
                          max_grad_norm, record_every)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]

    x = np.concatenate([p[0] for p in parts])
    dead = np.concatenate([p[1] for p in parts])
    max_shift = max(p[2] for p in parts)
    traj = []
    if record_every:
        for k in range(len(parts[0][3])):
            step = parts[0][3][k][0]
            traj.append((step, np.concatenate([p[3][k][1] for p in parts])[~dead]))
    if dead.mean() > ABORT_FRACTION:
        raise NonFiniteError(f"{int(dead.sum())} of {dead.size} chains went non-finite")
    x = x[~dead]
    if clamp:
        x = np.clip(x, -1.0, 1.0)
    return SampleResult(x, ids[~dead], ids[dead], max_shift, traj)


def guided_sample(denoiser, classifier, sched, dataset, cfg=None, reference=None, record_every=None):
    """Candidate designs (normalized, clamped to [-1, 1]^d) from guided sampling."""
    cfg = cfg or GuidanceConfig()
    if reference is None:
        reference = select_reference(dataset)
    return run_chains(
        denoiser, sched, cfg.n, cfg.seed, classifier=classifier, w=cfg.w, mode=cfg.mode,
        reference=reference, max_grad_norm=cfg.max_grad_norm, record_every=record_every,
        chunk_size=cfg.chunk_size, workers=cfg.workers,
    )


def sample_trajectory_probe(denoiser, classifier, sched, dataset, cfg=None, every=None):
    """Guided sampling that also records every ``every``-th state x_s (s % every == 0).

    Returns ``(result, rows)``; each row is ``(step, chain, x_raw, y)`` with
    designs de-normalized and scored by the dataset's analytic problem.
    """
    cfg = cfg or GuidanceConfig()
    every = every or sched.T
    res = guided_sample(denoiser, classifier, sched, dataset, cfg, record_every=every)
    problem = dataset.problem()
    rows = []
    for step, states in res.trajectory:
        raw = dataset.denormalize(states)
        Y = problem.evaluate(raw)
        for c, xr, y in zip(res.chain_ids, raw, Y):
            rows.append((step, int(c), xr, y))
    return res, rows
