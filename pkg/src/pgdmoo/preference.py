"""Time-conditioned pairwise preference classifier.

The network reads the concatenation ``(x_t, r_t)`` of two designs noised to
the same timestep and emits one logit for "x is preferred over r". Training
labels come from :func:`pgdmoo.pareto.label_pairs` on clean objectives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn, pareto
from .diffusion import forward_noise
from .errors import ConfigurationError, NonFiniteError
from .metrics import normalize_objectives, reference_point

log = logging.getLogger(__name__)

LOG_PROB = "log"
RAW_PROB = "raw"


@dataclass
class ClassifierConfig:
    epochs: int = 500
    lr: float = 1e-5
    batch_size: int = 256
    emb_dim: int = 128
    wide_units: int = 512
    zero_output: bool = False
    val_pairs: int = 2000


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def bce_with_logits(z, y):
    """Mean binary cross-entropy and its gradient w.r.t. the logits."""
    z = np.asarray(z, dtype=np.float64)
    loss = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    return float(loss.mean()), (sigmoid(z) - y) / z.size


def init_classifier(d, rng, config=None):
    cfg = config or ClassifierConfig()
    return nn.init_mlp(
        2 * d, (2 * d, 2 * d, cfg.wide_units), 1, rng,
        emb_dim=cfg.emb_dim, zero_output=cfg.zero_output,
    )


def logits(model, x, r, t):
    out, _ = nn.forward(model, np.concatenate([np.atleast_2d(x), np.atleast_2d(r)], axis=1), t)
    return out[:, 0]


def preference_score_grad(model, x, r, t, mode=LOG_PROB):
    """Gradient w.r.t. ``x`` of log p(x > r) (``mode="log"``) or p(x > r) (``"raw"``)."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    R = np.broadcast_to(np.atleast_2d(np.asarray(r, dtype=np.float64)), X.shape)
    d = X.shape[1]
    z, cache = nn.forward(model, np.concatenate([X, R], axis=1), t)
    z = z[:, 0]
    if mode == LOG_PROB:
        dz = sigmoid(-z)
    elif mode == RAW_PROB:
        p = sigmoid(z)
        dz = p * (1.0 - p)
    else:
        raise ConfigurationError(f"unknown guidance gradient mode {mode!r}")
    _, gin = nn.backward(model, cache, dz[:, None])
    g = gin[:, :d]
    return g[0] if np.ndim(x) == 1 else g


def _noised_inputs(X, a, b, sched, rng, t=None):
    n = a.size
    if t is None:
        t = rng.integers(1, sched.T + 1, size=n)
    else:
        t = np.full(n, t)
    ea = rng.standard_normal((n, X.shape[1]))
    eb = rng.standard_normal((n, X.shape[1]))
    xa = forward_noise(X[a], t, ea, sched)
    xb = forward_noise(X[b], t, eb, sched)
    return np.concatenate([xa, xb], axis=1), t


def _draw_pairs(pool, n, rng):
    a = pool[rng.integers(0, pool.size, size=n)]
    b = pool[rng.integers(0, pool.size, size=n)]
    return a, b


def strict_dominance_pairs(Y, pool, n, rng):
    """Up to ``n`` pairs from ``pool`` where one point Pareto-dominates the other.

    Returns ``(a, b, label)`` with ``label = 1`` iff ``Y[a]`` dominates ``Y[b]``.
    """
    out_a, out_b, out_y = [], [], []
    have = 0
    for _ in range(50):
        a, b = _draw_pairs(pool, 4 * n, rng)
        le_ab = np.all(Y[a] <= Y[b], axis=1) & np.any(Y[a] < Y[b], axis=1)
        le_ba = np.all(Y[b] <= Y[a], axis=1) & np.any(Y[b] < Y[a], axis=1)
        ok = le_ab | le_ba
        out_a.append(a[ok])
        out_b.append(b[ok])
        out_y.append(le_ab[ok].astype(np.float64))
        have += int(ok.sum())
        if have >= n:
            break
    a = np.concatenate(out_a)[:n]
    b = np.concatenate(out_b)[:n]
    y = np.concatenate(out_y)[:n]
    return a, b, y


def accuracy(model, X, a, b, y, sched, t=1, seed=0):
    rng = np.random.default_rng(seed)
    inp, tt = _noised_inputs(X, a, b, sched, rng, t=t)
    z, _ = nn.forward(model, inp, tt)
    return float(np.mean((z[:, 0] > 0) == (y > 0.5)))


@dataclass
class PreferenceResult:
    model: nn.MlpModel
    history: list[dict]
    best_epoch: int
    criterion: pareto.DiversityCriterion


def training_scores(dataset, criterion):
    """Diversity score per point for ``criterion`` (``None`` for NONE)."""
    criterion = pareto.DiversityCriterion.parse(criterion)
    fronts = dataset.annotate()
    if criterion is pareto.DiversityCriterion.HYPERVOLUME:
        Yn = normalize_objectives(dataset.Y, dataset.y_min, dataset.y_max)
        return pareto.diversity_scores(Yn, fronts, criterion, reference_point(dataset.m))
    return pareto.diversity_scores(dataset.Y, fronts, criterion)


def train_preference(dataset, sched, criterion=pareto.DiversityCriterion.CROWDING, config=None,
                     seed=0, model=None):
    """Train the classifier with Adam on freshly labeled, noised pairs.

    Each epoch draws ``len(train_idx)`` pairs with replacement; skipped pairs are
    dropped. The returned parameters are from the epoch with the lowest
    held-out BCE; ``history`` also logs held-out accuracy on strict-dominance
    pairs at t=1.
    """
    cfg = config or ClassifierConfig()
    criterion = pareto.DiversityCriterion.parse(criterion)
    fronts = dataset.annotate()
    scores = training_scores(dataset, criterion)
    X = dataset.X
    rng = np.random.default_rng(seed)
    if model is None:
        model = init_classifier(dataset.d, rng, cfg)
    opt = nn.adam_state(model.params, cfg.lr)

    train = np.asarray(dataset.train_idx)
    held = np.asarray(dataset.val_idx) if len(dataset.val_idx) >= 2 else train

    # fixed held-out sets
    vrng = np.random.default_rng([int(seed), 1])
    va, vb = _draw_pairs(held, 4 * cfg.val_pairs, vrng)
    vlab = pareto.label_pairs(va, vb, fronts.front, scores)
    keep = vlab != pareto.SKIP
    va, vb, vlab = va[keep][:cfg.val_pairs], vb[keep][:cfg.val_pairs], vlab[keep][:cfg.val_pairs]
    v_inp, v_t = _noised_inputs(X, va, vb, sched, vrng)
    sa, sb, sy = strict_dominance_pairs(dataset.Y, held, cfg.val_pairs, vrng)
    acc_seed = int(vrng.integers(2**63))

    history = []
    best = (np.inf, -1, None)
    for epoch in range(cfg.epochs):
        a, b = _draw_pairs(train, train.size, rng)
        lab = pareto.label_pairs(a, b, fronts.front, scores)
        ok = lab != pareto.SKIP
        a, b, lab = a[ok], b[ok], lab[ok].astype(np.float64)
        if a.size == 0:
            raise ConfigurationError("no labelable preference pairs (all points tied)")
        total = 0.0
        for s in range(0, a.size, cfg.batch_size):
            sl = slice(s, s + cfg.batch_size)
            inp, t = _noised_inputs(X, a[sl], b[sl], sched, rng)
            z, cache = nn.forward(model, inp, t)
            loss, dz = bce_with_logits(z[:, 0], lab[sl])
            if not np.isfinite(loss):
                raise NonFiniteError(f"classifier loss became {loss} at epoch {epoch}")
            grads, _ = nn.backward(model, cache, dz[:, None])
            nn.adam_step(opt, model.params, grads)
            total += loss * lab[sl].size
        train_loss = total / a.size
        if vlab.size:
            vz, _ = nn.forward(model, v_inp, v_t)
            val_loss = bce_with_logits(vz[:, 0], vlab.astype(np.float64))[0]
        else:
            val_loss = train_loss
        acc = accuracy(model, X, sa, sb, sy, sched, t=1, seed=acc_seed) if sa.size else float("nan")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "val_accuracy": acc})
        if val_loss < best[0]:
            best = (val_loss, epoch, {k: v.copy() for k, v in model.params.items()})
        log.debug("classifier epoch %d loss %.4f val %.4f acc %.3f", epoch, train_loss, val_loss, acc)
    if best[2] is not None:
        model.params = best[2]
    return PreferenceResult(model, history, best[1], criterion)
