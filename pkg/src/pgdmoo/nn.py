"""Dense MLP with layer norm and sinusoidal time conditioning, hand-written
forward/backward, and Adam/AdamW.

Hidden layer k computes ``LN(relu(W_k a + b_k [+ Wt emb(t) if k == 0]))``;
the output layer is affine. Everything is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NonFiniteError, ShapeError

FORMAT_VERSION = 1
LN_EPS = 1e-5
EMB_BASE = 10000.0


def time_embed(t, dim):
    """Sinusoidal embedding, interleaved: [sin(t w_0), cos(t w_0), sin(t w_1), ...].

    ``t`` may be a scalar or a 1-D array; the result has shape ``(dim,)`` or
    ``(len(t), dim)`` respectively.
    """
    if dim <= 0 or dim % 2:
        raise ConfigurationError(f"time embedding dimension must be even and positive, got {dim}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ConfigurationError("timestep must be non-negative")
    freqs = EMB_BASE ** (-np.arange(0, dim, 2, dtype=np.float64) / dim)
    angles = t_arr[..., None] * freqs
    out = np.empty(angles.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


@dataclass
class MlpModel:
    """Parameter container. ``params`` maps names to arrays:
    ``W{k}``/``b{k}`` for every layer (k = len(hidden) is the output layer),
    ``g{k}``/``s{k}`` for normalized hidden layers, ``Wt`` for the time projection.
    """

    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    emb_dim: int = 128
    layer_norm: tuple[bool, ...] = ()
    activations: tuple[str, ...] = ()
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.layer_norm:
            self.layer_norm = (True,) * len(self.hidden)
        if not self.activations:
            self.activations = ("relu",) * len(self.hidden)
        self.layer_norm = tuple(bool(x) for x in self.layer_norm)
        self.activations = tuple(self.activations)
        if len(self.layer_norm) != len(self.hidden) or len(self.activations) != len(self.hidden):
            raise ConfigurationError("one norm flag and one activation per hidden layer")
        if self.emb_dim and self.emb_dim % 2:
            raise ConfigurationError(f"time embedding dimension must be even, got {self.emb_dim}")
        if self.emb_dim and not self.hidden:
            raise ConfigurationError("time conditioning needs at least one hidden layer")
        for a in self.activations:
            if a not in ("relu", "identity"):
                raise ConfigurationError(f"unknown activation {a!r}")

    @property
    def n_layers(self):
        return len(self.hidden) + 1

    @property
    def widths(self):
        return (self.in_dim, *self.hidden, self.out_dim)

    def architecture(self):
        return {
            "in_dim": self.in_dim,
            "hidden": list(self.hidden),
            "out_dim": self.out_dim,
            "emb_dim": self.emb_dim,
            "layer_norm": list(self.layer_norm),
            "activations": list(self.activations),
        }

    def param_shapes(self):
        shapes = {}
        w = self.widths
        for k in range(self.n_layers):
            shapes[f"W{k}"] = (w[k + 1], w[k])
            shapes[f"b{k}"] = (w[k + 1],)
            if k < len(self.hidden) and self.layer_norm[k]:
                shapes[f"g{k}"] = (w[k + 1],)
                shapes[f"s{k}"] = (w[k + 1],)
        if self.emb_dim:
            shapes["Wt"] = (self.hidden[0], self.emb_dim)
        return shapes

    def validate(self):
        expected = self.param_shapes()
        if set(expected) != set(self.params):
            raise ShapeError(f"parameter names {sorted(self.params)} != {sorted(expected)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError(f"{name}: shape {self.params[name].shape}, expected {shape}")

    def copy(self):
        return MlpModel(
            self.in_dim, self.hidden, self.out_dim, self.emb_dim, self.layer_norm,
            self.activations, {k: v.copy() for k, v in self.params.items()},
        )

    def n_params(self):
        return sum(p.size for p in self.params.values())


def init_mlp(in_dim, hidden, out_dim, rng, emb_dim=128, layer_norm=True, zero_output=False):
    """He-uniform for ReLU layers, LeCun-uniform output layer (or zeros), LN gain 1 / shift 0."""
    hidden = tuple(hidden)
    model = MlpModel(
        in_dim, hidden, out_dim, emb_dim,
        layer_norm=(layer_norm,) * len(hidden) if isinstance(layer_norm, bool) else tuple(layer_norm),
    )
    w = model.widths
    params = {}
    for k in range(model.n_layers):
        fan_in = w[k]
        if k == len(hidden):
            if zero_output:
                params[f"W{k}"] = np.zeros((w[k + 1], fan_in))
            else:
                lim = np.sqrt(3.0 / fan_in)
                params[f"W{k}"] = rng.uniform(-lim, lim, size=(w[k + 1], fan_in))
        else:
            lim = np.sqrt(6.0 / fan_in)
            params[f"W{k}"] = rng.uniform(-lim, lim, size=(w[k + 1], fan_in))
        params[f"b{k}"] = np.zeros(w[k + 1])
        if k < len(hidden) and model.layer_norm[k]:
            params[f"g{k}"] = np.ones(w[k + 1])
            params[f"s{k}"] = np.zeros(w[k + 1])
    if emb_dim:
        lim = np.sqrt(6.0 / emb_dim)
        params["Wt"] = rng.uniform(-lim, lim, size=(hidden[0], emb_dim))
    model.params = params
    return model


def _as_batch(x, t, model):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ShapeError(f"input shape {np.shape(x)} does not match in_dim={model.in_dim}")
    T = np.broadcast_to(np.asarray(t, dtype=np.float64), (X.shape[0],))
    return X, T, single


def forward(model, x, t):
    """Evaluate the network. Returns ``(output, cache)``; the cache feeds :func:`backward`."""
    P = model.params
    X, T, single = _as_batch(x, t, model)
    cache = {"single": single, "x": X, "layers": []}
    a = X
    if model.emb_dim:
        emb = time_embed(T, model.emb_dim)
        cache["emb"] = emb
    for k in range(len(model.hidden)):
        z = a @ P[f"W{k}"].T + P[f"b{k}"]
        if k == 0 and model.emb_dim:
            z = z + emb @ P["Wt"].T
        layer = {"in": a}
        if model.activations[k] == "relu":
            layer["mask"] = z > 0
            h = np.maximum(z, 0.0)  # propagates NaN, unlike a masked select
        else:
            h = z
        if model.layer_norm[k]:
            mu = h.mean(axis=1, keepdims=True)
            var = ((h - mu) ** 2).mean(axis=1, keepdims=True)
            inv = 1.0 / np.sqrt(var + LN_EPS)
            xhat = (h - mu) * inv
            layer["xhat"] = xhat
            layer["inv"] = inv
            a = xhat * P[f"g{k}"] + P[f"s{k}"]
        else:
            a = h
        cache["layers"].append(layer)
    L = len(model.hidden)
    cache["last_in"] = a
    out = a @ P[f"W{L}"].T + P[f"b{L}"]
    return (out[0] if single else out), cache


def backward(model, cache, output_grad):
    """Reverse-mode pass through :func:`forward`.

    Returns ``(grads, input_grad)`` where ``grads`` has one entry per parameter.
    """
    P = model.params
    G = np.asarray(output_grad, dtype=np.float64)
    if cache["single"]:
        G = G[None, :] if G.ndim == 1 else G
    if G.shape != (cache["x"].shape[0], model.out_dim):
        raise ShapeError(f"output_grad shape {G.shape} does not match the forward batch")
    grads = {}
    L = len(model.hidden)
    grads[f"W{L}"] = G.T @ cache["last_in"]
    grads[f"b{L}"] = G.sum(axis=0)
    da = G @ P[f"W{L}"]
    for k in reversed(range(L)):
        layer = cache["layers"][k]
        if model.layer_norm[k]:
            xhat = layer["xhat"]
            grads[f"g{k}"] = (da * xhat).sum(axis=0)
            grads[f"s{k}"] = da.sum(axis=0)
            dxhat = da * P[f"g{k}"]
            dh = layer["inv"] * (
                dxhat - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            )
        else:
            dh = da
        dz = dh * layer["mask"] if "mask" in layer else dh
        grads[f"W{k}"] = dz.T @ layer["in"]
        grads[f"b{k}"] = dz.sum(axis=0)
        if k == 0 and model.emb_dim:
            grads["Wt"] = dz.T @ cache["emb"]
        da = dz @ P[f"W{k}"]
    if cache["single"]:
        da = da[0]
    return grads, da


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_state(params, lr, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
    return OptimizerState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adamw_state(params, lr, weight_decay=0.01, **kw):
    return adam_state(params, lr, weight_decay=weight_decay, **kw)


def adam_step(state, params, grads):
    """One bias-corrected Adam update, in place. ``weight_decay > 0`` gives
    AdamW: params are first scaled by ``1 - lr * weight_decay``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name!r} at step {state.step + 1}")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient {name}: {g.shape} vs parameter {params[name].shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if state.weight_decay:
            p *= 1.0 - state.lr * state.weight_decay
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def save_checkpoint(path, model, meta=None):
    """Write an ``.npz`` holding every parameter array plus a JSON header."""
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": model.architecture(),
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "meta": meta or {},
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(model, meta)``."""
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        if header.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"{path}: checkpoint format {header.get('format_version')} != {FORMAT_VERSION}"
            )
        params = {k[len("param/"):]: z[k].copy() for k in z.files if k.startswith("param/")}
    arch = header["architecture"]
    model = MlpModel(
        arch["in_dim"], tuple(arch["hidden"]), arch["out_dim"], arch["emb_dim"],
        tuple(arch["layer_norm"]), tuple(arch["activations"]), params,
    )
    for k, shape in header["shapes"].items():
        if list(params[k].shape) != shape:
            raise ShapeError(f"{path}: {k} stored with shape {params[k].shape}, header says {shape}")
    model.validate()
    return model, header["meta"]
