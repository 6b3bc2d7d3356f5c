"""Declarative experiment configuration.

Every numeric default carries an origin: ``paper`` when the value is stated
in the method description, ``decision`` when it was chosen here.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .pareto import DiversityCriterion
from .preference import LOG_PROB, RAW_PROB


@dataclass
class DiffusionSettings:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    epochs: int = 200
    lr: float = 5e-4
    batch_size: int = 256
    weight_decay: float = 0.01
    hidden: tuple = (512, 512)
    emb_dim: int = 128


@dataclass
class ClassifierSettings:
    epochs: int = 500
    lr: float = 1e-5
    batch_size: int = 256
    criterion: str = "Crowding"
    prune_fraction: float = 0.3
    gradient_mode: str = LOG_PROB
    wide_units: int = 512
    val_pairs: int = 2000


@dataclass
class GuidanceSettings:
    w: float = 10.0
    n: int = 256
    max_grad_norm: float | None = None


@dataclass
class ExperimentConfig:
    problem: str = "zdt2"
    N: int = 5000
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "runs"
    diffusion: DiffusionSettings = field(default_factory=DiffusionSettings)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    guidance: GuidanceSettings = field(default_factory=GuidanceSettings)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.diffusion.hidden = tuple(int(h) for h in self.diffusion.hidden)
        self.validate()

    def validate(self):
        if self.N < 100:
            raise ConfigurationError(f"N must be >= 100, got {self.N}")
        if not self.seeds:
            raise ConfigurationError("need at least one seed")
        if not 0.0 < self.classifier.prune_fraction <= 1.0:
            raise ConfigurationError(f"prune_fraction must be in (0, 1], got {self.classifier.prune_fraction}")
        if self.classifier.gradient_mode not in (LOG_PROB, RAW_PROB):
            raise ConfigurationError(f"gradient_mode must be 'log' or 'raw', got {self.classifier.gradient_mode!r}")
        try:
            DiversityCriterion.parse(self.classifier.criterion)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if self.guidance.w < 0 or self.guidance.n < 1:
            raise ConfigurationError("guidance needs w >= 0 and n >= 1")
        for name in ("epochs", "batch_size"):
            for sec in (self.diffusion, self.classifier):
                if getattr(sec, name) < 1:
                    raise ConfigurationError(f"{name} must be positive")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        d["diffusion"]["hidden"] = list(self.diffusion.hidden)
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        sections = {"diffusion": DiffusionSettings, "classifier": ClassifierSettings, "guidance": GuidanceSettings}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for key, value in data.items():
            if key in sections:
                sec = sections[key]
                names = {f.name for f in dataclasses.fields(sec)}
                bad = set(value) - names
                if bad:
                    raise ConfigurationError(f"unknown keys in {key}: {sorted(bad)}")
                kw[key] = sec(**value)
            else:
                kw[key] = value
        return cls(**kw)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def save(self, path):
        Path(path).write_text(self.to_json())

    def with_overrides(self, overrides):
        """Copy with dotted-key overrides, e.g. ``{"guidance.w": 5}``."""
        d = self.to_dict()
        for key, value in overrides.items():
            node = d
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigurationError(f"unknown config key {key!r}")
            node[leaf] = value
        return ExperimentConfig.from_dict(d)

    # hashes of the inputs each stage depends on; a checkpoint records the hash
    # it was trained under and sampling refuses to mix stages that disagree
    def denoiser_hash(self):
        return _digest({"problem": self.problem, "N": self.N, "diffusion": self.to_dict()["diffusion"]})

    def classifier_hash(self):
        d = self.to_dict()
        sched = {k: d["diffusion"][k] for k in ("T", "beta_start", "beta_end")}
        d["classifier"].pop("gradient_mode")  # only used at sampling time
        return _digest({"problem": self.problem, "N": self.N, "schedule": sched, "classifier": d["classifier"]})

    def config_hash(self):
        return _digest(self.to_dict())


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


# where each default comes from
ORIGINS = {
    "problem": "decision",
    "N": "decision",
    "seeds": "paper",
    "output_dir": "decision",
    "diffusion.T": "decision",
    "diffusion.beta_start": "paper",
    "diffusion.beta_end": "paper",
    "diffusion.epochs": "paper",
    "diffusion.lr": "paper",
    "diffusion.batch_size": "decision",
    "diffusion.weight_decay": "decision",
    "diffusion.hidden": "paper",
    "diffusion.emb_dim": "decision",
    "classifier.epochs": "paper",
    "classifier.lr": "paper",
    "classifier.batch_size": "decision",
    "classifier.criterion": "paper",
    "classifier.prune_fraction": "paper",
    "classifier.gradient_mode": "decision",
    "classifier.wide_units": "paper",
    "classifier.val_pairs": "decision",
    "guidance.w": "paper",
    "guidance.n": "paper",
    "guidance.max_grad_norm": "decision",
}

FAST_T = 200


def flat_keys(cfg_dict, prefix=""):
    for k, v in cfg_dict.items():
        if isinstance(v, dict):
            yield from flat_keys(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}"
