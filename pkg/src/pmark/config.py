"""Shared run configuration.

One JSON schema serves generation, detection, and simulation:

    {
      "dim": 64, "T": 12, "N": 64, "b": 4,
      "mode": "online" | "offline" | "both",
      "attack": null | {"kind": "paraphrase-rotation"|"jitter"|"none",
                         "d": 0.02, "prob": 1.0} | [ ... ],
      "trials": 500, "seed": 0,
      "alpha": 0.01, "delta": 0.001, "K": 150.0,
      "corpus": {"kind": "sphere"},
      "fpr_levels": [0.01, 0.05],
      "endpoint": { ... see EndpointConfig ... }
    }

Commands ignore the keys they have no use for (e.g. ``generate`` ignores
``trials``); unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pmark.errors import ConfigError
from pmark.endpoint import EndpointConfig

MODES = ("online", "offline")
ATTACK_KINDS = ("none", "paraphrase-rotation", "jitter")


@dataclass(frozen=True)
class AttackSpec:
    """A bounded semantic perturbation of sentence embeddings."""

    kind: str = "none"
    d: float = 0.0
    prob: float = 1.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.prob <= 1.0:
            raise ConfigError(f"attack prob must be in [0, 1], got {self.prob}")

    @property
    def label(self) -> str:
        if self.kind == "none" or self.d == 0.0:
            return "none"
        suffix = "" if self.prob == 1.0 else f",p={self.prob:g}"
        return f"{self.kind}(d={self.d:g}{suffix})"

    @classmethod
    def from_dict(cls, raw: Optional[dict]) -> "AttackSpec":
        if raw is None:
            return cls()
        unknown = set(raw) - {"kind", "d", "prob"}
        if unknown:
            raise ConfigError(f"unknown attack keys: {sorted(unknown)}")
        return cls(
            kind=raw.get("kind", "none"),
            d=float(raw.get("d", 0.0)),
            prob=float(raw.get("prob", 1.0)),
        )


@dataclass
class RunConfig:
    dim: int = 64
    T: int = 12
    N: int = 64
    b: int = 4
    mode: str = "both"
    attacks: List[AttackSpec] = field(default_factory=lambda: [AttackSpec()])
    trials: int = 100
    seed: int = 0
    alpha: float = 0.01
    delta: float = 0.001
    K: float = 150.0
    corpus: Dict[str, Any] = field(default_factory=lambda: {"kind": "sphere"})
    fpr_levels: List[float] = field(default_factory=lambda: [0.01, 0.05])
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)

    def __post_init__(self):
        if self.mode not in (*MODES, "both"):
            raise ConfigError(f"mode must be online, offline or both, got {self.mode!r}")
        if self.dim < 2 or self.T < 0 or self.N < 1 or not 1 <= self.b <= self.dim:
            raise ConfigError("dim/T/N/b out of range")
        if self.trials < 0:
            raise ConfigError(f"trials must be >= 0, got {self.trials}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.delta < 0.0 or self.K <= 0.0:
            raise ConfigError("need delta >= 0 and K > 0")

    @property
    def modes(self) -> List[str]:
        return list(MODES) if self.mode == "both" else [self.mode]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "T": self.T,
            "N": self.N,
            "b": self.b,
            "mode": self.mode,
            "attack": [
                {"kind": a.kind, "d": a.d, "prob": a.prob} for a in self.attacks
            ],
            "trials": self.trials,
            "seed": self.seed,
            "alpha": self.alpha,
            "delta": self.delta,
            "K": self.K,
            "corpus": self.corpus,
            "fpr_levels": self.fpr_levels,
        }


_TOP_KEYS = {
    "dim", "T", "N", "b", "mode", "attack", "trials", "seed",
    "alpha", "delta", "K", "corpus", "fpr_levels", "endpoint",
}


def config_from_dict(raw: dict) -> RunConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    attack_raw = raw.get("attack")
    if isinstance(attack_raw, list):
        attacks = [AttackSpec.from_dict(a) for a in attack_raw]
    else:
        attacks = [AttackSpec.from_dict(attack_raw)]
    kwargs: Dict[str, Any] = {
        key: raw[key]
        for key in ("dim", "T", "N", "b", "mode", "trials", "seed", "alpha", "delta", "K", "corpus")
        if key in raw
    }
    if "fpr_levels" in raw:
        kwargs["fpr_levels"] = [float(level) for level in raw["fpr_levels"]]
    if "endpoint" in raw:
        kwargs["endpoint"] = EndpointConfig.from_dict(raw["endpoint"])
    try:
        return RunConfig(attacks=attacks, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path, None]) -> RunConfig:
    """RunConfig from a JSON file; defaults when ``path`` is None."""
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a JSON object: {path}")
    return config_from_dict(raw)
