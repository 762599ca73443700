"""Configuration for the neural jump SDE engine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

from ..errors import BadSpec
from ..jump_relax import RelaxConfig
from ..tensor_net.optim import AdamConfig


def inv_softplus(y: float) -> float:
    return math.log(math.expm1(y))


def _default_head_bias() -> dict:
    # initial coefficients: 20% vol, 0.1/yr intensity, small jumps, rho = -0.5
    return {
        "drift_s": 0.0,
        "diffusion_s": inv_softplus(0.2),
        "jump_s": inv_softplus(0.02),
        "drift_v": 0.0,
        "diffusion_v": inv_softplus(0.06),
        "jump_v": inv_softplus(0.01),
        "intensity": inv_softplus(0.1),
        "correlation": math.atanh(-0.5),
    }


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple[int, ...] = (32, 32)
    hidden_activation: str = "tanh"
    time_feature: str = "remaining"   # remaining | elapsed
    variance_feature: bool = False    # append max(V, 0) to the four inputs
    jumps: bool = True                # False: jump branch skipped entirely (NSDE)
    head_activations: dict = field(default_factory=dict)
    head_bias: dict = field(default_factory=_default_head_bias)
    output_weight_scale: float = 0.1

    def __post_init__(self):
        if self.time_feature not in ("remaining", "elapsed"):
            raise BadSpec(f"time_feature must be 'remaining' or 'elapsed', got {self.time_feature!r}")
        if not self.hidden or any(int(h) != h or h < 1 for h in self.hidden):
            raise BadSpec(f"hidden sizes must be positive integers, got {self.hidden!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def n_features(self) -> int:
        return 5 if self.variance_feature else 4


@dataclass(frozen=True)
class TrainConfig:
    paths: int = 1000          # M
    steps: int = 50            # m
    epochs: int = 2000         # D
    seed: int = 0              # noise bank
    v0: float = 0.04
    adam: AdamConfig = field(default_factory=AdamConfig)
    relax: RelaxConfig = field(default_factory=RelaxConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        for name in ("paths", "steps"):
            if getattr(self, name) < 1:
                raise BadSpec(f"{name} must be >= 1")
        if self.epochs < 0:
            raise BadSpec("epochs must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"]["hidden"] = list(self.model.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise BadSpec(f"unknown train config fields: {sorted(unknown)}")
        adam = AdamConfig(**d.pop("adam", {}))
        relax = RelaxConfig(**d.pop("relax", {}))
        model_d = dict(d.pop("model", {}))
        if "hidden" in model_d:
            model_d["hidden"] = tuple(model_d["hidden"])
        if "head_bias" in model_d:
            merged = _default_head_bias()
            merged.update(model_d["head_bias"])
            model_d["head_bias"] = merged
        model = ModelConfig(**model_d)
        return cls(adam=adam, relax=relax, model=model, **d)
