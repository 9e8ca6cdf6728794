from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .tree import Kind


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run.

    ``colsample`` is the per-tree column fraction for boosting and the
    per-split fraction for forests. ``min_child_weight`` is the minimum
    hessian sum per boosted leaf. ``tree_method`` selects histogram
    (``"hist"``) or exact sorted-value split search for boosting.
    """

    model_kind: str = Kind.GBDT
    n_estimators: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    colsample: float = 1.0
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    min_samples_leaf: int = 1
    min_child_weight: float = 1e-3
    n_bins: int = 255
    tree_method: str = "hist"
    seed: int = 0

    def __post_init__(self):
        if self.model_kind not in Kind.ALL:
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.n_estimators < 0:
            raise ConfigError("n_estimators must be >= 0")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 < self.colsample <= 1:
            raise ConfigError("colsample must lie in (0, 1]")
        if self.reg_alpha < 0 or self.reg_lambda < 0:
            raise ConfigError("regularization terms must be >= 0")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.min_child_weight < 0:
            raise ConfigError("min_child_weight must be >= 0")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be >= 2")
        if self.tree_method not in ("hist", "exact"):
            raise ConfigError(f"unknown tree_method {self.tree_method!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)
