"""Pipeline configuration, loadable from a JSON document."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fsgm.errors import ValidationError
from fsgm.funcrep import DEFAULT_RELATIVE_GRID, DEFAULT_RIDGE_GRID
from fsgm.kernels import KernelFamily, KernelSpec

DEFAULT_RHO_GRID = tuple(k * 1e-2 for k in range(1, 8))


def _grid(values, name):
    values = tuple(float(v) for v in values)
    if not values:
        raise ValidationError(f"{name} must be nonempty")
    if any(not v > 0 for v in values):
        raise ValidationError(f"{name} values must be positive")
    return values


def _positive_or_none(value, name):
    if value is None:
        return None
    value = float(value)
    if not value > 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return value


def parse_pair(key) -> tuple[int, int]:
    """``"1,3"``, ``"1-3"``, ``(1, 3)`` -> ``(1, 3)`` (1-based, sorted)."""
    if isinstance(key, str):
        parts = key.replace("-", ",").replace("(", "").replace(")", "").split(",")
        key = tuple(int(x) for x in parts if x.strip())
    i, j = sorted(int(x) for x in key)
    if i < 1 or i == j:
        raise ValidationError(f"invalid node pair {key!r}")
    return i, j


@dataclass(frozen=True)
class PipelineConfig:
    """Everything :func:`fsgm.graph.fit` needs beyond the data.

    Fixed values for ``eta``, ``epsilon``, ``delta`` and ``rho`` override
    the corresponding GCV search.  ``epsilon`` and ``delta`` are relative to
    the largest eigenvalue of the matrix they regularize.  ``d`` is either
    an integer applied to every pair or ``"auto"``; ``d_pairs`` maps 1-based
    pairs to per-pair overrides.
    """

    first_kernel: str = "brownian"
    second_kernel: str = "gaussian"
    third_kernel: str = "gaussian"
    bandwidth_rule: str = "inverse_mean"
    d: int | str = 2
    d_pairs: Mapping[tuple, int] = field(default_factory=dict)
    eta: float | None = None
    epsilon: float | None = None
    delta: float | None = None
    rho: float | None = None
    eta_grid: tuple = DEFAULT_RIDGE_GRID
    epsilon_grid: tuple = DEFAULT_RELATIVE_GRID
    delta_grid: tuple = DEFAULT_RELATIVE_GRID
    rho_grid: tuple = DEFAULT_RHO_GRID
    gcv_denominator: str = "centered"
    normalize_scores: bool = True
    orientation_check: bool = False
    threads: int = 1
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        for name in ("first_kernel", "second_kernel", "third_kernel"):
            try:
                KernelFamily(getattr(self, name))
            except ValueError:
                raise ValidationError(f"{name}: unknown kernel {getattr(self, name)!r}") from None
        for name in ("second_kernel", "third_kernel"):
            if not KernelFamily(getattr(self, name)).radial:
                raise ValidationError(f"{name} must be a radial kernel")
        if self.bandwidth_rule not in ("inverse_mean", "paper_verbatim"):
            raise ValidationError(f"unknown bandwidth_rule {self.bandwidth_rule!r}")
        if self.gcv_denominator not in ("paper_verbatim", "squared", "centered"):
            raise ValidationError(f"unknown gcv_denominator {self.gcv_denominator!r}")
        if self.d != "auto":
            if int(self.d) < 1:
                raise ValidationError("d must be a positive integer or 'auto'")
            object.__setattr__(self, "d", int(self.d))
        d_pairs = {parse_pair(k): int(v) for k, v in dict(self.d_pairs).items()}
        if any(v < 1 for v in d_pairs.values()):
            raise ValidationError("per-pair d must be positive")
        object.__setattr__(self, "d_pairs", d_pairs)
        for name in ("eta", "epsilon", "delta", "rho"):
            object.__setattr__(self, name, _positive_or_none(getattr(self, name), name))
        for name in ("eta_grid", "epsilon_grid", "delta_grid", "rho_grid"):
            object.__setattr__(self, name, _grid(getattr(self, name), name))
        if int(self.threads) < 1:
            raise ValidationError("threads must be at least 1")
        object.__setattr__(self, "threads", int(self.threads))

    def kernel(self, level: int) -> KernelSpec:
        name = {1: self.first_kernel, 2: self.second_kernel, 3: self.third_kernel}[level]
        return KernelSpec(KernelFamily(name))

    def d_for(self, pair_1based: tuple) -> int | str:
        return self.d_pairs.get(tuple(pair_1based), self.d)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["d_pairs"] = {f"{i},{j}": v for (i, j), v in self.d_pairs.items()}
        for name in ("eta_grid", "epsilon_grid", "delta_grid", "rho_grid"):
            out[name] = list(out[name])
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)
