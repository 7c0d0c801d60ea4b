"""Replicated simulation experiments: simulate, fit, score the ROC, aggregate.

Replicate ``r`` of a plan with master seed ``s`` simulates with the seed
drawn from ``SeedSequence([s, r])``, so a replicate's data do not depend on
how many replicates run or in what order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping

import numpy as np

from fsgm.config import PipelineConfig
from fsgm.errors import FsgmError, ValidationError
from fsgm.graph import fit, graph_auc
from fsgm.simgen import ModelSpec, gen_model, normalize_model_id

log = logging.getLogger(__name__)

TuningProtocol = Literal["per_replicate", "freeze_after_10"]
FREEZE_AFTER = 10

# f-SGM columns of the published AUC tables: (model, n, grid_mode) -> (mean, sd)
PUBLISHED_AUC: dict[tuple[str, int, str], tuple[float, float]] = {
    ("I", 100, "balanced"): (0.97, 0.01),
    ("I", 200, "balanced"): (0.97, 0.01),
    ("I", 100, "unbalanced"): (0.97, 0.01),
    ("I", 200, "unbalanced"): (0.97, 0.01),
    ("II", 100, "balanced"): (0.96, 0.02),
    ("II", 200, "balanced"): (0.96, 0.02),
    ("II", 100, "unbalanced"): (0.95, 0.02),
    ("II", 200, "unbalanced"): (0.95, 0.02),
    ("III", 100, "balanced"): (0.95, 0.05),
    ("III", 200, "balanced"): (0.99, 0.01),
    ("III", 100, "unbalanced"): (0.94, 0.04),
    ("III", 200, "unbalanced"): (0.98, 0.01),
    ("IV", 100, "balanced"): (0.80, 0.04),
    ("IV", 200, "balanced"): (0.82, 0.04),
}
for _model, _rows in {
    "I'": ((0.98, 0.01), (0.99, 0.01), (0.99, 0.00)),
    "I''": ((0.98, 0.01), (0.99, 0.00), (0.99, 0.00)),
    "I'''": ((0.98, 0.00), (0.99, 0.00), (0.99, 0.00)),
    "III'": ((0.97, 0.01), (0.99, 0.00), (0.99, 0.00)),
    "III''": ((0.97, 0.00), (0.98, 0.00), (0.99, 0.00)),
    "III'''": ((0.97, 0.00), (0.99, 0.00), (0.99, 0.00)),
    "IV'": ((0.79, 0.03), (0.82, 0.02), (0.85, 0.02)),
    "IV''": ((0.77, 0.02), (0.81, 0.02), (0.85, 0.02)),
    "IV'''": ((0.76, 0.02), (0.81, 0.02), (0.83, 0.01)),
}.items():
    for _n, _ref in zip((100, 200, 300), _rows):
        PUBLISHED_AUC[(_model, _n, "balanced")] = _ref


@dataclass(frozen=True)
class Reference:
    """Expected mean AUC with an acceptance band.

    Without explicit bounds the band is ``mean +/- (3 sd + 0.03)``, clipped
    to ``[0, 1]``.
    """

    mean: float
    sd: float = 0.0
    lower: float | None = None
    upper: float | None = None

    def band(self) -> tuple[float, float]:
        margin = 3.0 * self.sd + 0.03
        lo = self.lower if self.lower is not None else max(0.0, self.mean - margin)
        hi = self.upper if self.upper is not None else min(1.0, self.mean + margin)
        return lo, hi

    def contains(self, value: float) -> bool:
        lo, hi = self.band()
        return lo <= value <= hi


def published_reference(model: ModelSpec) -> Reference | None:
    grid_mode = "balanced" if model.is_gaussian else model.grid_mode
    ref = PUBLISHED_AUC.get((model.model_id, model.n, grid_mode))
    return Reference(*ref) if ref else None


@dataclass(frozen=True)
class ExperimentPlan:
    model: ModelSpec
    replicates: int = 20
    config: PipelineConfig = field(default_factory=PipelineConfig)
    reference: Reference | None = None
    tuning_protocol: TuningProtocol = "per_replicate"
    threads: int = 1

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ValidationError("replicates must be at least 1")
        if self.tuning_protocol not in ("per_replicate", "freeze_after_10"):
            raise ValidationError(f"unknown tuning protocol {self.tuning_protocol!r}")
        if int(self.threads) < 1:
            raise ValidationError("threads must be at least 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentPlan":
        """Build a plan from a JSON-style mapping.

        ``model`` holds the :class:`ModelSpec` fields, ``config`` the
        :class:`PipelineConfig` fields and ``reference`` is ``"published"``, a
        mapping of :class:`Reference` fields, or absent.
        """
        data = dict(data)
        known = {"model", "replicates", "config", "reference", "tuning_protocol", "threads"}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown plan keys: {', '.join(sorted(unknown))}")
        if "model" not in data:
            raise ValidationError("plan needs a model")
        try:
            model = ModelSpec(**data["model"])
        except TypeError as exc:
            raise ValidationError(f"invalid model block: {exc}") from None
        config = PipelineConfig.from_dict(data.get("config", {}))
        ref = data.get("reference", "published")
        if ref == "published":
            reference = published_reference(model)
        elif ref is None:
            reference = None
        else:
            try:
                reference = Reference(**ref)
            except TypeError as exc:
                raise ValidationError(f"invalid reference block: {exc}") from None
        return cls(
            model=model,
            replicates=int(data.get("replicates", 20)),
            config=config,
            reference=reference,
            tuning_protocol=data.get("tuning_protocol", "per_replicate"),
            threads=int(data.get("threads", 1)),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def replicate_seed(master: int, replicate: int) -> int:
    return int(np.random.SeedSequence([int(master), int(replicate)]).generate_state(1)[0])


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    auc: float | None
    tuning: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None
    scores: dict = field(default_factory=dict, repr=False)
    truth: tuple = ()


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    results: list

    @property
    def aucs(self) -> np.ndarray:
        return np.array([r.auc for r in self.results if r.auc is not None])

    @property
    def complete(self) -> bool:
        return all(r.error is None for r in self.results)

    @property
    def mean(self) -> float:
        return float(self.aucs.mean()) if self.aucs.size else float("nan")

    @property
    def sd(self) -> float:
        return float(self.aucs.std(ddof=1)) if self.aucs.size > 1 else 0.0

    @property
    def passed(self) -> bool | None:
        if self.plan.reference is None:
            return None
        return self.complete and self.plan.reference.contains(self.mean)

    def to_dict(self) -> dict:
        ref = self.plan.reference
        m = self.plan.model
        return {
            "model": m.model_id,
            "n": m.n,
            "grid_mode": m.grid_mode,
            "seed": m.seed,
            "replicates": self.plan.replicates,
            "tuning_protocol": self.plan.tuning_protocol,
            "config": self.plan.config.to_dict(),
            "auc_mean": self.mean,
            "auc_sd": self.sd,
            "complete": self.complete,
            "reference": None if ref is None else {"mean": ref.mean, "sd": ref.sd, "band": list(ref.band())},
            "passed": self.passed,
            "results": [dataclasses.asdict(r) for r in self.results],
        }

    def summary(self) -> str:
        m = self.plan.model
        line = f"model {m.model_id:<6} n={m.n:<4} {m.grid_mode:<10} AUC {self.mean:.3f} ({self.sd:.3f})"
        line += f"  [{self.aucs.size}/{len(self.results)} replicates]"
        ref = self.plan.reference
        if ref is not None:
            lo, hi = ref.band()
            line += f"  published {ref.mean:.2f}({ref.sd:.2f}) band [{lo:.2f}, {hi:.2f}] -> {'PASS' if self.passed else 'FAIL'}"
        return line

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(_plain(self.to_dict()), indent=2) + "\n", encoding="utf-8")
        m = self.plan.model
        with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("model", "n", "grid_mode", "replicate", "auc"))
            for r in self.results:
                w.writerow((m.model_id, m.n, m.grid_mode, r.replicate, "" if r.auc is None else repr(r.auc)))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else f"{k[0]},{k[1]}": _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _run_one(plan: ExperimentPlan, replicate: int, config: PipelineConfig) -> ReplicateResult:
    seed = replicate_seed(plan.model.seed, replicate)
    spec = dataclasses.replace(plan.model, seed=seed)
    start = time.perf_counter()
    try:
        dataset, truth = gen_model(spec)
        graph = fit(dataset, config)
        value = graph_auc(graph, truth.edges)
        tuning = {k: graph.tuning[k] for k in ("eta", "epsilon", "delta", "rho")}
        return ReplicateResult(
            replicate,
            seed,
            value,
            tuning,
            time.perf_counter() - start,
            scores=graph.score_map(),
            truth=tuple(truth.sorted_edges()),
        )
    except (FsgmError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("replicate %d failed: %s", replicate, exc)
        return ReplicateResult(replicate, seed, None, {}, time.perf_counter() - start, f"{type(exc).__name__}: {exc}")


def _run_batch(plan, replicates, config):
    if plan.threads <= 1 or len(replicates) <= 1:
        return [_run_one(plan, r, config) for r in replicates]
    with ThreadPoolExecutor(max_workers=plan.threads) as pool:
        return list(pool.map(lambda r: _run_one(plan, r, config), replicates))


def frozen_config(config: PipelineConfig, results) -> PipelineConfig:
    """Fix eta, epsilon and delta at their averages over successful replicates."""
    ok = [r.tuning for r in results if r.error is None]
    if not ok:
        return config
    changes = {}
    for name in ("eta", "epsilon", "delta"):
        if getattr(config, name) is None:
            changes[name] = float(np.mean([t[name] for t in ok]))
    return config.replace(**changes)


def run_experiment(plan: ExperimentPlan) -> ExperimentReport:
    """Run every replicate of ``plan``; failing replicates are recorded, not raised."""
    replicates = list(range(int(plan.replicates)))
    config = plan.config.replace(threads=1) if plan.threads > 1 else plan.config
    if plan.tuning_protocol == "freeze_after_10":
        head = _run_batch(plan, replicates[:FREEZE_AFTER], config)
        tail = _run_batch(plan, replicates[FREEZE_AFTER:], frozen_config(config, head))
        results = head + tail
    else:
        results = _run_batch(plan, replicates, config)
    return ExperimentReport(plan, results)
