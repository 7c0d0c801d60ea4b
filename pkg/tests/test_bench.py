import json

import numpy as np
import pytest

from fsgm.bench import (
    PUBLISHED_AUC,
    ExperimentPlan,
    Reference,
    ReplicateResult,
    frozen_config,
    published_reference,
    replicate_seed,
    run_experiment,
)
from fsgm.config import PipelineConfig
from fsgm.errors import ValidationError
from fsgm.simgen import ModelSpec


class TestReference:
    def test_default_band(self):
        assert Reference(0.80, 0.04).band() == pytest.approx((0.65, 0.95))

    def test_band_clipped(self):
        assert Reference(0.99, 0.01).band() == pytest.approx((0.93, 1.0))

    def test_explicit_bounds(self):
        r = Reference(0.80, 0.04, lower=0.70, upper=0.90)
        assert r.band() == (0.70, 0.90)
        assert r.contains(0.70) and not r.contains(0.91)

    def test_published_values(self):
        assert PUBLISHED_AUC[("I", 100, "balanced")] == (0.97, 0.01)
        assert PUBLISHED_AUC[("III", 200, "balanced")] == (0.99, 0.01)
        assert PUBLISHED_AUC[("IV", 100, "balanced")] == (0.80, 0.04)
        assert PUBLISHED_AUC[("I'", 100, "balanced")] == (0.98, 0.01)
        assert published_reference(ModelSpec("IV", 100, "unbalanced")).mean == 0.80
        assert published_reference(ModelSpec("I", 150)) is None


class TestSeeds:
    def test_distinct_and_stable(self):
        seeds = [replicate_seed(0, r) for r in range(20)]
        assert len(set(seeds)) == 20
        assert seeds == [replicate_seed(0, r) for r in range(20)]
        assert replicate_seed(1, 0) != replicate_seed(0, 0)


class TestPlan:
    def test_from_dict_defaults(self):
        plan = ExperimentPlan.from_dict({"model": {"model_id": "I", "n": 100}})
        assert plan.replicates == 20
        assert plan.reference == Reference(0.97, 0.01)
        assert plan.tuning_protocol == "per_replicate"

    def test_from_dict_explicit(self):
        plan = ExperimentPlan.from_dict(
            {
                "model": {"model_id": "IV", "n": 50, "seed": 3},
                "replicates": 4,
                "config": {"rho": 0.02},
                "reference": {"mean": 0.8, "lower": 0.7, "upper": 0.9},
                "tuning_protocol": "freeze_after_10",
            }
        )
        assert plan.model.seed == 3 and plan.config.rho == 0.02
        assert plan.reference.band() == (0.7, 0.9)

    @pytest.mark.parametrize(
        "data",
        [
            {"model": {"model_id": "I", "n": 10}, "extra": 1},
            {"replicates": 3},
            {"model": {"model_id": "I", "n": 10, "bogus": 1}},
            {"model": {"model_id": "I", "n": 10}, "tuning_protocol": "sometimes"},
            {"model": {"model_id": "I", "n": 10}, "replicates": 0},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ValidationError):
            ExperimentPlan.from_dict(data)

    def test_from_json(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({"model": {"model_id": "III", "n": 200}, "reference": None}))
        plan = ExperimentPlan.from_json(path)
        assert plan.model.model_id == "III" and plan.reference is None
        path.write_text("{not json")
        with pytest.raises(ValidationError):
            ExperimentPlan.from_json(path)


class TestFrozenConfig:
    def test_arithmetic_means(self):
        results = [
            ReplicateResult(0, 0, 0.9, {"eta": 3.0, "epsilon": 0.03, "delta": 0.3, "rho": 0.01}),
            ReplicateResult(1, 1, 0.9, {"eta": 30.0, "epsilon": 0.3, "delta": 0.03, "rho": 0.02}),
            ReplicateResult(2, 2, None, {}, error="boom"),
        ]
        cfg = frozen_config(PipelineConfig(), results)
        assert (cfg.eta, cfg.epsilon, cfg.delta) == pytest.approx((16.5, 0.165, 0.165))
        assert cfg.rho is None

    def test_fixed_values_kept(self):
        results = [ReplicateResult(0, 0, 0.9, {"eta": 3.0, "epsilon": 0.03, "delta": 0.3})]
        assert frozen_config(PipelineConfig(eta=1.0), results).eta == 1.0

    def test_no_successes(self):
        cfg = PipelineConfig()
        assert frozen_config(cfg, [ReplicateResult(0, 0, None, error="x")]) is cfg


class TestRunExperiment:
    def test_small_run_and_report(self, tmp_path):
        plan = ExperimentPlan(ModelSpec("I", 30, seed=5), replicates=3, reference=Reference(0.5, lower=0.0, upper=1.0))
        report = run_experiment(plan)
        assert report.complete and report.aucs.size == 3
        assert report.mean == pytest.approx(np.mean(report.aucs))
        assert report.sd == pytest.approx(np.std(report.aucs, ddof=1))
        assert report.passed
        assert "PASS" in report.summary()
        report.write(tmp_path)
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["auc_mean"] == pytest.approx(report.mean)
        assert len(data["results"]) == 3
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert lines[0] == "model,n,grid_mode,replicate,auc" and len(lines) == 4

    def test_replicates_independent_of_count(self):
        a = run_experiment(ExperimentPlan(ModelSpec("I", 20, seed=1), replicates=2))
        b = run_experiment(ExperimentPlan(ModelSpec("I", 20, seed=1), replicates=3))
        assert [r.auc for r in a.results] == [r.auc for r in b.results[:2]]

    def test_threads_do_not_change_results(self):
        a = run_experiment(ExperimentPlan(ModelSpec("I", 20, seed=2), replicates=3))
        b = run_experiment(ExperimentPlan(ModelSpec("I", 20, seed=2), replicates=3, threads=3))
        assert [r.auc for r in a.results] == [r.auc for r in b.results]

    def test_failures_recorded(self):
        # n below the fitting minimum makes every replicate fail
        report = run_experiment(ExperimentPlan(ModelSpec("I", 5), replicates=2, reference=Reference(0.5)))
        assert not report.complete
        assert all(r.error and "ValidationError" in r.error for r in report.results)
        assert report.passed is False
        assert np.isnan(report.mean)

    def test_freeze_protocol_fixes_tuning(self):
        plan = ExperimentPlan(ModelSpec("I", 20, seed=3), replicates=12, tuning_protocol="freeze_after_10")
        report = run_experiment(plan)
        head = [r.tuning for r in report.results[:10]]
        for name in ("eta", "epsilon", "delta"):
            mean = np.mean([t[name] for t in head])
            assert all(r.tuning[name] == pytest.approx(mean) for r in report.results[10:])
