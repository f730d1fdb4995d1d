import math

import numpy as np
import pytest

from periodbench.bench import (
    ConstantNoise,
    FilterEntry,
    PeriodMatched,
    RunConfig,
    compare,
    monte_carlo,
    noise_summary,
    rmse,
    run_single,
    steps_for_horizon,
    sweep_particle_counts,
)
from periodbench.filters import FilterSpec
from periodbench.models import CvModel, Trajectory, UngmModel
from periodbench.timing import FixedPeriod, PeriodMapping, Synthetic


def _ungm_config(**overrides):
    defaults = dict(
        model=UngmModel(),
        filters=(FilterEntry("pf-a", FilterSpec("pf", 100), FixedPeriod(1.0)),),
        horizon=20.0,
        mc_runs=3,
        seed=11,
        mapping=PeriodMapping(1.0),
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


class TestStepsForHorizon:
    def test_unit_period(self):
        assert steps_for_horizon(100.0, 1.0) == 100

    def test_half_period(self):
        assert steps_for_horizon(100.0, 0.5) == 200

    def test_period_exceeding_horizon_rejected(self):
        with pytest.raises(ValueError):
            steps_for_horizon(1.0, 2.0)

    def test_float_dust_does_not_drop_a_step(self):
        assert steps_for_horizon(100.0, 0.05) == 2000


class TestRmse:
    def test_perfect_estimates(self):
        truth = Trajectory(period=1.0, states=np.array([[0.0], [1.0], [2.0]]))
        assert rmse(truth, np.array([[1.0], [2.0]]), (0,)) == 0.0

    def test_single_step_scalar(self):
        truth = Trajectory(period=1.0, states=np.array([[5.0], [0.0]]))
        assert rmse(truth, np.array([[2.0]]), (0,)) == pytest.approx(2.0)

    def test_two_step_scalar(self):
        truth = Trajectory(period=1.0, states=np.array([[5.0], [0.0], [0.0]]))
        value = rmse(truth, np.array([[3.0], [4.0]]), (0,))
        assert value == pytest.approx(2.5 * math.sqrt(2.0))

    def test_component_restriction(self):
        truth = Trajectory(period=1.0,
                           states=np.array([[0.0, 0.0], [0.0, 0.0]]))
        estimates = np.array([[3.0, 99.0]])
        assert rmse(truth, estimates, (0,)) == pytest.approx(3.0)

    def test_length_mismatch_rejected(self):
        truth = Trajectory(period=1.0, states=np.array([[0.0], [1.0]]))
        with pytest.raises(ValueError):
            rmse(truth, np.array([[1.0], [2.0]]), (0,))


class TestRunSingle:
    def test_constant_noise_uses_reference_period(self):
        config = _ungm_config(
            filters=(FilterEntry("pf", FilterSpec("pf", 100),
                                 Synthetic(c0=0.0, c1=1.0)),))
        _, period = run_single(ConstantNoise(1.0), config.model,
                               config.filters[0], config, 0)
        assert period == 1.0

    def test_period_matched_synthetic_composition(self):
        entry = FilterEntry("pf-big", FilterSpec("pf", 10_000),
                            Synthetic(c0=0.0, c1=1e-3))
        config = _ungm_config(filters=(entry,), horizon=100.0)
        _, period = run_single(PeriodMatched(), config.model, entry, config, 0)
        assert period == pytest.approx(10.0)
        assert noise_summary(config.model, period) == pytest.approx(100.0)

    def test_deterministic_given_identical_arguments(self):
        config = _ungm_config()
        a = run_single(ConstantNoise(1.0), config.model, config.filters[0],
                       config, 2)
        b = run_single(ConstantNoise(1.0), config.model, config.filters[0],
                       config, 2)
        assert a == b

    def test_runs_are_distinct_across_indices(self):
        config = _ungm_config()
        r0, _ = run_single(ConstantNoise(1.0), config.model, config.filters[0],
                           config, 0)
        r1, _ = run_single(ConstantNoise(1.0), config.model, config.filters[0],
                           config, 1)
        assert r0 != r1


class TestMonteCarlo:
    def test_single_run_median(self):
        config = _ungm_config(mc_runs=1)
        row = monte_carlo(ConstantNoise(1.0), config)[0]
        single, _ = run_single(ConstantNoise(1.0), config.model,
                               config.filters[0], config, 0)
        assert row.rmse_median == single
        assert row.rmse_iqr == 0.0
        assert (row.runs_ok, row.runs_failed) == (1, 0)

    def test_repeatable(self):
        config = _ungm_config(mc_runs=4)
        assert monte_carlo(ConstantNoise(1.0), config) == monte_carlo(
            ConstantNoise(1.0), config)

    def test_constant_noise_shares_period_and_noise_across_filters(self):
        config = _ungm_config(filters=(
            FilterEntry("slow", FilterSpec("pf", 2000), Synthetic(c1=1e-2)),
            FilterEntry("fast", FilterSpec("pf", 20), Synthetic(c1=1e-4)),
        ))
        rows = monte_carlo(ConstantNoise(1.0), config)
        assert {r.period for r in rows} == {1.0}
        assert {r.noise_summary for r in rows} == {10.0}
        assert {r.steps for r in rows} == {20}

    def test_period_matched_noise_strictly_increasing_in_period(self):
        config = _ungm_config(filters=(
            FilterEntry("n100", FilterSpec("pf", 100), Synthetic(c1=1e-3)),
            FilterEntry("n400", FilterSpec("pf", 400), Synthetic(c1=1e-3)),
            FilterEntry("n900", FilterSpec("pf", 900), Synthetic(c1=1e-3)),
        ), horizon=50.0)
        rows = monte_carlo(PeriodMatched(), config)
        ordered = sorted(rows, key=lambda r: r.period)
        assert all(a.period < b.period for a, b in zip(ordered, ordered[1:]))
        assert all(a.noise_summary < b.noise_summary
                   for a, b in zip(ordered, ordered[1:]))

    def test_rows_invariant_under_filter_permutation(self):
        entries = (
            FilterEntry("a", FilterSpec("pf", 50), FixedPeriod(1.0)),
            FilterEntry("b", FilterSpec("pf", 150), Synthetic(c1=1e-3)),
            FilterEntry("c", FilterSpec("ekf"), FixedPeriod(0.5)),
        )
        forward = monte_carlo(PeriodMatched(), _ungm_config(filters=entries))
        backward = monte_carlo(PeriodMatched(),
                               _ungm_config(filters=entries[::-1]))
        assert forward == backward

    def test_rows_invariant_under_worker_count(self):
        config = _ungm_config(mc_runs=6)
        parallel = _ungm_config(mc_runs=6, workers=4)
        assert monte_carlo(ConstantNoise(1.0), config) == monte_carlo(
            ConstantNoise(1.0), parallel)

    def test_failed_runs_counted_not_silently_dropped(self):
        # near-zero measurement noise makes every likelihood underflow as
        # soon as no particle lands close enough to the observation
        config = RunConfig(
            model=UngmModel(meas_noise_var=1e-308),
            filters=(FilterEntry("pf", FilterSpec("pf", 2000),
                                 FixedPeriod(1.0)),),
            horizon=5.0, mc_runs=10, seed=3)
        row = monte_carlo(ConstantNoise(1.0), config)[0]
        assert row.runs_failed > 0
        assert row.runs_ok + row.runs_failed == config.mc_runs
        assert math.isfinite(row.rmse_median)

    def test_all_runs_failed_row_marked(self):
        config = RunConfig(
            model=UngmModel(meas_noise_var=1e-308),
            filters=(FilterEntry("pf", FilterSpec("pf", 5), FixedPeriod(1.0)),),
            horizon=20.0, mc_runs=4, seed=3)
        row = monte_carlo(ConstantNoise(1.0), config)[0]
        assert (row.runs_ok, row.runs_failed) == (0, 4)
        assert math.isnan(row.rmse_median)
        assert "failed" in row.failure


class TestCompare:
    def test_fixed_reference_cost_makes_protocols_coincide(self):
        config = _ungm_config(
            filters=(FilterEntry("pf", FilterSpec("pf", 80),
                                 FixedPeriod(1.0)),),
            reference_period=1.0, mc_runs=4)
        report = compare(config)
        constant = [r for r in report.rows if r.protocol == "constant_noise"]
        matched = [r for r in report.rows if r.protocol == "period_matched"]
        assert len(constant) == len(matched) == 1
        for field in ("period", "noise_summary", "steps", "rmse_median",
                      "rmse_iqr", "runs_ok", "runs_failed"):
            assert getattr(constant[0], field) == getattr(matched[0], field)

    def test_one_row_per_filter_protocol_pair(self):
        config = _ungm_config(filters=(
            FilterEntry("a", FilterSpec("pf", 50), FixedPeriod(1.0)),
            FilterEntry("b", FilterSpec("ekf"), FixedPeriod(2.0)),
        ))
        report = compare(config)
        keys = {(r.label, r.protocol) for r in report.rows}
        assert len(report.rows) == 4
        assert keys == {("a", "constant_noise"), ("a", "period_matched"),
                        ("b", "constant_noise"), ("b", "period_matched")}

    def test_kf_on_cv_model(self):
        config = RunConfig(
            model=CvModel(),
            filters=(FilterEntry("kf", FilterSpec("kf"), FixedPeriod(1.0)),),
            horizon=20.0, mc_runs=3, seed=7)
        report = compare(config)
        assert all(math.isfinite(r.rmse_median) for r in report.rows)
        assert all(r.runs_ok == 3 for r in report.rows)


class TestSweepExpansion:
    def test_expands_particle_counts(self):
        config = _ungm_config(filters=(
            FilterEntry("pf", FilterSpec("pf", 100), Synthetic(c1=1e-3)),
        ))
        swept = sweep_particle_counts(config, config.filters[0], [50, 1000])
        assert [e.label for e in swept.filters] == ["pf-N50", "pf-N1000"]
        assert [e.spec.particle_count for e in swept.filters] == [50, 1000]

    def test_keeps_other_filters(self):
        entries = (
            FilterEntry("ekf", FilterSpec("ekf"), FixedPeriod(1.0)),
            FilterEntry("pf", FilterSpec("pf", 100), Synthetic(c1=1e-3)),
        )
        config = _ungm_config(filters=entries)
        swept = sweep_particle_counts(config, entries[1], [10, 20])
        assert [e.label for e in swept.filters] == ["ekf", "pf-N10", "pf-N20"]

    def test_rejects_non_pf_entry(self):
        entry = FilterEntry("ekf", FilterSpec("ekf"), FixedPeriod(1.0))
        config = _ungm_config(filters=(entry,))
        with pytest.raises(ValueError):
            sweep_particle_counts(config, entry, [10])


class TestRunConfigValidation:
    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError):
            _ungm_config(filters=(
                FilterEntry("x", FilterSpec("pf", 10), FixedPeriod(1.0)),
                FilterEntry("x", FilterSpec("ekf"), FixedPeriod(1.0)),
            ))

    def test_rejects_empty_filters(self):
        with pytest.raises(ValueError):
            _ungm_config(filters=())

    def test_rejects_bad_components(self):
        with pytest.raises(ValueError):
            _ungm_config(rmse_components=(3,))

    def test_default_components_by_model(self):
        assert _ungm_config().rmse_components == (0,)
        cv = RunConfig(model=CvModel(),
                       filters=(FilterEntry("kf", FilterSpec("kf"),
                                            FixedPeriod(1.0)),),
                       horizon=10.0, mc_runs=1, seed=0)
        assert cv.rmse_components == (0, 2)
