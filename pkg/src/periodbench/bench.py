"""Monte Carlo evaluation protocols for filters with different iteration costs.

Two protocols are compared side by side. Under ``ConstantNoise`` every
filter is simulated at one reference period with one shared transition
noise, the conventional setup. Under ``PeriodMatched`` each filter's
sampling period is derived from its own iteration cost and the transition
noise is scaled to that period, so slower filters face fewer, noisier
steps over the same continuous horizon. Reports carry the period and noise
actually used per filter so the contrast is explicit.

Runs are seeded by a splittable scheme keyed on (seed, filter label,
realized period, run index): results are independent of execution order and
of how many workers ran them, and protocols that realize the same period
produce identical rows.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .filters import (
    FilterSpec,
    WeightDegeneracyError,
    estimate,
    initial_belief,
    step_filter,
)
from .models import (
    CvModel,
    Trajectory,
    UngmModel,
    build_system,
    cv_process_cov,
    default_initial_state,
    generate_measurements,
    simulate_truth,
    ungm_transition_variance,
)
from .timing import CostModel, Measured, PeriodMapping, TimingProfile, derive_period, profile_filter

# Cost per iteration barely depends on the period, so wall-clock profiling
# always runs on the system built at the reference convention t = 1.
PROFILE_PERIOD = 1.0

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ConstantNoise:
    """One period, one noise, for every filter (the conventional setup)."""

    reference_period: float = 1.0

    def __post_init__(self):
        if self.reference_period <= 0:
            raise ValueError("reference_period must be positive")


@dataclass(frozen=True)
class PeriodMatched:
    """Per-filter period from its cost model; noise scaled to that period."""


Protocol = ConstantNoise | PeriodMatched


def protocol_name(protocol: Protocol) -> str:
    return ("constant_noise" if isinstance(protocol, ConstantNoise)
            else "period_matched")


@dataclass(frozen=True)
class FilterEntry:
    """A labeled filter under test together with its cost model."""

    label: str
    spec: FilterSpec
    cost: CostModel

    def __post_init__(self):
        if not self.label:
            raise ValueError("filter label must be non-empty")


@dataclass(frozen=True)
class RunConfig:
    """Everything one evaluation needs: model, filters, horizon, seeding."""

    model: UngmModel | CvModel
    filters: tuple[FilterEntry, ...]
    horizon: float
    mc_runs: int
    seed: int
    mapping: PeriodMapping | None = None
    rmse_components: tuple[int, ...] = ()
    reference_period: float = 1.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        if not self.filters:
            raise ValueError("filters must be non-empty")
        labels = [f.label for f in self.filters]
        if len(set(labels)) != len(labels):
            raise ValueError("filter labels must be unique")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        dim = 1 if isinstance(self.model, UngmModel) else 4
        comps = tuple(self.rmse_components) or _default_components(self.model)
        object.__setattr__(self, "rmse_components", comps)
        if any(c < 0 or c >= dim for c in comps):
            raise ValueError(f"rmse_components must be indices in [0, {dim})")


def _default_components(model) -> tuple[int, ...]:
    # positions only for the tracker, the whole (scalar) state otherwise
    return (0,) if isinstance(model, UngmModel) else (0, 2)


@dataclass(frozen=True)
class ReportRow:
    """One (filter, protocol) cell of an evaluation report."""

    label: str
    protocol: str
    period: float
    noise_summary: float
    steps: int
    rmse_median: float
    rmse_iqr: float
    runs_ok: int
    runs_failed: int
    seed: int
    failure: str = ""


@dataclass(frozen=True)
class EvalReport:
    """Per-filter, per-protocol RMSE statistics, canonically ordered."""

    rows: tuple[ReportRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))


def steps_for_horizon(horizon: float, period: float) -> int:
    """Number of filter iterations fitting in a continuous horizon."""
    if horizon <= 0 or period <= 0:
        raise ValueError("horizon and period must be positive")
    # the 1e-9 absorbs quotient dust like 100/0.05 -> 1999.999...
    steps = math.floor(horizon / period + 1e-9)
    if steps < 1:
        raise ValueError(
            f"period {period} exceeds horizon {horizon}: no steps fit")
    return steps


def rmse(truth: Trajectory, estimates: np.ndarray,
         components: tuple[int, ...]) -> float:
    """Root-mean-square estimation error over the selected state components.

    Expects one estimate per measurement step, i.e. len(truth) - 1 rows.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    expected = truth.states.shape[0] - 1
    if estimates.shape[0] != expected:
        raise ValueError(
            f"need {expected} estimates (one per step), got {estimates.shape[0]}")
    err = estimates[:, list(components)] - truth.states[1:, list(components)]
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def noise_summary(model: UngmModel | CvModel, period: float) -> float:
    """Scalar summary of the transition noise at a period (variance or trace)."""
    if isinstance(model, UngmModel):
        return ungm_transition_variance(model, period)
    return float(np.trace(cv_process_cov(model, period)))


def _run_streams(seed: int, label: str, period: float, run_index: int):
    """Independent generators for truth, measurements, and the filter.

    Keyed on the realized period rather than the protocol name, so two
    protocols that coincide (same period, hence same noise) replay the same
    randomness and produce identical results.
    """
    key = f"{label}|{run_index}|{period!r}".encode()
    words = np.frombuffer(hashlib.sha256(key).digest()[:16], dtype=np.uint32)
    root = np.random.SeedSequence([seed & _SEED_MASK, *words.tolist()])
    truth_ss, meas_ss, filt_ss = root.spawn(3)
    return (np.random.default_rng(truth_ss), np.random.default_rng(meas_ss),
            np.random.default_rng(filt_ss))


def resolve_period(protocol: Protocol, entry: FilterEntry, config: RunConfig,
                   profile: TimingProfile | None = None) -> float:
    """The sampling period a filter runs at under a protocol."""
    if isinstance(protocol, ConstantNoise):
        return protocol.reference_period
    return derive_period(entry.cost, profile, config.mapping, entry.spec)


def run_single(protocol: Protocol, model: UngmModel | CvModel,
               entry: FilterEntry, config: RunConfig, run_index: int,
               profile: TimingProfile | None = None) -> tuple[float, float]:
    """One Monte Carlo run of one filter under one protocol.

    Simulates truth and measurements at the protocol's period, folds the
    filter over the measurements, and returns (rmse, period). Deterministic
    given identical arguments.
    """
    period = resolve_period(protocol, entry, config, profile)
    system = build_system(model, period)
    steps = steps_for_horizon(config.horizon, period)
    truth_rng, meas_rng, filt_rng = _run_streams(
        config.seed, entry.label, period, run_index)

    x0 = default_initial_state(model)
    truth = simulate_truth(system, x0, steps, truth_rng)
    measurements = generate_measurements(system, truth, meas_rng)

    belief = initial_belief(entry.spec, model, x0, filt_rng)
    estimates = np.empty((steps, system.state_dim))
    for k in range(1, steps + 1):
        belief = step_filter(belief, entry.spec, system, k,
                             measurements.measurements[k - 1], filt_rng)
        estimates[k - 1] = estimate(belief)
    return rmse(truth, estimates, config.rmse_components), period


def _profile_phase(config: RunConfig) -> dict[str, TimingProfile]:
    """Wall-clock profiling runs exclusively, before any concurrent work."""
    profiles = {}
    for entry in config.filters:
        if isinstance(entry.cost, Measured):
            key = f"profile|{entry.label}".encode()
            words = np.frombuffer(hashlib.sha256(key).digest()[:16],
                                  dtype=np.uint32)
            rng = np.random.default_rng(
                np.random.SeedSequence([config.seed & _SEED_MASK,
                                        *words.tolist()]))
            system = build_system(config.model, PROFILE_PERIOD)
            profiles[entry.label] = profile_filter(
                entry.spec, system, entry.cost.warmup, entry.cost.samples, rng)
    return profiles


def _aggregate(protocol: Protocol, entry: FilterEntry, config: RunConfig,
               period: float,
               results: list[tuple[float, float] | str]) -> ReportRow:
    rmses = [r[0] for r in results if not isinstance(r, str)]
    failures = [r for r in results if isinstance(r, str)]
    if rmses:
        med = float(np.median(rmses))
        q25, q75 = np.percentile(rmses, [25.0, 75.0])
        iqr = float(q75 - q25)
        fail_note = failures[0] if failures else ""
    else:
        med = math.nan
        iqr = math.nan
        fail_note = f"all {len(failures)} runs failed: {failures[0]}"
    return ReportRow(
        label=entry.label,
        protocol=protocol_name(protocol),
        period=period,
        noise_summary=noise_summary(config.model, period),
        steps=steps_for_horizon(config.horizon, period),
        rmse_median=med,
        rmse_iqr=iqr,
        runs_ok=len(rmses),
        runs_failed=len(failures),
        seed=config.seed,
        failure=fail_note,
    )


def monte_carlo(protocol: Protocol, config: RunConfig,
                profiles: dict[str, TimingProfile] | None = None
                ) -> tuple[ReportRow, ...]:
    """Run the Monte Carlo ensemble for every filter under one protocol.

    Degenerate particle-filter runs are excluded from the medians but kept
    in the accounting: runs_ok + runs_failed always equals mc_runs.
    """
    if profiles is None:
        profiles = _profile_phase(config)

    def one_run(entry: FilterEntry, run_index: int):
        try:
            return run_single(protocol, config.model, entry, config,
                              run_index, profiles.get(entry.label))
        except WeightDegeneracyError as exc:
            return str(exc)

    tasks = [(entry, run) for entry in config.filters
             for run in range(config.mc_runs)]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(lambda t: one_run(*t), tasks))
    else:
        outcomes = [one_run(*t) for t in tasks]

    by_label: dict[str, list] = {entry.label: [] for entry in config.filters}
    for (entry, _), outcome in zip(tasks, outcomes):
        by_label[entry.label].append(outcome)
    rows = [
        _aggregate(protocol, entry, config,
                   resolve_period(protocol, entry, config,
                                  profiles.get(entry.label)),
                   by_label[entry.label])
        for entry in config.filters
    ]
    return tuple(sorted(rows, key=lambda r: (r.label, r.protocol)))


def compare(config: RunConfig) -> EvalReport:
    """Evaluate every filter under both protocols and merge the rows."""
    profiles = _profile_phase(config)
    rows = (monte_carlo(ConstantNoise(config.reference_period), config, profiles)
            + monte_carlo(PeriodMatched(), config, profiles))
    return EvalReport(rows=tuple(sorted(rows, key=lambda r: (r.label, r.protocol))))


def sweep_particle_counts(config: RunConfig, base: FilterEntry,
                          counts: list[int]) -> RunConfig:
    """Expand one particle-filter entry into one entry per particle count."""
    if base.spec.kind != "pf":
        raise ValueError("sweep entry must be a particle filter")
    expanded = []
    for entry in config.filters:
        if entry.label == base.label:
            for n in counts:
                expanded.append(replace(
                    entry,
                    label=f"{entry.label}-N{n}",
                    spec=replace(entry.spec, particle_count=int(n)),
                ))
        else:
            expanded.append(entry)
    return replace(config, filters=tuple(expanded))
