"""Per-iteration filter cost and its mapping to a simulation sampling period.

A filter's real iteration cost can be measured on the host (wall clock),
modeled synthetically as an affine function of the particle count, or pinned
outright. The cost in seconds is converted to simulation time units by a
single configurable constant ``kappa``; machine-independent experiments use
the synthetic or fixed variants so results do not depend on host speed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median

import numpy as np

from .filters import FilterSpec, GaussianBelief, ParticleBelief, step_filter
from .models import DiscreteSystem, psd_factor


@dataclass(frozen=True)
class Measured:
    """Time real filter iterations on this host."""

    warmup: int = 10
    samples: int = 30

    def __post_init__(self):
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class Synthetic:
    """Affine cost model: seconds per iteration = c0 + c1 * particle_count."""

    c0: float = 0.0
    c1: float = 0.0

    def __post_init__(self):
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError("c0 and c1 must be nonnegative")
        if self.c0 + self.c1 == 0:
            raise ValueError("c0 + c1 must be positive")


@dataclass(frozen=True)
class FixedPeriod:
    """Bypass cost modeling entirely and pin the sampling period."""

    period: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")


CostModel = Measured | Synthetic | FixedPeriod


@dataclass(frozen=True)
class TimingProfile:
    """Median per-iteration wall-clock cost with its raw samples."""

    median_secs_per_iter: float
    sample_count: int
    raw_samples: tuple[float, ...]
    low_resolution: bool = False

    @classmethod
    def from_samples(cls, raw: list[float], resolution: float = 0.0):
        raw = tuple(float(s) for s in raw)
        if not raw:
            raise ValueError("need at least one timing sample")
        med = float(median(raw))
        return cls(median_secs_per_iter=med, sample_count=len(raw),
                   raw_samples=raw, low_resolution=med <= resolution)


@dataclass(frozen=True)
class PeriodMapping:
    """Simulation time units per wall-clock second."""

    kappa: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def profile_filter(spec: FilterSpec, system: DiscreteSystem, warmup: int,
                   samples: int, rng: np.random.Generator) -> TimingProfile:
    """Measure the median per-iteration wall-clock cost of a filter.

    Runs warmup + samples iterations against freshly synthesized
    measurements (so the timed work includes likelihood evaluation and any
    resampling) and keeps the last ``samples`` durations. Must not run
    concurrently with other benchmark work in this process.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    dim = system.state_dim
    proc_chol = psd_factor(system.process_noise_cov)
    meas_chol = psd_factor(system.measurement_noise_cov)
    if spec.kind == "pf":
        belief = ParticleBelief(rng.standard_normal((spec.particle_count, dim)),
                                np.full(spec.particle_count,
                                        1.0 / spec.particle_count))
    else:
        belief = GaussianBelief(np.zeros(dim), np.eye(dim))

    truth = np.zeros(dim)
    durations = []
    for k in range(1, warmup + samples + 1):
        truth = (system.transition(truth, k, system.period)
                 + rng.standard_normal(dim) @ proc_chol)
        y = (system.measurement(truth)
             + rng.standard_normal(system.meas_dim) @ meas_chol)
        start = time.perf_counter()
        belief = step_filter(belief, spec, system, k, y, rng)
        durations.append(time.perf_counter() - start)
    resolution = time.get_clock_info("perf_counter").resolution
    return TimingProfile.from_samples(durations[warmup:], resolution)


def derive_period(cost: CostModel, profile: TimingProfile | None,
                  mapping: PeriodMapping | None, spec: FilterSpec) -> float:
    """Map a filter's per-iteration cost to its simulation sampling period.

    Measured and Synthetic costs need ``mapping`` (and Measured a profile);
    FixedPeriod ignores both.
    """
    if isinstance(cost, FixedPeriod):
        return cost.period
    if mapping is None:
        raise ValueError("kappa mapping required for measured/synthetic cost")
    if isinstance(cost, Measured):
        if profile is None:
            raise ValueError("measured cost requires a timing profile")
        period = mapping.kappa * profile.median_secs_per_iter
    else:
        count = spec.particle_count if spec.kind == "pf" else 1
        period = mapping.kappa * (cost.c0 + cost.c1 * count)
    if period <= 0:
        raise ValueError("derived period must be positive")
    return period
