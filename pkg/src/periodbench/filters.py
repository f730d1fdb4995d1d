"""Recursive filters sharing a uniform step interface over a DiscreteSystem.

Three estimators are provided: a Kalman filter for the linear
constant-velocity system, an extended Kalman filter for the scalar growth
system (analytic Jacobians), and a bootstrap particle filter that works on
either. Each step consumes one measurement and returns a new belief; beliefs
are immutable, so a filter run is a fold over the measurement sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import (
    CV_MEAS_MATRIX,
    CvModel,
    DiscreteSystem,
    UngmModel,
    cv_transition_matrix,
    psd_factor,
)


class WeightDegeneracyError(RuntimeError):
    """All particle weights underflowed to zero at a given step."""

    def __init__(self, step_index: int):
        super().__init__(f"all particle weights degenerate at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian posterior: mean vector and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"cov must be {n}x{n}, got {cov.shape}")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-9 * scale:
            raise ValueError("cov must be symmetric")
        trace = float(np.trace(cov))
        if np.linalg.eigvalsh(cov).min() < -1e-9 * max(1.0, trace):
            raise ValueError("cov must be positive semidefinite")


@dataclass(frozen=True)
class ParticleBelief:
    """Weighted particle posterior; weights are normalized."""

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)
        n = particles.shape[0]
        if n < 1:
            raise ValueError("need at least one particle")
        if weights.shape != (n,):
            raise ValueError("weights must match particle count")
        if weights.min() < 0:
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")


@dataclass(frozen=True)
class EveryStep:
    """Resample after every step (classical bootstrap filter)."""


@dataclass(frozen=True)
class EssThreshold:
    """Resample only when ESS drops below ``fraction`` of the particle count."""

    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")


@dataclass(frozen=True)
class FilterSpec:
    """Which filter to run, and its particle-filter knobs."""

    kind: str  # "kf" | "ekf" | "pf"
    particle_count: int = 1
    resample_policy: EveryStep | EssThreshold = field(default_factory=EveryStep)

    def __post_init__(self):
        if self.kind not in ("kf", "ekf", "pf"):
            raise ValueError(f"unknown filter kind: {self.kind!r}")
        if self.kind == "pf" and self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    # long Monte Carlo runs accumulate asymmetry otherwise
    return (cov + cov.T) / 2.0


def kf_predict(b: GaussianBelief, trans: np.ndarray,
               process_cov: np.ndarray) -> GaussianBelief:
    """Propagate a Gaussian belief through a linear transition."""
    trans = np.asarray(trans, dtype=float)
    n = b.mean.shape[0]
    if trans.shape != (n, n):
        raise ValueError(f"transition matrix must be {n}x{n}, got {trans.shape}")
    mean = trans @ b.mean
    cov = _symmetrize(trans @ b.cov @ trans.T + process_cov)
    return GaussianBelief(mean, cov)


def _gaussian_update(b: GaussianBelief, obs: np.ndarray, noise_cov: np.ndarray,
                     innovation: np.ndarray) -> GaussianBelief:
    """Shared correction step; Joseph-form covariance for numerical symmetry."""
    innovation_cov = obs @ b.cov @ obs.T + noise_cov
    gain = np.linalg.solve(innovation_cov, obs @ b.cov).T
    mean = b.mean + gain @ innovation
    complement = np.eye(b.mean.shape[0]) - gain @ obs
    cov = complement @ b.cov @ complement.T + gain @ noise_cov @ gain.T
    return GaussianBelief(mean, _symmetrize(cov))


def kf_update(b: GaussianBelief, obs: np.ndarray, noise_cov: np.ndarray,
              y: np.ndarray) -> GaussianBelief:
    """Condition a Gaussian belief on a linear measurement."""
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if obs.shape != (y.shape[0], b.mean.shape[0]):
        raise ValueError("measurement matrix shape does not match belief/measurement")
    return _gaussian_update(b, obs, noise_cov, y - obs @ b.mean)


def kf_step(b: GaussianBelief, system: DiscreteSystem,
            y: np.ndarray) -> GaussianBelief:
    """One predict+update cycle on the linear constant-velocity system."""
    if system.state_dim != 4:
        raise ValueError("kf_step expects the 4-state constant-velocity system")
    b = kf_predict(b, cv_transition_matrix(system.period),
                   system.process_noise_cov)
    return kf_update(b, CV_MEAS_MATRIX, system.measurement_noise_cov, y)


def ungm_state_jacobian(x: float) -> float:
    """Derivative of the growth-model drift with respect to the state."""
    return 0.5 + 25.0 * (1.0 - x * x) / (1.0 + x * x) ** 2


def ungm_meas_jacobian(x: float) -> float:
    """Derivative of the quadratic observation x^2 / 20."""
    return x / 10.0


def ekf_step(b: GaussianBelief, system: DiscreteSystem, step_index: int,
             y: np.ndarray, state_jacobian=ungm_state_jacobian,
             meas_jacobian=ungm_meas_jacobian) -> GaussianBelief:
    """Extended Kalman step for a scalar system with analytic Jacobians.

    Defaults to the growth-model Jacobians; the callables can be swapped for
    other scalar systems (e.g. to check that an identity drift reduces the
    step to the plain Kalman recursion).
    """
    if system.state_dim != 1 or system.meas_dim != 1:
        raise ValueError("ekf_step requires a scalar-state, scalar-measurement system")
    trans = np.array([[state_jacobian(float(b.mean[0]))]])
    mean = np.atleast_1d(system.transition(b.mean, step_index, system.period))
    cov = _symmetrize(trans @ b.cov @ trans.T + system.process_noise_cov)
    pred = GaussianBelief(mean, cov)
    obs = np.array([[meas_jacobian(float(mean[0]))]])
    innovation = np.atleast_1d(y) - system.measurement(mean)
    return _gaussian_update(pred, obs, system.measurement_noise_cov, innovation)


def ess(weights: np.ndarray) -> float:
    """Effective sample size 1 / sum(w_i^2) of normalized weights."""
    weights = np.asarray(weights, dtype=float)
    return 1.0 / float(np.sum(weights * weights))


def systematic_resample(weights: np.ndarray, rng,
                        size: int | None = None) -> np.ndarray:
    """Systematic resampling: one uniform draw, a stride-1/N grid of positions.

    Per-index counts deviate from ``size * w_i`` by less than one, for any
    draw. ``size`` defaults to the number of weights.
    """
    weights = np.asarray(weights, dtype=float)
    n = weights.shape[0] if size is None else int(size)
    positions = (np.arange(n) + float(rng.random())) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard against rounding in the final bin
    return np.searchsorted(cumulative, positions, side="right")


def pf_step(b: ParticleBelief, system: DiscreteSystem, step_index: int,
            y: np.ndarray, spec: FilterSpec,
            rng: np.random.Generator) -> ParticleBelief:
    """One bootstrap particle-filter step.

    Particles are propagated through the transition plus a process-noise
    sample, reweighted by the Gaussian measurement likelihood (computed in
    log space with max-subtraction), and resampled per the spec's policy.

    Raises WeightDegeneracyError if every likelihood underflows.
    """
    n = b.particles.shape[0]
    chol = psd_factor(system.process_noise_cov)
    particles = (system.transition(b.particles, step_index, system.period)
                 + rng.standard_normal((n, system.state_dim)) @ chol)

    residual = np.atleast_1d(y) - system.measurement(particles)
    solved = np.linalg.solve(system.measurement_noise_cov, residual.T)
    # overflow to -inf is the degeneracy signal handled below, not an error
    with np.errstate(over="ignore", divide="ignore"):
        log_lik = -0.5 * np.sum(residual.T * solved, axis=0)
        log_w = np.log(b.weights) + log_lik
    shift = np.max(log_w)
    if not np.isfinite(shift):
        raise WeightDegeneracyError(step_index)
    weights = np.exp(log_w - shift)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise WeightDegeneracyError(step_index)
    weights /= total

    policy = spec.resample_policy
    if isinstance(policy, EveryStep) or ess(weights) < policy.fraction * n:
        idx = systematic_resample(weights, rng)
        particles = particles[idx]
        weights = np.full(n, 1.0 / n)
    return ParticleBelief(particles, weights)


def estimate(b: GaussianBelief | ParticleBelief) -> np.ndarray:
    """Point estimate: Gaussian mean, or the weighted particle mean."""
    if isinstance(b, GaussianBelief):
        return b.mean.copy()
    return b.weights @ b.particles


def default_prior(model: UngmModel | CvModel,
                  x0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Initial Gaussian belief shared by every filter on a given model.

    A fair comparison requires identical priors, so particle clouds are
    drawn from the same Gaussian the Kalman-style filters start from.
    """
    if isinstance(model, UngmModel):
        return np.zeros(1), np.array([[10.0]])
    if isinstance(model, CvModel):
        return np.asarray(x0, dtype=float).copy(), np.eye(4)
    raise TypeError(f"unknown model type: {type(model).__name__}")


def initial_belief(spec: FilterSpec, model: UngmModel | CvModel,
                   x0: np.ndarray,
                   rng: np.random.Generator | None = None):
    """Construct the starting belief for a filter spec on a model."""
    mean, cov = default_prior(model, x0)
    if spec.kind != "pf":
        return GaussianBelief(mean, cov)
    n = spec.particle_count
    particles = mean + rng.standard_normal((n, mean.shape[0])) @ psd_factor(cov)
    return ParticleBelief(particles, np.full(n, 1.0 / n))


def step_filter(belief, spec: FilterSpec, system: DiscreteSystem,
                step_index: int, y: np.ndarray,
                rng: np.random.Generator | None = None):
    """Advance any supported filter by one measurement."""
    if spec.kind == "kf":
        return kf_step(belief, system, y)
    if spec.kind == "ekf":
        return ekf_step(belief, system, step_index, y)
    return pf_step(belief, system, step_index, y, spec, rng)
