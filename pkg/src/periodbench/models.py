"""Benchmark state-space systems with period-dependent transition noise.

Two standard simulation systems are provided: a scalar nonstationary growth
model and a planar (nearly) constant-velocity tracker. Both are built as a
function of the sampling period ``t`` of the filter under test. The
deterministic maps keep their textbook per-step form; what scales with ``t``
is the transition-noise covariance (Brownian-increment scaling ``q*t`` for
the scalar model, the ``G(t) diag(sigma^2) G(t)^T`` construction for the
tracker). Building either system at ``t = 1`` reproduces the usual
fixed-noise benchmark settings (variance 10 for the growth model,
sigma1 = 1 / sigma2 = 0.1 for the tracker).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class UngmModel:
    """Scalar nonstationary growth model.

    ``q`` is the diffusion intensity: noise variance accrued per unit of
    simulation time, so the transition variance at period ``t`` is ``q * t``
    and ``q = 10`` recovers the conventional benchmark variance at ``t = 1``.
    """

    q: float = 10.0
    meas_noise_var: float = 1.0
    forcing_amplitude: float = 8.0
    forcing_rate: float = 1.2

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.meas_noise_var <= 0:
            raise ValueError("meas_noise_var must be positive")


@dataclass(frozen=True)
class CvModel:
    """Planar constant-velocity tracker with per-axis white accelerations.

    State layout is [pos1, vel1, pos2, vel2]; positions are observed
    directly with independent per-axis noise of variance ``meas_noise_var``.
    """

    sigma1: float = 1.0
    sigma2: float = 0.1
    meas_noise_var: float = 1.0

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigma1 and sigma2 must be positive")
        if self.meas_noise_var <= 0:
            raise ValueError("meas_noise_var must be positive")


# Position-only observation matrix for the constant-velocity state layout.
CV_MEAS_MATRIX = np.array([[1.0, 0.0, 0.0, 0.0],
                           [0.0, 0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class DiscreteSystem:
    """A fully specified discrete-time system at a fixed sampling period.

    ``transition(state, step_index, period)`` is the deterministic part of
    the state update (vectorized over leading axes); ``measurement(state)``
    maps states to noise-free predicted measurements. Both are pure.
    """

    state_dim: int
    meas_dim: int
    transition: Callable[[np.ndarray, int, float], np.ndarray]
    process_noise_cov: np.ndarray
    measurement: Callable[[np.ndarray], np.ndarray]
    measurement_noise_cov: np.ndarray
    period: float

    def __post_init__(self):
        object.__setattr__(self, "process_noise_cov",
                           np.asarray(self.process_noise_cov, dtype=float))
        object.__setattr__(self, "measurement_noise_cov",
                           np.asarray(self.measurement_noise_cov, dtype=float))
        if self.period <= 0:
            raise ValueError("period must be positive")
        _check_psd(self.process_noise_cov, self.state_dim, "process_noise_cov")
        _check_psd(self.measurement_noise_cov, self.meas_dim,
                   "measurement_noise_cov")


@dataclass(frozen=True)
class Trajectory:
    """Ground-truth states on a uniform step grid, index 0..K."""

    period: float
    states: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class MeasurementSequence:
    """Per-step observations, index 1..K (one per filter iteration)."""

    measurements: np.ndarray

    def __post_init__(self):
        meas = np.atleast_2d(np.asarray(self.measurements, dtype=float))
        object.__setattr__(self, "measurements", meas)

    def __len__(self):
        return self.measurements.shape[0]


def _check_psd(cov: np.ndarray, dim: int, name: str) -> None:
    if cov.shape != (dim, dim):
        raise ValueError(f"{name} must be {dim}x{dim}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-9, atol=0.0):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(cov)
    # tolerance relative to scale: exact-zero eigenvalues come out as tiny
    # negatives from eigh once entries reach O(10^3)
    tol = 1e-12 * max(1.0, float(np.trace(cov)))
    if eigs.min() < -tol:
        raise ValueError(f"{name} is not positive semidefinite")


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, for noise sampling.

    Eigenvalues in [-tol, 0) are clamped to 0 so that degenerate
    covariances (e.g. short-period limits) remain usable.
    """
    cov = np.asarray(cov, dtype=float)
    eigvals, eigvecs = np.linalg.eigh(cov)
    tol = 1e-12 * max(1.0, float(np.trace(cov)))
    if eigvals.min() < -tol:
        raise ValueError("covariance is not positive semidefinite")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def ungm_drift(x, step_index: int, period: float, model: UngmModel):
    """Deterministic part of the growth-model step from k-1 to k.

    The oscillatory forcing is evaluated at continuous time (k-1)*t so the
    phase advances with the true elapsed time; at t = 1 this is the familiar
    per-step form. Elementwise over array inputs.
    """
    phase = model.forcing_rate * ((step_index - 1) * period)
    return (x / 2.0 + 25.0 * x / (1.0 + x * x)
            + model.forcing_amplitude * np.cos(phase))


def ungm_transition_variance(model: UngmModel, period: float) -> float:
    """Transition-noise variance accrued over one period: q * t."""
    return model.q * period


def cv_transition_matrix(period: float) -> np.ndarray:
    """State transition matrix for the constant-velocity model."""
    t = float(period)
    return np.array([[1.0, t, 0.0, 0.0],
                     [0.0, 1.0, 0.0, 0.0],
                     [0.0, 0.0, 1.0, t],
                     [0.0, 0.0, 0.0, 1.0]])


def cv_noise_input_matrix(period: float) -> np.ndarray:
    """Maps per-axis white accelerations into the position/velocity state."""
    t = float(period)
    h = t * t / 2.0
    return np.array([[h, 0.0],
                     [t, 0.0],
                     [0.0, h],
                     [0.0, t]])


def cv_process_cov(model: CvModel, period: float) -> np.ndarray:
    """Process-noise covariance G(t) diag(sigma1^2, sigma2^2) G(t)^T."""
    g = cv_noise_input_matrix(period)
    return g @ np.diag([model.sigma1 ** 2, model.sigma2 ** 2]) @ g.T


def default_initial_state(model: UngmModel | CvModel) -> np.ndarray:
    """Fixed truth start, identical for every filter being compared."""
    if isinstance(model, UngmModel):
        return np.zeros(1)
    if isinstance(model, CvModel):
        return np.array([0.0, 1.0, 0.0, 1.0])
    raise TypeError(f"unknown model type: {type(model).__name__}")


def build_system(model: UngmModel | CvModel, period: float) -> DiscreteSystem:
    """Assemble the discrete system for a model at a given sampling period.

    The process-noise covariance is the period-scaled one; measurement noise
    is per-sample sensor noise and does not depend on the period.
    """
    t = float(period)
    if t <= 0:
        raise ValueError("period must be positive")
    if isinstance(model, UngmModel):
        def transition(state, step_index, period):
            return ungm_drift(state, step_index, period, model)

        def measurement(state):
            return state * state / 20.0

        return DiscreteSystem(
            state_dim=1,
            meas_dim=1,
            transition=transition,
            process_noise_cov=np.array([[ungm_transition_variance(model, t)]]),
            measurement=measurement,
            measurement_noise_cov=np.array([[model.meas_noise_var]]),
            period=t,
        )
    if isinstance(model, CvModel):
        def transition(state, step_index, period):
            return state @ cv_transition_matrix(period).T

        def measurement(state):
            return state[..., (0, 2)]

        return DiscreteSystem(
            state_dim=4,
            meas_dim=2,
            transition=transition,
            process_noise_cov=cv_process_cov(model, t),
            measurement=measurement,
            measurement_noise_cov=model.meas_noise_var * np.eye(2),
            period=t,
        )
    raise TypeError(f"unknown model type: {type(model).__name__}")


def simulate_truth(system: DiscreteSystem, x0: np.ndarray, steps: int,
                   rng: np.random.Generator) -> Trajectory:
    """Simulate the ground-truth trajectory for ``steps`` iterations.

    Args:
        system: system to simulate, noise drawn from its process covariance.
        x0: initial state, shape (state_dim,).
        steps: number of transitions; the result holds steps + 1 states.
        rng: seeded generator; same seed gives the same trajectory.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.state_dim,):
        raise ValueError(
            f"x0 must have shape ({system.state_dim},), got {x0.shape}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    chol = psd_factor(system.process_noise_cov)
    states = np.empty((steps + 1, system.state_dim))
    states[0] = x0
    for k in range(1, steps + 1):
        drift = system.transition(states[k - 1], k, system.period)
        states[k] = drift + rng.standard_normal(system.state_dim) @ chol
    return Trajectory(period=system.period, states=states)


def generate_measurements(system: DiscreteSystem, traj: Trajectory,
                          rng: np.random.Generator) -> MeasurementSequence:
    """Observe a trajectory: y_k = measurement(x_k) + noise, k = 1..K."""
    if traj.states.shape[1] != system.state_dim:
        raise ValueError(
            f"trajectory state dim {traj.states.shape[1]} does not match "
            f"system state dim {system.state_dim}")
    clean = system.measurement(traj.states[1:])
    chol = psd_factor(system.measurement_noise_cov)
    noise = rng.standard_normal(clean.shape) @ chol
    return MeasurementSequence(measurements=clean + noise)
