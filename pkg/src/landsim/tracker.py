"""Linear Kalman filter over the 10-state template model.

State: [x_c, y_c, O_w, O_h, theta, and their rates]. Prediction runs
every frame; correction only when a valid detection arrives. The
observation matrix selects the first five states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDt, SingularInnovation
from .observation import ObservationVector

N_STATES = 10
N_OBS = 5

# observation matrix: the five measured states, no rates
H_OBS = np.hstack([np.eye(N_OBS), np.zeros((N_OBS, N_OBS))])

_THETA = 4  # index of the angle component in both X and Z


@dataclass
class FilterState:
    """State mean (10,) and covariance (10, 10)."""

    x: np.ndarray
    p: np.ndarray


def _default_q(dt: float) -> np.ndarray:
    return np.diag([1, 1, 1, 1, 0.1, 10, 10, 10, 10, 1.0]) * dt


@dataclass
class FilterConfig:
    """Noise covariances and defaults for the tracker.

    The defaults assume observation noise of a few pixels and loose
    velocity process noise; override per experiment.
    """

    dt_default: float = 1.0 / 15.0
    q: np.ndarray = None
    r: np.ndarray = None
    p0: np.ndarray = None

    def __post_init__(self):
        if self.q is None:
            self.q = _default_q(self.dt_default)
        if self.r is None:
            self.r = np.diag([25.0, 25.0, 25.0, 25.0, 4.0])
        if self.p0 is None:
            self.p0 = 100.0 * np.eye(N_STATES)
        self.q = np.asarray(self.q, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)


@dataclass
class Innovation:
    """Residual, innovation covariance, and Kalman gain of one update."""

    y: np.ndarray  # (5,)
    s: np.ndarray  # (5, 5)
    k: np.ndarray  # (10, 5)


def wrap_angle_90(delta: float) -> float:
    """Shortest signed distance on the 90-degree-periodic circle, (-45, 45]."""
    wrapped = float(delta) % 90.0
    if wrapped > 45.0:
        wrapped -= 90.0
    return wrapped


def make_transition(dt: float) -> np.ndarray:
    """Constant-velocity transition matrix [[I, dt*I], [0, I]]."""
    if dt <= 0:
        raise NonPositiveDt(f"dt must be > 0, got {dt}")
    a = np.eye(N_STATES)
    a[:N_OBS, N_OBS:] = dt * np.eye(N_OBS)
    return a


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def initialize_filter(first_detection: ObservationVector,
                      cfg: FilterConfig) -> FilterState:
    x = np.zeros(N_STATES)
    x[:N_OBS] = first_detection.as_array()
    return FilterState(x=x, p=cfg.p0.copy())


def predict(state: FilterState, dt: float, cfg: FilterConfig) -> FilterState:
    """Time update: x <- A x, P <- A P A' + Q."""
    a = make_transition(dt)
    x = a @ state.x
    p = _symmetrize(a @ state.p @ a.T + cfg.q)
    return FilterState(x=x, p=p)


def correct(predicted: FilterState, z: ObservationVector,
            cfg: FilterConfig) -> tuple[FilterState, Innovation]:
    """Measurement update with the standard gain and covariance equations.

    The angle residual is wrapped on the 90-degree circle; the covariance
    update is (I - K H) P followed by symmetrization.
    """
    y = z.as_array() - H_OBS @ predicted.x
    y[_THETA] = wrap_angle_90(y[_THETA])

    s = H_OBS @ predicted.p @ H_OBS.T + cfg.r
    if np.linalg.cond(s) > 1e12:
        raise SingularInnovation("innovation covariance is near-singular")
    k = predicted.p @ H_OBS.T @ np.linalg.inv(s)

    x = predicted.x + k @ y
    p = _symmetrize((np.eye(N_STATES) - k @ H_OBS) @ predicted.p)
    return FilterState(x=x, p=p), Innovation(y=y, s=s, k=k)


def track_step(state: FilterState, detection: ObservationVector | None,
               dt: float, cfg: FilterConfig) -> FilterState:
    """One tracker cycle: predict always, correct when a detection exists.

    ``detection`` must already have passed the observation validity
    gate; pass None for frames with no (or invalid) detection.
    """
    predicted = predict(state, dt, cfg)
    if detection is None:
        return predicted
    corrected, _ = correct(predicted, detection, cfg)
    return corrected
