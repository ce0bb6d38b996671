"""Image-based landing controller.

Three discrete PID channels on (x_c, y_c, theta), a bang-bang altitude
law gated on the tracked pad looking square, and the terminal landing
check. All controller state lives in plain values advanced by pure
transition functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tracker import FilterState, wrap_angle_90

SQUARE_GATE_PX = 5.0     # |O_w - O_h| below this counts as "square"
DESCENT_FLOOR_M = 0.2    # bang-bang law never commands below this
LAND_CENTER_PX = 20.0    # max |e_x|, |e_y| at the terminal check


@dataclass
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    out_min: float = -1.0
    out_max: float = 1.0
    deriv_tau: float = 0.0  # first-order derivative filter, 0 disables

    def __post_init__(self):
        if not self.out_min < self.out_max:
            raise ValueError("out_min must be < out_max")


@dataclass
class PidState:
    """Discretization memory for one PID channel."""

    integral: float = 0.0
    prev_error: float = 0.0
    prev_deriv: float = 0.0
    initialized: bool = False


@dataclass
class Setpoint:
    """Image-frame reference: frame center and zero angle."""

    sp: np.ndarray  # (3,) = [I_w/2, I_h/2, 0]

    @classmethod
    def for_image(cls, image_w: float, image_h: float) -> "Setpoint":
        return cls(sp=np.array([image_w / 2.0, image_h / 2.0, 0.0]))


@dataclass
class ControlCommand:
    u: np.ndarray       # (3,) = [vx, vy, psi_rate] (m/s, m/s, deg/s)
    u_z: float          # commanded altitude (m)
    landed: bool = False


@dataclass
class AltitudeState:
    """Bang-bang descent memory: current height command and step size."""

    z_p: float
    z_f: float = 0.02
    landed: bool = False

    def __post_init__(self):
        if self.z_p < 0:
            raise ValueError("z_p must be >= 0")
        if self.z_f <= 0:
            raise ValueError("z_f must be > 0")


def compute_error(sp: Setpoint, x: FilterState) -> np.ndarray:
    """e = setpoint - (x_c, y_c, theta); angle wrapped to (-45, 45]."""
    e = sp.sp - x.x[:3].copy()
    e[2] = sp.sp[2] - x.x[4]
    e[2] = wrap_angle_90(e[2])
    return e


def pid_step(gains: PidGains, st: PidState, error: float,
             dt: float) -> tuple[float, PidState]:
    """One discrete PID update with trapezoidal integration.

    The derivative is a backward difference, optionally smoothed by a
    first-order filter with time constant ``deriv_tau``. The first call
    treats prev_error as the current error (zero derivative). The
    integral is clamped so the I term alone cannot exceed the output
    bounds (anti-windup).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")

    prev = error if not st.initialized else st.prev_error
    integral = st.integral + 0.5 * (error + prev) * dt
    if gains.ki != 0.0:
        integral = float(np.clip(integral, gains.out_min / gains.ki,
                                 gains.out_max / gains.ki)
                         if gains.ki > 0 else
                         np.clip(integral, gains.out_max / gains.ki,
                                 gains.out_min / gains.ki))

    raw_deriv = (error - prev) / dt
    if gains.deriv_tau > 0:
        alpha = dt / (gains.deriv_tau + dt)
        deriv = st.prev_deriv + alpha * (raw_deriv - st.prev_deriv)
    else:
        deriv = raw_deriv

    out = gains.kp * error + gains.ki * integral + gains.kd * deriv
    out = float(np.clip(out, gains.out_min, gains.out_max))
    return out, PidState(integral=integral, prev_error=error,
                         prev_deriv=deriv, initialized=True)


def altitude_step(alt: AltitudeState, x: FilterState) -> float:
    """Bang-bang descent: step the height command down only while the
    tracked pad looks square and the command is above the floor."""
    o_w, o_h = x.x[2], x.x[3]
    if abs(o_w - o_h) < SQUARE_GATE_PX and alt.z_p > DESCENT_FLOOR_M:
        return alt.z_p - alt.z_f
    return alt.z_p


def landing_check(u_z: float, e: np.ndarray) -> bool:
    """Terminal condition: at the floor height and centered on the pad."""
    return u_z <= DESCENT_FLOOR_M and abs(e[0]) < LAND_CENTER_PX \
        and abs(e[1]) < LAND_CENTER_PX


@dataclass
class ControllerState:
    """Full controller memory: three PID channels plus the altitude law."""

    pid_x: PidState = field(default_factory=PidState)
    pid_y: PidState = field(default_factory=PidState)
    pid_psi: PidState = field(default_factory=PidState)
    alt: AltitudeState = field(default_factory=lambda: AltitudeState(z_p=3.5))


def control_step(sp: Setpoint, x: FilterState,
                 gains: tuple[PidGains, PidGains, PidGains],
                 st: ControllerState, dt: float,
                 axis_signs: np.ndarray | None = None,
                 ) -> tuple[ControlCommand, ControllerState]:
    """One controller cycle: errors -> PIDs -> altitude law -> land check.

    ``axis_signs`` maps image-plane PID outputs onto body-frame velocity
    commands; the default (-1, -1, -1) matches a nadir camera whose
    image axes are aligned with the body axes (positive pixel error
    means the pad sits at negative body offset).
    """
    if axis_signs is None:
        axis_signs = np.array([-1.0, -1.0, -1.0])

    if st.alt.landed:
        cmd = ControlCommand(u=np.zeros(3), u_z=0.0, landed=True)
        return cmd, st

    e = compute_error(sp, x)
    u_z = altitude_step(st.alt, x)
    landed = landing_check(u_z, e)
    if landed:
        u_z = 0.0

    ux, px = pid_step(gains[0], st.pid_x, e[0], dt)
    uy, py = pid_step(gains[1], st.pid_y, e[1], dt)
    upsi, ppsi = pid_step(gains[2], st.pid_psi, e[2], dt)

    u = axis_signs * np.array([ux, uy, upsi])
    new_alt = replace(st.alt, z_p=u_z, landed=landed)
    new_st = ControllerState(pid_x=px, pid_y=py, pid_psi=ppsi, alt=new_alt)
    return ControlCommand(u=u, u_z=u_z, landed=landed), new_st
