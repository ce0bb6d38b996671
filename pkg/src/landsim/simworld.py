"""Deterministic world surrogate for closed-loop landing trials.

Replaces the full robotics stack with a kinematic vehicle that tracks
velocity commands through first-order lags, a nadir-mounted pinhole
camera, and a synthetic feature generator that stands in for a real
keypoint detector/descriptor. Everything is a pure function of the
configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .controller import ControlCommand
from .homography import FeatureSet, Homography, TemplateSpec, estimate_homography_dlt

DESCRIPTOR_DIM = 32
TEMPLATE_GRID = 5  # template features form a GRID x GRID lattice


@dataclass
class VehicleState:
    """Ground-truth vehicle pose and realized velocities."""

    x: float = 0.0
    y: float = 0.0
    z: float = 3.5
    psi: float = 0.0       # yaw, deg
    vx: float = 0.0        # body-frame realized velocity, m/s
    vy: float = 0.0
    psi_rate: float = 0.0  # deg/s
    landed: bool = False


@dataclass
class CameraModel:
    f: float = 300.0
    cx: float = 320.0
    cy: float = 160.0
    image_w: float = 640.0
    image_h: float = 320.0

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if not (0 <= self.cx <= self.image_w and 0 <= self.cy <= self.image_h):
            raise ValueError("principal point must lie inside the image")


@dataclass
class NoiseModel:
    """Synthetic detector imperfections.

    sigma_px perturbs scene feature positions, descriptor_sigma the
    descriptor vectors; outlier_rate adds decoy features; dropout_rate
    replaces whole frames with decoys only (no true detection).
    """

    sigma_px: float = 0.0
    outlier_rate: float = 0.0
    dropout_rate: float = 0.0
    descriptor_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_px", "descriptor_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("outlier_rate", "dropout_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")


# qualitative stand-ins for the detector-descriptor variants; the
# ordering (sift best, surf worst) is what matters, not the numbers
NOISE_PRESETS = {
    "zero": NoiseModel(),
    "sift-like": NoiseModel(sigma_px=2.0, outlier_rate=0.15,
                            dropout_rate=0.05, descriptor_sigma=0.05),
    "orb-like": NoiseModel(sigma_px=3.5, outlier_rate=0.30,
                           dropout_rate=0.10, descriptor_sigma=0.10),
    "surf-like": NoiseModel(sigma_px=6.0, outlier_rate=0.40,
                            dropout_rate=0.15, descriptor_sigma=0.15),
}


@dataclass
class WindModel:
    """Exogenous velocity disturbance: constant bias plus Gaussian gusts."""

    bias: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gust_sigma: float = 0.0

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float).reshape(2)
        if self.gust_sigma < 0:
            raise ValueError("gust_sigma must be >= 0")


def pad_world_corners(pad_center: np.ndarray, pad_side: float,
                      pad_yaw_deg: float = 0.0) -> np.ndarray:
    """World xy of the pad's 4 corners (TL, TR, BR, BL in pad frame)."""
    half = pad_side / 2.0
    local = np.array([[-half, -half], [half, -half],
                      [half, half], [-half, half]])
    c, s = np.cos(np.radians(pad_yaw_deg)), np.sin(np.radians(pad_yaw_deg))
    rot = np.array([[c, -s], [s, c]])
    return pad_center + local @ rot.T


def camera_project(v: VehicleState, pad_center: np.ndarray, pad_side: float,
                   cam: CameraModel, pad_yaw_deg: float = 0.0,
                   ) -> tuple[np.ndarray, bool]:
    """Project the pad's corners and centroid into the nadir camera.

    The camera yaws rigidly with the vehicle; image axes are aligned
    with the body axes, so pixel offset = f * (body-frame offset) / z.
    Returns ((5, 2) pixels, out_of_view) where out_of_view is true when
    all four corners left the image.
    """
    if v.z <= 0.05:
        raise ValueError("camera too close to the ground to project")
    pad_center = np.asarray(pad_center, dtype=float).reshape(2)
    world_pts = np.vstack([
        pad_world_corners(pad_center, pad_side, pad_yaw_deg),
        pad_center,
    ])
    d = world_pts - np.array([v.x, v.y])
    c, s = np.cos(np.radians(v.psi)), np.sin(np.radians(v.psi))
    rot_wb = np.array([[c, s], [-s, c]])  # world -> body
    d_body = d @ rot_wb.T
    pixels = np.column_stack([
        cam.cx + cam.f * d_body[:, 0] / v.z,
        cam.cy + cam.f * d_body[:, 1] / v.z,
    ])
    corners = pixels[:4]
    inside = ((corners[:, 0] >= 0) & (corners[:, 0] <= cam.image_w)
              & (corners[:, 1] >= 0) & (corners[:, 1] <= cam.image_h))
    return pixels, not bool(inside.any())


def true_homography(v: VehicleState, pad_center: np.ndarray, pad_side: float,
                    cam: CameraModel, template: TemplateSpec,
                    pad_yaw_deg: float = 0.0) -> Homography:
    """Ground-truth template -> scene homography for the current pose.

    For the nadir geometry the template -> image map is affine:
    template pixel -> pad-local meters -> world -> body frame -> image.
    """
    pad_center = np.asarray(pad_center, dtype=float).reshape(2)
    s = np.diag([pad_side / template.w_t, pad_side / template.h_t])
    cp, sp = np.cos(np.radians(pad_yaw_deg)), np.sin(np.radians(pad_yaw_deg))
    r_pad = np.array([[cp, -sp], [sp, cp]])
    cv_, sv = np.cos(np.radians(v.psi)), np.sin(np.radians(v.psi))
    r_wb = np.array([[cv_, sv], [-sv, cv_]])  # world -> body

    m = (cam.f / v.z) * (r_wb @ r_pad @ s)
    center_px = np.array([cam.cx, cam.cy]) \
        + (cam.f / v.z) * (r_wb @ (pad_center - np.array([v.x, v.y])))
    c_t = np.array([template.w_t / 2.0, template.h_t / 2.0])

    h = np.eye(3)
    h[:2, :2] = m
    h[:2, 2] = center_px - m @ c_t
    return Homography(h)


def _template_grid(template: TemplateSpec) -> np.ndarray:
    xs = np.linspace(0.0, template.w_t, TEMPLATE_GRID)
    ys = np.linspace(0.0, template.h_t, TEMPLATE_GRID)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def synthesize_frame(truth_h: Homography, template: TemplateSpec,
                     nm: NoiseModel, frame_index: int,
                     cam: CameraModel) -> tuple[FeatureSet, FeatureSet]:
    """Generate one frame's template and scene feature sets.

    Template features sit on a fixed grid with descriptors drawn once
    per seed (frame-stable). Scene features are the grid mapped through
    the ground-truth homography plus pixel noise, with perturbed
    descriptors and decoy features mixed in. A dropout frame contains
    decoys only. Deterministic in (seed, frame_index).
    """
    desc_rng = np.random.default_rng([nm.seed, 0xFEA7])
    pts_t = _template_grid(template)
    n = len(pts_t)
    desc_t = desc_rng.normal(size=(n, DESCRIPTOR_DIM))
    tpl = FeatureSet(points=pts_t, descriptors=desc_t)

    rng = np.random.default_rng([nm.seed, frame_index])
    n_out = int(np.ceil(nm.outlier_rate * n))
    dropout = rng.random() < nm.dropout_rate

    def decoys(count):
        pts = rng.uniform([0, 0], [cam.image_w, cam.image_h], size=(count, 2))
        desc = rng.normal(size=(count, DESCRIPTOR_DIM))
        return pts, desc

    if dropout:
        pts_s, desc_s = decoys(max(n_out, 4))
        return tpl, FeatureSet(points=pts_s, descriptors=desc_s)

    ones = np.ones((n, 1))
    mapped = (truth_h.h @ np.hstack([pts_t, ones]).T).T
    pts_s = mapped[:, :2] / mapped[:, 2:3]
    pts_s = pts_s + rng.normal(scale=nm.sigma_px, size=pts_s.shape) \
        if nm.sigma_px > 0 else pts_s
    desc_s = desc_t + rng.normal(scale=nm.descriptor_sigma, size=desc_t.shape) \
        if nm.descriptor_sigma > 0 else desc_t.copy()

    if n_out > 0:
        dpts, ddesc = decoys(n_out)
        pts_s = np.vstack([pts_s, dpts])
        desc_s = np.vstack([desc_s, ddesc])
    return tpl, FeatureSet(points=pts_s, descriptors=desc_s)


def vehicle_step(v: VehicleState, cmd: ControlCommand, wind: WindModel,
                 dt: float, tau_v: float = 0.5, tau_z: float = 0.8,
                 gust_rng: np.random.Generator | None = None,
                 ) -> VehicleState:
    """Advance the vehicle one Euler step.

    Realized body velocities chase the commanded ones through a
    first-order lag; wind enters as an additive world-frame velocity
    disturbance; altitude tracks the commanded height through its own
    lag. A landed vehicle is frozen.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if v.landed:
        return v

    vx = v.vx + (cmd.u[0] - v.vx) * dt / tau_v
    vy = v.vy + (cmd.u[1] - v.vy) * dt / tau_v
    psi_rate = v.psi_rate + (cmd.u[2] - v.psi_rate) * dt / tau_v

    gust = np.zeros(2)
    if wind.gust_sigma > 0 and gust_rng is not None:
        gust = gust_rng.normal(scale=wind.gust_sigma, size=2)
    wind_v = wind.bias + gust

    c, s = np.cos(np.radians(v.psi)), np.sin(np.radians(v.psi))
    world_v = np.array([c * vx - s * vy, s * vx + c * vy]) + wind_v

    z = v.z + (cmd.u_z - v.z) * dt / tau_z
    z = max(z, 0.0)
    return VehicleState(
        x=v.x + world_v[0] * dt,
        y=v.y + world_v[1] * dt,
        z=z,
        psi=v.psi + psi_rate * dt,
        vx=vx, vy=vy, psi_rate=psi_rate,
        landed=cmd.landed,
    )
