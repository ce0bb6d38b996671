"""Trial orchestration, configuration, metrics, and CSV export.

Wires the full perception/estimation/control loop into deterministic,
seeded landing trials, aggregates multi-trial experiments, and writes
the resulting logs and summaries as CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import controller as ctl
from . import simworld as sw
from . import tracker as trk
from .errors import ConfigError, EmptyLog, IoFailure, LandSimError
from .homography import (
    TemplateSpec,
    match_descriptors,
    project_template,
    ransac_homography,
)
from .observation import ObservationGate, ObservationVector, observation_from_points

# channel order: x, y, psi
DEFAULT_GAINS = {
    "p": (
        ctl.PidGains(kp=0.008, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=0.008, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=1.0, out_min=-45.0, out_max=45.0),
    ),
    "pd": (
        ctl.PidGains(kp=0.03, kd=0.02, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=0.03, kd=0.02, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=1.5, kd=0.3, out_min=-45.0, out_max=45.0),
    ),
    "pid": (
        ctl.PidGains(kp=0.02, ki=0.002, kd=0.015, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=0.02, ki=0.002, kd=0.015, out_min=-1.0, out_max=1.0),
        ctl.PidGains(kp=1.2, ki=0.1, kd=0.2, out_min=-45.0, out_max=45.0),
    ),
}

TRIAL_COLUMNS = [
    "t", "gt_x", "gt_y", "gt_z", "gt_psi", "z_valid",
    "z_xc", "z_yc", "z_ow", "z_oh", "z_theta",
    "kf_xc", "kf_yc", "kf_ow", "kf_oh", "kf_theta",
    "e_x", "e_y", "e_theta", "u_vx", "u_vy", "u_psirate", "u_z", "event",
]

SUMMARY_COLUMNS = [
    "controller", "seed", "rmse_x_px", "rmse_y_px", "rmse_theta_deg",
    "std_x_px", "std_y_px", "std_theta_deg",
    "land_offset_x_m", "land_offset_y_m", "land_angle_deg",
    "touchdown_s", "success",
]


@dataclass
class TrialConfig:
    """Complete description of one landing trial."""

    controller_kind: str = "pd"
    gains: tuple = None
    camera: sw.CameraModel = field(default_factory=sw.CameraModel)
    template: TemplateSpec = field(
        default_factory=lambda: TemplateSpec(100.0, 100.0, physical_side=1.0))
    noise: sw.NoiseModel = field(
        default_factory=lambda: sw.NOISE_PRESETS["sift-like"])
    wind: sw.WindModel = field(default_factory=sw.WindModel)
    initial: sw.VehicleState = field(
        default_factory=lambda: sw.VehicleState(x=1.0, y=0.0, z=3.5, psi=20.0))
    pad_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    pad_yaw_deg: float = 0.0
    dt: float = 1.0 / 15.0
    max_duration: float = 60.0
    seed: int = 0
    match_ratio: float = 0.8
    ransac_threshold_px: float = 6.0
    ransac_iters: int = 500
    z_f: float = 0.02
    tau_v: float = 0.5
    tau_z: float = 0.8
    filter_cfg: trk.FilterConfig = None
    gate: ObservationGate = field(default_factory=ObservationGate)

    def __post_init__(self):
        self.controller_kind = self.controller_kind.lower()
        if self.controller_kind not in DEFAULT_GAINS:
            raise ConfigError(
                f"unknown controller kind: {self.controller_kind!r}")
        if self.gains is None:
            self.gains = DEFAULT_GAINS[self.controller_kind]
        if self.filter_cfg is None:
            self.filter_cfg = trk.FilterConfig(dt_default=self.dt)
        if self.max_duration <= 0:
            raise ConfigError("max_duration must be positive")
        self.pad_center = np.asarray(self.pad_center, dtype=float).reshape(2)


@dataclass
class StepRecord:
    t: float
    gt: sw.VehicleState
    z: ObservationVector | None
    z_valid: bool
    kf: np.ndarray | None   # first five filter states
    e: np.ndarray | None
    u: np.ndarray
    u_z: float
    event: str = ""


@dataclass
class TrialLog:
    cfg: TrialConfig
    steps: list
    touchdown_time: float | None = None
    timed_out: bool = False

    @property
    def success(self) -> bool:
        return self.touchdown_time is not None


@dataclass
class ErrorSummary:
    controller: str
    seed: int
    rmse: np.ndarray          # (3,) over e_x, e_y, e_theta
    std: np.ndarray           # (3,)
    land_offset_m: np.ndarray  # (2,)
    land_angle_deg: float
    touchdown_s: float | None
    success: bool


def _detect(cfg: TrialConfig, v: sw.VehicleState, frame: int,
            ) -> tuple[ObservationVector | None, bool]:
    """Run the full perception front end for one frame.

    Any failure (too few matches, no RANSAC consensus, degenerate
    geometry) yields no detection rather than an error; the tracker is
    expected to coast over such frames.
    """
    h_true = sw.true_homography(v, cfg.pad_center, cfg.template.physical_side,
                                cfg.camera, cfg.template, cfg.pad_yaw_deg)
    tpl, scene = sw.synthesize_frame(h_true, cfg.template, cfg.noise,
                                     frame, cfg.camera)
    try:
        ms = match_descriptors(tpl, scene, cfg.match_ratio)
        if len(ms) < 4:
            return None, False
        src = tpl.points[ms.pairs[:, 0]]
        dst = scene.points[ms.pairs[:, 1]]
        h_est, _ = ransac_homography(
            src, dst, cfg.ransac_threshold_px, cfg.ransac_iters,
            seed=cfg.seed * 1_000_003 + frame)
        pts = project_template(h_est, cfg.template)
        return observation_from_points(pts, cfg.camera.image_w,
                                       cfg.camera.image_h, cfg.gate)
    except LandSimError:
        return None, False


def run_trial(cfg: TrialConfig) -> TrialLog:
    """Run one closed-loop landing trial to touchdown or timeout."""
    v = replace(cfg.initial)
    nm = replace(cfg.noise, seed=cfg.seed)
    gust_rng = np.random.default_rng([cfg.seed, 0x317D])
    sp = ctl.Setpoint.for_image(cfg.camera.image_w, cfg.camera.image_h)
    cst = ctl.ControllerState(
        alt=ctl.AltitudeState(z_p=cfg.initial.z, z_f=cfg.z_f))
    cfg = replace(cfg, noise=nm)

    fs = None
    steps: list[StepRecord] = []
    touchdown = None
    n_steps = int(round(cfg.max_duration / cfg.dt))
    prev_zp = cst.alt.z_p
    for frame in range(n_steps):
        t = frame * cfg.dt
        if v.z <= 0.05:
            steps.append(StepRecord(t=t, gt=v, z=None, z_valid=False,
                                    kf=None, e=None, u=np.zeros(3),
                                    u_z=cst.alt.z_p, event="touchdown"))
            touchdown = t
            break

        z_raw, valid = _detect(cfg, v, frame)

        if fs is None:
            if valid:
                fs = trk.initialize_filter(z_raw, cfg.filter_cfg)
            else:
                # hold position until the first detection arrives
                hold = ctl.ControlCommand(u=np.zeros(3), u_z=cst.alt.z_p)
                steps.append(StepRecord(t=t, gt=v, z=z_raw, z_valid=valid,
                                        kf=None, e=None, u=hold.u,
                                        u_z=hold.u_z))
                v = sw.vehicle_step(v, hold, cfg.wind, cfg.dt,
                                    cfg.tau_v, cfg.tau_z, gust_rng)
                continue
        else:
            fs = trk.track_step(fs, z_raw if valid else None,
                                cfg.dt, cfg.filter_cfg)

        e = ctl.compute_error(sp, fs)
        cmd, cst = ctl.control_step(sp, fs, cfg.gains, cst, cfg.dt)

        event = ""
        if cmd.u_z < prev_zp and not any(
                s.event == "descent-start" for s in steps):
            event = "descent-start"
        prev_zp = cmd.u_z
        if cmd.landed:
            event = "touchdown"
            touchdown = t
        steps.append(StepRecord(t=t, gt=v, z=z_raw, z_valid=valid,
                                kf=fs.x[:5].copy(), e=e, u=cmd.u,
                                u_z=cmd.u_z, event=event))
        if cmd.landed:
            break
        v = sw.vehicle_step(v, cmd, cfg.wind, cfg.dt,
                            cfg.tau_v, cfg.tau_z, gust_rng)

    return TrialLog(cfg=cfg, steps=steps, touchdown_time=touchdown,
                    timed_out=touchdown is None)


def summarize_errors(log: TrialLog) -> ErrorSummary:
    """Per-trial error statistics over all pre-touchdown steps."""
    if not log.steps:
        raise EmptyLog("cannot summarize an empty trial log")
    errors = np.array([s.e for s in log.steps
                       if s.e is not None and s.event != "touchdown"])
    if len(errors):
        rmse = np.sqrt((errors ** 2).mean(axis=0))
        std = errors.std(axis=0)
    else:
        rmse = std = np.full(3, np.nan)

    final = log.steps[-1].gt
    offset = np.array([final.x, final.y]) - log.cfg.pad_center
    angle = abs(trk.wrap_angle_90(log.cfg.pad_yaw_deg - final.psi))
    return ErrorSummary(
        controller=log.cfg.controller_kind, seed=log.cfg.seed,
        rmse=rmse, std=std, land_offset_m=offset, land_angle_deg=angle,
        touchdown_s=log.touchdown_time, success=log.success,
    )


def run_experiment(base: TrialConfig, seeds: list[int],
                   ) -> tuple[list[TrialLog], list[ErrorSummary], dict]:
    """Run one trial per seed and aggregate the summaries.

    The aggregate dict carries mean landing statistics over successful
    trials plus the overall success rate.
    """
    if not seeds:
        raise ConfigError("need at least one seed")
    logs = [run_trial(replace(base, seed=s)) for s in seeds]
    summaries = [summarize_errors(log) for log in logs]
    ok = [s for s in summaries if s.success]
    agg = {
        "success_rate": len(ok) / len(summaries),
        "mean_offset_m": (np.mean([np.linalg.norm(s.land_offset_m) for s in ok])
                          if ok else np.nan),
        "mean_angle_deg": (np.mean([s.land_angle_deg for s in ok])
                           if ok else np.nan),
        "mean_touchdown_s": (np.mean([s.touchdown_s for s in ok])
                             if ok else np.nan),
    }
    return logs, summaries, agg


def truth_observation(cfg: TrialConfig, v: sw.VehicleState) -> ObservationVector:
    """Noise-free observation for a pose, via the geometric path."""
    pixels, _ = sw.camera_project(v, cfg.pad_center,
                                  cfg.template.physical_side, cfg.camera,
                                  cfg.pad_yaw_deg)
    z, _ = observation_from_points(pixels, cfg.camera.image_w,
                                   cfg.camera.image_h, cfg.gate)
    return z


def detector_noise_sweep(cfg: TrialConfig, presets: dict[str, sw.NoiseModel],
                         n_frames: int = 1000, seed: int = 0) -> dict:
    """Static-hover comparison of raw detections versus filter output.

    For each preset the vehicle holds the configured initial pose while
    the perception front end and tracker run; returns per-variable
    average and standard deviation of the absolute raw and filtered
    errors against the geometric ground truth.
    """
    if n_frames < 100:
        raise ConfigError("n_frames must be >= 100")
    v = cfg.initial
    truth = truth_observation(cfg, v).as_array()
    results = {}
    for name, preset in presets.items():
        pcfg = replace(cfg, noise=replace(preset, seed=seed), seed=seed)
        fs = None
        raw_err, filt_err = [], []
        for frame in range(n_frames):
            z_raw, valid = _detect(pcfg, v, frame)
            if valid:
                err = z_raw.as_array() - truth
                err[4] = trk.wrap_angle_90(err[4])
                raw_err.append(np.abs(err))
            if fs is None:
                if valid:
                    fs = trk.initialize_filter(z_raw, pcfg.filter_cfg)
            else:
                fs = trk.track_step(fs, z_raw if valid else None,
                                    pcfg.dt, pcfg.filter_cfg)
            if fs is not None:
                ferr = fs.x[:5] - truth
                ferr[4] = trk.wrap_angle_90(ferr[4])
                filt_err.append(np.abs(ferr))
        raw = np.array(raw_err) if raw_err else np.full((1, 5), np.nan)
        filt = np.array(filt_err) if filt_err else np.full((1, 5), np.nan)
        results[name] = {
            "raw_avg": raw.mean(axis=0), "raw_std": raw.std(axis=0),
            "filt_avg": filt.mean(axis=0), "filt_std": filt.std(axis=0),
            "n_valid": len(raw_err),
        }
    return results


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else f"{value:.9g}"
    return str(value)


def export_csv(header: list[str], rows: list[list], path) -> None:
    """Write rows as RFC-4180 CSV with floats at 9 significant digits."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def trial_rows(log: TrialLog) -> list[list]:
    """Flatten a trial log into TRIAL_COLUMNS order."""
    rows = []
    for s in log.steps:
        z = s.z.as_array() if s.z is not None else [np.nan] * 5
        kf = s.kf if s.kf is not None else [np.nan] * 5
        e = s.e if s.e is not None else [np.nan] * 3
        rows.append([
            s.t, s.gt.x, s.gt.y, s.gt.z, s.gt.psi, s.z_valid,
            *z, *kf, *e, s.u[0], s.u[1], s.u[2], s.u_z, s.event,
        ])
    return rows


def summary_rows(summaries: list[ErrorSummary]) -> list[list]:
    rows = []
    for s in summaries:
        rows.append([
            s.controller, s.seed, *s.rmse, *s.std, *s.land_offset_m,
            s.land_angle_deg,
            s.touchdown_s if s.touchdown_s is not None else np.nan,
            s.success,
        ])
    return rows


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _gains_from_table(table: dict, defaults: tuple) -> tuple:
    out = []
    for channel, default in zip(("x", "y", "psi"), defaults):
        sub = table.get(channel, {})
        out.append(ctl.PidGains(
            kp=sub.get("kp", default.kp), ki=sub.get("ki", default.ki),
            kd=sub.get("kd", default.kd),
            out_min=sub.get("out_min", default.out_min),
            out_max=sub.get("out_max", default.out_max),
            deriv_tau=sub.get("deriv_tau", default.deriv_tau),
        ))
    return tuple(out)


def load_config(path, overrides: dict | None = None) -> TrialConfig:
    """Build a TrialConfig from a TOML file.

    Every key is optional; missing values fall back to package
    defaults. ``overrides`` replaces top-level trial fields after
    parsing (used by the CLI flags).
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc

    try:
        trial = _section(data, "trial")
        cam_t = _section(data, "camera")
        camera = sw.CameraModel(
            f=cam_t.get("f", 300.0), cx=cam_t.get("cx", 320.0),
            cy=cam_t.get("cy", 160.0), image_w=cam_t.get("image_w", 640.0),
            image_h=cam_t.get("image_h", 320.0))
        tpl_t = _section(data, "template")
        template = TemplateSpec(
            w_t=tpl_t.get("w_t", 100.0), h_t=tpl_t.get("h_t", 100.0),
            physical_side=tpl_t.get("physical_side", 1.0))
        noise_t = _section(data, "noise")
        preset = noise_t.get("preset", "sift-like")
        if preset not in sw.NOISE_PRESETS:
            raise ConfigError(f"unknown noise preset: {preset!r}")
        base_nm = sw.NOISE_PRESETS[preset]
        noise = sw.NoiseModel(
            sigma_px=noise_t.get("sigma_px", base_nm.sigma_px),
            outlier_rate=noise_t.get("outlier_rate", base_nm.outlier_rate),
            dropout_rate=noise_t.get("dropout_rate", base_nm.dropout_rate),
            descriptor_sigma=noise_t.get("descriptor_sigma",
                                         base_nm.descriptor_sigma))
        wind_t = _section(data, "wind")
        wind = sw.WindModel(
            bias=np.asarray(wind_t.get("bias", [0.0, 0.0]), dtype=float),
            gust_sigma=wind_t.get("gust_sigma", 0.0))
        init_t = _section(data, "initial")
        initial = sw.VehicleState(
            x=init_t.get("x", 1.0), y=init_t.get("y", 0.0),
            z=init_t.get("z", 3.5), psi=init_t.get("psi", 20.0))
        pad_t = _section(data, "pad")
        vision = _section(data, "vision")
        filt_t = _section(data, "filter")
        dt = 1.0 / trial.get("rate_hz", 15.0)
        fcfg = trk.FilterConfig(
            dt_default=dt,
            q=np.diag(filt_t["q_diag"]) if "q_diag" in filt_t else None,
            r=np.diag(filt_t["r_diag"]) if "r_diag" in filt_t else None,
            p0=(filt_t.get("p0_scale", 100.0) * np.eye(trk.N_STATES)))
        kind = trial.get("controller", "pd").lower()
        if kind not in DEFAULT_GAINS:
            raise ConfigError(f"unknown controller kind: {kind!r}")
        gains_t = _section(data, "gains").get(kind, {})
        gains = _gains_from_table(gains_t, DEFAULT_GAINS[kind])

        cfg = TrialConfig(
            controller_kind=kind, gains=gains, camera=camera,
            template=template, noise=noise, wind=wind, initial=initial,
            pad_center=np.asarray(pad_t.get("center", [0.0, 0.0]),
                                  dtype=float),
            pad_yaw_deg=pad_t.get("yaw_deg", 0.0),
            dt=dt,
            max_duration=trial.get("max_duration", 60.0),
            seed=trial.get("seed", 0),
            match_ratio=vision.get("ratio", 0.8),
            ransac_threshold_px=vision.get("ransac_threshold_px", 6.0),
            ransac_iters=vision.get("ransac_iters", 500),
            z_f=trial.get("z_f", 0.02),
            tau_v=trial.get("tau_v", 0.5),
            tau_z=trial.get("tau_z", 0.8),
            filter_cfg=fcfg)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc

    overrides = overrides or {}
    if "controller" in overrides:
        kind = overrides["controller"].lower()
        if kind not in DEFAULT_GAINS:
            raise ConfigError(f"unknown controller kind: {kind!r}")
        gains = _gains_from_table(_section(data, "gains").get(kind, {}),
                                  DEFAULT_GAINS[kind])
        cfg = replace(cfg, controller_kind=kind, gains=gains)
    if "seed" in overrides:
        cfg = replace(cfg, seed=int(overrides["seed"]))
    return cfg
