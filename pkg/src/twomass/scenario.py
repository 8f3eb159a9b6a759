"""Declarative experiment description: schedules, filter/gain/design
parameters, reference, reset policy, and simulation controls.

A Scenario is the validated form consumed by the harness.  Configs are plain
JSON with key names mirroring the symbols used throughout the package
(theta1, omega_d, f_max, ...); every numeric event time must sit on the
fixed-step grid.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .adapt import GainSchedule
from .control import ReferenceSpec, ResetPolicy
from .drem import FilterConfig, solve_disturbance_injection
from .gains import DesignSpec
from .observer import filter_injection_gain, place_output_injection
from .plant import ExoModel, Theta


class ConfigError(ValueError):
    """Invalid scenario configuration; message lists every problem found."""


def _on_grid(t: float, dt: float) -> bool:
    k = round(t / dt)
    return abs(t - k * dt) <= 1e-9 * max(1.0, abs(t))


@dataclass
class Scenario:
    theta_times: np.ndarray
    theta_values: np.ndarray          # (m, 3)
    delta_times: np.ndarray
    delta_values: np.ndarray
    exo: ExoModel
    filters: FilterConfig
    observer_L: np.ndarray
    gains: GainSchedule
    floor_eta: float
    floor_stage: float
    design: DesignSpec
    reference: ReferenceSpec
    reset: ResetPolicy
    t_eps: float
    dt: float
    t_final: float
    decimate: int = 1
    kappa_hat0: np.ndarray = field(default_factory=lambda: np.zeros(4))
    adaptation_on: bool = True
    dither_on: bool = True
    supervisor_on: bool = True

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def theta_at(self, t: float) -> Theta:
        idx = int(np.searchsorted(self.theta_times, t, side="right") - 1)
        row = self.theta_values[max(idx, 0)]
        return Theta(row[0], row[1], row[2])

    def delta_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.delta_times, t, side="right") - 1)
        return float(self.delta_values[max(idx, 0)])


def default_config() -> dict:
    """The bundled experiment: two-mass drive with a load-inertia switch at
    t = 11 s and a load-torque sign flip at t = 27 s."""
    return {
        "theta_schedule": [
            {"t": 0.0, "theta": [0.203, 0.203, 0.0026]},
            {"t": 11.0, "theta": [0.203, 0.35525, 0.0026]},
        ],
        "delta_schedule": [
            {"t": 0.0, "value": 0.5},
            {"t": 27.0, "value": -0.5},
        ],
        "exo": {"A_delta": [[0.0]], "h_delta": [1.0]},
        "filters": {
            "filter_poles": [-50.0, -50.0, -50.0],
            "observer_poles": [-50.0, -50.0, -50.0],
            "G": [[-5.0]],
            "l": [5.0],
            "beta": [1.0],
            "k1": 25.0,
            "sigma": 5.0,
            "k_amp": 1e63,
            "t_eps": 2.0,
        },
        "gains": {
            "gamma0": 1e-11,
            "gamma1": 1.0,
            "rho": 1e-9,
            "mode": "paper",
            "floor_eta": 1e-3,
            "floor_stage": 1e-30,
            "theta_prior_box": [[0.1, 2.0], [0.1, 2.0], [0.001, 0.1]],
        },
        "design": {"omega_d": 25.0, "xi_d": 0.7},
        "reference": {
            "square_amplitude": 1.0,
            "square_period": 5.0,
            "dither": {"alpha": 1.0, "amplitudes": [0.15],
                       "frequencies": [10.0]},
        },
        "reset": {"f_max": 0.01, "refractory": 1.0},
        "init": {"kappa_hat": [60.0, -1.5, 0.0, 0.0]},
        "sim": {"dt": 1e-4, "t_final": 40.0, "decimate": 1},
        "toggles": {"adaptation_on": True, "dither_on": True,
                    "supervisor_on": True},
    }


def scenario_from_config(cfg: dict) -> Scenario:
    """Validate a config dict and build the Scenario; raises ConfigError."""
    errors = []
    sim = cfg.get("sim", {})
    dt = float(sim.get("dt", 1e-4))
    t_final = float(sim.get("t_final", 40.0))
    decimate = int(sim.get("decimate", 1))
    if dt <= 0.0:
        errors.append("sim.dt must be > 0")
        dt = 1e-4
    if t_final <= 0.0:
        errors.append("sim.t_final must be > 0")
    if not _on_grid(t_final, dt):
        errors.append("sim.t_final must be a multiple of dt")
    n_steps = int(round(t_final / dt))
    if decimate < 1:
        errors.append("sim.decimate must be >= 1")
    elif n_steps % max(decimate, 1) != 0:
        errors.append("sim.decimate must divide the step count")

    def grid_times(rows, what):
        times = [float(r["t"]) for r in rows]
        if not times or times[0] != 0.0:
            errors.append(f"{what} must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            errors.append(f"{what} times must be strictly increasing")
        for t in times:
            if not _on_grid(t, dt):
                errors.append(f"{what} time {t} is not a multiple of dt")
            if t >= t_final and t != 0.0:
                errors.append(f"{what} time {t} is past t_final")
        return np.array(times)

    th_rows = cfg.get("theta_schedule", [])
    theta_times = grid_times(th_rows, "theta_schedule")
    theta_values = np.array([[float(v) for v in r["theta"]] for r in th_rows]
                            ) if th_rows else np.zeros((0, 3))
    for row in theta_values:
        if row.shape != (3,) or np.any(row <= 0.0):
            errors.append("every theta row must be three positive values")

    dl_rows = cfg.get("delta_schedule", [{"t": 0.0, "value": 0.0}])
    delta_times = grid_times(dl_rows, "delta_schedule")
    delta_values = np.array([float(r["value"]) for r in dl_rows])

    exo_cfg = cfg.get("exo", {"A_delta": [[0.0]], "h_delta": [1.0]})
    try:
        exo = ExoModel(A_delta=np.array(exo_cfg["A_delta"], dtype=float),
                       h_delta=np.array(exo_cfg["h_delta"], dtype=float),
                       x_delta0=np.atleast_1d(np.array(
                           exo_cfg.get("x_delta0", delta_values[0]),
                           dtype=float)))
    except ValueError as e:
        errors.append(str(e))
        exo = ExoModel(np.zeros((1, 1)), np.ones(1), np.zeros(1))
    nd = exo.n_delta
    if nd != 1 or exo.A_delta[0, 0] != 0.0:
        errors.append("the harness supports the constant-class exosystem "
                      "(scalar A_delta = 0); general exosystems are available "
                      "at the filter-bank level")

    flt = cfg.get("filters", {})
    t_eps = float(flt.get("t_eps", 2.0))
    if not _on_grid(t_eps, dt) or t_eps < 0.0 or t_eps >= t_final:
        errors.append("filters.t_eps must lie on the dt grid inside the run")
    try:
        Kv = filter_injection_gain(flt.get("filter_poles", [-50.0] * 3))
    except ValueError as e:
        errors.append(f"filter_poles: {e}")
        Kv = filter_injection_gain([-50.0] * 3)
    try:
        Lv = place_output_injection(flt.get("observer_poles", [-50.0] * 3))
    except ValueError as e:
        errors.append(f"observer_poles: {e}")
        Lv = place_output_injection([-50.0] * 3)

    G = np.atleast_2d(np.array(flt.get("G", [[-5.0]]), dtype=float))
    lvec = np.atleast_1d(np.array(flt.get("l", [5.0]), dtype=float))
    if "beta" in flt:
        beta = np.atleast_1d(np.array(flt["beta"], dtype=float))
        M_delta = None
    else:
        try:
            beta, M_delta = solve_disturbance_injection(
                G, lvec, exo.A_delta, exo.h_delta)
        except (ValueError, np.linalg.LinAlgError) as e:
            errors.append(f"filters.beta missing and not solvable: {e}")
            beta, M_delta = np.ones(nd), None
    eig_g = np.linalg.eigvals(G)
    eig_a = np.linalg.eigvals(exo.A_delta)
    if any(np.min(np.abs(eig_a - g)) < 1e-9 for g in eig_g):
        errors.append("spectra of G and A_delta must be disjoint")
    try:
        filters = FilterConfig(K=Kv, G=G, l=lvec, beta=beta,
                               h_delta=exo.h_delta,
                               k1=float(flt.get("k1", 25.0)),
                               sigma=float(flt.get("sigma", 5.0)),
                               k_amp=float(flt.get("k_amp", 1e63)),
                               M_delta=M_delta)
    except ValueError as e:
        errors.append(str(e))
        filters = None

    gn = cfg.get("gains", {})
    gamma0 = float(gn.get("gamma0", 1e-11))
    gamma1 = float(gn.get("gamma1", 1.0))
    box = np.array(gn.get("theta_prior_box",
                          [[0.1, 2.0], [0.1, 2.0], [0.001, 0.1]]), dtype=float)
    if box.shape != (3, 2) or np.any(box <= 0.0) or np.any(box[:, 0] > box[:, 1]):
        errors.append("theta_prior_box must be three positive [lo, hi] pairs")
        box = np.array([[0.1, 2.0], [0.1, 2.0], [0.001, 0.1]])
    # conservative bound on the disturbance-coupling term of the gain analysis:
    # gamma0 * |h' Phi|^2 * |psi_d|^2 over the prior box (neutral exosystem)
    h_norm2 = float(exo.h_delta @ exo.h_delta)
    c_bound = float(gn.get(
        "c_bound",
        gamma0 * h_norm2 * (1.0 / np.prod(box[:, 0])) ** 2))
    try:
        gains = GainSchedule(gamma0=gamma0, gamma1=gamma1,
                             rho=float(gn.get("rho", 1e-9)),
                             c_bound=c_bound,
                             mode=str(gn.get("mode", "paper")))
    except ValueError as e:
        errors.append(str(e))
        gains = GainSchedule(gamma0, max(gamma1, 2 * c_bound + 1), 1e-9,
                             c_bound, "paper")
    floor_eta = float(gn.get("floor_eta", 1e-3))
    floor_stage = float(gn.get("floor_stage", 1e-30))
    if floor_eta <= 0.0 or floor_stage <= 0.0:
        errors.append("normalization floors must be > 0")

    ds = cfg.get("design", {})
    try:
        design = DesignSpec(omega_d=float(ds.get("omega_d", 25.0)),
                            xi_d=float(ds.get("xi_d", 0.7)))
    except ValueError as e:
        errors.append(str(e))
        design = DesignSpec(25.0, 0.7)

    rf = cfg.get("reference", {})
    dth = rf.get("dither", {})
    try:
        reference = ReferenceSpec(
            square_amplitude=float(rf.get("square_amplitude", 1.0)),
            square_period=float(rf.get("square_period", 5.0)),
            alpha=float(dth.get("alpha", 1.0)),
            amplitudes=np.array(dth.get("amplitudes", [0.15]), dtype=float),
            frequencies=np.array(dth.get("frequencies", [10.0]), dtype=float))
    except ValueError as e:
        errors.append(str(e))
        reference = ReferenceSpec()
    if reference.square_period > 0.0 and not _on_grid(
            0.5 * reference.square_period, dt):
        errors.append("half the square period must be a multiple of dt")

    rs = cfg.get("reset", {})
    try:
        reset = ResetPolicy(f_max=float(rs.get("f_max", 0.01)),
                            refractory=float(rs.get("refractory", 1.0)))
    except ValueError as e:
        errors.append(str(e))
        reset = ResetPolicy()

    init = cfg.get("init", {})
    kap0 = np.array(init.get("kappa_hat", [0.0, 0.0, 0.0, 0.0]), dtype=float)
    if kap0.shape != (4,):
        errors.append("init.kappa_hat must have four entries")
        kap0 = np.zeros(4)

    tg = cfg.get("toggles", {})

    if errors:
        raise ConfigError("; ".join(errors))

    return Scenario(
        theta_times=theta_times, theta_values=theta_values,
        delta_times=delta_times, delta_values=delta_values,
        exo=exo, filters=filters, observer_L=Lv, gains=gains,
        floor_eta=floor_eta, floor_stage=floor_stage,
        design=design, reference=reference, reset=reset,
        t_eps=t_eps, dt=dt, t_final=t_final, decimate=decimate,
        kappa_hat0=kap0,
        adaptation_on=bool(tg.get("adaptation_on", True)),
        dither_on=bool(tg.get("dither_on", True)),
        supervisor_on=bool(tg.get("supervisor_on", True)),
    )


def default_scenario(**overrides) -> Scenario:
    """Bundled experiment scenario with optional top-level dict overrides."""
    cfg = default_config()
    for key, val in overrides.items():
        if isinstance(val, dict) and key in cfg:
            cfg[key].update(val)
        else:
            cfg[key] = val
    return scenario_from_config(cfg)


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
