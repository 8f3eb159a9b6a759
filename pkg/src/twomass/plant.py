"""Ground-truth two-mass drive model, load-torque exosystem, and integral-error
augmentation.

This is the only module that holds the true time constants.  States are in
per-unit: x1 motor speed, x2 load speed, x3 torsional torque; the tracking
integral error eI augments the plant for the PI part of the control law.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .accel import njit


class NumericFault(RuntimeError):
    """A state left the finite range during integration."""


@dataclass(frozen=True)
class Theta:
    """Motor, load, and elastic-joint mechanical time constants (seconds, pu)."""

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])


@dataclass
class PlantState:
    """Plant state plus tracking integral error."""

    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0
    eI: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.eI])

    def aug_vector(self) -> np.ndarray:
        """State in augmented ordering [eI, x1, x2, x3]."""
        return np.array([self.eI, self.x1, self.x2, self.x3])


@dataclass(frozen=True)
class ExoModel:
    """Known autonomous generator of the load torque: d(t) = h' Phi(t) x0."""

    A_delta: np.ndarray
    h_delta: np.ndarray
    x_delta0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_delta, dtype=float))
        h = np.atleast_1d(np.asarray(self.h_delta, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x_delta0, dtype=float))
        object.__setattr__(self, "A_delta", A)
        object.__setattr__(self, "h_delta", h)
        object.__setattr__(self, "x_delta0", x0)
        n = A.shape[0]
        if A.shape != (n, n) or h.shape != (n,) or x0.shape != (n,):
            raise ValueError("inconsistent exosystem dimensions")
        # (h', A) must be observable for the disturbance to be reconstructible
        obs = np.vstack([h @ np.linalg.matrix_power(A, k) for k in range(n)])
        if np.linalg.matrix_rank(obs) < n:
            raise ValueError("exosystem pair (h', A) is not observable")

    @property
    def n_delta(self) -> int:
        return self.A_delta.shape[0]


def plant_matrices(theta: Theta):
    """State-space matrices (A, B, C, D) of the two-mass drive."""
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    A = np.array([
        [0.0, 0.0, -1.0 / t1],
        [0.0, 0.0, 1.0 / t2],
        [1.0 / t3, -1.0 / t3, 0.0],
    ])
    B = np.array([1.0 / t1, 0.0, 0.0])
    C = np.array([1.0, 0.0, 0.0])
    D = np.array([0.0, -1.0 / t2, 0.0])
    return A, B, C, D


def augmented_matrices(theta: Theta):
    """Matrices of the integral-error-augmented system, state [eI, x1, x2, x3]."""
    A, B, C, D = plant_matrices(theta)
    calA = np.zeros((4, 4))
    calA[0, 1:] = -C
    calA[1:, 1:] = A
    calB = np.concatenate([[0.0], B])
    calD = np.concatenate([[0.0], D])
    calC = np.array([0.0, 1.0, 0.0, 0.0])
    return calA, calB, calD, calC


def exo_fundamental(exo: ExoModel, t: float, t0: float = 0.0) -> np.ndarray:
    """Fundamental matrix Phi(t) of the exosystem, Phi(t0) = I."""
    if t < t0:
        raise ValueError("t must be >= t0")
    return expm(exo.A_delta * (t - t0))


def exo_delta(exo: ExoModel, t: float, t0: float = 0.0) -> float:
    """Load torque produced by the exosystem at time t."""
    return float(exo.h_delta @ exo_fundamental(exo, t, t0) @ exo.x_delta0)


@njit(cache=True, inline="always")
def plant_rhs(x1, x2, x3, u, delta, a13, a23, a31, b1, d2):
    """Time derivative of the plant states; entries are the 1/theta terms."""
    dx1 = a13 * x3 + b1 * u
    dx2 = a23 * x3 + d2 * delta
    dx3 = a31 * (x1 - x2)
    return dx1, dx2, dx3


@njit(cache=True)
def _plant_rk4(x, u, delta, r, dt, a13, a23, a31, b1, d2):
    # classical RK4 on [x1, x2, x3, eI] with held u, delta, r
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    xt = np.empty(4)

    d1, d2_, d3 = plant_rhs(x[0], x[1], x[2], u, delta, a13, a23, a31, b1, d2)
    k1[0], k1[1], k1[2], k1[3] = d1, d2_, d3, r - x[0]
    for i in range(4):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    d1, d2_, d3 = plant_rhs(xt[0], xt[1], xt[2], u, delta, a13, a23, a31, b1, d2)
    k2[0], k2[1], k2[2], k2[3] = d1, d2_, d3, r - xt[0]
    for i in range(4):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    d1, d2_, d3 = plant_rhs(xt[0], xt[1], xt[2], u, delta, a13, a23, a31, b1, d2)
    k3[0], k3[1], k3[2], k3[3] = d1, d2_, d3, r - xt[0]
    for i in range(4):
        xt[i] = x[i] + dt * k3[i]
    d1, d2_, d3 = plant_rhs(xt[0], xt[1], xt[2], u, delta, a13, a23, a31, b1, d2)
    k4[0], k4[1], k4[2], k4[3] = d1, d2_, d3, r - xt[0]

    out = np.empty(4)
    for i in range(4):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


def plant_step(state: PlantState, theta: Theta, u: float, delta: float,
               r: float, dt: float) -> PlantState:
    """One fixed-step RK4 advance of the augmented plant, d(eI)/dt = r - y.

    Inputs u, delta, r are held constant over the step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    x = np.array([state.x1, state.x2, state.x3, state.eI])
    out = _plant_rk4(x, u, delta, r, dt,
                     -1.0 / t1, 1.0 / t2, 1.0 / t3, 1.0 / t1, -1.0 / t2)
    if not np.all(np.isfinite(out)):
        raise NumericFault("plant state left the finite range")
    return PlantState(out[0], out[1], out[2], out[3])
