"""Ideal-controller gain formulas and the heterogeneous mapping families.

A mapping family packages the pair G(theta), S(theta) with S = G kappa and the
scaled transforms Pi_kappa, T_G, T_S that satisfy

    Pi_kappa(m) G(theta) = T_G(m, m*theta),
    Pi_kappa(m) S(theta) = T_S(m, m*theta),

for every scalar m.  The transforms let a regression pair (Y, M) with
Y = M*theta be rewritten as a regression in the controller parameters without
ever dividing by an estimate.  Two families are built in: the pole-placement
law with additional state feedbacks (4 gains) and the baseline PI law
(2 gains).  New control structures can be added by supplying the same five
evaluators plus a kappa formula.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .plant import Theta


class PositivityLoss(ArithmeticError):
    """A square-root argument went negative (estimator transient); skip update."""


@dataclass(frozen=True)
class DesignSpec:
    """Desired closed-loop resonant frequency (rad/s) and damping."""

    omega_d: float
    xi_d: float

    def __post_init__(self):
        if not (self.omega_d > 0.0 and self.xi_d > 0.0):
            raise ValueError("omega_d and xi_d must be > 0")


def pi_gains(theta: Theta):
    """Baseline PI gains (K_P, K_I) for motor-speed control."""
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    return 2.0 * np.sqrt(t1 / t3), t1 / (t2 * t3)


def kappa_pole_placement(theta: Theta, spec: DesignSpec) -> np.ndarray:
    """Gains (K_I, K_P, K_1x, K_2x) placing the closed loop at two identical
    complex pole pairs s^2 + 2 xi_d omega_d s + omega_d^2.

    K_P here multiplies the motor speed directly, hence the sign differs from
    the PI convention acting on -y.  The division by theta2 only ever runs on
    true parameters (oracle path); the estimator side uses the mapping family.
    """
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    wd, xd = spec.omega_d, spec.xi_d
    K_I = t1 * t2 * t3 * wd ** 4
    K_P = -4.0 * t1 * xd * wd
    K_1x = -4.0 * t1 * xd * wd * (t2 * t3 * wd ** 2 - 1.0)
    K_2x = (-t1 * t2 * t3 * wd ** 2 * (4.0 * xd ** 2 - t2 * t3 * wd ** 2 + 2.0)
            + t2 + t1) / t2
    return np.array([K_I, K_P, K_1x, K_2x])


@dataclass(frozen=True)
class MappingFamily:
    """Evaluators of one control-law family (see module docstring)."""

    name: str
    n_kappa: int
    ell_kappa: float
    G: Callable[[Theta], np.ndarray]
    S: Callable[[Theta], np.ndarray]
    Pi: Callable[[float], np.ndarray]
    TG: Callable[[float, np.ndarray], np.ndarray]
    TS: Callable[[float, np.ndarray], np.ndarray]
    kappa: Callable[[Theta], np.ndarray] = field(repr=False, default=None)


def family_pole_placement(spec: DesignSpec) -> MappingFamily:
    wd, xd = spec.omega_d, spec.xi_d

    def G(theta):
        return np.diag([1.0, 1.0, 1.0, theta.theta2])

    def S(theta):
        t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
        return np.array([
            t1 * t2 * t3 * wd ** 4,
            -4.0 * t1 * xd * wd,
            -4.0 * t1 * xd * wd * (t2 * t3 * wd ** 2 - 1.0),
            -t1 * t2 * t3 * wd ** 2 * (4.0 * xd ** 2 - t2 * t3 * wd ** 2 + 2.0)
            + t2 + t1,
        ])

    def Pi(m):
        return np.diag([m ** 3, m, m ** 3, m ** 5])

    def TG(m, Y):
        return np.diag([m ** 3, m, m ** 3, m ** 4 * Y[1]])

    def TS(m, Y):
        y1, y2, y3 = Y[0], Y[1], Y[2]
        return np.array([
            y1 * y2 * y3 * wd ** 4,
            -4.0 * y1 * xd * wd,
            -4.0 * y1 * xd * wd * (y2 * y3 * wd ** 2 - m ** 2),
            -y1 * y2 * y3 * wd ** 2 * (4.0 * m ** 2 * xd ** 2
                                       - y2 * y3 * wd ** 2 + 2.0 * m ** 2)
            + m ** 4 * y2 + m ** 4 * y1,
        ])

    return MappingFamily(
        name="pole_placement", n_kappa=4, ell_kappa=12.0,
        G=G, S=S, Pi=Pi, TG=TG, TS=TS,
        kappa=lambda theta: kappa_pole_placement(theta, spec),
    )


def family_pi() -> MappingFamily:
    """Baseline PI family; kappa ordered (K_P, K_I)."""

    def G(theta):
        return np.diag([np.sqrt(theta.theta3), theta.theta2 * theta.theta3])

    def S(theta):
        return np.array([2.0 * np.sqrt(theta.theta1), theta.theta1])

    def Pi(m):
        if m < 0.0:
            raise PositivityLoss("negative scalar regressor in Pi")
        return np.diag([m ** 0.5, m ** 2])

    def TG(m, Y):
        if Y[2] < 0.0:
            raise PositivityLoss("sqrt argument Y3 < 0")
        return np.diag([np.sqrt(Y[2]), Y[1] * Y[2]])

    def TS(m, Y):
        if Y[0] < 0.0:
            raise PositivityLoss("sqrt argument Y1 < 0")
        return np.array([2.0 * np.sqrt(Y[0]), m * Y[0]])

    def kappa(theta):
        kp, ki = pi_gains(theta)
        return np.array([kp, ki])

    return MappingFamily(
        name="pi", n_kappa=2, ell_kappa=2.5,
        G=G, S=S, Pi=Pi, TG=TG, TS=TS, kappa=kappa,
    )
