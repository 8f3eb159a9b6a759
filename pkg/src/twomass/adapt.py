"""Gradient identification laws with state-dependent gain schedules.

Each law is a gradient flow -gamma * M * (M * est - Y) on its own regression
pair, frozen whenever the first-stage scalar regressor sits below the
dead-zone threshold.  Gains follow the scheduled form

    gamma = (gamma1 + gamma0 * lambda_max(.)) / M^2        ("paper" mode)
    gamma = gamma1 / M^2                                   ("constant" mode)

so that jointly rescaling (Y, M) leaves the trajectories unchanged.  The
lambda_max terms use rank-one shortcuts validated against a dense eigensolver
in the tests.  In addition to the shared dead zone, a law is frozen when its
own normalized regressor is below the threshold, which protects the first few
samples after the gate opens while the downstream accumulators are still
rank-deficient.
"""

from dataclasses import dataclass, replace

import numpy as np

from .drem import Regression
from .plant import NumericFault


@dataclass
class Estimates:
    """The four adapted quantities; n_delta sizes the disturbance estimate."""

    eta_hat: np.ndarray = None
    Ti_hat: np.ndarray = None
    xdelta0_hat: np.ndarray = None
    kappa_hat: np.ndarray = None
    n_delta: int = 1
    n_kappa: int = 4

    def __post_init__(self):
        if self.eta_hat is None:
            self.eta_hat = np.zeros(9)
        if self.Ti_hat is None:
            self.Ti_hat = np.zeros((3, 3))
        if self.xdelta0_hat is None:
            self.xdelta0_hat = np.zeros(self.n_delta)
        if self.kappa_hat is None:
            self.kappa_hat = np.zeros(self.n_kappa)


@dataclass(frozen=True)
class GainSchedule:
    """Adaptation gains and dead zone.

    gamma1 must dominate c_bound, the configured upper bound on the
    disturbance-coupling term that the scheduled analysis subtracts; see
    Scenario validation for the default computed from a prior box on the
    time constants.
    """

    gamma0: float
    gamma1: float
    rho: float
    c_bound: float = 0.0
    mode: str = "paper"

    def __post_init__(self):
        if self.mode not in ("paper", "constant"):
            raise ValueError("mode must be 'paper' or 'constant'")
        if self.gamma1 <= self.c_bound:
            raise ValueError("gamma1 must exceed c_bound")
        if self.rho < 0.0:
            raise ValueError("rho must be >= 0")


def lam_max_phi(y: float, u: float, delta_hat: float) -> float:
    """lambda_max of phi(y, u, d) phi(y, u, d)': the regressor rows are
    orthogonal, so this is max(y^2, u^2 + d^2)."""
    return max(y * y, u * u + delta_hat * delta_hat)


def lam_max_outer(a: np.ndarray, b: np.ndarray) -> float:
    """Largest real eigenvalue of the rank-one product a b' (n x n).

    Eigenvalues are {b' a, 0, ...}; the Kronecker product with an identity
    repeats them, so this also serves lambda_max(a b' kron I)."""
    return max(float(np.dot(b, a)), 0.0)


def _gamma(sched: GainSchedule, m: float, lam: float) -> float:
    if sched.mode == "paper":
        return (sched.gamma1 + sched.gamma0 * lam) / (m * m)
    return sched.gamma1 / (m * m)


def _flow(est_val: np.ndarray, y: np.ndarray, m: float, gamma: float,
          dt: float) -> np.ndarray:
    # RK4 on the linear flow d(est)/dt = -gamma m (m est - y), held pair
    def rhs(x):
        return -gamma * m * (m * x - y)

    k1 = rhs(est_val)
    k2 = rhs(est_val + 0.5 * dt * k1)
    k3 = rhs(est_val + 0.5 * dt * k2)
    k4 = rhs(est_val + dt * k3)
    out = est_val + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericFault("estimate left the finite range")
    return out


def update_eta(est: Estimates, reg: Regression, phi_hat: np.ndarray,
               sched: GainSchedule, dt: float, delta_gate: float = None) -> Estimates:
    """Advance the canonical-coefficient estimate one step.

    delta_gate defaults to the pair's own regressor (they coincide for this
    law); phi_hat supplies the lambda_max term of the scheduled gain.
    """
    gate = reg.M if delta_gate is None else delta_gate
    if gate < sched.rho or abs(reg.M) < sched.rho:
        return est
    # rows of the sparse regressor are orthogonal, so the product's spectrum
    # is the row norms squared
    lam = float(np.max(np.sum(phi_hat * phi_hat, axis=1)))
    g = _gamma(sched, reg.M, lam)
    return replace(est, eta_hat=_flow(est.eta_hat, reg.Y, reg.M, g, dt))


def update_xdelta0(est: Estimates, reg: Regression, sched: GainSchedule,
                   dt: float, delta_gate: float = None) -> Estimates:
    gate = reg.M if delta_gate is None else delta_gate
    if gate < sched.rho or abs(reg.M) < sched.rho:
        return est
    g = sched.gamma1 / (reg.M * reg.M)
    return replace(est, xdelta0_hat=_flow(est.xdelta0_hat, reg.Y, reg.M, g, dt))


def update_ti(est: Estimates, reg: Regression, xi_hat: np.ndarray,
              xi_hat_dot: np.ndarray, sched: GainSchedule, dt: float,
              delta_gate: float = None) -> Estimates:
    """Advance the inverse-transform estimate; xi_hat_dot must be the
    observer's analytic right-hand side, never a finite difference."""
    gate = reg.M if delta_gate is None else delta_gate
    if gate < sched.rho or abs(reg.M) < sched.rho:
        return est
    lam = lam_max_outer(xi_hat_dot, xi_hat)
    g = _gamma(sched, reg.M, lam)
    return replace(est, Ti_hat=_flow(est.Ti_hat, reg.Y, reg.M, g, dt))


def update_kappa(est: Estimates, reg: Regression, x_hat: np.ndarray,
                 sched: GainSchedule, dt: float,
                 delta_gate: float = None) -> Estimates:
    """Advance the controller-gain estimate; x_hat = [eI_hat; x_p_hat]."""
    gate = reg.M if delta_gate is None else delta_gate
    if gate < sched.rho or abs(reg.M) < sched.rho:
        return est
    lam = float(np.dot(x_hat, x_hat))  # lambda_max of the rank-one x x'
    g = _gamma(sched, reg.M, lam)
    return replace(est, kappa_hat=_flow(est.kappa_hat, reg.Y, reg.M, g, dt))
