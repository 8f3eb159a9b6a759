"""Adaptive state observer: canonical state, disturbance value, and the
physical states recovered through the adapted inverse transform.
"""

from dataclasses import dataclass

import numpy as np

from .canonical import A0, phi_regressor
from .plant import NumericFault


@dataclass
class ObserverState:
    xi_hat: np.ndarray = None
    last_xi_hat_dot: np.ndarray = None

    def __post_init__(self):
        if self.xi_hat is None:
            self.xi_hat = np.zeros(3)
        if self.last_xi_hat_dot is None:
            self.last_xi_hat_dot = np.zeros(3)


def place_output_injection(poles) -> np.ndarray:
    """Output-injection vector L with spectrum(A0 + L C0') at the given poles.

    The companion-observable pair makes this exact coefficient matching:
    char(A0 + L C0') = s^3 - L1 s^2 - L2 s - L3.
    """
    poles = np.asarray(poles, dtype=complex)
    if poles.shape != (3,):
        raise ValueError("exactly three poles required")
    if np.any(poles.real >= 0.0):
        raise ValueError("poles must lie in the open left half plane")
    coeffs = np.poly(poles)  # monic: [1, c1, c2, c3]
    if np.abs(coeffs.imag).max() > 1e-9:
        raise ValueError("poles must be real or conjugate pairs")
    c = coeffs.real
    return np.array([-c[1], -c[2], -c[3]])


def filter_injection_gain(poles) -> np.ndarray:
    """Gain K with spectrum(A0 - K C0') at the given poles."""
    return -place_output_injection(poles)


def observer_step(obs: ObserverState, eta_hat: np.ndarray, Ti_hat: np.ndarray,
                  xdelta0_hat: np.ndarray, y: float, u: float,
                  PhiDelta: np.ndarray, h_delta: np.ndarray, L: np.ndarray,
                  dt: float):
    """One RK4 advance of the canonical-state estimate with held inputs.

    Returns (new ObserverState, x_p_hat, delta_hat).  The analytic derivative
    at the new state is cached for the transform-law gain.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    PhiDelta = np.atleast_2d(np.asarray(PhiDelta, dtype=float))
    h_delta = np.atleast_1d(np.asarray(h_delta, dtype=float))
    xdelta0_hat = np.atleast_1d(np.asarray(xdelta0_hat, dtype=float))
    delta_hat = float(h_delta @ PhiDelta @ xdelta0_hat)
    phi_eta = phi_regressor(y, u, delta_hat).T @ eta_hat

    def rhs(xi):
        return A0 @ xi + phi_eta + L * (y - xi[0])

    xi = obs.xi_hat
    k1 = rhs(xi)
    k2 = rhs(xi + 0.5 * dt * k1)
    k3 = rhs(xi + 0.5 * dt * k2)
    k4 = rhs(xi + dt * k3)
    xi_new = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(xi_new)):
        raise NumericFault("observer state left the finite range")
    new = ObserverState(xi_hat=xi_new, last_xi_hat_dot=rhs(xi_new))
    x_p_hat = Ti_hat @ xi_new
    return new, x_p_hat, delta_hat
