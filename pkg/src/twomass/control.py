"""Control laws, reference generation with vanishing dither, and the
reset supervisor."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .gains import DesignSpec, kappa_pole_placement
from .plant import Theta


@dataclass(frozen=True)
class ReferenceSpec:
    """Piecewise-constant mainline plus an exponentially vanishing dither.

    The mainline is a square wave of the given amplitude and period starting
    on the positive half; period <= 0 means a constant reference.  The dither
    restarts (Heaviside-gated envelope) at every reset instant.
    """

    square_amplitude: float = 1.0
    square_period: float = 5.0
    alpha: float = 1.0
    amplitudes: np.ndarray = field(default_factory=lambda: np.array([0.15]))
    frequencies: np.ndarray = field(default_factory=lambda: np.array([10.0]))

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", w)
        if a.shape != w.shape or a.shape[0] < 1:
            raise ValueError("need n_d >= 1 matching amplitudes/frequencies")
        if np.any(a <= 0.0):
            raise ValueError("dither amplitudes must be > 0")
        if len(set(w.tolist())) != w.shape[0]:
            raise ValueError("dither frequencies must be pairwise distinct")
        if self.alpha <= 0.0:
            raise ValueError("dither decay alpha must be > 0")


def mainline(spec: ReferenceSpec, t: float) -> float:
    if spec.square_period <= 0.0:
        return spec.square_amplitude
    half = 0.5 * spec.square_period
    return spec.square_amplitude if int(t / half) % 2 == 0 else -spec.square_amplitude


def reference(spec: ReferenceSpec, t: float, t_i_plus: float) -> float:
    """r(t) = c(t) + Heaviside(t - t_i+) e^{-alpha (t - t_i+)} sum a_j sin(w_j t)."""
    r = mainline(spec, t)
    if t >= t_i_plus:
        env = np.exp(-spec.alpha * (t - t_i_plus))
        r += env * float(np.sum(spec.amplitudes
                                * np.sin(spec.frequencies * t)))
    return r


@dataclass
class ResetPolicy:
    """Integral-of-squared-innovation criterion with threshold and refractory."""

    f_max: float = 0.01
    refractory: float = 1.0
    f: float = 0.0
    t_i_plus: float = 0.0
    last_reset: float = 0.0

    def __post_init__(self):
        if self.f_max <= 0.0:
            raise ValueError("f_max must be > 0")


def supervisor_step(policy: ResetPolicy, y: float, y_hat: float, dt: float,
                    t: float) -> bool:
    """Accumulate the criterion over one step; True means "reset now".

    The criterion is nonnegative, zero at each reset instant, and
    nondecreasing in between.  The trigger compares with >= (robust reading
    of the threshold crossing); a refractory interval suppresses chattering
    right after a reset while excitation rebuilds.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    policy.f += (y - y_hat) ** 2 * dt
    if policy.f >= policy.f_max and (t - policy.last_reset) >= policy.refractory:
        policy.f = 0.0
        policy.t_i_plus = t
        policy.last_reset = t
        return True
    return False


def control_law(kappa_hat: np.ndarray, e_y: np.ndarray,
                x_p_hat: np.ndarray) -> float:
    """Adaptive law in PI-plus-additional-feedback form.

    e_y = [-y, eI]; the proportional slot uses the measured speed, the
    additional feedbacks use the observed load speed and torsional torque.
    kappa_hat is ordered (K_I, K_P, K_1x, K_2x) with K_P the coefficient of
    the speed itself, so the PI-form gain on -y is -K_P.
    """
    k_i, k_p, k_1x, k_2x = (float(kappa_hat[0]), float(kappa_hat[1]),
                            float(kappa_hat[2]), float(kappa_hat[3]))
    u_pi = (-k_p) * e_y[0] + k_i * e_y[1]
    u_x = k_1x * x_p_hat[1] + k_2x * x_p_hat[2]
    return float(u_pi + u_x)


def control_law_state_form(kappa_hat: np.ndarray, x_hat: np.ndarray) -> float:
    """The same law as kappa' x_hat with x_hat = [eI, y, xh2, xh3]."""
    return float(K.control_u(np.asarray(kappa_hat, dtype=float),
                             x_hat[0], x_hat[1], x_hat[2], x_hat[3]))


def ideal_control(theta: Theta, x: np.ndarray, spec: DesignSpec) -> float:
    """Full-information law u* = kappa(theta)' x on the true augmented state."""
    return float(kappa_pole_placement(theta, spec) @ np.asarray(x, dtype=float))
