"""Observer-canonical-form machinery for the third-order two-mass structure.

The drive model is similarity-transformed with xi = T x_p so that the unknown
time constants enter affinely through the stacked coefficient vector
eta = [psi_a; psi_b; psi_d].  This module provides the closed forms of T, its
inverse T_I, eta, the sparse 3x9 regressor matrix, and the selector matrices
used throughout the regression pipeline, plus the inversion chain that maps
the selected triple psi_ab back to physical time constants.

Everything here is a pure function of Theta; the estimator never calls the
theta-dependent functions, they serve as ground-truth oracles and as the
structural definitions shared with the measurable pipeline.
"""

import numpy as np

from .plant import Theta, plant_matrices

A0 = np.array([
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0],
])
C0 = np.array([1.0, 0.0, 0.0])

# Selectors over the stacked 9-vector eta = [psi_a; psi_b; psi_d].
L_A = np.hstack([np.eye(3), np.zeros((3, 6))])
L_B = np.hstack([np.zeros((3, 3)), np.eye(3), np.zeros((3, 3))])
# psi_ab = (1/theta1, -(theta1+theta2)/(theta1 theta2 theta3), 1/(theta1 theta2 theta3))
L_AB = np.zeros((3, 9))
L_AB[0, 3] = 1.0
L_AB[1, 1] = 1.0
L_AB[2, 5] = 1.0
# Selector applied to the 6-vector adj{phi} q to extract the psi_d block.
L_D = np.zeros((3, 6))
L_D[2, 5] = -1.0


class SingularTransform(ValueError):
    """Raised when an inversion hits a (theoretically excluded) singularity."""


def eta_of_theta(theta: Theta) -> np.ndarray:
    """Stacked canonical coefficient vector [psi_a; psi_b; psi_d]."""
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    p = t1 * t2 * t3
    eta = np.zeros(9)
    eta[1] = -(t1 + t2) / p        # psi_a
    eta[3] = 1.0 / t1              # psi_b
    eta[5] = 1.0 / p
    eta[8] = -1.0 / p              # psi_d
    return eta


def psi_ab_select(eta: np.ndarray) -> np.ndarray:
    """Selected triple (eta4, eta2, eta6) in 1-based stacking order."""
    return L_AB @ np.asarray(eta, dtype=float)


def theta_of_psi_ab(psi: np.ndarray, eps: float = 1e-300) -> Theta:
    """Invert psi_ab back to the physical time constants."""
    p1, p2, p3 = float(psi[0]), float(psi[1]), float(psi[2])
    if abs(p1) < eps or abs(p3) < eps:
        raise SingularTransform("psi1 and psi3 must be nonzero")
    num = -p3 / p1 - p2
    if abs(num) < eps:
        raise SingularTransform("-psi3/psi1 - psi2 vanished")
    theta1 = 1.0 / p1
    theta2 = num / p3
    theta3 = 1.0 / ((1.0 / theta1) * num)
    return Theta(theta1, theta2, theta3)


def transform_matrices(theta: Theta):
    """Closed-form transform pair (T, T_I) with T T_I = I, x_p = T_I xi."""
    t1, t2, t3 = theta.theta1, theta.theta2, theta.theta3
    T_I = np.array([
        [1.0, 0.0, 0.0],
        [-t1 / t2, 0.0, t1 * t3],
        [0.0, -t1, 0.0],
    ])
    T = np.linalg.inv(T_I)
    return T, T_I


def transform_from_observability(theta: Theta) -> np.ndarray:
    """T_I built as [A^2 O3, A O3, O3] from the observability matrix.

    Used as an independent oracle against the closed-form pattern; the matrix
    powers amplify rounding, so the closed form is the runtime construction.
    """
    A, _, C, _ = plant_matrices(theta)
    obs = np.vstack([C, C @ A, C @ A @ A])
    if abs(np.linalg.det(obs)) < 1e-300:
        raise SingularTransform("observability matrix is singular")
    O3 = np.linalg.solve(obs, np.array([0.0, 0.0, 1.0]))
    return np.column_stack([A @ A @ O3, A @ O3, O3])


def phi_regressor(y: float, u: float, delta: float) -> np.ndarray:
    """Sparse 3x9 regressor with phi' eta = psi_a y + psi_b u + psi_d delta."""
    out = np.zeros((3, 9))
    out[0, 3] = u
    out[1, 1] = y
    out[2, 5] = u
    out[2, 8] = delta
    return out
