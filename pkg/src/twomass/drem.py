"""Measurable regression pipeline: filter bank, staged regressions, resets,
and excitation diagnostics.

The pipeline turns the measured pair (y, u) into a chain of scalar-regressor
regression equations:

  stage eta     Y = M * eta(theta)        (extended accumulators + adjugate)
  stage theta   Y = M * theta             (algebraic inversion of eta)
  stage ti      Y = M * T_I(theta)        (denominator-free rescaling)
  stage xdelta0 Y = M * x_delta0          (disturbance initial condition)
  stage kappa   Y = M * kappa(theta)      (mapping-family transform)

All stage math lives in compiled kernels shared with the simulation loop;
the wrappers here operate on the FilterBank/Regression dataclasses used by
tests and by callers that step the bank outside the full harness.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .gains import MappingFamily, PositivityLoss
from .plant import NumericFault
from .smallmat import adjugate, det_cofactor


@dataclass(frozen=True)
class FilterConfig:
    """Filter-bank parameters.

    K defines A_K = A0 - K C0'; G, l, beta drive the disturbance-reconstruction
    filters; h_delta is the exosystem output vector entering the V filter;
    k1 is the first-order filter pole, sigma the exponential forgetting rate
    of the accumulators and k_amp the constant amplifier applied to the
    first-stage pair.  M_delta is kept for reference when beta came from the
    injection solver.
    """

    K: np.ndarray
    G: np.ndarray
    l: np.ndarray
    beta: np.ndarray
    h_delta: np.ndarray
    k1: float
    sigma: float
    k_amp: float = 1.0
    M_delta: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        h = np.atleast_1d(np.asarray(self.h_delta, dtype=float))
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "h_delta", h)
        if self.K.shape != (3,):
            raise ValueError("K must be a 3-vector")
        nd = G.shape[0]
        if (G.shape != (nd, nd) or l.shape != (nd,) or beta.shape != (nd,)
                or h.shape != (nd,)):
            raise ValueError("inconsistent disturbance-filter dimensions")
        a_k = np.array([[-self.K[0], 1.0, 0.0],
                        [-self.K[1], 0.0, 1.0],
                        [-self.K[2], 0.0, 0.0]])
        if np.any(np.real(np.linalg.eigvals(a_k)) >= 0.0):
            raise ValueError("A_K must be Hurwitz")
        if np.any(np.real(np.linalg.eigvals(G)) >= 0.0):
            raise ValueError("G must be Hurwitz")
        ctrb = np.column_stack([np.linalg.matrix_power(G, k) @ l
                                for k in range(nd)])
        if np.linalg.matrix_rank(ctrb) < nd:
            raise ValueError("(G, l) must be controllable")
        if not (self.k1 > 0.0 and self.sigma > 0.0 and self.k_amp > 0.0):
            raise ValueError("k1, sigma, k_amp must be > 0")

    @property
    def n_delta(self) -> int:
        return self.G.shape[0]


def solve_disturbance_injection(G: np.ndarray, l: np.ndarray,
                                A_delta: np.ndarray, h_delta: np.ndarray):
    """Solve M A_delta - G M = l hbar' with hbar' = h' A_delta; beta = hbar' M^-1.

    Returns (beta, M).  Raises ValueError when M is singular, which happens
    for exosystems with h' A_delta = 0 (e.g. constant disturbances); scenario
    configs override beta directly in that case.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    A = np.atleast_2d(np.asarray(A_delta, dtype=float))
    l = np.atleast_1d(np.asarray(l, dtype=float))
    h = np.atleast_1d(np.asarray(h_delta, dtype=float))
    nd = A.shape[0]
    hbar = h @ A
    lhs = np.kron(A.T, np.eye(nd)) - np.kron(np.eye(nd), G)
    rhs = np.outer(l, hbar).reshape(-1, order="F")
    m_vec = np.linalg.solve(lhs, rhs)
    M = m_vec.reshape((nd, nd), order="F")
    if abs(np.linalg.det(M)) < 1e-12:
        raise ValueError("degenerate disturbance injection (h' A_delta = 0?)")
    beta = np.linalg.solve(M.T, hbar)
    return beta, M


@dataclass
class FilterBank:
    """All auxiliary filter and accumulator states of the pipeline."""

    n_delta: int
    z: np.ndarray = None
    Omega: np.ndarray = None
    P: np.ndarray = None
    F: np.ndarray = None
    H: np.ndarray = None
    N: np.ndarray = None
    qbar_f: float = 0.0
    phibar_f: np.ndarray = None
    F_f: np.ndarray = None
    y_f: float = 0.0
    V: np.ndarray = None
    q: np.ndarray = None
    phi: np.ndarray = None
    p_f: np.ndarray = None
    V_f: np.ndarray = None
    t: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        nd = self.n_delta
        if self.z is None:
            self.z = np.zeros(3)
        if self.Omega is None:
            self.Omega = np.zeros((3, 3))
        if self.P is None:
            self.P = np.zeros((3, 3))
        if self.F is None:
            self.F = np.zeros(nd)
        if self.H is None:
            self.H = np.zeros((nd, 3))
        if self.N is None:
            self.N = np.zeros((nd, 3))
        if self.phibar_f is None:
            self.phibar_f = np.zeros(6)
        if self.F_f is None:
            self.F_f = np.zeros(nd)
        if self.V is None:
            self.V = np.zeros((3, 3 * nd))
        if self.q is None:
            self.q = np.zeros(6)
        if self.phi is None:
            self.phi = np.zeros((6, 6))
        if self.p_f is None:
            self.p_f = np.zeros(nd)
        if self.V_f is None:
            self.V_f = np.zeros((nd, nd))

    def pack(self) -> np.ndarray:
        """Embed the bank into a flat simulation state vector."""
        nd = self.n_delta
        s = np.zeros(K.state_size(nd))
        offF, offH, offN, offFf, offV, offpf, offVf, offxd = _offs(nd)
        s[K.O_Z:K.O_Z + 3] = self.z
        s[K.O_OM:K.O_OM + 9] = self.Omega.ravel()
        s[K.O_P:K.O_P + 9] = self.P.ravel()
        s[K.O_QBF] = self.qbar_f
        s[K.O_PBF:K.O_PBF + 6] = self.phibar_f
        s[K.O_YF] = self.y_f
        s[K.O_Q:K.O_Q + 6] = self.q
        s[K.O_PHI:K.O_PHI + 36] = self.phi.ravel()
        s[offF:offF + nd] = self.F
        s[offH:offH + 3 * nd] = self.H.ravel()
        s[offN:offN + 3 * nd] = self.N.ravel()
        s[offFf:offFf + nd] = self.F_f
        s[offV:offV + 9 * nd] = self.V.ravel()
        s[offpf:offpf + nd] = self.p_f
        s[offVf:offVf + nd * nd] = self.V_f.ravel()
        return s

    def unpack(self, s: np.ndarray) -> "FilterBank":
        nd = self.n_delta
        offF, offH, offN, offFf, offV, offpf, offVf, offxd = _offs(nd)
        return FilterBank(
            n_delta=nd,
            z=s[K.O_Z:K.O_Z + 3].copy(),
            Omega=s[K.O_OM:K.O_OM + 9].reshape(3, 3).copy(),
            P=s[K.O_P:K.O_P + 9].reshape(3, 3).copy(),
            qbar_f=float(s[K.O_QBF]),
            phibar_f=s[K.O_PBF:K.O_PBF + 6].copy(),
            y_f=float(s[K.O_YF]),
            q=s[K.O_Q:K.O_Q + 6].copy(),
            phi=s[K.O_PHI:K.O_PHI + 36].reshape(6, 6).copy(),
            F=s[offF:offF + nd].copy(),
            H=s[offH:offH + 3 * nd].reshape(nd, 3).copy(),
            N=s[offN:offN + 3 * nd].reshape(nd, 3).copy(),
            F_f=s[offFf:offFf + nd].copy(),
            V=s[offV:offV + 9 * nd].reshape(3, 3 * nd).copy(),
            p_f=s[offpf:offpf + nd].copy(),
            V_f=s[offVf:offVf + nd * nd].reshape(nd, nd).copy(),
            t=self.t,
            t_start=self.t_start,
        )


def _offs(nd):
    offF = K.N_FIX + nd * nd
    offH = offF + nd
    offN = offH + 3 * nd
    offFf = offN + 3 * nd
    offV = offFf + nd
    offpf = offV + 9 * nd
    offVf = offpf + nd
    offxd = offVf + nd * nd
    return offF, offH, offN, offFf, offV, offpf, offVf, offxd


@dataclass(frozen=True)
class Regression:
    """A (regressand, scalar regressor) pair produced by one pipeline stage."""

    Y: np.ndarray
    M: float
    stage: str


def new_bank(cfg: FilterConfig, t0: float = 0.0, t_start: float = 0.0) -> FilterBank:
    return FilterBank(n_delta=cfg.n_delta, t=t0, t_start=t_start)


def filter_step(bank: FilterBank, cfg: FilterConfig, y: float, u: float,
                PhiDelta: np.ndarray, dt: float) -> FilterBank:
    """One RK4 advance of the whole bank with y, u and Phi_delta held.

    The derived signals inside the extended regressor use the analytic filter
    right-hand sides, never numerical differentiation.  Accumulators only
    integrate once the bank clock has passed bank.t_start.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    nd = cfg.n_delta
    s = bank.pack()
    PhiDelta = np.atleast_2d(np.asarray(PhiDelta, dtype=float))
    wrow = np.ascontiguousarray(cfg.h_delta @ PhiDelta)
    K.filter_bank_rk4(s, bank.t, dt, nd, float(y), float(u), wrow,
                      cfg.K, np.ascontiguousarray(cfg.G.ravel()), cfg.l,
                      cfg.beta, cfg.k1, cfg.sigma, cfg.k_amp, bank.t_start)
    if not np.all(np.isfinite(s)):
        raise NumericFault("filter bank state left the finite range")
    out = bank.unpack(s)
    out.t = bank.t + dt
    return out


def reset_accumulators(bank: FilterBank, t: float) -> FilterBank:
    """Zero the weighted accumulators at a restart instant; filters continue."""
    nd = bank.n_delta
    return replace(
        bank,
        q=np.zeros(6),
        phi=np.zeros((6, 6)),
        p_f=np.zeros(nd),
        V_f=np.zeros((nd, nd)),
        t_start=t,
    )


def lemma1_regression(bank: FilterBank, cfg: FilterConfig) -> Regression:
    """First-stage pair: Y = M * eta(theta) built from the accumulators."""
    y9 = np.empty(9)
    delta = K.lemma1_pair(np.ascontiguousarray(bank.phi),
                          np.ascontiguousarray(bank.q), cfg.k_amp, y9)
    return Regression(Y=y9, M=float(delta), stage="eta")


def theta_regression(reg_eta: Regression) -> Regression:
    """Second-stage pair: Y = M * theta."""
    y = np.empty(3)
    yab = (reg_eta.Y[3], reg_eta.Y[1], reg_eta.Y[5])
    m = K.theta_stage(yab[0], yab[1], yab[2], reg_eta.M, y)
    return Regression(Y=y, M=float(m), stage="theta")


def ti_regression(reg_theta: Regression) -> Regression:
    """Transform-stage pair: Y (3x3) = M * T_I(theta)."""
    y = np.empty(9)
    m = K.ti_stage(np.ascontiguousarray(reg_theta.Y), reg_theta.M, y)
    return Regression(Y=y.reshape(3, 3), M=float(m), stage="ti")


def xdelta0_regression(bank: FilterBank) -> Regression:
    """Disturbance-initial-condition pair: Y = M * x_delta0."""
    vf = np.ascontiguousarray(bank.V_f)
    m = det_cofactor(vf)
    y = adjugate(vf) @ bank.p_f
    return Regression(Y=y, M=float(m), stage="xdelta0")


def kappa_regression(reg_theta: Regression, family: MappingFamily) -> Regression:
    """Controller-parameter pair: Y = M * kappa(theta) via the family transforms.

    On positivity loss (PI-family square roots during transients) returns the
    zero pair, which freezes the downstream update law.
    """
    m = reg_theta.M
    y = np.ascontiguousarray(reg_theta.Y)
    try:
        tg = family.TG(m, y)
        ts = family.TS(m, y)
    except PositivityLoss:
        return Regression(Y=np.zeros(family.n_kappa), M=0.0, stage="kappa")
    mk = det_cofactor(tg)
    yk = adjugate(tg) @ ts
    return Regression(Y=yk, M=float(mk), stage="kappa")


def normalize(reg: Regression, floor: float) -> Regression:
    """Scale the pair by 1/|M| when |M| > floor; the ratio Y/M is untouched."""
    if floor <= 0.0:
        raise ValueError("floor must be > 0")
    am = abs(reg.M)
    if am > floor:
        return Regression(Y=reg.Y / am, M=reg.M / am, stage=reg.stage)
    return reg


def fe_level(t: np.ndarray, phibar: np.ndarray, t_a: float, t_b: float) -> float:
    """Smallest eigenvalue of the Gram integral of phibar over [t_a, t_b].

    Trapezoid accumulation of sampled phibar rows; diagnostic only.
    """
    if t_b <= t_a:
        raise ValueError("t_b must be > t_a")
    t = np.asarray(t, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    mask = (t >= t_a) & (t <= t_b)
    ts = t[mask]
    ph = phibar[mask]
    if ts.shape[0] < 2:
        return 0.0
    gram = np.zeros((ph.shape[1], ph.shape[1]))
    outer = ph[:, :, None] * ph[:, None, :]
    dts = np.diff(ts)
    gram = 0.5 * np.einsum("k,kij->ij", dts, outer[:-1] + outer[1:])
    return float(np.linalg.eigvalsh(gram).min())
