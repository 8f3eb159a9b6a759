"""Compiled inner loop of the coupled simulation.

The whole closed-loop system -- plant with integral error, ideal-law reference
model, exosystem fundamental matrix, measurement filter bank, weighted
regression accumulators, the four identification laws, the state observer and
the supervision criterion -- is one ODE advanced by classical RK4 over a flat
state vector.  Within a step the control input and the piecewise-constant
reference/load values are held; everything else is evaluated at the substage
times, so the identification laws see the regression pairs implied by the
substage accumulator states.

Flat state layout (plant order n = 3 fixed, nd = exosystem order):

  [0]      eI        tracking integral error
  [1:4]    x_p       plant states (motor speed, load speed, torsional torque)
  [4]      eI*       reference-model integral error
  [5:8]    x_p*      reference-model plant states
  [8:11]   z         output filter
  [11:20]  Omega     3x3 output-driven filter
  [20:29]  P         3x3 input-driven filter
  [29]     qbar_f    first-order filtered output residual
  [30:36]  phibar_f  first-order filtered extended regressor
  [36]     y_f       first-order filtered output
  [37:43]  q         weighted regressand accumulator
  [43:79]  phi       6x6 weighted Gram accumulator
  [79:88]  eta_hat   canonical-coefficient estimate
  [88:97]  Ti_hat    3x3 inverse-transform estimate
  [97:101] kap_hat   controller gain estimate
  [101:104] xi_hat   observer canonical state
  [104]    f_crit    supervision criterion integral
  then, sized by nd: Phi_d (nd*nd), F (nd), H (nd*3), N (nd*3), F_f (nd),
  V (3*3nd), p_f (nd), V_f (nd*nd), xd0_hat (nd).

Only the accumulators q, phi, p_f, V_f (plus the criterion) restart at reset
instants; the continuous filters keep running.
"""

import math

import numpy as np

from .accel import njit
from .smallmat import _minor5, det_n, adj_n

# ---------------------------------------------------------------------------
# state layout
O_EI = 0
O_XP = 1
O_EIS = 4
O_XPS = 5
O_Z = 8
O_OM = 11
O_P = 20
O_QBF = 29
O_PBF = 30
O_YF = 36
O_Q = 37
O_PHI = 43
O_ETA = 79
O_TI = 88
O_KAP = 97
O_XI = 101
O_FC = 104
N_FIX = 105


def state_size(nd: int) -> int:
    # tail: Phi_d, F, H, N, F_f, V, p_f, V_f, xd0_hat
    return N_FIX + 2 * nd * nd + 19 * nd


# telemetry column indices (tail sized by nd)
C_T = 0
C_R = 1
C_C = 2
C_DITH = 3
C_Y = 4
C_U = 5
C_DELTA = 6
C_DELTAH = 7
C_EI = 8
C_X1 = 9       # 9..11 x_p
C_XH1 = 12     # 12..14 x_p hat
C_XI1 = 15     # 15..17 xi hat
C_EIS = 18
C_X1S = 19     # 19..21 x_p of reference model
C_KAP = 22     # 22..25
C_ETAERR = 26
C_TIERR = 27
C_XD0ERR = 28
C_KAPERR = 29
C_XPERR = 30
C_ZETA = 31
C_DRAW = 32
C_GATE = 33
C_FCRIT = 34
C_RESET = 35
C_PHIBAR = 36  # 36..41
C_META = 42
C_YETA = 43    # 43..51
C_MTH = 52
C_YTH = 53     # 53..55
C_MTI = 56
C_YTI = 57     # 57..65
C_MKAP = 66
C_YKAP = 67    # 67..70
C_MXD = 71
C_YXD = 72     # 72..71+nd


def n_columns(nd: int) -> int:
    return C_YXD + nd


def telemetry_columns(nd: int):
    cols = [
        "t", "r", "c", "dither", "y", "u", "delta", "delta_hat",
        "eI", "x1p", "x2p", "x3p", "xh1p", "xh2p", "xh3p",
        "xi1", "xi2", "xi3", "eI_ref", "x1_ref", "x2_ref", "x3_ref",
        "kap1", "kap2", "kap3", "kap4",
        "eta_err", "ti_err", "xd0_err", "kap_err", "xp_err", "zeta_norm",
        "delta_raw", "gate", "f_crit", "reset",
        "phibar1", "phibar2", "phibar3", "phibar4", "phibar5", "phibar6",
        "M_eta", "Y_eta1", "Y_eta2", "Y_eta3", "Y_eta4", "Y_eta5", "Y_eta6",
        "Y_eta7", "Y_eta8", "Y_eta9",
        "M_theta", "Y_theta1", "Y_theta2", "Y_theta3",
        "M_ti", "Y_ti11", "Y_ti12", "Y_ti13", "Y_ti21", "Y_ti22", "Y_ti23",
        "Y_ti31", "Y_ti32", "Y_ti33",
        "M_kap", "Y_kap1", "Y_kap2", "Y_kap3", "Y_kap4",
        "M_xd0",
    ]
    cols += [f"Y_xd0_{i + 1}" for i in range(nd)]
    return cols


# ---------------------------------------------------------------------------
# closed forms shared with the oracle modules


@njit(cache=True)
def eta_flat(t1, t2, t3, out9):
    p = t1 * t2 * t3
    for i in range(9):
        out9[i] = 0.0
    out9[1] = -(t1 + t2) / p
    out9[3] = 1.0 / t1
    out9[5] = 1.0 / p
    out9[8] = -1.0 / p


@njit(cache=True)
def ti_flat(t1, t2, t3, out9):
    out9[0] = 1.0
    out9[1] = 0.0
    out9[2] = 0.0
    out9[3] = -t1 / t2
    out9[4] = 0.0
    out9[5] = t1 * t3
    out9[6] = 0.0
    out9[7] = -t1
    out9[8] = 0.0


@njit(cache=True)
def kappa_pp_flat(t1, t2, t3, wd, xd, out4):
    out4[0] = t1 * t2 * t3 * wd ** 4
    out4[1] = -4.0 * t1 * xd * wd
    out4[2] = -4.0 * t1 * xd * wd * (t2 * t3 * wd ** 2 - 1.0)
    out4[3] = (-t1 * t2 * t3 * wd ** 2 * (4.0 * xd ** 2 - t2 * t3 * wd ** 2 + 2.0)
               + t2 + t1) / t2


@njit(cache=True, inline="always")
def control_u(kap, eI, y, xh2, xh3):
    """Adaptive law: integral gain on eI, speed gain on measured y, the two
    additional feedbacks on the observed load speed and torsional torque."""
    return kap[0] * eI + kap[1] * y + kap[2] * xh2 + kap[3] * xh3


# ---------------------------------------------------------------------------
# regression pipeline stages (operate on raw pairs; callers normalize)


@njit(cache=True, inline="always")
def tail_offsets(nd):
    """Offsets of the nd-sized tail blocks: F, H, N, F_f, V, p_f, V_f, xd0."""
    offF = N_FIX + nd * nd
    offH = offF + nd
    offN = offH + 3 * nd
    offFf = offN + 3 * nd
    offV = offFf + nd
    offpf = offV + 9 * nd
    offVf = offpf + nd
    offxd = offVf + nd * nd
    return offF, offH, offN, offFf, offV, offpf, offVf, offxd


@njit(cache=True)
def adjq6(ph, q, out6):
    """out6 = adj(ph) @ q for a 6x6 ph, via cofactor minors."""
    for i in range(6):
        acc = 0.0
        for j in range(6):
            m = _minor5(ph, j, i)
            if (i + j) % 2 == 0:
                acc += m * q[j]
            else:
                acc -= m * q[j]
        out6[i] = acc


@njit(cache=True)
def lemma1_pair(ph, q, k_amp, y9):
    """Raw first-stage pair: y9 = regressand for eta, returns the scalar
    regressor k_amp * det(ph).  y9[6:9] is the disturbance-coefficient block
    recovered from the last component of adj(ph) q."""
    adjq6(ph, q, y9[0:6])
    for i in range(6):
        y9[i] *= k_amp
    y9[6] = 0.0
    y9[7] = 0.0
    y9[8] = -y9[5]
    return k_amp * det_n(ph)


@njit(cache=True)
def theta_stage(y1ab, y2ab, y3ab, delta, out3):
    """Pair (Y, M) with Y = M * theta from the selected eta-stage triple."""
    t1 = y1ab
    t2 = y3ab * y1ab
    t3 = -delta * y3ab - y1ab * y2ab
    det_r = t1 * t2 * t3
    out3[0] = det_r * (t2 * t3) * delta
    out3[1] = det_r * (t1 * t3) * t3
    out3[2] = det_r * (t1 * t2) * (y1ab * y1ab)
    return det_r * det_r


@njit(cache=True)
def ti_stage(y3, m, out9):
    """Pair (Y, M) with Y = M * T_I(theta) from the theta-stage pair."""
    y1 = y3[0]
    y2 = y3[1]
    y3_ = y3[2]
    m2 = m * m
    m3 = m2 * m
    out9[0] = m3 * y2 * m
    out9[1] = 0.0
    out9[2] = 0.0
    out9[3] = m2 * (-m2 * y1)
    out9[4] = 0.0
    out9[5] = m2 * (y1 * y2 * y3_)
    out9[6] = 0.0
    out9[7] = m3 * y2 * (-y1)
    out9[8] = 0.0
    return m2 * m2 * y2


@njit(cache=True)
def kappa_stage_pp(y3, m, wd, xd, out4):
    """Pair (Y, M) with Y = M * kappa(theta) for the pole-placement family."""
    y1 = y3[0]
    y2 = y3[1]
    y3_ = y3[2]
    wd2 = wd * wd
    m2 = m * m
    m3 = m2 * m
    m4 = m2 * m2
    m7 = m4 * m3
    m8 = m4 * m4
    m10 = m8 * m2
    ts0 = y1 * y2 * y3_ * wd2 * wd2
    ts1 = -4.0 * y1 * xd * wd
    ts2 = -4.0 * y1 * xd * wd * (y2 * y3_ * wd2 - m2)
    ts3 = (-y1 * y2 * y3_ * wd2 * (4.0 * m2 * xd * xd - y2 * y3_ * wd2 + 2.0 * m2)
           + m4 * y2 + m4 * y1)
    out4[0] = m8 * y2 * ts0
    out4[1] = m10 * y2 * ts1
    out4[2] = m8 * y2 * ts2
    out4[3] = m7 * ts3
    return m8 * m3 * y2


@njit(cache=True)
def kappa_stage_pi(y3, m, out2):
    """PI-family pair; zero sentinel when a square-root argument is negative."""
    y1 = y3[0]
    y2 = y3[1]
    y3_ = y3[2]
    if y1 < 0.0 or y3_ < 0.0:
        out2[0] = 0.0
        out2[1] = 0.0
        return 0.0
    s3 = math.sqrt(y3_)
    ts0 = 2.0 * math.sqrt(y1)
    ts1 = m * y1
    out2[0] = (y2 * y3_) * ts0
    out2[1] = s3 * ts1
    return s3 * y2 * y3_


@njit(cache=True)
def normalize_pair(y, m, floor):
    """Scale (y, m) by 1/|m| when |m| exceeds the floor; ratio-preserving."""
    am = abs(m)
    if am > floor:
        for i in range(y.shape[0]):
            y[i] /= am
        return m / am
    return m


# ---------------------------------------------------------------------------
# coupled right-hand side


@njit(cache=True)
def filter_accum_rhs(t, s, ds, nd, y, u, wrow, Kv, Gm, lv, beta,
                     k1, sigma, k_amp, t_start, y9):
    """Derivatives of the filter bank and of the weighted accumulators.

    Fills the filter/accumulator slots of ds, writes the current raw
    first-stage regressand into y9 and returns the raw scalar regressor.
    wrow is h' Phi_d(t) evaluated by the caller.
    """
    offF, offH, offN, offFf, offV, offpf, offVf, offxd = tail_offsets(nd)

    k1_, k2_, k3_ = Kv[0], Kv[1], Kv[2]

    # z filter: dz = (A0 - K C0') z + K y
    z0 = s[O_Z]
    dz0 = -k1_ * z0 + s[O_Z + 1] + k1_ * y
    dz1 = -k2_ * z0 + s[O_Z + 2] + k2_ * y
    dz2 = -k3_ * z0 + k3_ * y
    ds[O_Z] = dz0
    ds[O_Z + 1] = dz1
    ds[O_Z + 2] = dz2

    # Omega and P filters (3x3, row-major), same companion dynamics
    for j in range(3):
        om0 = s[O_OM + j]
        p0 = s[O_P + j]
        dom0 = -k1_ * om0 + s[O_OM + 3 + j]
        dom1 = -k2_ * om0 + s[O_OM + 6 + j]
        dom2 = -k3_ * om0
        dp0 = -k1_ * p0 + s[O_P + 3 + j]
        dp1 = -k2_ * p0 + s[O_P + 6 + j]
        dp2 = -k3_ * p0
        if j == 0:
            dom0 += y
            dp0 += u
        elif j == 1:
            dom1 += y
            dp1 += u
        else:
            dom2 += y
            dp2 += u
        ds[O_OM + j] = dom0
        ds[O_OM + 3 + j] = dom1
        ds[O_OM + 6 + j] = dom2
        ds[O_P + j] = dp0
        ds[O_P + 3 + j] = dp1
        ds[O_P + 6 + j] = dp2

    qbar = y - z0
    ds[O_QBF] = -k1 * s[O_QBF] + qbar
    ds[O_YF] = -k1 * s[O_YF] + y

    # disturbance-side filters driven by the analytic filter derivatives
    for i in range(nd):
        accF = 0.0
        for j in range(nd):
            accF += Gm[i * nd + j] * (s[offF + j] + lv[j] * y)
        ds[offF + i] = accF - lv[i] * dz0
        for j in range(3):
            accH = 0.0
            accN = 0.0
            for kk in range(nd):
                accH += Gm[i * nd + kk] * s[offH + 3 * kk + j]
                accN += Gm[i * nd + kk] * s[offN + 3 * kk + j]
            ds[offH + 3 * i + j] = accH - lv[i] * ds[O_P + j]
            ds[offN + 3 * i + j] = accN - lv[i] * ds[O_OM + j]
        ds[offFf + i] = -k1 * s[offFf + i] + s[offF + i]

    # extended regressor and its first-order filter
    pb0 = ds[O_OM + 0]
    pb1 = ds[O_OM + 1]
    pb2 = ds[O_OM + 2]
    pb3 = ds[O_P + 0]
    pb4 = ds[O_P + 1]
    pb5 = ds[O_P + 2]
    for i in range(nd):
        pb0 += s[offN + 3 * i + 0] * beta[i]
        pb1 += s[offN + 3 * i + 1] * beta[i]
        pb2 += s[offN + 3 * i + 2] * beta[i]
        pb3 += s[offH + 3 * i + 0] * beta[i]
        pb4 += s[offH + 3 * i + 1] * beta[i]
        pb5 += s[offH + 3 * i + 2] * beta[i]
    ds[O_PBF + 0] = -k1 * s[O_PBF + 0] + pb0
    ds[O_PBF + 1] = -k1 * s[O_PBF + 1] + pb1
    ds[O_PBF + 2] = -k1 * s[O_PBF + 2] + pb2
    ds[O_PBF + 3] = -k1 * s[O_PBF + 3] + pb3
    ds[O_PBF + 4] = -k1 * s[O_PBF + 4] + pb4
    ds[O_PBF + 5] = -k1 * s[O_PBF + 5] + pb5

    # V filter: dV = (A0 - K C0') V + kron(h' Phi_d, I3), V is 3 x 3nd
    w3 = 3 * nd
    for c in range(w3):
        v0 = s[offV + c]
        dv0 = -k1_ * v0 + s[offV + w3 + c]
        dv1 = -k2_ * v0 + s[offV + 2 * w3 + c]
        dv2 = -k3_ * v0
        b = c // 3
        ci = c % 3
        if ci == 0:
            dv0 += wrow[b]
        elif ci == 1:
            dv1 += wrow[b]
        else:
            dv2 += wrow[b]
        ds[offV + c] = dv0
        ds[offV + w3 + c] = dv1
        ds[offV + 2 * w3 + c] = dv2

    # weighted accumulators, active only after the current restart instant
    if t < t_start:
        for i in range(6):
            ds[O_Q + i] = 0.0
            y9[i] = 0.0
        y9[6] = 0.0
        y9[7] = 0.0
        y9[8] = 0.0
        for i in range(36):
            ds[O_PHI + i] = 0.0
        for i in range(nd):
            ds[offpf + i] = 0.0
        for i in range(nd * nd):
            ds[offVf + i] = 0.0
        return 0.0

    wgt = math.exp(-sigma * (t - t_start))
    ssig = qbar - k1 * s[O_QBF]
    for i in range(nd):
        ssig -= beta[i] * (s[offFf + i] + lv[i] * s[O_YF])
    for i in range(6):
        pbi = s[O_PBF + i]
        ds[O_Q + i] = wgt * pbi * ssig
        for j in range(6):
            ds[O_PHI + 6 * i + j] = wgt * pbi * s[O_PBF + j]

    # disturbance-initial-condition accumulators need the current first-stage
    # pair built from the accumulators themselves
    ph = s[O_PHI:O_PHI + 36].reshape((6, 6))
    q6 = s[O_Q:O_Q + 6]
    delta_raw = lemma1_pair(ph, q6, k_amp, y9)
    yd3 = y9[8]

    p = delta_raw * qbar
    for j in range(3):
        p -= s[O_OM + j] * y9[j]
        p -= s[O_P + j] * y9[3 + j]

    d2w = wgt * delta_raw * delta_raw
    for b in range(nd):
        wb = s[offV + 3 * b + 2] * yd3
        ds[offpf + b] = d2w * p * wb
        for c in range(nd):
            wc = s[offV + 3 * c + 2] * yd3
            ds[offVf + b * nd + c] = d2w * wb * wc
    return delta_raw


@njit(cache=True)
def full_rhs(t, s, ds, nd,
             u, c_now, delta_now, t_start, t_iplus,
             a13, a23, a31, b1, d2, kap_true,
             Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
             gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
             wd, xd,
             dither_on, alpha, amps, freqs,
             y9, y9n, yth, yti, ykp, yxd, scnd):
    """Complete coupled derivative at substage time t."""
    y = s[O_XP]

    # reference with vanishing periodic component
    r = c_now
    if dither_on == 1 and t >= t_iplus:
        env = math.exp(-alpha * (t - t_iplus))
        acc = 0.0
        for j in range(amps.shape[0]):
            acc += amps[j] * math.sin(freqs[j] * t)
        r += env * acc

    # plant and integral error
    x1 = s[O_XP]
    x2 = s[O_XP + 1]
    x3 = s[O_XP + 2]
    ds[O_XP] = a13 * x3 + b1 * u
    ds[O_XP + 1] = a23 * x3 + d2 * delta_now
    ds[O_XP + 2] = a31 * (x1 - x2)
    ds[O_EI] = r - y

    # reference model under the ideal full-information law
    e1s = s[O_EIS]
    x1s = s[O_XPS]
    x2s = s[O_XPS + 1]
    x3s = s[O_XPS + 2]
    ustar = kap_true[0] * e1s + kap_true[1] * x1s + kap_true[2] * x2s \
        + kap_true[3] * x3s
    ds[O_XPS] = a13 * x3s + b1 * ustar
    ds[O_XPS + 1] = a23 * x3s + d2 * delta_now
    ds[O_XPS + 2] = a31 * (x1s - x2s)
    ds[O_EIS] = r - x1s

    # exosystem fundamental matrix
    offPhi = N_FIX
    for i in range(nd):
        for j in range(nd):
            acc = 0.0
            for kk in range(nd):
                acc += Ad[i * nd + kk] * s[offPhi + kk * nd + j]
            ds[offPhi + i * nd + j] = acc

    # h' Phi_d(t)
    wrow = scnd[:nd]
    for j in range(nd):
        acc = 0.0
        for i in range(nd):
            acc += hd[i] * s[offPhi + i * nd + j]
        wrow[j] = acc

    delta_raw = filter_accum_rhs(t, s, ds, nd, y, u, wrow, Kv, Gm, lv, beta,
                                 k1, sigma, k_amp, t_start, y9)

    # observer
    offF, offH, offN, offFf, offV, offpf, offVf, offxd = tail_offsets(nd)
    dhat = 0.0
    for j in range(nd):
        dhat += wrow[j] * s[offxd + j]
    xi0 = s[O_XI]
    xi1 = s[O_XI + 1]
    xi2 = s[O_XI + 2]
    innov = y - xi0
    dxi0 = xi1 + u * s[O_ETA + 3] + Lv[0] * innov
    dxi1 = xi2 + y * s[O_ETA + 1] + Lv[1] * innov
    dxi2 = u * s[O_ETA + 5] + dhat * s[O_ETA + 8] + Lv[2] * innov
    ds[O_XI] = dxi0
    ds[O_XI + 1] = dxi1
    ds[O_XI + 2] = dxi2

    # supervision criterion, restarted with the accumulators
    if t >= t_start:
        ds[O_FC] = innov * innov
    else:
        ds[O_FC] = 0.0

    # identification laws
    for i in range(9):
        ds[O_ETA + i] = 0.0
        ds[O_TI + i] = 0.0
    for i in range(4):
        ds[O_KAP + i] = 0.0
    for i in range(nd):
        ds[offxd + i] = 0.0

    if adapt_on != 1:
        return

    for i in range(9):
        y9n[i] = y9[i]
    m_eta = normalize_pair(y9n, delta_raw, floor_eta)
    if m_eta < rho:
        return

    # canonical-coefficient law
    lam_phi = y * y
    uu = u * u + dhat * dhat
    if uu > lam_phi:
        lam_phi = uu
    if gmode == 0:
        g_eta = (gamma1 + gamma0 * lam_phi) / (m_eta * m_eta)
    else:
        g_eta = gamma1 / (m_eta * m_eta)
    for i in range(9):
        ds[O_ETA + i] = -g_eta * m_eta * (m_eta * s[O_ETA + i] - y9n[i])

    # theta-stage pair feeding the transform and controller laws
    m_th = theta_stage(y9n[3], y9n[1], y9n[5], m_eta, yth)
    m_th = normalize_pair(yth, m_th, floor_stage)

    # inverse-transform law
    m_ti = ti_stage(yth, m_th, yti)
    m_ti = normalize_pair(yti, m_ti, floor_stage)
    if abs(m_ti) >= rho:
        lam_xi = xi0 * dxi0 + xi1 * dxi1 + xi2 * dxi2
        if lam_xi < 0.0:
            lam_xi = 0.0
        if gmode == 0:
            g_ti = (gamma1 + gamma0 * lam_xi) / (m_ti * m_ti)
        else:
            g_ti = gamma1 / (m_ti * m_ti)
        for i in range(9):
            ds[O_TI + i] = -g_ti * m_ti * (m_ti * s[O_TI + i] - yti[i])

    # disturbance-initial-condition law
    vf = s[offVf:offVf + nd * nd].reshape((nd, nd))
    m_xd = det_n(vf)
    adjbuf = scnd[nd:nd + nd * nd].reshape((nd, nd))
    adj_n(vf, adjbuf)
    for i in range(nd):
        acc = 0.0
        for j in range(nd):
            acc += adjbuf[i, j] * s[offpf + j]
        yxd[i] = acc
    m_xd = normalize_pair(yxd, m_xd, floor_stage)
    if abs(m_xd) >= rho:
        g_xd = gamma1 / (m_xd * m_xd)
        for i in range(nd):
            ds[offxd + i] = -g_xd * m_xd * (m_xd * s[offxd + i] - yxd[i])

    # controller-gain law (pole-placement family)
    m_kp = kappa_stage_pp(yth, m_th, wd, xd, ykp)
    m_kp = normalize_pair(ykp, m_kp, floor_stage)
    if abs(m_kp) >= rho:
        xh1 = s[O_TI + 0] * xi0 + s[O_TI + 1] * xi1 + s[O_TI + 2] * xi2
        xh2 = s[O_TI + 3] * xi0 + s[O_TI + 4] * xi1 + s[O_TI + 5] * xi2
        xh3 = s[O_TI + 6] * xi0 + s[O_TI + 7] * xi1 + s[O_TI + 8] * xi2
        lam_x = s[O_EI] ** 2 + xh1 * xh1 + xh2 * xh2 + xh3 * xh3
        if gmode == 0:
            g_kp = (gamma1 + gamma0 * lam_x) / (m_kp * m_kp)
        else:
            g_kp = gamma1 / (m_kp * m_kp)
        for i in range(4):
            ds[O_KAP + i] = -g_kp * m_kp * (m_kp * s[O_KAP + i] - ykp[i])


@njit(cache=True)
def filter_bank_rk4(s, t, dt, nd, y, u, wrow, Kv, Gm, lv, beta,
                    k1, sigma, k_amp, t_start):
    """RK4 advance of the filter bank alone (held y, u, h\' Phi_d row)."""
    ns = s.shape[0]
    ds1 = np.zeros(ns)
    ds2 = np.zeros(ns)
    ds3 = np.zeros(ns)
    ds4 = np.zeros(ns)
    stmp = np.empty(ns)
    y9 = np.empty(9)
    filter_accum_rhs(t, s, ds1, nd, y, u, wrow, Kv, Gm, lv, beta,
                     k1, sigma, k_amp, t_start, y9)
    for i in range(ns):
        stmp[i] = s[i] + 0.5 * dt * ds1[i]
    filter_accum_rhs(t + 0.5 * dt, stmp, ds2, nd, y, u, wrow, Kv, Gm, lv,
                     beta, k1, sigma, k_amp, t_start, y9)
    for i in range(ns):
        stmp[i] = s[i] + 0.5 * dt * ds2[i]
    filter_accum_rhs(t + 0.5 * dt, stmp, ds3, nd, y, u, wrow, Kv, Gm, lv,
                     beta, k1, sigma, k_amp, t_start, y9)
    for i in range(ns):
        stmp[i] = s[i] + dt * ds3[i]
    filter_accum_rhs(t + dt, stmp, ds4, nd, y, u, wrow, Kv, Gm, lv,
                     beta, k1, sigma, k_amp, t_start, y9)
    for i in range(ns):
        s[i] += dt / 6.0 * (ds1[i] + 2.0 * ds2[i] + 2.0 * ds3[i] + ds4[i])


# ---------------------------------------------------------------------------
# telemetry emission and the main loop


@njit(cache=True)
def emit_row(tel, row, t, s, nd, u, c_now, delta_now, t_iplus,
             dither_on, alpha, amps, freqs,
             Kv, beta, k_amp, rho, floor_eta, floor_stage, wd, xd,
             eta_true, ti_true, kap_true, xd0_true, hd,
             reset_flag, y9, y9n, yth, yti, ykp, yxd, scnd):
    """Write one telemetry record from the state at time t."""
    offF, offH, offN, offFf, offV, offpf, offVf, offxd = tail_offsets(nd)
    offPhi = N_FIX

    y = s[O_XP]
    d_val = 0.0
    if dither_on == 1 and t >= t_iplus:
        env = math.exp(-alpha * (t - t_iplus))
        acc = 0.0
        for j in range(amps.shape[0]):
            acc += amps[j] * math.sin(freqs[j] * t)
        d_val = env * acc
    r = c_now + d_val

    wrow = scnd[:nd]
    for j in range(nd):
        acc = 0.0
        for i in range(nd):
            acc += hd[i] * s[offPhi + i * nd + j]
        wrow[j] = acc
    dhat = 0.0
    for j in range(nd):
        dhat += wrow[j] * s[offxd + j]

    xi0 = s[O_XI]
    xi1 = s[O_XI + 1]
    xi2 = s[O_XI + 2]
    xh1 = s[O_TI + 0] * xi0 + s[O_TI + 1] * xi1 + s[O_TI + 2] * xi2
    xh2 = s[O_TI + 3] * xi0 + s[O_TI + 4] * xi1 + s[O_TI + 5] * xi2
    xh3 = s[O_TI + 6] * xi0 + s[O_TI + 7] * xi1 + s[O_TI + 8] * xi2

    tel[row, C_T] = t
    tel[row, C_R] = r
    tel[row, C_C] = c_now
    tel[row, C_DITH] = d_val
    tel[row, C_Y] = y
    tel[row, C_U] = u
    tel[row, C_DELTA] = delta_now
    tel[row, C_DELTAH] = dhat
    tel[row, C_EI] = s[O_EI]
    for i in range(3):
        tel[row, C_X1 + i] = s[O_XP + i]
    tel[row, C_XH1] = xh1
    tel[row, C_XH1 + 1] = xh2
    tel[row, C_XH1 + 2] = xh3
    for i in range(3):
        tel[row, C_XI1 + i] = s[O_XI + i]
    tel[row, C_EIS] = s[O_EIS]
    for i in range(3):
        tel[row, C_X1S + i] = s[O_XPS + i]
    for i in range(4):
        tel[row, C_KAP + i] = s[O_KAP + i]

    eta_err = 0.0
    ti_err = 0.0
    for i in range(9):
        de = s[O_ETA + i] - eta_true[i]
        eta_err += de * de
        dti = s[O_TI + i] - ti_true[i]
        ti_err += dti * dti
    eta_err = math.sqrt(eta_err)
    ti_err = math.sqrt(ti_err)
    xd_err = 0.0
    for i in range(nd):
        dx = s[offxd + i] - xd0_true[i]
        xd_err += dx * dx
    xd_err = math.sqrt(xd_err)
    kap_err = 0.0
    for i in range(4):
        dk = s[O_KAP + i] - kap_true[i]
        kap_err += dk * dk
    kap_err = math.sqrt(kap_err)
    xp_err2 = ((xh1 - s[O_XP]) ** 2 + (xh2 - s[O_XP + 1]) ** 2
               + (xh3 - s[O_XP + 2]) ** 2)
    eref2 = (s[O_EI] - s[O_EIS]) ** 2
    for i in range(3):
        de = s[O_XP + i] - s[O_XPS + i]
        eref2 += de * de
    tel[row, C_ETAERR] = eta_err
    tel[row, C_TIERR] = ti_err
    tel[row, C_XD0ERR] = xd_err
    tel[row, C_KAPERR] = kap_err
    tel[row, C_XPERR] = math.sqrt(xp_err2)
    tel[row, C_ZETA] = math.sqrt(xp_err2 + eref2 + kap_err * kap_err)

    # current extended regressor (analytic filter derivatives, row 0)
    k1_ = Kv[0]
    for j in range(3):
        dom0 = -k1_ * s[O_OM + j] + s[O_OM + 3 + j]
        dp0 = -k1_ * s[O_P + j] + s[O_P + 3 + j]
        if j == 0:
            dom0 += y
            dp0 += u
        nb = 0.0
        hb = 0.0
        for i in range(nd):
            nb += s[offN + 3 * i + j] * beta[i]
            hb += s[offH + 3 * i + j] * beta[i]
        tel[row, C_PHIBAR + j] = dom0 + nb
        tel[row, C_PHIBAR + 3 + j] = dp0 + hb

    # regression pairs, normalized
    ph = s[O_PHI:O_PHI + 36].reshape((6, 6))
    q6 = s[O_Q:O_Q + 6]
    delta_raw = lemma1_pair(ph, q6, k_amp, y9)
    for i in range(9):
        y9n[i] = y9[i]
    m_eta = normalize_pair(y9n, delta_raw, floor_eta)
    tel[row, C_DRAW] = delta_raw
    tel[row, C_GATE] = 1.0 if m_eta >= rho else 0.0
    tel[row, C_FCRIT] = s[O_FC]
    tel[row, C_RESET] = reset_flag
    tel[row, C_META] = m_eta
    for i in range(9):
        tel[row, C_YETA + i] = y9n[i]

    m_th = theta_stage(y9n[3], y9n[1], y9n[5], m_eta, yth)
    m_th = normalize_pair(yth, m_th, floor_stage)
    tel[row, C_MTH] = m_th
    for i in range(3):
        tel[row, C_YTH + i] = yth[i]

    m_ti = ti_stage(yth, m_th, yti)
    m_ti = normalize_pair(yti, m_ti, floor_stage)
    tel[row, C_MTI] = m_ti
    for i in range(9):
        tel[row, C_YTI + i] = yti[i]

    m_kp = kappa_stage_pp(yth, m_th, wd, xd, ykp)
    m_kp = normalize_pair(ykp, m_kp, floor_stage)
    tel[row, C_MKAP] = m_kp
    for i in range(4):
        tel[row, C_YKAP + i] = ykp[i]

    vf = s[offVf:offVf + nd * nd].reshape((nd, nd))
    m_xd = det_n(vf)
    adjbuf = scnd[nd:nd + nd * nd].reshape((nd, nd))
    adj_n(vf, adjbuf)
    for i in range(nd):
        acc = 0.0
        for j in range(nd):
            acc += adjbuf[i, j] * s[offpf + j]
        yxd[i] = acc
    m_xd = normalize_pair(yxd, m_xd, floor_stage)
    tel[row, C_MXD] = m_xd
    for i in range(nd):
        tel[row, C_YXD + i] = yxd[i]


@njit(cache=True)
def simulate(nd, n_steps, dt, decim, s,
             theta_steps, theta_vals, delta_steps, delta_vals, xd0_true_vals,
             Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
             gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
             wd, xd,
             dither_on, alpha, amps, freqs,
             sq_amp, sq_half_steps,
             t_eps, f_max, refr_steps, supervisor_on,
             tel, reset_steps):
    """Run the coupled loop; returns (status, fault_step, n_resets, n_rows).

    status 0 = completed, 3 = numeric fault (non-finite state detected after
    the reported step; telemetry holds every row emitted before the fault).
    """
    ns = s.shape[0]
    ds1 = np.empty(ns)
    ds2 = np.empty(ns)
    ds3 = np.empty(ns)
    ds4 = np.empty(ns)
    stmp = np.empty(ns)
    y9 = np.empty(9)
    y9n = np.empty(9)
    yth = np.empty(3)
    yti = np.empty(9)
    ykp = np.empty(4)
    yxd = np.empty(nd)
    scnd = np.empty(nd + nd * nd)
    eta_true = np.empty(9)
    ti_true = np.empty(9)
    kap_true = np.empty(4)
    xd0_true = np.empty(nd)

    ith = 0
    t1_, t2_, t3_ = theta_vals[0, 0], theta_vals[0, 1], theta_vals[0, 2]
    a13 = -1.0 / t1_
    a23 = 1.0 / t2_
    a31 = 1.0 / t3_
    b1 = 1.0 / t1_
    d2 = -1.0 / t2_
    eta_flat(t1_, t2_, t3_, eta_true)
    ti_flat(t1_, t2_, t3_, ti_true)
    kappa_pp_flat(t1_, t2_, t3_, wd, xd, kap_true)

    idl = 0
    delta_now = delta_vals[0]
    for i in range(nd):
        xd0_true[i] = xd0_true_vals[0, i]

    t_start = t_eps
    t_iplus = t_eps
    t_eps_step = int(round(t_eps / dt))
    last_reset_step = t_eps_step
    n_resets = 0

    xh2 = s[O_TI + 3] * s[O_XI] + s[O_TI + 4] * s[O_XI + 1] \
        + s[O_TI + 5] * s[O_XI + 2]
    xh3 = s[O_TI + 6] * s[O_XI] + s[O_TI + 7] * s[O_XI + 1] \
        + s[O_TI + 8] * s[O_XI + 2]
    u = control_u(s[O_KAP:O_KAP + 4], s[O_EI], s[O_XP], xh2, xh3)

    c_now = sq_amp if (0 // sq_half_steps) % 2 == 0 else -sq_amp
    emit_row(tel, 0, 0.0, s, nd, u, c_now, delta_now, t_iplus,
             dither_on, alpha, amps, freqs,
             Kv, beta, k_amp, rho, floor_eta, floor_stage, wd, xd,
             eta_true, ti_true, kap_true, xd0_true, hd,
             0.0, y9, y9n, yth, yti, ykp, yxd, scnd)
    irow = 1

    for k in range(n_steps):
        # piecewise-constant events take effect on the step starting at the
        # switch instant; the step ending there still uses the old values
        while ith + 1 < theta_steps.shape[0] and theta_steps[ith + 1] == k:
            ith += 1
            t1_, t2_, t3_ = (theta_vals[ith, 0], theta_vals[ith, 1],
                             theta_vals[ith, 2])
            a13 = -1.0 / t1_
            a23 = 1.0 / t2_
            a31 = 1.0 / t3_
            b1 = 1.0 / t1_
            d2 = -1.0 / t2_
            eta_flat(t1_, t2_, t3_, eta_true)
            ti_flat(t1_, t2_, t3_, ti_true)
            kappa_pp_flat(t1_, t2_, t3_, wd, xd, kap_true)
        while idl + 1 < delta_steps.shape[0] and delta_steps[idl + 1] == k:
            idl += 1
            delta_now = delta_vals[idl]
            for i in range(nd):
                xd0_true[i] = xd0_true_vals[idl, i]
        c_now = sq_amp if (k // sq_half_steps) % 2 == 0 else -sq_amp

        t = k * dt
        full_rhs(t, s, ds1, nd, u, c_now, delta_now, t_start, t_iplus,
                 a13, a23, a31, b1, d2, kap_true,
                 Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
                 gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
                 wd, xd, dither_on, alpha, amps, freqs,
                 y9, y9n, yth, yti, ykp, yxd, scnd)
        for i in range(ns):
            stmp[i] = s[i] + 0.5 * dt * ds1[i]
        full_rhs(t + 0.5 * dt, stmp, ds2, nd, u, c_now, delta_now, t_start,
                 t_iplus, a13, a23, a31, b1, d2, kap_true,
                 Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
                 gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
                 wd, xd, dither_on, alpha, amps, freqs,
                 y9, y9n, yth, yti, ykp, yxd, scnd)
        for i in range(ns):
            stmp[i] = s[i] + 0.5 * dt * ds2[i]
        full_rhs(t + 0.5 * dt, stmp, ds3, nd, u, c_now, delta_now, t_start,
                 t_iplus, a13, a23, a31, b1, d2, kap_true,
                 Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
                 gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
                 wd, xd, dither_on, alpha, amps, freqs,
                 y9, y9n, yth, yti, ykp, yxd, scnd)
        for i in range(ns):
            stmp[i] = s[i] + dt * ds3[i]
        full_rhs(t + dt, stmp, ds4, nd, u, c_now, delta_now, t_start,
                 t_iplus, a13, a23, a31, b1, d2, kap_true,
                 Ad, hd, Kv, Lv, Gm, lv, beta, k1, sigma, k_amp,
                 gamma0, gamma1, rho, floor_eta, floor_stage, gmode, adapt_on,
                 wd, xd, dither_on, alpha, amps, freqs,
                 y9, y9n, yth, yti, ykp, yxd, scnd)
        for i in range(ns):
            s[i] += dt / 6.0 * (ds1[i] + 2.0 * ds2[i] + 2.0 * ds3[i] + ds4[i])

        kp1 = k + 1
        ok = True
        for i in range(ns):
            if not np.isfinite(s[i]):
                ok = False
                break
        if not ok:
            return 3, kp1, n_resets, irow

        # control for the next step from the just-updated estimates
        xh2 = s[O_TI + 3] * s[O_XI] + s[O_TI + 4] * s[O_XI + 1] \
            + s[O_TI + 5] * s[O_XI + 2]
        xh3 = s[O_TI + 6] * s[O_XI] + s[O_TI + 7] * s[O_XI + 1] \
            + s[O_TI + 8] * s[O_XI + 2]
        u = control_u(s[O_KAP:O_KAP + 4], s[O_EI], s[O_XP], xh2, xh3)

        # supervision: restart accumulators when the criterion tops out
        reset_flag = 0.0
        if (supervisor_on == 1 and s[O_FC] >= f_max
                and kp1 - last_reset_step >= refr_steps):
            offF, offH, offN, offFf, offV, offpf, offVf, offxd = \
                tail_offsets(nd)
            for i in range(6):
                s[O_Q + i] = 0.0
            for i in range(36):
                s[O_PHI + i] = 0.0
            for i in range(nd):
                s[offpf + i] = 0.0
            for i in range(nd * nd):
                s[offVf + i] = 0.0
            s[O_FC] = 0.0
            t_start = kp1 * dt
            t_iplus = t_start
            last_reset_step = kp1
            if n_resets < reset_steps.shape[0]:
                reset_steps[n_resets] = kp1
            n_resets += 1
            reset_flag = 1.0

        if kp1 % decim == 0:
            # the row reflects the reference segment of the *next* step for
            # piecewise-constant signals; recompute c for continuity
            c_rec = sq_amp if (kp1 // sq_half_steps) % 2 == 0 else -sq_amp
            emit_row(tel, irow, kp1 * dt, s, nd, u, c_rec, delta_now, t_iplus,
                     dither_on, alpha, amps, freqs,
                     Kv, beta, k_amp, rho, floor_eta, floor_stage, wd, xd,
                     eta_true, ti_true, kap_true, xd0_true, hd,
                     reset_flag, y9, y9n, yth, yti, ykp, yxd, scnd)
            irow += 1

    return 0, -1, n_resets, irow
