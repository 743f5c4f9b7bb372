"""Compiled inner loops for the class-resolved atomic solvers.

Each kernel advances every detuning class of one spatial slice across a
time window, driven by the local field samples.  Integration is RK4 on the
interaction-picture state (the stiff free-evolution phase exp(i*Delta*t)
is applied exactly through precomputed per-step factors), with a
per-sample substep count chosen from the local drive amplitude.  Field
values between samples come from Catmull-Rom interpolation.

All loops are serial with a fixed accumulation order, so results are
bit-reproducible regardless of thread configuration.
"""

import numpy as np
from numba import njit

# Substep counts are powers of two; tables carry levels 0..LMAX+1 so that a
# half step at level L is the full step at level L+1.
LMAX = 10


@njit(cache=True, inline="always")
def _pick_level(amp, dt, base_level, max_level, c_rabi, c_acc, osc4, scale):
    """Smallest refinement level whose substep satisfies the error targets."""
    lev = base_level
    h = dt / (1 << lev)
    if amp <= 0.0:
        return lev
    h_allowed = c_rabi / amp
    if osc4 > 0.0:
        h5 = (c_acc / (amp * osc4)) ** 0.2
        if h5 < h_allowed:
            h_allowed = h5
    h_allowed /= scale
    while h > h_allowed and lev < max_level:
        lev += 1
        h *= 0.5
    return lev


@njit(cache=True)
def two_level_window(cg, ce, E, wgt, dt, sign_idx, ff, gg,
                     base_level, max_level, c_rabi, c_acc, osc4, scale,
                     out_pw, store_traj, traj_cg, traj_ce):
    """Advance all two-level classes of one slice over a time window.

    Args:
        cg, ce: (nc,) class amplitudes, updated in place.
        E: (nt,) complex field at this slice.
        wgt: (nc,) quadrature weights (distribution g included).
        sign_idx: (nt-1,) 0/1 detuning-sign index per sample interval.
        ff, gg: (2, LMAX+2, nc) free-evolution factors exp(+/-(i s Delta
            - Gamma) h) per sign and level.
        out_pw: (nt,) weighted coherence sum(w * conj(cg) * ce), written at
            every sample time.
        traj_cg, traj_ce: (nt, nc) per-sample states when store_traj.

    Returns:
        (total substeps, max level used).
    """
    nt = E.shape[0]
    nc = cg.shape[0]
    acc = 0.0 + 0.0j
    for k in range(nc):
        acc += wgt[k] * np.conj(cg[k]) * ce[k]
    out_pw[0] = acc
    if store_traj:
        for k in range(nc):
            traj_cg[0, k] = cg[k]
            traj_ce[0, k] = ce[k]

    phi = np.empty(nc, np.complex128)
    psi = np.empty(nc, np.complex128)
    nsub_total = 0
    lev_max_used = 0

    for j in range(nt - 1):
        s = sign_idx[j]
        em1 = E[j - 1] if j >= 1 else E[0]
        e0 = E[j]
        ep1 = E[j + 1]
        ep2 = E[j + 2] if j + 2 < nt else E[nt - 1]
        c0 = e0
        c1 = 0.5 * (ep1 - em1)
        c2 = em1 - 2.5 * e0 + 2.0 * ep1 - 0.5 * ep2
        c3 = 0.5 * (ep2 - em1) + 1.5 * (e0 - ep1)

        amp = abs(e0)
        if abs(ep1) > amp:
            amp = abs(ep1)
        lev = _pick_level(amp, dt, base_level, max_level,
                          c_rabi, c_acc, osc4, scale)
        if lev > lev_max_used:
            lev_max_used = lev
        m = 1 << lev
        h = dt / m
        nsub_total += m

        for k in range(nc):
            phi[k] = 1.0 + 0.0j
            psi[k] = 1.0 + 0.0j
        ff_f = ff[s, lev]
        ff_h = ff[s, lev + 1]
        gg_f = gg[s, lev]
        gg_h = gg[s, lev + 1]

        uinv = 1.0 / m
        e_lo = c0
        for i in range(m):
            um = (i + 0.5) * uinv
            u1 = (i + 1.0) * uinv
            e_mid = c0 + um * (c1 + um * (c2 + um * c3))
            e_hi = c0 + u1 * (c1 + u1 * (c2 + u1 * c3))
            a0 = -0.5j * np.conj(e_lo)
            b0 = -0.5j * e_lo
            am = -0.5j * np.conj(e_mid)
            bm = -0.5j * e_mid
            a1 = -0.5j * np.conj(e_hi)
            b1 = -0.5j * e_hi
            for k in range(nc):
                p0 = phi[k]
                q0 = psi[k]
                pm = p0 * ff_h[k]
                qm = q0 * gg_h[k]
                p1 = p0 * ff_f[k]
                q1 = q0 * gg_f[k]
                g0 = cg[k]
                x0 = ce[k]
                k1g = a0 * (p0 * x0)
                k1e = b0 * (q0 * g0)
                k2g = am * (pm * (x0 + 0.5 * h * k1e))
                k2e = bm * (qm * (g0 + 0.5 * h * k1g))
                k3g = am * (pm * (x0 + 0.5 * h * k2e))
                k3e = bm * (qm * (g0 + 0.5 * h * k2g))
                k4g = a1 * (p1 * (x0 + h * k3e))
                k4e = b1 * (q1 * (g0 + h * k3g))
                cg[k] = g0 + (h / 6.0) * (k1g + 2.0 * (k2g + k3g) + k4g)
                ce[k] = x0 + (h / 6.0) * (k1e + 2.0 * (k2e + k3e) + k4e)
                phi[k] = p1
                psi[k] = q1
            e_lo = e_hi

        acc = 0.0 + 0.0j
        for k in range(nc):
            ce[k] = ce[k] * phi[k]
            acc += wgt[k] * np.conj(cg[k]) * ce[k]
        out_pw[j + 1] = acc
        if store_traj:
            for k in range(nc):
                traj_cg[j + 1, k] = cg[k]
                traj_ce[j + 1, k] = ce[k]

    return nsub_total, lev_max_used


@njit(cache=True)
def lambda_window(pp, ss, E, Om, wgt, dt, fP, gP, fS, gS,
                  base_level, max_level, c_rabi, c_acc, osc4, scale,
                  out_pw, out_exc, out_decay, gamma,
                  store_traj, traj_p, traj_s):
    """Advance all perturbative Lambda-system classes of one slice.

    State per class is (P, S): optical and spin coherence.  ``Om`` is the
    control-field envelope (z-independent), sampled like E.  ``fP``/``gP``
    are per-class exp(+/-(i Delta - Gamma) h) tables, ``fS``/``gS`` scalar
    exp(+/- i two_photon h) tables.

    Writes the weighted polarization sum, the weighted excitation
    sum(w (|P|^2 + |S|^2)) and the cumulative decay integral
    2 Gamma integral sum(w |P|^2) dt at every sample.

    Returns:
        (total substeps, max level used).
    """
    nt = E.shape[0]
    nc = pp.shape[0]

    acc = 0.0 + 0.0j
    exc = 0.0
    dec_rate = 0.0
    for k in range(nc):
        acc += wgt[k] * pp[k]
        exc += wgt[k] * (abs(pp[k]) ** 2 + abs(ss[k]) ** 2)
        dec_rate += wgt[k] * abs(pp[k]) ** 2
    out_pw[0] = acc
    out_exc[0] = exc
    out_decay[0] = 0.0
    dec_prev = 2.0 * gamma * dec_rate
    dec_cum = 0.0
    if store_traj:
        for k in range(nc):
            traj_p[0, k] = pp[k]
            traj_s[0, k] = ss[k]

    phiP = np.empty(nc, np.complex128)
    psiP = np.empty(nc, np.complex128)
    nsub_total = 0
    lev_max_used = 0

    for j in range(nt - 1):
        em1 = E[j - 1] if j >= 1 else E[0]
        e0 = E[j]
        ep1 = E[j + 1]
        ep2 = E[j + 2] if j + 2 < nt else E[nt - 1]
        ce0 = e0
        ce1 = 0.5 * (ep1 - em1)
        ce2 = em1 - 2.5 * e0 + 2.0 * ep1 - 0.5 * ep2
        ce3 = 0.5 * (ep2 - em1) + 1.5 * (e0 - ep1)

        # control is interpolated linearly: it may switch discontinuously,
        # and a cubic through a step rings/overshoots
        o0 = Om[j]
        op1 = Om[j + 1]
        co0 = o0
        co1 = op1 - o0
        co2 = 0.0 + 0.0j
        co3 = 0.0 + 0.0j

        amp = abs(e0) + abs(o0)
        a_next = abs(ep1) + abs(op1)
        if a_next > amp:
            amp = a_next
        lev = _pick_level(amp, dt, base_level, max_level,
                          c_rabi, c_acc, osc4, scale)
        if lev > lev_max_used:
            lev_max_used = lev
        m = 1 << lev
        h = dt / m
        nsub_total += m

        for k in range(nc):
            phiP[k] = 1.0 + 0.0j
            psiP[k] = 1.0 + 0.0j
        fP_f = fP[lev]
        fP_h = fP[lev + 1]
        gP_f = gP[lev]
        gP_h = gP[lev + 1]
        fS_f = fS[lev]
        fS_h = fS[lev + 1]
        gS_f = gS[lev]
        gS_h = gS[lev + 1]

        phS = 1.0 + 0.0j
        psS = 1.0 + 0.0j
        uinv = 1.0 / m
        e_lo = ce0
        o_lo = co0
        for i in range(m):
            um = (i + 0.5) * uinv
            u1 = (i + 1.0) * uinv
            e_mid = ce0 + um * (ce1 + um * (ce2 + um * ce3))
            e_hi = ce0 + u1 * (ce1 + u1 * (ce2 + u1 * ce3))
            o_mid = co0 + um * (co1 + um * (co2 + um * co3))
            o_hi = co0 + u1 * (co1 + u1 * (co2 + u1 * co3))

            phS_m = phS * fS_h
            psS_m = psS * gS_h
            phS_1 = phS * fS_f
            psS_1 = psS * gS_f

            A0 = -0.5j * (o_lo * phS)
            B0 = -0.5j * e_lo
            C0 = -0.5j * (np.conj(o_lo) * psS)
            Am = -0.5j * (o_mid * phS_m)
            Bm = -0.5j * e_mid
            Cm = -0.5j * (np.conj(o_mid) * psS_m)
            A1 = -0.5j * (o_hi * phS_1)
            B1 = -0.5j * e_hi
            C1 = -0.5j * (np.conj(o_hi) * psS_1)

            for k in range(nc):
                pk0 = phiP[k]
                qk0 = psiP[k]
                pkm = pk0 * fP_h[k]
                qkm = qk0 * gP_h[k]
                pk1 = pk0 * fP_f[k]
                qk1 = qk0 * gP_f[k]
                P0 = pp[k]
                S0 = ss[k]
                k1p = qk0 * (A0 * S0 + B0)
                k1s = C0 * (pk0 * P0)
                k2p = qkm * (Am * (S0 + 0.5 * h * k1s) + Bm)
                k2s = Cm * (pkm * (P0 + 0.5 * h * k1p))
                k3p = qkm * (Am * (S0 + 0.5 * h * k2s) + Bm)
                k3s = Cm * (pkm * (P0 + 0.5 * h * k2p))
                k4p = qk1 * (A1 * (S0 + h * k3s) + B1)
                k4s = C1 * (pk1 * (P0 + h * k3p))
                pp[k] = P0 + (h / 6.0) * (k1p + 2.0 * (k2p + k3p) + k4p)
                ss[k] = S0 + (h / 6.0) * (k1s + 2.0 * (k2s + k3s) + k4s)
                phiP[k] = pk1
                psiP[k] = qk1
            phS = phS_1
            psS = psS_1
            e_lo = e_hi
            o_lo = o_hi

        acc = 0.0 + 0.0j
        exc = 0.0
        dec_rate = 0.0
        for k in range(nc):
            pp[k] = pp[k] * phiP[k]
            ss[k] = ss[k] * phS
            acc += wgt[k] * pp[k]
            exc += wgt[k] * (abs(pp[k]) ** 2 + abs(ss[k]) ** 2)
            dec_rate += wgt[k] * abs(pp[k]) ** 2
        out_pw[j + 1] = acc
        out_exc[j + 1] = exc
        dec_now = 2.0 * gamma * dec_rate
        dec_cum += 0.5 * (dec_prev + dec_now) * dt
        dec_prev = dec_now
        out_decay[j + 1] = dec_cum
        if store_traj:
            for k in range(nc):
                traj_p[j + 1, k] = pp[k]
                traj_s[j + 1, k] = ss[k]

    return nsub_total, lev_max_used


def two_level_tables(delta, gamma, dt):
    """Free-evolution factor tables for the two-level kernel.

    Returns (ff, gg) with shape (2, LMAX+2, nc): forward and inverse
    factors exp(+/-(i s Delta - Gamma) h) for both detuning signs and all
    refinement levels (level L has h = dt / 2**L).
    """
    delta = np.asarray(delta, dtype=float)
    nc = delta.size
    ff = np.empty((2, LMAX + 2, nc), np.complex128)
    gg = np.empty((2, LMAX + 2, nc), np.complex128)
    for lev in range(LMAX + 2):
        h = dt / (1 << lev)
        for s, sgn in ((0, 1.0), (1, -1.0)):
            lam = (1j * sgn * delta - gamma) * h
            ff[s, lev] = np.exp(lam)
            gg[s, lev] = np.exp(-lam)
    return ff, gg


def lambda_tables(delta, gamma, two_photon, dt):
    """Factor tables for the Lambda kernel: per-class P factors and scalar
    S factors (spin decay is zero by construction)."""
    delta = np.asarray(delta, dtype=float)
    nc = delta.size
    fP = np.empty((LMAX + 2, nc), np.complex128)
    gP = np.empty((LMAX + 2, nc), np.complex128)
    fS = np.empty(LMAX + 2, np.complex128)
    gS = np.empty(LMAX + 2, np.complex128)
    for lev in range(LMAX + 2):
        h = dt / (1 << lev)
        lam = (1j * delta - gamma) * h
        fP[lev] = np.exp(lam)
        gP[lev] = np.exp(-lam)
        fS[lev] = np.exp(1j * two_photon * h)
        gS[lev] = np.exp(-1j * two_photon * h)
    return fP, gP, fS, gS
