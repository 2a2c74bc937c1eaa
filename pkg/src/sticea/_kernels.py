"""Jitted numerical cores for the ODE and Markov engines.

Parameter vectors are packed as float64[12]:

    [omega_fl, omega_fh, omega_ml, omega_mh,
     chi, t23, t34, t45, t15, beta, coverage, efficacy]

with ``t*`` understood as per-year rates for the ODE kernels and as
per-cycle probabilities for the Markov kernels. State arrays are (4, 5)
in the canonical stratum order (FL, FH, ML, MH) x health-state order.

Status codes: 0 ok, 1 degenerate population, 2 negative state,
3 probability overflow (payload = offending cycle).
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

OK = 0
DEGENERATE = 1
NEGATIVE = 2
OVERFLOW = 3

P_LEN = 12

# parameter vector slots
_OM = 0  # .. 3
_CHI, _T23, _T34, _T45, _T15, _BETA, _COV, _EFF = 4, 5, 6, 7, 8, 9, 10, 11


@njit(cache=True)
def _sex_prevalence(y, p):
    """Weighted prevalence among (female, male) partners.

    An empty or inactive partner pool contributes zero prevalence (nobody
    to select a partner from means no exposure), so an emptied sex is a
    transmission dead end rather than an error inside the engines.
    """
    # females occupy strata 0 (low) / 1 (high), males 2 / 3
    nfl = y[0, 0] + y[0, 1] + y[0, 2] + y[0, 3]
    nfh = y[1, 0] + y[1, 1] + y[1, 2] + y[1, 3]
    nml = y[2, 0] + y[2, 1] + y[2, 2] + y[2, 3]
    nmh = y[3, 0] + y[3, 1] + y[3, 2] + y[3, 3]

    den_f = p[_OM + 1] * nfh + p[_OM + 0] * nfl
    den_m = p[_OM + 3] * nmh + p[_OM + 2] * nml

    pfem = 0.0
    if den_f > 0.0:
        gfh = p[_OM + 1] * nfh / den_f
        if gfh > 0.0:
            pfem += gfh * y[1, 1] / nfh
        if gfh < 1.0:
            pfem += (1.0 - gfh) * y[0, 1] / nfl
    pmal = 0.0
    if den_m > 0.0:
        gmh = p[_OM + 3] * nmh / den_m
        if gmh > 0.0:
            pmal += gmh * y[3, 1] / nmh
        if gmh < 1.0:
            pmal += (1.0 - gmh) * y[2, 1] / nml
    return pfem, pmal, OK


@njit(cache=True)
def _foi(p, stratum, pfem, pmal):
    """Vaccination-adjusted force of infection (rate/year) for one stratum."""
    psi = pmal if stratum < 2 else pfem  # partners are the opposite sex
    base = p[_BETA] * p[_OM + stratum] * psi
    return p[_COV] * (1.0 - p[_EFF]) * base + (1.0 - p[_COV]) * base


@njit(cache=True)
def ode_rhs(y, p, out):
    """Time derivatives of all compartments; returns a status code."""
    pfem, pmal, _ = _sex_prevalence(y, p)
    for b in range(4):
        lam = _foi(p, b, pfem, pmal)
        n1, n2, n3, n4 = y[b, 0], y[b, 1], y[b, 2], y[b, 3]
        alive = n1 + n2 + n3 + n4
        out[b, 0] = p[_CHI] * alive - (lam + p[_T15]) * n1
        out[b, 1] = lam * n1 - (p[_T23] + p[_T15]) * n2
        out[b, 2] = p[_T23] * n2 - (p[_T34] + p[_T15]) * n3
        out[b, 3] = p[_T34] * n3 - (p[_T45] + p[_T15]) * n4
        out[b, 4] = p[_T15] * alive + p[_T45] * n4
    return OK


@njit(cache=True)
def _rk4_step(y, p, h, k1, k2, k3, k4, tmp, ynew):
    status = ode_rhs(y, p, k1)
    if status != OK:
        return status
    for b in range(4):
        for s in range(5):
            tmp[b, s] = y[b, s] + 0.5 * h * k1[b, s]
    status = ode_rhs(tmp, p, k2)
    if status != OK:
        return status
    for b in range(4):
        for s in range(5):
            tmp[b, s] = y[b, s] + 0.5 * h * k2[b, s]
    status = ode_rhs(tmp, p, k3)
    if status != OK:
        return status
    for b in range(4):
        for s in range(5):
            tmp[b, s] = y[b, s] + h * k3[b, s]
    status = ode_rhs(tmp, p, k4)
    if status != OK:
        return status
    for b in range(4):
        for s in range(5):
            v = y[b, s] + (h / 6.0) * (
                k1[b, s] + 2.0 * k2[b, s] + 2.0 * k3[b, s] + k4[b, s]
            )
            if v < 0.0:
                if v < -1e-9:
                    return NEGATIVE
                v = 0.0
            ynew[b, s] = v
    return OK


@njit(cache=True)
def ode_integrate(y0, p, n_report, steps_per_report, h, out, diag):
    """Fixed-step RK4 over ``n_report`` intervals, recording each boundary.

    out: (n_report + 1, 4, 5); diag: float64[2] receiving
    (step count, max local truncation estimate from step doubling).
    """
    y = y0.copy()
    k1 = np.empty((4, 5))
    k2 = np.empty((4, 5))
    k3 = np.empty((4, 5))
    k4 = np.empty((4, 5))
    tmp = np.empty((4, 5))
    ynew = np.empty((4, 5))
    yh = np.empty((4, 5))
    out[0] = y
    diag[0] = 0.0
    diag[1] = 0.0
    for rep in range(n_report):
        for step in range(steps_per_report):
            status = _rk4_step(y, p, h, k1, k2, k3, k4, tmp, ynew)
            if status != OK:
                return status
            if step == steps_per_report - 1:
                # step-doubling error estimate on the interval's last step
                status = _rk4_step(y, p, 0.5 * h, k1, k2, k3, k4, tmp, yh)
                if status != OK:
                    return status
                status = _rk4_step(yh, p, 0.5 * h, k1, k2, k3, k4, tmp, yh)
                if status != OK:
                    return status
                err = 0.0
                for b in range(4):
                    for s in range(5):
                        d = abs(ynew[b, s] - yh[b, s])
                        if d > err:
                            err = d
                if err / 15.0 > diag[1]:
                    diag[1] = err / 15.0
            y[:] = ynew
            diag[0] += 1.0
        out[rep + 1] = y
    return OK


@njit(cache=True)
def _ode_integrate_plain(y0, p, n_report, steps_per_report, h, out):
    """Like ode_integrate without diagnostics (batch inner loop)."""
    y = y0.copy()
    k1 = np.empty((4, 5))
    k2 = np.empty((4, 5))
    k3 = np.empty((4, 5))
    k4 = np.empty((4, 5))
    tmp = np.empty((4, 5))
    ynew = np.empty((4, 5))
    out[0] = y
    for rep in range(n_report):
        for _ in range(steps_per_report):
            status = _rk4_step(y, p, h, k1, k2, k3, k4, tmp, ynew)
            if status != OK:
                return status
            y[:] = ynew
        out[rep + 1] = y
    return OK


@njit(cache=True, parallel=True)
def ode_integrate_batch(y0, params, n_report, steps_per_report, h, out, status):
    """Integrate one trajectory per parameter row, in parallel.

    params: (n, 12); out: (n, n_report + 1, 4, 5); status: int64[n].
    """
    n = params.shape[0]
    for i in prange(n):
        status[i] = _ode_integrate_plain(
            y0, params[i], n_report, steps_per_report, h, out[i]
        )


@njit(cache=True)
def markov_run(y0, p, n_cycles, kappa, static, out, info):
    """Dynamic discrete-time cohort allocation; one state row per cycle.

    ``t*`` slots of ``p`` are per-cycle probabilities; ``kappa`` (years)
    scales only the force of infection and births. ``static`` freezes the
    infection probabilities at their initial-prevalence values. info[0]
    receives the offending cycle on probability overflow.
    """
    p23, p34, p45, p15 = p[_T23], p[_T34], p[_T45], p[_T15]
    info[0] = -1.0
    if p23 + p15 > 1.0 + 1e-12 or p34 + p15 > 1.0 + 1e-12 or p45 + p15 > 1.0 + 1e-12:
        info[0] = 0.0
        return OVERFLOW
    y = y0.copy()
    ynew = np.empty((4, 5))
    p12 = np.empty(4)
    p12_frozen = np.empty(4)
    out[0] = y
    for cycle in range(n_cycles):
        if cycle == 0 or not static:
            pfem, pmal, _ = _sex_prevalence(y, p)
            for b in range(4):
                lam = _foi(p, b, pfem, pmal)
                p12[b] = -np.expm1(-lam * kappa)
            if cycle == 0:
                p12_frozen[:] = p12
        if static:
            p12[:] = p12_frozen
        for b in range(4):
            if p12[b] + p15 > 1.0 + 1e-12:
                info[0] = cycle
                return OVERFLOW
            n1, n2, n3, n4, n5 = y[b, 0], y[b, 1], y[b, 2], y[b, 3], y[b, 4]
            alive = n1 + n2 + n3 + n4
            ynew[b, 0] = (1.0 - p12[b] - p15) * n1 + p[_CHI] * alive * kappa
            ynew[b, 1] = p12[b] * n1 + (1.0 - p23 - p15) * n2
            ynew[b, 2] = p23 * n2 + (1.0 - p34 - p15) * n3
            ynew[b, 3] = p34 * n3 + (1.0 - p45 - p15) * n4
            ynew[b, 4] = n5 + p15 * alive + p45 * n4
        y[:] = ynew
        out[cycle + 1] = y
    return OK


@njit(cache=True, parallel=True)
def markov_run_batch(y0, params, n_cycles, kappa, out, status):
    """One dynamic Markov run per parameter row, in parallel."""
    n = params.shape[0]
    for i in prange(n):
        info = np.empty(1)
        status[i] = markov_run(y0, params[i], n_cycles, kappa, False, out[i], info)
