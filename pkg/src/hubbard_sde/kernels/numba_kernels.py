"""Numba-compiled ensemble kernels (hot loops of the Monte Carlo drivers).

Functional twin of the numpy backend: same counter-based noise stream,
same update formulas, same checkpoint/action bookkeeping.  Paths are
evolved in SIMD lanes: state arrays carry the lane index as the innermost
(contiguous) axis so the per-element loops vectorize across 8 paths, and
lane groups run in a prange.

Failed (non-finite) lanes are zeroed and keep stepping harmlessly; the
wrapper masks their outputs with NaN, matching the numpy backend.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from . import rng as _rng

LANES = 8
_PAD_OFFSET = np.uint64(1) << np.uint64(40)  # path ids for discarded pad lanes

_U64 = np.uint64
_GOLD = _U64(_rng.GOLD)
_MIX1 = _U64(_rng.MIX1)
_MIX2 = _U64(_rng.MIX2)
_K_PATH = _U64(_rng.K_PATH)
_K_STEP = _U64(_rng.K_STEP)
_K_SLOT = _U64(_rng.K_SLOT)

_A0, _A1, _A2, _A3, _A4, _A5 = _rng._A
_B0, _B1, _B2, _B3, _B4 = _rng._B
_C0, _C1, _C2, _C3, _C4, _C5 = _rng._C
_D0, _D1, _D2, _D3 = _rng._D
_P_LOW = _rng._P_LOW


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _norminv(p):
    if p < _P_LOW:
        q = np.sqrt(-2.0 * np.log(p))
        return (((((_C0 * q + _C1) * q + _C2) * q + _C3) * q + _C4) * q + _C5) \
            / ((((_D0 * q + _D1) * q + _D2) * q + _D3) * q + 1.0)
    if p > 1.0 - _P_LOW:
        q = np.sqrt(-2.0 * np.log(1.0 - p))
        return -((((((_C0 * q + _C1) * q + _C2) * q + _C3) * q + _C4) * q + _C5)
                 / ((((_D0 * q + _D1) * q + _D2) * q + _D3) * q + 1.0))
    q = p - 0.5
    r = q * q
    return (((((_A0 * r + _A1) * r + _A2) * r + _A3) * r + _A4) * r + _A5) * q \
        / (((((_B0 * r + _B1) * r + _B2) * r + _B3) * r + _B4) * r + 1.0)


@njit(cache=True, inline="always")
def _normal(hs, slot, lane):
    w = _mix64(hs ^ (slot * _K_SLOT + lane))
    u = (np.float64(w >> _U64(11)) + 0.5) * (2.0**-53)
    return _norminv(u)


@njit(cache=True, inline="always")
def _step_hash(seed, path_id, step):
    h = _mix64(seed ^ _GOLD)
    h = _mix64(h ^ (path_id * _K_PATH))
    return _mix64(h ^ (step * _K_STEP))


@njit(cache=True, inline="always")
def _mml(A, B, C):
    """C = A @ B per SIMD lane; all shaped (n, n, LANES)."""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            for l in range(LANES):
                C[i, j, l] = 0.0
            for k in range(n):
                for l in range(LANES):
                    C[i, j, l] += A[i, k, l] * B[k, j, l]


@njit(cache=True, inline="always")
def _mml_rconst(A, E, C):
    """C = A @ E with lane-independent right factor E (n, n)."""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            for l in range(LANES):
                C[i, j, l] = 0.0
            for k in range(n):
                e = E[k, j]
                for l in range(LANES):
                    C[i, j, l] += A[i, k, l] * e


@njit(cache=True, inline="always")
def _mml_lconst(E, B, C):
    """C = E @ B with lane-independent left factor E (n, n)."""
    n = B.shape[0]
    for i in range(n):
        for j in range(n):
            for l in range(LANES):
                C[i, j, l] = 0.0
            for k in range(n):
                e = E[i, k]
                for l in range(LANES):
                    C[i, j, l] += e * B[k, j, l]


@njit(cache=True, parallel=True)
def _w1_kernel(eps, au, dt, n_steps, cps, seed, path0, n_paths,
               W_out, S_out, rho_out, F_out, failed):
    n = eps.shape[0]
    n_cp = cps.shape[0]
    s_au_dt = np.sqrt(au * dt)
    E = -eps * dt
    slot = _U64(0)
    n_groups = (n_paths + LANES - 1) // LANES
    for g in prange(n_groups):
        base = g * LANES
        pid = np.empty(LANES, dtype=np.uint64)
        for l in range(LANES):
            p = base + l
            pid[l] = _U64(path0 + p) if p < n_paths else _PAD_OFFSET + _U64(path0 + p)
        rho = np.zeros((n, n, LANES))
        F = np.zeros((n, n, LANES))
        dvec = np.empty((n, LANES))
        imf = np.empty((n, n, LANES))
        ipf = np.empty((n, n, LANES))
        t1 = np.empty((n, n, LANES))
        wa = np.empty((n, n, LANES))
        wb = np.empty((n, n, LANES))
        wc = np.empty((n, n, LANES))
        t2 = np.empty((n, n, LANES))
        S = np.zeros(LANES)
        w_pre = np.empty(LANES)
        alive = np.ones(LANES, dtype=np.bool_)
        cp = 0
        while cp < n_cp and cps[cp] == 0:
            cp += 1
        for step in range(1, n_steps + 1):
            for l in range(LANES):
                w_pre[l] = 0.0
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        w_pre[l] += eps[i, j] * rho[j, i, l]
                for l in range(LANES):
                    w_pre[l] -= 0.25 * au * rho[i, i, l] * rho[i, i, l]
            for l in range(LANES):
                S[l] += w_pre[l] * dt

            for l in range(LANES):
                hs = _step_hash(_U64(seed), pid[l], _U64(step))
                for i in range(n):
                    dvec[i, l] = 0.5 * au * dt * rho[i, i, l] \
                        - s_au_dt * _normal(hs, slot, _U64(i))
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        imf[i, j, l] = -F[i, j, l]
                        ipf[i, j, l] = F[i, j, l]
                for l in range(LANES):
                    imf[i, i, l] += 1.0
                    ipf[i, i, l] += 1.0
            # dh = E + diag(dvec); the diagonal part enters as cheap scaling
            _mml_rconst(imf, E, t1)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        t1[i, j, l] += imf[i, j, l] * dvec[j, l]
            _mml(t1, ipf, wa)
            _mml_lconst(E, rho, wb)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        wb[i, j, l] += dvec[i, l] * rho[i, j, l]
            _mml(rho, wb, wc)
            _mml(t1, rho, t2)
            check = np.zeros(LANES)
            for i in range(n):
                for j in range(i, n):
                    for l in range(LANES):
                        uij = rho[i, j, l] + 0.5 * (wa[i, j, l] - wc[i, j, l])
                        uji = rho[j, i, l] + 0.5 * (wa[j, i, l] - wc[j, i, l])
                        rs = 0.5 * (uij + uji)
                        rho[i, j, l] = rs
                        rho[j, i, l] = rs
                        fij = F[i, j, l] + 0.5 * (t2[i, j, l] - t2[j, i, l])
                        fji = F[j, i, l] + 0.5 * (t2[j, i, l] - t2[i, j, l])
                        fs = 0.5 * (fij - fji)
                        F[i, j, l] = fs
                        F[j, i, l] = -fs
                        check[l] += rs + fs
            for l in range(LANES):
                if alive[l] and not np.isfinite(check[l]):
                    alive[l] = False
                    if base + l < n_paths:
                        failed[base + l] = True
                    for i in range(n):
                        for j in range(n):
                            rho[i, j, l] = 0.0
                            F[i, j, l] = 0.0
                    S[l] = 0.0
            while cp < n_cp and cps[cp] == step:
                for l in range(LANES):
                    p = base + l
                    if p >= n_paths:
                        continue
                    w_now = 0.0
                    for i in range(n):
                        for j in range(n):
                            w_now += eps[i, j] * rho[j, i, l]
                        w_now -= 0.25 * au * rho[i, i, l] * rho[i, i, l]
                    W_out[cp, p] = w_now
                    S_out[cp, p] = S[l]
                    for i in range(n):
                        for j in range(n):
                            rho_out[cp, p, i, j] = rho[i, j, l]
                            F_out[cp, p, i, j] = F[i, j, l]
                cp += 1


@njit(cache=True, parallel=True)
def _w2_kernel(eps, au, eu, dt, n_steps, cps, seed, path0, n_paths,
               W_out, S_out, ruu_out, rud_out, fuu_out, fud_out, failed):
    # Every 2N x 2N object of this system has the closed block form
    # [[A, B], [eu*B, A]] (or the transpose class), so each product needs
    # only four N x N lane-multiplications; the kernel works on blocks.
    n = eps.shape[0]
    n_cp = cps.shape[0]
    s_au_dt = np.sqrt(au * dt)
    E = -eps * dt
    slot = _U64(1)
    n_groups = (n_paths + LANES - 1) // LANES
    for g in prange(n_groups):
        base = g * LANES
        pid = np.empty(LANES, dtype=np.uint64)
        for l in range(LANES):
            p = base + l
            pid[l] = _U64(path0 + p) if p < n_paths else _PAD_OFFSET + _U64(path0 + p)
        ruu = np.zeros((n, n, LANES))
        rud = np.zeros((n, n, LANES))
        fuu = np.zeros((n, n, LANES))
        fud = np.zeros((n, n, LANES))
        dvec = np.empty((n, LANES))
        a1 = np.empty((n, n, LANES))
        b1 = np.empty((n, n, LANES))
        a2 = np.empty((n, n, LANES))
        t1a = np.empty((n, n, LANES))
        t1b = np.empty((n, n, LANES))
        waa = np.empty((n, n, LANES))
        wab = np.empty((n, n, LANES))
        va = np.empty((n, n, LANES))
        vb = np.empty((n, n, LANES))
        wca = np.empty((n, n, LANES))
        wcb = np.empty((n, n, LANES))
        t2a = np.empty((n, n, LANES))
        t2b = np.empty((n, n, LANES))
        m1 = np.empty((n, n, LANES))
        m2 = np.empty((n, n, LANES))
        S = np.zeros(LANES)
        w_pre = np.empty(LANES)
        alive = np.ones(LANES, dtype=np.bool_)
        cp = 0
        while cp < n_cp and cps[cp] == 0:
            cp += 1
        for step in range(1, n_steps + 1):
            for l in range(LANES):
                w_pre[l] = 0.0
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        w_pre[l] += eps[i, j] * ruu[j, i, l]
                for l in range(LANES):
                    w_pre[l] -= 0.25 * au * rud[i, i, l] * rud[i, i, l]
            for l in range(LANES):
                S[l] += w_pre[l] * dt

            for l in range(LANES):
                hs = _step_hash(_U64(seed), pid[l], _U64(step))
                for i in range(n):
                    dvec[i, l] = 0.5 * au * dt * rud[i, i, l] \
                        - s_au_dt * _normal(hs, slot, _U64(i))
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        a1[i, j, l] = -fuu[i, j, l]
                        b1[i, j, l] = -fud[i, j, l]
                        a2[i, j, l] = fuu[i, j, l]
                for l in range(LANES):
                    a1[i, i, l] += 1.0
                    a2[i, i, l] += 1.0
            # T1 = (Id - F) dh with dh = [[E, diag], [eu diag, E]]
            _mml_rconst(a1, E, t1a)
            _mml_rconst(b1, E, t1b)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        t1a[i, j, l] += eu * b1[i, j, l] * dvec[j, l]
                        t1b[i, j, l] += a1[i, j, l] * dvec[j, l]
            # Wa = T1 (Id + Ftilde)
            _mml(t1a, a2, waa)
            _mml(t1b, fud, m1)
            _mml(t1a, fud, wab)
            _mml(t1b, a2, m2)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        waa[i, j, l] += m1[i, j, l]
                        wab[i, j, l] = eu * wab[i, j, l] + m2[i, j, l]
            # V = dh^T rho
            _mml_lconst(E, ruu, va)
            _mml_lconst(E, rud, vb)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        va[i, j, l] += dvec[i, l] * rud[i, j, l]
                        vb[i, j, l] += eu * dvec[i, l] * ruu[i, j, l]
            # Wc = rho V
            _mml(ruu, va, wca)
            _mml(rud, vb, m1)
            _mml(ruu, vb, wcb)
            _mml(rud, va, m2)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        wca[i, j, l] += eu * m1[i, j, l]
                        wcb[i, j, l] += m2[i, j, l]
            # T2 = T1 rho^T
            _mml(t1a, ruu, t2a)
            _mml(t1b, rud, m1)
            _mml(t1a, rud, t2b)
            _mml(t1b, ruu, m2)
            for i in range(n):
                for j in range(n):
                    for l in range(LANES):
                        t2a[i, j, l] += m1[i, j, l]
                        t2b[i, j, l] = eu * t2b[i, j, l] + m2[i, j, l]
            check = np.zeros(LANES)
            for i in range(n):
                for j in range(i, n):
                    for l in range(LANES):
                        uij = ruu[i, j, l] + 0.5 * (waa[i, j, l] - wca[i, j, l])
                        uji = ruu[j, i, l] + 0.5 * (waa[j, i, l] - wca[j, i, l])
                        rs = 0.5 * (uij + uji)
                        ruu[i, j, l] = rs
                        ruu[j, i, l] = rs
                        check[l] += rs
                        uij = rud[i, j, l] + 0.5 * (wab[i, j, l] - wcb[i, j, l])
                        uji = rud[j, i, l] + 0.5 * (wab[j, i, l] - wcb[j, i, l])
                        rs = 0.5 * (uij + uji)
                        rud[i, j, l] = rs
                        rud[j, i, l] = rs
                        check[l] += rs
                        fij = fuu[i, j, l] + 0.5 * (t2a[i, j, l] - t2a[j, i, l])
                        fji = fuu[j, i, l] + 0.5 * (t2a[j, i, l] - t2a[i, j, l])
                        fs = 0.5 * (fij - fji)
                        fuu[i, j, l] = fs
                        fuu[j, i, l] = -fs
                        check[l] += fs
                        fij = fud[i, j, l] + 0.5 * (t2b[i, j, l] - eu * t2b[j, i, l])
                        fji = fud[j, i, l] + 0.5 * (t2b[j, i, l] - eu * t2b[i, j, l])
                        fud[i, j, l] = 0.5 * (fij - eu * fji)
                        fud[j, i, l] = 0.5 * (fji - eu * fij)
                        check[l] += fud[i, j, l]
            for l in range(LANES):
                if alive[l] and not np.isfinite(check[l]):
                    alive[l] = False
                    if base + l < n_paths:
                        failed[base + l] = True
                    for i in range(n):
                        for j in range(n):
                            ruu[i, j, l] = 0.0
                            rud[i, j, l] = 0.0
                            fuu[i, j, l] = 0.0
                            fud[i, j, l] = 0.0
                    S[l] = 0.0
            while cp < n_cp and cps[cp] == step:
                for l in range(LANES):
                    p = base + l
                    if p >= n_paths:
                        continue
                    w_now = 0.0
                    for i in range(n):
                        for j in range(n):
                            w_now += eps[i, j] * ruu[j, i, l]
                        w_now -= 0.25 * au * rud[i, i, l] * rud[i, i, l]
                    W_out[cp, p] = w_now
                    S_out[cp, p] = S[l]
                    for i in range(n):
                        for j in range(n):
                            ruu_out[cp, p, i, j] = ruu[i, j, l]
                            rud_out[cp, p, i, j] = rud[i, j, l]
                            fuu_out[cp, p, i, j] = fuu[i, j, l]
                            fud_out[cp, p, i, j] = fud[i, j, l]
                cp += 1


def evolve_w1_ensemble(eps, u, dt, n_steps, cp_steps, seed, path0, n_paths):
    n = eps.shape[0]
    n_cp = len(cp_steps)
    out = {
        "W": np.zeros((n_cp, n_paths)),
        "S": np.zeros((n_cp, n_paths)),
        "rho": np.zeros((n_cp, n_paths, n, n)),
        "F": np.zeros((n_cp, n_paths, n, n)),
    }
    failed = np.zeros(n_paths, dtype=np.bool_)
    _w1_kernel(np.ascontiguousarray(eps, dtype=np.float64), abs(u), dt,
               n_steps, np.asarray(cp_steps, dtype=np.int64), seed, path0, n_paths,
               out["W"], out["S"], out["rho"], out["F"], failed)
    _mask_failed(out, failed)
    return out | {"failed": failed}


def evolve_w2_ensemble(eps, u, dt, n_steps, cp_steps, seed, path0, n_paths):
    n = eps.shape[0]
    n_cp = len(cp_steps)
    out = {
        "W": np.zeros((n_cp, n_paths)),
        "S": np.zeros((n_cp, n_paths)),
        "rho_uu": np.zeros((n_cp, n_paths, n, n)),
        "rho_ud": np.zeros((n_cp, n_paths, n, n)),
        "F_uu": np.zeros((n_cp, n_paths, n, n)),
        "F_ud": np.zeros((n_cp, n_paths, n, n)),
    }
    failed = np.zeros(n_paths, dtype=np.bool_)
    eu = -1.0 if u < 0 else 1.0
    _w2_kernel(np.ascontiguousarray(eps, dtype=np.float64), abs(u), eu, dt,
               n_steps, np.asarray(cp_steps, dtype=np.int64), seed, path0, n_paths,
               out["W"], out["S"], out["rho_uu"], out["rho_ud"],
               out["F_uu"], out["F_ud"], failed)
    _mask_failed(out, failed)
    return out | {"failed": failed}


def _mask_failed(out: dict, failed: np.ndarray) -> None:
    if failed.any():
        for arr in out.values():
            arr[:, failed] = np.nan
