"""Pure-numpy ensemble kernels, vectorized over paths.

Functional twin of the numba backend: identical noise stream, identical
update formulas, identical checkpoint/action bookkeeping.  Used when numba
is unavailable or when HUBBARD_SDE_BACKEND=numpy is set.
"""

from __future__ import annotations

import numpy as np

from . import rng

SLOT_PHI, SLOT_XI = 0, 1


def _bt(M: np.ndarray) -> np.ndarray:
    return np.swapaxes(M, -1, -2)


def _energy_w1(eps, au, rho):
    diag = np.diagonal(rho, axis1=-2, axis2=-1)
    return np.einsum("ij,bji->b", eps, rho) - 0.25 * au * np.sum(diag * diag, axis=-1)


def _energy_w2(eps, au, rho_uu, rho_ud):
    diag = np.diagonal(rho_ud, axis1=-2, axis2=-1)
    return np.einsum("ij,bji->b", eps, rho_uu) - 0.25 * au * np.sum(diag * diag, axis=-1)


def evolve_w1_ensemble(eps, u, dt, n_steps, cp_steps, seed, path0, n_paths):
    """Evolve n_paths of the half-filling w1 system from the zero state.

    Returns dict with per-checkpoint arrays W, S (n_cp, n_paths), state
    snapshots rho, F (n_cp, n_paths, N, N) and the failed-path mask.
    """
    n = eps.shape[0]
    au = abs(u)
    eye = np.eye(n)
    rho = np.zeros((n_paths, n, n))
    F = np.zeros((n_paths, n, n))
    S = np.zeros(n_paths)
    failed = np.zeros(n_paths, dtype=bool)
    path_ids = np.arange(path0, path0 + n_paths, dtype=np.uint64)

    n_cp = len(cp_steps)
    out = {
        "W": np.zeros((n_cp, n_paths)),
        "S": np.zeros((n_cp, n_paths)),
        "rho": np.zeros((n_cp, n_paths, n, n)),
        "F": np.zeros((n_cp, n_paths, n, n)),
    }
    cp_idx = 0

    def record(i):
        out["W"][i] = _energy_w1(eps, au, rho)
        out["S"][i] = S
        out["rho"][i] = rho
        out["F"][i] = F

    while cp_idx < n_cp and cp_steps[cp_idx] == 0:
        record(cp_idx)
        cp_idx += 1

    for step in range(1, n_steps + 1):
        S = S + _energy_w1(eps, au, rho) * dt
        phi = rng.normal_matrix(seed, path_ids, step, SLOT_PHI, n)
        dh = -eps * dt + np.zeros((n_paths, n, n))
        idx = np.arange(n)
        dh[:, idx, idx] += 0.5 * au * dt * np.diagonal(rho, axis1=1, axis2=2) \
            - np.sqrt(au * dt) * phi
        t1 = (eye - F) @ dh
        d_rho = 0.5 * (t1 @ (eye + F) - rho @ (dh @ rho))
        t2 = t1 @ rho
        rho = rho + d_rho
        F = F + 0.5 * (t2 - _bt(t2))
        rho = 0.5 * (rho + _bt(rho))
        F = 0.5 * (F - _bt(F))
        bad = ~np.isfinite(rho).all(axis=(1, 2)) | ~np.isfinite(F).all(axis=(1, 2))
        if bad.any():
            failed |= bad
            rho[failed] = 0.0
            F[failed] = 0.0
            S[failed] = 0.0
        while cp_idx < n_cp and cp_steps[cp_idx] == step:
            record(cp_idx)
            cp_idx += 1

    _mask_failed(out, failed)
    return out | {"failed": failed}


def evolve_w2_ensemble(eps, u, dt, n_steps, cp_steps, seed, path0, n_paths):
    """Evolve n_paths of the half-filling w2 system from the zero state.

    Snapshot arrays are the independent blocks rho_uu, rho_ud, F_uu, F_ud.
    """
    n = eps.shape[0]
    au = abs(u)
    eu = -1 if u < 0 else 1
    eye2 = np.eye(2 * n)
    rho_uu = np.zeros((n_paths, n, n))
    rho_ud = np.zeros((n_paths, n, n))
    F_uu = np.zeros((n_paths, n, n))
    F_ud = np.zeros((n_paths, n, n))
    S = np.zeros(n_paths)
    failed = np.zeros(n_paths, dtype=bool)
    path_ids = np.arange(path0, path0 + n_paths, dtype=np.uint64)

    n_cp = len(cp_steps)
    out = {
        "W": np.zeros((n_cp, n_paths)),
        "S": np.zeros((n_cp, n_paths)),
        "rho_uu": np.zeros((n_cp, n_paths, n, n)),
        "rho_ud": np.zeros((n_cp, n_paths, n, n)),
        "F_uu": np.zeros((n_cp, n_paths, n, n)),
        "F_ud": np.zeros((n_cp, n_paths, n, n)),
    }
    cp_idx = 0

    def record(i):
        out["W"][i] = _energy_w2(eps, au, rho_uu, rho_ud)
        out["S"][i] = S
        out["rho_uu"][i] = rho_uu
        out["rho_ud"][i] = rho_ud
        out["F_uu"][i] = F_uu
        out["F_ud"][i] = F_ud

    while cp_idx < n_cp and cp_steps[cp_idx] == 0:
        record(cp_idx)
        cp_idx += 1

    idx = np.arange(n)
    for step in range(1, n_steps + 1):
        S = S + _energy_w2(eps, au, rho_uu, rho_ud) * dt
        xi = rng.normal_matrix(seed, path_ids, step, SLOT_XI, n)
        dd = 0.5 * au * dt * np.diagonal(rho_ud, axis1=1, axis2=2) - np.sqrt(au * dt) * xi

        rho = np.concatenate([
            np.concatenate([rho_uu, rho_ud], axis=2),
            np.concatenate([eu * rho_ud, rho_uu], axis=2)], axis=1)
        F = np.concatenate([
            np.concatenate([F_uu, F_ud], axis=2),
            np.concatenate([eu * F_ud, F_uu], axis=2)], axis=1)
        Ft = np.concatenate([
            np.concatenate([F_uu, eu * F_ud], axis=2),
            np.concatenate([F_ud, F_uu], axis=2)], axis=1)
        dh = np.zeros((n_paths, 2 * n, 2 * n))
        dh[:, :n, :n] = -eps * dt
        dh[:, n:, n:] = -eps * dt
        dh[:, idx, n + idx] = dd
        dh[:, n + idx, idx] = eu * dd

        t1 = (eye2 - F) @ dh
        d_rho = 0.5 * (t1 @ (eye2 + Ft) - rho @ (_bt(dh) @ rho))
        t2 = t1 @ _bt(rho)
        d_f = 0.5 * (t2 - _bt(t2))

        rho_uu = rho_uu + d_rho[:, :n, :n]
        rho_ud = rho_ud + d_rho[:, :n, n:]
        F_uu = F_uu + d_f[:, :n, :n]
        F_ud = F_ud + d_f[:, :n, n:]
        rho_uu = 0.5 * (rho_uu + _bt(rho_uu))
        rho_ud = 0.5 * (rho_ud + _bt(rho_ud))
        F_uu = 0.5 * (F_uu - _bt(F_uu))
        F_ud = 0.5 * (F_ud - eu * _bt(F_ud))

        bad = ~(np.isfinite(rho_uu).all(axis=(1, 2)) & np.isfinite(rho_ud).all(axis=(1, 2))
                & np.isfinite(F_uu).all(axis=(1, 2)) & np.isfinite(F_ud).all(axis=(1, 2)))
        if bad.any():
            failed |= bad
            for M in (rho_uu, rho_ud, F_uu, F_ud):
                M[failed] = 0.0
            S[failed] = 0.0
        while cp_idx < n_cp and cp_steps[cp_idx] == step:
            record(cp_idx)
            cp_idx += 1

    _mask_failed(out, failed)
    return out | {"failed": failed}


def _mask_failed(out: dict, failed: np.ndarray) -> None:
    if failed.any():
        for key, arr in out.items():
            arr[:, failed] = np.nan
