"""Real reduced SDE systems and their symmetry-relation checkers.

Three levels of reduction of the complex 4N x 4N flow:

* 2N x 2N system (rho, F^a, F^b), valid for w3 = 0 and noise signs equal
  to sign(u), arbitrary mu, r, s;
* N x N half-filling system for the w1 = 1 scheme at mu = r = s = 0;
* blocked half-filling system for the w2 = 1 scheme at mu = r = s = 0,
  evolving only the independent blocks (rho_uu, rho_ud, F_uu, F_ud).

Each stepper re-applies the exact symmetry projections its theorem
guarantees, so floating-point drift cannot leak out of the invariant set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .girsanov import DensityStateFull, HsScheme, NumericalFailure, sign_u
from .lattice import BipartiteMasks, ConfigError, ModelParams


@dataclass
class ReducedState2N:
    """rho = G^{ab}, F^a = -i G^{aa}, F^b = -i G^{bb}; all real 2N x 2N."""

    rho: np.ndarray
    Fa: np.ndarray
    Fb: np.ndarray

    @classmethod
    def initial(cls, n_sites: int) -> "ReducedState2N":
        z = np.zeros((2 * n_sites, 2 * n_sites))
        return cls(rho=z.copy(), Fa=z.copy(), Fb=z.copy())

    @property
    def n_sites(self) -> int:
        return self.rho.shape[0] // 2


@dataclass
class ReducedStateW1:
    """Half-filling w1 variables: symmetric rho and skew F, both N x N."""

    rho: np.ndarray
    F: np.ndarray

    @classmethod
    def initial(cls, n_sites: int) -> "ReducedStateW1":
        z = np.zeros((n_sites, n_sites))
        return cls(rho=z.copy(), F=z.copy())

    @property
    def n_sites(self) -> int:
        return self.rho.shape[0]


@dataclass
class ReducedStateW2:
    """Half-filling w2 independent blocks, each N x N."""

    rho_uu: np.ndarray
    rho_ud: np.ndarray
    F_uu: np.ndarray
    F_ud: np.ndarray

    @classmethod
    def initial(cls, n_sites: int) -> "ReducedStateW2":
        z = np.zeros((n_sites, n_sites))
        return cls(rho_uu=z.copy(), rho_ud=z.copy(), F_uu=z.copy(), F_ud=z.copy())

    @property
    def n_sites(self) -> int:
        return self.rho_uu.shape[0]


def _blk2(M: np.ndarray, i: int, j: int) -> np.ndarray:
    n = M.shape[0] // 2
    return M[i * n:(i + 1) * n, j * n:(j + 1) * n]


def _check_finite(*mats) -> None:
    for m in mats:
        if not np.all(np.isfinite(m)):
            raise NumericalFailure("non-finite state entries")


def _dh_2N(state: ReducedState2N, draw, params: ModelParams, scheme: HsScheme,
           dt: float) -> np.ndarray:
    n = state.n_sites
    em = params.eps - params.mu * np.eye(n)
    sr = (params.s - params.r) * np.eye(n)
    sp = (params.s + params.r) * np.eye(n)
    eu = params.eps_u
    rt = np.sqrt(dt)
    dx = np.diag(rt * draw.phi)
    dy = np.diag(rt * draw.xi)

    r_uu = np.diag(np.diagonal(_blk2(state.rho, 0, 0)))
    r_ud = np.diag(np.diagonal(_blk2(state.rho, 0, 1)))
    r_du = np.diag(np.diagonal(_blk2(state.rho, 1, 0)))
    r_dd = np.diag(np.diagonal(_blk2(state.rho, 1, 1)))
    d_rho = np.block([[-r_dd, r_du], [r_ud, -r_uu]])

    su = np.sqrt(abs(params.u))
    w1r, w2r = np.sqrt(scheme.w1), np.sqrt(scheme.w2)
    noise = np.block([[w1r * dx, w2r * dy], [eu * w2r * dy, -eu * w1r * dx]])
    return -dt * np.block([[em, sr], [sp, em]]) + 0.5 * params.u * dt * d_rho - su * noise


def _df_mat(F: np.ndarray) -> np.ndarray:
    n = F.shape[0] // 2
    d = np.diag(np.diagonal(_blk2(F, 0, 1)))
    z = np.zeros((n, n))
    return np.block([[z, d], [-d, z]])


def sde_step_2N(state: ReducedState2N, draw, params: ModelParams,
                scheme: HsScheme, dt: float) -> ReducedState2N:
    """One Euler step of the coupled (rho, F^a, F^b) system."""
    if scheme.w3 != 0.0:
        raise ConfigError("2N reduction requires w3 = 0")
    if scheme.e1 != sign_u(params.u) or scheme.e2 != sign_u(params.u):
        raise ConfigError("2N reduction requires e1 = e2 = sign(u)")
    rho, Fa, Fb = state.rho, state.Fa, state.Fb
    eye = np.eye(rho.shape[0])
    dh = _dh_2N(state, draw, params, scheme, dt)
    dfa = _df_mat(Fa)
    dfb = _df_mat(Fb)
    c = 0.25 * params.u * dt

    ia, ib = eye - Fa, eye + Fb
    d_rho = 0.5 * (ia @ dh @ ib - rho @ dh.T @ rho) \
        + c * (ia @ dfb @ rho - rho @ dfa @ ib)
    d_fa = 0.5 * (ia @ dh @ rho.T - rho @ dh.T @ (eye + Fa)) \
        + c * (ia @ dfb @ (eye + Fa) - rho @ dfa @ rho.T)
    d_fb = 0.5 * ((eye - Fb) @ dh.T @ rho - rho.T @ dh @ ib) \
        + c * ((eye - Fb) @ dfa @ ib - rho.T @ dfb @ rho)

    rho = rho + d_rho
    Fa = Fa + d_fa
    Fb = Fb + d_fb
    Fa = 0.5 * (Fa - Fa.T)
    Fb = 0.5 * (Fb - Fb.T)
    _check_finite(rho, Fa, Fb)
    return ReducedState2N(rho=rho, Fa=Fa, Fb=Fb)


def sde_step_w1(state: ReducedStateW1, draw, params: ModelParams,
                dt: float) -> ReducedStateW1:
    """One Euler step of the half-filling w1 system (only |u| enters)."""
    if params.mu != 0.0 or params.r != 0.0 or params.s != 0.0:
        raise ConfigError("w1 reduction requires mu = r = s = 0")
    rho, F = state.rho, state.F
    n = state.n_sites
    eye = np.eye(n)
    au = abs(params.u)
    dh = -params.eps * dt + np.diag(0.5 * au * dt * np.diagonal(rho)
                                    - np.sqrt(au * dt) * draw.phi)
    t1 = (eye - F) @ dh
    d_rho = 0.5 * (t1 @ (eye + F) - rho @ (dh @ rho))
    t2 = t1 @ rho
    d_f = 0.5 * (t2 - t2.T)

    rho = rho + d_rho
    F = F + d_f
    rho = 0.5 * (rho + rho.T)
    F = 0.5 * (F - F.T)
    _check_finite(rho, F)
    return ReducedStateW1(rho=rho, F=F)


def w2_assembled(state: ReducedStateW2, eps_u: int):
    """(rho, F, F-tilde) 2N matrices reconstituted from the blocks."""
    r_uu, r_ud = state.rho_uu, state.rho_ud
    f_uu, f_ud = state.F_uu, state.F_ud
    rho = np.block([[r_uu, r_ud], [eps_u * r_ud, r_uu]])
    F = np.block([[f_uu, f_ud], [eps_u * f_ud, f_uu]])
    Ft = np.block([[f_uu, eps_u * f_ud], [f_ud, f_uu]])
    return rho, F, Ft


def sde_step_w2(state: ReducedStateW2, draw, params: ModelParams,
                dt: float) -> ReducedStateW2:
    """One Euler step of the half-filling w2 system over its blocks."""
    if params.mu != 0.0 or params.r != 0.0 or params.s != 0.0:
        raise ConfigError("w2 reduction requires mu = r = s = 0")
    n = state.n_sites
    eu = params.eps_u
    au = abs(params.u)
    rho, F, Ft = w2_assembled(state, eu)
    eye = np.eye(2 * n)

    dd = np.diag(0.5 * au * dt * np.diagonal(state.rho_ud) - np.sqrt(au * dt) * draw.xi)
    dh = np.block([[-params.eps * dt, dd], [eu * dd, -params.eps * dt]])

    t1 = (eye - F) @ dh
    d_rho = 0.5 * (t1 @ (eye + Ft) - rho @ (dh.T @ rho))
    t2 = t1 @ rho.T
    d_f = 0.5 * (t2 - t2.T)

    r_uu = state.rho_uu + _blk2(d_rho, 0, 0)
    r_ud = state.rho_ud + _blk2(d_rho, 0, 1)
    f_uu = state.F_uu + _blk2(d_f, 0, 0)
    f_ud = state.F_ud + _blk2(d_f, 0, 1)
    r_uu = 0.5 * (r_uu + r_uu.T)
    r_ud = 0.5 * (r_ud + r_ud.T)
    f_uu = 0.5 * (f_uu - f_uu.T)
    f_ud = 0.5 * (f_ud - eu * f_ud.T)
    _check_finite(r_uu, r_ud, f_uu, f_ud)
    return ReducedStateW2(rho_uu=r_uu, rho_ud=r_ud, F_uu=f_uu, F_ud=f_ud)


def energy_w1(state: ReducedStateW1, eps: np.ndarray, u: float) -> float:
    """W = Tr[eps rho] - (|u|/4) sum_j rho_jj^2."""
    d = np.diagonal(state.rho)
    return float(np.sum(eps * state.rho.T) - 0.25 * abs(u) * np.sum(d * d))


def energy_w2(state: ReducedStateW2, eps: np.ndarray, u: float) -> float:
    """W = Tr[eps rho_uu] - (|u|/4) sum_j rho_ud_jj^2."""
    d = np.diagonal(state.rho_ud)
    return float(np.sum(eps * state.rho_uu.T) - 0.25 * abs(u) * np.sum(d * d))


def energy_2N(state: ReducedState2N, params: ModelParams) -> float:
    """Energy functional evaluated on the real reduced variables."""
    n = state.n_sites
    em = params.eps - params.mu * np.eye(n)
    r_uu = _blk2(state.rho, 0, 0)
    r_ud = _blk2(state.rho, 0, 1)
    r_du = _blk2(state.rho, 1, 0)
    r_dd = _blk2(state.rho, 1, 1)
    quad = 0.5 * (np.trace(em @ (r_uu + r_dd))
                  + (params.s + params.r) * np.trace(r_du)
                  + (params.s - params.r) * np.trace(r_ud))
    fa_ud = np.diagonal(_blk2(state.Fa, 0, 1))
    fb_ud = np.diagonal(_blk2(state.Fb, 0, 1))
    quart = 0.25 * params.u * np.sum(
        np.diagonal(r_uu) * np.diagonal(r_dd)
        - np.diagonal(r_ud) * np.diagonal(r_du)
        + fa_ud * fb_ud)
    return float(quad + quart)


def embed_2N(state: ReducedState2N) -> DensityStateFull:
    """Full complex density matrix [[iF^a, rho], [-rho^T, iF^b]]."""
    m = state.rho.shape[0]
    G = np.zeros((2 * m, 2 * m), dtype=complex)
    G[:m, :m] = 1j * state.Fa
    G[:m, m:] = state.rho
    G[m:, :m] = -state.rho.T
    G[m:, m:] = 1j * state.Fb
    return DensityStateFull(G=G)


def extract_2N(full: DensityStateFull) -> ReducedState2N:
    """Inverse of embed_2N (imaginary parts of rho etc. are discarded)."""
    G = full.G
    m = G.shape[0] // 2
    return ReducedState2N(
        rho=G[:m, m:].real.copy(),
        Fa=G[:m, :m].imag.copy(),
        Fb=G[m:, m:].imag.copy(),
    )


def expand_w1(state: ReducedStateW1, eps_u: int, masks: BipartiteMasks) -> ReducedState2N:
    """Lift half-filling w1 variables to the 2N system via the on/off laws."""
    on, off = masks.chi_on, masks.chi_off
    rho_dd = -eps_u * on * state.rho + off * state.rho
    F_dd = on * state.F - eps_u * off * state.F
    n = state.n_sites
    z = np.zeros((n, n))
    rho = np.block([[state.rho, z], [z, rho_dd]])
    F = np.block([[state.F, z], [z, F_dd]])
    return ReducedState2N(rho=rho, Fa=F, Fb=F.copy())


def expand_w2(state: ReducedStateW2, eps_u: int) -> ReducedState2N:
    """Lift half-filling w2 blocks to the 2N system."""
    rho, F, Ft = w2_assembled(state, eps_u)
    return ReducedState2N(rho=rho, Fa=F, Fb=Ft)


def _maxabs(M) -> float:
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def check_symmetries(state, mode: str, masks: BipartiteMasks | None = None,
                     eps_u: int = +1) -> dict:
    """Max-norm violation of each identity asserted by the named theorem.

    Modes: 'thm31' and 'thm32a'/'thm32b' act on ReducedState2N states,
    'thm41' on ReducedState2N or ReducedStateW2, 'thm42a' on
    ReducedState2N under w1 half-filling hypotheses, 'thm42b' on
    ReducedState2N under w2 half-filling hypotheses.
    """
    out: dict = {}
    if mode == "thm31":
        _need(state, ReducedState2N, mode)
        out["Fa_skew"] = _maxabs(state.Fa + state.Fa.T)
        out["Fb_skew"] = _maxabs(state.Fb + state.Fb.T)
        return out
    if mode == "thm32a":
        _need(state, ReducedState2N, mode)
        out["Fb_eq_Fa"] = _maxabs(state.Fb - state.Fa)
        out["rho_sym"] = _maxabs(state.rho - state.rho.T)
        return out
    if mode == "thm32b":
        _need(state, ReducedState2N, mode)
        m = state.rho.shape[0] // 2
        P = np.zeros((2 * m, 2 * m))
        P[:m, m:] = np.eye(m)
        P[m:, :m] = np.eye(m)
        out["Fb_eq_PFaP"] = _maxabs(state.Fb - P @ state.Fa @ P)
        out["rhoT_eq_PrhoP"] = _maxabs(state.rho.T - P @ state.rho @ P)
        return out
    if mode == "thm41":
        if masks is None:
            raise ConfigError("thm41 checks need bipartite masks")
        on, off = masks.chi_on, masks.chi_off
        if isinstance(state, ReducedStateW2):
            out["rho_uu_on"] = _maxabs(on * state.rho_uu)
            out["rho_ud_off"] = _maxabs(off * state.rho_ud)
            out["F_uu_off"] = _maxabs(off * state.F_uu)
            out["F_ud_on"] = _maxabs(on * state.F_ud)
            return out
        _need(state, ReducedState2N, mode)
        for name, ij, mask in (
            ("rho_uu_on", (0, 0), on), ("rho_dd_on", (1, 1), on),
            ("rho_ud_off", (0, 1), off), ("rho_du_off", (1, 0), off),
        ):
            out[name] = _maxabs(mask * _blk2(state.rho, *ij))
        for name, ij, mask in (
            ("F_uu_off", (0, 0), off), ("F_dd_off", (1, 1), off),
            ("F_ud_on", (0, 1), on), ("F_du_on", (1, 0), on),
        ):
            out[name] = _maxabs(mask * _blk2(state.Fa, *ij))
        return out
    if mode == "thm42a":
        if masks is None:
            raise ConfigError("thm42a checks need bipartite masks")
        _need(state, ReducedState2N, mode)
        on, off = masks.chi_on, masks.chi_off
        r_uu, r_dd = _blk2(state.rho, 0, 0), _blk2(state.rho, 1, 1)
        f_uu, f_dd = _blk2(state.Fa, 0, 0), _blk2(state.Fa, 1, 1)
        out["rho_on_flip"] = _maxabs(on * (r_uu + eps_u * r_dd))
        out["rho_off_equal"] = _maxabs(off * (r_uu - r_dd))
        out["F_off_flip"] = _maxabs(off * (f_uu + eps_u * f_dd))
        out["F_on_equal"] = _maxabs(on * (f_uu - f_dd))
        out["rho_cross_zero"] = max(_maxabs(_blk2(state.rho, 0, 1)),
                                    _maxabs(_blk2(state.rho, 1, 0)))
        out["F_cross_zero"] = max(_maxabs(_blk2(state.Fa, 0, 1)),
                                  _maxabs(_blk2(state.Fa, 1, 0)))
        out["Fb_eq_Fa"] = _maxabs(state.Fb - state.Fa)
        return out
    if mode == "thm42b":
        _need(state, ReducedState2N, mode)
        out["rho_dd_eq_uu"] = _maxabs(_blk2(state.rho, 1, 1) - _blk2(state.rho, 0, 0))
        out["rho_du_eq_sign_ud"] = _maxabs(
            _blk2(state.rho, 1, 0) - eps_u * _blk2(state.rho, 0, 1))
        out["F_dd_eq_uu"] = _maxabs(_blk2(state.Fa, 1, 1) - _blk2(state.Fa, 0, 0))
        out["F_du_eq_sign_ud"] = _maxabs(
            _blk2(state.Fa, 1, 0) - eps_u * _blk2(state.Fa, 0, 1))
        return out
    raise ConfigError(f"unknown symmetry mode {mode!r}")


def _need(state, cls, mode: str) -> None:
    if not isinstance(state, cls):
        raise ConfigError(f"mode {mode!r} expects {cls.__name__}, got {type(state).__name__}")
