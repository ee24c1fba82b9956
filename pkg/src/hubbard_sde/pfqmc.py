"""Measure-unchanged pfaffian representation: U, G, Z and its estimator.

This module owns the convention in which G collects raw Majorana pair
expectations; the drifted representation's density matrix is i times this
G.  Z spans hundreds of orders of magnitude, so it is carried as a complex
mantissa with a separate base-2 exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .girsanov import HsScheme, NumericalFailure, assemble_root_u_dB
from .lattice import ConfigError, ResourceGuard

_MAX_SITES = 8


def pfaffian(A: np.ndarray) -> complex:
    """Pfaffian of an even-dimensional skew-symmetric matrix.

    Skew-symmetric elimination (Parlett-Reid style) with column pivoting;
    the input is antisymmetrized internally and must satisfy A^T = -A
    within 1e-10 relative.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ConfigError("pfaffian needs a square matrix")
    if n % 2 != 0:
        raise ConfigError("pfaffian needs even dimension")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A + A.T)) > 1e-10 * scale:
        raise ConfigError("matrix is not skew-symmetric within 1e-10")
    work = np.array(0.5 * (A - A.T), dtype=complex if np.iscomplexobj(A) else float)
    pf = work.dtype.type(1.0)
    for k in range(0, n - 2, 2):
        col = np.abs(work[k + 1:, k])
        p = k + 1 + int(np.argmax(col))
        if col[p - k - 1] == 0.0:
            return 0.0
        if p != k + 1:
            work[[k + 1, p], :] = work[[p, k + 1], :]
            work[:, [k + 1, p]] = work[:, [p, k + 1]]
            pf = -pf
        pf = pf * work[k, k + 1]
        tau = work[k, k + 2:] / work[k, k + 1]
        colv = work[k + 2:, k + 1]
        work[k + 2:, k + 2:] += np.outer(tau, colv) - np.outer(colv, tau)
    pf = pf * work[n - 2, n - 1]
    return complex(pf) if np.iscomplexobj(A) else float(pf)


@dataclass
class EvolutionState:
    """Accumulated evolution matrix U, partition weight Z and step count."""

    U: np.ndarray
    z_mantissa: complex
    z_exp2: float

    @classmethod
    def initial(cls, n_sites: int) -> "EvolutionState":
        if n_sites > _MAX_SITES:
            raise ResourceGuard(f"pfqmc guard: n_sites={n_sites} > {_MAX_SITES}")
        # Z(0) = Tr_F[Id] = 4^N
        return cls(U=np.eye(4 * n_sites, dtype=complex),
                   z_mantissa=1.0 + 0.0j, z_exp2=2.0 * n_sites)

    @property
    def n_sites(self) -> int:
        return self.U.shape[0] // 4

    @property
    def z_value(self) -> complex:
        return self.z_mantissa * 2.0**self.z_exp2

    def rebalanced(self) -> "EvolutionState":
        mag = abs(self.z_mantissa)
        if mag == 0.0 or 2.0**-32 < mag < 2.0**32:
            return self
        shift = float(np.floor(np.log2(mag)))
        return replace(self, z_mantissa=self.z_mantissa * 2.0**-shift,
                       z_exp2=self.z_exp2 + shift)


def build_dh(draw, scheme: HsScheme, h0: np.ndarray, u: float) -> np.ndarray:
    """One-step generator i dt h0 + i sqrt(u) dB for the U recursion."""
    return 1j * draw.dt * h0 + 1j * assemble_root_u_dB(draw, scheme, u)


def evolve_U(state: EvolutionState, dh: np.ndarray, exact: bool = False) -> EvolutionState:
    """U <- U e^{-dh}, by default the second-order truncated exponential."""
    if exact:
        step = scipy.linalg.expm(-dh)
    else:
        step = np.eye(dh.shape[0]) - dh + 0.5 * (dh @ dh)
    U = state.U @ step
    if not np.all(np.isfinite(U)):
        raise NumericalFailure("non-finite evolution matrix")
    return replace(state, U=U)


def G_from_U(U: np.ndarray) -> np.ndarray:
    """G = (Id - U)(Id + U)^{-1}, skew-symmetric for orthogonal U."""
    eye = np.eye(U.shape[0])
    try:
        G = np.linalg.solve(eye + U, eye - U)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Id + U singular: {exc}") from exc
    if not np.all(np.isfinite(G)):
        raise NumericalFailure("non-finite G from U")
    return G


def z_step(state: EvolutionState, dh: np.ndarray) -> EvolutionState:
    """Multiplicative Z update from the pre-step G (Ito convention).

    dZ/Z = (1/4) Tr[G dh] + (1/32) (Tr[G dh])^2 - (1/16) Tr[G dh G dh]
         + (1/16) Tr[(dh)^2].
    """
    G = G_from_U(state.U)
    M = G @ dh
    tr1 = np.trace(M)
    tr2 = np.trace(M @ M)
    tr3 = np.trace(dh @ dh)
    factor = 1.0 + 0.25 * tr1 + tr1 * tr1 / 32.0 - tr2 / 16.0 + tr3 / 16.0
    if factor == 0.0:
        raise NumericalFailure("partition weight crossed zero")
    return replace(state, z_mantissa=state.z_mantissa * factor).rebalanced()


def z_step_factor_recursion(G_prev: np.ndarray, dh: np.ndarray) -> complex:
    """Exact per-step Z factor: the product of the two pfaffians.

    Matrix tanh and sinh are evaluated through exact exponentials, so the
    factor is exact for the merged one-step generator dh.
    """
    m = dh.shape[0]
    eye = np.eye(m)
    e2 = scipy.linalg.expm(dh)
    tanh_half = np.linalg.solve(e2 + eye, e2 - eye)  # tanh(dh/2)
    e_quarter = scipy.linalg.expm(dh / 4.0)
    sinh_quarter = 0.5 * (e_quarter - np.linalg.inv(e_quarter))
    top = np.block([[G_prev, -eye], [eye, tanh_half]])
    bottom = np.block([[np.sqrt(2.0) * sinh_quarter, -eye],
                       [eye, np.sqrt(2.0) * sinh_quarter]])
    return pfaffian(top) * pfaffian(bottom)


def z_step_recursion(state: EvolutionState, dh: np.ndarray) -> EvolutionState:
    """Z update through the exact pfaffian recursion (small systems)."""
    factor = z_step_factor_recursion(G_from_U(state.U), dh)
    return replace(state, z_mantissa=state.z_mantissa * factor).rebalanced()


def partition_constant_log(u: float, scheme: HsScheme, n_sites: int, beta: float) -> float:
    """log of the explicit factor relating <Z> dP to Tr e^{-beta H}."""
    we = scheme.w1 * scheme.e1 + scheme.w2 * scheme.e2 + scheme.w3 * scheme.e3
    return -beta * 0.25 * u * we * n_sites


def _batched_root_u_dB(phi, xi, theta, dt, scheme: HsScheme, u: float) -> np.ndarray:
    """sqrt(u) dB for a whole chunk of paths, shape (B, 4N, 4N)."""
    B, n = phi.shape
    rt = np.sqrt(dt)
    s1, s2, s3 = (np.sqrt(complex(u * w * e))
                  for w, e in ((scheme.w1, scheme.e1),
                               (scheme.w2, scheme.e2),
                               (scheme.w3, scheme.e3)))
    e1, e2, e3 = scheme.e1, scheme.e2, scheme.e3
    out = np.zeros((B, 4 * n, 4 * n), dtype=complex)
    idx = np.arange(n)
    dx = rt * phi
    dy = rt * xi
    dz = rt * theta
    au, ad, bu, bd = idx, n + idx, 2 * n + idx, 3 * n + idx
    out[:, au, bu] = s1 * dx
    out[:, bu, au] = -s1 * dx
    out[:, ad, bd] = -s1 * e1 * dx
    out[:, bd, ad] = s1 * e1 * dx
    out[:, au, bd] = s2 * dy
    out[:, bd, au] = -s2 * dy
    out[:, ad, bu] = s2 * e2 * dy
    out[:, bu, ad] = -s2 * e2 * dy
    out[:, au, ad] = s3 * dz
    out[:, ad, au] = -s3 * dz
    out[:, bu, bd] = s3 * e3 * dz
    out[:, bd, bu] = -s3 * e3 * dz
    return out


def _batched_energy_tilde(G_tilde: np.ndarray, params) -> np.ndarray:
    """W evaluated on a chunk of density matrices in the drifted convention."""
    n = params.n_sites
    em = params.eps - params.mu * np.eye(n)
    uu = G_tilde[:, 0 * n:1 * n, 2 * n:3 * n]
    ud = G_tilde[:, 0 * n:1 * n, 3 * n:4 * n]
    du = G_tilde[:, 1 * n:2 * n, 2 * n:3 * n]
    dd = G_tilde[:, 1 * n:2 * n, 3 * n:4 * n]
    aa = np.diagonal(G_tilde[:, 0 * n:1 * n, 1 * n:2 * n], axis1=1, axis2=2)
    bb = np.diagonal(G_tilde[:, 2 * n:3 * n, 3 * n:4 * n], axis1=1, axis2=2)
    quad = 0.5 * (np.einsum("ij,bji->b", em, uu + dd)
                  + (params.s + params.r) * np.einsum("bii->b", du)
                  + (params.s - params.r) * np.einsum("bii->b", ud))
    d_uu = np.diagonal(uu, axis1=1, axis2=2)
    d_dd = np.diagonal(dd, axis1=1, axis2=2)
    d_ud = np.diagonal(ud, axis1=1, axis2=2)
    d_du = np.diagonal(du, axis1=1, axis2=2)
    quart = 0.25 * params.u * np.sum(d_uu * d_dd - d_ud * d_du - aa * bb, axis=1)
    return quad + quart


def untransformed_energy_ensemble(params, scheme: HsScheme, beta: float, dt: float,
                                  n_paths: int, seed: int):
    """Evolve (U, Z) for n_paths and return per-path energy and Z weight.

    Returns (energy (B,) complex, z_mantissa (B,) complex, z_exp2 (B,),
    failed mask).  The energy is W evaluated in the drifted convention on
    i * G_k; the estimator weight is the raw Z.
    """
    from .kernels import rng as _krng
    from .noise import SLOT_PHI, SLOT_THETA, SLOT_XI

    n = params.n_sites
    if n > _MAX_SITES:
        raise ResourceGuard(f"pfqmc guard: n_sites={n} > {_MAX_SITES}")
    from .girsanov import assemble_h0
    h0 = assemble_h0(params)
    k = int(round(beta / dt))
    B = n_paths
    eye = np.eye(4 * n)
    U = np.broadcast_to(eye.astype(complex), (B, 4 * n, 4 * n)).copy()
    zman = np.ones(B, dtype=complex)
    zexp = np.full(B, 2.0 * n)
    failed = np.zeros(B, dtype=bool)
    paths = np.arange(B, dtype=np.uint64)

    for step in range(1, k + 1):
        phi = _krng.normal_matrix(seed, paths, step, SLOT_PHI, n)
        xi = _krng.normal_matrix(seed, paths, step, SLOT_XI, n)
        theta = _krng.normal_matrix(seed, paths, step, SLOT_THETA, n)
        dh = 1j * dt * h0 + 1j * _batched_root_u_dB(phi, xi, theta, dt, scheme, params.u)
        G = np.linalg.solve(eye + U, eye - U)
        tr1 = np.einsum("bij,bji->b", G, dh)
        M = G @ dh
        tr2 = np.einsum("bij,bji->b", M, M)
        tr3 = np.einsum("bij,bji->b", dh, dh)
        factor = 1.0 + 0.25 * tr1 + tr1 * tr1 / 32.0 - tr2 / 16.0 + tr3 / 16.0
        zman = zman * factor
        U = U @ (eye - dh + 0.5 * (dh @ dh))
        bad = ~np.isfinite(U).all(axis=(1, 2)) | ~np.isfinite(zman)
        if bad.any():
            failed |= bad
            U[failed] = eye
            zman[failed] = 1.0
        mag = np.abs(zman)
        big = (mag > 2.0**32) | ((mag > 0) & (mag < 2.0**-32))
        if big.any():
            shift = np.floor(np.log2(mag[big]))
            zman[big] *= 2.0**-shift
            zexp[big] += shift

    G_tilde = 1j * np.linalg.solve(eye + U, eye - U)
    energy = _batched_energy_tilde(G_tilde, params)
    energy[failed] = np.nan
    zman[failed] = np.nan
    return energy, zman, zexp, failed


def untransformed_estimate(params, scheme: HsScheme, beta: float, dt: float,
                           n_paths: int, seed: int, observable: str = "energy"):
    """Z-weighted ratio estimate from the measure-unchanged representation.

    Returns (Estimate, phase_fraction) where phase_fraction is the share
    of surviving weights with |arg Z| > pi/2.
    """
    from .estimators import DegenerateWeights, weighted_ratio_estimate
    if observable != "energy":
        raise ConfigError(f"unsupported observable {observable!r}")
    if beta == 0.0:
        from .estimators import Estimate
        return Estimate(value=0.0, stderr=0.0, n_effective=float(n_paths)), 0.0
    energy, zman, zexp, failed = untransformed_energy_ensemble(
        params, scheme, beta, dt, n_paths, seed)
    keep = ~failed
    if not keep.any():
        raise DegenerateWeights("all paths failed")
    w = zman[keep] * 2.0 ** (zexp[keep] - zexp[keep].max())
    phase_fraction = float(np.mean(np.abs(np.angle(w)) > 0.5 * np.pi))
    est = weighted_ratio_estimate(energy[keep], w)
    return est, phase_fraction
