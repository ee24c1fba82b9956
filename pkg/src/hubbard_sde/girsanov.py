"""Full complex 4N x 4N density-matrix SDE of the drifted representation.

Block layout is (a_up, a_dn, b_up, b_dn), each of size N, so every 4x4
block formula transcribes directly.  The density matrix G is kept in the
convention where diagonal observables are real (the i of the Majorana
bilinears is absorbed into G); the pfqmc module owns the unabsorbed
convention and the bridge G_here = i * G_pfqmc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import ConfigError, ModelParams


class NumericalFailure(RuntimeError):
    """Raised when a path state stops being finite."""


@dataclass(frozen=True)
class HsScheme:
    """Quartic-term factorization weights and signs.

    nu_i = sqrt(w_i * e_i) on the principal branch, so nu_i is imaginary
    whenever the weighted sign is negative.
    """

    w1: float
    w2: float
    w3: float
    e1: int = 1
    e2: int = 1
    e3: int = 1

    def __post_init__(self):
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-12:
            raise ConfigError("scheme weights must sum to 1")
        for e in (self.e1, self.e2, self.e3):
            if e not in (-1, +1):
                raise ConfigError("scheme signs must be -1 or +1")

    @property
    def nu(self) -> tuple:
        return (
            np.sqrt(complex(self.w1 * self.e1)),
            np.sqrt(complex(self.w2 * self.e2)),
            np.sqrt(complex(self.w3 * self.e3)),
        )

    @classmethod
    def pure_w1(cls, u: float) -> "HsScheme":
        s = sign_u(u)
        return cls(1.0, 0.0, 0.0, e1=s, e2=s, e3=s)

    @classmethod
    def pure_w2(cls, u: float) -> "HsScheme":
        s = sign_u(u)
        return cls(0.0, 1.0, 0.0, e1=s, e2=s, e3=s)


def sign_u(u: float) -> int:
    """Sign of the coupling with sign(0) := +1."""
    return -1 if u < 0 else +1


@dataclass
class DensityStateFull:
    """Evolving complex skew-symmetric density matrix, G(t=0) = 0."""

    G: np.ndarray

    @classmethod
    def initial(cls, n_sites: int) -> "DensityStateFull":
        return cls(G=np.zeros((4 * n_sites, 4 * n_sites), dtype=complex))

    @property
    def n_sites(self) -> int:
        return self.G.shape[0] // 4


@dataclass
class ActionAccumulator:
    """Left-endpoint Riemann sum of the energy along a path."""

    S: complex = 0.0 + 0.0j

    def add(self, w_pre_step: complex, dt: float) -> None:
        self.S += w_pre_step * dt


def _blk(M: np.ndarray, p: int, q: int) -> np.ndarray:
    n = M.shape[0] // 4
    return M[p * n:(p + 1) * n, q * n:(q + 1) * n]


def block_view(G: np.ndarray, name: str) -> np.ndarray:
    """Named N x N spin block, e.g. 'ab_ud' for the a-b up-down block."""
    fam, spins = name.split("_")
    rows = {"a": 0, "b": 2}[fam[0]] + {"u": 0, "d": 1}[spins[0]]
    cols = {"a": 0, "b": 2}[fam[1]] + {"u": 0, "d": 1}[spins[1]]
    return _blk(G, rows, cols)


def assemble_h0(params: ModelParams) -> np.ndarray:
    """Skew quadratic-part matrix [[0, A], [-A^T, 0]]."""
    n = params.n_sites
    em = params.eps - params.mu * np.eye(n)
    sr = (params.s - params.r) * np.eye(n)
    sp = (params.s + params.r) * np.eye(n)
    A = np.block([[em, sr], [sp, em]])
    h0 = np.zeros((4 * n, 4 * n))
    h0[:2 * n, 2 * n:] = A
    h0[2 * n:, :2 * n] = -A.T
    return h0


def _dB_pattern(draw, coefs, signs) -> np.ndarray:
    n = len(draw.phi)
    rt = np.sqrt(draw.dt)
    dx = np.diag(rt * draw.phi)
    dy = np.diag(rt * draw.xi)
    dz = np.diag(rt * draw.theta)
    c1, c2, c3 = coefs
    e1, e2, e3 = signs
    Z = np.zeros((n, n))
    return np.block([
        [Z, c3 * dz, c1 * dx, c2 * dy],
        [-c3 * dz, Z, c2 * e2 * dy, -c1 * e1 * dx],
        [-c1 * dx, -c2 * e2 * dy, Z, c3 * e3 * dz],
        [-c2 * dy, c1 * e1 * dx, -c3 * e3 * dz, Z],
    ])


def assemble_dB(draw, scheme: HsScheme) -> np.ndarray:
    """Scheme-dependent noise matrix built from the diagonal increments."""
    return _dB_pattern(draw, scheme.nu, (scheme.e1, scheme.e2, scheme.e3))


def assemble_root_u_dB(draw, scheme: HsScheme, u: float) -> np.ndarray:
    """The combination sqrt(u) * dB entering the SDE noise term.

    Branch convention: each amplitude is the single principal root
    sqrt(u * w_i * e_i), not the product of separate roots.  The two
    choices differ only when u < 0 and e_i < 0; the single root is the
    one consistent with the real reduced systems (noise there is
    -sqrt(|u| w_i) for e_i = sign u).
    """
    coefs = tuple(np.sqrt(complex(u * w * e))
                  for w, e in ((scheme.w1, scheme.e1),
                               (scheme.w2, scheme.e2),
                               (scheme.w3, scheme.e3)))
    return _dB_pattern(draw, coefs, (scheme.e1, scheme.e2, scheme.e3))


def assemble_DG(G: np.ndarray) -> np.ndarray:
    """Scheme-independent drift matrix from diagonal extractions of G."""
    n = G.shape[0] // 4
    d = {
        "bb_ud": np.diag(np.diagonal(_blk(G, 2, 3))),
        "ab_dd": np.diag(np.diagonal(_blk(G, 1, 3))),
        "ab_du": np.diag(np.diagonal(_blk(G, 1, 2))),
        "ab_ud": np.diag(np.diagonal(_blk(G, 0, 3))),
        "ab_uu": np.diag(np.diagonal(_blk(G, 0, 2))),
        "aa_ud": np.diag(np.diagonal(_blk(G, 0, 1))),
    }
    Z = np.zeros((n, n), dtype=G.dtype)
    return np.block([
        [Z, d["bb_ud"], -d["ab_dd"], d["ab_du"]],
        [-d["bb_ud"], Z, d["ab_ud"], -d["ab_uu"]],
        [d["ab_dd"], -d["ab_ud"], Z, d["aa_ud"]],
        [-d["ab_du"], d["ab_uu"], -d["aa_ud"], Z],
    ])


def build_site_generators(j: int, scheme: HsScheme, n_sites: int):
    """Single-site noise generators (D_j, E_j, F_j), each skew 4N x 4N."""
    n = n_sites
    if not (0 <= j < n):
        raise ConfigError(f"site {j} outside lattice of {n} sites")
    one = np.zeros((n, n))
    one[j, j] = 1.0
    Z = np.zeros((n, n))
    nu1, nu2, nu3 = scheme.nu
    e1, e2, e3 = scheme.e1, scheme.e2, scheme.e3
    D = nu1 * np.block([
        [Z, Z, one, Z],
        [Z, Z, Z, -e1 * one],
        [-one, Z, Z, Z],
        [Z, e1 * one, Z, Z],
    ])
    E = nu2 * np.block([
        [Z, Z, Z, one],
        [Z, Z, e2 * one, Z],
        [Z, -e2 * one, Z, Z],
        [-one, Z, Z, Z],
    ])
    F = nu3 * np.block([
        [Z, one, Z, Z],
        [-one, Z, Z, Z],
        [Z, Z, Z, e3 * one],
        [Z, Z, -e3 * one, Z],
    ])
    return D, E, F


def sde_step_full(state: DensityStateFull, h0: np.ndarray, scheme: HsScheme,
                  draw, dt: float, u: float,
                  drift_mode: str = "girsanov") -> DensityStateFull:
    """One Euler step of dG = (1/2)(G - i)[M](G + i), coefficients at the
    pre-step state (Ito), followed by exact re-antisymmetrization.

    drift_mode 'girsanov' uses the scheme-independent drift (u/2) DG dt;
    'untransformed' uses the literal second-order noise square
    (u/2) dB G dB of the measure-unchanged evolution (and so depends on
    the scheme).
    """
    G = state.G
    if drift_mode == "girsanov":
        drift = 0.5 * u * dt * assemble_DG(G)
    elif drift_mode == "untransformed":
        dB = assemble_dB(draw, scheme)
        drift = 0.5 * u * (dB @ G @ dB)
    else:
        raise ConfigError(f"unknown drift_mode {drift_mode!r}")
    M = -h0 * dt + drift - assemble_root_u_dB(draw, scheme, u)
    eye = np.eye(G.shape[0])
    dG = 0.5 * (G - 1j * eye) @ M @ (G + 1j * eye)
    Gp = G + dG
    Gp = 0.5 * (Gp - Gp.T)
    if not np.all(np.isfinite(Gp)):
        raise NumericalFailure("non-finite density-matrix entries")
    return DensityStateFull(G=Gp)


def energy_W(state: DensityStateFull, params: ModelParams) -> complex:
    """Energy functional W(G); scheme-independent."""
    G = state.G
    n = params.n_sites
    em = params.eps - params.mu * np.eye(n)
    ab_uu = _blk(G, 0, 2)
    ab_ud = _blk(G, 0, 3)
    ab_du = _blk(G, 1, 2)
    ab_dd = _blk(G, 1, 3)
    aa_ud = np.diagonal(_blk(G, 0, 1))
    bb_ud = np.diagonal(_blk(G, 2, 3))
    quad = 0.5 * (
        np.trace(em @ (ab_uu + ab_dd))
        + (params.s + params.r) * np.trace(ab_du)
        + (params.s - params.r) * np.trace(ab_ud)
    )
    d_uu = np.diagonal(ab_uu)
    d_dd = np.diagonal(ab_dd)
    d_ud = np.diagonal(ab_ud)
    d_du = np.diagonal(ab_du)
    quart = 0.25 * params.u * np.sum(d_uu * d_dd - d_ud * d_du - aa_ud * bb_ud)
    return complex(quad + quart)


def density_from_G(state: DensityStateFull, j: int):
    """Pathwise (occupation_up - 1/2, exchange, pairing) at site j."""
    G = state.G
    n = state.n_sites
    if not (0 <= j < n):
        raise ConfigError(f"site {j} outside lattice of {n} sites")
    g_uu = _blk(G, 0, 2)[j, j]
    g_ud = _blk(G, 0, 3)[j, j]
    g_du = _blk(G, 1, 2)[j, j]
    return (0.5 * g_uu, 0.5 * (g_ud + g_du), -0.5 * (g_ud - g_du))
