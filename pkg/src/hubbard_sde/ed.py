"""Dense grand-canonical exact diagonalization on tiny clusters.

Ground-truth oracle for energies, partition traces and correlations.
Occupation-number basis over (site, spin) modes with Jordan-Wigner signs;
mode ordering is site-major, spin-minor (mode = 2*site + spin, spin up = 0).
The same ordering defines the Majorana operator vector (a_up, a_dn, b_up,
b_dn) used for quadratic forms, so oracle and pfaffian sides agree on signs.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lattice import ConfigError, LatticeSpec, ModelParams, ResourceGuard

_MAX_SITES_HAMILTONIAN = 8
_MAX_SITES_TRACE = 3

_SZ = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
_SM = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))  # annihilates |1>
_ID2 = sp.identity(2, format="csr")


def _jw_annihilation(mode: int, n_modes: int) -> sp.csr_matrix:
    """c_mode with Jordan-Wigner string over lower modes."""
    factors = [_SZ] * mode + [_SM] + [_ID2] * (n_modes - mode - 1)
    out = factors[0]
    for f in factors[1:]:
        out = sp.kron(out, f, format="csr")
    return out


class FockOperators:
    """Annihilation/creation and Majorana matrices for n_sites."""

    def __init__(self, n_sites: int):
        if n_sites > _MAX_SITES_HAMILTONIAN:
            raise ResourceGuard(f"Fock space guard: n_sites={n_sites} > {_MAX_SITES_HAMILTONIAN}")
        self.n_sites = n_sites
        self.n_modes = 2 * n_sites
        self.dim = 4**n_sites
        self.c = [_jw_annihilation(m, self.n_modes) for m in range(self.n_modes)]
        self.cdag = [op.conj().T.tocsr() for op in self.c]

    def mode(self, site: int, spin: int) -> int:
        return 2 * site + spin

    def a_op(self, site: int, spin: int) -> sp.csr_matrix:
        m = self.mode(site, spin)
        return self.c[m] + self.cdag[m]

    def b_op(self, site: int, spin: int) -> sp.csr_matrix:
        m = self.mode(site, spin)
        return -1j * (self.c[m] - self.cdag[m])

    def majorana_vector(self) -> list:
        """Length-4N list (a_up sites, a_dn sites, b_up, b_dn)."""
        n = self.n_sites
        out = [self.a_op(j, 0) for j in range(n)]
        out += [self.a_op(j, 1) for j in range(n)]
        out += [self.b_op(j, 0) for j in range(n)]
        out += [self.b_op(j, 1) for j in range(n)]
        return out

    def number(self, site: int, spin: int) -> sp.csr_matrix:
        m = self.mode(site, spin)
        return self.cdag[m] @ self.c[m]


class FockOperator:
    """A dense operator on the grand-canonical Fock space."""

    def __init__(self, matrix: np.ndarray, n_sites: int):
        self.matrix = np.asarray(matrix)
        self.n_sites = n_sites
        self.dim = self.matrix.shape[0]
        if self.dim != 4**n_sites:
            raise ConfigError(f"dimension {self.dim} != 4^{n_sites}")

    @property
    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=1e-10))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        if not self.is_hermitian:
            raise ConfigError("eigendecomposition requested for non-Hermitian operator")
        return scipy.linalg.eigvalsh(self.matrix)


def build_fock_hamiltonian(spec: LatticeSpec, params: ModelParams) -> FockOperator:
    """H = H_tot - Tr[eps - mu] in the occupation basis.

    H_tot carries hopping, chemical potential, on-site exchange s, on-site
    pairing r and the symmetrized quartic term u*(n_up - 1/2)*(n_dn - 1/2).
    """
    n = spec.n_sites
    if params.eps.shape[0] != n:
        raise ConfigError("params.eps size does not match lattice")
    ops = FockOperators(n)
    eps_mu = params.eps - params.mu * np.eye(n)

    H = sp.csr_matrix((ops.dim, ops.dim))
    for i in range(n):
        for j in range(n):
            if eps_mu[i, j] != 0.0:
                for spin in (0, 1):
                    H = H + eps_mu[i, j] * (ops.cdag[ops.mode(i, spin)] @ ops.c[ops.mode(j, spin)])
    if params.s != 0.0:
        for j in range(n):
            up, dn = ops.mode(j, 0), ops.mode(j, 1)
            H = H + params.s * (ops.cdag[up] @ ops.c[dn] + ops.cdag[dn] @ ops.c[up])
    if params.r != 0.0:
        for j in range(n):
            up, dn = ops.mode(j, 0), ops.mode(j, 1)
            H = H + params.r * (ops.cdag[up] @ ops.cdag[dn] + ops.c[dn] @ ops.c[up])
    if params.u != 0.0:
        half = 0.5 * sp.identity(ops.dim, format="csr")
        for j in range(n):
            H = H + params.u * ((ops.number(j, 0) - half) @ (ops.number(j, 1) - half))
    H = H - np.trace(eps_mu) * sp.identity(ops.dim, format="csr")

    mat = H.toarray()
    if np.iscomplexobj(mat) and np.max(np.abs(mat.imag)) < 1e-14:
        mat = mat.real
    return FockOperator(mat, n)


def ed_expectation(H: FockOperator, beta: float) -> float:
    """Thermal expectation Tr[H e^{-beta H}] / Tr[e^{-beta H}]."""
    lam = H.eigenvalues
    w = np.exp(-beta * (lam - lam.min()))
    return float(np.sum(lam * w) / np.sum(w))


def ed_partition_ratio(H: FockOperator, beta: float) -> float:
    """Tr[e^{-beta H}] / Tr[Id]."""
    lam = H.eigenvalues
    return float(np.mean(np.exp(-beta * lam)))


def ed_partition_trace(generators, n_sites: int) -> complex:
    """Exact Tr_F of the product of exponentials of quadratic Majorana forms.

    Each generator h is a skew-symmetric 4N x 4N matrix defining the
    quadratic operator (1/4) a h a over the Majorana vector; the trace of
    prod_l exp(-H_l) is evaluated by dense matrix exponentials.
    """
    if n_sites > _MAX_SITES_TRACE:
        raise ResourceGuard(f"partition-trace guard: n_sites={n_sites} > {_MAX_SITES_TRACE}")
    ops = FockOperators(n_sites)
    a = [op.toarray() for op in ops.majorana_vector()]
    dim = ops.dim
    prod = np.eye(dim, dtype=complex)
    for h in generators:
        h = np.asarray(h)
        if h.shape != (4 * n_sites, 4 * n_sites):
            raise ConfigError(f"generator shape {h.shape} != (4N, 4N)")
        Hq = np.zeros((dim, dim), dtype=complex)
        for x in range(4 * n_sites):
            for y in range(4 * n_sites):
                if h[x, y] != 0.0:
                    Hq += 0.25 * h[x, y] * (a[x] @ a[y])
        prod = prod @ scipy.linalg.expm(-Hq)
    return complex(np.trace(prod))


def ed_correlations(H: FockOperator, beta: float, i: int, j: int):
    """Thermal spin-spin and pair-pair correlations (C_spin, C_pair).

    C_spin(i,j) = <(n_iu - n_id)(n_ju - n_jd)>,
    C_pair(i,j) = <c+_iu c+_id c_jd c_ju>.
    """
    ops = FockOperators(H.n_sites)
    if not H.is_hermitian:
        raise ConfigError("correlations need a Hermitian Hamiltonian")
    lam, vecs = scipy.linalg.eigh(H.matrix)
    w = np.exp(-beta * (lam - lam.min()))
    w /= w.sum()

    def thermal(op: sp.csr_matrix) -> float:
        transformed = vecs.conj().T @ (op @ vecs)
        return float(np.real(np.sum(w * np.diag(transformed))))

    s_i = ops.number(i, 0) - ops.number(i, 1)
    s_j = ops.number(j, 0) - ops.number(j, 1)
    c_spin = thermal(s_i @ s_j)

    pair = ops.cdag[ops.mode(i, 0)] @ ops.cdag[ops.mode(i, 1)] \
        @ ops.c[ops.mode(j, 1)] @ ops.c[ops.mode(j, 0)]
    c_pair = thermal(pair)
    return c_spin, c_pair
