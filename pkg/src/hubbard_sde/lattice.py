"""Cubic lattices, nearest-neighbor hopping and bipartite on/off masks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid lattice/model/run configuration."""


class ResourceGuard(ConfigError):
    """Raised when a request exceeds a hard size guard (Fock dim, paths)."""


@dataclass(frozen=True)
class LatticeSpec:
    """Rectangular lattice {1..L1} x .. x {1..Ld}, flat row-major indexing.

    L may be a single length (cubic) or one length per dimension; a site
    with 1-based coordinates (j1, .., jd) maps to the flat index
    (j1-1)*L2*..*Ld + .. + (jd-1).
    """

    L: object
    d: int
    boundary: str  # "open" | "periodic"
    dims: tuple = field(init=False)
    n_sites: int = field(init=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError(f"only d in (1, 2) supported, got d={self.d}")
        if self.boundary not in ("open", "periodic"):
            raise ConfigError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        dims = tuple(int(x) for x in self.L) if hasattr(self.L, "__len__") \
            else (int(self.L),) * self.d
        if len(dims) != self.d:
            raise ConfigError(f"L={self.L!r} does not match d={self.d}")
        if any(x < 1 for x in dims):
            raise ConfigError(f"lattice lengths must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)
        n = 1
        for x in dims:
            n *= x
        object.__setattr__(self, "n_sites", n)

    def site_index(self, coords) -> int:
        """Flat index of a site given 1-based coordinates."""
        coords = tuple(int(c) for c in (coords if hasattr(coords, "__len__") else (coords,)))
        if len(coords) != self.d or any(
                not (1 <= c <= L) for c, L in zip(coords, self.dims)):
            raise ConfigError(f"coordinates {coords} outside {self.dims} lattice")
        idx = 0
        for c, L in zip(coords, self.dims):
            idx = idx * L + (c - 1)
        return idx

    def site_coords(self, idx: int) -> tuple:
        """1-based coordinates of a flat site index."""
        if not (0 <= idx < self.n_sites):
            raise ConfigError(f"site index {idx} outside 0..{self.n_sites - 1}")
        out = []
        for L in reversed(self.dims):
            out.append(idx % L + 1)
            idx //= L
        return tuple(reversed(out))

    def neighbors(self, idx: int) -> list:
        """Flat indices of nearest neighbors under the boundary rule."""
        coords = list(self.site_coords(idx))
        out = set()
        for axis in range(self.d):
            L = self.dims[axis]
            for step in (-1, +1):
                c = coords.copy()
                c[axis] += step
                if self.boundary == "periodic" and L > 2:
                    c[axis] = (c[axis] - 1) % L + 1
                if 1 <= c[axis] <= L:
                    j = self.site_index(c)
                    if j != idx:
                        out.add(j)
        return sorted(out)

    @property
    def is_bipartite(self) -> bool:
        """Even/odd coordinate-sum 2-coloring is a proper coloring.

        Fails only for periodic boundaries with an odd length > 1 in some
        direction (wraparound bonds connect equal-parity sites).
        """
        return not (self.boundary == "periodic"
                    and any(L % 2 == 1 and L > 1 for L in self.dims))

    def coordinate_parity(self) -> np.ndarray:
        """Per-site parity (0/1) of the coordinate sum, length N."""
        par = np.empty(self.n_sites, dtype=np.int64)
        for i in range(self.n_sites):
            par[i] = sum(self.site_coords(i)) % 2
        return par


@dataclass(frozen=True)
class BipartiteMasks:
    """Elementwise masks: chi_on[i,j] = 1 iff i, j on the same sublattice."""

    chi_on: np.ndarray
    chi_off: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    """Quadratic and quartic couplings of the lattice Hamiltonian.

    eps is the real symmetric hopping matrix, mu the chemical potential,
    r / s the on-site pairing / exchange fields and u the on-site coupling.
    """

    eps: np.ndarray
    mu: float = 0.0
    r: float = 0.0
    s: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        if eps.ndim != 2 or eps.shape[0] != eps.shape[1]:
            raise ConfigError(f"eps must be square, got shape {eps.shape}")
        if not np.allclose(eps, eps.T, atol=1e-12):
            raise ConfigError("eps must be symmetric")
        object.__setattr__(self, "eps", eps)

    @property
    def n_sites(self) -> int:
        return self.eps.shape[0]

    @property
    def eps_u(self) -> int:
        """Sign of the coupling; +1 when u == 0."""
        return -1 if self.u < 0 else +1


def build_lattice(L, d: int, boundary: str = "open") -> LatticeSpec:
    """Build a cubic lattice spec, rejecting unsupported geometry."""
    return LatticeSpec(L=L, d=d, boundary=boundary)


def hopping_matrix(spec: LatticeSpec, t: float) -> np.ndarray:
    """Nearest-neighbor hopping matrix: eps[i,j] = t iff i,j neighbors."""
    n = spec.n_sites
    eps = np.zeros((n, n))
    for i in range(n):
        for j in spec.neighbors(i):
            eps[i, j] = t
    return eps


def bipartite_masks(spec: LatticeSpec) -> BipartiteMasks:
    """Same-sublattice / cross-sublattice masks from coordinate parity.

    For periodic odd-L lattices the parity coloring is not a proper
    2-coloring; a warning is emitted and half-filling invariants must be
    considered disabled by the caller.
    """
    if not spec.is_bipartite:
        warnings.warn(
            f"periodic lattice with odd length {spec.dims} is not bipartite; "
            "half-filling identities do not apply",
            stacklevel=2,
        )
    par = spec.coordinate_parity()
    chi_on = (par[:, None] == par[None, :]).astype(float)
    return BipartiteMasks(chi_on=chi_on, chi_off=1.0 - chi_on)


def project_on_off(M: np.ndarray, masks: BipartiteMasks, part: str) -> np.ndarray:
    """Elementwise on-part (same sublattice) or off-part of a matrix."""
    M = np.asarray(M)
    if M.shape != masks.chi_on.shape:
        raise ConfigError(f"matrix shape {M.shape} does not match masks {masks.chi_on.shape}")
    if part == "on":
        return masks.chi_on * M
    if part == "off":
        return masks.chi_off * M
    raise ConfigError(f"part must be 'on' or 'off', got {part!r}")
