"""Deterministic long-horizon trajectories under constant scalar fields.

Replacing the Brownian increments of the half-filling systems by a fixed
per-site field turns the SDE into an ODE; the time-averaged action density
V0 is scanned over a scalar field amplitude (staggered or uniform) and its
grid minimizer provides the ground-state energy estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .girsanov import NumericalFailure
from .lattice import ConfigError, LatticeSpec, ModelParams


@dataclass(frozen=True)
class FieldAnsatz:
    """Constant-in-time per-site field, staggered or uniform."""

    kind: str  # "staggered" | "uniform"
    amplitude: float

    def realization(self, lattice: LatticeSpec) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(lattice.n_sites, self.amplitude)
        if self.kind == "staggered":
            if not lattice.is_bipartite:
                raise ConfigError("staggered field needs a bipartite lattice")
            signs = 1.0 - 2.0 * lattice.coordinate_parity()
            return self.amplitude * signs
        raise ConfigError(f"unknown field kind {self.kind!r}")


@dataclass
class V0Result:
    """Grid scan of the action density and its minimizer."""

    kind: str
    amplitudes: np.ndarray
    v0_per_site: np.ndarray
    argmin_amplitude: float
    energy_per_site: float


def _w_value(eps, au, rho_for_trace, rho_diag):
    return float(np.sum(eps * rho_for_trace.T) - 0.25 * au * np.sum(rho_diag**2))


def ode_trajectory_w1(field: FieldAnsatz, lattice: LatticeSpec, params: ModelParams,
                      T: float, dt: float, record_every: int = 1):
    """Euler trajectory of the w1 half-filling ODE under the fixed field.

    Returns (times, W_values, terminal (rho, F)); W is recorded at the
    pre-step states every record_every steps plus the terminal state.
    """
    if params.mu != 0.0 or params.r != 0.0 or params.s != 0.0:
        raise ConfigError("w1 trajectory requires mu = r = s = 0")
    n = lattice.n_sites
    if params.eps.shape[0] != n:
        raise ConfigError("params.eps does not match the lattice")
    phi = field.realization(lattice)
    au = abs(params.u)
    eps = params.eps
    eye = np.eye(n)
    base = -eps - np.sqrt(au) * np.diag(phi)
    k = int(round(T / dt))
    rho = np.zeros((n, n))
    F = np.zeros((n, n))
    times, w_vals = [], []
    for step in range(k):
        if step % record_every == 0:
            times.append(step * dt)
            w_vals.append(_w_value(eps, au, rho, np.diagonal(rho)))
        h = base + 0.5 * au * np.diag(np.diagonal(rho))
        dh = h * dt
        t1 = (eye - F) @ dh
        d_rho = 0.5 * (t1 @ (eye + F) - rho @ (dh @ rho))
        t2 = t1 @ rho
        rho = rho + d_rho
        F = F + 0.5 * (t2 - t2.T)
        rho = 0.5 * (rho + rho.T)
        F = 0.5 * (F - F.T)
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(F))):
        raise NumericalFailure("non-finite trajectory state")
    times.append(k * dt)
    w_vals.append(_w_value(eps, au, rho, np.diagonal(rho)))
    return np.array(times), np.array(w_vals), (rho, F)


def ode_trajectory_w2(field: FieldAnsatz, lattice: LatticeSpec, params: ModelParams,
                      T: float, dt: float, record_every: int = 1):
    """Euler trajectory of the w2 half-filling ODE under the fixed field."""
    if params.mu != 0.0 or params.r != 0.0 or params.s != 0.0:
        raise ConfigError("w2 trajectory requires mu = r = s = 0")
    n = lattice.n_sites
    xi = field.realization(lattice)
    au = abs(params.u)
    eu = params.eps_u
    eps = params.eps
    eye = np.eye(2 * n)
    k = int(round(T / dt))
    ruu = np.zeros((n, n))
    rud = np.zeros((n, n))
    fuu = np.zeros((n, n))
    fud = np.zeros((n, n))
    times, w_vals = [], []
    for step in range(k):
        if step % record_every == 0:
            times.append(step * dt)
            w_vals.append(_w_value(eps, au, ruu, np.diagonal(rud)))
        dd = np.diag(0.5 * au * np.diagonal(rud) - np.sqrt(au) * xi) * dt
        dh = np.block([[-eps * dt, dd], [eu * dd, -eps * dt]])
        rho = np.block([[ruu, rud], [eu * rud, ruu]])
        F = np.block([[fuu, fud], [eu * fud, fuu]])
        Ft = np.block([[fuu, eu * fud], [fud, fuu]])
        t1 = (eye - F) @ dh
        d_rho = 0.5 * (t1 @ (eye + Ft) - rho @ (dh.T @ rho))
        t2 = t1 @ rho.T
        d_f = 0.5 * (t2 - t2.T)
        ruu = ruu + d_rho[:n, :n]
        rud = rud + d_rho[:n, n:]
        fuu = fuu + d_f[:n, :n]
        fud = fud + d_f[:n, n:]
        ruu = 0.5 * (ruu + ruu.T)
        rud = 0.5 * (rud + rud.T)
        fuu = 0.5 * (fuu - fuu.T)
        fud = 0.5 * (fud - eu * fud.T)
    if not all(np.all(np.isfinite(m)) for m in (ruu, rud, fuu, fud)):
        raise NumericalFailure("non-finite trajectory state")
    times.append(k * dt)
    w_vals.append(_w_value(eps, au, ruu, np.diagonal(rud)))
    return np.array(times), np.array(w_vals), (ruu, rud, fuu, fud)


def v0_functional(field: FieldAnsatz, lattice: LatticeSpec, params: ModelParams,
                  T: float, dt: float, representation: str = "w1") -> float:
    """Time-averaged action density (1/T) int [ sum phi^2 / 2 + W ] dt.

    Left-endpoint rule; the field term is constant in time.
    """
    traj = ode_trajectory_w1 if representation == "w1" else ode_trajectory_w2
    times, w_vals, _ = traj(field, lattice, params, T, dt, record_every=1)
    phi = field.realization(lattice)
    w_sum = float(np.sum(w_vals[:-1]) * dt)  # left endpoints
    return 0.5 * float(np.sum(phi * phi)) + w_sum / T


def minimize_scalar_ansatz(lattice: LatticeSpec, params: ModelParams, grid,
                           kind: str, T: float = 20.0, dt: float = 0.01,
                           representation: str = "w1") -> V0Result:
    """Scan V0 over field amplitudes; report argmin and the terminal energy.

    The energy per site is W(rho_T) / N at the minimizing amplitude, the
    ground-state estimate of the long-horizon limit.
    """
    grid = np.asarray(sorted(grid), dtype=float)
    if grid.size == 0:
        raise ConfigError("amplitude grid is empty")
    n = lattice.n_sites
    v0 = np.empty(grid.size)
    for i, amp in enumerate(grid):
        v0[i] = v0_functional(FieldAnsatz(kind, float(amp)), lattice, params, T, dt,
                              representation)
    best = int(np.argmin(v0))
    traj = ode_trajectory_w1 if representation == "w1" else ode_trajectory_w2
    times, w_vals, _ = traj(FieldAnsatz(kind, float(grid[best])), lattice, params,
                            T, dt, record_every=max(1, int(round(T / dt))))
    return V0Result(kind=kind, amplitudes=grid, v0_per_site=v0 / n,
                    argmin_amplitude=float(grid[best]),
                    energy_per_site=float(w_vals[-1]) / n)
