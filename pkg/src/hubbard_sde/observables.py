"""Monte Carlo drivers and estimators for the drifted representation.

run_paths evolves an ensemble of independent paths from the zero state,
accumulating the left-endpoint action sum S = sum W dt, and snapshots the
state at the requested inverse-temperature checkpoints.  All estimators
are ratio estimators weighted by exp(-S) with leave-one-out jackknife
errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .estimators import Estimate, mean_estimate, weighted_ratio_estimate
from .girsanov import HsScheme, NumericalFailure, assemble_h0
from .kernels import rng as _rng
from .lattice import ConfigError, LatticeSpec, ModelParams, bipartite_masks
from .noise import SLOT_PHI, SLOT_THETA, SLOT_XI
from .pfqmc import _batched_energy_tilde, _batched_root_u_dB

REPRESENTATIONS = ("full", "w1", "w2")
DEFAULT_CHUNK = 20_000


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything one ensemble run needs."""

    lattice: LatticeSpec
    params: ModelParams
    scheme: HsScheme
    representation: str
    beta: float
    dt: float
    n_paths: int
    seed: int
    checkpoints: tuple = ()
    chunk_size: int = DEFAULT_CHUNK
    failure_threshold: float = 0.01
    backend: str | None = None
    path_offset: int = 0       # shift of the path-id stream (segmented runs)
    store_states: bool = True  # keep checkpoint snapshots (memory-heavy)

    def resolved_checkpoints(self) -> tuple:
        cps = tuple(sorted(self.checkpoints)) if self.checkpoints else (self.beta,)
        if any(b < 0 or b > self.beta + 1e-12 for b in cps):
            raise ConfigError("checkpoints must lie in [0, beta]")
        return cps


@dataclass
class PathEnsemble:
    """Per-path observables and state snapshots of one ensemble run."""

    config: EnsembleConfig
    cp_betas: np.ndarray
    W: np.ndarray            # (n_cp, n_paths), complex for full rep
    S: np.ndarray            # (n_cp, n_paths)
    states: dict             # representation-specific snapshot arrays
    failed: np.ndarray       # (n_paths,) bool

    @property
    def n_paths(self) -> int:
        return self.failed.size

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    @property
    def representation(self) -> str:
        return self.config.representation

    def checkpoint_index(self, beta: float) -> int:
        hits = np.where(np.abs(self.cp_betas - beta) < 1e-9)[0]
        if hits.size == 0:
            raise ConfigError(f"beta={beta} is not a checkpoint of this ensemble")
        return int(hits[0])


def _validate_hypotheses(cfg: EnsembleConfig) -> None:
    rep = cfg.representation
    if rep not in REPRESENTATIONS:
        raise ConfigError(f"representation must be one of {REPRESENTATIONS}")
    p, sch = cfg.params, cfg.scheme
    if rep == "full":
        return
    if p.mu != 0.0 or p.r != 0.0 or p.s != 0.0:
        raise ConfigError(f"{rep} representation requires mu = r = s = 0")
    if not cfg.lattice.is_bipartite:
        raise ConfigError(f"{rep} representation requires a bipartite lattice")
    want = {"w1": (1.0, 0.0), "w2": (0.0, 1.0)}[rep]
    if (sch.w1, sch.w2) != want or sch.w3 != 0.0:
        raise ConfigError(f"representation {rep} requires weights w1,w2 = {want}")
    from .girsanov import sign_u
    if sch.e1 != sign_u(p.u) or sch.e2 != sign_u(p.u):
        raise ConfigError("reduced representations require e1 = e2 = sign(u)")


def _cp_steps(cfg: EnsembleConfig):
    cps = cfg.resolved_checkpoints()
    steps = []
    for b in cps:
        s = b / cfg.dt
        if abs(s - round(s)) > 1e-8:
            raise ConfigError(f"checkpoint beta={b} is not a multiple of dt={cfg.dt}")
        steps.append(int(round(s)))
    return np.array(cps), np.array(steps, dtype=np.int64)


def run_paths(cfg: EnsembleConfig) -> PathEnsemble:
    """Evolve the configured ensemble; deterministic for a given seed."""
    _validate_hypotheses(cfg)
    cp_betas, cp_steps = _cp_steps(cfg)
    n_steps = int(round(cfg.beta / cfg.dt))
    if cp_steps.size and cp_steps[-1] > n_steps:
        raise ConfigError("checkpoint beyond beta")
    n = cfg.lattice.n_sites
    if cfg.params.eps.shape[0] != n:
        raise ConfigError("params.eps does not match the lattice")

    if cfg.representation == "w1":
        keys = ("rho", "F")
        evolve = kernels.evolve_w1_ensemble
    elif cfg.representation == "w2":
        keys = ("rho_uu", "rho_ud", "F_uu", "F_ud")
        evolve = kernels.evolve_w2_ensemble
    else:
        keys = ("G",)
        evolve = None

    n_cp = cp_steps.size
    if cfg.representation == "full":
        W = np.zeros((n_cp, cfg.n_paths), dtype=complex)
        S = np.zeros((n_cp, cfg.n_paths), dtype=complex)
        states = {"G": np.zeros((n_cp, cfg.n_paths, 4 * n, 4 * n), dtype=complex)}
    else:
        W = np.zeros((n_cp, cfg.n_paths))
        S = np.zeros((n_cp, cfg.n_paths))
        states = {k: np.zeros((n_cp, cfg.n_paths, n, n)) for k in keys}
    if not cfg.store_states:
        states = {}
    failed = np.zeros(cfg.n_paths, dtype=bool)

    for path0 in range(0, cfg.n_paths, cfg.chunk_size):
        m = min(cfg.chunk_size, cfg.n_paths - path0)
        sl = slice(path0, path0 + m)
        if cfg.representation == "full":
            out = _evolve_full_ensemble(cfg, n_steps, cp_steps, cfg.path_offset + path0, m)
        else:
            out = evolve(cfg.params.eps, cfg.params.u, cfg.dt, n_steps, cp_steps,
                         cfg.seed, cfg.path_offset + path0, m, backend=cfg.backend)
        W[:, sl] = out["W"]
        S[:, sl] = out["S"]
        for k in states:
            states[k][:, sl] = out[k]
        failed[sl] = out["failed"]

    frac = failed.mean() if cfg.n_paths else 0.0
    if frac > cfg.failure_threshold:
        raise NumericalFailure(
            f"{failed.sum()}/{cfg.n_paths} paths failed ({frac:.1%} > "
            f"{cfg.failure_threshold:.1%} threshold)")
    return PathEnsemble(config=cfg, cp_betas=cp_betas, W=W, S=S,
                        states=states, failed=failed)


def _evolve_full_ensemble(cfg: EnsembleConfig, n_steps, cp_steps, path0, n_paths):
    """Batched-numpy evolution of the full complex system (reference path)."""
    p = cfg.params
    n = p.n_sites
    h0 = assemble_h0(p)
    eye = np.eye(4 * n)
    G = np.zeros((n_paths, 4 * n, 4 * n), dtype=complex)
    S = np.zeros(n_paths, dtype=complex)
    failed = np.zeros(n_paths, dtype=bool)
    paths = np.arange(path0, path0 + n_paths, dtype=np.uint64)
    n_cp = cp_steps.size
    out = {
        "W": np.zeros((n_cp, n_paths), dtype=complex),
        "S": np.zeros((n_cp, n_paths), dtype=complex),
        "G": np.zeros((n_cp, n_paths, 4 * n, 4 * n), dtype=complex),
        "failed": failed,
    }
    idx = np.arange(n)
    cp = 0
    while cp < n_cp and cp_steps[cp] == 0:
        cp += 1

    def _dg_batched(G):
        d = np.zeros_like(G)
        au, ad, bu, bd = idx, n + idx, 2 * n + idx, 3 * n + idx
        g = {
            "bb_ud": G[:, bu, bd], "ab_dd": G[:, ad, bd], "ab_du": G[:, ad, bu],
            "ab_ud": G[:, au, bd], "ab_uu": G[:, au, bu], "aa_ud": G[:, au, ad],
        }
        d[:, au, ad] = g["bb_ud"]
        d[:, ad, au] = -g["bb_ud"]
        d[:, au, bu] = -g["ab_dd"]
        d[:, bu, au] = g["ab_dd"]
        d[:, au, bd] = g["ab_du"]
        d[:, bd, au] = -g["ab_du"]
        d[:, ad, bu] = g["ab_ud"]
        d[:, bu, ad] = -g["ab_ud"]
        d[:, ad, bd] = -g["ab_uu"]
        d[:, bd, ad] = g["ab_uu"]
        d[:, bu, bd] = g["aa_ud"]
        d[:, bd, bu] = -g["aa_ud"]
        return d

    for step in range(1, n_steps + 1):
        S = S + _batched_energy_tilde(G, p) * cfg.dt
        phi = _rng.normal_matrix(cfg.seed, paths, step, SLOT_PHI, n)
        xi = _rng.normal_matrix(cfg.seed, paths, step, SLOT_XI, n)
        theta = _rng.normal_matrix(cfg.seed, paths, step, SLOT_THETA, n)
        M = -h0 * cfg.dt + 0.5 * p.u * cfg.dt * _dg_batched(G) \
            - _batched_root_u_dB(phi, xi, theta, cfg.dt, cfg.scheme, p.u)
        G = G + 0.5 * (G - 1j * eye) @ M @ (G + 1j * eye)
        G = 0.5 * (G - np.swapaxes(G, 1, 2))
        bad = ~np.isfinite(G).all(axis=(1, 2))
        if bad.any():
            failed |= bad
            G[failed] = 0.0
            S[failed] = 0.0
        while cp < n_cp and cp_steps[cp] == step:
            out["W"][cp] = _batched_energy_tilde(G, p)
            out["S"][cp] = S
            out["G"][cp] = G
            cp += 1
    if failed.any():
        for key in ("W", "S", "G"):
            out[key][:, failed] = np.nan
    return out


def _weights(ens: PathEnsemble, cp: int):
    ok = ~ens.failed
    S = ens.S[cp, ok]
    shift = np.min(S.real)
    return ok, np.exp(-(S - shift))


def girsanov_energy(ens: PathEnsemble, beta: float | None = None) -> Estimate:
    """<H> at a checkpoint: ratio <W e^{-S}> / <e^{-S}>."""
    cp = ens.checkpoint_index(beta if beta is not None else ens.cp_betas[-1])
    ok, w = _weights(ens, cp)
    return weighted_ratio_estimate(ens.W[cp, ok], w)


def partition_ratio(ens: PathEnsemble, beta: float | None = None) -> Estimate:
    """Tr[e^{-beta H}] / Tr[Id] = mean of e^{-S}, overflow-guarded."""
    cp = ens.checkpoint_index(beta if beta is not None else ens.cp_betas[-1])
    ok = ~ens.failed
    S = ens.S[cp, ok]
    shift = np.min(S.real)
    base = mean_estimate(np.exp(-(S - shift)))
    scale = float(np.exp(-shift))
    return Estimate(value=base.value * scale, stderr=base.stderr * scale,
                    n_effective=base.n_effective, imag_residual=base.imag_residual * scale)


def _site_pair(ens: PathEnsemble, cp: int, name: str, i: int, j: int):
    if name not in ens.states:
        raise ConfigError("ensemble was run with store_states=False")
    return ens.states[name][cp, ~ens.failed, i, j]


def spin_correlation_values(ens: PathEnsemble, cp: int, i: int, j: int) -> np.ndarray:
    """Per-path C_spin(i,j) integrand at checkpoint cp (unweighted)."""
    eu = ens.config.params.eps_u
    if ens.representation == "w1":
        rho_ij = _site_pair(ens, cp, "rho", i, j)
        if i == j:
            return 0.5 * (1.0 + eu * rho_ij**2)
        F_ij = _site_pair(ens, cp, "F", i, j)
        rho_ii = _site_pair(ens, cp, "rho", i, i)
        rho_jj = _site_pair(ens, cp, "rho", j, j)
        return 0.5 * (F_ij**2 - rho_ij**2 + 0.5 * (1 + eu)**2 * rho_ii * rho_jj)
    if ens.representation == "w2":
        if i == j:
            rud_jj = _site_pair(ens, cp, "rho_ud", j, j)
            return 0.5 * (1.0 + eu * rud_jj**2)
        fuu = _site_pair(ens, cp, "F_uu", i, j)
        ruu = _site_pair(ens, cp, "rho_uu", i, j)
        fud = _site_pair(ens, cp, "F_ud", i, j)
        rud = _site_pair(ens, cp, "rho_ud", i, j)
        return 0.5 * (fuu**2 - ruu**2 - eu * fud**2 + eu * rud**2)
    raise ConfigError("correlation estimators need a w1 or w2 ensemble")


def pair_correlation_values(ens: PathEnsemble, cp: int, i: int, j: int) -> np.ndarray:
    """Per-path C_pair(i,j) integrand at checkpoint cp (unweighted)."""
    eu = ens.config.params.eps_u
    if ens.representation == "w1":
        if i == j:
            rho_jj = _site_pair(ens, cp, "rho", j, j)
            return 0.25 * (1.0 + rho_jj) * (1.0 - eu * rho_jj)
        masks = bipartite_masks(ens.config.lattice)
        chi = masks.chi_on[i, j] - eu * masks.chi_off[i, j]
        F_ij = _site_pair(ens, cp, "F", i, j)
        rho_ij = _site_pair(ens, cp, "rho", i, j)
        return 0.25 * chi * (F_ij + rho_ij) * (F_ij - eu * rho_ij)
    if ens.representation == "w2":
        if i == j:
            rud_jj = _site_pair(ens, cp, "rho_ud", j, j)
            return 0.25 * (1.0 - eu * rud_jj**2)
        fuu = _site_pair(ens, cp, "F_uu", i, j)
        ruu = _site_pair(ens, cp, "rho_uu", i, j)
        fud = _site_pair(ens, cp, "F_ud", i, j)
        rud = _site_pair(ens, cp, "rho_ud", i, j)
        rud_ii = _site_pair(ens, cp, "rho_ud", i, i)
        rud_jj = _site_pair(ens, cp, "rho_ud", j, j)
        return 0.25 * (fuu**2 + ruu**2 - 0.5 * (1 + eu) * (fud**2 + rud**2)
                       + 0.5 * (1 - eu) * rud_ii * rud_jj)
    raise ConfigError("correlation estimators need a w1 or w2 ensemble")


def spin_correlation(ens: PathEnsemble, i: int, j: int,
                     beta: float | None = None) -> Estimate:
    """C_spin(i,j) estimator in the ensemble's representation."""
    cp = ens.checkpoint_index(beta if beta is not None else ens.cp_betas[-1])
    _, w = _weights(ens, cp)
    return weighted_ratio_estimate(spin_correlation_values(ens, cp, i, j), w)


def pair_correlation(ens: PathEnsemble, i: int, j: int,
                     beta: float | None = None) -> Estimate:
    """C_pair(i,j) estimator in the ensemble's representation."""
    cp = ens.checkpoint_index(beta if beta is not None else ens.cp_betas[-1])
    _, w = _weights(ens, cp)
    return weighted_ratio_estimate(pair_correlation_values(ens, cp, i, j), w)


def correlation_scan(cfg: EnsembleConfig, pairs, segment_size: int = 100_000):
    """Correlation estimates over many paths without keeping all states.

    Runs the ensemble in path segments, keeping only per-path integrand
    values and actions; the jackknife still runs over every path.  Returns
    ({"spin": {(i, j, beta): Estimate}, "pair": {...}}, n_failed).
    """
    n_cp = len(cfg.resolved_checkpoints())
    vals: dict = {"spin": {}, "pair": {}}
    actions = [[] for _ in range(n_cp)]
    n_failed = 0
    done = 0
    while done < cfg.n_paths:
        m = min(segment_size, cfg.n_paths - done)
        seg = EnsembleConfig(**{**cfg.__dict__, "n_paths": m, "path_offset": done,
                                "store_states": True})
        ens = run_paths(seg)
        n_failed += ens.n_failed
        for cp in range(n_cp):
            actions[cp].append(ens.S[cp, ~ens.failed])
            for (i, j) in pairs:
                vals["spin"].setdefault((i, j, cp), []).append(
                    spin_correlation_values(ens, cp, i, j))
                vals["pair"].setdefault((i, j, cp), []).append(
                    pair_correlation_values(ens, cp, i, j))
        done += m
    cp_betas = np.array(cfg.resolved_checkpoints())
    out: dict = {"spin": {}, "pair": {}}
    for cp in range(n_cp):
        S = np.concatenate(actions[cp])
        w = np.exp(-(S - S.min()))
        for kind in ("spin", "pair"):
            for (i, j) in pairs:
                v = np.concatenate(vals[kind][(i, j, cp)])
                out[kind][(i, j, float(cp_betas[cp]))] = weighted_ratio_estimate(v, w)
    return out, n_failed


def density_estimate(ens: PathEnsemble, j: int, beta: float | None = None) -> Estimate:
    """<n_up> - 1/2 at site j (zero pathwise in the w2 representation)."""
    cp = ens.checkpoint_index(beta if beta is not None else ens.cp_betas[-1])
    ok, w = _weights(ens, cp)
    if ens.representation == "w1":
        vals = 0.5 * _site_pair(ens, cp, "rho", j, j)
    elif ens.representation == "w2":
        vals = 0.5 * _site_pair(ens, cp, "rho_uu", j, j)
    else:
        G = ens.states["G"][cp, ~ens.failed]
        n = ens.config.lattice.n_sites
        vals = 0.5 * G[:, j, 2 * n + j]
    return weighted_ratio_estimate(vals, w)


# ---------------------------------------------------------------------------
# Scalar toy models: the fastest end-to-end check of the drifted machinery.
# ---------------------------------------------------------------------------

def toy_exact(kind: str, mu: float, beta: float, lambdas=()) -> float:
    """Closed-form <cos(mu x)> for the two toy partition functions."""
    if kind == "cosh":
        return float(np.exp(-0.5 * mu * mu) * np.cos(mu * np.sqrt(beta)))
    lam = np.asarray(lambdas, dtype=float)
    logw = 0.5 * beta * lam * lam
    logw -= logw.max()
    w = np.exp(logw)
    return float(np.exp(-0.5 * mu * mu)
                 * np.sum(w * np.cos(mu * lam * np.sqrt(beta))) / np.sum(w))


def _toy_logz_terms(kind: str, lambdas, x: np.ndarray):
    """(Z'/Z, Z''/Z) at x, stabilized."""
    if kind == "cosh":
        t = np.tanh(x)
        return t, np.ones_like(x)
    lam = np.asarray(lambdas, dtype=float)
    z = lam[None, :] * x[:, None]
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    denom = e.sum(axis=1)
    zp = (lam[None, :] * e).sum(axis=1) / denom
    zpp = (lam[None, :] ** 2 * e).sum(axis=1) / denom
    return zp, zpp


def toy_expectation(kind: str, mu: float, beta: float, dt: float, n_paths: int,
                    seed: int, mode: str, lambdas=()) -> Estimate:
    """Estimate of <cos(mu x)> by direct sampling or the drifted SDE.

    'raw' draws a single standard normal per path and reweights by the
    partition factor; 'girsanov' integrates the drifted scalar SDE and
    needs no terminal reweighting beyond the residual exp(int Z''/Z / 2).
    """
    if kind not in ("cosh", "exponents"):
        raise ConfigError(f"unknown toy kind {kind!r}")
    if kind == "exponents" and len(lambdas) == 0:
        raise ConfigError("exponents toy needs lambdas")
    paths = np.arange(n_paths, dtype=np.uint64)
    if mode == "raw" or beta == 0.0:
        x = _rng.normal_matrix(seed, paths, 0, SLOT_PHI, 1)[:, 0]
        if beta == 0.0:
            return mean_estimate(np.cos(mu * x))
        y = np.sqrt(beta) * x
        if kind == "cosh":
            ay = np.abs(y)
            logw = ay + np.log1p(np.exp(-2.0 * ay)) - np.log(2.0)
        else:
            lam = np.asarray(lambdas, dtype=float)
            z = lam[None, :] * y[:, None]
            zmax = z.max(axis=1)
            logw = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
        w = np.exp(logw - logw.max())
        return weighted_ratio_estimate(np.cos(mu * x), w, min_n_eff=0.0)
    if mode != "girsanov":
        raise ConfigError(f"unknown toy mode {mode!r}")

    k = int(round(beta / dt))
    if abs(k * dt - beta) > 1e-9:
        raise ConfigError("beta must be a multiple of dt")
    x = np.zeros(n_paths)
    logw = np.zeros(n_paths)
    rdt = np.sqrt(dt)
    for step in range(1, k + 1):
        zp, zpp = _toy_logz_terms(kind, lambdas, x)
        logw += 0.5 * zpp * dt
        phi = _rng.normal_matrix(seed, paths, step, SLOT_PHI, 1)[:, 0]
        x = x + zp * dt + rdt * phi
    vals = np.cos(mu * x / np.sqrt(beta))
    w = np.exp(logw - logw.max())
    return weighted_ratio_estimate(vals, w)
