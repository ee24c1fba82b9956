"""Config parsing, subcommand dispatch, structured outputs and manifests.

Config files are JSON with the sections lattice/model/hs/sim/output plus
per-subcommand sections (toy, zerotemp, correlations, ed).  Unknown keys
are rejected, defaults are filled in, and every output CSV comes with a
JSON manifest (full config, seed, versions, wall time, config hash) that
suffices to regenerate it byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .estimators import DegenerateWeights
from .girsanov import HsScheme, NumericalFailure, sign_u
from .lattice import (ConfigError, LatticeSpec, ModelParams, ResourceGuard,
                      build_lattice, hopping_matrix)
from .observables import (EnsembleConfig, correlation_scan, girsanov_energy,
                          partition_ratio, run_paths, toy_exact, toy_expectation)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESOURCE = 4

SCHEMA_VERSION = "1"
MC_COLUMNS = ["beta", "observable", "value", "stderr", "n_paths", "n_failed"]
ED_COLUMNS = ["beta", "energy_per_site", "cspin", "cpair"]
ZEROTEMP_COLUMNS = ["row_kind", "amplitude", "v0_per_site", "energy_per_site"]
MAX_PATHS = 20_000_000

_DEFAULTS = {
    "lattice": {"L": 2, "d": 2, "boundary": "open"},
    "model": {"t": -1.0, "mu": 0.0, "r": 0.0, "s": 0.0, "u": 0.0, "eps_file": None},
    "hs": {"w1": None, "w2": None, "w3": None, "e1": None, "e2": None, "e3": None},
    "sim": {"dt": 0.01, "beta": 1.0, "paths": 100, "seed": 1,
            "representation": "w1", "checkpoints": None},
    "output": {"path": "out", "format": "csv"},
    "toy": {"kind": "cosh", "mu": 2.0, "lambdas": [], "betas": [1.0],
            "paths": 10000, "steps_per_beta": 2000, "mode": "girsanov", "seed": 1},
    "zerotemp": {"kind": "staggered", "amp_start": 0.0, "amp_stop": 1.0,
                 "amp_step": 0.01, "horizon": 20.0, "dt": 0.01,
                 "representation": "w1"},
    "correlations": {"ref_site": 0},
    "ed": {"pair": None},
}


@dataclass
class RunConfig:
    """Validated run configuration (per-section dicts, defaults applied)."""

    lattice: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    hs: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    toy: dict = field(default_factory=dict)
    zerotemp: dict = field(default_factory=dict)
    correlations: dict = field(default_factory=dict)
    ed: dict = field(default_factory=dict)

    def lattice_spec(self) -> LatticeSpec:
        la = self.lattice
        return build_lattice(la["L"], la["d"], la["boundary"])

    def model_params(self, spec: LatticeSpec) -> ModelParams:
        mo = self.model
        if mo.get("eps_file"):
            eps = np.loadtxt(mo["eps_file"]) if not str(mo["eps_file"]).endswith(".npy") \
                else np.load(mo["eps_file"])
            if eps.shape != (spec.n_sites, spec.n_sites):
                raise ConfigError(f"model.eps_file shape {eps.shape} != lattice size")
        else:
            eps = hopping_matrix(spec, mo["t"])
        return ModelParams(eps=eps, mu=mo["mu"], r=mo["r"], s=mo["s"], u=mo["u"])

    def scheme(self) -> HsScheme:
        h = self.hs
        return HsScheme(h["w1"], h["w2"], h["w3"], e1=h["e1"], e2=h["e2"], e3=h["e3"])

    def ensemble_config(self, store_states: bool = False) -> EnsembleConfig:
        spec = self.lattice_spec()
        params = self.model_params(spec)
        sim = self.sim
        cps = tuple(sim["checkpoints"]) if sim["checkpoints"] else ()
        return EnsembleConfig(
            lattice=spec, params=params, scheme=self.scheme(),
            representation=sim["representation"], beta=sim["beta"], dt=sim["dt"],
            n_paths=sim["paths"], seed=sim["seed"], checkpoints=cps,
            store_states=store_states)


def _merge_section(name: str, user: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for key, val in user.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {name}.{key}")
        out[key] = val
    return out


def _validated(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    sections = {}
    for name in raw:
        if name not in _DEFAULTS:
            raise ConfigError(f"unknown section {name!r}")
    for name, defaults in _DEFAULTS.items():
        user = raw.get(name, {})
        if not isinstance(user, dict):
            raise ConfigError(f"section {name!r} must be an object")
        sections[name] = _merge_section(name, user, defaults)
    rc = RunConfig(**sections)

    sim, hs, model = rc.sim, rc.hs, rc.model
    rep = sim["representation"]
    if rep not in ("full", "w1", "w2"):
        raise ConfigError("sim.representation must be full, w1 or w2")
    if not (isinstance(sim["dt"], (int, float)) and sim["dt"] > 0):
        raise ConfigError("sim.dt must be > 0")
    if sim["beta"] < 0:
        raise ConfigError("sim.beta must be >= 0")
    if not (isinstance(sim["paths"], int) and sim["paths"] >= 1):
        raise ConfigError("sim.paths must be a positive integer")
    if sim["paths"] > MAX_PATHS:
        raise ResourceGuard(f"sim.paths exceeds guard {MAX_PATHS}")

    su = sign_u(model["u"])
    default_w = {"w1": (1.0, 0.0, 0.0), "w2": (0.0, 1.0, 0.0),
                 "full": (1.0, 0.0, 0.0)}[rep]
    for i, key in enumerate(("w1", "w2", "w3")):
        if hs[key] is None:
            hs[key] = default_w[i]
    for key in ("e1", "e2", "e3"):
        if hs[key] is None:
            hs[key] = su
        if hs[key] not in (-1, 1):
            raise ConfigError(f"hs.{key} must be -1 or +1")
    if abs(hs["w1"] + hs["w2"] + hs["w3"] - 1.0) > 1e-12:
        raise ConfigError("hs.w1 + hs.w2 + hs.w3 must equal 1")
    if rep == "w1" and (hs["w1"], hs["w2"], hs["w3"]) != (1.0, 0.0, 0.0):
        raise ConfigError("sim.representation=w1 requires hs.w1=1, hs.w2=hs.w3=0")
    if rep == "w2" and (hs["w1"], hs["w2"], hs["w3"]) != (0.0, 1.0, 0.0):
        raise ConfigError("sim.representation=w2 requires hs.w2=1, hs.w1=hs.w3=0")
    if rc.output["format"] not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    return rc


def parse_config(path: str) -> RunConfig:
    """Load, default-fill and validate a JSON config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON config: {exc}") from exc
    return _validated(raw)


def serialize_config(rc: RunConfig) -> dict:
    return {name: dict(getattr(rc, name)) for name in _DEFAULTS}


def config_hash(rc: RunConfig) -> str:
    blob = json.dumps(serialize_config(rc), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_rows(rc: RunConfig, name: str, columns, rows) -> str:
    outdir = rc.output["path"]
    os.makedirs(outdir, exist_ok=True)
    if rc.output["format"] == "json":
        path = os.path.join(outdir, f"{name}.json")
        payload = [{c: (None if v is None else (_fmt(v) if isinstance(v, float) else v))
                    for c, v in zip(columns, row)} for row in rows]
        with open(path, "w") as fh:
            json.dump({"schema": SCHEMA_VERSION, "columns": columns, "rows": payload},
                      fh, indent=1)
        return path
    path = os.path.join(outdir, f"{name}.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def _write_manifest(rc: RunConfig, name: str, outputs, t0: float, extra=None) -> str:
    outdir = rc.output["path"]
    manifest = {
        "subcommand": name,
        "schema_version": SCHEMA_VERSION,
        "config": serialize_config(rc),
        "config_hash": config_hash(rc),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, f"{name}_manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return path


def _cmd_energy(rc: RunConfig) -> int:
    t0 = time.time()
    cfg = rc.ensemble_config(store_states=False)
    ens = run_paths(cfg)
    n = cfg.lattice.n_sites
    rows = []
    for b in ens.cp_betas:
        e = girsanov_energy(ens, b)
        rows.append([b, "energy_per_site", e.value / n, e.stderr / n,
                     ens.n_paths, ens.n_failed])
        z = partition_ratio(ens, b)
        rows.append([b, "partition_ratio", z.value, z.stderr,
                     ens.n_paths, ens.n_failed])
    out = _write_rows(rc, "energy", MC_COLUMNS, rows)
    _write_manifest(rc, "energy", [out], t0)
    return EXIT_OK


def _site_label(spec: LatticeSpec, j: int) -> str:
    return "_".join(str(c) for c in spec.site_coords(j))


def _cmd_correlations(rc: RunConfig) -> int:
    t0 = time.time()
    cfg = rc.ensemble_config(store_states=True)
    spec = cfg.lattice
    ref = int(rc.correlations["ref_site"])
    pairs = [(ref, j) for j in range(spec.n_sites) if j != ref]
    scan, n_failed = correlation_scan(cfg, pairs)
    rows = []
    for b in cfg.resolved_checkpoints():
        for (i, j) in pairs:
            cs = scan["spin"][(i, j, float(b))]
            cp = scan["pair"][(i, j, float(b))]
            label = _site_label(spec, j)
            rows.append([b, f"cspin_{label}", cs.value, cs.stderr,
                         cfg.n_paths, n_failed])
            rows.append([b, f"cpair_{label}", cp.value, cp.stderr,
                         cfg.n_paths, n_failed])
    out = _write_rows(rc, "correlations", MC_COLUMNS, rows)
    _write_manifest(rc, "correlations", [out], t0,
                    extra={"ref_site": ref, "ref_coords": list(spec.site_coords(ref))})
    return EXIT_OK


def _cmd_pfqmc(rc: RunConfig) -> int:
    from .pfqmc import untransformed_estimate
    t0 = time.time()
    spec = rc.lattice_spec()
    params = rc.model_params(spec)
    scheme = rc.scheme()
    sim = rc.sim
    betas = sim["checkpoints"] or [sim["beta"]]
    rows = []
    for b in betas:
        est, frac = untransformed_estimate(params, scheme, float(b), sim["dt"],
                                           sim["paths"], sim["seed"])
        n = spec.n_sites
        rows.append([b, "energy_per_site", est.value / n, est.stderr / n,
                     sim["paths"], 0])
        rows.append([b, "weight_phase_fraction", frac, 0.0, sim["paths"], 0])
    out = _write_rows(rc, "pfqmc", MC_COLUMNS, rows)
    _write_manifest(rc, "pfqmc", [out], t0)
    return EXIT_OK


def _cmd_ed(rc: RunConfig) -> int:
    from .ed import build_fock_hamiltonian, ed_correlations, ed_expectation
    t0 = time.time()
    spec = rc.lattice_spec()
    params = rc.model_params(spec)
    H = build_fock_hamiltonian(spec, params)
    betas = rc.sim["checkpoints"] or [rc.sim["beta"]]
    pair = rc.ed["pair"]
    rows = []
    for b in betas:
        row = [b, ed_expectation(H, float(b)) / spec.n_sites]
        if pair is not None:
            cs, cp = ed_correlations(H, float(b), int(pair[0]), int(pair[1]))
            row += [cs, cp]
        else:
            row += [None, None]
        rows.append(row)
    out = _write_rows(rc, "ed", ED_COLUMNS, rows)
    _write_manifest(rc, "ed", [out], t0)
    return EXIT_OK


def _cmd_toy(rc: RunConfig, mode_override: str | None = None) -> int:
    t0 = time.time()
    toy = dict(rc.toy)
    if mode_override:
        toy["mode"] = mode_override
    if toy["mode"] not in ("raw", "girsanov"):
        raise ConfigError("toy.mode must be raw or girsanov")
    rows = []
    for b in toy["betas"]:
        b = float(b)
        dt = b / toy["steps_per_beta"] if b > 0 else 1.0
        est = toy_expectation(toy["kind"], toy["mu"], b, dt, toy["paths"],
                              toy["seed"], toy["mode"], lambdas=toy["lambdas"])
        rows.append([b, f"toy_{toy['mode']}", est.value, est.stderr, toy["paths"], 0])
        rows.append([b, "toy_exact",
                     toy_exact(toy["kind"], toy["mu"], b, toy["lambdas"]),
                     0.0, 0, 0])
    out = _write_rows(rc, "toy", MC_COLUMNS, rows)
    _write_manifest(rc, "toy", [out], t0, extra={"mode": toy["mode"]})
    return EXIT_OK


def _cmd_zerotemp(rc: RunConfig) -> int:
    from .zerotemp import minimize_scalar_ansatz
    t0 = time.time()
    zt = rc.zerotemp
    spec = rc.lattice_spec()
    params = rc.model_params(spec)
    n_amp = int(round((zt["amp_stop"] - zt["amp_start"]) / zt["amp_step"])) + 1
    grid = [zt["amp_start"] + i * zt["amp_step"] for i in range(n_amp)]
    res = minimize_scalar_ansatz(spec, params, grid, zt["kind"], T=zt["horizon"],
                                 dt=zt["dt"], representation=zt["representation"])
    rows = [["grid", a, v, None] for a, v in zip(res.amplitudes, res.v0_per_site)]
    rows.append(["summary", res.argmin_amplitude, None, res.energy_per_site])
    out = _write_rows(rc, "zerotemp", ZEROTEMP_COLUMNS, rows)
    _write_manifest(rc, "zerotemp", [out], t0)
    return EXIT_OK


def run_validation(rc: RunConfig, n_paths: int = 3, n_steps: int = 50):
    """Pathwise invariant suite for the configured representation.

    Returns a list of (name, max_violation, threshold, passed).
    """
    from .lattice import bipartite_masks
    from .noise import StreamKey, draw_noise
    from .reduced import (ReducedState2N, check_symmetries, expand_w1,
                          expand_w2, sde_step_2N, sde_step_w1, sde_step_w2)
    from .reduced import ReducedStateW1, ReducedStateW2
    from .girsanov import (assemble_DG, assemble_dB, build_site_generators)

    spec = rc.lattice_spec()
    params = rc.model_params(spec)
    scheme = rc.scheme()
    sim = rc.sim
    rep = sim["representation"]
    dt = sim["dt"]
    n = spec.n_sites
    masks = bipartite_masks(spec) if spec.is_bipartite else None
    worst: dict = {}

    def track(report: dict, prefix: str) -> None:
        for key, val in report.items():
            name = f"{prefix}.{key}"
            worst[name] = max(worst.get(name, 0.0), val)

    if rep in ("w1", "w2"):
        for p in range(n_paths):
            st2 = ReducedState2N.initial(n)
            red = ReducedStateW1.initial(n) if rep == "w1" else ReducedStateW2.initial(n)
            for step in range(1, n_steps + 1):
                draw = draw_noise(StreamKey(sim["seed"], p, step), n, dt)
                st2 = sde_step_2N(st2, draw, params, scheme, dt)
                if rep == "w1":
                    red = sde_step_w1(red, draw, params, dt)
                    exp = expand_w1(red, params.eps_u, masks)
                else:
                    red = sde_step_w2(red, draw, params, dt)
                    exp = expand_w2(red, params.eps_u)
                track(check_symmetries(st2, "thm31"), "thm31")
                if rep == "w1":
                    track(check_symmetries(st2, "thm32a"), "thm32a")
                    track(check_symmetries(st2, "thm42a", masks=masks,
                                           eps_u=params.eps_u), "thm42a")
                else:
                    track(check_symmetries(st2, "thm32b"), "thm32b")
                    track(check_symmetries(st2, "thm41", masks=masks), "thm41")
                    track(check_symmetries(st2, "thm42b", eps_u=params.eps_u), "thm42b")
                    track({"constant_density": float(np.max(np.abs(
                        np.diagonal(red.rho_uu))))}, "thm41")
                diff = max(np.max(np.abs(exp.rho - st2.rho)),
                           np.max(np.abs(exp.Fa - st2.Fa)),
                           np.max(np.abs(exp.Fb - st2.Fb)))
                track({"reduced_vs_2N": float(diff)}, "embed")
    else:
        rng = np.random.default_rng(sim["seed"])
        for _ in range(20):
            A = rng.normal(size=(4 * n, 4 * n)) + 1j * rng.normal(size=(4 * n, 4 * n))
            G = A - A.T
            DG = assemble_DG(G)
            combo = np.zeros_like(G)
            trace_part = np.zeros_like(G)
            for j in range(n):
                for M in build_site_generators(j, scheme, n):
                    combo += M @ G @ M
                    trace_part += 0.5 * M * np.trace(G @ M)
            track({"dg_identity": float(np.max(np.abs(DG - (combo - trace_part))))},
                  "thm54")
            lhs = np.trace(G @ DG)
            au, ad, bu, bd = (np.arange(n), n + np.arange(n),
                              2 * n + np.arange(n), 3 * n + np.arange(n))
            rhs = 4.0 * np.sum(G[au, bu] * G[ad, bd] - G[au, bd] * G[ad, bu]
                               - G[au, ad] * G[bu, bd])
            track({"v_form": float(abs(lhs - rhs))}, "thm55")
        for step in range(1, 4):
            draw = draw_noise(StreamKey(sim["seed"], 0, step), n, dt)
            dB = assemble_dB(draw, scheme)
            rebuilt = np.zeros_like(dB)
            rt = np.sqrt(dt)
            for j in range(n):
                D, E, F = build_site_generators(j, scheme, n)
                rebuilt = rebuilt + (D * draw.phi[j] + E * draw.xi[j]
                                     + F * draw.theta[j]) * rt
            track({"dB_decomposition": float(np.max(np.abs(dB - rebuilt)))}, "noise")

    threshold = 1e-8
    return [(name, val, threshold, val < threshold)
            for name, val in sorted(worst.items())]


def _cmd_validate(rc: RunConfig) -> int:
    t0 = time.time()
    results = run_validation(rc)
    rows = [[name, _fmt(val), _fmt(thr), "pass" if ok else "FAIL"]
            for name, val, thr, ok in results]
    width = max(len(r[0]) for r in rows)
    for name, val, thr, verdict in rows:
        print(f"{name:<{width}}  {val:>12}  (< {thr})  {verdict}")
    out = _write_rows(rc, "validate", ["identity", "max_violation", "threshold", "verdict"],
                      rows)
    _write_manifest(rc, "validate", [out], t0)
    return EXIT_OK if all(ok for *_, ok in results) else EXIT_NUMERICAL


_COMMANDS = {
    "energy": _cmd_energy,
    "correlations": _cmd_correlations,
    "pfqmc": _cmd_pfqmc,
    "ed": _cmd_ed,
    "toy": _cmd_toy,
    "zerotemp": _cmd_zerotemp,
    "validate": _cmd_validate,
}


def run_command(argv=None) -> int:
    """Dispatch a subcommand; returns the process exit code."""
    parser = argparse.ArgumentParser(prog="hubbard-sde")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", required=True)
        p.add_argument("-o", "--output", default=None)
        if name == "toy":
            p.add_argument("--mode", choices=("raw", "girsanov"), default=None)
    args = parser.parse_args(argv)

    workers = os.environ.get("HUBBARD_SDE_WORKERS")
    if workers:
        try:
            import numba
            numba.set_num_threads(max(1, int(workers)))
        except (ImportError, ValueError):
            pass

    try:
        rc = parse_config(args.config)
        if args.output:
            rc.output["path"] = args.output
        if args.command == "toy":
            return _cmd_toy(rc, mode_override=args.mode)
        return _COMMANDS[args.command](rc)
    except ResourceGuard as exc:
        print(json.dumps({"error": "resource_guard", "detail": str(exc)}),
              file=sys.stderr)
        return EXIT_RESOURCE
    except ConfigError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DegenerateWeights, FloatingPointError) as exc:
        print(json.dumps({"error": "numerical", "detail": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> None:
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
