import csv
import json
import os

import numpy as np
import pytest

from hubbard_sde.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_RESOURCE,
                             MC_COLUMNS, RunConfig, config_hash, parse_config,
                             run_command, serialize_config)
from hubbard_sde.lattice import ConfigError


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _base(tmp_path, **sim):
    return {
        "lattice": {"L": 2, "d": 1},
        "model": {"u": 2.0},
        "sim": {"beta": 0.5, "paths": 400, "seed": 1, **sim},
        "output": {"path": str(tmp_path / "out")},
    }


def test_minimal_config_fills_defaults(tmp_path):
    rc = parse_config(_write(tmp_path, {
        "lattice": {"L": 2, "d": 2}, "model": {"u": 2.0},
        "sim": {"beta": 1.0, "paths": 100, "seed": 1}}))
    assert rc.sim["representation"] == "w1"
    assert rc.sim["dt"] == 0.01
    assert rc.lattice["boundary"] == "open"
    assert rc.hs["w1"] == 1.0 and rc.hs["w2"] == 0.0
    assert rc.hs["e1"] == 1
    rc_neg = parse_config(_write(tmp_path, {
        "lattice": {"L": 2, "d": 2}, "model": {"u": -2.0},
        "sim": {"beta": 1.0, "paths": 100, "seed": 1}}, "n.json"))
    assert rc_neg.hs["e1"] == -1


def test_config_round_trip(tmp_path):
    raw = {
        "lattice": {"L": [3, 2], "d": 2, "boundary": "open"},
        "model": {"t": -1.0, "u": 2.0},
        "sim": {"beta": 2.0, "paths": 1000, "seed": 7, "checkpoints": [1.0, 2.0]},
    }
    rc = parse_config(_write(tmp_path, raw))
    again = parse_config(_write(tmp_path, serialize_config(rc), "round.json"))
    assert serialize_config(rc) == serialize_config(again)
    assert config_hash(rc) == config_hash(again)


def test_rejects_unknown_keys_and_bad_weights(tmp_path):
    with pytest.raises(ConfigError, match="lattice.bogus"):
        parse_config(_write(tmp_path, {"lattice": {"L": 2, "d": 1, "bogus": 3}}))
    with pytest.raises(ConfigError, match="representation=w1"):
        parse_config(_write(tmp_path, {
            "lattice": {"L": 2, "d": 1}, "model": {"u": 1.0},
            "hs": {"w1": 0.5, "w2": 0.5, "w3": 0.0},
            "sim": {"beta": 1.0, "paths": 10, "seed": 1}}))
    with pytest.raises(ConfigError, match="must equal 1"):
        parse_config(_write(tmp_path, {
            "lattice": {"L": 2, "d": 1},
            "hs": {"w1": 0.5, "w2": 0.1, "w3": 0.0},
            "sim": {"representation": "full", "beta": 1, "paths": 10, "seed": 1}}))


def test_energy_csv_schema_and_reproducibility(tmp_path):
    cfg = _base(tmp_path, checkpoints=[0.25, 0.5])
    path = _write(tmp_path, cfg)
    assert run_command(["energy", "-c", path]) == EXIT_OK
    out = tmp_path / "out" / "energy.csv"
    first = out.read_bytes()
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == MC_COLUMNS
    assert {r[1] for r in rows[1:]} == {"energy_per_site", "partition_ratio"}
    assert run_command(["energy", "-c", path]) == EXIT_OK
    assert out.read_bytes() == first  # same seed, same bytes
    manifest = json.loads((tmp_path / "out" / "energy_manifest.json").read_text())
    assert manifest["config"]["sim"]["seed"] == 1
    assert manifest["outputs"] == ["energy.csv"]
    assert len(manifest["config_hash"]) == 16


def test_output_regenerates_from_manifest(tmp_path):
    cfg = _base(tmp_path, checkpoints=[0.5])
    path = _write(tmp_path, cfg)
    assert run_command(["energy", "-c", path]) == EXIT_OK
    first = (tmp_path / "out" / "energy.csv").read_bytes()
    manifest = json.loads((tmp_path / "out" / "energy_manifest.json").read_text())
    # the manifest's embedded config must reproduce the bytes on its own
    replay = dict(manifest["config"])
    replay["output"] = {**replay["output"], "path": str(tmp_path / "replay")}
    replay_path = _write(tmp_path, replay, "replay.json")
    assert run_command(["energy", "-c", replay_path]) == EXIT_OK
    assert (tmp_path / "replay" / "energy.csv").read_bytes() == first


def test_correlations_csv(tmp_path):
    cfg = _base(tmp_path)
    cfg["lattice"] = {"L": 2, "d": 2}
    path = _write(tmp_path, cfg)
    assert run_command(["correlations", "-c", path]) == EXIT_OK
    with open(tmp_path / "out" / "correlations.csv") as fh:
        rows = list(csv.reader(fh))
    names = {r[1] for r in rows[1:]}
    # three non-reference sites, spin and pair each
    assert len(names) == 6
    assert any(name.startswith("cspin_") for name in names)


def test_ed_csv(tmp_path):
    cfg = _base(tmp_path, checkpoints=[0.25, 0.5])
    cfg["ed"] = {"pair": [0, 1]}
    path = _write(tmp_path, cfg)
    assert run_command(["ed", "-c", path]) == EXIT_OK
    with open(tmp_path / "out" / "ed.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["beta", "energy_per_site", "cspin", "cpair"]
    assert len(rows) == 3
    assert float(rows[1][0]) == 0.25


def test_toy_mode_override(tmp_path):
    cfg = _base(tmp_path)
    cfg["toy"] = {"betas": [1.0], "paths": 500}
    path = _write(tmp_path, cfg)
    assert run_command(["toy", "-c", path, "--mode", "raw"]) == EXIT_OK
    with open(tmp_path / "out" / "toy.csv") as fh:
        rows = list(csv.reader(fh))
    assert {r[1] for r in rows[1:]} == {"toy_raw", "toy_exact"}


def test_zerotemp_csv(tmp_path):
    cfg = _base(tmp_path)
    cfg["lattice"] = {"L": 2, "d": 2}
    cfg["zerotemp"] = {"amp_start": 0.0, "amp_stop": 0.2, "amp_step": 0.1,
                       "horizon": 1.0, "dt": 0.02}
    path = _write(tmp_path, cfg)
    assert run_command(["zerotemp", "-c", path]) == EXIT_OK
    with open(tmp_path / "out" / "zerotemp.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["row_kind", "amplitude", "v0_per_site", "energy_per_site"]
    assert rows[-1][0] == "summary"
    assert len(rows) == 5  # header + 3 grid + summary


def test_pfqmc_subcommand(tmp_path):
    cfg = _base(tmp_path, paths=200)
    path = _write(tmp_path, cfg)
    assert run_command(["pfqmc", "-c", path]) == EXIT_OK
    with open(tmp_path / "out" / "pfqmc.csv") as fh:
        rows = list(csv.reader(fh))
    assert {r[1] for r in rows[1:]} == {"energy_per_site", "weight_phase_fraction"}


def test_validate_subcommand(tmp_path):
    for rep in ("w1", "w2", "full"):
        cfg = _base(tmp_path, representation=rep, paths=10)
        path = _write(tmp_path, cfg, f"v_{rep}.json")
        assert run_command(["validate", "-c", path]) == EXIT_OK
    with open(tmp_path / "out" / "validate.csv") as fh:
        rows = list(csv.reader(fh))
    assert all(r[-1] == "pass" for r in rows[1:])


def test_exit_codes(tmp_path):
    # config error
    bad = _write(tmp_path, {"lattice": {"L": 2, "d": 5}}, "bad.json")
    assert run_command(["energy", "-c", bad]) == EXIT_CONFIG
    # malformed json
    broken = tmp_path / "broken.json"
    broken.write_text("{nope")
    assert run_command(["energy", "-c", str(broken)]) == EXIT_CONFIG
    # resource guard: Fock dimension too large for the ed oracle
    guard = _base(tmp_path)
    guard["lattice"] = {"L": 4, "d": 2}
    assert run_command(["ed", "-c", _write(tmp_path, guard, "g.json")]) == EXIT_RESOURCE
    # numerical failure: everything blows up at an absurd dt
    blow = _base(tmp_path, dt=5.0, beta=40.0, paths=32)
    blow["model"] = {"u": 100.0}
    assert run_command(["energy", "-c", _write(tmp_path, blow, "b.json")]) == EXIT_NUMERICAL


def test_output_format_json(tmp_path):
    cfg = _base(tmp_path)
    cfg["output"]["format"] = "json"
    path = _write(tmp_path, cfg)
    assert run_command(["energy", "-c", path]) == EXIT_OK
    payload = json.loads((tmp_path / "out" / "energy.json").read_text())
    assert payload["columns"] == MC_COLUMNS
    assert len(payload["rows"]) == 2


def test_eps_file_override(tmp_path):
    eps = np.array([[0.0, -0.5], [-0.5, 0.0]])
    eps_path = tmp_path / "eps.txt"
    np.savetxt(eps_path, eps)
    cfg = _base(tmp_path)
    cfg["model"]["eps_file"] = str(eps_path)
    rc = parse_config(_write(tmp_path, cfg))
    params = rc.model_params(rc.lattice_spec())
    assert np.allclose(params.eps, eps)
