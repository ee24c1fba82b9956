import numpy as np
import pytest

from hubbard_sde.lattice import ConfigError, ModelParams, build_lattice, hopping_matrix
from hubbard_sde.zerotemp import (FieldAnsatz, V0Result, minimize_scalar_ansatz,
                                  ode_trajectory_w1, ode_trajectory_w2, v0_functional)


def _setup(L=4, u=6.0, boundary="periodic"):
    spec = build_lattice(L, 2, boundary)
    return spec, ModelParams(eps=hopping_matrix(spec, -1.0), u=u)


def test_field_realizations():
    spec = build_lattice(2, 2, "open")
    stag = FieldAnsatz("staggered", 0.5).realization(spec)
    assert sorted(stag) == [-0.5, -0.5, 0.5, 0.5]
    assert stag[spec.site_index((1, 1))] == 0.5  # even coordinate sum
    uni = FieldAnsatz("uniform", 0.3).realization(spec)
    assert np.all(uni == 0.3)
    odd = build_lattice(3, 2, "periodic")
    with pytest.raises(ConfigError):
        FieldAnsatz("staggered", 0.1).realization(odd)
    with pytest.raises(ConfigError):
        FieldAnsatz("spiral", 0.1).realization(spec)


def test_zero_field_matches_noninteracting():
    spec, params = _setup(u=6.0)
    _, w_u, _ = ode_trajectory_w1(FieldAnsatz("staggered", 0.0), spec, params,
                                  3.0, 0.01, 50)
    _, w_0, _ = ode_trajectory_w1(FieldAnsatz("staggered", 0.0), spec,
                                  ModelParams(eps=params.eps, u=0.0), 3.0, 0.01, 50)
    assert np.max(np.abs(w_u - w_0)) < 1e-12
    _, w2_u, _ = ode_trajectory_w2(FieldAnsatz("staggered", 0.0), spec, params,
                                   3.0, 0.01, 50)
    assert np.max(np.abs(w2_u - w_0)) < 1e-12


def test_energy_is_even_in_field():
    spec, params = _setup()
    for rep, traj in (("w1", ode_trajectory_w1), ("w2", ode_trajectory_w2)):
        _, wp, _ = traj(FieldAnsatz("staggered", 0.4), spec, params, 2.0, 0.01, 20)
        _, wm, _ = traj(FieldAnsatz("staggered", -0.4), spec, params, 2.0, 0.01, 20)
        assert np.max(np.abs(wp - wm)) == 0.0
    vp = v0_functional(FieldAnsatz("staggered", 0.4), spec, params, 2.0, 0.01)
    vm = v0_functional(FieldAnsatz("staggered", -0.4), spec, params, 2.0, 0.01)
    assert vp == vm


def test_w2_flow_keeps_half_filling_sparsity():
    # the constant field enters exactly like the noise, so the half-filling
    # on/off sparsity holds along the deterministic flow too
    from hubbard_sde.lattice import bipartite_masks
    spec, params = _setup(L=4, u=6.0)
    masks = bipartite_masks(spec)
    _, _, (ruu, rud, fuu, fud) = ode_trajectory_w2(
        FieldAnsatz("staggered", 0.4), spec, params, 3.0, 0.01, 100)
    assert np.max(np.abs(masks.chi_on * ruu)) < 1e-10
    assert np.max(np.abs(masks.chi_off * rud)) < 1e-10
    assert np.max(np.abs(masks.chi_off * fuu)) < 1e-10
    assert np.max(np.abs(masks.chi_on * fud)) < 1e-10
    assert np.max(np.abs(np.diagonal(ruu))) < 1e-10


def test_trajectories_deterministic():
    spec, params = _setup()
    t1, w1_, (r1, f1) = ode_trajectory_w1(FieldAnsatz("staggered", 0.3), spec,
                                          params, 2.0, 0.01)
    t2, w2_, (r2, f2) = ode_trajectory_w1(FieldAnsatz("staggered", 0.3), spec,
                                          params, 2.0, 0.01)
    assert np.array_equal(w1_, w2_)
    assert np.array_equal(r1, r2)


def test_single_site_scalar_ode_richardson():
    # eps = 0, uniform field: the w1 flow is a scalar Riccati equation;
    # dt-halving gives first-order Richardson convergence to a fine reference
    spec = build_lattice(1, 1, "open")
    params = ModelParams(eps=np.zeros((1, 1)), u=3.0)
    field = FieldAnsatz("uniform", 0.7)
    ref = ode_trajectory_w1(field, spec, params, 2.0, 1e-5, 10**9)[1][-1]
    errs = [abs(ode_trajectory_w1(field, spec, params, 2.0, dt, 10**9)[1][-1] - ref)
            for dt in (0.02, 0.01, 0.005)]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.25)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.3)


def test_v0_dt_halving_first_order():
    spec, params = _setup(L=2)
    field = FieldAnsatz("staggered", 0.5)
    v = [v0_functional(field, spec, params, 4.0, dt) for dt in (0.04, 0.02, 0.01)]
    r = (v[0] - v[1]) / (v[1] - v[2])
    assert r == pytest.approx(2.0, rel=0.2)


def test_minimize_scalar_ansatz_grid_only():
    spec, params = _setup(L=2, u=0.5)
    res = minimize_scalar_ansatz(spec, params, [0.0], "staggered", T=2.0, dt=0.02)
    assert isinstance(res, V0Result)
    assert res.argmin_amplitude == 0.0
    # u -> 0: minimum sits at zero field and the energy approaches the
    # noninteracting ground energy per site
    spec4, params4 = _setup(L=4, u=1e-8)
    res4 = minimize_scalar_ansatz(spec4, params4, [0.0, 0.05, 0.1], "staggered",
                                  T=30.0, dt=0.02)
    assert res4.argmin_amplitude == 0.0
    lam = np.linalg.eigvalsh(params4.eps)
    e0 = 2.0 * lam[lam < 0].sum() / spec4.n_sites
    assert abs(res4.energy_per_site - e0) < 0.02


def test_w1_and_w2_staggered_energies_close():
    # the two representations' deterministic flows give nearly equal energies
    spec, params = _setup(L=4, u=6.0)
    field = FieldAnsatz("staggered", 0.4)
    _, w1_, _ = ode_trajectory_w1(field, spec, params, 10.0, 0.01,
                                  record_every=1000)
    _, w2_, _ = ode_trajectory_w2(field, spec, params, 10.0, 0.01,
                                  record_every=1000)
    assert abs(w1_[-1] - w2_[-1]) / abs(w1_[-1]) < 0.01


def test_negative_u_uniform_matches_positive_u_staggered():
    spec, params_pos = _setup(L=4, u=6.0)
    params_neg = ModelParams(eps=params_pos.eps, u=-6.0)
    grid = np.arange(0.0, 0.61, 0.05)
    res_pos = minimize_scalar_ansatz(spec, params_pos, grid, "staggered",
                                     T=15.0, dt=0.01, representation="w1")
    res_neg = minimize_scalar_ansatz(spec, params_neg, grid, "uniform",
                                     T=15.0, dt=0.01, representation="w2")
    assert res_pos.argmin_amplitude == res_neg.argmin_amplitude
    assert abs(res_pos.energy_per_site - res_neg.energy_per_site) < 1e-3
