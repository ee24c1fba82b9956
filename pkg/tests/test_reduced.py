import numpy as np
import pytest

from hubbard_sde.girsanov import HsScheme, assemble_h0, energy_W, sde_step_full
from hubbard_sde.lattice import (ConfigError, ModelParams, bipartite_masks,
                                 build_lattice, hopping_matrix)
from hubbard_sde.noise import NoiseDraw, StreamKey, draw_noise
from hubbard_sde.reduced import (ReducedState2N, ReducedStateW1, ReducedStateW2,
                                 check_symmetries, embed_2N, energy_2N, energy_w1,
                                 energy_w2, expand_w1, expand_w2, extract_2N,
                                 sde_step_2N, sde_step_w1, sde_step_w2)
from tests.conftest import random_skew


def _lattice(L=2):
    spec = build_lattice(L, 2, "open")
    return spec, hopping_matrix(spec, -1.0)


def _random_2N_state(rng, n, scale=0.1):
    return ReducedState2N(rho=scale * rng.normal(size=(2 * n, 2 * n)),
                          Fa=random_skew(rng, 2 * n, scale=scale),
                          Fb=random_skew(rng, 2 * n, scale=scale))


@pytest.mark.parametrize("u", [2.0, -2.0])
def test_2N_matches_full_step_from_random_state(rng, u):
    spec, eps = _lattice()
    params = ModelParams(eps=eps, mu=0.3, r=0.2, s=0.1, u=u)
    sgn = 1 if u >= 0 else -1
    scheme = HsScheme(0.6, 0.4, 0.0, e1=sgn, e2=sgn, e3=sgn)
    st = _random_2N_state(rng, 4)
    draw = draw_noise(StreamKey(7, 0, 1), 4, 0.01)
    stepped = sde_step_2N(st, draw, params, scheme, 0.01)
    full = sde_step_full(embed_2N(st), assemble_h0(params), scheme, draw, 0.01, u)
    back = extract_2N(full)
    for a, b in ((stepped.rho, back.rho), (stepped.Fa, back.Fa), (stepped.Fb, back.Fb)):
        assert np.max(np.abs(a - b)) < 1e-10
    # the embedded image stays exactly in the reduced (real) structure
    assert np.max(np.abs(full.G - embed_2N(back).G)) < 1e-12
    assert abs(energy_2N(st, params) - energy_W(embed_2N(st), params)) < 1e-12


def test_2N_zero_state_drift():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, mu=0.2, r=0.1, s=0.3, u=0.0)
    scheme = HsScheme(0.5, 0.5, 0.0)
    st = sde_step_2N(ReducedState2N.initial(4), NoiseDraw.zeros(4, 0.01),
                     params, scheme, 0.01)
    n = 4
    em = eps - 0.2 * np.eye(n)
    dh = -0.01 * np.block([[em, (0.3 - 0.1) * np.eye(n)],
                           [(0.3 + 0.1) * np.eye(n), em]])
    assert np.max(np.abs(st.rho - 0.5 * dh)) < 1e-14
    assert np.max(np.abs(st.Fa)) == 0.0
    assert np.max(np.abs(st.Fb)) == 0.0


def test_2N_preconditions():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=2.0)
    with pytest.raises(ConfigError):
        sde_step_2N(ReducedState2N.initial(4), NoiseDraw.zeros(4, 0.01), params,
                    HsScheme(0.5, 0.0, 0.5), 0.01)
    with pytest.raises(ConfigError):
        sde_step_2N(ReducedState2N.initial(4), NoiseDraw.zeros(4, 0.01), params,
                    HsScheme(1.0, 0.0, 0.0, e1=-1, e2=-1, e3=-1), 0.01)


def test_thm32a_relations_preserved():
    # w1 scheme, r=0, s nonzero: Fb stays equal to Fa and rho stays symmetric
    spec, eps = _lattice()
    params = ModelParams(eps=eps, mu=0.1, s=0.2, u=2.0)
    scheme = HsScheme.pure_w1(2.0)
    st = ReducedState2N.initial(4)
    for step in range(1, 30):
        st = sde_step_2N(st, draw_noise(StreamKey(3, 0, step), 4, 0.01),
                         params, scheme, 0.01)
    rep = check_symmetries(st, "thm32a")
    assert max(rep.values()) < 1e-10


def test_thm32b_relations_preserved():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, mu=0.3, r=0.2, s=0.1, u=-2.0)
    scheme = HsScheme.pure_w2(-2.0)
    st = ReducedState2N.initial(4)
    for step in range(1, 30):
        st = sde_step_2N(st, draw_noise(StreamKey(3, 0, step), 4, 0.01),
                         params, scheme, 0.01)
    rep = check_symmetries(st, "thm32b")
    assert max(rep.values()) < 1e-10


@pytest.mark.parametrize("u", [3.0, -3.0])
def test_w1_stepper_matches_2N_and_full(u):
    spec, eps = _lattice()
    masks = bipartite_masks(spec)
    params = ModelParams(eps=eps, u=u)
    scheme = HsScheme.pure_w1(u)
    w1 = ReducedStateW1.initial(4)
    for step in range(1, 6):
        w1 = sde_step_w1(w1, draw_noise(StreamKey(3, 0, step), 4, 0.01), params, 0.01)
    st2 = expand_w1(w1, params.eps_u, masks)
    draw = draw_noise(StreamKey(3, 0, 6), 4, 0.01)
    w1p = sde_step_w1(w1, draw, params, 0.01)
    st2p = sde_step_2N(st2, draw, params, scheme, 0.01)
    lifted = expand_w1(w1p, params.eps_u, masks)
    assert np.max(np.abs(lifted.rho - st2p.rho)) < 1e-10
    assert np.max(np.abs(lifted.Fa - st2p.Fa)) < 1e-10
    fullp = extract_2N(sde_step_full(embed_2N(st2), assemble_h0(params), scheme,
                                     draw, 0.01, u))
    assert np.max(np.abs(st2p.rho - fullp.rho)) < 1e-10
    assert abs(energy_w1(w1, eps, u) - energy_2N(st2, params)) < 1e-12


@pytest.mark.parametrize("u", [3.0, -3.0])
def test_w2_stepper_matches_2N_and_full(u):
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=u)
    scheme = HsScheme.pure_w2(u)
    w2 = ReducedStateW2.initial(4)
    for step in range(1, 6):
        w2 = sde_step_w2(w2, draw_noise(StreamKey(3, 0, step), 4, 0.01), params, 0.01)
    st2 = expand_w2(w2, params.eps_u)
    draw = draw_noise(StreamKey(3, 0, 6), 4, 0.01)
    w2p = sde_step_w2(w2, draw, params, 0.01)
    st2p = sde_step_2N(st2, draw, params, scheme, 0.01)
    lifted = expand_w2(w2p, params.eps_u)
    assert np.max(np.abs(lifted.rho - st2p.rho)) < 1e-10
    assert np.max(np.abs(lifted.Fa - st2p.Fa)) < 1e-10
    assert np.max(np.abs(lifted.Fb - st2p.Fb)) < 1e-10
    fullp = extract_2N(sde_step_full(embed_2N(st2), assemble_h0(params), scheme,
                                     draw, 0.01, u))
    assert np.max(np.abs(st2p.Fa - fullp.Fa)) < 1e-10
    assert abs(energy_w2(w2, eps, u) - energy_2N(st2, params)) < 1e-12


def test_w1_zero_state_drift():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=2.0)
    st = sde_step_w1(ReducedStateW1.initial(4), NoiseDraw.zeros(4, 0.01), params, 0.01)
    assert np.max(np.abs(st.rho - (-0.5 * 0.01 * eps))) < 1e-14
    assert np.all(st.F == 0.0)


def test_w2_zero_state_drift():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=2.0)
    st = sde_step_w2(ReducedStateW2.initial(4), NoiseDraw.zeros(4, 0.01), params, 0.01)
    assert np.max(np.abs(st.rho_uu - (-0.5 * 0.01 * eps))) < 1e-14
    assert np.all(st.rho_ud == 0.0)
    assert np.all(st.F_uu == 0.0)
    assert np.all(st.F_ud == 0.0)


def test_energy_formulas_on_handmade_states():
    n = 4
    c = 0.31
    zero_eps = np.zeros((n, n))
    w1 = ReducedStateW1(rho=np.diag([c] * n), F=np.zeros((n, n)))
    assert abs(energy_w1(w1, zero_eps, 2.0) - (-2.0 / 4 * n * c * c)) < 1e-14
    assert energy_w1(ReducedStateW1.initial(n), zero_eps, 2.0) == 0.0
    spec, eps = _lattice()
    off = np.array([[0, 0.2, 0.3, 0], [0.2, 0, 0, 0.1],
                    [0.3, 0, 0, 0.4], [0, 0.1, 0.4, 0]])
    w2 = ReducedStateW2(rho_uu=off, rho_ud=np.diag([c] * n),
                        F_uu=np.zeros((n, n)), F_ud=np.zeros((n, n)))
    want = np.sum(eps * off.T) - abs(-3.0) / 4 * n * c * c
    assert abs(energy_w2(w2, eps, -3.0) - want) < 1e-14
    assert energy_w2(ReducedStateW2.initial(n), eps, -3.0) == 0.0


def test_w1_depends_only_on_magnitude_of_u():
    spec, eps = _lattice()
    a = ReducedStateW1.initial(4)
    b = ReducedStateW1.initial(4)
    for step in range(1, 40):
        draw = draw_noise(StreamKey(8, 0, step), 4, 0.01)
        a = sde_step_w1(a, draw, ModelParams(eps=eps, u=3.0), 0.01)
        b = sde_step_w1(b, draw, ModelParams(eps=eps, u=-3.0), 0.01)
    assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(a.F, b.F)


def test_w1_rejects_nonzero_mu_r_s():
    spec, eps = _lattice()
    with pytest.raises(ConfigError):
        sde_step_w1(ReducedStateW1.initial(4), NoiseDraw.zeros(4, 0.01),
                    ModelParams(eps=eps, mu=0.1, u=2.0), 0.01)
    with pytest.raises(ConfigError):
        sde_step_w2(ReducedStateW2.initial(4), NoiseDraw.zeros(4, 0.01),
                    ModelParams(eps=eps, s=0.1, u=2.0), 0.01)


def test_w2_constant_density_and_sparsity_along_path():
    spec, eps = _lattice()
    masks = bipartite_masks(spec)
    params = ModelParams(eps=eps, u=2.0)
    st = ReducedStateW2.initial(4)
    for step in range(1, 100):
        st = sde_step_w2(st, draw_noise(StreamKey(5, 0, step), 4, 0.01), params, 0.01)
        assert np.max(np.abs(np.diagonal(st.rho_uu))) < 1e-10
        rep = check_symmetries(st, "thm41", masks=masks)
        assert max(rep.values()) < 1e-10


def test_half_filling_relations_hold_along_w1_2N_path():
    spec, eps = _lattice()
    masks = bipartite_masks(spec)
    for u in (2.0, -2.0):
        params = ModelParams(eps=eps, u=u)
        scheme = HsScheme.pure_w1(u)
        st = ReducedState2N.initial(4)
        for step in range(1, 60):
            st = sde_step_2N(st, draw_noise(StreamKey(4, 0, step), 4, 0.01),
                             params, scheme, 0.01)
        rep = check_symmetries(st, "thm42a", masks=masks, eps_u=params.eps_u)
        assert max(rep.values()) < 1e-8


def test_thm42b_relations_hold_along_w2_2N_path():
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=-2.0)
    scheme = HsScheme.pure_w2(-2.0)
    st = ReducedState2N.initial(4)
    for step in range(1, 60):
        st = sde_step_2N(st, draw_noise(StreamKey(4, 0, step), 4, 0.01),
                         params, scheme, 0.01)
    rep = check_symmetries(st, "thm42b", eps_u=-1)
    assert max(rep.values()) < 1e-8


def test_check_symmetries_zero_state_and_negative_control(rng):
    st = ReducedState2N.initial(4)
    assert max(check_symmetries(st, "thm32a").values()) == 0.0
    corrupted = ReducedState2N(rho=st.rho.copy(), Fa=st.Fa.copy(), Fb=st.Fb.copy())
    corrupted.Fb[0, 1] = 0.5
    rep = check_symmetries(corrupted, "thm32a")
    assert rep["Fb_eq_Fa"] == 0.5
    with pytest.raises(ConfigError):
        check_symmetries(st, "thm99")
    with pytest.raises(ConfigError):
        check_symmetries(st, "thm41")  # masks missing


def test_embedding_equivalence_accumulated_over_beta_one():
    # reduced and full trajectories from identical draws stay together far
    # below the O(dt) allowance over beta = 1
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=2.0)
    scheme = HsScheme.pure_w1(2.0)
    red = ReducedState2N.initial(4)
    full = embed_2N(red)
    h0 = assemble_h0(params)
    for step in range(1, 101):
        draw = draw_noise(StreamKey(19, 0, step), 4, 0.01)
        red = sde_step_2N(red, draw, params, scheme, 0.01)
        full = sde_step_full(full, h0, scheme, draw, 0.01, 2.0)
    back = extract_2N(full)
    assert np.max(np.abs(red.rho - back.rho)) < 1e-8
    assert np.max(np.abs(red.Fa - back.Fa)) < 1e-8


def test_long_run_symmetry_stability():
    # 1e3 steps at dt = 0.01: projections keep everything tight
    spec, eps = _lattice()
    params = ModelParams(eps=eps, u=2.0)
    scheme = HsScheme.pure_w1(2.0)
    st = ReducedState2N.initial(4)
    for step in range(1, 1001):
        st = sde_step_2N(st, draw_noise(StreamKey(12, 0, step), 4, 0.01),
                         params, scheme, 0.01)
    assert np.max(np.abs(st.Fa + st.Fa.T)) == 0.0
    assert max(check_symmetries(st, "thm32a").values()) < 1e-8
