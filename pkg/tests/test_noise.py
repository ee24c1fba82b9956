import numpy as np

from hubbard_sde.kernels import rng as crng
from hubbard_sde.noise import NoiseDraw, StreamKey, brownian_increment, draw_noise


def test_same_key_bit_identical():
    key = StreamKey(seed=123, path_id=7, step=42)
    a = draw_noise(key, 5, 0.01)
    b = draw_noise(key, 5, 0.01)
    assert np.array_equal(a.phi, b.phi)
    assert np.array_equal(a.xi, b.xi)
    assert np.array_equal(a.theta, b.theta)


def test_distinct_keys_differ():
    a = draw_noise(StreamKey(1, 0, 1), 4, 0.01)
    b = draw_noise(StreamKey(1, 0, 2), 4, 0.01)
    c = draw_noise(StreamKey(1, 1, 1), 4, 0.01)
    assert not np.array_equal(a.phi, b.phi)
    assert not np.array_equal(a.phi, c.phi)


def test_scalar_matches_vectorized():
    got = crng.normal_matrix(9, np.arange(3), 11, 2, 4)
    for p in range(3):
        for lane in range(4):
            assert got[p, lane] == crng.normal_scalar(9, p, 11, 2, lane)


def test_moments_of_million_draws():
    x = crng.normal_matrix(2024, np.arange(100_000), 0, 0, 10).ravel()
    assert abs(x.mean()) < 4.0 / np.sqrt(x.size)
    assert abs(x.var() - 1.0) < 0.01


def test_brownian_increment_matrix():
    draw = draw_noise(StreamKey(5, 0, 1), 3, 0.04)
    dx = brownian_increment(draw, "x")
    assert dx.shape == (3, 3)
    assert np.allclose(np.diagonal(dx), 0.2 * draw.phi)
    assert np.count_nonzero(dx - np.diag(np.diagonal(dx))) == 0
    zero = brownian_increment(NoiseDraw.zeros(3, 0.0), "y")
    assert np.all(zero == 0.0)


def test_squared_increment_averages_to_dt():
    dt = 0.05
    phi = crng.normal_matrix(3, np.arange(200_000), 1, 0, 1).ravel()
    assert abs(np.mean(dt * phi * phi) - dt) < 4 * dt * np.sqrt(2.0 / phi.size)


def test_cross_slot_increments_uncorrelated():
    # dx * dy averages to zero: the three per-step fields are independent
    paths = np.arange(200_000)
    phi = crng.normal_matrix(3, paths, 1, 0, 1).ravel()
    xi = crng.normal_matrix(3, paths, 1, 1, 1).ravel()
    theta = crng.normal_matrix(3, paths, 1, 2, 1).ravel()
    for a, b in ((phi, xi), (phi, theta), (xi, theta)):
        assert abs(np.mean(a * b)) < 4.0 / np.sqrt(a.size)


def test_paths_zero_and_one_uncorrelated_over_steps():
    # vectorized replica of the per-step key chain over 1e5 steps
    steps = np.arange(1, 100_001, dtype=np.uint64)
    h = crng.mix64((1 & crng.MASK64) ^ crng.GOLD)
    draws = []
    for path in (0, 1):
        hp = np.uint64(crng.mix64(h ^ (path * crng.K_PATH & crng.MASK64)))
        hs = crng._mix64_arr(hp ^ (steps * np.uint64(crng.K_STEP)))
        w = crng._mix64_arr(hs ^ np.uint64(crng.K_SLOT * 0 + 0))
        u = ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        draws.append(crng._norminv_vec(u))
    corr = np.corrcoef(draws[0], draws[1])[0, 1]
    assert abs(corr) < 0.01


def test_numba_kernel_rng_matches_reference():
    numba_kernels = __import__("hubbard_sde.kernels.numba_kernels",
                               fromlist=["numba_kernels"])
    for path, step, slot, lane in ((0, 1, 0, 0), (3, 17, 1, 2), (123, 999, 2, 5)):
        hs = numba_kernels._step_hash(np.uint64(7), np.uint64(path), np.uint64(step))
        got = numba_kernels._normal(np.uint64(hs), np.uint64(slot), np.uint64(lane))
        want = crng.normal_scalar(7, path, step, slot, lane)
        assert got == want
