"""Counter-based standard normals keyed by (seed, path, step, slot, lane).

The generator is stateless: every draw is a fixed arithmetic function of its
key, so paths can be evolved in any order, in chunks, or in parallel and
reproduce bit-identically.  Pipeline:

1. splitmix64-style avalanche mixing of the chained key words,
2. top 53 bits -> uniform in the open interval (0, 1),
3. Acklam's rational approximation of the inverse normal CDF
   (only +,-,*,/ and sqrt/log, so the transform is platform-stable).

Scalar forms are shared with the numba kernels; `normal_matrix` is the
vectorized numpy reference used by the fallback backend.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLD = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
K_PATH = 0xD1342543DE82EF95
K_STEP = 0xAF251AF3B0F025B5
K_SLOT = 0x9E6C63D0876A9A99

# Acklam inverse normal CDF coefficients.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01,
      2.445134137142996e+00, 3.754408661907416e+00)
_P_LOW = 0.02425


def mix64(z: int) -> int:
    """splitmix64 finalizer on masked Python ints."""
    z = (z ^ (z >> 30)) * MIX1 & MASK64
    z = (z ^ (z >> 27)) * MIX2 & MASK64
    return z ^ (z >> 31)


def key_word(seed, path_id, step, slot, lane) -> int:
    """64-bit word for one draw; pure function of the five key fields."""
    h = mix64((int(seed) & MASK64) ^ GOLD)
    h = mix64(h ^ (int(path_id) * K_PATH & MASK64))
    h = mix64(h ^ (int(step) * K_STEP & MASK64))
    h = mix64(h ^ ((int(slot) * K_SLOT + int(lane)) & MASK64))
    return h


def uniform_from_word(word) -> float:
    """Map a 64-bit word to the open interval (0, 1)."""
    return (float(int(word) >> 11) + 0.5) * (2.0**-53)


def norminv(p: float) -> float:
    """Acklam's inverse standard-normal CDF, scalar form."""
    if p < _P_LOW:
        q = np.sqrt(-2.0 * np.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - _P_LOW:
        q = np.sqrt(-2.0 * np.log(1.0 - p))
        return -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def normal_scalar(seed, path_id, step, slot, lane) -> float:
    """One standard normal from its key."""
    return norminv(uniform_from_word(key_word(seed, path_id, step, slot, lane)))


def _norminv_vec(p: np.ndarray) -> np.ndarray:
    out = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = p[mid] - 0.5
    r = q * q
    out[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q \
        / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)

    q = np.sqrt(-2.0 * np.log(p[lo]))
    out[lo] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) \
        / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
    out[hi] = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    return out


def normal_matrix(seed, path_ids, step, slot, n_lanes) -> np.ndarray:
    """Standard normals of shape (len(path_ids), n_lanes), vectorized.

    Bit-identical to looping `normal_scalar` over the same keys.
    """
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    lanes = np.arange(n_lanes, dtype=np.uint64)
    h = np.uint64(mix64((int(seed) & MASK64) ^ GOLD))
    hp = _mix64_arr(h ^ (path_ids * np.uint64(K_PATH)))
    hs = _mix64_arr(hp ^ np.uint64(int(step) * K_STEP & MASK64))
    w = _mix64_arr(hs[:, None] ^ (np.uint64((int(slot) * K_SLOT) & MASK64) + lanes[None, :]))
    u = ((w >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)
    return _norminv_vec(u)


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))
