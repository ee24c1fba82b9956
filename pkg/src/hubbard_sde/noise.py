"""Seeded per-step noise fields and their Brownian-increment matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import rng

SLOT_PHI, SLOT_XI, SLOT_THETA = 0, 1, 2


@dataclass(frozen=True)
class StreamKey:
    """Addresses one time step of one path in the noise stream."""

    seed: int
    path_id: int
    step: int


@dataclass(frozen=True)
class NoiseDraw:
    """The three per-site standard-normal fields of one time step."""

    phi: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    dt: float

    @classmethod
    def zeros(cls, n: int, dt: float) -> "NoiseDraw":
        z = np.zeros(n)
        return cls(phi=z, xi=z.copy(), theta=z.copy(), dt=dt)


def draw_noise(key: StreamKey, n: int, dt: float) -> NoiseDraw:
    """Deterministic standard-normal fields for one (path, step).

    Pure function of the key: repeated calls are bit-identical, distinct
    keys give statistically independent draws.
    """
    path = np.asarray([key.path_id])
    return NoiseDraw(
        phi=rng.normal_matrix(key.seed, path, key.step, SLOT_PHI, n)[0],
        xi=rng.normal_matrix(key.seed, path, key.step, SLOT_XI, n)[0],
        theta=rng.normal_matrix(key.seed, path, key.step, SLOT_THETA, n)[0],
        dt=dt,
    )


def brownian_increment(draw: NoiseDraw, which: str) -> np.ndarray:
    """Diagonal matrix dx/dy/dz with entries sqrt(dt) * field."""
    field = {"x": draw.phi, "y": draw.xi, "z": draw.theta}[which]
    return np.diag(np.sqrt(draw.dt) * field)
