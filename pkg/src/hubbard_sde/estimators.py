"""Weighted ratio estimators with jackknife errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with leave-one-out jackknife standard error."""

    value: float
    stderr: float
    n_effective: float
    imag_residual: float = 0.0

    def agrees_with(self, other: float, n_sigma: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.value - other) <= max(n_sigma * self.stderr, atol)


class DegenerateWeights(RuntimeError):
    """All weights vanished or collapsed onto a negligible subset."""


def weights_from_action(S: np.ndarray) -> np.ndarray:
    """exp(-S) stabilized by the common factor exp(min Re S)."""
    S = np.asarray(S)
    shift = np.min(S.real)
    return np.exp(-(S - shift))


def jackknife_ratio(num: np.ndarray, den: np.ndarray):
    """Ratio of means and its jackknife standard error.

    Leave-one-out replicates have the closed form (A - a_i) / (B - b_i);
    the error follows the usual (n-1)-scaled spread of replicates.
    """
    num = np.asarray(num)
    den = np.asarray(den)
    n = num.size
    if n < 2:
        return (num.sum() / den.sum(), np.inf)
    A = num.sum()
    B = den.sum()
    if B == 0:
        raise DegenerateWeights("weight sum is zero")
    reps = (A - num) / (B - den)
    center = np.mean(reps)
    var = (n - 1) * np.mean(np.abs(reps - center) ** 2)
    return (A / B, float(np.sqrt(var)))


def weighted_ratio_estimate(values: np.ndarray, weights: np.ndarray,
                            min_n_eff: float = 2.0) -> Estimate:
    """Estimate of <values> under normalized complex weights.

    min_n_eff=0 disables the weight-collapse guard (used where collapse is
    the phenomenon under study, e.g. the raw toy sampler at large beta).
    """
    values = np.asarray(values)
    weights = np.asarray(weights)
    wsum = np.abs(weights).sum()
    if wsum == 0 or not np.isfinite(wsum):
        raise DegenerateWeights("invalid weight normalization")
    n_eff = float(np.abs(weights).sum() ** 2 / (np.abs(weights) ** 2).sum())
    if n_eff < min_n_eff:
        raise DegenerateWeights(f"effective sample size {n_eff:.2f} < {min_n_eff}")
    ratio, err = jackknife_ratio(values * weights, weights)
    return Estimate(value=float(np.real(ratio)), stderr=err,
                    n_effective=n_eff, imag_residual=float(abs(np.imag(ratio))))


def mean_estimate(values: np.ndarray) -> Estimate:
    """Plain mean with jackknife (= standard) error of the mean."""
    values = np.asarray(values)
    n = values.size
    mean = values.mean()
    err = float(np.std(values.real, ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    return Estimate(value=float(np.real(mean)), stderr=err, n_effective=float(n),
                    imag_residual=float(abs(np.imag(mean))))
