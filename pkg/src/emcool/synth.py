"""Deterministic generation of realistic noisy spectra for fit validation.

Averaged-periodogram statistics: each bin of an n_avg-fold averaged power
spectrum is the true PSD times a Gamma(n_avg, 1/n_avg) variate (mean 1,
variance 1/n_avg).  Draws come from numpy's Philox counter-based generator,
so output is bit-identical across runs and platforms for a given seed and
numpy major version; the whole array is drawn in one call, making the result
independent of any evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .spectra import ModelParams, SpectrumTrace, SpectrumUnit, grid_for, output_noise_spectrum


@dataclass(frozen=True)
class NoiseConfig:
    """Averaging count, seed, and optional grid spec for synthetic traces."""

    n_avg: int = 500
    seed: int = 0
    points: int = 4096
    halfspan_hz: float | None = None

    def __post_init__(self) -> None:
        if self.n_avg < 1:
            raise ParameterError(f"n_avg must be >= 1, got {self.n_avg!r}")
        if self.points < 32:
            raise ParameterError(f"points must be >= 32, got {self.points!r}")


def periodogram_factors(n_bins: int, n_avg: int, seed: int) -> np.ndarray:
    """Multiplicative noise factors: Gamma(n_avg, 1/n_avg) per bin, Philox-keyed."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    return rng.gamma(shape=float(n_avg), scale=1.0 / n_avg, size=n_bins)


def generate_spectrum(
    params: ModelParams,
    noise: NoiseConfig,
    freq_hz: np.ndarray | None = None,
) -> SpectrumTrace:
    """Noisy output spectrum: model values times seeded periodogram factors.

    Uses the exact output-noise model on `freq_hz` (or a default grid sized
    from `noise` and the model linewidths).  n_avg and seed land in the trace
    metadata so fits can reconstruct the per-bin weights.
    """
    if freq_hz is None:
        freq_hz = grid_for(params, points=noise.points, halfspan_hz=noise.halfspan_hz)
    clean = output_noise_spectrum(freq_hz, params)
    factors = periodogram_factors(clean.values.size, noise.n_avg, noise.seed)
    meta = dict(clean.meta)
    meta.update(n_avg=noise.n_avg, seed=noise.seed)
    return SpectrumTrace(
        freq_hz=clean.freq_hz,
        values=clean.values * factors,
        unit=SpectrumUnit.QUANTA,
        meta=meta,
    )
