"""Seeded Gaussian measurement noise for robustness experiments."""

from dataclasses import dataclass

import numpy as np

from .geometry import Sinogram


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level as a fraction of the data RMS, plus the generator seed.

    The "level" convention: injected noise is i.i.d. zero-mean Gaussian
    with standard deviation ``level * rms(D)`` where
    ``rms(D) = ||D||_F / sqrt(n_angles * n_beamlets)``.  Sequences come
    from numpy's PCG64 generator, so a given (data, spec) pair always
    produces the same output.
    """

    level: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.level < 1.0:
            raise ValueError(f"noise level must be in [0, 1), got {self.level}")


def add_noise(d, spec):
    """Return a copy of the sinogram with seeded Gaussian noise added."""
    values = d.values if isinstance(d, Sinogram) else np.asarray(d, dtype=float)
    if spec.level == 0.0:
        return Sinogram(values=values.copy())
    rms = np.linalg.norm(values) / np.sqrt(values.size)
    rng = np.random.default_rng(spec.seed)
    return Sinogram(values=values + rng.normal(0.0, spec.level * rms, size=values.shape))
