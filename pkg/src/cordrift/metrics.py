"""Reconstruction quality and sinogram misfit measures."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Image, Sinogram


@dataclass(frozen=True)
class SsimConstants:
    """Stabilizers for the structural-similarity index."""

    c1: float
    c2: float
    dynamic_range: float

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("SSIM stabilizers must be positive")

    @classmethod
    def from_range(cls, dynamic_range):
        """Standard constants c1 = (0.01 R)^2, c2 = (0.03 R)^2."""
        r = float(dynamic_range)
        if r <= 0:
            r = 1.0
        return cls(c1=(0.01 * r) ** 2, c2=(0.03 * r) ** 2, dynamic_range=r)


def _values(x):
    return x.values if isinstance(x, (Image, Sinogram)) else np.asarray(x, dtype=float)


def ssim(a, b, consts=None):
    """Global (single-window) structural similarity between two images.

    Means, variances, and the covariance are taken over the whole image.
    Reconstructions are unique only up to translation and rotation of the
    object, which is why this index is used instead of a pixelwise error.
    When ``consts`` is omitted the stabilizers are derived from the joint
    dynamic range of the two inputs, which keeps the index symmetric; for
    comparisons against a known ground truth pass
    ``SsimConstants.from_range(truth.max() - truth.min())``.
    """
    av = _values(a).ravel()
    bv = _values(b).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    if consts is None:
        hi = max(av.max(), bv.max())
        lo = min(av.min(), bv.min())
        consts = SsimConstants.from_range(hi - lo)
    mu_a = av.mean()
    mu_b = bv.mean()
    var_a = av.var()
    var_b = bv.var()
    cov = float(((av - mu_a) * (bv - mu_b)).mean())
    num = (2.0 * mu_a * mu_b + consts.c1) * (2.0 * cov + consts.c2)
    den = (mu_a**2 + mu_b**2 + consts.c1) * (var_a + var_b + consts.c2)
    return float(num / den)


def ssim_windowed(a, b, window=8, consts=None):
    """Mean SSIM over non-overlapping square windows (diagnostic variant)."""
    av = np.atleast_2d(_values(a))
    bv = np.atleast_2d(_values(b))
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    if consts is None:
        hi = max(av.max(), bv.max())
        lo = min(av.min(), bv.min())
        consts = SsimConstants.from_range(hi - lo)
    scores = []
    for i in range(0, av.shape[0] - window + 1, window):
        for j in range(0, av.shape[1] - window + 1, window):
            scores.append(
                ssim(av[i : i + window, j : j + window],
                     bv[i : i + window, j : j + window], consts)
            )
    return float(np.mean(scores)) if scores else ssim(av, bv, consts)


def rel_misfit(s1, s2):
    """Relative Frobenius misfit ||s1 - s2||_F / ||s2||_F.

    Returns infinity (with a warning) when the reference has zero norm.
    """
    a = _values(s1)
    b = _values(s2)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ref = float(np.linalg.norm(b))
    if ref == 0.0:
        warnings.warn("reference sinogram has zero norm; misfit undefined")
        return math.inf
    return float(np.linalg.norm(a - b) / ref)
