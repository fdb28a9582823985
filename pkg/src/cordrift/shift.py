"""Detector-axis translation of sinogram rows by Gaussian-regularized FFT convolution.

A drift of the center of rotation to ``(x*, y*)`` displaces the projection
measured at stage angle ``theta`` along the detector by

    P(theta) = x* (1 - cos(theta)) + y* sin(theta)

pixels: the measured row equals the drift-free row evaluated at ``tau - P``.
Translating a sampled row by ``P`` is done by convolving it with a narrow
normalized Gaussian centered at ``P``, computed through the FFT on a
zero-padded grid.  The Gaussian width trades translation fidelity (small
sigma) against discretization error on a finite beamlet grid (large sigma);
``default_sigma`` sets the full width at half maximum to one beamlet.

Sign conventions used throughout the package:

* ``translate_row(row, P)`` returns ``row(tau - P)``, i.e. content moves
  toward +tau for positive ``P``.
* Simulated drifted data is the clean row translated by ``+P(theta)``;
  correcting measured data therefore translates by ``-P(theta)``.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import fft as _fft

if TYPE_CHECKING:  # pragma: no cover
    from .geometry import DriftModel, Geometry

# FWHM of a unit-sigma Gaussian.
_FWHM_PER_SIGMA = 2.355
# Kernel support radius in sigmas.  At 8 sigma the dropped tail mass is
# ~exp(-32) ~ 1e-14, below central-difference resolution, so gradient
# checks see a smooth objective.
_SUPPORT_SIGMAS = 8.0


def default_sigma():
    """Gaussian width whose FWHM covers one beamlet: 1/2.355 ~ 0.42."""
    return 1.0 / _FWHM_PER_SIGMA


def shift_amount(theta, x_star, y_star):
    """Detector shift induced at angle ``theta`` by a CoR at ``(x*, y*)``."""
    return x_star * (1.0 - np.cos(theta)) + y_star * np.sin(theta)


def drift_shifts(drift, geom):
    """Per-angle detector shifts P(theta) for a drift model, shape (n_angles,)."""
    cors = drift.cor_for_angles(geom.n_angles)
    return shift_amount(geom.angles, cors[:, 0], cors[:, 1])


@dataclass(frozen=True)
class ShiftParams:
    """Per-angle detector shifts, one entry per stage angle."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).ravel())
        if not np.all(np.isfinite(self.p)):
            raise ValueError("shifts must be finite")


@dataclass(frozen=True)
class GaussianKernel:
    """Normalized translation kernel sampled on the beamlet grid."""

    center: float
    sigma: float
    samples: np.ndarray


def padded_size(n_beamlets):
    """Smallest power of two >= 2 * n_beamlets (convolution padding)."""
    return 1 << (2 * n_beamlets - 1).bit_length()


def _support_radius(sigma, h):
    # Guarantee at least the nearest grid sample survives truncation.
    return max(_SUPPORT_SIGMAS * sigma, h)


def _window(centers, sigma, h):
    """Sampled, truncated Gaussian windows around each center.

    Returns (grid indices, normalized weights, normalized center-derivative
    weights).  Sampling follows the beamlet grid with trapezoid weight h;
    each window is renormalized to unit sum so that convolution preserves
    constants and row mass exactly (the raw sampled Gaussian carries a
    sigma-dependent aliasing of its discrete mass).  The derivative weights
    are the exact center-derivatives of the normalized weights.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    support = _support_radius(sigma, h)
    half = int(np.ceil(support / h)) + 1
    j0 = np.rint(centers / h).astype(np.int64)
    js = j0[:, None] + np.arange(-half, half + 1)[None, :]
    z = js * h - centers[:, None]
    w = np.exp(-0.5 * (z / sigma) ** 2)
    w[np.abs(z) > support] = 0.0
    s = w.sum(axis=1)
    k = w / s[:, None]
    wp = w * z / sigma**2
    sp = wp.sum(axis=1)
    dk = (wp - k * sp[:, None]) / s[:, None]
    return js, k, dk


def _kernel_bank(centers, sigma, h, n_pad, with_derivative=False):
    """Kernels (and optionally their center-derivatives) on the padded circular grid."""
    js, k, dk = _window(centers, sigma, h)
    m = js.shape[0]
    rows = np.repeat(np.arange(m), js.shape[1])
    cols = (js % n_pad).ravel()
    bank = np.zeros((m, n_pad))
    bank[rows, cols] = k.ravel()
    if not with_derivative:
        return bank, None
    dbank = np.zeros((m, n_pad))
    dbank[rows, cols] = dk.ravel()
    return bank, dbank


def gaussian_kernel(P, sigma, geom):
    """Translation kernel delta_{P,sigma} restricted to the detector grid.

    The normalizer is the full (untruncated-grid) window sum, so the
    returned samples sum to one whenever the kernel support lies inside the
    detector.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    js, k, _ = _window(P, sigma, geom.spacing)
    samples = np.zeros(geom.n_beamlets)
    inside = (js[0] >= 0) & (js[0] < geom.n_beamlets)
    samples[js[0, inside]] = k[0, inside]
    return GaussianKernel(center=float(P), sigma=float(sigma), samples=samples)


def kernel_derivative(P, sigma, geom):
    """Derivative of the normalized translation kernel with respect to its center.

    Convolving a row with these samples gives the P-derivative of
    ``translate_row(row, P)``; the per-angle chain-rule factors
    ``dP/dx* = 1 - cos(theta)`` and ``dP/dy* = sin(theta)`` then assemble
    the drift-coordinate gradients of the alignment map.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    js, _, dk = _window(P, sigma, geom.spacing)
    samples = np.zeros(geom.n_beamlets)
    inside = (js[0] >= 0) & (js[0] < geom.n_beamlets)
    samples[js[0, inside]] = dk[0, inside]
    return samples


def _translate_rows(rows, shifts, sigma, h):
    """Translate each row of a 2-D array by its own shift (in tau units)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    shifts = np.broadcast_to(np.asarray(shifts, dtype=float).ravel(), (rows.shape[0],))
    n_taus = rows.shape[1]
    n_pad = padded_size(n_taus)
    bank, _ = _kernel_bank(shifts, sigma, h, n_pad)
    spectra = _fft.rfft(rows, n=n_pad, axis=1) * _fft.rfft(bank, axis=1)
    return _fft.irfft(spectra, n=n_pad, axis=1)[:, :n_taus]


def translate_row(row, P, sigma, geom):
    """Approximate ``row(tau - P)`` via Gaussian-regularized FFT convolution.

    The row is zero-padded to the next power of two at least twice its
    length before the circular convolution, which prevents wraparound for
    any shift within the detector half-span.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    row = np.asarray(row, dtype=float).ravel()
    if row.size != geom.n_beamlets:
        raise ValueError(f"row has {row.size} entries, geometry expects {geom.n_beamlets}")
    if not np.all(np.isfinite(row)):
        raise ValueError("row must be finite")
    return _translate_rows(row[None, :], [P], sigma, geom.spacing)[0]


def align_sinogram(d, shifts, sigma, geom):
    """Translate row theta of a sinogram by shifts[theta].

    Pass the drift-model shifts ``+P(theta)`` to synthesize drifted data
    from a clean sinogram, or ``-P(theta)`` to undo a drift in measured
    data.
    """
    from .geometry import Sinogram

    values = d.values if hasattr(d, "values") else np.asarray(d, dtype=float)
    p = np.asarray(getattr(shifts, "p", shifts), dtype=float).ravel()
    if np.isscalar(shifts) or p.size == 1:
        p = np.full(values.shape[0], float(p[0]) if p.size else float(shifts))
    if values.shape[0] != p.size:
        raise ValueError(
            f"sinogram has {values.shape[0]} rows but {p.size} shifts were given"
        )
    if values.shape[1] != geom.n_beamlets:
        raise ValueError(
            f"sinogram has {values.shape[1]} beamlets, geometry expects {geom.n_beamlets}"
        )
    if np.any(np.abs(p) >= geom.span / 2.0):
        raise ValueError("shift exceeds the detector half-span")
    return Sinogram(values=_translate_rows(values, p, sigma, geom.spacing))
