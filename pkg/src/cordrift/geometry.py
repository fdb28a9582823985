"""Scan geometry and the basic data containers shared across the toolkit.

Coordinate conventions
----------------------
The reconstruction grid is ``n x n`` pixels of unit side length centered on
the nominal rotation axis.  Pixel ``(i, j)`` (row ``i`` from the top, column
``j`` from the left) has center ``((j + 0.5) - n/2, n/2 - (i + 0.5))`` in a
frame with x pointing right and y pointing up.  A beamlet with detector
offset ``tau`` at stage angle ``theta`` integrates along the line
``{(x, y) : x*cos(theta) + y*sin(theta) = tau}``.

All lengths (detector offsets, drift coordinates, kernel widths) are in
pixel units.
"""

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam sampling grid: angles over [0, 2pi) and detector offsets.

    Attributes
    ----------
    n : int
        Side length of the pixel grid.
    angles : ndarray
        Stage angles in radians, strictly increasing in [0, 2pi).
    taus : ndarray
        Beamlet offsets, equally spaced and centered on zero.
    spacing : float
        Distance h between adjacent beamlets.
    """

    n: int
    angles: np.ndarray
    taus: np.ndarray
    spacing: float

    @property
    def n_angles(self):
        return self.angles.size

    @property
    def n_beamlets(self):
        return self.taus.size

    @property
    def span(self):
        """Total detector width N_tau * h (equals the grid diagonal)."""
        return self.n_beamlets * self.spacing


def build_geometry(n, n_angles):
    """Build the default scan geometry for an ``n x n`` grid.

    The detector has ``N_tau = floor(sqrt(2) * n)`` beamlets spaced
    ``h = sqrt(2) * n / N_tau`` apart (roughly one pixel), so the beamlets
    exactly cover the grid diagonal.  Angles are equally spaced over a full
    rotation.
    """
    if n < 2:
        raise ValueError(f"grid side must be >= 2, got {n}")
    if n_angles < 1:
        raise ValueError(f"need at least one angle, got {n_angles}")
    n_taus = int(math.floor(math.sqrt(2.0) * n))
    h = math.sqrt(2.0) * n / n_taus
    taus = (np.arange(n_taus) - (n_taus - 1) / 2.0) * h
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    return Geometry(n=n, angles=angles, taus=taus, spacing=h)


@dataclass
class Image:
    """Nonnegative square attenuation map, stored row-major as a flat vector."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float).ravel()
        if self.n < 2:
            raise ValueError(f"grid side must be >= 2, got {self.n}")
        if self.values.size != self.n * self.n:
            raise ValueError(
                f"expected {self.n * self.n} values, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")
        if np.any(self.values < 0):
            raise ValueError("attenuation values must be nonnegative")

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square 2-D array, got shape {a.shape}")
        return cls(n=a.shape[0], values=a.ravel())

    def as_array(self):
        return self.values.reshape(self.n, self.n)


def pixel_centers(n):
    """Pixel-center coordinate arrays (x, y), each shaped (n, n)."""
    xs = (np.arange(n) + 0.5) - n / 2.0
    ys = n / 2.0 - (np.arange(n) + 0.5)
    return np.meshgrid(xs, ys)


@dataclass
class Sinogram:
    """Projection data, one row per angle, one column per beamlet."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"sinogram must be 2-D, got shape {self.values.shape}")

    @property
    def n_angles(self):
        return self.values.shape[0]

    @property
    def n_beamlets(self):
        return self.values.shape[1]


_DRIFT_KINDS = ("none", "single", "per-angle")


@dataclass
class DriftModel:
    """Center-of-rotation positions: none, one global, or one per angle.

    ``cors`` is a (k, 2) array of (x*, y*) pairs: k = 0 for ``none``, 1 for
    ``single``, and the number of angles for ``per-angle``.
    """

    kind: str
    cors: np.ndarray

    def __post_init__(self):
        if self.kind not in _DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")
        self.cors = np.asarray(self.cors, dtype=float).reshape(-1, 2)
        if self.kind == "none" and self.cors.shape[0] != 0:
            raise ValueError("drift kind 'none' cannot carry CoR entries")
        if self.kind == "single" and self.cors.shape[0] != 1:
            raise ValueError("drift kind 'single' needs exactly one CoR pair")
        if self.kind == "per-angle" and self.cors.shape[0] < 1:
            raise ValueError("drift kind 'per-angle' needs one CoR pair per angle")
        if not np.all(np.isfinite(self.cors)):
            raise ValueError("CoR coordinates must be finite")

    @classmethod
    def none(cls):
        return cls(kind="none", cors=np.zeros((0, 2)))

    @classmethod
    def single(cls, x_star, y_star):
        return cls(kind="single", cors=np.array([[x_star, y_star]]))

    @classmethod
    def per_angle(cls, cors):
        return cls(kind="per-angle", cors=np.asarray(cors, dtype=float))

    def cor_for_angles(self, n_angles):
        """Broadcast to a (n_angles, 2) array of per-angle CoR positions."""
        if self.kind == "none":
            return np.zeros((n_angles, 2))
        if self.kind == "single":
            return np.repeat(self.cors, n_angles, axis=0)
        if self.cors.shape[0] != n_angles:
            raise ValueError(
                f"per-angle drift has {self.cors.shape[0]} entries, "
                f"geometry has {n_angles} angles"
            )
        return self.cors


def make_single_drift(n, scale, seed):
    """One CoR displaced by exactly ``scale * n`` pixels in a seeded direction."""
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    r = scale * n
    return DriftModel.single(r * math.cos(ang), r * math.sin(ang))


def make_walk_drift(n, n_angles, scale, seed):
    """Seeded random-walk CoR trajectory, one position per angle.

    Each step has length at most ``scale * n``; positions are clipped to
    stay within a quarter of the grid so the CoR remains well inside the
    field of view.
    """
    rng = np.random.default_rng(seed)
    angs = rng.uniform(0.0, 2.0 * np.pi, size=n_angles)
    lens = rng.uniform(0.0, scale * n, size=n_angles)
    steps = np.column_stack([lens * np.cos(angs), lens * np.sin(angs)])
    cors = np.cumsum(steps, axis=0)
    np.clip(cors, -n / 4.0, n / 4.0, out=cors)
    return DriftModel.per_angle(cors)
