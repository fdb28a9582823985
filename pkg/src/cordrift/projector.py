"""Discrete Radon system: exact ray-pixel intersection lengths and the linear maps.

The system matrix row for (theta, tau) holds the Euclidean length of the
intersection of the beamlet line with each pixel, found by incremental
traversal over the pixel-boundary crossings.  Rays that miss the grid give
empty rows.  ``simulate_shifted`` produces ground-truth data for a drifting
center of rotation by retracing each angle's rays at their displaced
detector offsets instead of resampling the image.
"""

import numpy as np
from scipy import sparse

from .geometry import DriftModel, Geometry, Image, Sinogram
from .shift import drift_shifts

_EPS = 1e-12


def trace_ray(n, theta, tau):
    """Intersection of the line {x cos(theta) + y sin(theta) = tau} with the grid.

    Returns (flat pixel indices, intersection lengths); both empty when the
    ray misses the grid.
    """
    c, s = np.cos(theta), np.sin(theta)
    return _trace(n, c, s, tau)


def _trace(n, cos_t, sin_t, tau):
    half = n / 2.0
    # Point on the line closest to the origin, and the unit direction.
    px, py = tau * cos_t, tau * sin_t
    dx, dy = -sin_t, cos_t

    s_lo, s_hi = -np.inf, np.inf
    for p0, d in ((px, dx), (py, dy)):
        if abs(d) < _EPS:
            if abs(p0) >= half:
                return np.empty(0, dtype=np.int64), np.empty(0)
        else:
            s1 = (-half - p0) / d
            s2 = (half - p0) / d
            s_lo = max(s_lo, min(s1, s2))
            s_hi = min(s_hi, max(s1, s2))
    if s_hi - s_lo <= _EPS:
        return np.empty(0, dtype=np.int64), np.empty(0)

    grid = np.arange(n + 1) - half
    crossings = [np.array([s_lo, s_hi])]
    if abs(dx) >= _EPS:
        sx = (grid - px) / dx
        crossings.append(sx[(sx > s_lo) & (sx < s_hi)])
    if abs(dy) >= _EPS:
        sy = (grid - py) / dy
        crossings.append(sy[(sy > s_lo) & (sy < s_hi)])
    ss = np.unique(np.concatenate(crossings))

    lengths = np.diff(ss)
    mids = 0.5 * (ss[1:] + ss[:-1])
    keep = lengths > _EPS
    lengths = lengths[keep]
    mids = mids[keep]
    cols = np.floor(px + mids * dx + half).astype(np.int64)
    rows = np.floor(half - (py + mids * dy)).astype(np.int64)
    np.clip(cols, 0, n - 1, out=cols)
    np.clip(rows, 0, n - 1, out=rows)
    return rows * n + cols, lengths


def build_system_matrix(geom):
    """Sparse CSR matrix of intersection lengths, (n_angles * n_beamlets) x n^2."""
    n = geom.n
    indptr = np.zeros(geom.n_angles * geom.n_beamlets + 1, dtype=np.int64)
    index_chunks = []
    data_chunks = []
    row = 0
    for theta in geom.angles:
        c, s = np.cos(theta), np.sin(theta)
        for tau in geom.taus:
            idx, lens = _trace(n, c, s, tau)
            index_chunks.append(idx)
            data_chunks.append(lens)
            row += 1
            indptr[row] = indptr[row - 1] + idx.size
    indices = np.concatenate(index_chunks) if index_chunks else np.empty(0, np.int64)
    data = np.concatenate(data_chunks) if data_chunks else np.empty(0)
    return sparse.csr_matrix(
        (data, indices, indptr),
        shape=(geom.n_angles * geom.n_beamlets, n * n),
    )


def _as_image_vector(w, n_cols):
    v = w.values if isinstance(w, Image) else np.asarray(w, dtype=float).ravel()
    if v.size != n_cols:
        raise ValueError(f"image vector has {v.size} entries, system expects {n_cols}")
    return v


def forward(L, w, geom):
    """Discrete Radon transform: apply the system matrix to an image."""
    v = _as_image_vector(w, L.shape[1])
    return Sinogram(values=(L @ v).reshape(geom.n_angles, geom.n_beamlets))


def adjoint(L, s):
    """Transpose map (backprojection); returns an image-shaped flat vector."""
    values = s.values if isinstance(s, Sinogram) else np.asarray(s, dtype=float)
    vec = values.ravel()
    if vec.size != L.shape[0]:
        raise ValueError(f"sinogram has {vec.size} entries, system expects {L.shape[0]}")
    return L.T @ vec


def simulate_shifted(geom, w, drift, oversample=1):
    """Ground-truth sinogram acquired about a (possibly drifting) CoR.

    For each angle the beamlet at nominal offset tau is retraced at the
    displaced offset ``tau - P(theta)``, which is where the rotated beam
    actually lies when the stage turns about ``(x*, y*)`` instead of the
    origin.  ``oversample`` subdivides each beamlet into that many sub-rays
    and averages them, modeling a detector bin of finite width.
    """
    if oversample < 1:
        raise ValueError(f"oversample must be >= 1, got {oversample}")
    if not isinstance(drift, DriftModel):
        raise TypeError("drift must be a DriftModel")
    n = geom.n
    cors = drift.cor_for_angles(geom.n_angles)
    if np.any(np.abs(cors) > n / 2.0):
        raise ValueError("CoR outside the field of view")
    wvec = _as_image_vector(w, n * n)
    shifts = drift_shifts(drift, geom)

    if oversample == 1:
        sub = np.zeros(1)
    else:
        sub = ((np.arange(oversample) + 0.5) / oversample - 0.5) * geom.spacing
    out = np.zeros((geom.n_angles, geom.n_beamlets))
    for a, theta in enumerate(geom.angles):
        c, s = np.cos(theta), np.sin(theta)
        for k, tau in enumerate(geom.taus):
            acc = 0.0
            for off in sub:
                idx, lens = _trace(n, c, s, tau + off - shifts[a])
                if idx.size:
                    acc += lens @ wvec[idx]
            out[a, k] = acc / sub.size
    return Sinogram(values=out)
