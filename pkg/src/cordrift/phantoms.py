"""Ground-truth test images: centered disk and the classical Shepp-Logan head."""

import numpy as np

from .geometry import Image, pixel_centers

# Classical Shepp-Logan ellipse table (Shepp & Logan 1974 intensities, as
# tabulated in the standard CT textbooks).  Columns:
#   x0, y0, x_semiaxis, y_semiaxis, rotation_deg (counterclockwise), intensity
# Coordinates are in the unit square [-1, 1]^2.  Note the three small
# ellipses near the bottom are not mirror images of one another, so the
# phantom is x-symmetric only up to their 0.01 intensity.
SHEPP_LOGAN_ELLIPSES = np.array(
    [
        [0.0, 0.0, 0.69, 0.92, 0.0, 2.0],
        [0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98],
        [0.22, 0.0, 0.11, 0.31, -18.0, -0.02],
        [-0.22, 0.0, 0.16, 0.41, 18.0, -0.02],
        [0.0, 0.35, 0.21, 0.25, 0.0, 0.01],
        [0.0, 0.1, 0.046, 0.046, 0.0, 0.01],
        [0.0, -0.1, 0.046, 0.046, 0.0, 0.01],
        [-0.08, -0.605, 0.046, 0.023, 0.0, 0.01],
        [0.0, -0.605, 0.023, 0.023, 0.0, 0.01],
        [0.06, -0.605, 0.023, 0.046, 0.0, 0.01],
    ]
)


def make_disk(n, radius_frac, value=1.0):
    """Solid disk: pixels whose centers lie within ``radius_frac * n/2`` of center."""
    if not 0.0 < radius_frac <= 1.0:
        raise ValueError(f"radius_frac must be in (0, 1], got {radius_frac}")
    if value < 0:
        raise ValueError(f"disk value must be nonnegative, got {value}")
    x, y = pixel_centers(n)
    r = radius_frac * (n / 2.0)
    vals = np.where(x * x + y * y <= r * r, float(value), 0.0)
    return Image(n=n, values=vals.ravel())


def make_shepp_logan(n):
    """Classical Shepp-Logan phantom sampled at pixel centers.

    The signed ellipse intensities are summed and clamped at zero (the sum
    is nonnegative everywhere for the standard table; the clamp guards the
    image invariant against roundoff).
    """
    if n < 2:
        raise ValueError(f"grid side must be >= 2, got {n}")
    x, y = pixel_centers(n)
    # Normalize the grid to the phantom's unit square.
    xn = x / (n / 2.0)
    yn = y / (n / 2.0)
    vals = np.zeros((n, n))
    for x0, y0, a, b, phi_deg, rho in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        c, s = np.cos(phi), np.sin(phi)
        # Rotate into the ellipse frame.
        xr = (xn - x0) * c + (yn - y0) * s
        yr = -(xn - x0) * s + (yn - y0) * c
        vals += np.where((xr / a) ** 2 + (yr / b) ** 2 <= 1.0, rho, 0.0)
    np.clip(vals, 0.0, None, out=vals)
    return Image(n=n, values=vals.ravel())
