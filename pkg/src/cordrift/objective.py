"""Reconstruction objectives and their analytic gradients.

All objectives are least-squares misfits ``0.5 * ||L w - g||^2`` between the
projected image and a target sinogram:

* standard:  g is the measured data itself.
* explicit:  g is the data corrected by the shifts of CoR coordinates
  (x*, y*), one pair shared by all angles or one pair per angle.
* implicit:  g is the data corrected by free per-angle shifts P.
* l2 / tv:   standard misfit plus a Laplacian or smoothed total-variation
  penalty on the image.

The joint objectives optimize over the stacked vector ``[w, aux]`` where
``aux`` is empty, (x*, y*) blocks, or the shift vector.  Because the data
was displaced by +P(theta), the correction inside the residual translates
by -P(theta); at the optimum the recovered parameters therefore equal the
drift that produced the data.  All gradient blocks are exact derivatives of
the evaluated expression (verified against central differences in the test
suite).
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .geometry import Image, Sinogram
from .shift import _kernel_bank, padded_size, shift_amount


@dataclass
class ObjectiveReport:
    """Objective value and gradient over the stacked variable vector."""

    value: float
    gradient: np.ndarray


def _image_vec(w, n_cols):
    v = w.values if isinstance(w, Image) else np.asarray(w, dtype=float).ravel()
    if v.size != n_cols:
        raise ValueError(f"image vector has {v.size} entries, system expects {n_cols}")
    return v


def _sino_array(d, L):
    values = d.values if isinstance(d, Sinogram) else np.asarray(d, dtype=float)
    if values.ndim != 2 or values.size != L.shape[0]:
        raise ValueError(
            f"sinogram shape {values.shape} does not match system rows {L.shape[0]}"
        )
    return values


def phi_standard(w, d, L):
    """Plain misfit 0.5 ||L w - vec(D)||^2 and its gradient L^T r."""
    dvec = _sino_array(d, L).ravel()
    v = _image_vec(w, L.shape[1])
    r = L @ v - dvec
    return ObjectiveReport(value=0.5 * float(r @ r), gradient=L.T @ r)


class _AlignedMisfit:
    """Shared core for the explicit/implicit objectives.

    Caches the padded FFT of the data rows and the matrix transpose, and
    evaluates the misfit against the shift-corrected data together with the
    per-angle derivative of the value with respect to each kernel center.
    """

    def __init__(self, L, d, geom, sigma):
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.L = L
        self.LT = L.T.tocsr()
        self.d = _sino_array(d, L)
        self.geom = geom
        self.sigma = float(sigma)
        self.n_pad = padded_size(geom.n_beamlets)
        self.dhat = _fft.rfft(self.d, n=self.n_pad, axis=1)
        self.n_image = L.shape[1]

    def evaluate(self, w, centers):
        """Value, image gradient, and d(value)/d(center) per angle."""
        m, n_taus = self.d.shape
        bank, dbank = _kernel_bank(
            centers, self.sigma, self.geom.spacing, self.n_pad, with_derivative=True
        )
        spectra = _fft.rfft(np.concatenate([bank, dbank], axis=0), axis=1)
        conv = _fft.irfft(
            np.concatenate([self.dhat * spectra[:m], self.dhat * spectra[m:]], axis=0),
            n=self.n_pad,
            axis=1,
        )
        g = conv[:m, :n_taus]
        dg = conv[m:, :n_taus]
        r = self.L @ w
        r -= g.ravel()
        value = 0.5 * float(r @ r)
        grad_w = self.LT @ r
        # d(value)/d(center_theta) = -<r_theta, d g_theta / d center_theta>
        dval_dc = -np.einsum("ij,ij->i", r.reshape(m, n_taus), dg)
        return value, grad_w, dval_dc


def _broadcast_cor(x_star, y_star, n_angles):
    xs = np.atleast_1d(np.asarray(x_star, dtype=float)).ravel()
    ys = np.atleast_1d(np.asarray(y_star, dtype=float)).ravel()
    if xs.size != ys.size or xs.size not in (1, n_angles):
        raise ValueError(
            f"need 1 or {n_angles} CoR coordinates per axis, got {xs.size} and {ys.size}"
        )
    return xs, ys


def phi_explicit(w, x_star, y_star, d, L, sigma, geom):
    """Joint misfit over the image and CoR coordinates.

    A single (x*, y*) pair is broadcast to every angle; otherwise one pair
    per angle.  Gradient blocks: L^T r for the image, and chain-rule
    contractions of the kernel-center derivative with dP/dx* = 1 - cos(theta)
    and dP/dy* = sin(theta) for the coordinates.
    """
    core = _AlignedMisfit(L, d, geom, sigma)
    xs, ys = _broadcast_cor(x_star, y_star, geom.n_angles)
    shifts = shift_amount(geom.angles, xs, ys)
    v = _image_vec(w, L.shape[1])
    value, grad_w, dval_dc = core.evaluate(v, -shifts)
    # center = -P, so d(value)/dP = -dval_dc.
    dval_dp = -dval_dc
    gx = dval_dp * (1.0 - np.cos(geom.angles))
    gy = dval_dp * np.sin(geom.angles)
    if xs.size == 1:
        aux = np.array([gx.sum(), gy.sum()])
    else:
        aux = np.concatenate([gx, gy])
    return ObjectiveReport(value=value, gradient=np.concatenate([grad_w, aux]))


def phi_implicit(w, p, d, L, sigma, geom):
    """Joint misfit over the image and free per-angle shifts."""
    p = np.asarray(getattr(p, "p", p), dtype=float).ravel()
    if p.size != geom.n_angles:
        raise ValueError(f"need {geom.n_angles} shifts, got {p.size}")
    core = _AlignedMisfit(L, d, geom, sigma)
    v = _image_vec(w, L.shape[1])
    value, grad_w, dval_dc = core.evaluate(v, -p)
    return ObjectiveReport(value=value, gradient=np.concatenate([grad_w, -dval_dc]))


def laplacian(w2d):
    """Five-point discrete Laplacian with zero (Dirichlet) boundary."""
    out = -4.0 * w2d
    out[:-1, :] += w2d[1:, :]
    out[1:, :] += w2d[:-1, :]
    out[:, :-1] += w2d[:, 1:]
    out[:, 1:] += w2d[:, :-1]
    return out


def phi_l2(w, d, L, lam):
    """Standard misfit plus lambda * ||Laplacian(w)||^2."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    rep = phi_standard(w, d, L)
    if lam == 0:
        return rep
    n = int(round(np.sqrt(L.shape[1])))
    w2d = _image_vec(w, L.shape[1]).reshape(n, n)
    lw = laplacian(w2d)
    value = rep.value + lam * float(np.sum(lw * lw))
    # The stencil is symmetric, so the penalty gradient is 2 lam * Lap(Lap w).
    grad = rep.gradient + 2.0 * lam * laplacian(lw).ravel()
    return ObjectiveReport(value=value, gradient=grad)


def _tv_terms(w2d, eps):
    gx = np.zeros_like(w2d)
    gy = np.zeros_like(w2d)
    gx[:, :-1] = w2d[:, 1:] - w2d[:, :-1]
    gy[:-1, :] = w2d[1:, :] - w2d[:-1, :]
    t = np.sqrt(gx * gx + gy * gy + eps * eps)
    return gx, gy, t


def phi_tv(w, d, L, lam, eps_huber=1e-6):
    """Standard misfit plus smoothed isotropic total variation.

    Forward differences with replicate boundary; each pixel contributes
    ``sqrt(|grad|^2 + eps^2)`` so the penalty is differentiable everywhere.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if eps_huber <= 0:
        raise ValueError(f"eps_huber must be positive, got {eps_huber}")
    rep = phi_standard(w, d, L)
    if lam == 0:
        return rep
    n = int(round(np.sqrt(L.shape[1])))
    w2d = _image_vec(w, L.shape[1]).reshape(n, n)
    gx, gy, t = _tv_terms(w2d, eps_huber)
    value = rep.value + lam * float(t.sum())
    ax = gx / t
    ay = gy / t
    tv_grad = -(ax + ay)
    tv_grad[:, 1:] += ax[:, :-1]
    tv_grad[1:, :] += ay[:-1, :]
    grad = rep.gradient + lam * tv_grad.ravel()
    return ObjectiveReport(value=value, gradient=grad)


# ---------------------------------------------------------------------------
# Problem wrappers: stacked-variable callables with bounds, initial points and
# preconditioners, ready to hand to the solver.
# ---------------------------------------------------------------------------


def _diag_precondition(L, n_aux):
    diag = np.asarray(L.multiply(L).sum(axis=0)).ravel()
    floor = 1e-8 * max(diag.max(), 1.0)
    np.maximum(diag, floor, out=diag)
    return np.concatenate([diag, np.ones(n_aux)])


class StandardProblem:
    """phi_standard over the image alone (no auxiliary variables)."""

    n_aux = 0

    def __init__(self, L, d, geom):
        self.L = L
        self.LT = L.T.tocsr()
        self.dvec = _sino_array(d, L).ravel()
        self.n_image = L.shape[1]
        self.geom = geom

    def initial(self):
        return np.zeros(self.n_image + self.n_aux)

    def lower_bounds(self):
        lb = np.full(self.n_image + self.n_aux, -np.inf)
        lb[: self.n_image] = 0.0
        return lb

    def preconditioner(self):
        return _diag_precondition(self.L, self.n_aux)

    def image_of(self, x):
        n = int(round(np.sqrt(self.n_image)))
        return Image(n=n, values=np.maximum(x[: self.n_image], 0.0))

    def __call__(self, x):
        r = self.L @ x[: self.n_image]
        r -= self.dvec
        return ObjectiveReport(value=0.5 * float(r @ r), gradient=self.LT @ r)


class L2Problem(StandardProblem):
    """Laplacian-regularized misfit over the image."""

    def __init__(self, L, d, geom, lam):
        super().__init__(L, d, geom)
        if lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)
        self.n = int(round(np.sqrt(self.n_image)))

    def __call__(self, x):
        rep = super().__call__(x)
        if self.lam == 0:
            return rep
        lw = laplacian(x[: self.n_image].reshape(self.n, self.n))
        rep.value += self.lam * float(np.sum(lw * lw))
        rep.gradient += 2.0 * self.lam * laplacian(lw).ravel()
        return rep


class TVProblem(StandardProblem):
    """Smoothed-TV-regularized misfit over the image."""

    def __init__(self, L, d, geom, lam, eps_huber=1e-6):
        super().__init__(L, d, geom)
        if lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        if eps_huber <= 0:
            raise ValueError(f"eps_huber must be positive, got {eps_huber}")
        self.lam = float(lam)
        self.eps = float(eps_huber)
        self.n = int(round(np.sqrt(self.n_image)))

    def __call__(self, x):
        rep = super().__call__(x)
        if self.lam == 0:
            return rep
        gx, gy, t = _tv_terms(x[: self.n_image].reshape(self.n, self.n), self.eps)
        rep.value += self.lam * float(t.sum())
        ax = gx / t
        ay = gy / t
        tv_grad = -(ax + ay)
        tv_grad[:, 1:] += ax[:, :-1]
        tv_grad[1:, :] += ay[:-1, :]
        rep.gradient += self.lam * tv_grad.ravel()
        return rep


class ExplicitProblem:
    """Joint image + CoR recovery; aux is (x*, y*) or per-angle pairs.

    Variable layout: ``[w, x*..., y*...]`` with 1 or n_angles entries per
    coordinate block.
    """

    def __init__(self, L, d, geom, sigma, per_angle=False):
        self.core = _AlignedMisfit(L, d, geom, sigma)
        self.geom = geom
        self.per_angle = bool(per_angle)
        self.n_image = L.shape[1]
        self.n_cor = geom.n_angles if per_angle else 1
        self.n_aux = 2 * self.n_cor
        self._one_minus_cos = 1.0 - np.cos(geom.angles)
        self._sin = np.sin(geom.angles)

    def initial(self, x_star=0.0, y_star=0.0):
        x = np.zeros(self.n_image + self.n_aux)
        x[self.n_image : self.n_image + self.n_cor] = x_star
        x[self.n_image + self.n_cor :] = y_star
        return x

    def lower_bounds(self):
        lb = np.full(self.n_image + self.n_aux, -np.inf)
        lb[: self.n_image] = 0.0
        return lb

    def preconditioner(self):
        return _diag_precondition(self.core.L, self.n_aux)

    def split(self, x):
        w = x[: self.n_image]
        xs = x[self.n_image : self.n_image + self.n_cor]
        ys = x[self.n_image + self.n_cor :]
        return w, xs, ys

    def image_of(self, x):
        n = int(round(np.sqrt(self.n_image)))
        return Image(n=n, values=np.maximum(x[: self.n_image], 0.0))

    def shifts_of(self, x):
        _, xs, ys = self.split(x)
        return shift_amount(self.geom.angles, xs if self.per_angle else xs[0],
                            ys if self.per_angle else ys[0])

    def __call__(self, x):
        w, xs, ys = self.split(x)
        shifts = shift_amount(
            self.geom.angles,
            xs if self.per_angle else xs[0],
            ys if self.per_angle else ys[0],
        )
        value, grad_w, dval_dc = self.core.evaluate(w, -shifts)
        dval_dp = -dval_dc
        gx = dval_dp * self._one_minus_cos
        gy = dval_dp * self._sin
        if not self.per_angle:
            gx = np.array([gx.sum()])
            gy = np.array([gy.sum()])
        return ObjectiveReport(
            value=value, gradient=np.concatenate([grad_w, gx, gy])
        )


class ImplicitProblem:
    """Joint image + per-angle shift recovery; variable layout ``[w, p]``."""

    def __init__(self, L, d, geom, sigma):
        self.core = _AlignedMisfit(L, d, geom, sigma)
        self.geom = geom
        self.n_image = L.shape[1]
        self.n_aux = geom.n_angles

    def initial(self, p=0.0):
        x = np.zeros(self.n_image + self.n_aux)
        x[self.n_image :] = p
        return x

    def lower_bounds(self):
        lb = np.full(self.n_image + self.n_aux, -np.inf)
        lb[: self.n_image] = 0.0
        return lb

    def preconditioner(self):
        return _diag_precondition(self.core.L, self.n_aux)

    def image_of(self, x):
        n = int(round(np.sqrt(self.n_image)))
        return Image(n=n, values=np.maximum(x[: self.n_image], 0.0))

    def shifts_of(self, x):
        return x[self.n_image :].copy()

    def __call__(self, x):
        w = x[: self.n_image]
        p = x[self.n_image :]
        value, grad_w, dval_dc = self.core.evaluate(w, -p)
        return ObjectiveReport(
            value=value, gradient=np.concatenate([grad_w, -dval_dc])
        )
