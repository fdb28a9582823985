"""Parallel-beam tomography with joint recovery of center-of-rotation drift."""

from .baselines import AlternatingConfig, alternating_reproject, mirror_align
from .geometry import (DriftModel, Geometry, Image, Sinogram, build_geometry,
                       make_single_drift, make_walk_drift, pixel_centers)
from .metrics import SsimConstants, rel_misfit, ssim, ssim_windowed
from .noise import NoiseSpec, add_noise
from .objective import (ExplicitProblem, ImplicitProblem, L2Problem,
                        ObjectiveReport, StandardProblem, TVProblem, laplacian,
                        phi_explicit, phi_implicit, phi_l2, phi_standard, phi_tv)
from .phantoms import SHEPP_LOGAN_ELLIPSES, make_disk, make_shepp_logan
from .projector import (adjoint, build_system_matrix, forward, simulate_shifted,
                        trace_ray)
from .shift import (GaussianKernel, ShiftParams, align_sinogram, default_sigma,
                    drift_shifts, gaussian_kernel, kernel_derivative,
                    padded_size, shift_amount, translate_row)
from .solver import (IterationRecord, SolverConfig, SolverReport, fd_hessian_vec,
                     ppcg, projected_gradient_norm, projected_line_search,
                     tn_minimize)

__version__ = "0.1.0"

__all__ = [
    "AlternatingConfig", "DriftModel", "ExplicitProblem", "GaussianKernel",
    "Geometry", "Image", "ImplicitProblem", "IterationRecord", "L2Problem",
    "NoiseSpec", "ObjectiveReport", "SHEPP_LOGAN_ELLIPSES", "ShiftParams",
    "Sinogram", "SolverConfig", "SolverReport", "SsimConstants",
    "StandardProblem", "TVProblem", "add_noise", "adjoint", "align_sinogram",
    "alternating_reproject", "build_geometry", "build_system_matrix",
    "default_sigma", "drift_shifts", "fd_hessian_vec", "forward",
    "gaussian_kernel", "kernel_derivative", "laplacian", "make_disk",
    "make_shepp_logan", "make_single_drift", "make_walk_drift", "mirror_align",
    "padded_size", "phi_explicit", "phi_implicit", "phi_l2", "phi_standard",
    "phi_tv", "pixel_centers", "ppcg", "projected_gradient_norm",
    "projected_line_search", "rel_misfit", "shift_amount", "simulate_shifted",
    "ssim", "ssim_windowed", "tn_minimize", "trace_ray", "translate_row",
]
