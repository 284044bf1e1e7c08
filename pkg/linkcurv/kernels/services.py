"""Closed forms of the Gaussian kernels and their inner products.

Every R^n integral of the regularized terms factorizes into one-dimensional Gaussian and
erf factors, so the quadrature module only ever sees compact parameter cubes.
"""

import numpy as np
from scipy.special import erf

from linkcurv.core.exceptions import AppValidationError, UnknownKernelError
from linkcurv.kernels.models import KERNEL_KINDS, SPATIAL_AXES, KernelKind

SQRT_2PI = np.sqrt(2.0 * np.pi)


def check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not (np.isfinite(kappa) and kappa > 0):
        raise AppValidationError(f"kappa must be positive and finite, got {kappa}")
    return kappa


def antideriv_constant(kappa: float) -> float:
    """C(kappa) = half the integral of q_kappa over R."""
    return np.sqrt(np.pi) * (2.0 * np.pi) ** -0.25 / np.sqrt(check_kappa(kappa))


def gauss_1d(kappa: float, x, t):
    """q_kappa^x(t); its square is the normal density with variance 1/kappa^2."""
    kappa = check_kappa(kappa)
    return np.sqrt(kappa) * (2.0 * np.pi) ** -0.25 * np.exp(-(kappa**2) * (t - x) ** 2 / 4.0)


def inv_antideriv_gauss(kappa: float, x, t):
    """(d^{-1} q_kappa^x)(t) = C(kappa) erf(kappa (t - x) / 2)."""
    return antideriv_constant(kappa) * erf(check_kappa(kappa) * (np.asarray(t) - x) / 2.0)


def erf_pair(kappa: float, z, x):
    """<q^z, (kappa / sqrt(2 pi)) d^{-1} q^x> = erf(kappa (z - x) / (2 sqrt 2))."""
    return erf(check_kappa(kappa) * (np.asarray(z) - np.asarray(x)) / (2.0 * np.sqrt(2.0)))


def gauss_overlap(kappa: float, delta):
    """<p^x, p^y> = exp(-kappa^2 |x - y|^2 / 8) for delta = x - y in any dimension."""
    delta = np.asarray(delta, dtype=float)
    return np.exp(-(check_kappa(kappa) ** 2) * np.sum(delta**2, axis=-1) / 8.0)


def _other_axes(axis: int) -> list[int]:
    if axis not in SPATIAL_AXES:
        raise AppValidationError(f"Kernel axis must be 1..3, got {axis}")
    return [a for a in SPATIAL_AXES if a != axis]


def kernel_a(kappa: float, sigma: np.ndarray, rho: np.ndarray, axis: int) -> np.ndarray:
    """<p^sigma, kappa d_j^{-1} p^rho>."""
    delta = sigma - rho
    gauss = gauss_overlap(kappa, delta[..., [0, *_other_axes(axis)]])
    return SQRT_2PI * erf_pair(kappa, sigma[..., axis], rho[..., axis]) * gauss


def kernel_b(kappa: float, sigma: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """kappa <d_0^{-1} p^sigma, p^rho>."""
    gauss = gauss_overlap(kappa, (sigma - rho)[..., 1:])
    return SQRT_2PI * erf_pair(kappa, rho[..., 0], sigma[..., 0]) * gauss


def kernel_c(kappa: float, sigma: np.ndarray, rho: np.ndarray, axis: int) -> np.ndarray:
    """kappa^2 <d_0^{-1} p^sigma, kappa d_j^{-1} p^rho>."""
    gauss = gauss_overlap(kappa, (sigma - rho)[..., _other_axes(axis)])
    time = erf_pair(kappa, sigma[..., 0], rho[..., 0])
    space = erf_pair(kappa, sigma[..., axis], rho[..., axis])
    return -2.0 * np.pi * kappa * time * space * gauss


def kernel_w(kappa: float, y: np.ndarray, rho: np.ndarray, axis: int) -> np.ndarray:
    """<p^y, p^rho>_k: 2D overlap off axis k times the two erf-type factors."""
    gauss = gauss_overlap(kappa, (y - rho)[..., _other_axes(axis)])
    space = erf_pair(kappa, y[..., axis], rho[..., axis])
    time = erf_pair(kappa, y[..., 0], rho[..., 0])
    return -(2.0 * np.pi / kappa) * space * time * gauss


def factorized_kernel(
    kind: KernelKind | str, kappa: float, sigma, rho, axis: int | None = None
) -> np.ndarray:
    """Dispatch to the closed-form kernel of the named term."""
    if kind not in KERNEL_KINDS:
        raise UnknownKernelError(f"Unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    kappa = check_kappa(kappa)
    sigma = np.asarray(sigma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if kind == "B":
        return kernel_b(kappa, sigma, rho)
    if axis is None:
        raise AppValidationError(f"Kernel {kind} needs an axis in 1..3")
    if kind == "A":
        return kernel_a(kappa, sigma, rho, axis)
    if kind == "C":
        return kernel_c(kappa, sigma, rho, axis)
    return kernel_w(kappa, sigma, rho, axis)
