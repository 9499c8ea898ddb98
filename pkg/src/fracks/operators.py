"""Spectral multipliers on the torus: fractional Laplacians, the attractive
drift, Sobolev seminorms and low-mode projections.

Also a real-space singular-integral evaluation of the fractional Laplacian,
kept independent of the FFT path so the two can cross-validate.
"""

from __future__ import annotations

from functools import lru_cache

import mpmath
import numpy as np
from scipy import ndimage
from scipy.special import gamma

from .errors import ConfigurationError, InputError
from .torus import Grid, ScalarField, VectorField, dealias, ifft_real


def _check_alpha(alpha, upper_inclusive=True):
    ok = 0 < alpha <= 2 if upper_inclusive else 0 < alpha < 2
    if not ok:
        interval = "(0, 2]" if upper_inclusive else "(0, 2)"
        raise ConfigurationError(f"alpha must lie in {interval}, got {alpha}", key="alpha")


def beta_range(d: int) -> tuple[float, float]:
    """Admissible drift orders: [2, d], and beta = d = 1 in one dimension."""
    return (min(2.0, d), float(d))


def _check_beta(beta, d):
    lo, hi = beta_range(d)
    if not lo <= beta <= hi:
        raise ConfigurationError(f"beta must lie in [{lo:g}, {hi:g}] for d={d}, got {beta}", key="beta")


def frac_laplacian_coef(grid: Grid, coef: np.ndarray, alpha: float) -> np.ndarray:
    return grid.power(alpha) * coef


def frac_laplacian(field: ScalarField, alpha: float) -> ScalarField:
    """(-Laplacian)^(alpha/2) via the symbol |kappa|^alpha."""
    _check_alpha(alpha)
    return ScalarField(field.grid, coef=frac_laplacian_coef(field.grid, field.coef, alpha))


def inv_frac_laplacian(field: ScalarField, s: float) -> ScalarField:
    """(-Laplacian)^(-s/2) on the mean-zero part; the mean maps to 0."""
    if s <= 0:
        raise ConfigurationError(f"inverse order must be positive, got {s}", key="s")
    return ScalarField(field.grid, coef=field.grid.power(-s) * field.coef)


def frac_constant(alpha: float, d: int) -> float:
    """C_{alpha,d} = 2^alpha Gamma((d+alpha)/2) / (pi^(d/2) |Gamma(-alpha/2)|)."""
    if not 0 < alpha < 2:
        raise ConfigurationError(f"C_(alpha,d) needs 0 < alpha < 2, got {alpha}", key="alpha")
    return float(2.0**alpha * gamma(0.5 * (d + alpha)) / (np.pi ** (0.5 * d) * abs(gamma(-0.5 * alpha))))


# --- drift ----------------------------------------------------------------


def drift_coefs(grid: Grid, coef: np.ndarray, beta: float) -> list[np.ndarray]:
    """Spectral components of B(rho) = grad (-Laplacian)^(-(d+2-beta)/2) rho."""
    pot = grid.power(-(grid.d + 2 - beta)) * coef
    return [1j * kap * pot for kap in grid.kappa]


def drift_divergence_coef(grid: Grid, coef: np.ndarray, beta: float) -> np.ndarray:
    """div B(rho) = -(-Laplacian)^((beta-d)/2) (rho - mean)."""
    if beta == grid.d:
        out = -coef.copy()
        out[(0,) * grid.d] = 0.0
        return out
    return -grid.power(beta - grid.d) * coef


def attractive_drift(field: ScalarField, beta: float) -> VectorField:
    _check_beta(beta, field.grid.d)
    return VectorField([ScalarField(field.grid, coef=c) for c in drift_coefs(field.grid, field.coef, beta)])


def div_rho_drift_coef(grid: Grid, coef: np.ndarray, beta: float) -> np.ndarray:
    """Dealiased coefficients of div(rho B(rho)) = grad rho . B + rho div B."""
    c = dealias(grid, coef)
    rho = ifft_real(c)
    divb = ifft_real(drift_divergence_coef(grid, c, beta))
    acc = rho * divb
    pot = grid.power(-(grid.d + 2 - beta)) * c
    for kap in grid.kappa:
        acc = acc + ifft_real(1j * kap * c) * ifft_real(1j * kap * pot)
    from .torus import fft

    return dealias(grid, fft(acc))


def div_rho_drift(field: ScalarField, beta: float) -> ScalarField:
    _check_beta(beta, field.grid.d)
    return ScalarField(field.grid, coef=div_rho_drift_coef(field.grid, field.coef, beta))


def gradient(field: ScalarField) -> VectorField:
    return VectorField([ScalarField(field.grid, coef=1j * kap * field.coef) for kap in field.grid.kappa])


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    total = sum(1j * kap * c.coef for kap, c in zip(grid.kappa, v.components))
    return ScalarField(grid, coef=total)


# --- norms and projections -------------------------------------------------


def sobolev_seminorm(field: ScalarField, s: float) -> float:
    """(sum_{k != 0} |kappa|^(2s) |f_hat(k)|^2)^(1/2)."""
    if s < 0:
        raise ConfigurationError(f"Sobolev order must be >= 0, got {s}", key="s")
    w = field.grid.power(2.0 * s) if s > 0 else (field.grid.kappa_sq > 0).astype(float)
    return float(np.sqrt(np.sum(w * np.abs(field.coef) ** 2)))


def sobolev_norm(field: ScalarField, s: float) -> float:
    """||f||_{L^2} + |f|_{H^s-dot}, the tracked H^s size."""
    return float(np.sqrt(np.sum(np.abs(field.coef) ** 2))) + sobolev_seminorm(field, s)


def low_mode_mask(grid: Grid, N: int) -> np.ndarray:
    if N < 1:
        raise ConfigurationError(f"projection rank must be >= 1, got {N}", key="N")
    if N > grid.size:
        raise ConfigurationError(f"projection rank {N} exceeds the {grid.size} lattice modes", key="N")
    mask = np.zeros(grid.size, dtype=bool)
    mask[grid.low_mode_order[:N]] = True
    return mask.reshape(grid.shape)


def project_low(field: ScalarField, N: int) -> ScalarField:
    """Keep the N lowest modes of (-Laplacian), ties in lexicographic k order.

    N is meant to sit at an eigenspace boundary (1, 5, 9, 13, ... in 2-d);
    mid-shell cuts keep only part of a conjugate pair and the result is then
    the real part of a non-symmetric projection.
    """
    mask = low_mode_mask(field.grid, N)
    return ScalarField(field.grid, coef=np.where(mask, field.coef, 0.0))


def low_mode_energy(field: ScalarField, N: int) -> float:
    """||P_N f||^2 computed directly from the coefficients."""
    mask = low_mode_mask(field.grid, N)
    return float(np.sum(np.abs(field.coef[mask]) ** 2))


# --- real-space singular integral -----------------------------------------


@lru_cache(maxsize=None)
def lattice_zeta(d: int, s: float) -> float:
    """Epstein zeta sum'_{j in Z^d} |j|^-s, analytically continued in s.

    d = 1: 2 zeta(s). d = 2: 4 zeta(s/2) beta(s/2) (Dirichlet beta).
    """
    if d == 1:
        return float(2 * mpmath.zeta(s))
    if d == 2:
        return float(4 * mpmath.zeta(s / 2) * mpmath.dirichlet(s / 2, [0, 1, 0, -1]))
    raise ConfigurationError("singular-integral quadrature is implemented for d = 1, 2", key="d")


@lru_cache(maxsize=None)
def _image_kernel(d: int, n: int, alpha: float, image_radius: int) -> np.ndarray:
    """sum_{|k|_inf <= R} |z + k|^-(d+alpha) at grid offsets z, z = 0 entry zeroed.

    Indexed in FFT order: entry j is the offset j*h (mod 1).
    """
    h = 1.0 / n
    off = h * np.where(np.arange(n) < n // 2, np.arange(n), np.arange(n) - n)
    imgs = np.arange(-image_radius, image_radius + 1, dtype=float)
    if d == 1:
        z = off[:, None] + imgs[None, :]
        with np.errstate(divide="ignore"):
            ker = np.abs(z) ** (-(1 + alpha))
        ker[0, image_radius] = 0.0
        return ker.sum(axis=1)
    if d == 2:
        ker = np.zeros((n, n))
        zx2 = (off[:, None] + imgs[None, :]) ** 2  # (offsets, images)
        for i in range(n):
            r2 = zx2[i][None, :, None] + zx2[:, None, :]  # (column offsets, kx, ky)
            with np.errstate(divide="ignore"):
                vals = r2 ** (-(2 + alpha) / 2)
            if i == 0:
                vals[0, image_radius, image_radius] = 0.0
            ker[i] = vals.sum(axis=(1, 2))
        return ker
    raise ConfigurationError("singular-integral quadrature is implemented for d = 1, 2", key="d")


@lru_cache(maxsize=None)
def image_tail_constant(d: int, alpha: float, image_radius: int) -> float:
    """sum_{|k|_inf > R} |k|^-(d+alpha): the far-image kernel, frozen at z = 0."""
    ks = np.arange(-image_radius, image_radius + 1, dtype=float)
    grids = np.meshgrid(*([ks] * d), indexing="ij")
    r2 = sum(g * g for g in grids)
    with np.errstate(divide="ignore"):
        inner = np.where(r2 > 0, r2 ** (-(d + alpha) / 2), 0.0)
    return lattice_zeta(d, d + alpha) - float(inner.sum())


def image_tail_error(d: int, alpha: float, image_radius: int) -> float:
    """Bound on what freezing the far images at z = 0 misses, relative to C*(f - mean).

    The far-image kernel varies by at most a factor (1 +- 1/R)^-(d+alpha)
    across the cell; integral test on the shells |k|_inf > R.
    """
    R = image_radius
    shells = 2 * d * (2 * R + 1) ** (d - 1)
    return (d + alpha) / R * image_tail_constant(d, alpha, R) + shells * R ** (-(d + alpha)) / R


_D2_STENCIL = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def _fd_laplacian(samples: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central-difference Laplacian, periodic."""
    out = np.zeros_like(samples)
    for axis in range(samples.ndim):
        for offset, w in zip(range(-3, 4), _D2_STENCIL):
            out += w * np.roll(samples, offset, axis=axis)
    return out / (h * h)


def _quadrature_pieces(field: ScalarField, alpha: float, image_radius: int):
    grid = field.grid
    d, n, h = grid.d, grid.n, grid.h
    if d not in (1, 2):
        raise ConfigurationError("singular-integral quadrature is implemented for d = 1, 2", key="d")
    _check_alpha(alpha, upper_inclusive=False)
    if image_radius < 1:
        raise ConfigurationError("image_radius must be >= 1", key="image_radius")
    ker = _image_kernel(d, n, float(alpha), int(image_radius))
    # singular-cell correction: generalized Euler-Maclaurin term for |z|^(2-d-alpha)
    corr = lattice_zeta(d, d + alpha - 2) / (2 * d) * h ** (2 - alpha)
    tail = image_tail_constant(d, float(alpha), int(image_radius))
    return grid, ker, corr, tail


def frac_laplacian_quadrature(field: ScalarField, alpha: float, x, image_radius: int = 32) -> float:
    """Evaluate the periodic singular integral for (-Laplacian)^(alpha/2) f at node ``x``.

    Midpoint sum over the punctured grid against the image-summed kernel,
    the singular cell accounted for by the lattice-zeta correction
    (Delta f from finite differences), images beyond ``image_radius`` folded
    into a constant far-field kernel.
    """
    idx = tuple(np.atleast_1d(x).tolist()) if not isinstance(x, tuple) else x
    if not field.grid.contains_node(idx):
        raise InputError(f"{x!r} is not a grid node index of a {field.grid.d}-d grid with n={field.grid.n}")
    grid, ker, corr, tail = _quadrature_pieces(field, alpha, image_radius)
    f = field.samples
    n = grid.n
    fx = f[idx]
    # f(x - z) for every offset z, in FFT order
    shifted = f
    for axis, i in enumerate(idx):
        shifted = np.take(shifted, (i - np.arange(n)) % n, axis=axis)
    total = grid.cell_volume * np.sum((fx - shifted) * ker)
    lap = _fd_laplacian(f, grid.h)[idx]
    c = frac_constant(alpha, grid.d)
    return float(c * (total + tail * (fx - f.mean()) + corr * lap))


def frac_laplacian_quadrature_field(field: ScalarField, alpha: float, image_radius: int = 32) -> np.ndarray:
    """All-nodes version of :func:`frac_laplacian_quadrature` (direct circular sum)."""
    grid, ker, corr, tail = _quadrature_pieces(field, alpha, image_radius)
    f = field.samples
    n = grid.n
    # conv[x] = sum_z ker[z] f[x - z]; ndimage wants the kernel centered at n//2
    centered = np.roll(ker, tuple([n // 2] * grid.d), axis=tuple(range(grid.d)))
    conv = ndimage.convolve(f, centered, mode="wrap")
    total = grid.cell_volume * (f * ker.sum() - conv)
    lap = _fd_laplacian(f, grid.h)
    c = frac_constant(alpha, grid.d)
    return c * (total + tail * (f - f.mean()) + corr * lap)
