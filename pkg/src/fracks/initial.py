"""Initial-data library: periodized bumps and random smooth positive fields."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .torus import Grid, ScalarField, dealias, fft, ifft_real


def _periodic_gaussian(grid: Grid, center, width: float) -> np.ndarray:
    out = np.ones(grid.shape)
    for axis, x in enumerate(grid.coords):
        acc = 0.0
        for img in (-2, -1, 0, 1, 2):
            acc = acc + np.exp(-0.5 * ((x - center[axis] + img) / width) ** 2)
        out = out * acc
    return out


def bump(grid: Grid, mass: float, width: float, center=None, background: float = 0.0) -> ScalarField:
    """Periodized Gaussian of the given width carrying ``mass`` on top of ``background``."""
    if mass <= 0 or width <= 0:
        raise ConfigurationError("bump needs positive mass and width", key="initial")
    center = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    g = _periodic_gaussian(grid, center, width)
    return ScalarField(grid, samples=background + mass * g / g.mean())


def two_bump(grid: Grid, mass: float, width: float, centers, background: float = 0.0) -> ScalarField:
    """Two equal bumps sharing ``mass``."""
    if len(centers) != 2:
        raise ConfigurationError("two_bump needs exactly two centers", key="initial.centers")
    a = bump(grid, 0.5 * mass, width, centers[0])
    b = bump(grid, 0.5 * mass, width, centers[1])
    return ScalarField(grid, samples=background + a.samples + b.samples)


def random_smooth(grid: Grid, seed: int, decay: float = 4.0, mean: float = 1.0, amplitude: float = 0.5,
                  kmax=None) -> ScalarField:
    """Random band-limited field with |f_hat(k)| ~ (1 + |k|)^-decay, scaled to
    ``mean`` + fluctuation of sup-norm ``amplitude`` (positive when amplitude < mean)."""
    rng = np.random.default_rng(seed)
    kmax = grid.dealias_cutoff if kmax is None else kmax
    kabs = np.sqrt(sum(k.astype(float) ** 2 for k in grid.k)) * np.ones(grid.shape)
    coef = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * (1.0 + kabs) ** (-decay)
    coef[grid.kmax_abs > kmax] = 0.0
    coef[(0,) * grid.d] = 0.0
    fluct = ifft_real(coef)  # real part only: conjugate-symmetric projection
    fluct = ifft_real(dealias(grid, fft(fluct)))
    fluct *= amplitude / np.abs(fluct).max()
    return ScalarField(grid, samples=mean + fluct)


def build_initial(grid: Grid, spec: dict) -> ScalarField:
    kind = spec.get("kind", "bump")
    if kind == "bump":
        return bump(grid, spec["mass"], spec["width"], spec.get("center"), spec.get("background", 0.0))
    if kind == "two_bump":
        return two_bump(grid, spec["mass"], spec["width"], spec["centers"], spec.get("background", 0.0))
    if kind == "random_smooth":
        return random_smooth(grid, spec.get("seed", 0), spec.get("decay", 4.0), spec.get("mean", 1.0),
                             spec.get("amplitude", 0.5), spec.get("kmax"))
    if kind == "snapshot":
        from .torus import read_snapshot

        field, _ = read_snapshot(spec["path"])
        if field.grid != grid:
            raise ConfigurationError("snapshot grid does not match the run grid", key="initial.path")
        return field
    raise ConfigurationError(f"unknown initial-data kind {kind!r}", key="initial.kind")
