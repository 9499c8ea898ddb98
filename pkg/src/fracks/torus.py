"""Uniform grids on the unit torus [-1/2, 1/2)^d and spectral fields on them.

Spectral coefficients are normalized so that the k = 0 coefficient equals
the sample mean, and carry the phase of the box origin at -1/2, i.e.

    f_hat(k) = n^-d * sum_j f(x_j) exp(-i kappa . x_j),   kappa = 2 pi k.

Derivatives use the angular wavenumber kappa, so (-Laplacian) <-> |kappa|^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, InputError

SUPPORTED_DIMS = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid with ``n`` points per axis in ``d`` dimensions."""

    d: int
    n: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.d, self.n) == (other.d, other.n)

    def __hash__(self):
        return hash((self.d, self.n))

    @cached_property
    def nodes_1d(self) -> np.ndarray:
        return -0.5 + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one broadcastable array per axis."""
        return tuple(
            self.nodes_1d.reshape([-1 if a == i else 1 for a in range(self.d)])
            for i in range(self.d)
        )

    @cached_property
    def k1d(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, covering {-n/2, ..., n/2 - 1}."""
        return np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n)).astype(int)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumber per axis, broadcastable to the spectral shape."""
        return tuple(
            self.k1d.reshape([-1 if a == i else 1 for a in range(self.d)])
            for i in range(self.d)
        )

    @cached_property
    def kappa(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers 2 pi k with the Nyquist entry zeroed.

        Used for odd-order derivatives, so the Nyquist row never produces an
        imaginary sample.
        """
        out = []
        for ki in self.k:
            kap = 2.0 * np.pi * ki.astype(float)
            kap[ki == -self.n // 2] = 0.0
            out.append(kap)
        return tuple(out)

    @cached_property
    def kappa_sq(self) -> np.ndarray:
        """|kappa|^2 over the full lattice (Nyquist included)."""
        total = np.zeros(self.shape)
        for ki in self.k:
            total = total + (2.0 * np.pi * ki) ** 2
        return total

    @cached_property
    def kappa_abs(self) -> np.ndarray:
        return np.sqrt(self.kappa_sq)

    @cached_property
    def kmax_abs(self) -> np.ndarray:
        """max_i |k_i| on the lattice."""
        m = np.zeros(self.shape, dtype=int)
        for ki in self.k:
            m = np.maximum(m, np.abs(ki))
        return m

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.kmax_abs <= self.n / 3.0

    @property
    def dealias_cutoff(self) -> int:
        return int(np.floor(self.n / 3.0))

    @cached_property
    def phase(self) -> np.ndarray:
        """exp(-i kappa . x_0) for the box origin x_0 = (-1/2, ...): (-1)^(sum k)."""
        parity = np.zeros(self.shape, dtype=int)
        for ki in self.k:
            parity = parity + ki
        return np.where(parity % 2 == 0, 1.0, -1.0)

    def power(self, exponent: float) -> np.ndarray:
        """|kappa|^exponent with the zero mode mapped to 0."""
        out = np.zeros(self.shape)
        nz = self.kappa_sq > 0
        out[nz] = self.kappa_sq[nz] ** (0.5 * exponent)
        return out

    @cached_property
    def low_mode_order(self) -> np.ndarray:
        """Flat lattice indices sorted by |kappa|^2, ties broken lexicographically in k."""
        keys = [ki.astype(float) * np.ones(self.shape) for ki in self.k]
        # np.lexsort sorts by the last key first.
        order = np.lexsort([key.ravel() for key in reversed(keys)] + [self.kappa_sq.ravel()])
        return order

    def contains_node(self, index: Sequence[int]) -> bool:
        return len(index) == self.d and all(
            isinstance(i, (int, np.integer)) and 0 <= i < self.n for i in index
        )


def make_grid(d: int, n: int) -> Grid:
    """Build a grid; ``n`` must be even and at least 8."""
    if d not in SUPPORTED_DIMS:
        raise ConfigurationError(f"unsupported dimension {d}", key="d")
    if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
        raise ConfigurationError(f"n must be an even integer >= 8, got {n!r}", key="n")
    return Grid(int(d), int(n))


def fft(samples: np.ndarray) -> np.ndarray:
    """Raw normalized forward transform (origin phase not applied)."""
    return sfft.fftn(samples, norm="forward")


def ifft_real(coef: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coef, norm="forward").real


class ScalarField:
    """Real samples on a grid with lazily synchronized spectral coefficients.

    ``coef`` holds the raw normalized FFT (no origin phase). ``spectral``
    exposes the phase-corrected coefficients described in the module docs.
    """

    __slots__ = ("grid", "_samples", "_coef")

    def __init__(self, grid: Grid, samples=None, coef=None):
        if samples is None and coef is None:
            raise InputError("ScalarField needs samples or coefficients")
        if samples is not None:
            samples = np.asarray(samples, dtype=float)
            if samples.shape != grid.shape:
                samples = samples.reshape(grid.shape)
        if coef is not None and coef.shape != grid.shape:
            raise InputError(f"coefficient shape {coef.shape} does not match grid {grid.shape}")
        self.grid = grid
        self._samples = samples
        self._coef = coef

    @classmethod
    def from_spectral(cls, grid: Grid, spectral: np.ndarray) -> "ScalarField":
        """Build from phase-corrected coefficients (the ``spectral`` convention)."""
        return cls(grid, coef=np.asarray(spectral, dtype=complex) * grid.phase)

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples = ifft_real(self._coef)
        return self._samples

    @property
    def coef(self) -> np.ndarray:
        if self._coef is None:
            self._coef = fft(self._samples)
        return self._coef

    @property
    def spectral(self) -> np.ndarray:
        return self.coef * self.grid.phase

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, samples=self.samples.copy())

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, samples=self.samples + other.samples)
        return ScalarField(self.grid, samples=self.samples + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, samples=self.samples - other.samples)
        return ScalarField(self.grid, samples=self.samples - other)

    def __mul__(self, c):
        return ScalarField(self.grid, samples=self.samples * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ScalarField(d={self.grid.d}, n={self.grid.n})"


class VectorField:
    """``d`` scalar components on a shared grid."""

    def __init__(self, components: Sequence[ScalarField]):
        components = list(components)
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise InputError("vector components live on different grids")
        if len(components) != grid.d:
            raise InputError(f"expected {grid.d} components, got {len(components)}")
        self.grid = grid
        self.components = components

    def __getitem__(self, i) -> ScalarField:
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def samples(self) -> np.ndarray:
        return np.stack([c.samples for c in self.components])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c.samples**2 for c in self.components))


def from_function(grid: Grid, f: Callable[..., np.ndarray]) -> ScalarField:
    """Sample ``f(x1, ..., xd)`` at the grid nodes (f must broadcast)."""
    values = np.broadcast_to(np.asarray(f(*grid.coords), dtype=float), grid.shape).copy()
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise InputError(f"non-finite initial value at node {tuple(int(i) for i in bad)}")
    return ScalarField(grid, samples=values)


def transform(field: ScalarField) -> np.ndarray:
    return field.spectral


def inverse_transform(grid: Grid, spectral: np.ndarray) -> np.ndarray:
    if spectral.shape != grid.shape:
        raise InputError(f"spectral shape {spectral.shape} does not match grid {grid.shape}")
    return ifft_real(spectral * grid.phase)


def dealias(grid: Grid, coef: np.ndarray) -> np.ndarray:
    """Zero every mode with max_i |k_i| > n/3 (2/3 rule)."""
    return np.where(grid.dealias_mask, coef, 0.0)


def lp_norm(field: ScalarField, p: float) -> float:
    if p < 1:
        raise ConfigurationError(f"L^p exponent must be >= 1, got {p}", key="p")
    a = np.abs(field.samples)
    if np.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.mean())
    if p == 2:
        return float(np.sqrt(np.mean(a * a)))
    return float(np.mean(a**p) ** (1.0 / p))


def mean(field: ScalarField) -> float:
    return float(field.samples.mean())


def l2_inner(f: ScalarField, g: ScalarField) -> float:
    return float(np.mean(f.samples * g.samples))


def parseval_energy(field: ScalarField) -> float:
    """sum_k |f_hat(k)|^2, equal to ||f||_{L^2}^2 on the unit box."""
    return float(np.sum(np.abs(field.coef) ** 2))


# --- snapshot files -------------------------------------------------------


def write_snapshot(path, field: ScalarField, *, t=0.0, alpha=None, beta=None, A=None,
                   field_name="rho") -> tuple[Path, Path]:
    """Write ``<path>.json`` (header) and ``<path>.f64`` (little-endian samples)."""
    base = Path(path)
    if base.suffix in (".json", ".f64"):
        base = base.with_suffix("")
    header = {
        "d": field.grid.d,
        "n": field.grid.n,
        "t": float(t),
        "alpha": alpha,
        "beta": beta,
        "A": A,
        "field_name": field_name,
    }
    json_path = base.with_name(base.name + ".json")
    bin_path = base.with_name(base.name + ".f64")
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    np.ascontiguousarray(field.samples, dtype="<f8").tofile(bin_path)
    return json_path, bin_path


def read_snapshot(path) -> tuple[ScalarField, dict]:
    base = Path(path)
    if base.suffix in (".json", ".f64"):
        base = base.with_suffix("")
    json_path = base.with_name(base.name + ".json")
    bin_path = base.with_name(base.name + ".f64")
    if not json_path.exists() or not bin_path.exists():
        raise InputError(f"snapshot pair {json_path} / {bin_path} not found")
    header = json.loads(json_path.read_text())
    grid = make_grid(header["d"], header["n"])
    data = np.fromfile(bin_path, dtype="<f8")
    if data.size != grid.size:
        raise InputError(f"{bin_path}: expected {grid.size} samples, found {data.size}")
    return ScalarField(grid, samples=data.reshape(grid.shape)), header
