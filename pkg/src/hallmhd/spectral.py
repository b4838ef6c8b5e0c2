"""Fourier infrastructure on the periodic cube [0, P)^3.

Fields are stored as normalized Fourier-series coefficients in the real-FFT
half-spectrum layout ``(..., n, n, n//2 + 1)``: a real field ``v`` has

    v(x) = sum_m c_m exp(i xi_m . x),    xi_m = 2 pi m / P,

so a constant field has ``c_0`` equal to that constant.  The negative-``m_z``
half of the lattice is implied by Hermitian symmetry, ``c_{-m} = conj(c_m)``.
Only the ``m_z = 0`` (and Nyquist) planes carry redundant entries; those are
what :func:`hermitian_defect` inspects and :func:`symmetrize` repairs.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "SpectralField",
    "ScalarSpectralField",
    "forward_transform",
    "inverse_transform",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "sqrt_neg_laplacian",
    "leray_project",
    "dealias",
    "partial",
    "multi_indices",
    "hermitian_defect",
    "symmetrize",
    "resample",
]

_AXES = (-3, -2, -1)


def fft_workers() -> int:
    """Thread cap for the FFT backend, from ``HALLMHD_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HALLMHD_THREADS", "1")))
    except ValueError:
        return 1


def _rfft(x: np.ndarray) -> np.ndarray:
    return sfft.rfftn(x, axes=_AXES, norm="forward", workers=fft_workers())


def _irfft(c: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfftn(c, s=(n, n, n), axes=_AXES, norm="forward", workers=fft_workers())


@functools.lru_cache(maxsize=None)
def multi_indices(order: int, exact: bool = False) -> tuple[tuple[int, int, int], ...]:
    """All 3-D multi-indices with ``|alpha| <= order`` (``== order`` if ``exact``)."""
    out = []
    lo = order if exact else 0
    for total in range(lo, order + 1):
        for a in range(total, -1, -1):
            for b in range(total - a, -1, -1):
                out.append((a, b, total - a - b))
    return tuple(out)


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic lattice with ``n`` points per axis and side ``period``.

    ``dealias_mask`` keeps modes with every ``|m_axis| < n/3``.  The
    derivative wavenumbers ``kx, ky, kz`` are zero on the Nyquist index so that
    odd-order derivatives of real data stay real.
    """

    n: int
    period: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {n!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")

    # -- lattice tables -------------------------------------------------
    @functools.cached_property
    def lattice_index(self) -> np.ndarray:
        """Integer lattice index per axis in FFT order, covering [-n/2, n/2)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @functools.cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers 2 pi m / P per axis (FFT order)."""
        return 2.0 * np.pi * self.lattice_index / self.period

    @functools.cached_property
    def dk(self) -> float:
        return 2.0 * np.pi / self.period

    @functools.cached_property
    def _kd(self) -> np.ndarray:
        k = self.wavenumbers.copy()
        k[self.n // 2] = 0.0
        return k

    @functools.cached_property
    def kx(self) -> np.ndarray:
        return self._kd[:, None, None]

    @functools.cached_property
    def ky(self) -> np.ndarray:
        return self._kd[None, :, None]

    @functools.cached_property
    def kz(self) -> np.ndarray:
        return np.abs(self._kd[: self.n // 2 + 1])[None, None, :]

    @property
    def k_vec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.kx, self.ky, self.kz)

    @functools.cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2 + self.kz**2

    @functools.cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @functools.cached_property
    def inv_k2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        return out

    @functools.cached_property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @functools.cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask (half-spectrum layout) of retained modes."""
        m = np.abs(self.lattice_index)
        keep = 3 * m < self.n
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, : self.n // 2 + 1]

    @functools.cached_property
    def mode_weight(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full lattice (1 or 2)."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @functools.cached_property
    def m_max(self) -> int:
        """Largest retained lattice index per axis."""
        return (self.n - 1) // 3

    @functools.cached_property
    def k_max(self) -> float:
        """Largest retained |xi| (corner of the dealiased cube)."""
        return float(np.sqrt(3.0) * self.m_max * self.dk)

    # -- physical space -------------------------------------------------
    @property
    def h(self) -> float:
        return self.period / self.n

    @property
    def volume(self) -> float:
        return self.period**3

    @functools.cached_property
    def coords(self) -> np.ndarray:
        """Periodic coordinates centred on the origin, in [-P/2, P/2)."""
        j = np.arange(self.n)
        return np.where(j < self.n // 2, j, j - self.n) * self.h

    @functools.cached_property
    def radius(self) -> np.ndarray:
        """|x| of each grid point, measured from the origin with minimum image."""
        c = self.coords
        return np.sqrt(c[:, None, None] ** 2 + c[None, :, None] ** 2 + c[None, None, :] ** 2)

    @property
    def half_diagonal(self) -> float:
        return float(np.sqrt(3.0) * self.period / 2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unwrapped grid coordinates x_j = j h (broadcastable)."""
        x = np.arange(self.n) * self.h
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.n * factor, self.period)


class _FieldBase:
    grid: GridSpec
    coeffs: np.ndarray
    _lead: tuple[int, ...] = ()

    def __init__(self, grid: GridSpec, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected = self._lead + grid.spectral_shape
        if coeffs.shape != expected:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {expected}")
        self.grid = grid
        self.coeffs = coeffs

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, period={self.grid.period})"

    @classmethod
    def zeros(cls, grid: GridSpec):
        return cls(grid, np.zeros(cls._lead + grid.spectral_shape, dtype=np.complex128))

    def copy(self):
        return type(self)(self.grid, self.coeffs.copy())

    def real(self) -> np.ndarray:
        """Samples on the grid."""
        return _irfft(self.coeffs, self.grid.n)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return type(self)(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return type(self)(self.grid, self.coeffs / scalar)


class SpectralField(_FieldBase):
    """Real 3-vector field; ``coeffs`` has shape ``(3, n, n, n//2+1)``."""

    _lead = (3,)

    def component(self, j: int) -> "ScalarSpectralField":
        return ScalarSpectralField(self.grid, self.coeffs[j])


class ScalarSpectralField(_FieldBase):
    """Real scalar field; ``coeffs`` has shape ``(n, n, n//2+1)``."""

    _lead = ()


def forward_transform(real_field: np.ndarray, grid: GridSpec):
    """Sample array -> spectral field.

    Shape ``(3, n, n, n)`` gives a :class:`SpectralField`, ``(n, n, n)`` a
    :class:`ScalarSpectralField`.
    """
    a = np.asarray(real_field)
    if np.iscomplexobj(a):
        raise ValueError("forward_transform expects real samples")
    n = grid.n
    if a.shape == (3, n, n, n):
        return SpectralField(grid, _rfft(a.astype(np.float64, copy=False)))
    if a.shape == (n, n, n):
        return ScalarSpectralField(grid, _rfft(a.astype(np.float64, copy=False)))
    raise ValueError(f"array of shape {a.shape} is not sampled on an n={n} lattice")


def inverse_transform(field: _FieldBase) -> np.ndarray:
    return field.real()


def gradient(s: ScalarSpectralField) -> SpectralField:
    g = s.grid
    c = s.coeffs
    return SpectralField(g, np.stack([1j * g.kx * c, 1j * g.ky * c, 1j * g.kz * c]))


def divergence(v: SpectralField) -> ScalarSpectralField:
    g = v.grid
    c = v.coeffs
    return ScalarSpectralField(g, 1j * (g.kx * c[0] + g.ky * c[1] + g.kz * c[2]))


def _curl_coeffs(g: GridSpec, c: np.ndarray) -> np.ndarray:
    kx, ky, kz = g.k_vec
    return np.stack(
        [
            1j * (ky * c[2] - kz * c[1]),
            1j * (kz * c[0] - kx * c[2]),
            1j * (kx * c[1] - ky * c[0]),
        ]
    )


def curl(v: SpectralField) -> SpectralField:
    return SpectralField(v.grid, _curl_coeffs(v.grid, v.coeffs))


def laplacian(v):
    return type(v)(v.grid, -v.grid.k2 * v.coeffs)


def sqrt_neg_laplacian(v):
    """Fourier multiplier |xi|."""
    return type(v)(v.grid, v.grid.kmag * v.coeffs)


def _leray_coeffs(g: GridSpec, c: np.ndarray) -> np.ndarray:
    kx, ky, kz = g.k_vec
    kdotc = (kx * c[0] + ky * c[1] + kz * c[2]) * g.inv_k2
    return np.stack([c[0] - kx * kdotc, c[1] - ky * kdotc, c[2] - kz * kdotc])


def leray_project(v: SpectralField) -> SpectralField:
    """(I - xi xi^T / |xi|^2) v-hat; the xi = 0 mode passes through."""
    return SpectralField(v.grid, _leray_coeffs(v.grid, v.coeffs))


def dealias(v):
    return type(v)(v.grid, v.coeffs * v.grid.dealias_mask)


def partial(v, alpha: Sequence[int]):
    """Mixed partial derivative d^alpha as a spectral multiplier."""
    g = v.grid
    a, b, c = alpha
    mult = (1j * g.kx) ** a * (1j * g.ky) ** b * (1j * g.kz) ** c
    return type(v)(v.grid, mult * v.coeffs)


def _mirror(plane: np.ndarray) -> np.ndarray:
    """plane[..., -mx, -my] for an (n, n) slab (index 0 stays, others reversed)."""
    return np.roll(plane[..., ::-1, ::-1], 1, axis=(-2, -1))


def hermitian_defect(v) -> float:
    """Largest |c(-m) - conj c(m)| on the self-conjugate planes m_z = 0, n/2."""
    c = v.coeffs
    worst = 0.0
    for iz in (0, -1):
        plane = c[..., iz]
        worst = max(worst, float(np.max(np.abs(plane - np.conj(_mirror(plane))), initial=0.0)))
    return worst


def symmetrize(v):
    """Project onto exactly Hermitian-symmetric coefficients."""
    c = v.coeffs.copy()
    for iz in (0, -1):
        plane = c[..., iz]
        c[..., iz] = 0.5 * (plane + np.conj(_mirror(plane)))
    return type(v)(v.grid, c)


def resample(v, grid: GridSpec):
    """Copy the coefficients onto another grid of the same period.

    Modes present on both grids are kept (Nyquist planes dropped), so zero
    padding onto a finer grid is exact and samples the same trigonometric
    polynomial; resampling onto a coarser grid truncates.
    """
    if grid.period != v.grid.period:
        raise ValueError("resampling needs equal box periods")
    h = min(v.grid.n, grid.n) // 2
    src, dst = v.coeffs, np.zeros(v._lead + grid.spectral_shape, dtype=np.complex128)
    lo = slice(0, h)
    for sx_src, sx_dst in ((lo, lo), (slice(-h + 1, None), slice(-h + 1, None))):
        for sy_src, sy_dst in ((lo, lo), (slice(-h + 1, None), slice(-h + 1, None))):
            dst[..., sx_dst, sy_dst, lo] = src[..., sx_src, sy_src, lo]
    return type(v)(grid, dst)
