"""Norms and pseudo-spectral products.

All integrals use the plain Lebesgue measure on the box (no 1/P^3
normalization), so ``||v||_{L^2}^2 = P^3 sum_m |c_m|^2``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn

from .spectral import (
    GridSpec,
    ScalarSpectralField,
    SpectralField,
    _curl_coeffs,
    _irfft,
    _rfft,
    curl,
    multi_indices,
    partial,
    resample,
)

MAX_ORDER = 5


@functools.lru_cache(maxsize=64)
def sobolev_weight(grid: GridSpec, m: int) -> np.ndarray:
    """Multiplier sum_{|alpha| <= m} xi^(2 alpha) on the half spectrum."""
    x2, y2, z2 = grid.kx**2, grid.ky**2, grid.kz**2
    w = np.zeros(grid.spectral_shape)
    for a, b, c in multi_indices(m):
        w = w + x2**a * y2**b * z2**c
    w.setflags(write=False)
    return w


def _check_order(m: int, name: str = "m"):
    if not (isinstance(m, (int, np.integer)) and 0 <= m <= MAX_ORDER):
        raise ValueError(f"{name} must be an integer in [0, {MAX_ORDER}], got {m!r}")


def _modal_energy(v) -> np.ndarray:
    c = v.coeffs
    e = np.abs(c) ** 2
    if isinstance(v, SpectralField):
        e = e.sum(axis=0)
    return e


def inner(a, b) -> float:
    """Box integral of a . b computed by Parseval."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    g = a.grid
    prod = np.real(np.conj(a.coeffs) * b.coeffs)
    if isinstance(a, SpectralField):
        prod = prod.sum(axis=0)
    return float(g.volume * np.sum(g.mode_weight * prod))


def sobolev_norm(v, m: int) -> float:
    """(sum_{|alpha|<=m} ||d^alpha v||_{L^2}^2)^(1/2) via Parseval."""
    _check_order(m)
    g = v.grid
    total = np.sum(g.mode_weight * sobolev_weight(g, m) * _modal_energy(v))
    return float(np.sqrt(g.volume * total))


def sobolev_norm_sq(v, m: int) -> float:
    return sobolev_norm(v, m) ** 2


def gradient_sobolev_norm_sq(v, m: int) -> float:
    """||grad v||_{H^m}^2 = sum_j ||d_j v||_{H^m}^2."""
    _check_order(m)
    g = v.grid
    total = np.sum(g.mode_weight * g.k2 * sobolev_weight(g, m) * _modal_energy(v))
    return float(g.volume * total)


def _pointwise_sq(v) -> np.ndarray:
    r = v.real()
    return (r**2).sum(axis=0) if isinstance(v, SpectralField) else r**2


@functools.lru_cache(maxsize=16)
def ball_weights(grid: GridSpec, r: float, sub: int = 6) -> np.ndarray:
    """Volume fraction of each lattice cell inside |x| <= r (minimum image).

    Cells cut by the sphere are sub-sampled on a sub^3 lattice.
    """
    half = 0.5 * math.sqrt(3.0) * grid.h
    rad = grid.radius
    w = (rad <= r - half).astype(float)
    edge = np.nonzero(np.abs(rad - r) < half)
    c = grid.coords
    cx, cy, cz = c[edge[0]], c[edge[1]], c[edge[2]]
    offsets = ((np.arange(sub) + 0.5) / sub - 0.5) * grid.h
    inside = np.zeros(len(cx))
    for ox in offsets:
        for oy in offsets:
            d2 = (cx + ox) ** 2 + (cy + oy) ** 2
            for oz in offsets:
                inside += d2 + (cz + oz) ** 2 <= r * r
    w[edge] = inside / sub**3
    w.setflags(write=False)
    return w


@functools.lru_cache(maxsize=16)
def _ball_transform(grid: GridSpec, r: float) -> np.ndarray:
    # integral of exp(i k.x) over |x| <= r, on the half spectrum, times the mode weight
    kr = grid.kmag * r
    shape = 4.0 * np.pi * r**3 * np.where(kr > 0, spherical_jn(1, kr) / np.where(kr > 0, kr, 1.0), 1.0 / 3.0)
    out = grid.mode_weight * shape
    out.setflags(write=False)
    return out


def localized_sobolev_norm(v, m: int, r: float) -> float:
    """H^m norm restricted to the ball |x| <= r about the origin.

    For r <= P/2 the integrand sum_{|alpha|<=m} |d^alpha v|^2 is formed on a
    grid twice as fine, where it is represented without aliasing, and paired
    with the Fourier transform of the ball; this is exact for band-limited v.
    Between P/2 and the half-diagonal the region is the minimum-image ball and
    a cell-fraction quadrature is used; beyond that every point is included.
    """
    _check_order(m)
    g = v.grid
    if not 0 < r <= g.half_diagonal * (1 + 1e-12):
        raise ValueError(f"radius {r!r} outside (0, {g.half_diagonal}] for this box")
    if r >= g.half_diagonal:
        return _quadrature(v, m, 1.0)
    if r > g.period / 2:
        return _quadrature(v, m, ball_weights(g, float(r)))
    fine = g.refined(2)
    density = np.zeros((fine.n,) * 3)
    for alpha in multi_indices(m):
        density += _pointwise_sq(resample(partial(v, alpha), fine))
    total = float(np.sum(_ball_transform(fine, float(r)) * _rfft(density).real))
    return float(np.sqrt(max(total, 0.0)))


def _quadrature(v, m: int, weight) -> float:
    g = v.grid
    total = 0.0
    for alpha in multi_indices(m):
        total += float(np.sum(weight * _pointwise_sq(partial(v, alpha))))
    return float(np.sqrt(total * g.h**3))


def _oversampled(v, factor: int):
    if factor == 1:
        return v
    if factor < 1:
        raise ValueError(f"oversampling factor must be a positive integer, got {factor!r}")
    return resample(v, v.grid.refined(factor))


def w_inf_norm(v, k: int, oversample: int = 1) -> float:
    """max over grid samples and |alpha| <= k of |d^alpha v|.

    A lower bound of the true supremum; tight for fields well resolved by the
    grid.  ``oversample`` evaluates on a grid that many times finer.
    """
    _check_order(k, "k")
    v = _oversampled(v, oversample)
    best = 0.0
    for alpha in multi_indices(k):
        best = max(best, float(np.sqrt(np.max(_pointwise_sq(partial(v, alpha))))))
    return best


def sup_norm(v, oversample: int = 1) -> float:
    return float(np.sqrt(np.max(_pointwise_sq(_oversampled(v, oversample)))))


def l1_fourier_norm(v) -> float:
    """Discrete surrogate of the L^1 norm of the Fourier transform.

    The box transform at a lattice mode is P^3 c_m and the spectral cell has
    volume (2 pi / P)^3, so the Riemann sum is (2 pi)^3 sum_m |c_m|, summed
    over the full (both-halves) lattice.
    """
    g = v.grid
    mag = np.sqrt(_modal_energy(v))
    return float((2.0 * np.pi) ** 3 * np.sum(g.mode_weight * mag))


@dataclass
class NormReport:
    h3: float
    h_m: list[float]
    w_k_inf: list[float]
    l1_fourier: float
    localized_h3: dict[float, float] = field(default_factory=dict)


def norm_report(v, radii: tuple[float, ...] = (), max_k: int = MAX_ORDER) -> NormReport:
    h_m = [sobolev_norm(v, m) for m in range(MAX_ORDER + 1)]
    w = [w_inf_norm(v, k) for k in range(max_k + 1)]
    return NormReport(
        h3=h_m[3],
        h_m=h_m,
        w_k_inf=w,
        l1_fourier=l1_fourier_norm(v),
        localized_h3={r: localized_sobolev_norm(v, 3, r) for r in radii},
    )


# -- products -------------------------------------------------------------


def real_gradient(v: SpectralField) -> np.ndarray:
    """Samples of d_j v_i, shape (3[j], 3[i], n, n, n)."""
    g = v.grid
    c = v.coeffs
    return np.stack([_irfft(1j * k * c, g.n) for k in g.k_vec])


def _advect_real(a_real: np.ndarray, grad_v: np.ndarray) -> np.ndarray:
    return a_real[0] * grad_v[0] + a_real[1] * grad_v[1] + a_real[2] * grad_v[2]


def _cross_real(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def _to_spectral_dealiased(real: np.ndarray, g: GridSpec) -> np.ndarray:
    return _rfft(real) * g.dealias_mask


def advect(a: SpectralField, v: SpectralField) -> SpectralField:
    """(a . grad) v, formed pointwise on the grid and dealiased."""
    if a.grid != v.grid:
        raise ValueError("fields live on different grids")
    g = a.grid
    out = _advect_real(a.real(), real_gradient(v))
    return SpectralField(g, _to_spectral_dealiased(out, g))


def cross(a: SpectralField, b: SpectralField) -> SpectralField:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    g = a.grid
    return SpectralField(g, _to_spectral_dealiased(_cross_real(a.real(), b.real()), g))


def dot(a: SpectralField, b: SpectralField) -> ScalarSpectralField:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    g = a.grid
    return ScalarSpectralField(g, _to_spectral_dealiased((a.real() * b.real()).sum(axis=0), g))


def multiply(s, v):
    """Pointwise product of a scalar (field or samples) with a field, dealiased."""
    g = v.grid
    s_real = s.real() if isinstance(s, ScalarSpectralField) else np.asarray(s)
    return type(v)(g, _to_spectral_dealiased(s_real * v.real(), g))


def hall_term(b: SpectralField) -> SpectralField:
    """curl((curl b) x b); the Hall coefficient is applied by the caller."""
    g = b.grid
    j = _irfft(_curl_coeffs(g, b.coeffs), g.n)
    inner_prod = _to_spectral_dealiased(_cross_real(j, b.real()), g)
    return SpectralField(g, _curl_coeffs(g, inner_prod))


def grid_integral(real: np.ndarray, grid: GridSpec) -> float:
    """Lattice quadrature of a sampled scalar over the box."""
    return float(np.sum(real) * grid.h**3)


__all__ = [
    "NormReport",
    "advect",
    "cross",
    "curl",
    "dot",
    "gradient_sobolev_norm_sq",
    "grid_integral",
    "hall_term",
    "inner",
    "l1_fourier_norm",
    "localized_sobolev_norm",
    "multiply",
    "norm_report",
    "real_gradient",
    "sobolev_norm",
    "sobolev_norm_sq",
    "sobolev_weight",
    "sup_norm",
    "w_inf_norm",
]
