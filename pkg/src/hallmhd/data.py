"""Large initial data: cut-off, annulus-supported Beltrami seed, composite (u0, b0)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .algebra import l1_fourier_norm, multiply, sobolev_norm, sup_norm
from .spectral import (
    GridSpec,
    ScalarSpectralField,
    SpectralField,
    curl,
    divergence,
    forward_transform,
    leray_project,
    multi_indices,
    partial,
    sqrt_neg_laplacian,
    symmetrize,
)


class ConstraintError(ValueError):
    """Parameters or data violate a constraint of the data class."""


class EmptyAnnulusError(ConstraintError):
    def __init__(self, delta: float, minimal_delta: float):
        self.delta = delta
        self.minimal_delta = minimal_delta
        super().__init__(
            f"no retained lattice mode satisfies 1-delta <= |xi| <= 1+delta for delta={delta:g}; "
            f"minimal feasible delta on this grid is {minimal_delta:.6g}"
        )


@dataclass(frozen=True)
class PaperParams:
    """Physical coefficients and data-class constants.

    The box period is tied to the localization scale, ``P = 8 m0``.
    """

    nu: float = 20.0
    mu: float = 25.0
    eta: float = 0.02
    delta: float = 0.25
    m0: float = 4.0
    m1: float = 150.0
    m2: float = 20.0
    alpha1: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        for name in ("nu", "mu", "eta"):
            if not getattr(self, name) > 0:
                raise ConstraintError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.delta <= 0.5:
            raise ConstraintError(f"annulus half-width must satisfy 0 < delta <= 1/2, got delta={self.delta!r}")
        if not self.m0 >= 1:
            raise ConstraintError(f"localization scale must satisfy M0 >= 1, got m0={self.m0!r}")
        if not (self.m1 > 0 and self.m2 > 0):
            raise ConstraintError("M1 and M2 must be positive")

    @property
    def period(self) -> float:
        return 8.0 * self.m0

    def grid(self, n: int) -> GridSpec:
        return GridSpec(n, self.period)


# -- cut-off --------------------------------------------------------------

STEP_SHARPNESS = 0.7


def smooth_step(s: np.ndarray, sharpness: float = STEP_SHARPNESS) -> np.ndarray:
    """C-infinity step: 1 for s <= 0, 0 for s >= 1.

    Built from exp(-a/t); with a = 0.7 the slope stays near 1.5, below the
    bound 2 required of the cut-off gradient.
    """
    s = np.asarray(s, dtype=float)
    t0 = np.clip(1.0 - s, 0.0, None)
    t1 = np.clip(s, 0.0, None)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t0 > 0, np.exp(-sharpness / np.where(t0 > 0, t0, 1.0)), 0.0)
        f1 = np.where(t1 > 0, np.exp(-sharpness / np.where(t1 > 0, t1, 1.0)), 0.0)
    return f0 / (f0 + f1)


def cutoff_profile(radius: np.ndarray, m0: float) -> np.ndarray:
    """chi(x / M0) as a function of |x|: 1 on |x| <= M0, 0 on |x| >= 2 M0."""
    return smooth_step(np.asarray(radius) / m0 - 1.0)


@dataclass
class CutoffField:
    values: ScalarSpectralField
    samples: np.ndarray
    m0: float


def build_cutoff(params: PaperParams, grid: GridSpec) -> CutoffField:
    if not 2 * params.m0 < grid.period / 2:
        raise ConstraintError(
            f"cut-off support |x| <= 2 M0 = {2 * params.m0:g} does not fit in a box of side {grid.period:g}"
        )
    samples = cutoff_profile(grid.radius, params.m0)
    return CutoffField(forward_transform(samples, grid), samples, params.m0)


def cutoff_derivative_bounds(cutoff: CutoffField, max_k: int = 5) -> list[float]:
    """M0^k * max_x max_{|alpha|=k} |d^alpha chi_M0|, k = 0..max_k.

    Scale-free: these are the derivative bounds of the unscaled profile chi.
    """
    out = []
    for k in range(max_k + 1):
        best = 0.0
        for alpha in multi_indices(k, exact=True):
            best = max(best, float(np.max(np.abs(partial(cutoff.values, alpha).real()))))
        out.append(best * cutoff.m0**k)
    return out


# -- helical basis --------------------------------------------------------


def helical_basis(xi: np.ndarray) -> np.ndarray:
    """Unit positive-helicity vector h with i xi x h = |xi| h.

    Frame: e1 from Gram-Schmidt of the coordinate axis least aligned with xi
    (ties go to the lower axis index), e2 = xi_hat x e1, h = (e1 + i e2)/sqrt 2.
    Accepts shape (3,) or (N, 3).
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    norm = np.linalg.norm(xi, axis=1)
    if np.any(norm == 0):
        raise ValueError("helical basis is undefined at xi = 0")
    xh = xi / norm[:, None]
    axis = np.argmin(np.abs(xh), axis=1)
    a = np.eye(3)[axis]
    e1 = a - np.sum(a * xh, axis=1)[:, None] * xh
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(xh, e1)
    h = (e1 + 1j * e2) / np.sqrt(2.0)
    return h[0] if single else h


# -- annulus --------------------------------------------------------------


def annulus_mask(grid: GridSpec, delta: float) -> np.ndarray:
    km = grid.kmag
    return grid.dealias_mask & (km >= 1.0 - delta) & (km <= 1.0 + delta)


def minimal_feasible_delta(grid: GridSpec) -> float:
    """Smallest delta for which the discrete annulus holds a retained mode."""
    km = grid.kmag[grid.dealias_mask]
    km = km[km > 0]
    return float(np.min(np.abs(km - 1.0)))


def check_annulus(grid: GridSpec, delta: float) -> int:
    """Number of half-spectrum annulus modes; raises if there are none."""
    count = int(np.count_nonzero(annulus_mask(grid, delta)))
    if count == 0:
        raise EmptyAnnulusError(delta, minimal_feasible_delta(grid))
    return count


def bump_profile(delta: float) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth radial weight on [1-delta, 1+delta], vanishing at both edges."""

    def a(r):
        s = (np.asarray(r) - 1.0) / delta
        inside = np.abs(s) < 1
        out = np.zeros_like(s, dtype=float)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    return a


# -- seed -----------------------------------------------------------------


@dataclass
class BeltramiSeed:
    field: SpectralField
    delta: float
    m1: float
    m2: float
    rng_seed: int
    mode_list: np.ndarray  # lattice indices of the stored (half-space) modes

    @property
    def grid(self) -> GridSpec:
        return self.field.grid


def _mode_xi(grid: GridSpec, mask: np.ndarray):
    idx = np.nonzero(mask)
    k = np.stack([grid.kx[idx[0], 0, 0], grid.ky[0, idx[1], 0], grid.kz[0, 0, idx[2]]], axis=1)
    lat = np.stack(
        [grid.lattice_index[idx[0]], grid.lattice_index[idx[1]], grid.lattice_index[idx[2]]], axis=1
    )
    return idx, k, lat


def _normalize_to_l1(grid: GridSpec, coeffs: np.ndarray, m1: float) -> SpectralField:
    v = symmetrize(SpectralField(grid, coeffs))
    l1 = l1_fourier_norm(v)
    if not l1 > 0:
        raise ConstraintError("seed profile vanishes on every annulus mode; widen delta or refine the box")
    return SpectralField(grid, v.coeffs * (m1 / l1))


def build_beltrami_seed(
    params: PaperParams,
    grid: GridSpec,
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    rng_seed: int = 0,
    n_packets: int = 3,
    packet_radius: float = 1.0,
) -> BeltramiSeed:
    """Annulus-supported positive-helicity field with discrete L^1-Fourier norm M1.

    On each annulus mode the coefficient is a(|xi|) * (h^H W(xi)) h(xi), the
    helical projection of a random smooth amplitude
    W(xi) = sum_j w_j exp(-i xi . x_j) (real Gaussian w_j, centres |x_j| <=
    packet_radius).  The phase arg(h^H W) varies randomly but smoothly across
    the annulus, so the field stays concentrated near the origin like the
    whole-space seed it stands in for.
    """
    delta = params.delta
    check_annulus(grid, delta)
    mask = annulus_mask(grid, delta)
    a = profile if profile is not None else bump_profile(delta)

    rng = np.random.default_rng(rng_seed)
    w = rng.standard_normal((n_packets, 3))
    dirs = rng.standard_normal((n_packets, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    centres = dirs * (packet_radius * rng.random(n_packets) ** (1.0 / 3.0))[:, None]

    idx, xi, lat = _mode_xi(grid, mask)
    h = helical_basis(xi)
    phase = np.exp(-1j * xi @ centres.T)  # (N, J)
    W = phase @ w  # (N, 3)
    amp = np.sum(np.conj(h) * W, axis=1) * a(np.linalg.norm(xi, axis=1))
    coeffs = np.zeros((3,) + grid.spectral_shape, dtype=np.complex128)
    for j in range(3):
        coeffs[j][idx] = amp * h[:, j]
    v = _normalize_to_l1(grid, coeffs, params.m1)
    return BeltramiSeed(v, delta, params.m1, params.m2, rng_seed, lat)


def helical_wave_seed(
    params: PaperParams, grid: GridSpec, modes: Sequence[Sequence[int]], require_annulus: bool = True
) -> BeltramiSeed:
    """Superposition of helical plane waves h(xi_m) e^{i xi_m x} (+ c.c.) at the given lattice indices."""
    modes = np.atleast_2d(np.asarray(modes, dtype=np.int64))
    coeffs = np.zeros((3,) + grid.spectral_shape, dtype=np.complex128)
    n = grid.n
    for m in modes:
        if m[2] < 0 or (m[2] == 0 and (m[1] < 0 or (m[1] == 0 and m[0] < 0))):
            m = -m
        xi = m * grid.dk
        if require_annulus and not (1 - params.delta <= np.linalg.norm(xi) <= 1 + params.delta):
            raise ConstraintError(f"mode {tuple(m)} has |xi|={np.linalg.norm(xi):.4g}, outside the annulus")
        if np.any(3 * np.abs(m) >= n):
            raise ConstraintError(f"mode {tuple(m)} lies outside the dealiasing mask")
        h = helical_basis(xi)
        coeffs[:, m[0] % n, m[1] % n, m[2]] += h
        if m[2] == 0:
            coeffs[:, -m[0] % n, -m[1] % n, 0] += np.conj(h)
    v = _normalize_to_l1(grid, coeffs, params.m1)
    return BeltramiSeed(v, params.delta, params.m1, params.m2, -1, modes)


@dataclass
class SeedReport:
    beltrami_residual: float
    divergence_residual: float
    support_exact: bool
    l1_fourier: float
    decay_surrogate: list[float]  # max_x (1+|x|) |grad^k v0|, k = 0..5
    m1: float
    m2: float

    @property
    def l1_ok(self) -> bool:
        return self.l1_fourier <= self.m1 * (1 + 1e-9)

    @property
    def decay_ok(self) -> bool:
        return max(self.decay_surrogate) <= self.m2

    @property
    def passed(self) -> bool:
        return self.beltrami_residual < 1e-10 and self.support_exact and self.l1_ok


def beltrami_residual(v: SpectralField) -> float:
    """||curl v - sqrt(-Lap) v||_{L^2} / ||v||_{L^2}."""
    norm = sobolev_norm(v, 0)
    if norm == 0:
        return 0.0
    return sobolev_norm(curl(v) - sqrt_neg_laplacian(v), 0) / norm


def divergence_residual(v: SpectralField) -> float:
    norm = sobolev_norm(v, 1)
    return sobolev_norm(divergence(v), 0) / norm if norm else 0.0


def decay_surrogate(v: SpectralField, max_k: int = 5) -> list[float]:
    g = v.grid
    weight = 1.0 + g.radius
    out = []
    for k in range(max_k + 1):
        pointwise = np.zeros((g.n,) * 3)
        for alpha in multi_indices(k, exact=True):
            r = partial(v, alpha).real()
            np.maximum(pointwise, np.sqrt((r**2).sum(axis=0)), out=pointwise)
        out.append(float(np.max(weight * pointwise)))
    return out


def verify_seed_properties(seed: BeltramiSeed) -> SeedReport:
    v = seed.field
    outside = ~annulus_mask(v.grid, seed.delta)
    support = not np.any(v.coeffs[:, outside])
    return SeedReport(
        beltrami_residual=beltrami_residual(v),
        divergence_residual=divergence_residual(v),
        support_exact=support,
        l1_fourier=l1_fourier_norm(v),
        decay_surrogate=decay_surrogate(v),
        m1=seed.m1,
        m2=seed.m2,
    )


# -- composite data -------------------------------------------------------


def random_small_field(
    grid: GridSpec, h3_norm: float, rng_seed: int = 0, k_lo: float = 1.0, k_hi: float = 2.0
) -> SpectralField:
    """Random divergence-free field supported on k_lo <= |xi| <= k_hi with exact H^3 norm."""
    rng = np.random.default_rng(rng_seed)
    shell = grid.dealias_mask & (grid.kmag >= k_lo) & (grid.kmag <= k_hi)
    if not np.any(shell):
        raise ConstraintError(f"no retained modes with {k_lo} <= |xi| <= {k_hi}")
    c = rng.standard_normal((3,) + grid.spectral_shape) + 1j * rng.standard_normal((3,) + grid.spectral_shape)
    v = leray_project(symmetrize(SpectralField(grid, c * shell)))
    if h3_norm == 0:
        return SpectralField.zeros(grid)
    return v * (h3_norm / sobolev_norm(v, 3))


@dataclass
class InitialData:
    u0: SpectralField
    b0: SpectralField
    report: dict = field(default_factory=dict)


def assemble_initial_data(
    params: PaperParams,
    seed: BeltramiSeed,
    cutoff: CutoffField,
    u01: Optional[SpectralField] = None,
    b01: Optional[SpectralField] = None,
    project: bool = True,
) -> InitialData:
    """u0 = u01 + P[chi alpha1 v0], b0 = b01 + P[chi alpha2 v0].

    The cut-off product is not exactly solenoidal; with ``project`` it is
    Leray-projected and the size of the removed gradient part is reported.
    """
    grid = seed.grid
    u01 = SpectralField.zeros(grid) if u01 is None else u01
    b01 = SpectralField.zeros(grid) if b01 is None else b01
    small = sobolev_norm(u01, 3) + sobolev_norm(b01, 3)
    bound = params.m0**-0.5
    if small > bound * (1 + 1e-12):
        raise ConstraintError(
            f"small part too large: ||u01||_H3 + ||b01||_H3 = {small:.6g} > M0^(-1/2) = {bound:.6g}"
        )
    for name, f in (("u01", u01), ("b01", b01)):
        d = divergence_residual(f)
        if d > 1e-10:
            raise ConstraintError(f"{name} is not divergence-free (relative residual {d:.3g})")

    chi_v = multiply(cutoff.samples, seed.field)
    parts = {}
    out = []
    for name, alpha, base in (("u", params.alpha1, u01), ("b", params.alpha2, b01)):
        large = chi_v * alpha
        if project:
            proj = leray_project(large)
            parts[f"projection_correction_{name}_h3"] = sobolev_norm(large - proj, 3)
            large = proj
        else:
            parts[f"projection_correction_{name}_h3"] = 0.0
        out.append(base + large)
    u0, b0 = out
    report = {
        "small_data_h3": small,
        "small_data_bound": bound,
        "u0_h3": sobolev_norm(u0, 3),
        "b0_h3": sobolev_norm(b0, 3),
        "u0_linf": sup_norm(u0),
        "b0_linf": sup_norm(b0),
        "divergence_u0": divergence_residual(u0),
        "divergence_b0": divergence_residual(b0),
        **parts,
    }
    return InitialData(u0, b0, report)


def remark_h3_envelope(params: PaperParams) -> float:
    """M0^(-1/2) + (|alpha1| + |alpha2|) sum_{k=0}^{3} M2 / M0^k."""
    s = sum(params.m2 / params.m0**k for k in range(4))
    return params.m0**-0.5 + (abs(params.alpha1) + abs(params.alpha2)) * s
