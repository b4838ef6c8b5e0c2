"""Heat-semigroup reference flows f, g and the cut-off fields f~, g~."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import _cross_real, _to_spectral_dealiased, cross, multiply, sobolev_norm, w_inf_norm
from .data import BeltramiSeed, CutoffField, PaperParams, annulus_mask
from .spectral import SpectralField, curl, multi_indices, partial


def heat_flow(v, t: float, kappa: float):
    """Exact e^{kappa t Lap} v (multiplier exp(-kappa t |xi|^2))."""
    if t < 0:
        raise ValueError(f"heat flow needs t >= 0, got {t!r}")
    if not kappa > 0:
        raise ValueError(f"diffusivity must be positive, got {kappa!r}")
    if t == 0:
        return v.copy()
    return type(v)(v.grid, v.coeffs * np.exp(-kappa * t * v.grid.k2))


@dataclass
class ReferenceState:
    t: float
    f: SpectralField
    g: SpectralField
    f_tilde: SpectralField
    g_tilde: SpectralField


def reference_state(seed: BeltramiSeed, cutoff: CutoffField, params: PaperParams, t: float) -> ReferenceState:
    """f = e^{nu t Lap}(alpha1 v0), g = e^{mu t Lap}(alpha2 v0); tilde = chi times, dealiased.

    The flow is evolved first and multiplied by the cut-off afterwards.
    """
    f = heat_flow(seed.field * params.alpha1, t, params.nu)
    g = heat_flow(seed.field * params.alpha2, t, params.mu)
    return ReferenceState(t, f, g, multiply(cutoff.samples, f), multiply(cutoff.samples, g))


# -- pointwise decay ------------------------------------------------------


def decay_profile(v: SpectralField, max_k: int = 5) -> list[float]:
    """max_x (1+|x|) max_{|alpha|=k} |d^alpha v(x)| for k = 0..max_k."""
    g = v.grid
    weight = 1.0 + g.radius
    out = []
    for k in range(max_k + 1):
        best = 0.0
        for alpha in multi_indices(k, exact=True):
            r = partial(v, alpha).real()
            best = max(best, float(np.max(weight * np.sqrt((r**2).sum(axis=0)))))
        out.append(best)
    return out


@dataclass
class DecayReport:
    times: np.ndarray
    d_f: np.ndarray  # (len(times), 6): compensated surrogates for f
    d_g: np.ndarray
    l2_ratio_f: np.ndarray
    l2_bounds_f: np.ndarray  # (len(times), 2): [lower, upper]
    ripple: float = 0.05

    @staticmethod
    def _monotone(d: np.ndarray, ripple: float) -> bool:
        running = np.minimum.accumulate(d, axis=0)
        return bool(np.all(d <= running * (1 + ripple) + 1e-300))

    @property
    def monotone(self) -> bool:
        return self._monotone(self.d_f, self.ripple) and self._monotone(self.d_g, self.ripple)

    @property
    def bounded(self) -> bool:
        return bool(
            np.all(self.d_f <= self.d_f[0] * (1 + self.ripple) + 1e-300)
            and np.all(self.d_g <= self.d_g[0] * (1 + self.ripple) + 1e-300)
        )

    @property
    def l2_within_bounds(self) -> bool:
        lo, hi = self.l2_bounds_f[:, 0], self.l2_bounds_f[:, 1]
        r = self.l2_ratio_f
        return bool(np.all(r >= lo - 1e-12) and np.all(r <= hi + 1e-12))

    @property
    def passed(self) -> bool:
        return self.monotone and self.bounded and self.l2_within_bounds


def prop21_decay_check(
    seed: BeltramiSeed, params: PaperParams, times: Sequence[float], max_k: int = 5, ripple: float = 0.05
) -> DecayReport:
    """Track D_k(t) = max_x (1+|x|)|grad^k f| e^{nu t/4} (and g with mu) over ``times``.

    Passes when every D_k is nonincreasing up to ``ripple`` and bounded by its
    t = 0 value, and the L^2 decay of f stays within the annulus multiplier bounds.
    """
    times = np.asarray(times, dtype=float)
    v0 = seed.field
    base = sobolev_norm(v0, 0)
    d_f, d_g, ratio, bounds = [], [], [], []
    for t in times:
        f = heat_flow(v0 * params.alpha1, t, params.nu)
        g = heat_flow(v0 * params.alpha2, t, params.mu)
        d_f.append(np.array(decay_profile(f, max_k)) * math.exp(params.nu * t / 4))
        d_g.append(np.array(decay_profile(g, max_k)) * math.exp(params.mu * t / 4))
        ratio.append(sobolev_norm(f, 0) / (abs(params.alpha1) * base))
        bounds.append(
            [math.exp(-params.nu * t * (1 + seed.delta) ** 2), math.exp(-params.nu * t * (1 - seed.delta) ** 2)]
        )
    return DecayReport(times, np.array(d_f), np.array(d_g), np.array(ratio), np.array(bounds), ripple)


# -- quadratic reference quantities --------------------------------------


@dataclass
class ReferenceQuantities:
    t: float
    q1: float  # ||f~||_W5inf + ||g~||_W5inf  (nan when skipped)
    q2: float  # ||f~ x curl f~||_H3 + ||g~ x curl g~||_H3
    q3: float  # ||f~ x g~||_H3
    env1: float
    env2: float

    @property
    def ratio1(self) -> float:
        return self.q1 / self.env1 if self.env1 else math.nan

    @property
    def ratio2(self) -> float:
        return self.q2 / self.env2 if self.env2 else math.nan


def self_interaction(v: SpectralField) -> float:
    """||v x curl v||_{H^3}."""
    return sobolev_norm(cross(v, curl(v)), 3)


def prop22_quantities(state: ReferenceState, params: PaperParams, with_w_inf: bool = True) -> ReferenceQuantities:
    """Measured Q1, Q2, Q3 with their envelopes; |alpha_i| is used in the envelopes."""
    p = params
    t = state.t
    a1, a2 = abs(p.alpha1), abs(p.alpha2)
    q1 = w_inf_norm(state.f_tilde, 5) + w_inf_norm(state.g_tilde, 5) if with_w_inf else math.nan
    q2 = self_interaction(state.f_tilde) + self_interaction(state.g_tilde)
    q3 = sobolev_norm(cross(state.f_tilde, state.g_tilde), 3)
    env1 = a1 * p.m1 * math.exp(-p.nu * t / 4) + a2 * p.m1 * math.exp(-p.mu * t / 4)
    env2 = (a1**2 * math.exp(-p.nu * t / 2) + a2**2 * math.exp(-p.mu * t / 2)) * (
        p.delta * p.m0**1.5 * p.m1**2 + p.m2**2 / p.m0
    )
    return ReferenceQuantities(t, q1, q2, q3, env1, env2)


def cross_integral_envelope(params: PaperParams) -> float:
    """M0^{3/2} M1^2 delta (the constant C is not computable)."""
    return params.m0**1.5 * params.m1**2 * params.delta


def kernel_ratio_bound(seed: BeltramiSeed) -> float:
    """max over annulus mode pairs of ||p|^2 - |q|^2| / (|p|^2 + |q|^2)."""
    g = seed.grid
    active = np.any(seed.field.coeffs != 0, axis=0) & annulus_mask(g, seed.delta)
    r2 = g.k2[active]
    lo, hi = float(r2.min()), float(r2.max())
    return (hi - lo) / (hi + lo)


class HorizonTooShort(ValueError):
    pass


@dataclass
class CrossIntegral:
    value: float
    horizon: float
    tail_estimate: float
    times: np.ndarray
    integrand: np.ndarray


def default_cross_horizon(params: PaperParams) -> float:
    """Time after which the band-limited integrand has decayed by ~1e-6."""
    rate = (params.nu + params.mu) * (1 - params.delta) ** 2
    return math.log(1e6) / rate


def cross_integrand(seed: BeltramiSeed, cutoff: CutoffField, params: PaperParams, t: float) -> float:
    """||chi^2 f x g||_{H^3} at time t.

    The pointwise product chi^2 f x g is formed first and truncated once, which
    avoids truncating chi f and chi g separately.
    """
    f = heat_flow(seed.field * params.alpha1, t, params.nu).real()
    g = heat_flow(seed.field * params.alpha2, t, params.mu).real()
    grid = seed.grid
    prod = _to_spectral_dealiased(cutoff.samples**2 * _cross_real(f, g), grid)
    return sobolev_norm(SpectralField(grid, prod), 3)


def cross_time_grid(params: PaperParams, horizon: float, samples: int) -> np.ndarray:
    """Sample times equispaced in s = 1 - exp(-lam t), lam = (nu + mu)(1 - delta)^2 / 2.

    This clusters nodes where the integrand rises and peaks.
    """
    lam = 0.5 * (params.nu + params.mu) * (1 - params.delta) ** 2
    s = np.linspace(0.0, 1.0 - math.exp(-lam * horizon), samples)
    t = -np.log1p(-s) / lam
    t[-1] = horizon
    return t


def cross_decay_integral(
    seed: BeltramiSeed,
    cutoff: CutoffField,
    params: PaperParams,
    horizon: float | None = None,
    samples: int = 33,
) -> CrossIntegral:
    """Trapezoidal integral of ||f~ x g~||_{H^3} over [0, horizon].

    The tail beyond the horizon is bounded by Q3(T) / ((nu + mu)(1 - delta)^2);
    a tail above 1% of the integral is rejected.
    """
    if samples < 3:
        raise ValueError("need at least 3 time samples")
    T = default_cross_horizon(params) if horizon is None else float(horizon)
    if not T > 0:
        raise ValueError("horizon must be positive")
    times = cross_time_grid(params, T, samples)
    q3 = np.array([cross_integrand(seed, cutoff, params, t) for t in times])
    value = float(np.sum(0.5 * (q3[1:] + q3[:-1]) * np.diff(times)))
    tail = float(q3[-1] / ((params.nu + params.mu) * (1 - params.delta) ** 2))
    if value > 0 and tail > 0.01 * value:
        raise HorizonTooShort(f"tail estimate {tail:.3g} exceeds 1% of the integral {value:.3g}; raise the horizon")
    return CrossIntegral(value, T, tail, times, q3)
